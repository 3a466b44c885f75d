"""Multi-agent transit-choice simulation with value-bearing agent identities."""

from ._backend import available_backends, get_backend
from .engine import (
    AgentState,
    DEFAULT_CHOICE_TEMPERATURE,
    EpochRecord,
    GraphConfig,
    Population,
    PopulationMetrics,
    SimulationConfig,
    SimulationResult,
    TripBatch,
    TripRecord,
    anticipated_utilities,
    choice_probabilities,
    choose,
    initialize_population,
    run_simulation,
    run_trip,
)
from .errors import (
    ConfigError,
    DegenerateProfileError,
    DimensionMismatchError,
    IncompleteEpochError,
    ValidationError,
)
from .identity import (
    AdaptationParams,
    EpochLedger,
    IdentityProfile,
    Schema,
    attenuation_weights,
    is_stabilized,
    marginal_identity_utility,
    perceived_utility,
    record_run,
    update_distances,
)
from .network import (
    SocialGraph,
    conformity_bonus,
    generate_erdos_renyi,
    neighbor_fraction,
    write_edge_list,
)
from .transit import (
    CategoricalOccupancy,
    DEFAULT_BUS,
    DEFAULT_PERCEPTION,
    DEFAULT_TAXI,
    DEFAULT_TRIP_DISTANCE_KM,
    GaussianOccupancy,
    ModeParameters,
    OBSERVABLES,
    PerceptionParams,
    TransitMode,
    TripObservation,
    VALUES,
    carbon_footprint,
    congestion,
    congestion_utility,
    default_value_schema,
    gumbel_params,
    observe_trip,
    perceive,
    prospect_value,
    sample_occupancy,
    sample_time,
)

__version__ = "0.1.0"
