"""Trip/epoch lifecycle: anticipation, choice, recording, adaptation, metrics.

A run advances in epochs of ``trips_per_epoch`` trips.  Within a trip every
agent anticipates both modes (one freshly sampled prospective observation per
mode by default), adds the conformity bonus, chooses via a two-way softmax,
and records the realized perceived utilities of the chosen mode into its
epoch ledger.  At epoch boundaries non-stabilized agents update semantic
distances; an agent whose distances survive ``stabilization_window``
consecutive epochs untouched is marked stabilized and stops adapting (it
keeps choosing).  The run halts when everyone is stabilized or at
``max_epochs``.

Everything an emitted record contains is a pure function of the
configuration and the master seed.  Seed layout: the master seed spawns
independent child streams for graph generation (0), initial distances (1),
and the trip loop (2), so runs with and without a network consume identical
trip streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from ._backend import Backend, build_mode_table, get_backend
from ._backend.plan import KernelPlan, TripsOut
from .errors import ValidationError
from .identity import AdaptationParams, EpochLedger, IdentityProfile, Schema
from .network import SocialGraph, bus_fraction_vector, generate_erdos_renyi
from .transit import (
    DEFAULT_BUS,
    DEFAULT_PERCEPTION,
    DEFAULT_TAXI,
    DEFAULT_TRIP_DISTANCE_KM,
    ModeParameters,
    PerceptionParams,
    TransitMode,
    TripObservation,
    VALUES,
    default_value_schema,
    observe_trip,
    perceive,
)

# Softmax temperature calibrated alongside the perception defaults; see README.
DEFAULT_CHOICE_TEMPERATURE = 0.17

DEFAULT_MASTER_SEED = 12345

_GRAPH_STREAM, _INIT_STREAM, _TRIP_STREAM = 0, 1, 2


@dataclass(frozen=True)
class GraphConfig:
    """Erdos-Renyi parameters; ``seed`` of None derives from the master seed."""

    p: float = 0.02
    seed: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValidationError(f"edge probability must lie in [0, 1], got {self.p}")


@dataclass(frozen=True)
class SimulationConfig:
    """Complete specification of one run."""

    n_agents: int = 500
    gamma: float | tuple[float, ...] = 0.8
    initial_distance_ranges: tuple[tuple[float, float], ...] = ((0.0, 4.0),) * 4
    trips_per_epoch: int = 10
    max_epochs: int = 200
    adaptation: AdaptationParams = AdaptationParams()
    perception: PerceptionParams = DEFAULT_PERCEPTION
    modes: tuple[ModeParameters, ModeParameters] = (DEFAULT_BUS, DEFAULT_TAXI)
    graph: GraphConfig | None = GraphConfig()
    cf: float = 0.0
    choice_temperature: float = DEFAULT_CHOICE_TEMPERATURE
    master_seed: int = DEFAULT_MASTER_SEED
    trip_distance_km: float = DEFAULT_TRIP_DISTANCE_KM
    anticipation: str = "sample"

    def __post_init__(self):
        if self.n_agents < 1:
            raise ValidationError("n_agents must be at least 1")
        if self.trips_per_epoch < 1:
            raise ValidationError("trips_per_epoch must be at least 1")
        if self.max_epochs < 0:
            raise ValidationError("max_epochs must be non-negative")
        if self.choice_temperature <= 0:
            raise ValidationError("choice_temperature must be positive")
        if not 0.0 <= self.cf <= 1.0:
            raise ValidationError(f"cf must lie in [0, 1], got {self.cf}")
        if self.trip_distance_km <= 0:
            raise ValidationError("trip_distance_km must be positive")
        if self.anticipation not in ("sample", "expectation"):
            raise ValidationError("anticipation must be 'sample' or 'expectation'")
        gammas = self.gamma if isinstance(self.gamma, tuple) else (self.gamma,)
        if isinstance(self.gamma, tuple) and len(self.gamma) != self.n_agents:
            raise ValidationError("per-agent gamma needs one value per agent")
        for g in gammas:
            if not 0.0 <= g <= 1.0:
                raise ValidationError(f"gamma must lie in [0, 1], got {g}")
        if len(self.initial_distance_ranges) != len(VALUES):
            raise ValidationError(f"need one distance range per value ({len(VALUES)})")
        for lo, hi in self.initial_distance_ranges:
            if lo > hi:
                raise ValidationError(f"distance range [{lo}, {hi}] has lo > hi")
            if lo < self.adaptation.d_min or hi > self.adaptation.d_max:
                raise ValidationError(
                    f"distance range [{lo}, {hi}] escapes the clamp "
                    f"[{self.adaptation.d_min}, {self.adaptation.d_max}]"
                )
        if len(self.modes) != 2:
            raise ValidationError("exactly two transit modes are supported")


@dataclass
class AgentState:
    """Snapshot view of one agent (see Population)."""

    profile: IdentityProfile
    ledger: EpochLedger
    last_choice: TransitMode | None
    change_history: np.ndarray  # (epochs, values) bool
    stabilized: bool


@dataclass(frozen=True)
class TripRecord:
    """Audit row for one agent on one trip."""

    trip_index: int
    agent_id: int
    anticipated_utilities: tuple[float, float]
    conformity_bonuses: tuple[float, float]
    chosen: TransitMode
    realized_observation: TripObservation
    realized_perceived: np.ndarray


class TripBatch:
    """Columnar audit record of one trip across all agents."""

    def __init__(self, trip_index: int, out: TripsOut):
        if out.anticipated is None:
            raise ValueError("TripBatch requires kernel audit buffers")
        self.trip_index = trip_index
        self.choices = out.choices[0]
        self.bus_fraction = float(out.bus_fraction[0])
        self.anticipated = out.anticipated[0]
        self.bonuses = out.bonuses[0]
        self.observations = out.observations[0]
        self.perceived = out.perceived[0]

    def __len__(self) -> int:
        return self.choices.shape[0]

    def record(self, agent_id: int) -> TripRecord:
        obs = self.observations[agent_id]
        return TripRecord(
            trip_index=self.trip_index,
            agent_id=agent_id,
            anticipated_utilities=(float(self.anticipated[agent_id, 0]), float(self.anticipated[agent_id, 1])),
            conformity_bonuses=(float(self.bonuses[agent_id, 0]), float(self.bonuses[agent_id, 1])),
            chosen=TransitMode(int(self.choices[agent_id])),
            realized_observation=TripObservation(obs[0], obs[1], obs[2], obs[3]),
            realized_perceived=self.perceived[agent_id].copy(),
        )

    def records(self) -> list[TripRecord]:
        return [self.record(i) for i in range(len(self))]


class Population:
    """Array-of-agents state; indexable as a sequence of AgentState views."""

    def __init__(self, config: SimulationConfig, distances: np.ndarray, rng: np.random.Generator):
        n = config.n_agents
        self.config = config
        self.schema = default_value_schema()
        self.gammas = (
            np.asarray(config.gamma, dtype=np.float64)
            if isinstance(config.gamma, tuple)
            else np.full(n, float(config.gamma))
        )
        self.distances = distances  # (n, 4)
        self.ledger = np.zeros((n, 4))
        self.runs_recorded = 0
        self.last_choice = np.full(n, -1, dtype=np.int8)
        self.trips_completed = 0
        self.epochs_completed = 0
        self.change_history: list[np.ndarray] = []
        self.stabilized = np.zeros(n, dtype=bool)
        self.quiet_epochs = np.zeros(n, dtype=np.int32)
        self.rng = rng

    def __len__(self) -> int:
        return self.config.n_agents

    def __getitem__(self, agent_id: int) -> AgentState:
        if not 0 <= agent_id < len(self):
            raise IndexError(agent_id)
        choice = self.last_choice[agent_id]
        history = (
            np.stack([h[agent_id] for h in self.change_history])
            if self.change_history
            else np.zeros((0, 4), dtype=bool)
        )
        return AgentState(
            profile=IdentityProfile(VALUES, self.distances[agent_id].copy(), float(self.gammas[agent_id])),
            ledger=EpochLedger(self.ledger[agent_id].copy(), self.runs_recorded),
            last_choice=TransitMode(int(choice)) if choice >= 0 else None,
            change_history=history,
            stabilized=bool(self.stabilized[agent_id]),
        )

    def __iter__(self) -> Iterator[AgentState]:
        return (self[i] for i in range(len(self)))

    def attenuation_matrix(self) -> np.ndarray:
        raw = self.gammas[:, None] ** self.distances
        return raw / raw.sum(axis=1, keepdims=True)


@dataclass
class EpochRecord:
    """Population distance summary at the end of one epoch."""

    epoch: int
    mean_distance: np.ndarray  # (4,)
    mean_distance_bus: np.ndarray  # (4,), NaN when the subpopulation is empty
    mean_distance_taxi: np.ndarray  # (4,)
    n_bus: int
    n_taxi: int
    stabilized_fraction: float


@dataclass
class PopulationMetrics:
    bus_fraction_per_trip: np.ndarray
    epochs: list[EpochRecord]
    initial_mean_distance: np.ndarray
    stabilized_fraction: float
    public_transit_share: float
    public_transit_share_all: float
    stabilized_count: int
    epochs_run: int
    halted: str


@dataclass
class SimulationResult:
    config: SimulationConfig
    metrics: PopulationMetrics
    population: Population
    graph: SocialGraph | None
    trip_batches: list[TripBatch] | None = None


def _stream(master_seed: int, key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(key,))))


def initialize_population(config: SimulationConfig) -> tuple[Population, SocialGraph | None]:
    """Draw initial distances per value range and generate the network.

    Deterministic under ``config.master_seed``; the graph uses its own child
    stream (or ``config.graph.seed`` when given) so its presence never
    perturbs the trip stream.
    """
    n = config.n_agents
    init_rng = _stream(config.master_seed, _INIT_STREAM)
    distances = np.empty((n, len(VALUES)))
    for v, (lo, hi) in enumerate(config.initial_distance_ranges):
        distances[:, v] = init_rng.uniform(lo, hi, size=n)
    graph = None
    if config.graph is not None:
        seed = (
            config.graph.seed
            if config.graph.seed is not None
            else np.random.SeedSequence(config.master_seed, spawn_key=(_GRAPH_STREAM,))
        )
        graph = generate_erdos_renyi(n, config.graph.p, seed)
    pop = Population(config, distances, _stream(config.master_seed, _TRIP_STREAM))
    return pop, graph


def build_plan(config: SimulationConfig, graph: SocialGraph | None) -> KernelPlan:
    p = config.perception
    return KernelPlan(
        n=config.n_agents,
        schema=np.ascontiguousarray(default_value_schema().weights),
        modes=tuple(build_mode_table(m, config.trip_distance_km) for m in config.modes),
        cost_ref=p.cost_reference,
        time_ref=p.time_reference,
        carbon_ref=p.carbon_reference,
        cost_scale=p.cost_scale,
        time_scale=p.time_scale,
        carbon_scale=p.carbon_scale,
        alpha=p.alpha,
        beta=p.beta,
        lam=p.loss_aversion,
        distance_km=config.trip_distance_km,
        cf=config.cf,
        temperature=config.choice_temperature,
        anticipate_expectation=config.anticipation == "expectation",
        indptr=None if graph is None else graph.indptr,
        indices=None if graph is None else graph.indices,
    )


def anticipated_utilities(
    agent: AgentState,
    config: SimulationConfig,
    graph: SocialGraph | None,
    previous_choices: Sequence | None,
    rng: np.random.Generator,
    agent_id: int = 0,
) -> tuple[float, float]:
    """Per-mode anticipated utility for one agent (bus, taxi), bonus included.

    Draws one prospective observation per mode from ``rng`` (bus first),
    perceives it, aggregates through the agent's identity, then adds the
    conformity bonus.  Scalar reference path; the kernels vectorize this.
    """
    from .identity import perceived_utility
    from .network import conformity_bonus, neighbor_fraction

    schema = default_value_schema()
    utils = []
    for mode_params in config.modes:
        if config.anticipation == "expectation":
            table = build_mode_table(mode_params, config.trip_distance_km)
            obs = TripObservation(
                cost=mode_params.cost,
                time=table.expected_time,
                congestion=table.expected_occupancy / mode_params.seating_capacity,
                carbon=config.trip_distance_km * mode_params.emission_g_per_km / table.expected_occupancy,
            )
        else:
            obs = observe_trip(mode_params, config.trip_distance_km, rng)
        utils.append(perceived_utility(agent.profile, schema, perceive(obs, config.perception)))
    bonuses = []
    for mode in (TransitMode.BUS, TransitMode.TAXI):
        if graph is None:
            frac = 0.5
        else:
            frac = neighbor_fraction(graph, agent_id, mode, previous_choices)
        bonuses.append(conformity_bonus(config.cf, frac))
    return utils[0] + bonuses[0], utils[1] + bonuses[1]


def choice_probabilities(utilities: Sequence[float], temperature: float) -> tuple[float, float]:
    """Softmax probabilities for (bus, taxi): P(mode) proportional to exp(u / T).

    Computed in logistic form on the utility difference, which is the
    max-subtracted softmax for two alternatives and cannot overflow; adding a
    constant to both utilities leaves the result unchanged.
    """
    if temperature <= 0:
        raise ValidationError("temperature must be positive")
    u_bus, u_taxi = float(utilities[0]), float(utilities[1])
    with np.errstate(over="ignore"):  # exp overflow saturates to p = 0, as intended
        p_bus = float(1.0 / (1.0 + np.exp((u_taxi - u_bus) / temperature)))
    return p_bus, 1.0 - p_bus


def choose(utilities: Sequence[float], temperature: float, rng: np.random.Generator) -> TransitMode:
    """Sample a mode from the softmax choice distribution."""
    p_bus, _ = choice_probabilities(utilities, temperature)
    return TransitMode.BUS if rng.random() < p_bus else TransitMode.TAXI


def run_trip(
    population: Population,
    graph: SocialGraph | None,
    config: SimulationConfig,
    trip_index: int,
    backend: str | Backend | None = None,
) -> tuple[Population, TripBatch]:
    """Advance every agent by one trip, returning full audit records.

    Choices are synchronous: every agent sees the previous trip's choices.
    Realized perceived utilities (without conformity bonuses) accumulate into
    the agents' epoch ledgers.
    """
    b = backend if isinstance(backend, Backend) else get_backend(backend)
    plan = build_plan(config, graph)
    out = b.run_trips(
        plan,
        population.attenuation_matrix(),
        population.ledger,
        population.last_choice,
        population.trips_completed > 0,
        population.rng,
        1,
        audit=True,
    )
    population.runs_recorded += 1
    population.trips_completed += 1
    return population, TripBatch(trip_index, out)


def _epoch_update(pop: Population, adaptation: AdaptationParams) -> None:
    """Apply the distance update rule and advance stabilization bookkeeping."""
    u = pop.ledger
    d = pop.distances
    a = adaptation
    moved = np.where(u > a.threshold, d - a.step, np.where(u < a.threshold, d + a.step, d))
    clamped = np.clip(moved, a.d_min, a.d_max)
    active = ~pop.stabilized
    changed = (clamped != d) & active[:, None]
    pop.distances = np.where(active[:, None], clamped, d)
    pop.change_history.append(changed)
    agent_changed = changed.any(axis=1)
    pop.quiet_epochs = np.where(agent_changed, 0, pop.quiet_epochs + 1)
    pop.stabilized |= pop.quiet_epochs >= a.stabilization_window
    pop.ledger[:] = 0.0
    pop.runs_recorded = 0
    pop.epochs_completed += 1


def _epoch_record(pop: Population) -> EpochRecord:
    bus = pop.last_choice == int(TransitMode.BUS)
    taxi = pop.last_choice == int(TransitMode.TAXI)

    def safe_mean(mask):
        if not np.any(mask):
            return np.full(4, np.nan)
        return pop.distances[mask].mean(axis=0)

    return EpochRecord(
        epoch=pop.epochs_completed,
        mean_distance=pop.distances.mean(axis=0),
        mean_distance_bus=safe_mean(bus),
        mean_distance_taxi=safe_mean(taxi),
        n_bus=int(bus.sum()),
        n_taxi=int(taxi.sum()),
        stabilized_fraction=float(pop.stabilized.mean()),
    )


def _final_metrics(
    pop: Population,
    bus_fractions: list[float],
    epochs: list[EpochRecord],
    initial_mean: np.ndarray,
    halted: str,
) -> PopulationMetrics:
    bus = pop.last_choice == int(TransitMode.BUS)
    share_all = float(bus.mean()) if pop.trips_completed else float("nan")
    stab_count = int(pop.stabilized.sum())
    if stab_count > 0:
        share_stab = float(bus[pop.stabilized].mean())
    else:
        share_stab = share_all
    return PopulationMetrics(
        bus_fraction_per_trip=np.asarray(bus_fractions),
        epochs=epochs,
        initial_mean_distance=initial_mean,
        stabilized_fraction=float(pop.stabilized.mean()),
        public_transit_share=share_stab,
        public_transit_share_all=share_all,
        stabilized_count=stab_count,
        epochs_run=pop.epochs_completed,
        halted=halted,
    )


def run_simulation(
    config: SimulationConfig,
    backend: str | Backend | None = None,
    collect_trip_batches: bool = False,
) -> SimulationResult:
    """Run epochs until every agent is stabilized or ``max_epochs`` is reached."""
    b = backend if isinstance(backend, Backend) else get_backend(backend)
    pop, graph = initialize_population(config)
    plan = build_plan(config, graph)
    initial_mean = pop.distances.mean(axis=0)
    bus_fractions: list[float] = []
    epochs: list[EpochRecord] = []
    batches: list[TripBatch] | None = [] if collect_trip_batches else None

    halted = "no_epochs" if config.max_epochs == 0 else "max_epochs"
    for _ in range(config.max_epochs):
        if np.all(pop.stabilized):
            halted = "stabilized"
            break
        weights = pop.attenuation_matrix()
        if batches is None:
            out = b.run_trips(
                plan,
                weights,
                pop.ledger,
                pop.last_choice,
                pop.trips_completed > 0,
                pop.rng,
                config.trips_per_epoch,
                audit=False,
            )
            bus_fractions.extend(out.bus_fraction.tolist())
        else:
            for _r in range(config.trips_per_epoch):
                out = b.run_trips(
                    plan,
                    weights,
                    pop.ledger,
                    pop.last_choice,
                    pop.trips_completed > 0,
                    pop.rng,
                    1,
                    audit=True,
                )
                batch = TripBatch(pop.trips_completed, out)
                batches.append(batch)
                bus_fractions.append(batch.bus_fraction)
                pop.trips_completed += 1
                pop.runs_recorded += 1
        if batches is None:
            pop.trips_completed += config.trips_per_epoch
            pop.runs_recorded = config.trips_per_epoch
        _epoch_update(pop, config.adaptation)
        epochs.append(_epoch_record(pop))
    else:
        if config.max_epochs > 0 and np.all(pop.stabilized):
            halted = "stabilized"

    metrics = _final_metrics(pop, bus_fractions, epochs, initial_mean, halted)
    return SimulationResult(config, metrics, pop, graph, batches)
