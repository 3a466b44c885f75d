"""Transit scenario: the two modes, stochastic observables, perception.

Observables per trip are cost (constant per mode), travel time (right-skewed
Gumbel), congestion (occupancy over seating capacity) and carbon footprint
per passenger (distance times emission rate over occupancy).  Cost, time and
carbon pass through an asymmetric gain/loss value function; congestion uses
the shifted-ReLU transform 2 - max(1, congestion).
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ValidationError
from .identity import ROW_SUM_TOL, Schema

EULER_MASCHERONI = 0.5772156649015329

OBSERVABLES = ("cost", "time", "congestion", "carbon")
VALUES = ("frugalism", "idealism", "individualism", "pragmatism")

MAX_TIME_RESAMPLES = 100
MIN_TIME_MINUTES = 0.1


class TransitMode(enum.IntEnum):
    BUS = 0
    TAXI = 1


@dataclass(frozen=True)
class GaussianOccupancy:
    """Occupancy drawn from a rounded Gaussian, clamped to [1, max_occupancy]."""

    mean: float
    var: float

    def __post_init__(self):
        if self.var <= 0:
            raise ValidationError("occupancy variance must be positive")


@dataclass(frozen=True)
class CategoricalOccupancy:
    """Occupancy drawn from an explicit discrete distribution."""

    values: tuple[int, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if len(self.values) != len(self.probs) or not self.values:
            raise ValidationError("occupancy values and probabilities must pair up")
        if any(p < 0 for p in self.probs):
            raise ValidationError("occupancy probabilities must be non-negative")
        if abs(sum(self.probs) - 1.0) > ROW_SUM_TOL:
            raise ValidationError(f"occupancy probabilities sum to {sum(self.probs)!r}, expected 1")
        if any(v < 1 for v in self.values):
            raise ValidationError("occupancy values must be at least 1")

    def cdf(self) -> np.ndarray:
        return np.cumsum(np.asarray(self.probs, dtype=np.float64))


@dataclass(frozen=True)
class ModeParameters:
    """Static parameters of one transit mode.

    ``time_var`` is a variance in minutes squared by default; set
    ``time_var_is_std`` to interpret it as a standard deviation instead.
    """

    cost: float
    time_mean: float
    time_var: float
    seating_capacity: int
    max_occupancy: int
    occupancy: GaussianOccupancy | CategoricalOccupancy
    emission_g_per_km: float
    time_var_is_std: bool = False

    def __post_init__(self):
        if self.cost < 0:
            raise ValidationError("cost must be non-negative")
        if self.time_var <= 0:
            raise ValidationError("time variance must be positive")
        if self.seating_capacity < 1:
            raise ValidationError("seating capacity must be at least 1")
        if self.max_occupancy < self.seating_capacity:
            raise ValidationError("max occupancy must be at least the seating capacity")
        if self.emission_g_per_km < 0:
            raise ValidationError("emission rate must be non-negative")
        if isinstance(self.occupancy, CategoricalOccupancy):
            if max(self.occupancy.values) > self.max_occupancy:
                raise ValidationError("occupancy values exceed max occupancy")

    @property
    def time_variance(self) -> float:
        return self.time_var**2 if self.time_var_is_std else self.time_var


@dataclass(frozen=True)
class TripObservation:
    """Realized observables of a single trip on one mode."""

    cost: float
    time: float
    congestion: float
    carbon: float

    def __post_init__(self):
        if self.time <= 0:
            raise ValidationError("trip time must be positive")
        if self.congestion <= 0:
            raise ValidationError("congestion must be positive")
        if self.carbon < 0:
            raise ValidationError("carbon must be non-negative")

    def as_array(self) -> np.ndarray:
        return np.array([self.cost, self.time, self.congestion, self.carbon])


@dataclass(frozen=True)
class PerceptionParams:
    """Gain/loss transform parameters for cost, time and carbon.

    Observables are costs, so the gain of observing ``x`` against a reference
    is (reference - x) / scale; gains map to g ** alpha and losses to
    -loss_aversion * (-g) ** beta.  Congestion bypasses this transform.
    """

    cost_reference: float
    time_reference: float
    carbon_reference: float
    cost_scale: float
    time_scale: float
    carbon_scale: float
    alpha: float = 0.88
    beta: float = 0.88
    loss_aversion: float = 2.25

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValidationError("alpha must lie in (0, 1]")
        if not 0 < self.beta <= 1:
            raise ValidationError("beta must lie in (0, 1]")
        if self.loss_aversion < 1:
            raise ValidationError("loss_aversion must be at least 1")
        for name in ("cost_scale", "time_scale", "carbon_scale"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")


def gumbel_params(mean: float, variance: float) -> tuple[float, float]:
    """Moment-match a Gumbel (max) distribution to a mean and variance."""
    scale = math.sqrt(6.0 * variance) / math.pi
    loc = mean - EULER_MASCHERONI * scale
    return loc, scale


def sample_time(mode_params: ModeParameters, rng: np.random.Generator) -> float:
    """Draw one positive travel time in minutes.

    Non-positive draws are resampled up to MAX_TIME_RESAMPLES times, then
    clamped to MIN_TIME_MINUTES with a warning; with realistic parameters the
    resample path is never taken.
    """
    loc, scale = gumbel_params(mode_params.time_mean, mode_params.time_variance)
    for _ in range(MAX_TIME_RESAMPLES):
        t = float(rng.gumbel(loc, scale))
        if t > 0:
            return t
    warnings.warn("travel time sampler exhausted resamples; clamping to minimum")
    return MIN_TIME_MINUTES


def sample_occupancy(mode_params: ModeParameters, rng: np.random.Generator) -> int:
    """Draw one occupancy count in [1, max_occupancy]."""
    model = mode_params.occupancy
    if isinstance(model, GaussianOccupancy):
        raw = float(rng.normal(model.mean, math.sqrt(model.var)))
        return int(np.clip(np.rint(raw), 1, mode_params.max_occupancy))
    u = float(rng.random())
    idx = int(np.searchsorted(model.cdf(), u, side="right"))
    return model.values[min(idx, len(model.values) - 1)]


def congestion(occupancy: int, seating_capacity: int) -> float:
    """Occupancy over seating capacity."""
    if occupancy < 1 or seating_capacity < 1:
        raise ValidationError("occupancy and seating capacity must be at least 1")
    return occupancy / seating_capacity


def carbon_footprint(distance_km: float, emission_g_per_km: float, occupancy: int) -> float:
    """Grams of CO2 attributed to one passenger for the trip."""
    if distance_km <= 0:
        raise ValidationError("distance must be positive")
    if occupancy < 1:
        raise ValidationError("occupancy must be at least 1")
    return distance_km * emission_g_per_km / occupancy


def observe_trip(
    mode_params: ModeParameters,
    distance_km: float,
    rng: np.random.Generator,
    *,
    forced_time: float | None = None,
    forced_occupancy: int | None = None,
) -> TripObservation:
    """Realize one trip's observables; congestion and carbon share one occupancy draw.

    The forced arguments bypass sampling and exist for tests and worked
    examples.
    """
    t = sample_time(mode_params, rng) if forced_time is None else forced_time
    occ = sample_occupancy(mode_params, rng) if forced_occupancy is None else forced_occupancy
    return TripObservation(
        cost=mode_params.cost,
        time=t,
        congestion=congestion(occ, mode_params.seating_capacity),
        carbon=carbon_footprint(distance_km, mode_params.emission_g_per_km, occ),
    )


def prospect_value(x: float, reference: float, scale: float, params: PerceptionParams) -> float:
    """Asymmetric gain/loss value of observing ``x`` against a reference."""
    g = (reference - x) / scale
    if g >= 0:
        return g**params.alpha
    return -params.loss_aversion * (-g) ** params.beta


def congestion_utility(congestion_ratio: float) -> float:
    """Shifted ReLU: 1 while everyone is seated, declining linearly above."""
    return 2.0 - max(1.0, congestion_ratio)


def perceive(observation: TripObservation, params: PerceptionParams) -> np.ndarray:
    """Perceived utility vector ordered (cost, time, congestion, carbon)."""
    return np.array(
        [
            prospect_value(observation.cost, params.cost_reference, params.cost_scale, params),
            prospect_value(observation.time, params.time_reference, params.time_scale, params),
            congestion_utility(observation.congestion),
            prospect_value(observation.carbon, params.carbon_reference, params.carbon_scale, params),
        ]
    )


def default_value_schema() -> Schema:
    """The built-in value schema over (cost, time, congestion, carbon).

    Rows are ordered (frugalism, idealism, individualism, pragmatism) to match
    VALUES.  Entries are exact binary floats of the intended rationals.
    """
    F = Fraction
    rows = [
        [F(3, 5), F(1, 5), F(1, 5), F(0)],
        [F(1, 10), F(1, 10), F(1, 10), F(7, 10)],
        [F(2, 10), F(3, 10), F(5, 10), F(0)],
        [F(1, 3), F(1, 3), F(1, 3), F(0)],
    ]
    return Schema(np.array([[float(e) for e in row] for row in rows]))


DEFAULT_BUS = ModeParameters(
    cost=20.0,
    time_mean=47.0,
    time_var=10.0,
    seating_capacity=40,
    max_occupancy=80,
    occupancy=GaussianOccupancy(mean=40.0, var=25.0),
    emission_g_per_km=200.0,
)

DEFAULT_TAXI = ModeParameters(
    cost=300.0,
    time_mean=20.0,
    time_var=5.0,
    seating_capacity=4,
    max_occupancy=5,
    occupancy=CategoricalOccupancy(values=(1, 2, 3, 4, 5), probs=(0.1, 0.2, 0.3, 0.3, 0.1)),
    emission_g_per_km=40.0,
)

DEFAULT_TRIP_DISTANCE_KM = 10.0

# Calibrated so the population bifurcates into bus- and taxi-locked identities
# and reproduces the published directional outcomes; see README for the
# calibration procedure.  Cost anchors sit midway between the modes.
DEFAULT_PERCEPTION = PerceptionParams(
    cost_reference=160.0,
    time_reference=33.5,
    carbon_reference=300.0,
    cost_scale=140.0,
    time_scale=11.25,
    carbon_scale=500.0,
)
