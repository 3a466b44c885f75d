"""Identity machinery: attenuation weights, schema-mediated utility, adaptation.

An agent identifies with a set of objects (here: abstract values) at semantic
distances ``d``; a transcendence level ``gamma`` in [0, 1] attenuates distant
objects via ``gamma ** d``.  A row-stochastic schema matrix expresses each
identity object as a distribution over contextual observables, so the utility
of a choice is the attenuation-weighted, schema-mediated aggregate of the
observables' utilities.  At epoch boundaries agents strengthen or weaken
identity associations depending on accumulated per-identity utility.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateProfileError,
    DimensionMismatchError,
    IncompleteEpochError,
    ValidationError,
)

ROW_SUM_TOL = 1e-9


def _readonly_f64(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class IdentityProfile:
    """An agent's identity objects, their semantic distances, and gamma.

    Smaller distance means stronger identification.  ``gamma`` governs how
    much influence distant objects retain.
    """

    identity_objects: tuple[str, ...]
    distances: np.ndarray
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "identity_objects", tuple(str(o) for o in self.identity_objects))
        d = _readonly_f64(self.distances, "distances")
        object.__setattr__(self, "distances", d)
        if d.ndim != 1 or d.size != len(self.identity_objects):
            raise ValidationError("distances must be one per identity object")
        if np.any(d < 0):
            raise ValidationError("distances must be non-negative")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValidationError(f"gamma must lie in [0, 1], got {self.gamma}")

    @property
    def m(self) -> int:
        return len(self.identity_objects)

    def with_distances(self, distances) -> "IdentityProfile":
        return IdentityProfile(self.identity_objects, distances, self.gamma)


@dataclass(frozen=True)
class Schema:
    """Row-stochastic matrix mapping identity objects to observables.

    Entry (i, j) is the weight identity object i places on observable j.
    Every entry lies in [0, 1] and every row sums to 1 within ROW_SUM_TOL.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = _readonly_f64(self.weights, "schema weights")
        object.__setattr__(self, "weights", w)
        if w.ndim != 2:
            raise ValidationError("schema must be a 2-d matrix")
        if np.any(w < 0) or np.any(w > 1):
            raise ValidationError("schema entries must lie in [0, 1]")
        sums = w.sum(axis=1)
        bad = np.nonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)[0]
        if bad.size:
            raise ValidationError(f"schema row {bad[0]} sums to {sums[bad[0]]!r}, expected 1")

    @property
    def rows(self) -> int:
        return self.weights.shape[0]

    @property
    def cols(self) -> int:
        return self.weights.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self.weights[i]

    @classmethod
    def identity(cls, m: int) -> "Schema":
        return cls(np.eye(m))


@dataclass(frozen=True)
class AdaptationParams:
    """Epoch-boundary distance update rule parameters.

    If an identity's accumulated epoch utility exceeds ``threshold`` its
    distance shrinks by ``step``; below the threshold it grows by ``step``;
    exactly at the threshold it is left alone.  Distances are clamped to
    [d_min, d_max].  An agent is stabilized after ``stabilization_window``
    consecutive epochs without any distance change.
    """

    threshold: float = 0.0
    step: float = 0.1
    d_min: float = 0.0
    d_max: float = 14.0
    stabilization_window: int = 5

    def __post_init__(self):
        if self.step <= 0:
            raise ValidationError("step must be positive")
        if not self.d_min < self.d_max:
            raise ValidationError("d_min must be below d_max")
        if self.d_min < 0:
            raise ValidationError("d_min must be non-negative")
        if self.stabilization_window < 1:
            raise ValidationError("stabilization_window must be at least 1")


@dataclass
class EpochLedger:
    """Running per-identity utility sums over one epoch's runs."""

    per_identity_utility: np.ndarray
    runs_recorded: int = 0

    @classmethod
    def empty(cls, m: int) -> "EpochLedger":
        return cls(np.zeros(m), 0)

    @property
    def m(self) -> int:
        return self.per_identity_utility.shape[0]


def attenuation_weights(profile: IdentityProfile) -> np.ndarray:
    """Normalized attenuation factors gamma ** d, one per identity object.

    0 ** 0 is taken as 1 so gamma = 0 agents still weight distance-zero
    identities.  Raises DegenerateProfileError when every raw factor is zero
    (gamma = 0 with all distances positive).
    """
    raw = np.asarray(profile.gamma, dtype=np.float64) ** profile.distances
    total = raw.sum()
    if total <= 0.0:
        raise DegenerateProfileError(
            "gamma == 0 with all distances positive leaves no weight to normalize"
        )
    return raw / total


def _check_utils(observable_utils, n: int) -> np.ndarray:
    u = np.asarray(observable_utils, dtype=np.float64)
    if u.ndim != 1 or u.size != n:
        raise DimensionMismatchError(f"expected {n} observable utilities, got shape {u.shape}")
    return u


def perceived_utility(profile: IdentityProfile, schema: Schema, observable_utils) -> float:
    """Utility an agent derives from a choice given observable utilities.

    Computes w @ S @ u where w are the attenuation weights.  With an identity
    schema this reduces to the plain attenuation-weighted mean of the
    observable utilities.
    """
    if schema.rows != profile.m:
        raise DimensionMismatchError(
            f"schema has {schema.rows} rows but profile has {profile.m} identities"
        )
    u = _check_utils(observable_utils, schema.cols)
    w = attenuation_weights(profile)
    return float(w @ schema.weights @ u)


def marginal_identity_utility(schema: Schema, identity_index: int, observable_utils) -> float:
    """Single-run utility attributable to one identity object: S[i, :] . u."""
    if not 0 <= identity_index < schema.rows:
        raise IndexError(f"identity index {identity_index} out of range [0, {schema.rows})")
    u = _check_utils(observable_utils, schema.cols)
    return float(schema.weights[identity_index] @ u)


def record_run(ledger: EpochLedger, schema: Schema, observable_utils) -> EpochLedger:
    """Return a new ledger with one run's marginal utilities accumulated."""
    if ledger.m != schema.rows:
        raise DimensionMismatchError(
            f"ledger tracks {ledger.m} identities but schema has {schema.rows} rows"
        )
    u = _check_utils(observable_utils, schema.cols)
    return EpochLedger(ledger.per_identity_utility + schema.weights @ u, ledger.runs_recorded + 1)


def update_distances(
    profile: IdentityProfile,
    ledger: EpochLedger,
    params: AdaptationParams,
    expected_runs: int,
) -> tuple[IdentityProfile, np.ndarray]:
    """Apply the epoch-boundary distance update rule.

    Returns the updated profile and a boolean flag per identity that is True
    iff the clamped distance actually moved.
    """
    if ledger.runs_recorded != expected_runs:
        raise IncompleteEpochError(
            f"epoch has {ledger.runs_recorded} runs recorded, expected {expected_runs}"
        )
    if ledger.m != profile.m:
        raise DimensionMismatchError("ledger and profile disagree on identity count")
    u = ledger.per_identity_utility
    d = profile.distances
    moved = np.where(u > params.threshold, d - params.step, np.where(u < params.threshold, d + params.step, d))
    clamped = np.clip(moved, params.d_min, params.d_max)
    changed = clamped != d
    return profile.with_distances(clamped), changed


def is_stabilized(change_history: Sequence, params: AdaptationParams) -> bool:
    """True iff the last ``stabilization_window`` epochs saw no change at all.

    ``change_history`` holds one entry per epoch, oldest first; each entry is
    either a per-identity array of changed flags or a single boolean.
    """
    window = params.stabilization_window
    if len(change_history) < window:
        return False
    for entry in change_history[-window:]:
        if np.any(entry):
            return False
    return True
