"""Flattened per-run parameters consumed by the trip kernels.

Both the numpy kernel and the compiled kernel read the same plan and the
same random stream, and must consume draws in the exact same order:

per trip:
  1. anticipation, mode 0: times (one batch, then resample passes), occupancies
  2. anticipation, mode 1: same
  3. one uniform per agent for the choice
  4. realized draws for agents that chose mode 0 (times, then occupancies)
  5. realized draws for agents that chose mode 1 (times, then occupancies)

All batches are agent-minor.  With expectation-based anticipation steps 1-2
consume nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OCC_GAUSSIAN = 0
OCC_CATEGORICAL = 1


@dataclass
class ModeTable:
    """One transit mode reduced to kernel-ready primitives."""

    cost: float
    gumbel_loc: float
    gumbel_scale: float
    seating: float
    max_occupancy: float
    emission: float
    occ_kind: int
    occ_mean: float
    occ_sigma: float
    cat_values: np.ndarray  # float64 (k,)
    cat_cdf: np.ndarray  # float64 (k,)
    expected_time: float
    expected_occupancy: float


@dataclass
class KernelPlan:
    """Everything constant across one simulation run."""

    n: int
    schema: np.ndarray  # (4, 4) C-contiguous float64
    modes: tuple[ModeTable, ModeTable]
    # perception
    cost_ref: float
    time_ref: float
    carbon_ref: float
    cost_scale: float
    time_scale: float
    carbon_scale: float
    alpha: float
    beta: float
    lam: float
    distance_km: float
    # choice
    cf: float
    temperature: float
    anticipate_expectation: bool
    # graph (None when the run has no network)
    indptr: np.ndarray | None
    indices: np.ndarray | None


@dataclass
class TripsOut:
    """Kernel output for a block of trips."""

    choices: np.ndarray  # (R, n) int8
    bus_fraction: np.ndarray  # (R,)
    # audit buffers, present only when requested
    anticipated: np.ndarray | None = None  # (R, n, 2) identity utility, pre-bonus
    bonuses: np.ndarray | None = None  # (R, n, 2)
    observations: np.ndarray | None = None  # (R, n, 4) realized (cost, time, congestion, carbon)
    perceived: np.ndarray | None = None  # (R, n, 4) realized perceived vector


def build_mode_table(params, distance_km: float) -> ModeTable:
    from ..transit import CategoricalOccupancy, GaussianOccupancy, gumbel_params

    loc, scale = gumbel_params(params.time_mean, params.time_variance)
    occ = params.occupancy
    if isinstance(occ, GaussianOccupancy):
        kind, mean, sigma = OCC_GAUSSIAN, occ.mean, float(np.sqrt(occ.var))
        values = np.zeros(1)
        cdf = np.ones(1)
        expected_occ = float(np.clip(np.rint(occ.mean), 1, params.max_occupancy))
    elif isinstance(occ, CategoricalOccupancy):
        kind, mean, sigma = OCC_CATEGORICAL, 0.0, 0.0
        values = np.asarray(occ.values, dtype=np.float64)
        cdf = occ.cdf()
        expected_occ = float(values @ np.asarray(occ.probs))
    else:
        raise TypeError(f"unknown occupancy model {type(occ).__name__}")
    return ModeTable(
        cost=float(params.cost),
        gumbel_loc=loc,
        gumbel_scale=scale,
        seating=float(params.seating_capacity),
        max_occupancy=float(params.max_occupancy),
        emission=float(params.emission_g_per_km),
        occ_kind=kind,
        occ_mean=mean,
        occ_sigma=sigma,
        cat_values=values,
        cat_cdf=cdf,
        expected_time=float(params.time_mean),
        expected_occupancy=expected_occ,
    )
