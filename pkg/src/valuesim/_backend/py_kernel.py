"""Pure-numpy trip kernel.

Vectorized over agents; one python-level iteration per trip.  The compiled
kernel in ``_speedups.pyx`` follows this implementation operation for
operation (same draw order, same arithmetic shape), so the two backends
produce identical choice and distance trajectories for a given seed.
"""

from __future__ import annotations

import warnings

import numpy as np

from .plan import OCC_GAUSSIAN, KernelPlan, ModeTable, TripsOut

MAX_TIME_RESAMPLES = 100
MIN_TIME_MINUTES = 0.1
NEUTRAL_FRACTION = 0.5


def _draw_times(mode: ModeTable, rng, count: int) -> np.ndarray:
    if count == 0:
        return np.empty(0)
    t = rng.gumbel(mode.gumbel_loc, mode.gumbel_scale, size=count)
    for _ in range(MAX_TIME_RESAMPLES):
        bad = np.nonzero(t <= 0.0)[0]
        if bad.size == 0:
            return t
        t[bad] = rng.gumbel(mode.gumbel_loc, mode.gumbel_scale, size=bad.size)
    warnings.warn("travel time sampler exhausted resamples; clamping to minimum")
    t[t <= 0.0] = MIN_TIME_MINUTES
    return t


def _draw_occupancies(mode: ModeTable, rng, count: int) -> np.ndarray:
    if count == 0:
        return np.empty(0)
    if mode.occ_kind == OCC_GAUSSIAN:
        raw = rng.normal(mode.occ_mean, mode.occ_sigma, size=count)
        return np.clip(np.rint(raw), 1.0, mode.max_occupancy)
    u = rng.random(count)
    idx = np.searchsorted(mode.cat_cdf, u, side="right")
    idx = np.minimum(idx, mode.cat_values.size - 1)
    return mode.cat_values[idx]


def _prospect(x: np.ndarray, ref: float, scale: float, plan: KernelPlan) -> np.ndarray:
    g = (ref - x) / scale
    out = np.empty_like(g)
    gains = g >= 0.0
    out[gains] = g[gains] ** plan.alpha
    losses = ~gains
    out[losses] = -plan.lam * ((-g[losses]) ** plan.beta)
    return out


def _perceive_mode(
    plan: KernelPlan, mode: ModeTable, times: np.ndarray, occupancies: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Observation matrix and perceived matrix, both (k, 4)."""
    k = times.shape[0]
    obs = np.empty((k, 4))
    obs[:, 0] = mode.cost
    obs[:, 1] = times
    obs[:, 2] = occupancies / mode.seating
    obs[:, 3] = plan.distance_km * mode.emission / occupancies
    perc = np.empty((k, 4))
    perc[:, 0] = _prospect(obs[:, 0], plan.cost_ref, plan.cost_scale, plan)
    perc[:, 1] = _prospect(obs[:, 1], plan.time_ref, plan.time_scale, plan)
    perc[:, 2] = 2.0 - np.maximum(1.0, obs[:, 2])
    perc[:, 3] = _prospect(obs[:, 3], plan.carbon_ref, plan.carbon_scale, plan)
    return obs, perc


def _marginals(schema: np.ndarray, perceived: np.ndarray) -> np.ndarray:
    """Per-identity marginal utilities (k, 4); explicit left-associated sums."""
    p0, p1, p2, p3 = perceived[:, 0], perceived[:, 1], perceived[:, 2], perceived[:, 3]
    out = np.empty_like(perceived)
    for i in range(4):
        out[:, i] = schema[i, 0] * p0 + schema[i, 1] * p1 + schema[i, 2] * p2 + schema[i, 3] * p3
    return out


def _identity_utility(weights: np.ndarray, marginals: np.ndarray) -> np.ndarray:
    return (
        weights[:, 0] * marginals[:, 0]
        + weights[:, 1] * marginals[:, 1]
        + weights[:, 2] * marginals[:, 2]
        + weights[:, 3] * marginals[:, 3]
    )


def _bus_fractions(plan: KernelPlan, last_choice: np.ndarray) -> np.ndarray:
    if plan.indptr is None:
        return np.full(plan.n, NEUTRAL_FRACTION)
    bus = (last_choice == 0).astype(np.float64)
    degrees = np.diff(plan.indptr)
    out = np.full(plan.n, NEUTRAL_FRACTION)
    nonzero = degrees > 0
    if np.any(nonzero):
        sums = np.add.reduceat(bus[plan.indices], plan.indptr[:-1][nonzero])
        out[nonzero] = sums / degrees[nonzero]
    return out


def run_trips(
    plan: KernelPlan,
    weights: np.ndarray,
    ledger: np.ndarray,
    last_choice: np.ndarray,
    has_history: bool,
    rng: np.random.Generator,
    n_trips: int,
    audit: bool = False,
) -> TripsOut:
    """Advance the population by ``n_trips`` trips.

    Mutates ``ledger`` (accumulates realized marginal utilities) and
    ``last_choice`` in place.  ``weights`` are the attenuation weights, held
    constant for the block (distances only move at epoch boundaries).
    """
    n = plan.n
    schema = plan.schema
    out = TripsOut(
        choices=np.empty((n_trips, n), dtype=np.int8),
        bus_fraction=np.empty(n_trips),
    )
    if audit:
        out.anticipated = np.empty((n_trips, n, 2))
        out.bonuses = np.empty((n_trips, n, 2))
        out.observations = np.empty((n_trips, n, 4))
        out.perceived = np.empty((n_trips, n, 4))

    if plan.anticipate_expectation:
        expected_perc = []
        for mode in plan.modes:
            _, perc = _perceive_mode(
                plan, mode, np.array([mode.expected_time]), np.array([mode.expected_occupancy])
            )
            expected_perc.append(perc)

    for t in range(n_trips):
        if has_history or t > 0:
            frac_bus = _bus_fractions(plan, last_choice)
        else:
            frac_bus = np.full(n, NEUTRAL_FRACTION)

        utils = []
        for m, mode in enumerate(plan.modes):
            if plan.anticipate_expectation:
                marg = _marginals(schema, expected_perc[m])
                base = _identity_utility(weights, np.broadcast_to(marg, (n, 4)))
            else:
                times = _draw_times(mode, rng, n)
                occs = _draw_occupancies(mode, rng, n)
                _, perc = _perceive_mode(plan, mode, times, occs)
                base = _identity_utility(weights, _marginals(schema, perc))
            utils.append(base)

        bonus_bus = plan.cf * frac_bus
        bonus_taxi = plan.cf * (1.0 - frac_bus)
        u_bus = utils[0] + bonus_bus
        u_taxi = utils[1] + bonus_taxi

        p_bus = 1.0 / (1.0 + np.exp((u_taxi - u_bus) / plan.temperature))
        draw = rng.random(n)
        chosen = np.where(draw < p_bus, 0, 1).astype(np.int8)

        if audit:
            out.anticipated[t, :, 0] = utils[0]
            out.anticipated[t, :, 1] = utils[1]
            out.bonuses[t, :, 0] = bonus_bus
            out.bonuses[t, :, 1] = bonus_taxi

        for m, mode in enumerate(plan.modes):
            sel = np.nonzero(chosen == m)[0]
            times = _draw_times(mode, rng, sel.size)
            occs = _draw_occupancies(mode, rng, sel.size)
            obs, perc = _perceive_mode(plan, mode, times, occs)
            ledger[sel] += _marginals(schema, perc)
            if audit:
                out.observations[t, sel] = obs
                out.perceived[t, sel] = perc

        last_choice[:] = chosen
        out.choices[t] = chosen
        out.bus_fraction[t] = np.count_nonzero(chosen == 0) / n

    return out
