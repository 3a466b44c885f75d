# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled trip kernel.

Mirrors ``py_kernel.run_trips`` exactly: same draw order against the same
bit generator (via numpy's C distribution functions), same arithmetic
associativity.  Trajectories (choices, ledgers up to last-ulp rounding,
distances) match the numpy kernel for any seed.
"""

import warnings

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport exp, pow, rint
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    random_gumbel,
    random_normal,
    random_standard_uniform,
)

from .plan import TripsOut

cnp.import_array()

cdef int MAX_TIME_RESAMPLES = 100
cdef double MIN_TIME_MINUTES = 0.1
cdef double NEUTRAL_FRACTION = 0.5

cdef enum:
    NVAL = 4


cdef bitgen_t *_bitgen(object rng) except NULL:
    capsule = rng.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("invalid BitGenerator capsule")
    return <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef struct ModeC:
    double cost
    double gloc
    double gscale
    double seating
    double max_occ
    double dist_emission  # trip distance times emission rate
    int occ_kind
    double occ_mean
    double occ_sigma
    int n_cat
    double expected_time
    double expected_occ


cdef int _fill_times(bitgen_t *bg, ModeC *mode, double[::1] out, Py_ssize_t count,
                     Py_ssize_t[::1] scratch) except -1:
    cdef Py_ssize_t i, j, nbad
    cdef int p
    for i in range(count):
        out[i] = random_gumbel(bg, mode.gloc, mode.gscale)
    for p in range(MAX_TIME_RESAMPLES):
        nbad = 0
        for i in range(count):
            if out[i] <= 0.0:
                scratch[nbad] = i
                nbad += 1
        if nbad == 0:
            return 0
        for j in range(nbad):
            out[scratch[j]] = random_gumbel(bg, mode.gloc, mode.gscale)
    warnings.warn("travel time sampler exhausted resamples; clamping to minimum")
    for i in range(count):
        if out[i] <= 0.0:
            out[i] = MIN_TIME_MINUTES
    return 0


cdef void _fill_occupancies(bitgen_t *bg, ModeC *mode, double[::1] cat_values,
                            double[::1] cat_cdf, double[::1] out, Py_ssize_t count):
    cdef Py_ssize_t i
    cdef int j, k
    cdef double raw, u
    if mode.occ_kind == 0:  # gaussian, rounded and clamped
        for i in range(count):
            raw = random_normal(bg, mode.occ_mean, mode.occ_sigma)
            raw = rint(raw)
            if raw < 1.0:
                raw = 1.0
            elif raw > mode.max_occ:
                raw = mode.max_occ
            out[i] = raw
    else:  # categorical via CDF inversion
        k = mode.n_cat
        for i in range(count):
            u = random_standard_uniform(bg)
            j = 0
            while j < k - 1 and u >= cat_cdf[j]:
                j += 1
            out[i] = cat_values[j]


cdef inline double _prospect(double x, double ref, double scale,
                             double alpha, double beta, double lam) nogil:
    cdef double g = (ref - x) / scale
    if g >= 0.0:
        return pow(g, alpha)
    return -lam * pow(-g, beta)


cdef ModeC _mode_c(object table, double distance_km):
    cdef ModeC m
    m.cost = table.cost
    m.gloc = table.gumbel_loc
    m.gscale = table.gumbel_scale
    m.seating = table.seating
    m.max_occ = table.max_occupancy
    m.dist_emission = distance_km * table.emission
    m.occ_kind = table.occ_kind
    m.occ_mean = table.occ_mean
    m.occ_sigma = table.occ_sigma
    m.n_cat = table.cat_values.shape[0]
    m.expected_time = table.expected_time
    m.expected_occ = table.expected_occupancy
    return m


def run_trips(object plan, cnp.ndarray weights_in, cnp.ndarray ledger_in,
              cnp.ndarray last_choice_in, bint has_history, object rng,
              int n_trips, bint audit=False):
    """Drop-in replacement for py_kernel.run_trips."""
    cdef Py_ssize_t n = plan.n
    cdef bitgen_t *bg = _bitgen(rng)

    cdef double[:, ::1] weights = np.ascontiguousarray(weights_in)
    cdef double[:, ::1] ledger = ledger_in
    cdef cnp.int8_t[::1] last_choice = last_choice_in
    cdef const double[:, ::1] schema = np.ascontiguousarray(plan.schema)

    cdef double cost_ref = plan.cost_ref, time_ref = plan.time_ref, carb_ref = plan.carbon_ref
    cdef double cost_scale = plan.cost_scale, time_scale = plan.time_scale, carb_scale = plan.carbon_scale
    cdef double alpha = plan.alpha, beta = plan.beta, lam = plan.lam
    cdef double cf = plan.cf, temperature = plan.temperature
    cdef double distance_km = plan.distance_km
    cdef bint expectation = plan.anticipate_expectation

    cdef ModeC mode0 = _mode_c(plan.modes[0], distance_km)
    cdef ModeC mode1 = _mode_c(plan.modes[1], distance_km)
    cdef double[::1] cat_values0 = np.ascontiguousarray(plan.modes[0].cat_values)
    cdef double[::1] cat_cdf0 = np.ascontiguousarray(plan.modes[0].cat_cdf)
    cdef double[::1] cat_values1 = np.ascontiguousarray(plan.modes[1].cat_values)
    cdef double[::1] cat_cdf1 = np.ascontiguousarray(plan.modes[1].cat_cdf)

    cdef bint have_graph = plan.indptr is not None
    cdef const cnp.int64_t[::1] indptr
    cdef const cnp.int32_t[::1] indices
    if have_graph:
        indptr = plan.indptr
        indices = plan.indices
    else:
        indptr = np.zeros(1, dtype=np.int64)
        indices = np.zeros(0, dtype=np.int32)

    choices_arr = np.empty((n_trips, n), dtype=np.int8)
    bus_frac_arr = np.empty(n_trips)
    cdef cnp.int8_t[:, ::1] choices = choices_arr
    cdef double[::1] bus_frac = bus_frac_arr

    cdef double[:, :, ::1] a_anticipated = None
    cdef double[:, :, ::1] a_bonus = None
    cdef double[:, :, ::1] a_obs = None
    cdef double[:, :, ::1] a_perc = None
    anticipated_arr = bonus_arr = obs_arr = perc_arr = None
    if audit:
        anticipated_arr = np.empty((n_trips, n, 2))
        bonus_arr = np.empty((n_trips, n, 2))
        obs_arr = np.empty((n_trips, n, 4))
        perc_arr = np.empty((n_trips, n, 4))
        a_anticipated = anticipated_arr
        a_bonus = bonus_arr
        a_obs = obs_arr
        a_perc = perc_arr

    # scratch buffers
    cdef double[::1] times = np.empty(n)
    cdef double[::1] occs = np.empty(n)
    cdef double[::1] frac_bus = np.empty(n)
    cdef double[::1] u_bus = np.empty(n)
    cdef double[::1] u_taxi = np.empty(n)
    cdef Py_ssize_t[::1] scratch = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] sel = np.empty(n, dtype=np.intp)
    cdef double[::1] exp_marg0 = np.empty(NVAL)
    cdef double[::1] exp_marg1 = np.empty(NVAL)

    cdef Py_ssize_t i, a, t_i, nsel
    cdef int t, m, v, mode_idx
    cdef cnp.int64_t s, e, idx
    cdef double deg, cnt, obs_c, obs_t, obs_g, obs_b
    cdef double p0, p1, p2, p3, marg, base, diff, pbus, drawn
    cdef double bonus0, bonus1
    cdef ModeC *mode
    cdef double[::1] cat_v
    cdef double[::1] cat_c
    cdef Py_ssize_t nbus

    if expectation:
        _expected_marginals(&mode0, schema, cost_ref, time_ref, carb_ref,
                            cost_scale, time_scale, carb_scale, alpha, beta, lam, exp_marg0)
        _expected_marginals(&mode1, schema, cost_ref, time_ref, carb_ref,
                            cost_scale, time_scale, carb_scale, alpha, beta, lam, exp_marg1)

    with rng.bit_generator.lock:
        for t in range(n_trips):
            # neighbor bus fractions from the previous trip's choices
            if has_history or t > 0:
                if have_graph:
                    for a in range(n):
                        s = indptr[a]
                        e = indptr[a + 1]
                        if e == s:
                            frac_bus[a] = NEUTRAL_FRACTION
                        else:
                            cnt = 0.0
                            for idx in range(s, e):
                                if last_choice[indices[idx]] == 0:
                                    cnt = cnt + 1.0
                            frac_bus[a] = cnt / (<double> (e - s))
                else:
                    for a in range(n):
                        frac_bus[a] = NEUTRAL_FRACTION
            else:
                for a in range(n):
                    frac_bus[a] = NEUTRAL_FRACTION

            # anticipation per mode
            for m in range(2):
                if m == 0:
                    mode = &mode0
                else:
                    mode = &mode1
                if expectation:
                    for a in range(n):
                        base = (
                            weights[a, 0] * (exp_marg0[0] if m == 0 else exp_marg1[0])
                            + weights[a, 1] * (exp_marg0[1] if m == 0 else exp_marg1[1])
                            + weights[a, 2] * (exp_marg0[2] if m == 0 else exp_marg1[2])
                            + weights[a, 3] * (exp_marg0[3] if m == 0 else exp_marg1[3])
                        )
                        if m == 0:
                            u_bus[a] = base
                        else:
                            u_taxi[a] = base
                else:
                    if m == 0:
                        cat_v = cat_values0
                        cat_c = cat_cdf0
                    else:
                        cat_v = cat_values1
                        cat_c = cat_cdf1
                    _fill_times(bg, mode, times, n, scratch)
                    _fill_occupancies(bg, mode, cat_v, cat_c, occs, n)
                    for a in range(n):
                        p0 = _prospect(mode.cost, cost_ref, cost_scale, alpha, beta, lam)
                        p1 = _prospect(times[a], time_ref, time_scale, alpha, beta, lam)
                        obs_g = occs[a] / mode.seating
                        p2 = 2.0 - (1.0 if obs_g < 1.0 else obs_g)
                        p3 = _prospect(mode.dist_emission / occs[a], carb_ref, carb_scale, alpha, beta, lam)
                        base = 0.0
                        for v in range(NVAL):
                            marg = schema[v, 0] * p0 + schema[v, 1] * p1 + schema[v, 2] * p2 + schema[v, 3] * p3
                            base = base + weights[a, v] * marg
                        if m == 0:
                            u_bus[a] = base
                        else:
                            u_taxi[a] = base

            # conformity bonuses, then softmax choice
            nbus = 0
            for a in range(n):
                bonus0 = cf * frac_bus[a]
                bonus1 = cf * (1.0 - frac_bus[a])
                if audit:
                    a_anticipated[t, a, 0] = u_bus[a]
                    a_anticipated[t, a, 1] = u_taxi[a]
                    a_bonus[t, a, 0] = bonus0
                    a_bonus[t, a, 1] = bonus1
                u_bus[a] = u_bus[a] + bonus0
                u_taxi[a] = u_taxi[a] + bonus1
            for a in range(n):
                diff = (u_taxi[a] - u_bus[a]) / temperature
                pbus = 1.0 / (1.0 + exp(diff))
                drawn = random_standard_uniform(bg)
                if drawn < pbus:
                    choices[t, a] = 0
                    nbus += 1
                else:
                    choices[t, a] = 1

            # realized observations for each mode's choosers, bus pass first
            for m in range(2):
                if m == 0:
                    mode = &mode0
                    cat_v = cat_values0
                    cat_c = cat_cdf0
                else:
                    mode = &mode1
                    cat_v = cat_values1
                    cat_c = cat_cdf1
                nsel = 0
                for a in range(n):
                    if choices[t, a] == m:
                        sel[nsel] = a
                        nsel += 1
                if nsel == 0:
                    continue
                _fill_times(bg, mode, times, nsel, scratch)
                _fill_occupancies(bg, mode, cat_v, cat_c, occs, nsel)
                for i in range(nsel):
                    a = sel[i]
                    obs_c = mode.cost
                    obs_t = times[i]
                    obs_g = occs[i] / mode.seating
                    obs_b = mode.dist_emission / occs[i]
                    p0 = _prospect(obs_c, cost_ref, cost_scale, alpha, beta, lam)
                    p1 = _prospect(obs_t, time_ref, time_scale, alpha, beta, lam)
                    p2 = 2.0 - (1.0 if obs_g < 1.0 else obs_g)
                    p3 = _prospect(obs_b, carb_ref, carb_scale, alpha, beta, lam)
                    for v in range(NVAL):
                        marg = schema[v, 0] * p0 + schema[v, 1] * p1 + schema[v, 2] * p2 + schema[v, 3] * p3
                        ledger[a, v] = ledger[a, v] + marg
                    if audit:
                        a_obs[t, a, 0] = obs_c
                        a_obs[t, a, 1] = obs_t
                        a_obs[t, a, 2] = obs_g
                        a_obs[t, a, 3] = obs_b
                        a_perc[t, a, 0] = p0
                        a_perc[t, a, 1] = p1
                        a_perc[t, a, 2] = p2
                        a_perc[t, a, 3] = p3

            for a in range(n):
                last_choice[a] = choices[t, a]
            bus_frac[t] = (<double> nbus) / (<double> n)
            has_history = True

    return TripsOut(
        choices=choices_arr,
        bus_fraction=bus_frac_arr,
        anticipated=anticipated_arr,
        bonuses=bonus_arr,
        observations=obs_arr,
        perceived=perc_arr,
    )


cdef int _expected_marginals(ModeC *mode, const double[:, ::1] schema,
                             double cost_ref, double time_ref, double carb_ref,
                             double cost_scale, double time_scale, double carb_scale,
                             double alpha, double beta, double lam,
                             double[::1] out) except -1:
    cdef double p0, p1, p2, p3, c
    cdef int v
    p0 = _prospect(mode.cost, cost_ref, cost_scale, alpha, beta, lam)
    p1 = _prospect(mode.expected_time, time_ref, time_scale, alpha, beta, lam)
    c = mode.expected_occ / mode.seating
    p2 = 2.0 - (1.0 if c < 1.0 else c)
    p3 = _prospect(mode.dist_emission / mode.expected_occ, carb_ref, carb_scale, alpha, beta, lam)
    for v in range(NVAL):
        out[v] = schema[v, 0] * p0 + schema[v, 1] * p1 + schema[v, 2] * p2 + schema[v, 3] * p3
    return 0
