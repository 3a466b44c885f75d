import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from valuesim import (
    AdaptationParams,
    DegenerateProfileError,
    DimensionMismatchError,
    EpochLedger,
    IdentityProfile,
    IncompleteEpochError,
    Schema,
    ValidationError,
    attenuation_weights,
    default_value_schema,
    is_stabilized,
    marginal_identity_utility,
    perceived_utility,
    record_run,
    update_distances,
)

OBJECTS4 = ("a", "b", "c", "d")


def profile(distances, gamma):
    names = tuple(f"o{i}" for i in range(len(distances)))
    return IdentityProfile(names, np.asarray(distances, dtype=float), gamma)


# --- attenuation weights -----------------------------------------------------


def test_equal_distances_give_uniform_weights():
    w = attenuation_weights(profile([0, 0, 0, 0], 0.8))
    assert np.allclose(w, 0.25, atol=1e-15)


def test_gamma_one_ignores_distance():
    w = attenuation_weights(profile([3, 7], 1.0))
    assert np.allclose(w, 0.5, atol=1e-15)


def test_weights_hand_computed():
    # raw factors (0.8, 0.64) normalize to (5/9, 4/9)
    w = attenuation_weights(profile([1, 2], 0.8))
    assert w == pytest.approx([5 / 9, 4 / 9], abs=1e-12)


def test_gamma_zero_keeps_distance_zero_identities():
    w = attenuation_weights(profile([0, 3], 0.0))
    assert w == pytest.approx([1.0, 0.0], abs=0)


def test_gamma_zero_all_positive_distances_degenerate():
    with pytest.raises(DegenerateProfileError):
        attenuation_weights(profile([1, 2], 0.0))


@given(
    st.lists(st.floats(0, 10), min_size=1, max_size=8),
    st.floats(0.01, 1.0),
)
def test_weights_normalized_and_in_range(distances, gamma):
    w = attenuation_weights(profile(distances, gamma))
    assert abs(w.sum() - 1.0) < 1e-12
    assert np.all(w >= 0) and np.all(w <= 1)


@given(
    st.lists(st.floats(0, 10), min_size=2, max_size=6),
    st.floats(0.05, 0.99),
    st.data(),
)
def test_decreasing_a_distance_never_decreases_its_weight(distances, gamma, data):
    i = data.draw(st.integers(0, len(distances) - 1))
    shrink = data.draw(st.floats(0.0, distances[i]))
    w_before = attenuation_weights(profile(distances, gamma))
    closer = list(distances)
    closer[i] = distances[i] - shrink
    w_after = attenuation_weights(profile(closer, gamma))
    assert w_after[i] >= w_before[i] - 1e-12


def test_weight_ordering_inverse_to_distance():
    w = attenuation_weights(profile([0.5, 2.0, 1.0], 0.7))
    assert w[0] > w[2] > w[1]


# --- schema validation -------------------------------------------------------


def test_schema_rejects_bad_row_sum():
    with pytest.raises(ValidationError):
        Schema(np.array([[0.5, 0.4], [0.5, 0.5]]))


def test_schema_rejects_negative_entries():
    with pytest.raises(ValidationError):
        Schema(np.array([[1.2, -0.2], [0.5, 0.5]]))


def test_schema_accepts_within_tolerance():
    Schema(np.array([[0.5 + 4e-10, 0.5], [0.5, 0.5]]))


def test_schema_rejects_just_outside_tolerance():
    with pytest.raises(ValidationError):
        Schema(np.array([[0.5 + 2e-9, 0.5], [0.5, 0.5]]))


def test_identity_schema_is_valid():
    s = Schema.identity(5)
    assert s.rows == s.cols == 5


# --- perceived utility (the schema-mediated aggregate) ------------------------


def test_identity_schema_reduces_to_plain_weighted_mean():
    p = profile([1, 2, 3], 0.8)
    u = np.array([2.0, -4.0, 7.0])
    w = attenuation_weights(p)
    direct = float(w @ u)
    assert perceived_utility(p, Schema.identity(3), u) == pytest.approx(direct, abs=1e-15)


def test_perceived_utility_hand_computed():
    p = profile([1, 2], 0.8)
    s = Schema(np.array([[0.6, 0.4], [0.2, 0.8]]))
    got = perceived_utility(p, s, [1.0, -1.0])
    assert got == pytest.approx(-7 / 45, abs=1e-12)


def test_constant_observables_pass_through():
    p = profile([0.3, 1.7, 2.2, 0.1], 0.65)
    s = default_value_schema()
    assert perceived_utility(p, s, [3.5] * 4) == pytest.approx(3.5, abs=1e-12)


def test_dimension_mismatch_raises():
    p = profile([1, 2], 0.8)
    with pytest.raises(DimensionMismatchError):
        perceived_utility(p, Schema.identity(3), [1.0, 2.0, 3.0])
    with pytest.raises(DimensionMismatchError):
        perceived_utility(p, Schema.identity(2), [1.0, 2.0, 3.0])


@given(
    st.lists(st.floats(0, 8), min_size=2, max_size=5),
    st.floats(0.05, 1.0),
    st.data(),
)
def test_convexity_bound(distances, gamma, data):
    m = len(distances)
    n = data.draw(st.integers(1, 5))
    raw = data.draw(
        st.lists(st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n), min_size=m, max_size=m)
    )
    rows = np.array(raw)
    rows = rows / rows.sum(axis=1, keepdims=True)
    utils = np.array(data.draw(st.lists(st.floats(-50, 50), min_size=n, max_size=n)))
    got = perceived_utility(profile(distances, gamma), Schema(rows), utils)
    assert utils.min() - 1e-9 <= got <= utils.max() + 1e-9


# --- marginal utilities and the epoch ledger ----------------------------------


def test_indicator_row_selects_one_observable():
    s = Schema(np.array([[1.0, 0, 0, 0], [0, 0, 0, 1.0]]))
    assert marginal_identity_utility(s, 0, [5.0, 1.0, 2.0, 3.0]) == 5.0


def test_marginal_dot_product():
    s = Schema(np.array([[1 / 3, 1 / 3, 1 / 3, 0.0]]))
    assert marginal_identity_utility(s, 0, [3.0, -3.0, 6.0, 100.0]) == pytest.approx(2.0, abs=1e-12)


def test_marginal_constant_vector():
    s = Schema(np.array([[0.1, 0.1, 0.1, 0.7]]))
    assert marginal_identity_utility(s, 0, [1.0, 1.0, 1.0, 1.0]) == pytest.approx(1.0, abs=1e-12)


def test_marginal_index_out_of_range():
    with pytest.raises(IndexError):
        marginal_identity_utility(Schema.identity(2), 2, [1.0, 2.0])


def test_decomposition_links_marginals_to_perceived_utility():
    rng = np.random.default_rng(5)
    s = default_value_schema()
    for _ in range(200):
        p = profile(rng.uniform(0, 6, 4), rng.uniform(0.05, 1.0))
        u = rng.normal(0, 5, 4)
        w = attenuation_weights(p)
        total = sum(w[i] * marginal_identity_utility(s, i, u) for i in range(4))
        assert total == pytest.approx(perceived_utility(p, s, u), abs=1e-9)


def test_record_run_constant_vector_table1():
    ledger = EpochLedger.empty(4)
    out = record_run(ledger, default_value_schema(), [1.0, 1.0, 1.0, 1.0])
    assert out.runs_recorded == 1
    assert out.per_identity_utility == pytest.approx([1.0] * 4, abs=1e-12)
    # the input ledger is untouched
    assert ledger.runs_recorded == 0 and np.all(ledger.per_identity_utility == 0)


def test_record_run_additivity():
    s = default_value_schema()
    u = [2.0, -1.0, 0.5, 3.0]
    once = record_run(EpochLedger.empty(4), s, u)
    twice = record_run(once, s, u)
    assert twice.runs_recorded == 2
    assert twice.per_identity_utility == pytest.approx(2 * once.per_identity_utility, abs=1e-12)


def test_record_run_repeated_matches_scaled_dot():
    s = default_value_schema()
    u = np.array([1.5, -2.0, 0.25, 4.0])
    ledger = EpochLedger.empty(4)
    for _ in range(10):
        ledger = record_run(ledger, s, u)
    expected = [10 * marginal_identity_utility(s, i, u) for i in range(4)]
    assert ledger.per_identity_utility == pytest.approx(expected, abs=1e-9)


# --- distance updates ---------------------------------------------------------


def ledger_with(utilities, runs=10):
    return EpochLedger(np.asarray(utilities, dtype=float), runs)


def test_positive_utility_decreases_distance():
    p = profile([2.0], 0.8)
    params = AdaptationParams()
    out, changed = update_distances(p, ledger_with([5.0]), params, 10)
    assert out.distances[0] == pytest.approx(1.9, abs=1e-12)
    assert changed[0]


def test_clamp_at_d_min():
    p = profile([0.0], 0.8)
    out, changed = update_distances(p, ledger_with([5.0]), AdaptationParams(), 10)
    assert out.distances[0] == 0.0
    assert not changed[0]


def test_exact_threshold_leaves_distance():
    p = profile([1.0], 0.8)
    out, changed = update_distances(p, ledger_with([0.0]), AdaptationParams(), 10)
    assert out.distances[0] == 1.0
    assert not changed[0]


def test_incomplete_epoch_rejected():
    p = profile([1.0], 0.8)
    with pytest.raises(IncompleteEpochError):
        update_distances(p, ledger_with([1.0], runs=9), AdaptationParams(), 10)


def test_update_grid_sweep():
    # exhaustive small grid over utility, threshold, step, distance
    for u in (-3.0, -0.5, 0.0, 0.5, 3.0):
        for tau in (-1.0, 0.0, 1.0):
            for step in (0.1, 0.5):
                for d in (0.0, 0.05, 1.0, 9.97, 10.0):
                    params = AdaptationParams(threshold=tau, step=step, d_max=10.0)
                    out, changed = update_distances(
                        profile([d], 0.8), ledger_with([u]), params, 10
                    )
                    if u > tau:
                        expect = max(d - step, 0.0)
                    elif u < tau:
                        expect = min(d + step, 10.0)
                    else:
                        expect = d
                    assert out.distances[0] == pytest.approx(expect, abs=1e-12)
                    assert changed[0] == (abs(expect - d) > 0)


def test_adaptation_params_validation():
    with pytest.raises(ValidationError):
        AdaptationParams(step=0.0)
    with pytest.raises(ValidationError):
        AdaptationParams(d_min=5.0, d_max=5.0)
    with pytest.raises(ValidationError):
        AdaptationParams(stabilization_window=0)


# --- stabilization ------------------------------------------------------------


def test_stabilized_after_quiet_window():
    params = AdaptationParams(stabilization_window=3)
    quiet = np.zeros(4, dtype=bool)
    assert is_stabilized([quiet, quiet, quiet], params)


def test_not_stabilized_with_short_history():
    params = AdaptationParams(stabilization_window=3)
    quiet = np.zeros(4, dtype=bool)
    assert not is_stabilized([quiet, quiet], params)


def test_any_change_blocks_stabilization():
    params = AdaptationParams(stabilization_window=1)
    changed = np.array([False, True, False, False])
    assert not is_stabilized([changed], params)


def test_old_changes_do_not_block():
    params = AdaptationParams(stabilization_window=2)
    noisy = np.array([True, False])
    quiet = np.zeros(2, dtype=bool)
    assert is_stabilized([noisy, quiet, quiet], params)


# --- profile validation -------------------------------------------------------


def test_profile_rejects_negative_distance():
    with pytest.raises(ValidationError):
        profile([-0.1], 0.5)


def test_profile_rejects_bad_gamma():
    with pytest.raises(ValidationError):
        profile([1.0], 1.5)


def test_profile_rejects_length_mismatch():
    with pytest.raises(ValidationError):
        IdentityProfile(("a", "b"), np.array([1.0]), 0.5)
