import math

import numpy as np
import pytest

from valuesim import (
    SocialGraph,
    TransitMode,
    ValidationError,
    conformity_bonus,
    generate_erdos_renyi,
    neighbor_fraction,
    write_edge_list,
)
from valuesim.network import bus_fraction_vector

BUS, TAXI = TransitMode.BUS, TransitMode.TAXI


def star_graph():
    # agent 0 linked to agents 1..10
    return SocialGraph.from_edges(11, [(0, i) for i in range(1, 11)])


def test_empty_graph_at_p_zero():
    g = generate_erdos_renyi(20, 0.0, seed=1)
    assert g.num_edges == 0


def test_complete_graph_at_p_one():
    g = generate_erdos_renyi(500, 1.0, seed=1)
    assert g.num_edges == 500 * 499 // 2 == 124750


def test_expected_edge_count_within_three_sigma():
    n, p = 500, 0.02
    pairs = n * (n - 1) // 2
    g = generate_erdos_renyi(n, p, seed=42)
    mean = pairs * p
    sigma = math.sqrt(pairs * p * (1 - p))
    assert abs(g.num_edges - mean) <= 3 * sigma


def test_generation_deterministic_under_seed():
    a = generate_erdos_renyi(100, 0.05, seed=9)
    b = generate_erdos_renyi(100, 0.05, seed=9)
    assert np.array_equal(a.indptr, b.indptr) and np.array_equal(a.indices, b.indices)
    c = generate_erdos_renyi(100, 0.05, seed=10)
    assert not (np.array_equal(a.indptr, c.indptr) and np.array_equal(a.indices, c.indices))


def test_generated_graphs_symmetric_without_self_loops():
    for seed in range(5):
        generate_erdos_renyi(60, 0.1, seed=seed).validate()


def test_invalid_probability_rejected():
    with pytest.raises(ValidationError):
        generate_erdos_renyi(10, 1.5, seed=0)
    with pytest.raises(ValidationError):
        generate_erdos_renyi(10, -0.1, seed=0)


def test_degree_distribution_matches_binomial():
    from scipy.stats import chisquare

    n, p = 400, 0.03
    g = generate_erdos_renyi(n, p, seed=7)
    degrees = np.diff(g.indptr)
    from scipy.stats import binom

    edges = [0, 5, 9, 14, 18, n]  # pooled bins
    observed, expected = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        observed.append(np.count_nonzero((degrees >= lo) & (degrees < hi)))
        expected.append(n * (binom.cdf(hi - 1, n - 1, p) - binom.cdf(lo - 1, n - 1, p)))
    stat, pvalue = chisquare(observed, expected)
    assert pvalue > 0.001


def test_neighbor_fraction_counts():
    g = star_graph()
    prev = [TAXI] + [BUS] * 6 + [TAXI] * 4
    assert neighbor_fraction(g, 0, BUS, prev) == pytest.approx(0.6)
    assert neighbor_fraction(g, 0, TAXI, prev) == pytest.approx(0.4)


def test_neighbor_fraction_isolated_agent():
    g = SocialGraph.from_edges(3, [(0, 1)])
    prev = [BUS, BUS, BUS]
    assert neighbor_fraction(g, 2, BUS, prev) == 0.5
    assert neighbor_fraction(g, 2, TAXI, prev) == 0.5


def test_neighbor_fraction_before_history():
    g = star_graph()
    assert neighbor_fraction(g, 0, BUS, None) == 0.5


def test_neighbor_fraction_unanimous():
    g = star_graph()
    prev = [BUS] + [TAXI] * 10
    assert neighbor_fraction(g, 0, TAXI, prev) == 1.0
    assert neighbor_fraction(g, 0, BUS, prev) == 0.0


def test_neighbor_fraction_partition_sums_to_one():
    g = generate_erdos_renyi(40, 0.2, seed=2)
    rng = np.random.default_rng(0)
    prev = [BUS if rng.random() < 0.5 else TAXI for _ in range(40)]
    for agent in range(40):
        total = neighbor_fraction(g, agent, BUS, prev) + neighbor_fraction(g, agent, TAXI, prev)
        assert total == pytest.approx(1.0, abs=1e-12)


def test_neighbor_fraction_unknown_agent():
    with pytest.raises(ValidationError):
        neighbor_fraction(star_graph(), 99, BUS, None)


def test_neighbor_fraction_requires_full_coverage():
    with pytest.raises(ValidationError):
        neighbor_fraction(star_graph(), 0, BUS, [BUS, TAXI])


def test_conformity_bonus_values():
    assert conformity_bonus(0.5, 0.6) == pytest.approx(0.3)
    assert conformity_bonus(0.0, 0.9) == 0.0
    assert conformity_bonus(1.0, 1.0) == 1.0


def test_conformity_bonus_validation():
    with pytest.raises(ValidationError):
        conformity_bonus(1.5, 0.5)
    with pytest.raises(ValidationError):
        conformity_bonus(0.5, 1.5)


def test_bus_fraction_vector_matches_scalar_op():
    g = generate_erdos_renyi(50, 0.15, seed=4)
    rng = np.random.default_rng(1)
    last = (rng.random(50) < 0.4).astype(np.int8)  # 0 = bus
    last = np.where(last == 0, 0, 1).astype(np.int8)
    vec = bus_fraction_vector(g, last, 50)
    prev = [TransitMode(int(c)) for c in last]
    for agent in range(50):
        assert vec[agent] == pytest.approx(neighbor_fraction(g, agent, BUS, prev), abs=1e-15)


def test_bus_fraction_vector_no_graph_or_history():
    assert np.all(bus_fraction_vector(None, None, 7) == 0.5)
    g = star_graph()
    assert np.all(bus_fraction_vector(g, None, 11) == 0.5)


def test_edge_list_dump_round_trip(tmp_path):
    g = generate_erdos_renyi(30, 0.2, seed=3)
    path = tmp_path / "edges.txt"
    write_edge_list(g, path)
    lines = path.read_text().strip().splitlines()
    assert len(lines) == g.num_edges
    edges = [tuple(map(int, line.split())) for line in lines]
    rebuilt = SocialGraph.from_edges(30, edges)
    assert np.array_equal(rebuilt.indptr, g.indptr)
    assert np.array_equal(rebuilt.indices, g.indices)
