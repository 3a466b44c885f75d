"""Erdos-Renyi agent network and the conformity utility bonus.

The graph is immutable after generation (CSR adjacency).  Conformity adds
``cf`` times the fraction of an agent's neighbors that picked a choice on the
previous trip; agents with no neighbors, and everyone on the first trip of a
run, use the symmetric fraction 0.5 so the bonus cancels in choice
probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import ValidationError
from .transit import TransitMode

NEUTRAL_FRACTION = 0.5


@dataclass(frozen=True)
class SocialGraph:
    """Undirected simple graph over agents 0..n-1 in CSR form."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray

    def __post_init__(self):
        indptr = np.ascontiguousarray(self.indptr, dtype=np.int64)
        indices = np.ascontiguousarray(self.indices, dtype=np.int32)
        indptr.flags.writeable = False
        indices.flags.writeable = False
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)
        if indptr.shape != (self.n + 1,) or indptr[0] != 0 or indptr[-1] != indices.size:
            raise ValidationError("malformed CSR adjacency")

    @property
    def num_edges(self) -> int:
        return self.indices.size // 2

    def neighbors(self, agent: int) -> np.ndarray:
        if not 0 <= agent < self.n:
            raise ValidationError(f"unknown agent id {agent}")
        return self.indices[self.indptr[agent] : self.indptr[agent + 1]]

    def degree(self, agent: int) -> int:
        return int(self.indptr[agent + 1] - self.indptr[agent])

    def edges(self) -> Iterator[tuple[int, int]]:
        """Yield each undirected edge once, as (u, v) with u < v."""
        for u in range(self.n):
            for v in self.neighbors(u):
                if u < v:
                    yield u, int(v)

    @classmethod
    def from_edges(cls, n: int, edges) -> "SocialGraph":
        """Build a graph from an iterable of undirected (u, v) pairs."""
        pairs = set()
        for u, v in edges:
            if u == v:
                raise ValidationError(f"self-loop at {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValidationError(f"edge ({u}, {v}) outside [0, {n})")
            pairs.add((min(u, v), max(u, v)))
        if pairs:
            a = np.array([p[0] for p in sorted(pairs)])
            b = np.array([p[1] for p in sorted(pairs)])
            src = np.concatenate([a, b])
            dst = np.concatenate([b, a])
        else:
            src = dst = np.zeros(0, dtype=np.int64)
        return _csr_from_edges(n, src, dst)

    def validate(self) -> None:
        """Check symmetry and absence of self-loops (test support)."""
        seen = set()
        for u in range(self.n):
            for v in self.neighbors(u):
                if v == u:
                    raise ValidationError(f"self-loop at {u}")
                seen.add((u, int(v)))
        for u, v in seen:
            if (v, u) not in seen:
                raise ValidationError(f"asymmetric edge ({u}, {v})")


def _csr_from_edges(n: int, src: np.ndarray, dst: np.ndarray) -> SocialGraph:
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    counts = np.bincount(src, minlength=n)
    indptr = np.concatenate([[0], np.cumsum(counts)])
    return SocialGraph(n=n, indptr=indptr, indices=dst.astype(np.int32))


def generate_erdos_renyi(n: int, p: float, seed) -> SocialGraph:
    """Connect each unordered pair independently with probability p.

    ``seed`` may be anything ``numpy.random.default_rng`` accepts.  Pairs are
    examined in upper-triangle row-major order, so the result is a pure
    function of (n, p, seed).
    """
    if n < 1:
        raise ValidationError("need at least one agent")
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"edge probability must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    mask = rng.random(iu.size) < p
    a, b = iu[mask], ju[mask]
    src = np.concatenate([a, b])
    dst = np.concatenate([b, a])
    return _csr_from_edges(n, src, dst)


def neighbor_fraction(
    graph: SocialGraph,
    agent: int,
    choice: TransitMode,
    previous_choices: Sequence | None,
) -> float:
    """Fraction of the agent's neighbors whose previous choice was ``choice``.

    ``previous_choices`` is one entry per agent (TransitMode or its integer
    value); pass None before any history exists.
    """
    neigh = graph.neighbors(agent)
    if previous_choices is None or neigh.size == 0:
        return NEUTRAL_FRACTION
    if len(previous_choices) != graph.n:
        raise ValidationError("previous_choices must cover all agents")
    prev = np.asarray([int(c) for c in previous_choices], dtype=np.int64)
    return float(np.count_nonzero(prev[neigh] == int(choice)) / neigh.size)


def conformity_bonus(cf: float, frac: float) -> float:
    """Utility bonus cf * frac added to a choice."""
    if not 0.0 <= cf <= 1.0:
        raise ValidationError(f"conformity factor must lie in [0, 1], got {cf}")
    if not 0.0 <= frac <= 1.0:
        raise ValidationError(f"neighbor fraction must lie in [0, 1], got {frac}")
    return cf * frac


def bus_fraction_vector(graph: SocialGraph | None, last_choice: np.ndarray | None, n: int) -> np.ndarray:
    """Per-agent fraction of neighbors that chose BUS on the previous trip.

    Vectorized engine-side counterpart of ``neighbor_fraction``; agents with
    no graph, no neighbors, or no history get NEUTRAL_FRACTION.
    """
    if graph is None or last_choice is None:
        return np.full(n, NEUTRAL_FRACTION)
    bus = (last_choice == int(TransitMode.BUS)).astype(np.float64)
    picked = bus[graph.indices]
    # reduceat misbehaves on empty segments; guard with explicit degree mask
    degrees = np.diff(graph.indptr)
    out = np.full(n, NEUTRAL_FRACTION)
    nonzero = degrees > 0
    if np.any(nonzero):
        sums = np.add.reduceat(picked, graph.indptr[:-1][nonzero])
        out[nonzero] = sums / degrees[nonzero]
    return out


def write_edge_list(graph: SocialGraph, path) -> None:
    """Dump the graph as one "u v" pair per line for reproducibility audits."""
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in graph.edges():
            fh.write(f"{u} {v}\n")
