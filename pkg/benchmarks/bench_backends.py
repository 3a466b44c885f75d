#!/usr/bin/env python3
"""Benchmark the compiled trip kernel against the numpy fallback.

Runs the same configurations on both backends, checks the trajectories
agree, and reports wall time and speedup.

    python benchmarks/bench_backends.py [--epochs N] [--agents N] [--repeat K]
"""

import argparse
import time

import numpy as np

import valuesim as vs


def time_run(cfg, backend, repeat):
    best = float("inf")
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = vs.run_simulation(cfg, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--agents", type=int, default=500)
    ap.add_argument("--epochs", type=int, default=100)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    if "compiled" not in vs.available_backends():
        raise SystemExit("compiled backend not built; nothing to compare")

    scenarios = [
        ("baseline cf=0", vs.SimulationConfig(n_agents=args.agents, max_epochs=args.epochs, master_seed=7)),
        ("conformity cf=0.6", vs.SimulationConfig(n_agents=args.agents, max_epochs=args.epochs, cf=0.6, master_seed=7)),
        (
            "expectation anticipation",
            vs.SimulationConfig(
                n_agents=args.agents, max_epochs=args.epochs, anticipation="expectation", master_seed=7
            ),
        ),
    ]

    print(f"{args.agents} agents, up to {args.epochs} epochs, best of {args.repeat}")
    print(f"{'scenario':28s} {'python':>9s} {'compiled':>9s} {'speedup':>8s}  match")
    for name, cfg in scenarios:
        t_py, r_py = time_run(cfg, "python", args.repeat)
        t_cy, r_cy = time_run(cfg, "compiled", args.repeat)
        match = np.array_equal(r_py.population.distances, r_cy.population.distances) and np.array_equal(
            r_py.metrics.bus_fraction_per_trip, r_cy.metrics.bus_fraction_per_trip
        )
        print(f"{name:28s} {t_py:8.3f}s {t_cy:8.3f}s {t_py / t_cy:7.2f}x  {match}")


if __name__ == "__main__":
    main()
