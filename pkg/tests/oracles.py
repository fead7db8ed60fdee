"""Independent reference computations used to check the production code.

Everything here is deliberately written in the most transparent way
possible (loops, enumeration, dynamic programming) and shares no code
with the solvers under test.
"""

import itertools

import numpy as np


def shortfall_loops(a, xi):
    total = 0.0
    for an, xn in zip(a, xi):
        if xn > an:
            total += xn - an
    return total


def saa_loops(samples, a):
    return sum(shortfall_loops(a, xi) for xi in samples) / len(samples)


def facility_cost_curve(samples, n, cap):
    """Mean shortfall of facility n at every integer allocation 0..cap."""
    grid = np.arange(cap + 1)
    col = np.asarray(samples, dtype=float)[:, n]
    return np.maximum(col[:, None] - grid[None, :], 0.0).mean(axis=0)


def integer_grid_optimum(samples, budget):
    """Exact minimum of the mean shortfall over all integer allocations.

    Dynamic program over (facility, remaining budget); equivalent to an
    exhaustive scan of every integer allocation with sum <= budget, just
    organized so the scan finishes. Requires integer-valued samples and
    budget.
    """
    samples = np.asarray(samples, dtype=float)
    K, N = samples.shape
    budget = int(round(budget))
    caps = samples.max(axis=0).astype(int)

    best = np.zeros(budget + 1)  # no facilities yet: zero shortfall
    for n in range(N):
        curve = facility_cost_curve(samples, n, caps[n])
        new = np.full(budget + 1, np.inf)
        for b in range(budget + 1):
            top = min(caps[n], b)
            for a_n in range(top + 1):
                val = curve[a_n] + best[b - a_n]
                if val < new[b]:
                    new[b] = val
        best = new
    return float(best[budget])


def integer_grid_optimum_literal(samples, budget):
    """Same optimum by literally enumerating the integer lattice."""
    samples = np.asarray(samples, dtype=float)
    K, N = samples.shape
    budget = int(round(budget))
    caps = samples.max(axis=0).astype(int)
    best = np.inf
    for alloc in itertools.product(*(range(int(c) + 1) for c in caps)):
        if sum(alloc) > budget:
            continue
        best = min(best, saa_loops(samples, np.array(alloc, dtype=float)))
    return float(best)


def random_instance(rng, max_n=8, max_k=5, max_value=20):
    """Random integer-valued allocation instance for the solver suites."""
    n = int(rng.integers(1, max_n + 1))
    k = int(rng.integers(1, max_k + 1))
    samples = rng.integers(0, max_value + 1, size=(k, n)).astype(float)
    cap_total = int(samples.max(axis=0).sum())
    budget = float(rng.integers(0, cap_total + 3))
    return samples, budget
