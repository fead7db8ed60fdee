"""Dense two-phase tableau simplex for small equality-form linear programs.

Self-contained on purpose: the allocation LP is used as an independent
cross-check of the water-filling solver, so it must not share any code with
it. Bland's rule is used throughout, which guarantees termination on the
highly degenerate instances that integer-valued demand data produces.
"""

import numpy as np

from .errors import IterationLimitError

_TOL = 1e-9


def _pivot(T, row, col):
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]


def _iterate(T, basis, n_enterable, max_iter):
    """Run Bland-rule pivots until no reduced cost is negative.

    Only columns with index < n_enterable may enter the basis; this lets
    phase 2 keep (zero-level) artificial columns around without ever
    reintroducing them.
    """
    m = len(basis)
    for it in range(max_iter):
        cost = T[m, :n_enterable]
        entering = -1
        for j in range(n_enterable):
            if cost[j] < -_TOL:
                entering = j
                break
        if entering < 0:
            return it
        col = T[:m, entering]
        ratios = np.full(m, np.inf)
        rows = col > _TOL
        ratios[rows] = T[:m, -1][rows] / col[rows]
        best = ratios.min()
        if not np.isfinite(best):
            raise IterationLimitError("unbounded pivot column; solver defect")
        ties = [i for i in range(m) if ratios[i] <= best + _TOL]
        leaving = min(ties, key=lambda i: basis[i])
        _pivot(T, leaving, entering)
        basis[leaving] = entering
    raise IterationLimitError(f"simplex exceeded {max_iter} pivots")


def solve_standard_lp(c, A, b, max_iter=10000):
    """Minimize c @ x subject to A @ x = b, x >= 0 (requires b >= 0).

    Returns (x, objective). Raises IterationLimitError when the pivot
    budget is exhausted; the callers' problems are always feasible and
    bounded, so that signals a defect rather than a bad instance.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.any(b < 0):
        raise ValueError("standard form requires b >= 0")
    m, n = A.shape

    # Phase 1: artificial variables form the initial basis.
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -A.sum(axis=0)
    T[m, -1] = -b.sum()
    basis = list(range(n, n + m))
    _iterate(T, basis, n, max_iter)
    if abs(T[m, -1]) > 1e-7 * max(1.0, abs(b).sum()):
        raise IterationLimitError("phase-1 residual nonzero; solver defect")

    # Drive any artificial still in the basis out (degenerate rows).
    for i in range(m):
        if basis[i] >= n:
            j = next((k for k in range(n) if abs(T[i, k]) > _TOL), None)
            if j is not None:
                _pivot(T, i, j)
                basis[i] = j

    # Phase 2: swap in the real objective, keep artificials locked out.
    T[m, :] = 0.0
    T[m, :n] = c
    for i in range(m):
        if basis[i] < n and T[m, basis[i]] != 0.0:
            T[m] -= T[m, basis[i]] * T[i]
    _iterate(T, basis, n, max_iter)

    x = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = T[i, -1]
    return x, float(c @ x)
