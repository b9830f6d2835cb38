"""Reference solver for small order-constrained least-squares problems.

Deliberately shares no code with :mod:`isomech.isotonic`. It works on the
explicit list of pairwise constraints ``x[a] >= x[b]`` and runs projected
coordinate ascent on the dual (Hildreth's method): each step is an exact
line search on one multiplier followed by projection onto ``lambda >= 0``.
Once the iterates settle, the components joined by active constraints are
pooled to their weighted means, which gives the exact solution when the
active set is right; the pooled point is accepted only if it is feasible
and no worse than the iterate.

Test-scale only (n <= 16).
"""

from __future__ import annotations

import numpy as np

from isomech.isotonic import OrderSpec, ProjectionResult

MAX_N = 16


class OracleDidNotConverge(RuntimeError):
    pass


def _pool_active(y, w, pairs, lam, tol):
    parent = list(range(len(y)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for (a, b), lk in zip(pairs, lam):
        if lk > tol:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
    roots = np.array([find(i) for i in range(len(y))])
    x = np.empty_like(y)
    for r in np.unique(roots):
        m = roots == r
        x[m] = np.dot(w[m], y[m]) / w[m].sum()
    return x


def oracle_project(raw, order: OrderSpec | None = None, weights=None,
                   max_sweeps: int = 2_000_000) -> ProjectionResult:
    y = np.asarray(raw, dtype=np.float64)
    n = len(y)
    if n > MAX_N:
        raise ValueError(f"oracle is limited to n <= {MAX_N}")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    if order is None:
        order = OrderSpec.total(n)
    order.validate_for(n)
    pairs = order.pairs()
    x = y.copy()
    if not pairs:
        return ProjectionResult(x, 0.0)

    inv_w = (1.0 / w).tolist()
    xs = x.tolist()
    lam = [0.0] * len(pairs)
    denom = [inv_w[a] + inv_w[b] for a, b in pairs]
    scale = max(1.0, float(np.abs(y).max()))
    for _ in range(max_sweeps):
        moved = 0.0
        for k, (a, b) in enumerate(pairs):
            new = lam[k] + (xs[b] - xs[a]) / denom[k]
            if new < 0.0:
                new = 0.0
            d = new - lam[k]
            if d != 0.0:
                lam[k] = new
                xs[a] += d * inv_w[a]
                xs[b] -= d * inv_w[b]
                moved = max(moved, abs(d) * max(inv_w[a], inv_w[b]))
        if moved < 1e-13 * scale:
            break
    else:
        raise OracleDidNotConverge(f"no convergence after {max_sweeps} sweeps")

    it = np.array(xs)
    lam_arr = np.array(lam)
    pooled = _pool_active(y, w, pairs, lam_arr, 1e-15 * scale)
    primal = 0.5 * float(np.sum(w * (pooled - y) ** 2))
    dual = 0.5 * float(np.sum(w * (it - y) ** 2)) + float(
        sum(lk * (it[b] - it[a]) for (a, b), lk in zip(pairs, lam))
    )
    feasible = all(pooled[a] >= pooled[b] - 1e-12 * scale for a, b in pairs)
    if not feasible or primal - dual > 1e-10 * scale * scale:
        raise OracleDidNotConverge(
            f"pooled point not certified (feasible={feasible}, gap={primal - dual:.3g})"
        )
    return ProjectionResult(pooled, 2.0 * primal)
