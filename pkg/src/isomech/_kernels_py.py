"""Pure-Python/numpy kernels. Same API as the compiled ``_kernels`` module."""

from __future__ import annotations

import numpy as np

POWER = 0
ACCEPT = 1


def pava_nonincreasing(values, weights):
    """Weighted least-squares fit of ``values`` under a non-increasing constraint."""
    y = np.asarray(values, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    means: list[float] = []
    wsum: list[float] = []
    sizes: list[int] = []
    for v, wt in zip(y.tolist(), w.tolist()):
        m, s, c = v, wt, 1
        # Pool while the previous block sits below the new one.
        while means and means[-1] < m:
            pm, ps, pc = means.pop(), wsum.pop(), sizes.pop()
            m = (pm * ps + m * s) / (ps + s)
            s += ps
            c += pc
        means.append(m)
        wsum.append(s)
        sizes.append(c)
    out = np.empty(len(y), dtype=np.float64)
    pos = 0
    for m, c in zip(means, sizes):
        out[pos:pos + c] = m
        pos += c
    return out


def _fit_rows(Y):
    # Min-max formula: x_i = min_{j<=i} max_{k>=i} mean(y[j..k]).
    m, n = Y.shape
    csum = np.concatenate([np.zeros((m, 1)), np.cumsum(Y, axis=1)], axis=1)
    avg = np.full((m, n, n), -np.inf)
    for j in range(n):
        for k in range(j, n):
            avg[:, j, k] = (csum[:, k + 1] - csum[:, j]) / (k - j + 1)
    fitted = np.empty_like(Y)
    for i in range(n):
        upper = avg[:, : i + 1, i:].max(axis=2)
        fitted[:, i] = upper.min(axis=1)
    return fitted


def _utility(fitted, kind, param):
    if kind == POWER:
        return (np.abs(fitted) ** param).sum(axis=1)
    if kind == ACCEPT:
        return (fitted > param).sum(axis=1).astype(np.float64)
    raise ValueError(f"unknown utility kind {kind}")


def row_utilities(Y, kind, param):
    """Utility of the unit-weight non-increasing fit of every row of ``Y``."""
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if Y.ndim != 2:
        raise ValueError("expected a 2-d array")
    if Y.shape[1] == 0:
        return np.zeros(Y.shape[0])
    return _utility(_fit_rows(Y), kind, param)


def mean_utilities(base, noise, kind, param):
    """For each row r of ``base``, mean utility of ``base[r] + noise[d]`` over draws d."""
    base = np.ascontiguousarray(base, dtype=np.float64)
    noise = np.ascontiguousarray(noise, dtype=np.float64)
    if base.shape[1] != noise.shape[1]:
        raise ValueError("base and noise column counts differ")
    out = np.empty(base.shape[0])
    for r in range(base.shape[0]):
        out[r] = row_utilities(base[r] + noise, kind, param).sum() / noise.shape[0]
    return out
