"""Least-squares projection of score vectors onto order constraints.

Total orders are handled by pool-adjacent-violators. Coarse (block) orders
come in two flavours:

* ``TieMode.EQUALITY``: papers in the same block share one fitted value, so the
  problem collapses to weighted PAVA on block means.
* ``TieMode.DOMINANCE``: only cross-block constraints apply (everything in block
  i is at least everything in block i+1). Solved exactly by recursive
  partitioning into upper/lower sets around the weighted mean.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from isomech._backend import kernels

CONSTRAINT_TOL = 1e-9


class Direction(enum.Enum):
    NON_INCREASING = "non_increasing"
    NON_DECREASING = "non_decreasing"


class TieMode(enum.Enum):
    EQUALITY = "equality"
    DOMINANCE = "dominance"


@dataclass(frozen=True)
class OrderSpec:
    """Ordered blocks of indices into a score vector, best block first."""

    blocks: tuple[tuple[int, ...], ...]
    tie_mode: TieMode = TieMode.EQUALITY

    def __post_init__(self):
        blocks = tuple(tuple(int(i) for i in b) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        seen: set[int] = set()
        for b in blocks:
            if not b:
                raise ValueError("OrderSpec blocks must be non-empty")
            for i in b:
                if i in seen:
                    raise ValueError(f"index {i} appears in more than one block")
                if i < 0:
                    raise ValueError(f"negative index {i}")
                seen.add(i)

    @classmethod
    def total(cls, n: int) -> "OrderSpec":
        return cls(tuple((i,) for i in range(n)))

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(i for b in self.blocks for i in b)

    def validate_for(self, n: int) -> None:
        idx = self.indices
        if sorted(idx) != list(range(n)):
            raise ValueError(
                f"OrderSpec must cover exactly indices 0..{n - 1}, got {sorted(idx)}"
            )

    def pairs(self) -> list[tuple[int, int]]:
        """All constraints ``fitted[a] >= fitted[b]`` implied by the blocks."""
        out = []
        for k, hi in enumerate(self.blocks):
            for lo in self.blocks[k + 1:]:
                out.extend((a, b) for a in hi for b in lo)
        if self.tie_mode is TieMode.EQUALITY:
            for b in self.blocks:
                out.extend((b[i], b[i + 1]) for i in range(len(b) - 1))
                out.extend((b[i + 1], b[i]) for i in range(len(b) - 1))
        return out


@dataclass(frozen=True)
class ProjectionResult:
    fitted: np.ndarray
    objective: float


def _check_inputs(values, weights):
    y = np.asarray(values, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError("values must be one-dimensional")
    if weights is None:
        w = np.ones_like(y)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != y.shape:
            raise ValueError(
                f"length mismatch: {y.shape[0]} values, {w.shape[0]} weights"
            )
        if not np.all(w > 0):
            raise ValueError("weights must be strictly positive")
    if not np.all(np.isfinite(y)):
        raise ValueError("values must be finite")
    return y, w


def _result(fitted, y, w) -> ProjectionResult:
    return ProjectionResult(fitted, float(np.sum(w * (fitted - y) ** 2)))


def pava(
    values: Sequence[float],
    weights: Sequence[float] | None = None,
    direction: Direction = Direction.NON_DECREASING,
) -> ProjectionResult:
    """Weighted isotonic regression under a total order.

    Runs in linear time with a single forward pass and back-merging of
    violating blocks.
    """
    y, w = _check_inputs(values, weights)
    if direction is Direction.NON_INCREASING:
        fitted = kernels.pava_nonincreasing(y, w)
    else:
        fitted = -kernels.pava_nonincreasing(-y, w)
    return _result(fitted, y, w)


def project_total_order(
    raw: Sequence[float], weights: Sequence[float] | None = None
) -> ProjectionResult:
    """Project scores listed best-first onto the non-increasing cone."""
    return pava(raw, weights, Direction.NON_INCREASING)


def _equality_fit(y, w, blocks):
    bw = np.array([w[list(b)].sum() for b in blocks])
    bm = np.array([np.dot(w[list(b)], y[list(b)]) for b in blocks]) / bw
    level = kernels.pava_nonincreasing(bm, bw)
    fitted = np.empty_like(y)
    for b, v in zip(blocks, level):
        fitted[list(b)] = v
    return fitted


def _best_upper_set(idx, levels, gain):
    # Upper sets of a layered order are: all of the higher layers plus any
    # subset of one layer. Returns the set maximising total gain.
    best_val, best = 0.0, []
    prefix_val, prefix = 0.0, []
    for lv in sorted(set(levels)):
        layer = [k for k in range(len(idx)) if levels[k] == lv]
        pos = [k for k in layer if gain[k] > 0]
        val = prefix_val + sum(gain[k] for k in pos)
        if val > best_val:
            best_val, best = val, prefix + pos
        prefix_val += sum(gain[k] for k in layer)
        prefix = prefix + layer
    return best_val, best


def _dominance_fit(y, w, blocks):
    layer_of = np.empty(len(y), dtype=int)
    for k, b in enumerate(blocks):
        layer_of[list(b)] = k
    fitted = np.empty_like(y)
    stack = [np.arange(len(y))]
    while stack:
        group = stack.pop()
        gw = w[group]
        mean = float(np.dot(gw, y[group]) / gw.sum())
        gain = gw * (y[group] - mean)
        scale = float(np.abs(gain).sum())
        val, upper = _best_upper_set(group, layer_of[group].tolist(), gain.tolist())
        # A split only counts if it beats rounding noise in the gain sums.
        if val <= 1e-13 * max(scale, 1e-300) or len(upper) in (0, len(group)):
            fitted[group] = mean
            continue
        mask = np.zeros(len(group), dtype=bool)
        mask[upper] = True
        stack.append(group[mask])
        stack.append(group[~mask])
    return fitted


def project_block_order(
    raw: Sequence[float],
    order: OrderSpec,
    weights: Sequence[float] | None = None,
) -> ProjectionResult:
    """Project ``raw`` onto the scores consistent with a coarse ranking."""
    y, w = _check_inputs(raw, weights)
    order.validate_for(len(y))
    if len(y) == 0:
        return ProjectionResult(y.copy(), 0.0)
    if all(len(b) == 1 for b in order.blocks):
        idx = np.array(order.indices)
        fitted = np.empty_like(y)
        fitted[idx] = kernels.pava_nonincreasing(y[idx], w[idx])
    elif order.tie_mode is TieMode.EQUALITY:
        fitted = _equality_fit(y, w, order.blocks)
    else:
        fitted = _dominance_fit(y, w, order.blocks)
    return _result(fitted, y, w)


def satisfies(fitted, order: OrderSpec, tol: float = CONSTRAINT_TOL) -> bool:
    x = np.asarray(fitted, dtype=np.float64)
    return all(x[a] >= x[b] - tol for a, b in order.pairs())
