"""Exhaustive check that truthful ranking maximizes an author's expected utility.

All reports are scored against one shared set of noise draws. Each draw is
a vector indexed by rank position: the score observed for the paper placed
k-th is ``theta[report[k]] + z[k]``. Under i.i.d. (exchangeable) noise this
has the same law as attaching the noise to papers, and it makes every draw
a paired comparison between reports.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from isomech._backend import kernels

MAX_DIM = 7


class GuardError(ValueError):
    """Instance too large for exhaustive enumeration."""


class UtilityKind(enum.Enum):
    CONVEX_POWER = "power"
    ACCEPT_COUNT = "accept"


@dataclass(frozen=True)
class UtilitySpec:
    """``power:p`` sums |score|**p over own papers; ``accept:t`` counts scores > t."""

    kind: UtilityKind
    param: float

    def __post_init__(self):
        if not math.isfinite(self.param):
            raise ValueError("utility parameter must be finite")
        if self.kind is UtilityKind.CONVEX_POWER and self.param < 1:
            raise ValueError("convex power utility needs exponent >= 1")

    @classmethod
    def power(cls, exponent: float) -> "UtilitySpec":
        return cls(UtilityKind.CONVEX_POWER, float(exponent))

    @classmethod
    def accept(cls, threshold: float) -> "UtilitySpec":
        return cls(UtilityKind.ACCEPT_COUNT, float(threshold))

    @classmethod
    def parse(cls, text: str) -> "UtilitySpec":
        kind, _, value = text.partition(":")
        try:
            v = float(value)
        except ValueError:
            raise ValueError(f"bad utility {text!r}; expected power:<p> or accept:<t>") from None
        if kind == "power":
            return cls.power(v)
        if kind == "accept":
            return cls.accept(v)
        raise ValueError(f"bad utility {text!r}; expected power:<p> or accept:<t>")

    def __str__(self) -> str:
        return f"{self.kind.value}:{self.param:g}"

    @property
    def _kernel_kind(self) -> int:
        return kernels.POWER if self.kind is UtilityKind.CONVEX_POWER else kernels.ACCEPT


def enumerate_reports(n: int) -> list[tuple[int, ...]]:
    """Every strict ranking of n papers, in lexicographic order."""
    if n < 1:
        raise ValueError("need at least one paper")
    if n > MAX_DIM:
        raise GuardError(f"{n} papers exceeds the exhaustive-search limit of {MAX_DIM}")
    return list(itertools.permutations(range(n)))


def noise_draws(n: int, noise_stddev: float, n_draws: int, seed: int,
                dist: str = "gaussian") -> np.ndarray:
    """Shared draw matrix (n_draws x n) with the requested standard deviation."""
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    if noise_stddev < 0:
        raise ValueError("noise_stddev must be >= 0")
    if noise_stddev == 0:
        # All draws coincide, so one row gives the exact mean.
        return np.zeros((1, n))
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    if dist == "gaussian":
        z = rng.standard_normal((n_draws, n))
    elif dist == "laplace":
        z = rng.laplace(0.0, 1.0 / math.sqrt(2.0), (n_draws, n))
    elif dist == "t3":
        z = rng.standard_t(3, (n_draws, n)) / math.sqrt(3.0)
    else:
        raise ValueError(f"unknown noise distribution {dist!r}")
    return noise_stddev * z


def _report_matrix(theta: np.ndarray, reports: Sequence[Sequence[int]]) -> np.ndarray:
    return theta[np.asarray(reports, dtype=np.intp)]


def expected_utility(
    theta: Sequence[float],
    report: Sequence[int],
    utility: UtilitySpec,
    noise_stddev: float,
    n_draws: int,
    seed: int,
    dist: str = "gaussian",
) -> float:
    th = np.asarray(theta, dtype=np.float64)
    if sorted(report) != list(range(len(th))):
        raise ValueError("report must be a permutation of the paper indices")
    z = noise_draws(len(th), noise_stddev, n_draws, seed, dist)
    return float(kernels.mean_utilities(
        _report_matrix(th, [report]), z, utility._kernel_kind, utility.param
    )[0])


def truthful_report(scores: Sequence[float]) -> tuple[int, ...]:
    """Indices by descending score, ties by index."""
    return tuple(sorted(range(len(scores)), key=lambda i: (-scores[i], i)))


@dataclass(frozen=True)
class TruthfulnessResult:
    truthful_optimal: bool
    best_report: tuple[int, ...]
    margin: float | None
    truthful: tuple[int, ...]
    utilities: tuple[float, ...]

    def to_dict(self, config: dict | None = None) -> dict:
        return {
            "truthful_optimal": self.truthful_optimal,
            "best_report": list(self.best_report),
            "margin": self.margin,
            "config": config or {},
        }


def verify_truthful(
    theta: Sequence[float],
    utility: UtilitySpec,
    noise_stddev: float,
    n_draws: int,
    seed: int,
    dist: str = "gaussian",
    knowledge_noise: float = 0.0,
    tol: float = 1e-9,
) -> TruthfulnessResult:
    """Compare the truthful report with every alternative on common draws.

    ``knowledge_noise > 0`` makes the author rank a privately perturbed copy
    of theta instead of theta itself.
    """
    th = np.asarray(theta, dtype=np.float64)
    n = len(th)
    reports = enumerate_reports(n)
    belief = th
    if knowledge_noise > 0:
        rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(1,)))
        belief = th + knowledge_noise * rng.standard_normal(n)
    truthful = truthful_report(belief.tolist())
    z = noise_draws(n, noise_stddev, n_draws, seed, dist)
    values = kernels.mean_utilities(_report_matrix(th, reports), z, utility._kernel_kind, utility.param)
    k_true = reports.index(truthful)
    best = float(values.max())
    v_true = float(values[k_true])
    optimal = v_true >= best - tol * max(1.0, abs(best))
    others = np.delete(values, k_true)
    margin = float(v_true - others.max()) if len(others) else None
    best_report = truthful if optimal else reports[int(np.argmax(values))]
    return TruthfulnessResult(optimal, best_report, margin, truthful, tuple(values.tolist()))
