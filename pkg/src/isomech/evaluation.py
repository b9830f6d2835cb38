"""Accuracy metrics against latent quality, grouped by ranking length.

Two analyses are kept apart on purpose. The length-grouped table and the
regressions use each author's own calibrated scores (before coauthor
averaging); the overall table uses the coauthor-averaged modified scores.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import betainc

from isomech.data import Dataset, coverage_stats, raw_score


class InferenceError(ValueError):
    """Regression inference is undefined for the given inputs."""


def error_metrics(
    estimates: Mapping[str, float],
    truth: Mapping[str, float],
    subset: Iterable[str] | None = None,
) -> tuple[float, float]:
    keys = list(truth) if subset is None else list(subset)
    if not keys:
        raise ValueError("error_metrics needs a non-empty subset")
    d = np.array([estimates[k] - truth[k] for k in keys], dtype=np.float64)
    return float(np.mean(d * d)), float(np.mean(np.abs(d)))


def t_two_sided_pvalue(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    return float(betainc(df / 2.0, 0.5, df / (df + t * t)))


def ols_with_pvalue(x: Sequence[float], y: Sequence[float]) -> tuple[float, float, float]:
    """Simple linear regression with a two-sided t-test on the slope.

    Exact fits report p = 0; constant ``y`` reports slope 0 and p = 1.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(x)
    if n != len(y):
        raise ValueError("x and y differ in length")
    if n < 3:
        raise InferenceError(f"need at least 3 points, got {n}")
    xm, ym = x.mean(), y.mean()
    dx, dy = x - xm, y - ym
    sxx = float(np.dot(dx, dx))
    if sxx == 0.0:
        raise InferenceError("x is constant")
    syy = float(np.dot(dy, dy))
    slope = float(np.dot(dx, dy)) / sxx
    intercept = float(ym - slope * xm)
    if syy == 0.0:
        return 0.0, intercept, 1.0
    resid = dy - slope * dx
    sse = float(np.dot(resid, resid))
    if sse <= 1e-24 * syy:
        return slope, intercept, 0.0
    se = math.sqrt(sse / (n - 2) / sxx)
    return slope, intercept, t_two_sided_pvalue(slope / se, n - 2)


@dataclass(frozen=True)
class AuthorRecord:
    author_id: str
    length: int
    n_submissions: int
    mse_raw: float
    mse_modified: float
    mae_raw: float
    mae_modified: float


def group_by_ranking_length(world, result) -> list[AuthorRecord]:
    """Per-author errors of raw vs the author's own calibrated scores."""
    ds: Dataset = world.dataset
    theta = world.theta
    records = []
    for aid in sorted(result.per_author):
        cal = result.per_author[aid]
        papers = list(cal)
        raw = {p: raw_score(ds.submissions[p]) for p in papers}
        mse_r, mae_r = error_metrics(raw, theta, papers)
        mse_m, mae_m = error_metrics(cal, theta, papers)
        records.append(AuthorRecord(
            aid, len(papers), len(ds.authors[aid].submission_ids), mse_r, mse_m, mae_r, mae_m
        ))
    return records


def pct_improvement(err_raw: float, err_mod: float) -> float | None:
    if err_raw <= 0.0:
        return None
    return 100.0 * (err_raw - err_mod) / err_raw


def _nan_to_none(x):
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return None
    return x


@dataclass
class EvaluationReport:
    per_length: dict[int, dict]
    overall: dict
    regression: dict[str, dict | None]
    coverage: dict
    diagnostics: dict = field(default_factory=dict)
    replications: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "per_length": {str(k): self.per_length[k] for k in sorted(self.per_length)},
            "overall": self.overall,
            "regression": self.regression,
            "coverage": self.coverage,
            "diagnostics": self.diagnostics,
            "replications": self.replications,
        }


@dataclass(frozen=True)
class ReplicationSummary:
    """Everything needed to pool a replication into an aggregate report."""

    records: tuple[AuthorRecord, ...]
    sse_raw: float
    sse_modified: float
    sae_raw: float
    sae_modified: float
    n_papers: int
    coverage: tuple[float, float]


def summarize(world, result) -> ReplicationSummary:
    ds: Dataset = world.dataset
    theta = world.theta
    d_raw = np.array([result.raw[p] - theta[p] for p in ds.submissions])
    d_mod = np.array([result.modified[p] - theta[p] for p in ds.submissions])
    return ReplicationSummary(
        tuple(group_by_ranking_length(world, result)),
        float(np.dot(d_raw, d_raw)),
        float(np.dot(d_mod, d_mod)),
        float(np.abs(d_raw).sum()),
        float(np.abs(d_mod).sum()),
        len(ds.submissions),
        coverage_stats(ds),
    )


def _per_length(records: Sequence[AuthorRecord]) -> dict[int, dict]:
    groups: dict[int, list[AuthorRecord]] = defaultdict(list)
    for r in records:
        groups[r.length].append(r)
    out = {}
    for k in sorted(groups):
        g = groups[k]
        out[k] = {
            "mse_raw": float(np.mean([r.mse_raw for r in g])),
            "mse_modified": float(np.mean([r.mse_modified for r in g])),
            "mae_raw": float(np.mean([r.mae_raw for r in g])),
            "mae_modified": float(np.mean([r.mae_modified for r in g])),
            "n_authors": len(g),
        }
    return out


def _regressions(records, per_length, level: str):
    out: dict[str, dict | None] = {}
    excluded: dict[str, int] = {}
    for metric in ("mse", "mae"):
        xs, ys, skipped = [], [], 0
        if level == "author":
            for r in records:
                imp = pct_improvement(getattr(r, f"{metric}_raw"), getattr(r, f"{metric}_modified"))
                if imp is None:
                    skipped += 1
                    continue
                xs.append(r.n_submissions)
                ys.append(imp)
        elif level == "group":
            for k, g in per_length.items():
                imp = pct_improvement(g[f"{metric}_raw"], g[f"{metric}_modified"])
                if imp is None:
                    skipped += 1
                    continue
                xs.append(k)
                ys.append(imp)
        else:
            raise ValueError(f"unknown regression level {level!r}")
        excluded[metric] = skipped
        if len(set(per_length)) < 3 or len(set(xs)) < 2:
            out[metric] = None
            continue
        try:
            slope, intercept, p = ols_with_pvalue(xs, ys)
        except InferenceError:
            out[metric] = None
            continue
        out[metric] = {
            "slope": slope,
            "intercept": intercept,
            "p_value": p,
            "n_points": len(xs),
        }
    return out, excluded


def _overall(sse_raw, sse_mod, sae_raw, sae_mod, n):
    mse_raw, mse_mod = sse_raw / n, sse_mod / n
    mae_raw, mae_mod = sae_raw / n, sae_mod / n
    return {
        "mse_raw": mse_raw,
        "mse_modified": mse_mod,
        "mae_raw": mae_raw,
        "mae_modified": mae_mod,
        "n_papers": n,
        "mse_improvement_pct": _nan_to_none(pct_improvement(mse_raw, mse_mod)),
        "mae_improvement_pct": _nan_to_none(pct_improvement(mae_raw, mae_mod)),
    }


def aggregate(
    summaries: Sequence[ReplicationSummary],
    options=None,
    regression_level: str = "author",
) -> EvaluationReport:
    """Pool replications in the given order into one report."""
    if not summaries:
        raise ValueError("nothing to aggregate")
    records = [r for s in summaries for r in s.records]
    per_length = _per_length(records)
    regression, excluded = _regressions(records, per_length, regression_level)
    n = sum(s.n_papers for s in summaries)
    overall = _overall(
        sum(s.sse_raw for s in summaries),
        sum(s.sse_modified for s in summaries),
        sum(s.sae_raw for s in summaries),
        sum(s.sae_modified for s in summaries),
        n,
    )
    cov = np.array([s.coverage for s in summaries])
    reps = []
    if len(summaries) > 1:
        for i, s in enumerate(summaries, start=1):
            pl = _per_length(s.records)
            reg, _ = _regressions(s.records, pl, regression_level)
            reps.append({
                "replication": i,
                "overall": _overall(s.sse_raw, s.sse_modified, s.sae_raw, s.sae_modified, s.n_papers),
                "slope_mse": None if reg["mse"] is None else reg["mse"]["slope"],
                "slope_mae": None if reg["mae"] is None else reg["mae"]["slope"],
                "per_length_mse": {
                    str(k): [v["mse_raw"], v["mse_modified"], v["n_authors"]] for k, v in pl.items()
                },
            })
    diagnostics = {
        "excluded_zero_error": excluded,
        "n_author_records": len(records),
        "n_replications": len(summaries),
        "regression_level": regression_level,
    }
    if options is not None:
        diagnostics["mechanism"] = options.to_dict()
    return EvaluationReport(
        per_length=per_length,
        overall=overall,
        regression=regression,
        coverage={
            "frac_multi_submission_authors": float(cov[:, 0].mean()),
            "frac_papers_with_multi_coauthor": float(cov[:, 1].mean()),
        },
        diagnostics=diagnostics,
        replications=reps,
    )


def build_report(world, result, mechanism_options=None, regression_level: str = "author") -> EvaluationReport:
    return aggregate([summarize(world, result)], mechanism_options, regression_level)
