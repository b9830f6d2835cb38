"""Author-level calibration and coauthor averaging."""

from __future__ import annotations

import csv
import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from isomech.data import Author, Dataset, DatasetError, Ranking, raw_score
from isomech.isotonic import OrderSpec, TieMode, project_block_order


class Variant(enum.Enum):
    FULL = "full"
    TOPIC_PARTITION = "partition"


class WeightMode(enum.Enum):
    UNIT = "unit"
    REVIEW_COUNT = "reviews"


@dataclass(frozen=True)
class MechanismOptions:
    variant: Variant = Variant.FULL
    tie_mode: TieMode = TieMode.EQUALITY
    weight_mode: WeightMode = WeightMode.UNIT
    flag_threshold: float = 1.0

    def __post_init__(self):
        if not self.flag_threshold >= 0:
            raise ValueError("flag_threshold must be >= 0")

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "tie_mode": self.tie_mode.value,
            "weight_mode": self.weight_mode.value,
            "flag_threshold": self.flag_threshold,
        }


@dataclass(frozen=True)
class CalibrationResult:
    per_author: Mapping[str, Mapping[str, float]]
    modified: Mapping[str, float]
    flagged: frozenset[str]
    participating: Mapping[str, int]
    raw: Mapping[str, float] = field(default_factory=dict)


def _project(ranking_blocks, dataset, options):
    ids = [p for b in ranking_blocks for p in b]
    pos = {p: i for i, p in enumerate(ids)}
    y = np.array([raw_score(dataset.submissions[p]) for p in ids])
    if options.weight_mode is WeightMode.REVIEW_COUNT:
        w = np.array([float(dataset.submissions[p].n_reviews) for p in ids])
    else:
        w = np.ones(len(ids))
    order = OrderSpec(tuple(tuple(pos[p] for p in b) for b in ranking_blocks), options.tie_mode)
    fitted = project_block_order(y, order, w).fitted
    return dict(zip(ids, fitted.tolist()))


def calibrate_author(
    author: Author, ranking: Ranking, dataset: Dataset, options: MechanismOptions
) -> dict[str, float]:
    """Calibrated scores for the papers in one author's ranking."""
    if ranking.author_id != author.id:
        raise ValueError(f"ranking belongs to {ranking.author_id!r}, not {author.id!r}")
    own = set(author.submission_ids)
    for p in ranking.paper_ids:
        if p not in dataset.submissions:
            raise DatasetError(f"ranking of {author.id!r} references unknown paper {p!r}")
        if p not in own:
            raise DatasetError(f"ranking of {author.id!r} includes paper {p!r} they are not on")

    if options.variant is Variant.FULL:
        return _project(ranking.blocks, dataset, options)

    # Restrict the ranking to each topic, keeping the original block order.
    groups: dict[object, list[list[str]]] = {}
    order_keys: list[object] = []
    for b in ranking.blocks:
        per_topic: dict[object, list[str]] = {}
        for p in b:
            topic = dataset.submissions[p].topic
            key = ("topic", topic) if topic is not None else ("paper", p)
            per_topic.setdefault(key, []).append(p)
        for key, members in per_topic.items():
            if key not in groups:
                groups[key] = []
                order_keys.append(key)
            groups[key].append(members)
    out: dict[str, float] = {}
    for key in order_keys:
        blocks = groups[key]
        if sum(len(b) for b in blocks) == 1:
            p = blocks[0][0]
            out[p] = raw_score(dataset.submissions[p])
        else:
            out.update(_project(blocks, dataset, options))
    return {p: out[p] for p in ranking.paper_ids}


def calibrate_all(dataset: Dataset, options: MechanismOptions) -> dict[str, dict[str, float]]:
    return {
        aid: calibrate_author(dataset.authors[aid], r, dataset, options)
        for aid, r in dataset.rankings.items()
    }


def combine_coauthors(
    dataset: Dataset,
    per_author: Mapping[str, Mapping[str, float]],
    options: MechanismOptions,
) -> CalibrationResult:
    """Average each paper's calibrated scores over the coauthors who ranked it."""
    collected: dict[str, list[float]] = defaultdict(list)
    for aid in sorted(per_author):
        for p, v in per_author[aid].items():
            if p not in dataset.submissions:
                raise DatasetError(f"calibration of {aid!r} references unknown paper {p!r}")
            collected[p].append(v)
    raw, modified, participating = {}, {}, {}
    flagged = set()
    for p, s in dataset.submissions.items():
        r = raw_score(s)
        raw[p] = r
        vals = collected.get(p, [])
        participating[p] = len(vals)
        if vals:
            modified[p] = math.fsum(vals) / len(vals)
            if abs(modified[p] - r) >= options.flag_threshold:
                flagged.add(p)
        else:
            modified[p] = r
    return CalibrationResult(
        {a: dict(v) for a, v in per_author.items()},
        modified,
        frozenset(flagged),
        participating,
        raw,
    )


def run_mechanism(dataset: Dataset, options: MechanismOptions) -> CalibrationResult:
    return combine_coauthors(dataset, calibrate_all(dataset, options), options)


def residual_report(result: CalibrationResult, dataset: Dataset):
    """Rows ``(paper_id, raw, modified, residual)``, largest |residual| first."""
    rows = []
    for p, s in dataset.submissions.items():
        raw = result.raw.get(p, raw_score(s))
        mod = result.modified[p]
        rows.append((p, raw, mod, mod - raw))
    rows.sort(key=lambda r: (-abs(r[3]), r[0]))
    return rows


CALIBRATION_COLUMNS = ("paper_id", "raw", "modified", "residual", "participating", "flagged")


def write_calibration(result: CalibrationResult, dataset: Dataset, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CALIBRATION_COLUMNS)
        for p, s in dataset.submissions.items():
            raw = result.raw.get(p, raw_score(s))
            mod = result.modified[p]
            w.writerow([
                p, repr(raw), repr(mod), repr(mod - raw),
                result.participating[p], int(p in result.flagged),
            ])
    return path


def write_residuals(result: CalibrationResult, dataset: Dataset, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("rank", "paper_id", "raw", "modified", "residual"))
        for k, (p, raw, mod, res) in enumerate(residual_report(result, dataset), start=1):
            w.writerow([k, p, repr(raw), repr(mod), repr(res)])
    return path
