"""Peer-review data model, CSV loading/writing and coverage statistics.

Four UTF-8 CSV files with header rows make up a dataset directory::

    submissions.csv   paper_id,topic          (topic may be empty)
    reviews.csv       paper_id,score          (one row per review)
    authorships.csv   paper_id,author_id
    rankings.csv      author_id,paper_id,block_index   (1-based, lower = better)
"""

from __future__ import annotations

import csv
import math
import os
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

SUBMISSIONS = "submissions.csv"
REVIEWS = "reviews.csv"
AUTHORSHIPS = "authorships.csv"
RANKINGS = "rankings.csv"

SCHEMAS = {
    SUBMISSIONS: ("paper_id", "topic"),
    REVIEWS: ("paper_id", "score"),
    AUTHORSHIPS: ("paper_id", "author_id"),
    RANKINGS: ("author_id", "paper_id", "block_index"),
}


class DatasetError(ValueError):
    """Validation failure, carrying the file and row where it was found."""

    def __init__(self, message: str, path: str | None = None, row: int | None = None):
        self.path = path
        self.row = row
        loc = ""
        if path is not None:
            loc = f"{path}" + (f", row {row}" if row is not None else "") + ": "
        super().__init__(loc + message)


@dataclass(frozen=True)
class Submission:
    id: str
    review_scores: tuple[float, ...]
    topic: str | None = None

    @property
    def n_reviews(self) -> int:
        return len(self.review_scores)


@dataclass(frozen=True)
class Author:
    id: str
    submission_ids: tuple[str, ...]


@dataclass(frozen=True)
class Ranking:
    """One author's ordered blocks of their own papers, best block first."""

    author_id: str
    blocks: tuple[tuple[str, ...], ...]

    @property
    def paper_ids(self) -> tuple[str, ...]:
        return tuple(p for b in self.blocks for p in b)

    @property
    def is_strict(self) -> bool:
        return all(len(b) == 1 for b in self.blocks)

    @classmethod
    def strict(cls, author_id: str, paper_ids: Iterable[str]) -> "Ranking":
        return cls(author_id, tuple((p,) for p in paper_ids))


@dataclass(frozen=True)
class Dataset:
    """Immutable container; the mappings must not be mutated after construction."""

    scale: tuple[float, float]
    submissions: Mapping[str, Submission]
    authors: Mapping[str, Author]
    rankings: Mapping[str, Ranking] = field(default_factory=dict)

    def __post_init__(self):
        validate(self)

    def paper_authors(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {p: [] for p in self.submissions}
        for a in self.authors.values():
            for p in a.submission_ids:
                out[p].append(a.id)
        return out


def validate(ds: Dataset) -> None:
    lo, hi = ds.scale
    if not lo < hi:
        raise DatasetError(f"scale_min {lo} must be below scale_max {hi}")
    for pid, s in ds.submissions.items():
        if pid != s.id:
            raise DatasetError(f"submission key {pid!r} does not match id {s.id!r}")
        if not s.review_scores:
            raise DatasetError(f"paper {pid!r} has no reviews")
        for x in s.review_scores:
            if not (lo <= x <= hi):
                raise DatasetError(f"paper {pid!r} score {x} outside [{lo}, {hi}]")
    for aid, a in ds.authors.items():
        if not a.submission_ids:
            raise DatasetError(f"author {aid!r} has no submissions")
        if len(set(a.submission_ids)) != len(a.submission_ids):
            raise DatasetError(f"author {aid!r} lists a paper twice")
        for p in a.submission_ids:
            if p not in ds.submissions:
                raise DatasetError(f"author {aid!r} references unknown paper {p!r}")
    for aid, r in ds.rankings.items():
        if aid != r.author_id or aid not in ds.authors:
            raise DatasetError(f"ranking for unknown author {aid!r}")
        own = set(ds.authors[aid].submission_ids)
        seen: set[str] = set()
        for b in r.blocks:
            if not b:
                raise DatasetError(f"ranking of {aid!r} has an empty block")
            for p in b:
                if p not in ds.submissions:
                    raise DatasetError(f"ranking of {aid!r} references unknown paper {p!r}")
                if p not in own:
                    raise DatasetError(f"ranking of {aid!r} includes paper {p!r} they are not on")
                if p in seen:
                    raise DatasetError(f"ranking of {aid!r} lists paper {p!r} twice")
                seen.add(p)
        if len(seen) < 2:
            raise DatasetError(f"ranking of {aid!r} covers fewer than two papers")


def raw_score(submission: Submission) -> float:
    """Displayed score: the plain mean of the reviews."""
    return math.fsum(submission.review_scores) / len(submission.review_scores)


def raw_scores(ds: Dataset) -> dict[str, float]:
    return {pid: raw_score(s) for pid, s in ds.submissions.items()}


def coverage_stats(ds: Dataset) -> tuple[float, float]:
    """Fraction of authors with >= 2 papers, and fraction of papers with such a coauthor."""
    if not ds.authors:
        return 0.0, 0.0
    multi = {a.id for a in ds.authors.values() if len(a.submission_ids) >= 2}
    frac_authors = len(multi) / len(ds.authors)
    covered = {p for a in multi for p in ds.authors[a].submission_ids}
    frac_papers = len(covered) / len(ds.submissions) if ds.submissions else 0.0
    return frac_authors, frac_papers


def partial_rankings(ds: Dataset) -> list[str]:
    """Authors whose ranking leaves out some of their own papers."""
    return sorted(
        aid for aid, r in ds.rankings.items()
        if len(r.paper_ids) < len(ds.authors[aid].submission_ids)
    )


# --- CSV I/O -------------------------------------------------------------


def _read_rows(path: Path):
    name = path.name
    expected = SCHEMAS[name]
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise DatasetError("file not found", str(path)) from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DatasetError("missing header row", str(path))
        header = [h.strip() for h in header]
        if tuple(header) != expected:
            raise DatasetError(
                f"expected columns {','.join(expected)}, got {','.join(header)}", str(path), 1
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(expected):
                raise DatasetError(
                    f"expected {len(expected)} fields, got {len(row)}", str(path), lineno
                )
            yield lineno, [c.strip() for c in row]


def _parse_float(text: str, path: Path, lineno: int, col: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DatasetError(f"column {col}: {text!r} is not a number", str(path), lineno) from None
    if not math.isfinite(v):
        raise DatasetError(f"column {col}: {text!r} is not finite", str(path), lineno)
    return v


def resolve_paths(paths) -> dict[str, Path]:
    """Accept a directory or a mapping from schema file name to a path."""
    if isinstance(paths, (str, os.PathLike)):
        base = Path(paths)
        return {name: base / name for name in SCHEMAS}
    return {name: Path(paths[name]) for name in SCHEMAS}


def load_dataset(paths, scale: tuple[float, float] = (1.0, 10.0)) -> Dataset:
    files = resolve_paths(paths)
    lo, hi = float(scale[0]), float(scale[1])
    if not lo < hi:
        raise DatasetError(f"scale_min {lo} must be below scale_max {hi}")

    topics: dict[str, str | None] = {}
    p = files[SUBMISSIONS]
    for lineno, (pid, topic) in _read_rows(p):
        if not pid:
            raise DatasetError("empty paper_id", str(p), lineno)
        if pid in topics:
            raise DatasetError(f"duplicate paper_id {pid!r}", str(p), lineno)
        topics[pid] = topic or None

    scores: dict[str, list[float]] = defaultdict(list)
    p = files[REVIEWS]
    for lineno, (pid, text) in _read_rows(p):
        if pid not in topics:
            raise DatasetError(f"unknown paper_id {pid!r}", str(p), lineno)
        v = _parse_float(text, p, lineno, "score")
        if not (lo <= v <= hi):
            raise DatasetError(f"score {text} outside scale [{lo:g}, {hi:g}]", str(p), lineno)
        scores[pid].append(v)
    for pid in topics:
        if pid not in scores:
            raise DatasetError(f"paper {pid!r} has no reviews", str(p))

    author_papers: dict[str, list[str]] = defaultdict(list)
    p = files[AUTHORSHIPS]
    for lineno, (pid, aid) in _read_rows(p):
        if pid not in topics:
            raise DatasetError(f"unknown paper_id {pid!r}", str(p), lineno)
        if not aid:
            raise DatasetError("empty author_id", str(p), lineno)
        if pid in author_papers[aid]:
            raise DatasetError(f"duplicate authorship ({pid!r}, {aid!r})", str(p), lineno)
        author_papers[aid].append(pid)

    ranked: dict[str, dict[int, list[str]]] = {}
    seen_pairs: set[tuple[str, str]] = set()
    p = files[RANKINGS]
    for lineno, (aid, pid, text) in _read_rows(p):
        if aid not in author_papers:
            raise DatasetError(f"unknown author_id {aid!r}", str(p), lineno)
        if pid not in topics:
            raise DatasetError(f"unknown paper_id {pid!r}", str(p), lineno)
        if pid not in author_papers[aid]:
            raise DatasetError(f"author {aid!r} is not on paper {pid!r}", str(p), lineno)
        if (aid, pid) in seen_pairs:
            raise DatasetError(
                f"duplicate ranking entry for author {aid!r}, paper {pid!r}", str(p), lineno
            )
        seen_pairs.add((aid, pid))
        try:
            block = int(text)
        except ValueError:
            raise DatasetError(f"block_index {text!r} is not an integer", str(p), lineno) from None
        if block < 1:
            raise DatasetError(f"block_index {block} must be >= 1", str(p), lineno)
        ranked.setdefault(aid, {}).setdefault(block, []).append(pid)

    submissions = {
        pid: Submission(pid, tuple(scores[pid]), topics[pid]) for pid in topics
    }
    authors = {aid: Author(aid, tuple(ps)) for aid, ps in author_papers.items()}
    rankings = {}
    for aid, blocks in ranked.items():
        r = Ranking(aid, tuple(tuple(blocks[k]) for k in sorted(blocks)))
        if len(r.paper_ids) < 2:
            raise DatasetError(f"ranking of {aid!r} covers fewer than two papers", str(p))
        rankings[aid] = r
    return Dataset((lo, hi), submissions, authors, rankings)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_dataset(ds: Dataset, out_dir) -> list[Path]:
    """Write the four CSV files; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def dump(name, rows):
        path = out / name
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SCHEMAS[name])
            w.writerows(rows)
        written.append(path)

    dump(SUBMISSIONS, ((s.id, s.topic or "") for s in ds.submissions.values()))
    dump(REVIEWS, ((s.id, _fmt(x)) for s in ds.submissions.values() for x in s.review_scores))
    dump(AUTHORSHIPS, ((p, a.id) for a in ds.authors.values() for p in a.submission_ids))
    dump(
        RANKINGS,
        (
            (r.author_id, p, k)
            for r in ds.rankings.values()
            for k, b in enumerate(r.blocks, start=1)
            for p in b
        ),
    )
    return written
