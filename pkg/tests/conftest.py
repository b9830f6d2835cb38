import csv
from pathlib import Path

import pytest


def write_csvs(root: Path, submissions, reviews, authorships, rankings):
    root.mkdir(parents=True, exist_ok=True)
    tables = {
        "submissions.csv": (("paper_id", "topic"), submissions),
        "reviews.csv": (("paper_id", "score"), reviews),
        "authorships.csv": (("paper_id", "author_id"), authorships),
        "rankings.csv": (("author_id", "paper_id", "block_index"), rankings),
    }
    for name, (header, rows) in tables.items():
        with open(root / name, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    return root


@pytest.fixture
def tiny_dir(tmp_path):
    """Two papers, two authors, one ranking."""
    return write_csvs(
        tmp_path / "tiny",
        [("P1", "t1"), ("P2", "")],
        [("P1", "4"), ("P1", "6"), ("P2", "3"), ("P2", "5"), ("P2", "7")],
        [("P1", "a"), ("P2", "a"), ("P1", "b")],
        [("a", "P2", "1"), ("a", "P1", "2")],
    )


@pytest.fixture
def abc_dir(tmp_path):
    """Author x ranks A > B > C against raw means (2, 3, 5); topics A,C:t1, B:t2."""
    return write_csvs(
        tmp_path / "abc",
        [("A", "t1"), ("B", "t2"), ("C", "t1"), ("D", "")],
        [("A", "2"), ("B", "3"), ("C", "5"), ("D", "6"), ("D", "7")],
        [("A", "x"), ("B", "x"), ("C", "x"), ("D", "y"), ("A", "z"), ("C", "z")],
        [("x", "A", "1"), ("x", "B", "2"), ("x", "C", "3"),
         ("z", "A", "1"), ("z", "C", "2")],
    )


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_line():
    """Record one PASS/FAIL line for the terminal summary."""

    def record(criterion: int, ok: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
