import numpy as np
import pytest

from isomech.data import Author, Dataset, Ranking, Submission
from isomech.evaluation import (
    InferenceError,
    aggregate,
    build_report,
    error_metrics,
    group_by_ranking_length,
    ols_with_pvalue,
    pct_improvement,
    summarize,
    t_two_sided_pvalue,
)
from isomech.mechanism import CalibrationResult, MechanismOptions, run_mechanism
from isomech.simulation import SyntheticWorld, WorldConfig, gen_world

from p_value_refs import T_PVALUE_REFS


def _independent_ols(x, y):
    X = np.column_stack([np.ones(len(x)), x])
    (b0, b1), *_ = np.linalg.lstsq(X, np.asarray(y, float), rcond=None)
    return b1, b0


def test_error_metrics_examples():
    truth = {"a": 1.0, "b": 2.0}
    assert error_metrics(truth, truth, ["a", "b"]) == (0.0, 0.0)
    assert error_metrics({"a": 2.0, "b": 3.0}, truth, ["a", "b"]) == (1.0, 1.0)
    est = {"a": 2.0, "b": 4.0}
    d = np.array([est[k] - truth[k] for k in "ab"])
    assert error_metrics(est, truth, ["a", "b"]) == pytest.approx((np.mean(d**2), np.mean(abs(d))))
    assert error_metrics(est, truth, ["a", "b"]) == (2.5, 1.5)
    with pytest.raises(ValueError):
        error_metrics(est, truth, [])


def test_ols_textbook_example():
    slope, intercept, p = ols_with_pvalue([1, 2, 3, 4], [2, 1, 4, 3])
    assert slope == pytest.approx(0.6, abs=1e-12)
    assert intercept == pytest.approx(1.0, abs=1e-12)
    assert p == pytest.approx(0.40000000000000003404, abs=1e-10)


def test_ols_degenerate_cases():
    assert ols_with_pvalue([1, 2, 3], [1, 2, 3])[::2] == (pytest.approx(1.0), 0.0)
    s, b, p = ols_with_pvalue([1, 2, 3, 4], [7, 7, 7, 7])
    assert (s, b, p) == (0.0, 7.0, 1.0)
    with pytest.raises(InferenceError):
        ols_with_pvalue([1, 2], [1, 2])
    with pytest.raises(InferenceError):
        ols_with_pvalue([2, 2, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        ols_with_pvalue([1, 2, 3], [1, 2])


def test_ols_matches_independent_solver():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(3, 60))
        x = rng.uniform(1, 17, n)
        y = 2.0 * x + rng.normal(0, 5, n)
        slope, intercept, _ = ols_with_pvalue(x, y)
        s2, b2 = _independent_ols(x, y)
        assert abs(slope - s2) <= 1e-12 * max(1.0, abs(s2))
        assert abs(intercept - b2) <= 1e-12 * max(1.0, abs(b2))


@pytest.mark.parametrize("t, df, ref", T_PVALUE_REFS)
def test_t_pvalues_against_references(t, df, ref):
    assert abs(t_two_sided_pvalue(t, df) - ref) <= 1e-10
    assert t_two_sided_pvalue(-t, df) == t_two_sided_pvalue(t, df)


def test_pvalue_monotone_in_abs_t():
    ts = np.linspace(0, 10, 200)
    for df in (1, 4, 30):
        ps = [t_two_sided_pvalue(t, df) for t in ts]
        assert all(a >= b for a, b in zip(ps, ps[1:]))


def test_pct_improvement():
    assert pct_improvement(2.0, 1.0) == 50.0
    assert pct_improvement(1.0, 1.5) == -50.0
    assert pct_improvement(0.0, 0.0) is None


def _manual_world():
    subs = {
        "A": Submission("A", (3.0,)), "B": Submission("B", (5.0,)), "C": Submission("C", (4.0,)),
        "D": Submission("D", (6.0,)), "E": Submission("E", (2.0,)),
    }
    authors = {"x": Author("x", ("A", "B", "C")), "y": Author("y", ("D", "E"))}
    rankings = {
        "x": Ranking.strict("x", ["A", "B", "C"]),  # violates raw order
        "y": Ranking.strict("y", ["D", "E"]),       # matches raw order
    }
    ds = Dataset((1.0, 10.0), subs, authors, rankings)
    theta = {"A": 5.0, "B": 4.0, "C": 3.0, "D": 6.0, "E": 2.5}
    return SyntheticWorld(ds, theta, {}, 0)


def test_group_by_ranking_length():
    w = _manual_world()
    res = run_mechanism(w.dataset, MechanismOptions())
    recs = {r.author_id: r for r in group_by_ranking_length(w, res)}
    assert recs["x"].length == 3 and recs["y"].length == 2
    # Fixed point: the ranking already agrees with the raw scores.
    assert recs["y"].mse_modified == recs["y"].mse_raw
    # Projection of (3, 5, 4) is (4, 4, 4): errors (1, 0, 1) vs raw (4, 1, 1).
    assert recs["x"].mse_raw == pytest.approx(2.0)
    assert recs["x"].mse_modified == pytest.approx(2.0 / 3.0)


def test_null_mechanism_gives_zero_slopes():
    w = gen_world(WorldConfig(seed=5, n_authors=400))
    raw = run_mechanism(w.dataset, MechanismOptions()).raw
    per_author = {
        aid: {p: raw[p] for p in r.paper_ids} for aid, r in w.dataset.rankings.items()
    }
    null = CalibrationResult(per_author, dict(raw), frozenset(), {p: 1 for p in raw}, dict(raw))
    rep = build_report(w, null)
    assert rep.overall["mse_improvement_pct"] == 0.0
    for m in ("mse", "mae"):
        assert rep.regression[m]["slope"] == 0.0
        assert rep.regression[m]["p_value"] == 1.0


def test_regression_undefined_with_few_lengths():
    rep = build_report(_manual_world(), run_mechanism(_manual_world().dataset, MechanismOptions()))
    assert rep.regression == {"mse": None, "mae": None}
    assert set(rep.per_length) == {2, 3}
    assert rep.overall["n_papers"] == 5


def test_aggregate_pools_replications_in_order():
    opts = MechanismOptions()
    summaries = []
    for s in (1, 2):
        w = gen_world(WorldConfig(seed=s, n_authors=200))
        summaries.append(summarize(w, run_mechanism(w.dataset, opts)))
    rep = aggregate(summaries, opts)
    assert [r["replication"] for r in rep.replications] == [1, 2]
    n = summaries[0].n_papers + summaries[1].n_papers
    expected = (summaries[0].sse_raw + summaries[1].sse_raw) / n
    assert rep.overall["mse_raw"] == pytest.approx(expected, rel=1e-15)
    assert rep.diagnostics["n_replications"] == 2
    group = aggregate(summaries, opts, regression_level="group")
    assert group.regression["mse"]["n_points"] == len(group.per_length)
    with pytest.raises(ValueError):
        aggregate([])


def test_report_serializes():
    import json

    w = gen_world(WorldConfig(seed=3, n_authors=300))
    rep = build_report(w, run_mechanism(w.dataset, MechanismOptions()), MechanismOptions())
    d = json.loads(json.dumps(rep.to_dict()))
    assert list(d) == ["per_length", "overall", "regression", "coverage", "diagnostics", "replications"]
    assert d["diagnostics"]["mechanism"]["variant"] == "full"
