import numpy as np
import pytest

from isomech.isotonic import project_total_order
from isomech.truthfulness import (
    GuardError,
    UtilitySpec,
    enumerate_reports,
    expected_utility,
    noise_draws,
    truthful_report,
    verify_truthful,
)


def test_enumerate_reports():
    assert enumerate_reports(1) == [(0,)]
    r3 = enumerate_reports(3)
    assert len(r3) == 6 and r3 == sorted(set(r3))
    assert len(enumerate_reports(7)) == 5040
    with pytest.raises(GuardError):
        enumerate_reports(8)


def test_utility_parsing():
    assert UtilitySpec.parse("power:2") == UtilitySpec.power(2)
    assert str(UtilitySpec.parse("accept:4")) == "accept:4"
    for bad in ("power", "power:x", "linear:2", "power:0.5"):
        with pytest.raises(ValueError):
            UtilitySpec.parse(bad)


def test_expected_utility_zero_noise():
    u = UtilitySpec.power(2)
    # Truthful keeps (5, 3): 25 + 9. Reversed pools to (4, 4): 16 + 16.
    assert expected_utility([5, 3], (0, 1), u, 0.0, 10, 0) == 34.0
    assert expected_utility([5, 3], (1, 0), u, 0.0, 10, 0) == 32.0
    acc = UtilitySpec.accept(4)
    assert expected_utility([6, 3.9], (0, 1), acc, 0.0, 10, 0) == 1.0
    assert expected_utility([6, 3.9], (1, 0), acc, 0.0, 10, 0) == 2.0
    with pytest.raises(ValueError):
        expected_utility([5, 3], (0, 0), u, 0.0, 10, 0)


def test_expected_utility_matches_direct_average():
    theta = np.array([4.0, 6.5, 5.0])
    report = (2, 0, 1)
    z = noise_draws(3, 1.0, 500, seed=3)
    direct = np.mean([
        np.sum(np.abs(project_total_order(theta[list(report)] + row).fitted) ** 1.5) for row in z
    ])
    got = expected_utility(theta, report, UtilitySpec.power(1.5), 1.0, 500, 3)
    assert got == pytest.approx(direct, rel=1e-12)


def test_noise_draws_moments():
    for dist in ("gaussian", "laplace", "t3"):
        z = noise_draws(2, 2.0, 200000, seed=1, dist=dist)
        assert abs(z.mean()) < 0.05
        assert z.std() == pytest.approx(2.0, rel=0.05)
    with pytest.raises(ValueError):
        noise_draws(2, 1.0, 10, 0, dist="cauchy")


def test_truthful_report_ties_by_index():
    assert truthful_report([3.0, 5.0, 3.0]) == (1, 0, 2)


def test_verify_truthful_power():
    res = verify_truthful([6.0, 2.5, 4.0], UtilitySpec.power(2), 1.0, 20000, seed=4)
    assert res.truthful_optimal and res.best_report == (0, 2, 1)
    assert res.margin > 0
    assert len(res.utilities) == 6


def test_verify_truthful_threshold_counterexample():
    res = verify_truthful([6.0, 3.9], UtilitySpec.accept(4), 0.0, 20000, seed=0)
    assert not res.truthful_optimal
    assert res.best_report == (1, 0)
    assert res.margin == -1.0


def test_linear_utility_is_indifferent():
    # Projection preserves the sum, so exponent 1 cannot separate reports
    # when all scores stay positive.
    res = verify_truthful([6.0, 4.0, 8.0], UtilitySpec.power(1), 0.0, 10, seed=0)
    assert res.truthful_optimal
    assert res.margin == pytest.approx(0.0, abs=1e-12)


def test_single_paper_has_no_margin():
    res = verify_truthful([5.0], UtilitySpec.power(2), 1.0, 100, seed=0)
    assert res.truthful_optimal and res.margin is None
    assert res.to_dict({"x": 1}) == {
        "truthful_optimal": True, "best_report": [0], "margin": None, "config": {"x": 1},
    }


def test_same_seed_bit_exact():
    a = verify_truthful([5.0, 4.0, 7.0], UtilitySpec.power(3), 2.0, 5000, seed=9)
    b = verify_truthful([5.0, 4.0, 7.0], UtilitySpec.power(3), 2.0, 5000, seed=9)
    assert a.margin == b.margin and a.utilities == b.utilities


def test_knowledge_noise_perturbs_the_ranked_belief():
    theta = [5.0, 4.99]
    orders = {
        verify_truthful(theta, UtilitySpec.power(2), 0.5, 500, seed=s, knowledge_noise=3.0).truthful
        for s in range(20)
    }
    assert orders == {(0, 1), (1, 0)}
    exact = verify_truthful(theta, UtilitySpec.power(2), 0.5, 5000, seed=2)
    assert exact.truthful == (0, 1) and exact.truthful_optimal


@pytest.mark.parametrize("dist", ["laplace", "t3"])
def test_heavier_tails_still_truthful(dist):
    res = verify_truthful([7.0, 3.0, 5.5], UtilitySpec.power(2), 1.0, 20000, seed=1, dist=dist)
    assert res.truthful_optimal
