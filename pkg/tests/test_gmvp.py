import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppp_cov.gmvp import (
    IntervalSummary,
    coverage,
    credible_intervals,
    gmvp_ensemble,
    gmvp_weights,
    realized_portfolio_sd,
    relative_cov_error,
    relative_gmvp_error,
    write_intervals,
    write_weights,
)
from ppp_cov.linalg import NotPositiveDefinite
from ppp_cov.ppp import PosteriorEnsemble, ThresholdConfig
from ppp_cov.sampling import IWParams, RngStream

from conftest import random_spd


@pytest.mark.parametrize(
    "sigma, w",
    [(np.eye(4), [0.25] * 4), (np.diag([1.0, 2.0]), [2 / 3, 1 / 3]), ([[2.0, 1.0], [1.0, 2.0]], [0.5, 0.5])],
)
def test_gmvp_examples(sigma, w):
    np.testing.assert_allclose(gmvp_weights(np.asarray(sigma)), w, rtol=1e-14)


def test_gmvp_non_pd_message():
    with pytest.raises(NotPositiveDefinite, match="post-process"):
        gmvp_weights(np.diag([1.0, -1.0]))


def _ens(draws):
    return PosteriorEnsemble(np.stack(draws), ThresholdConfig(0.0, 1, 2), IWParams(np.eye(2), 8), RngStream(0))


def test_gmvp_ensemble():
    W = gmvp_ensemble(_ens([np.eye(2), np.diag([1.0, 2.0])]))
    np.testing.assert_allclose(W, [[0.5, 0.5], [2 / 3, 1 / 3]])
    assert gmvp_ensemble(_ens([np.eye(2)])).shape == (1, 2)
    with pytest.raises(NotPositiveDefinite, match="draw 1"):
        gmvp_ensemble(_ens([np.eye(2), np.diag([1.0, -1.0])]))


def test_credible_intervals_identical_draws():
    w = np.array([0.2, 0.8])
    s = credible_intervals(np.tile(w, (5, 1)), 0.9)
    np.testing.assert_array_equal(s.lower, w)
    np.testing.assert_array_equal(s.upper, w)
    np.testing.assert_allclose(s.mean, w)


def test_credible_intervals_quantile_rule():
    grid = np.round(np.arange(101) * 0.01, 10)[:, None]
    s = credible_intervals(grid, 0.95)
    # type-7 rule: position 0.025 * 100 = 2.5 between 0.02 and 0.03
    assert s.lower[0] == pytest.approx(0.025, abs=1e-12)
    assert s.upper[0] == pytest.approx(0.975, abs=1e-12)
    assert s.mean[0] == pytest.approx(0.5, abs=1e-12)


def test_credible_intervals_errors():
    with pytest.raises(ValueError):
        credible_intervals(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        credible_intervals(np.zeros((1, 3)))
    with pytest.raises(ValueError):
        credible_intervals(np.zeros((3, 3)), 1.0)


def test_coverage_examples():
    wide = IntervalSummary(np.full(3, 0.5), np.zeros(3), np.ones(3), 0.95)
    assert coverage(wide, [0.1, 0.9, 0.0]) == 100
    s = IntervalSummary(np.zeros(4), np.array([0.0, 0.0, 0.0, 0.0]), np.array([1.0, 1.0, 1.0, 1.0]), 0.95)
    assert coverage(s, [1.0, 0.0, 2.0, -1.0]) == 50
    with pytest.raises(ValueError):
        coverage(s, [0.5, 0.5])


def test_interval_summary_requires_ordered_bounds():
    with pytest.raises(ValueError):
        IntervalSummary(np.zeros(1), np.ones(1), np.zeros(1), 0.95)


def test_relative_errors():
    assert relative_cov_error(np.eye(3), np.eye(3)) == 0
    assert relative_cov_error(np.eye(3), 2 * np.eye(3)) == pytest.approx(1)
    assert relative_cov_error(np.diag([1.0, 2.0]), np.eye(2)) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        relative_cov_error(np.zeros((2, 2)), np.eye(2))
    assert relative_gmvp_error([0.5, 0.5], [0.5, 0.5]) == 0
    assert relative_gmvp_error([1.0, 0.0], [0.0, 1.0]) == pytest.approx(np.sqrt(2))
    assert relative_gmvp_error([0.5, 0.5], [1.0, 0.0]) == pytest.approx(1.0)


def test_realized_sd():
    assert realized_portfolio_sd([0.5, 0.5], np.ones((5, 2))) == 0
    test = np.array([[1.0, 7.0], [-1.0, 3.0]])
    assert realized_portfolio_sd([1.0, 0.0], test) == pytest.approx(100 * np.sqrt(2))
    w = [0.3, 0.7]
    X = np.random.default_rng(1).standard_normal((12, 2))
    assert realized_portfolio_sd(w, 2 * X) == pytest.approx(2 * realized_portfolio_sd(w, X))
    with pytest.raises(ValueError):
        realized_portfolio_sd(w, X[:1])


@settings(max_examples=60, deadline=None)
@given(p=st.integers(1, 15), seed=st.integers(0, 2**32 - 1), c=st.floats(1e-3, 1e3))
def test_gmvp_invariances(p, seed, c):
    rng = np.random.default_rng(seed)
    S = random_spd(rng, p)
    w = gmvp_weights(S)
    assert abs(w.sum() - 1) <= 1e-10
    np.testing.assert_allclose(gmvp_weights(c * S), w, rtol=1e-9, atol=1e-12)
    perm = rng.permutation(p)
    np.testing.assert_allclose(gmvp_weights(S[np.ix_(perm, perm)]), w[perm], rtol=1e-9, atol=1e-12)
    var = w @ S @ w
    for _ in range(20):
        u = rng.standard_normal(p)
        u = u + (1 - u.sum()) / p
        assert var <= u @ S @ u * (1 + 1e-12)


@settings(max_examples=50, deadline=None)
@given(p=st.integers(1, 10), seed=st.integers(0, 2**32 - 1))
def test_coverage_permutation_invariant(p, seed):
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((30, p))
    s = credible_intervals(W, 0.8)
    truth = rng.standard_normal(p) * 0.5
    perm = rng.permutation(p)
    sp = IntervalSummary(s.mean[perm], s.lower[perm], s.upper[perm], s.level)
    assert coverage(sp, truth[perm]) == coverage(s, truth)
    assert 0 <= coverage(s, truth) <= 100


def test_csv_exports(tmp_path):
    s = IntervalSummary(np.array([0.1, 0.9]), np.array([0.0, 0.5]), np.array([0.2, 1.0]), 0.95)
    text = write_intervals(s, tmp_path / "iv.csv", ["a", "b"]).read_text().splitlines()
    assert text[0] == "asset,mean,lower,upper"
    assert text[1].split(",")[0] == "a" and float(text[1].split(",")[1]) == 0.1
    text = write_weights([0.25, 0.75], tmp_path / "w.csv").read_text().splitlines()
    assert text == ["asset,weight", "0,0.25", "1,0.75"]
