import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wavshrink.seqmodel import (
    BesovBody,
    BoundaryStyle,
    candidate_risks,
    besov_norm,
    fit_loglog_slope,
    identity_estimator,
    least_favorable_level,
    mc_sup_risk,
    observe,
    rate_experiment,
    regression_to_sequence,
    sample_boundary_theta,
    zero_estimator,
)
from wavshrink.shrink import universal_estimate
from wavshrink.wavelet import CoeffPyramid


def brute_norm(flat, alpha, p, q, coarse=0):
    """Besov sequence norm by explicit per-coefficient loops."""
    n = len(flat)
    a = alpha + 0.5 - (0 if math.isinf(p) else 1 / p)
    blocks = {coarse: [list(flat[: 2**coarse])]}
    start = 2**coarse
    j = coarse
    while start < n:
        blocks.setdefault(j, []).append(list(flat[start : start + 2**j]))
        start += 2**j
        j += 1
    terms = []
    for lev, bs in blocks.items():
        for b in bs:
            if math.isinf(p):
                lp = max(abs(v) for v in b)
            else:
                lp = sum(abs(v) ** p for v in b) ** (1 / p)
            terms.append(2 ** (a * lev) * lp)
    if math.isinf(q):
        return max(terms)
    return sum(t**q for t in terms) ** (1 / q)


def test_body_validation():
    for bad in [dict(alpha=0, p=2, q=2), dict(alpha=1, p=0, q=2), dict(alpha=1, p=2, q=-1), dict(alpha=1, p=2, q=2, C=0)]:
        with pytest.raises(ValueError):
            BesovBody(**bad)


def test_body_indices():
    b = BesovBody(1, 2, 2)
    assert b.a == 1.0
    assert b.rate_exponent == pytest.approx(2 / 3)
    assert BesovBody(0.5, math.inf, 1).a == 1.0
    assert BesovBody(1, 1, 1).a == 0.5


def test_besov_norm_examples():
    # only the level-1 detail block is nonzero: 2^{1*1} * ||(3,4)||_2 = 10
    flat = np.zeros(8)
    flat[2:4] = [3.0, 4.0]
    assert besov_norm(CoeffPyramid.unflatten(flat), BesovBody(1, 2, 2)) == pytest.approx(10.0)
    # inf/inf picks the single largest weighted entry
    assert besov_norm(CoeffPyramid.unflatten(flat), BesovBody(1, math.inf, math.inf)) == pytest.approx(2 ** 1.5 * 4)
    assert besov_norm(CoeffPyramid.zeros(4), BesovBody(1, 2, 2)) == 0.0


@pytest.mark.parametrize("alpha,p,q", [(1, 2, 2), (1, 1, 1), (0.5, 1, 2), (2, math.inf, 2), (1, 2, math.inf), (1.5, 3, 1)])
@pytest.mark.parametrize("coarse", [0, 2])
def test_besov_norm_matches_brute_force(alpha, p, q, coarse):
    flat = np.random.default_rng(int(10 * alpha + coarse)).standard_normal(32)
    got = besov_norm(CoeffPyramid.unflatten(flat, coarse), BesovBody(alpha, p, q))
    assert got == pytest.approx(brute_norm(flat, alpha, p, q, coarse), rel=1e-12)


def test_besov_norm_batched():
    flat = np.random.default_rng(0).standard_normal((5, 16))
    body = BesovBody(1, 1, 2)
    got = besov_norm(CoeffPyramid.unflatten(flat), body)
    np.testing.assert_allclose(got, [brute_norm(f, 1, 1, 2) for f in flat], rtol=1e-12)


@settings(max_examples=100)
@given(x=arrays(np.float64, 16, elements=st.floats(-1e3, 1e3)), t=st.floats(-50, 50))
def test_besov_norm_homogeneous(x, t):
    body = BesovBody(1, 2, 2)
    lhs = besov_norm(CoeffPyramid.unflatten(t * x), body)
    rhs = abs(t) * besov_norm(CoeffPyramid.unflatten(x), body)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("body", [BesovBody(1, 2, 2, 1.0), BesovBody(1, 1, 1, 3.0), BesovBody(0.5, math.inf, 2, 0.7)])
@pytest.mark.parametrize("style", list(BoundaryStyle))
def test_boundary_samples_lie_on_boundary(body, style):
    for level in range(0, 8):
        theta = sample_boundary_theta(body, 8, 3, style, level=level)
        assert besov_norm(theta, body) == pytest.approx(body.C, rel=1e-9)
        assert body.contains(theta)
        nz = [j for j in theta.levels if np.any(theta.detail(j) != 0)]
        assert nz == [level]


def test_boundary_sample_single_spike_magnitude():
    body = BesovBody(1, 2, 2, 2.0)
    theta = sample_boundary_theta(body, 6, 0, "single-spike", level=4)
    d = theta.detail(4)
    assert np.count_nonzero(d) == 1
    assert d.max() == pytest.approx(2.0 * 2.0**-4)


def test_boundary_sample_uses_least_favorable_level():
    body = BesovBody(1, 2, 2)
    # r = 2/3, eps = 2^-6 -> round(2/3 * 12) = 8
    assert least_favorable_level(body, 2.0**-6, range(0, 12)) == 8
    assert least_favorable_level(body, 2.0**-6, range(0, 5)) == 4
    theta = sample_boundary_theta(body, 12, 0, epsilon=2.0**-6)
    assert np.any(theta.detail(8) != 0)
    with pytest.raises(ValueError):
        sample_boundary_theta(body, 4, 0)
    with pytest.raises(ValueError):
        sample_boundary_theta(body, 4, 0, level=4)


def test_observe_is_deterministic_and_has_right_variance():
    theta = CoeffPyramid.zeros(14)
    a = observe(theta, 0.3, 42)
    b = observe(theta, 0.3, 42)
    np.testing.assert_array_equal(a.y.flatten(), b.y.flatten())
    sd = a.y.flatten().std()
    assert abs(sd / 0.3 - 1) < 0.02
    with pytest.raises(ValueError):
        observe(theta, -1.0, 0)


def test_mc_risk_of_trivial_estimators():
    body = BesovBody(1, 2, 2, 1.5)
    eps, max_level = 0.1, 6
    ident = mc_sup_risk(body, eps, identity_estimator, 4000, seed=1, max_level=max_level)
    # E||y - θ||² = ε² N with N = 2^6, Monte-Carlo sd ≈ ε² sqrt(2N / n_rep)
    assert ident == pytest.approx(eps**2 * 64, abs=4 * eps**2 * math.sqrt(2 * 64 / 4000))
    zero = mc_sup_risk(body, eps, zero_estimator, 100, seed=1, max_level=max_level)
    assert zero == pytest.approx(body.C**2, rel=1e-12)


def test_candidate_risks_cover_styles_and_levels():
    body = BesovBody(1, 2, 2)
    c = candidate_risks(body, 0.1, universal_estimate, 100, seed=0, max_level=5)
    assert len(c) == 3 * 5
    assert {(x.style, x.level) for x in c} == {(s.value, j) for s in BoundaryStyle for j in range(5)}
    with pytest.raises(ValueError):
        candidate_risks(body, 0.1, universal_estimate, 99, seed=0, max_level=5)


def test_candidate_risks_independent_of_workers():
    body = BesovBody(1, 1, 1)
    one = candidate_risks(body, 0.05, universal_estimate, 200, seed=9, max_level=7)
    four = candidate_risks(body, 0.05, universal_estimate, 200, seed=9, max_level=7, n_workers=4)
    assert one == four


def test_fit_loglog_slope_exact_power():
    x = np.array([0.1, 0.05, 0.02, 0.01])
    slope, (lo, hi) = fit_loglog_slope(x, 3 * x**1.7)
    assert slope == pytest.approx(1.7, abs=1e-12)
    assert lo <= slope <= hi
    with pytest.raises(ValueError):
        fit_loglog_slope([1, 2], [1, 2])


def test_rate_experiment_identity_small():
    body = BesovBody(1, 2, 2)
    res = rate_experiment(body, [0.1, 0.05, 0.025], identity_estimator, n_rep=200, seed=0, max_level=5)
    assert res.slope == pytest.approx(2.0, abs=0.05)
    lines = res.to_csv().strip().splitlines()
    assert lines[0] == "alpha,p,q,C,epsilon,style,level,risk,n_rep,seed"
    assert len(lines) == 1 + 3 * 3 * 5


def test_regression_to_sequence_noise_level():
    n = 512
    rng = np.random.default_rng(4)
    y = rng.standard_normal((400, n))
    obs = regression_to_sequence(y, "daub4", sigma=1.0)
    assert obs.epsilon == pytest.approx(1 / math.sqrt(n))
    sd = obs.y.flatten().std()
    assert abs(sd * math.sqrt(n) - 1) < 0.05


def test_regression_to_sequence_constant_and_clean():
    obs = regression_to_sequence(np.full(64, 2.0), "haar", sigma=0.5, clean=np.full(64, 2.0))
    # a constant maps entirely onto the scaling coefficient: 2 * sqrt(64) / sqrt(64)
    assert obs.y.scaling[0] == pytest.approx(2.0)
    assert max(np.abs(d).max() for d in obs.y.details) < 1e-12
    np.testing.assert_allclose(obs.theta.flatten(), obs.y.flatten())
    with pytest.raises(ValueError):
        regression_to_sequence(np.ones(8), sigma=0.0)


def test_risk_increases_with_radius_and_noise():
    def r(C, eps):
        return mc_sup_risk(BesovBody(1, 2, 2, C), eps, universal_estimate, 400, seed=2, max_level=8)

    assert r(0.5, 0.05) < r(2.0, 0.05)
    assert r(1.0, 0.02) < r(1.0, 0.1)
