import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from trugnet import truncnorm as tn

from oracles import ks_critical, log_mass_quad, mills_ratio_mp, truncnorm_moments_quad

INF = np.inf
PHI0 = 1 / math.sqrt(2 * math.pi)


# ---------------------------------------------------------------- stable_ratio

def test_stable_ratio_at_zero():
    assert tn.stable_ratio(0.0) == pytest.approx(0.7978845608, rel=1e-10)


def test_stable_ratio_branch_point_is_algebraic_form():
    # (sqrt(1448) + 38) / 2 just below the switch
    z = np.nextafter(-38.0, -INF)
    assert tn.stable_ratio(z) == pytest.approx((math.sqrt(z * z + 4) - z) / 2, rel=1e-15)
    assert tn.stable_ratio(z) == pytest.approx(38.0262976, rel=1e-9)


def test_stable_ratio_deep_tail_matches_extended_precision():
    assert tn.stable_ratio(-100.0) == pytest.approx(mills_ratio_mp(-100.0), rel=4.8e-7)
    assert tn.stable_ratio(-100.0) == pytest.approx(100.00999, rel=1e-7)


@pytest.mark.parametrize("z", [-300.0, -120.0, -60.0, -38.5, -38.0, -20.0, -3.0, 0.0, 4.0, 30.0])
def test_stable_ratio_relative_error(z):
    assert tn.stable_ratio(z) == pytest.approx(mills_ratio_mp(z), rel=4.8e-7)


def test_stable_ratio_rejects_non_finite():
    with pytest.raises(ValueError):
        tn.stable_ratio(np.nan)
    with pytest.raises(ValueError):
        tn.stable_ratio([-1.0, INF])


# ---------------------------------------------------------------- log_partial_mass

def test_log_partial_mass_examples():
    assert tn.log_partial_mass(0, 1, -INF, INF) == 0.0
    assert tn.log_partial_mass(0, 1, -1, 1) == pytest.approx(math.log(0.6826894921), abs=1e-9)
    far = tn.log_partial_mass(0, 1, 40, 41)
    assert np.isfinite(far) and far == pytest.approx(log_mass_quad(0, 1, 40, 41), abs=1e-9)
    assert far == pytest.approx(-804.6, abs=0.05)


def test_log_partial_mass_is_reflection_symmetric():
    assert tn.log_partial_mass(0, 1, -41, -40) == pytest.approx(tn.log_partial_mass(0, 1, 40, 41), rel=1e-14)


# ---------------------------------------------------------------- moments

def test_trunc_mean_examples():
    assert tn.trunc_mean(0, 1, -1, 1) == pytest.approx(0.0, abs=1e-15)
    assert tn.trunc_mean(0, 1, 0, INF) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-12)
    assert abs(tn.trunc_mean(10, 0.2, 0, INF) - 10) < 1e-6


def test_trunc_var_examples():
    assert tn.trunc_var(0, 1, -INF, INF) == pytest.approx(1.0, rel=1e-14)
    assert tn.trunc_var(0, 1, 0, INF) == pytest.approx(1 - 2 / math.pi, rel=1e-12)
    v = tn.trunc_var(-50, 1, 0, 1)
    assert np.isfinite(v) and 0 < v < 1 / 12 + 1e-12
    _, ref = truncnorm_moments_quad(-50, 1, 0, 1)
    assert v == pytest.approx(ref, abs=1e-8)


@pytest.mark.parametrize("z,s2,lo,hi", [
    (0.3, 0.5, -1.0, 2.0), (-5.0, 1.0, 0.0, 1.0), (45.0, 2.0, -INF, 0.0), (-30.0, 0.1, 1.0, INF),
    (2.0, 0.2, 1.99, 2.01), (-200.0, 1.0, 0.0, 1e-3), (0.0, 1.0, 55.0, 60.0), (7.0, 3.0, -INF, INF),
])
def test_moments_match_quadrature(z, s2, lo, hi):
    mean, var = tn.trunc_moments(z, s2, lo, hi)
    ref_mean, ref_var = truncnorm_moments_quad(z, s2, lo, hi)
    assert mean == pytest.approx(ref_mean, abs=1e-8)
    assert var == pytest.approx(ref_var, abs=1e-8)


def test_unit_moments_agrees_with_trunc_moments(rng):
    z = rng.normal(0, 20, 500)
    for lo, hi in [(0.0, 1.0), (-1.0, 1.0), (0.0, INF), (-INF, 0.5), (-INF, INF)]:
        a = tn.unit_moments(z, 0.3, lo, hi)
        b = tn.trunc_moments(z, 0.3, lo, hi)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])


def test_moments_broadcast_and_keep_shape():
    z = np.linspace(-3, 3, 12).reshape(3, 4)
    mean, var = tn.trunc_moments(z, 0.5, np.array([0, -1, 0, -INF]), np.array([1, 1, INF, 0]))
    assert mean.shape == var.shape == (3, 4)


def test_no_nan_for_tail_arguments_up_to_300():
    z = np.linspace(-300, 300, 601)
    for lo, hi in [(0, 1), (-1, 1), (0, INF), (-INF, 0), (-2, -1), (5, 5.001)]:
        outs = [tn.trunc_mean(z, 1, lo, hi), tn.trunc_var(z, 1, lo, hi), tn.log_partial_mass(z, 1, lo, hi),
                tn.trunc_log_density_at(z, 1, lo, hi, lo if np.isfinite(lo) else hi)]
        for out in outs:
            assert np.all(np.isfinite(out))


# ---------------------------------------------------------------- densities

def test_density_examples():
    assert tn.trunc_density_at(0, 1, -1, 1, 2) == 0.0
    assert tn.trunc_density_at(0, 1, -1, 1, 0) == pytest.approx(PHI0 / 0.6826894921, rel=1e-9)
    assert tn.trunc_density_at(0, 1, -1, 1, 0) == pytest.approx(0.5843686, rel=1e-6)
    assert tn.trunc_density_at(0, 1, 0, 1, 0) == pytest.approx(PHI0 / (stats.norm.cdf(1) - 0.5), rel=1e-12)
    assert tn.trunc_density_at(0, 1, 0, 1, 0) == pytest.approx(1.168737, rel=1e-6)


def test_density_matches_scipy_truncnorm():
    z, s = 0.4, 0.7
    for lo, hi in [(-1, 2), (0, INF), (1.5, 3)]:
        pts = np.linspace(lo, hi if np.isfinite(hi) else 4, 7)
        ref = stats.truncnorm.pdf(pts, (lo - z) / s, (hi - z) / s, loc=z, scale=s)
        np.testing.assert_allclose(tn.trunc_density_at(z, s * s, lo, hi, pts), ref, rtol=1e-10)


def test_density_rejects_infinite_point():
    with pytest.raises(ValueError):
        tn.trunc_density_at(0, 1, 0, INF, INF)


# ---------------------------------------------------------------- domain types

def test_domain_types_validate():
    with pytest.raises(ValueError):
        tn.TruncationInterval(1.0, 1.0)
    with pytest.raises(ValueError):
        tn.TruncationInterval(np.nan, 1.0)
    assert tn.TruncationInterval().is_untruncated
    with pytest.raises(ValueError):
        tn.GaussianBase(0.0, 0.0)
    with pytest.raises(ValueError):
        tn.GaussianBase(INF, 1.0)
    z, s2 = tn.GaussianBase(0.5, 2.0)
    lo, hi = tn.TruncationInterval(0, 1)
    assert 0 < tn.trunc_mean(z, s2, lo, hi) < 1


# ---------------------------------------------------------------- sampler

def test_sample_untruncated_mean():
    x = tn.sample(0.0, 1.0, -INF, INF, np.random.default_rng(0), size=10 ** 6)
    assert abs(x.mean()) < 0.005


def test_sample_half_normal_mean():
    x = tn.sample(0.0, 1.0, 0.0, INF, np.random.default_rng(1), size=10 ** 6)
    assert abs(x.mean() - 0.79788) < 0.004


def test_sample_far_tail_two_sided():
    x = tn.sample(-40.0, 1.0, 0.0, 1.0, np.random.default_rng(2), size=20000)
    assert np.all((x >= 0) & (x <= 1))
    mean, var = tn.trunc_moments(-40.0, 1.0, 0.0, 1.0)
    assert abs(x.mean() - mean) < 5 * math.sqrt(var / x.size)


@pytest.mark.parametrize("z,s2,lo,hi", [
    (0.0, 1.0, 2.0, INF), (0.0, 1.0, -INF, -6.0), (1.0, 0.5, -0.5, 0.5), (-20.0, 1.0, 0.0, 1.0),
    (30.0, 4.0, -INF, 0.0), (0.0, 1.0, 3.0, 3.2),
])
def test_sample_ks(z, s2, lo, hi):
    x = tn.sample(z, s2, lo, hi, np.random.default_rng(7), size=20000)
    s = math.sqrt(s2)
    dist = stats.truncnorm((lo - z) / s, (hi - z) / s, loc=z, scale=s)
    assert stats.kstest(x, dist.cdf).statistic < ks_critical(x.size)


def test_sample_is_deterministic_per_seed():
    a = tn.sample(np.zeros(50), 1.0, 0.0, 1.0, np.random.default_rng(3))
    b = tn.sample(np.zeros(50), 1.0, 0.0, 1.0, np.random.default_rng(3))
    np.testing.assert_array_equal(a, b)


def test_sampler_budget_raises(monkeypatch):
    monkeypatch.setattr(tn, "MAX_PROPOSALS", 0)
    with pytest.raises(tn.SamplerError):
        tn.sample(0.0, 1.0, 0.0, 1.0, np.random.default_rng(0), size=3)


# ---------------------------------------------------------------- properties

finite = st.floats(-60, 60, allow_nan=False)
variances = st.floats(1e-3, 10.0)


@st.composite
def intervals(draw):
    start = draw(st.floats(-50, 50))
    width = draw(st.one_of(st.just(INF), st.floats(1e-3, 30)))
    if draw(st.booleans()):
        return -INF, (start if np.isfinite(width) else INF)
    return start, start + width


@given(finite, variances, intervals())
def test_mean_inside_interval_and_variance_positive(z, s2, iv):
    lo, hi = iv
    mean, var = tn.trunc_moments(z, s2, lo, hi)
    assert lo <= mean <= hi
    assert 0 < var <= s2 * (1 + 1e-12)
    if np.isfinite(hi - lo):
        assert var <= ((hi - lo) / 2) ** 2 * (1 + 1e-12)


@given(variances, intervals(), st.floats(-40, 40), st.floats(1e-2, 5))
def test_mean_increasing_in_z(s2, iv, z, dz):
    lo, hi = iv
    m1, m2 = tn.trunc_mean(np.array([z, z + dz]), s2, lo, hi)
    assert m2 >= m1


@given(st.floats(-300, 300), intervals())
def test_density_at_endpoints_finite(z, iv):
    lo, hi = iv
    for p in (lo, hi):
        if np.isfinite(p):
            assert np.isfinite(tn.trunc_log_density_at(z, 1.0, lo, hi, p))


@given(st.floats(-100, 100), variances, intervals(), st.integers(0, 2 ** 31))
def test_samples_inside_interval(z, s2, iv, seed):
    lo, hi = iv
    x = tn.sample(z, s2, lo, hi, np.random.default_rng(seed), size=64)
    assert np.all((x >= lo) & (x <= hi))
