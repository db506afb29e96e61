import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spde_kit.spectral import (
    OperatorSpectrum,
    RegularityParams,
    SpectralError,
    SpectralVector,
    apply_fractional_power,
    apply_resolvent,
    apply_semigroup,
    hoelder_envelope,
    project,
    project_coeffs,
    semigroup_factors,
    smoothing_envelope,
    sobolev_norm,
)


@pytest.fixture
def spec2():
    return OperatorSpectrum(lambdas=np.array([1.0, 4.0]), tail=9.0)


def test_semigroup_factors_oracle(spec2):
    np.testing.assert_allclose(
        semigroup_factors(spec2, 0.5), [math.exp(-0.5), math.exp(-2.0)], rtol=1e-15
    )


def test_apply_semigroup_oracle(spec2):
    v = SpectralVector([1.0, 2.0])
    out = apply_semigroup(v, 0.5, spec2)
    np.testing.assert_allclose(
        out.coeffs, [math.exp(-0.5), 2.0 * math.exp(-2.0)], rtol=1e-15
    )


def test_apply_semigroup_t0_identity(spec2):
    v = SpectralVector([3.0, -1.5])
    assert np.array_equal(apply_semigroup(v, 0.0, spec2).coeffs, v.coeffs)


def test_apply_resolvent_oracle(spec2):
    v = SpectralVector([1.0, 1.0])
    out = apply_resolvent(v, 0.5, spec2)
    np.testing.assert_allclose(out.coeffs, [1.0 / 1.5, 1.0 / 3.0], rtol=1e-15)


def test_fractional_power_oracle(spec2):
    v = SpectralVector([1.0, 1.0])
    out = apply_fractional_power(v, 0.5, spec2)
    np.testing.assert_allclose(out.coeffs, [1.0, 2.0], rtol=1e-15)
    # negative exponents invert the positive ones
    back = apply_fractional_power(out, -0.5, spec2)
    np.testing.assert_allclose(back.coeffs, v.coeffs, rtol=1e-14)


def test_sobolev_norm_oracle(spec2):
    v = SpectralVector([3.0, 4.0])
    # lambda^{1/2}-weighted: sqrt((3*1)^2 + (4*2)^2)
    assert sobolev_norm(v, 0.5, spec2) == pytest.approx(math.sqrt(73.0), rel=1e-15)
    assert sobolev_norm(v, 0.0, spec2) == pytest.approx(5.0, rel=1e-15)


def test_project_zeroes_tail():
    v = SpectralVector([1.0, 2.0, 3.0])
    out = project(v, 1)
    assert np.array_equal(out.coeffs, [1.0, 0.0, 0.0])
    assert out.dim == 3  # ambient dimension preserved


def test_project_bad_mode_counts():
    with pytest.raises(SpectralError):
        project_coeffs(np.ones(3), 4)
    with pytest.raises(SpectralError):
        project_coeffs(np.ones(3), -1)


def test_negative_time_rejected(spec2):
    with pytest.raises(SpectralError):
        semigroup_factors(spec2, -0.1)
    with pytest.raises(SpectralError):
        apply_resolvent(SpectralVector([1.0, 1.0]), -1e-9, spec2)


def test_spectrum_validation():
    with pytest.raises(SpectralError):
        OperatorSpectrum(lambdas=np.array([1.0, 0.5]), tail=2.0)  # not ascending
    with pytest.raises(SpectralError):
        OperatorSpectrum(lambdas=np.array([0.0, 1.0]), tail=2.0)  # zero eigenvalue
    with pytest.raises(SpectralError):
        OperatorSpectrum(lambdas=np.array([1.0, 4.0]), tail=3.0)  # tail below max
    with pytest.raises(SpectralError):
        OperatorSpectrum(lambdas=np.array([]), tail=1.0)


def test_dimension_mismatch(spec2):
    with pytest.raises(SpectralError):
        apply_semigroup(SpectralVector([1.0, 2.0, 3.0]), 0.1, spec2)


def test_regularity_defaults_and_q():
    p = RegularityParams()
    assert p.gamma == 0.5 and p.beta == 0.0 and p.alpha == 0.5
    assert p.q == 0.5
    assert RegularityParams(gamma=0.4, beta=0.3).q == pytest.approx(0.2)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(gamma=0.5, beta=0.6),       # beta above gamma
        dict(delta=0.5),                 # delta at the open boundary
        dict(theta=0.0),
        dict(gamma=0.8, delta=0.25),     # gamma >= delta + 1/2
        dict(alpha=0.0),
        dict(rho_q=-1.0),
        dict(gamma=0.5, beta=0.5),       # q = 0
    ],
)
def test_regularity_invalid(kwargs):
    with pytest.raises(SpectralError):
        RegularityParams(**kwargs)


# ---------------------------------------------------------------------------
# Properties
# ---------------------------------------------------------------------------

lam_strategy = st.lists(
    st.floats(min_value=1e-3, max_value=1e4), min_size=1, max_size=12
).map(lambda xs: np.sort(np.asarray(xs)))


@given(lam=lam_strategy, t=st.floats(0.0, 10.0), s=st.floats(0.0, 10.0))
@settings(max_examples=60, deadline=None)
def test_semigroup_composition(lam, t, s):
    spec = OperatorSpectrum(lambdas=lam, tail=float(lam[-1]))
    lhs = semigroup_factors(spec, t) * semigroup_factors(spec, s)
    rhs = semigroup_factors(spec, t + s)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-300)


@given(
    coeffs=st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=10),
    data=st.data(),
)
@settings(max_examples=60, deadline=None)
def test_projection_is_idempotent_contraction(coeffs, data):
    v = SpectralVector(coeffs)
    n = data.draw(st.integers(0, v.dim))
    pv = project(v, n)
    assert np.array_equal(project(pv, n).coeffs, pv.coeffs)
    assert pv.norm() <= v.norm() + 1e-12


@given(
    theta=st.floats(0.0, 1.0),
    t=st.floats(1e-6, 100.0),
    lam=st.floats(1e-6, 1e8),
)
@settings(max_examples=120, deadline=None)
def test_envelopes_dominate_pointwise(theta, t, lam):
    assert lam**theta * math.exp(-lam * t) <= smoothing_envelope(theta, t) * (1 + 1e-12)
    assert lam ** (-theta) * (1.0 - math.exp(-lam * t)) <= hoelder_envelope(theta, t) * (1 + 1e-12)


def test_smoothing_envelope_is_sharp():
    # the supremum is attained at lambda = theta / t
    for theta in (0.1, 0.5, 0.9):
        for t in (0.01, 1.0, 7.0):
            lam = theta / t
            attained = lam**theta * math.exp(-lam * t)
            assert attained == pytest.approx(smoothing_envelope(theta, t), rel=1e-12)


def test_hoelder_envelope_tight_at_theta_edges():
    # the t^theta bound comes from 1 - e^{-x} <= min(1, x) <= x^theta; it is
    # approached as theta -> 0 (large lambda) and theta -> 1 (small lambda)
    t = 0.3
    lams = np.logspace(-9, 6, 600)
    for theta in (0.001, 0.999):
        vals = lams ** (-theta) * (1.0 - np.exp(-lams * t))
        assert vals.max() <= hoelder_envelope(theta, t) * (1 + 1e-12)
        assert vals.max() >= 0.98 * hoelder_envelope(theta, t)


def test_envelope_domain_checks():
    with pytest.raises(SpectralError):
        smoothing_envelope(1.5, 1.0)
    with pytest.raises(SpectralError):
        smoothing_envelope(0.5, 0.0)
    with pytest.raises(SpectralError):
        hoelder_envelope(-0.1, 1.0)
