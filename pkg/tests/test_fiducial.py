import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from affinecs import fiducial
from affinecs.errors import ParameterError


def test_normalization_constant_examples():
    assert fiducial.normalization_constant(0.5, 1.0) == pytest.approx(2.0, abs=1e-12)
    assert fiducial.normalization_constant(0.0, 0.5) == pytest.approx(1.0, abs=1e-12)


def test_normalization_against_quadrature_oracle():
    for alpha, beta in [(0.5, 1.0), (-0.3, 0.8), (2.0, 0.4), (0.2, 3.0)]:
        n = fiducial.normalization_constant(alpha, beta)
        val, _ = integrate.quad(
            lambda u: 2 * u * n * n * u ** (4 * alpha) * math.exp(-2 * beta * u * u),
            0, 50, epsabs=1e-13)
        assert val == pytest.approx(1.0, abs=1e-10)


def test_domain_errors():
    with pytest.raises(ParameterError):
        fiducial.normalization_constant(-0.5, 1.0)
    with pytest.raises(ParameterError):
        fiducial.normalization_constant(0.0, 0.0)
    spec = fiducial.FiducialSpec.one_parameter(1.0)
    with pytest.raises(ParameterError):
        fiducial.eval_fiducial(-1.0, spec)
    with pytest.raises(ParameterError):
        fiducial.eval_fiducial(0.0, spec)


def test_eval_fiducial_values():
    spec = fiducial.FiducialSpec(0.5, 1.0)
    assert fiducial.eval_fiducial(1.0, spec) == pytest.approx(2 * math.exp(-1), rel=1e-12)
    assert fiducial.eval_fiducial(2.0, spec) == pytest.approx(
        2 * math.sqrt(2) * math.exp(-2), rel=1e-12)
    # power-law vanishing at the origin for alpha > 0
    assert fiducial.eval_fiducial(1e-12, spec) < 1e-5


def test_one_parameter_family_first_moment():
    for beta in (0.3, 0.7, 1.0, 2.5):
        spec = fiducial.FiducialSpec.one_parameter(beta)
        assert fiducial.moment(1, spec).value == pytest.approx(1.0, abs=1e-12)


def test_inverse_moment_closed_form_and_quadrature():
    spec = fiducial.FiducialSpec.one_parameter(1.0)
    g = fiducial.moment(-1, spec)
    q = fiducial.moment(-1, spec, method="quadrature")
    assert g.value == pytest.approx(2.0, abs=1e-10)
    assert q.value == pytest.approx(2.0, abs=1e-8)


def test_divergent_moment_flagged():
    rep = fiducial.moment(-1, fiducial.FiducialSpec(-0.1, 0.4))
    assert rep.divergent
    assert rep.value is None
    # boundary is strict: alpha = 0 diverges, any alpha > 0 does not
    assert fiducial.moment(-1, fiducial.FiducialSpec(0.0, 0.5)).divergent
    assert not fiducial.moment(-1, fiducial.FiducialSpec(1e-6, 0.500001)).divergent


@given(st.floats(min_value=-0.45, max_value=3.0),
       st.floats(min_value=0.05, max_value=4.0))
@settings(max_examples=40, deadline=None)
def test_moment_gamma_vs_quadrature(alpha, beta):
    spec = fiducial.FiducialSpec(alpha, beta)
    for k in (0, 1, 2):
        g = fiducial.moment(k, spec).value
        q = fiducial.moment(k, spec, method="quadrature").value
        assert abs(g - q) <= 1e-8 * max(1.0, abs(g))


def test_uncertainty_product_examples():
    assert fiducial.uncertainty_product(fiducial.FiducialSpec(0.5, 1.0)) == pytest.approx(
        0.5, abs=1e-8)
    assert fiducial.uncertainty_product(
        fiducial.FiducialSpec.one_parameter(0.3)) == pytest.approx(0.5, abs=1e-8)


@given(st.floats(min_value=-0.45, max_value=3.0),
       st.floats(min_value=0.05, max_value=4.0))
@settings(max_examples=40, deadline=None)
def test_minimum_uncertainty_saturated(alpha, beta):
    spec = fiducial.FiducialSpec(alpha, beta)
    q1 = fiducial.moment(1, spec).value
    assert fiducial.uncertainty_product(spec) >= q1 / 2 - 1e-10
    assert fiducial.uncertainty_product(spec) == pytest.approx(q1 / 2, rel=1e-8)


def test_uncertainty_via_dilation_generator_oracle():
    """<D^2> from the analytic reduction integrates to (2 alpha + 1)/4."""
    spec = fiducial.FiducialSpec(0.7, 1.3)
    val, _ = integrate.quad(
        lambda x: abs(fiducial.apply_dilation_generator(x, spec)) ** 2, 1e-12, 60,
        epsabs=1e-13, limit=200)
    assert val == pytest.approx((2 * spec.alpha + 1) / 4, rel=1e-9)


def test_admissibility_dichotomy():
    assert fiducial.is_admissible(fiducial.FiducialSpec(0.5, 1.0))
    assert not fiducial.is_admissible(fiducial.FiducialSpec(0.0, 0.5))
    assert fiducial.is_admissible(fiducial.FiducialSpec(1e-6, 0.500001))
    for beta in (0.1, 0.49, 0.5):
        assert not fiducial.is_admissible(fiducial.FiducialSpec.one_parameter(beta))
    for beta in (0.51, 1.0, 10.0):
        assert fiducial.is_admissible(fiducial.FiducialSpec.one_parameter(beta))


def test_normalization_invariant_random_specs():
    rng = np.random.default_rng(3)
    for _ in range(25):
        spec = fiducial.FiducialSpec(float(rng.uniform(-0.45, 2.5)),
                                     float(rng.uniform(0.1, 4.0)))
        total = fiducial.moment(0, spec, method="quadrature").value
        assert abs(total - 1.0) < 1e-10
