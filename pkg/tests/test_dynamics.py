import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affinecs import dynamics, kernel
from affinecs.dynamics import AffineHamiltonian, GroupElement, TimeDependentAffine
from affinecs.kernel import PhasePoint

from oracles import expm_group_coords

group_el = st.tuples(st.floats(-4, 4), st.floats(-1.5, 1.5)).map(
    lambda t: GroupElement(t[0], math.exp(t[1])))


def test_group_law_example():
    g = dynamics.group_compose(GroupElement(0, 2), GroupElement(4, 1))
    assert (g.p, g.q) == (2.0, 2.0)


def test_matrix_representation_is_faithful():
    rng = np.random.default_rng(5)
    for _ in range(50):
        g1 = GroupElement(float(rng.uniform(-3, 3)), float(math.exp(rng.uniform(-1, 1))))
        g2 = GroupElement(float(rng.uniform(-3, 3)), float(math.exp(rng.uniform(-1, 1))))
        prod = dynamics.group_compose(g1, g2)
        assert np.allclose(g1.as_matrix() @ g2.as_matrix(), prod.as_matrix(),
                           atol=1e-12)


@given(group_el, group_el, group_el)
@settings(max_examples=80, deadline=None)
def test_group_axioms(g1, g2, g3):
    left = dynamics.group_compose(dynamics.group_compose(g1, g2), g3)
    right = dynamics.group_compose(g1, dynamics.group_compose(g2, g3))
    assert left.p == pytest.approx(right.p, abs=1e-11)
    assert left.q == pytest.approx(right.q, rel=1e-12)
    e = dynamics.group_identity()
    ge = dynamics.group_compose(g1, e)
    assert (ge.p, ge.q) == pytest.approx((g1.p, g1.q), abs=1e-14)
    inv = dynamics.group_compose(g1, dynamics.group_inverse(g1))
    assert inv.p == pytest.approx(0.0, abs=1e-11)
    assert inv.q == pytest.approx(1.0, rel=1e-12)


def test_exp_affine_identity_and_oracle():
    g0 = dynamics.exp_affine(AffineHamiltonian(0.0, 0.0), 1.0)
    assert (g0.p, g0.q) == (0.0, 1.0)
    rng = np.random.default_rng(17)
    for _ in range(50):
        r, s, t = rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.1, 3)
        g = dynamics.exp_affine(AffineHamiltonian(float(r), float(s)), float(t))
        p_o, q_o = expm_group_coords(float(r), float(s), float(t))
        assert g.p == pytest.approx(p_o, abs=1e-10)
        assert g.q == pytest.approx(q_o, rel=1e-12)


def test_exp_affine_one_parameter_subgroup():
    h = AffineHamiltonian(0.8, -0.6)
    g1 = dynamics.exp_affine(h, 0.7)
    g2 = dynamics.exp_affine(h, 1.1)
    g12 = dynamics.exp_affine(h, 1.8)
    comp = dynamics.group_compose(g1, g2)
    assert comp.p == pytest.approx(g12.p, abs=1e-12)
    assert comp.q == pytest.approx(g12.q, rel=1e-12)


def test_flow_labels_examples():
    fl = dynamics.flow_labels(PhasePoint(1.0, 2.0), AffineHamiltonian(0.0, math.log(2)), 1.0)
    assert (fl.p, fl.q) == pytest.approx((2.0, 1.0), abs=1e-12)
    fl = dynamics.flow_labels(PhasePoint(0.0, 1.0), AffineHamiltonian(1.0, 1.0), 1.0)
    assert fl.p == pytest.approx(math.e - 1, rel=1e-12)
    assert fl.q == pytest.approx(1 / math.e, rel=1e-12)
    fl = dynamics.flow_labels(PhasePoint(0.3, 0.9), AffineHamiltonian(1.0, 0.0), 2.0)
    assert (fl.p, fl.q) == pytest.approx((2.3, 0.9), abs=1e-14)


def test_flow_labels_small_s_branch_continuous():
    b = PhasePoint(0.4, 1.3)
    for r in (0.7, -1.1):
        mid = dynamics.flow_labels(b, AffineHamiltonian(r, 0.0), 1.0)
        for s in (1e-7, -1e-7, 9e-7):
            near = dynamics.flow_labels(b, AffineHamiltonian(r, s), 1.0)
            scale = abs(s) * (1 + abs(b.p) + abs(r) + b.q)
            assert abs(near.p - mid.p) < 5 * scale  # linear approach, no jump
            assert abs(near.q - mid.q) < 5 * scale
    # the Taylor/exact branch join is continuous to 1e-10
    for r in (1.0, -0.6):
        lo = dynamics.flow_labels(b, AffineHamiltonian(r, 0.9999e-6), 1.0)
        hi = dynamics.flow_labels(b, AffineHamiltonian(r, 1.0001e-6), 1.0)
        assert abs(lo.p - hi.p) < 1e-10
        assert abs(lo.q - hi.q) < 1e-10


def test_flow_consistent_with_group_exponential():
    rng = np.random.default_rng(23)
    for _ in range(50):
        h = AffineHamiltonian(float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2)))
        t = float(rng.uniform(0.1, 2.5))
        b = PhasePoint(float(rng.uniform(-2, 2)), float(math.exp(rng.uniform(-1, 1))))
        g = dynamics.exp_affine(h, t)
        flowed = dynamics.flow_labels(b, h, t)
        # bra-label action: p -> q_g (p - p_g), q -> q / q_g
        assert flowed.p == pytest.approx(g.q * (b.p - g.p), rel=1e-10, abs=1e-10)
        assert flowed.q == pytest.approx(b.q / g.q, rel=1e-12)


def test_propagator_affine_trivial_and_bound():
    a, b = PhasePoint(0.3, 1.1), PhasePoint(-0.5, 0.7)
    h0 = AffineHamiltonian(0.0, 0.0)
    assert dynamics.propagator_affine(a, b, h0, 1.0, 0.9) == pytest.approx(
        kernel.overlap_closed(a, b, 0.9).value, abs=1e-14)
    for r, s in ((1.0, 0.5), (-0.7, 1.2)):
        v = dynamics.propagator_affine(a, a, AffineHamiltonian(r, s), 0.8, 1.1)
        assert abs(v) <= 1.0 + 1e-12


def test_propagator_affine_example_weak_beta():
    a = PhasePoint(0.0, 1.0)
    v = dynamics.propagator_affine(a, a, AffineHamiltonian(0.0, math.log(2)), 1.0, 0.4)
    expect = kernel.overlap_closed(PhasePoint(0.0, 2.0), a, 0.4).value
    assert v == pytest.approx(expect, abs=1e-14)
    quad = dynamics.propagator_affine_quadrature(a, a, AffineHamiltonian(0.0, math.log(2)),
                                                 1.0, 0.4)
    assert abs(v - quad) < 1e-7


def test_propagator_dual_route_across_beta():
    rng = np.random.default_rng(31)
    for beta in (0.3, 0.4, 1.0, 2.0):
        for _ in range(5):
            h = AffineHamiltonian(float(rng.uniform(-1.5, 1.5)),
                                  float(rng.uniform(-1.2, 1.2)))
            t = float(rng.uniform(0.2, 2.0))
            a = PhasePoint(float(rng.uniform(-2, 2)), float(math.exp(rng.uniform(-1, 1))))
            b = PhasePoint(float(rng.uniform(-2, 2)), float(math.exp(rng.uniform(-1, 1))))
            closed = dynamics.propagator_affine(a, b, h, t, beta)
            quad = dynamics.propagator_affine_quadrature(a, b, h, t, beta)
            assert abs(closed - quad) < 1e-7


def test_time_ordered_flow_constants():
    f = TimeDependentAffine(r=lambda t: 0.8, s=lambda t: -0.5)
    heff = dynamics.time_ordered_flow(f, 1.3, n_steps=2000)
    assert heff.R == pytest.approx(0.8, abs=1e-7)
    assert heff.S == pytest.approx(-0.5, abs=1e-9)


def test_time_ordered_flow_sine_example():
    f = TimeDependentAffine(r=lambda t: 0.0, s=lambda t: math.sin(math.pi * t))
    heff = dynamics.time_ordered_flow(f, 1.0, n_steps=10000)
    assert heff.S == pytest.approx(2 / math.pi, abs=1e-6)
    assert heff.R == pytest.approx(0.0, abs=1e-9)
    assert heff.S == pytest.approx(f.s_bar(1.0), abs=1e-6)
    g_eff = dynamics.exp_affine(heff, 1.0)
    g_ord = dynamics.ordered_product(f, 1.0, 10000)
    assert abs(g_eff.p - g_ord.p) < 1e-6
    assert abs(g_eff.q - g_ord.q) < 1e-6


def test_time_ordered_endpoint_averages():
    f = TimeDependentAffine(r=lambda t: 0.3 * t, s=lambda t: 0.0)
    assert f.r_bar(2.0) == pytest.approx(0.3, abs=1e-10)
    assert f.s_bar(2.0) == pytest.approx(0.0, abs=1e-12)


def test_lower_symbol_examples():
    for beta in (0.4, 1.0, 2.0):
        assert dynamics.lower_symbol("Q", PhasePoint(3, 2), beta) == pytest.approx(2.0)
        assert dynamics.lower_symbol("D", PhasePoint(3, 2), beta) == pytest.approx(6.0)
    assert dynamics.lower_symbol("Q2", PhasePoint(0, 1.5), 1.0) == pytest.approx(
        1.5 * 1.5**2, rel=1e-12)


def test_lower_symbol_quadrature_oracle():
    """Diagonal x-representation integrals agree with the covariance algebra."""
    from scipy import integrate
    from affinecs.fiducial import FiducialSpec, eval_fiducial
    beta = 1.3
    spec = FiducialSpec.one_parameter(beta)
    p0, q0 = 0.7, 1.8

    def psi2(x):
        return eval_fiducial(x / q0, spec) ** 2 / q0

    q2_val, _ = integrate.quad(lambda x: x * x * psi2(x), 0, 80, epsabs=1e-12)
    assert dynamics.lower_symbol("Q2", PhasePoint(p0, q0), beta) == pytest.approx(
        q2_val, rel=1e-9)


def test_weak_symbol_fit_recovers_scale_constant():
    for beta in (2.0, 1.5):
        gamma = dynamics.upper_symbol_scale(beta)
        rep_q = dynamics.weak_symbol_check(AffineHamiltonian(1.0, 0.0), beta)
        assert rep_q.residual < 1e-3
        assert rep_q.constants[0] == pytest.approx(gamma, abs=2e-3)
        rep_d = dynamics.weak_symbol_check(AffineHamiltonian(0.0, 1.0), beta)
        assert rep_d.residual < 1e-3
        assert rep_d.constants[0] == pytest.approx(gamma, abs=2e-3)


def test_weak_symbol_zero_hamiltonian():
    rep = dynamics.weak_symbol_check(AffineHamiltonian(0.0, 0.0), 2.0)
    assert rep.residual < 1e-10
    assert abs(rep.constants[0]) < 1e-6


def test_sliced_short_time_order():
    a, b = PhasePoint(0.4, 1.2), PhasePoint(-0.3, 0.8)
    h = AffineHamiltonian(0.9, -0.6)
    beta = 1.1
    gaps = []
    for eps in (1e-2, 5e-3, 2.5e-3):
        sliced = dynamics.sliced_short_time(a, b, h, eps, beta)
        full = dynamics.propagator_affine(a, b, h, eps, beta)
        gaps.append(abs(full - sliced) / eps**2)
    assert max(gaps) / min(gaps) < 1.3  # gap/eps^2 bounded => O(eps^2)
    assert dynamics.sliced_short_time(a, b, h, 0.0, beta) == pytest.approx(
        kernel.overlap_closed(a, b, beta).value, abs=1e-14)


def test_sliced_short_time_diagonal_expansion():
    pt = PhasePoint(0.2, 1.7)
    h = AffineHamiltonian(0.5, 0.0)
    eps = 1e-3
    v = dynamics.sliced_short_time(pt, pt, h, eps, 1.0)
    expect = 1.0 - 1j * eps * 0.5 * dynamics.lower_symbol("Q", pt, 1.0)
    assert v == pytest.approx(expect, abs=1e-7)
