import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affinecs import kernel
from affinecs.errors import InadmissibleError, ParameterError
from affinecs.fiducial import FiducialSpec
from affinecs.kernel import PhasePoint

from oracles import closed_overlap, trapezoid_overlap

labels = st.tuples(st.floats(min_value=-5, max_value=5),
                   st.floats(min_value=-2, max_value=2)).map(
    lambda t: PhasePoint(t[0], math.exp(t[1])))


def test_phase_point_validation():
    with pytest.raises(ParameterError):
        PhasePoint(0.0, 0.0)
    with pytest.raises(ParameterError):
        PhasePoint(0.0, -1.0)
    with pytest.raises(ParameterError):
        PhasePoint(math.inf, 1.0)


def test_overlap_closed_examples():
    a, b = PhasePoint(0.0, 1.0), PhasePoint(0.0, 2.0)
    assert kernel.overlap_closed(a, b, 1.0).value == pytest.approx(8 / 9, abs=1e-12)
    assert kernel.overlap_closed(a, b, 0.5).value == pytest.approx(
        4 / (3 * math.sqrt(2)), abs=1e-12)
    v = kernel.overlap_closed(PhasePoint(1.0, 1.0), a, 1.0).value
    assert v == pytest.approx(0.48 - 0.64j, abs=1e-12)
    assert abs(v) == pytest.approx(0.8, abs=1e-12)
    for beta in (0.25, 1.0, 3.0):
        assert kernel.overlap_closed(b, b, beta).value == pytest.approx(1.0, abs=1e-12)


@given(labels, labels, st.floats(min_value=0.1, max_value=4.0))
@settings(max_examples=80, deadline=None)
def test_overlap_symmetry_and_bound(a, b, beta):
    v_ab = kernel.overlap_closed(a, b, beta).value
    v_ba = kernel.overlap_closed(b, a, beta).value
    assert v_ab == pytest.approx(v_ba.conjugate(), abs=1e-12)
    assert abs(v_ab) <= 1.0 + 1e-12


def test_overlap_analytic_structure():
    """(qs)^beta K is holomorphic in z1 = 1/q + i p/beta: Cauchy-Riemann check."""
    beta = 1.3
    b = PhasePoint(0.4, 0.9)
    eps = 1e-5

    def f(z1):
        q = 1.0 / z1.real
        p = z1.imag * beta
        v = kernel.overlap_closed(PhasePoint(p, q), b, beta).value
        return (q * b.q) ** beta * v

    z0 = complex(1.0 / 1.7, 0.6 / beta)
    d_re = (f(z0 + eps) - f(z0 - eps)) / (2 * eps)
    d_im = (f(z0 + 1j * eps) - f(z0 - 1j * eps)) / (2 * eps)
    assert d_re == pytest.approx(-1j * d_im, rel=1e-6)


def test_overlap_quadrature_matches_closed():
    cases = [((0.0, 1.0), (0.0, 2.0), 1.0), ((1.0, 1.0), (0.0, 1.0), 1.0),
             ((0.5, 1.2), (-0.7, 0.6), 0.4), ((3.0, 0.5), (-2.0, 2.0), 2.0)]
    for (pa, qa), (pb, qb), beta in cases:
        a, b = PhasePoint(pa, qa), PhasePoint(pb, qb)
        spec = FiducialSpec.one_parameter(beta)
        quad = kernel.overlap_quadrature(a, b, spec)
        closed = kernel.overlap_closed(a, b, beta).value
        assert abs(quad - closed) < 1e-8


def test_overlap_quadrature_general_family_vs_trapezoid():
    spec = FiducialSpec(0.2, 0.7)
    a, b = PhasePoint(0.5, 1.0), PhasePoint(0.0, 1.0)
    quad = kernel.overlap_quadrature(a, b, spec)
    ora = trapezoid_overlap((0.5, 1.0), (0.0, 1.0), 0.2, 0.7)
    assert abs(quad - ora) < 1e-6


def test_gram_examples():
    assert np.allclose(kernel.gram([PhasePoint(0.3, 1.1)], 0.8), [[1.0]])
    g = kernel.gram([PhasePoint(1.0, 1.0), PhasePoint(0.0, 1.0)], 1.0)
    eig = np.linalg.eigvalsh(g)
    assert eig == pytest.approx([0.2, 1.8], abs=1e-12)
    with pytest.raises(ParameterError):
        kernel.gram([], 1.0)
    with pytest.raises(ParameterError):
        kernel.gram([PhasePoint(0, 1)] * 65, 1.0)


@given(st.integers(min_value=2, max_value=12), st.integers(min_value=0, max_value=2**31),
       st.sampled_from([0.25, 0.5, 1.0, 2.0]))
@settings(max_examples=60, deadline=None)
def test_gram_positive_semidefinite(n, seed, beta):
    rng = np.random.default_rng(seed)
    pts = [PhasePoint(float(p), float(math.exp(u)))
           for p, u in zip(rng.uniform(-5, 5, n), rng.uniform(-2, 2, n))]
    eig = np.linalg.eigvalsh(kernel.gram(pts, beta))
    assert eig.min() >= -1e-10


def test_admissible_constant_values():
    # c = 1/(2 pi <Q^{-1}>): the reproducing identity holds with this and
    # only this constant (see the resolution tests below)
    assert kernel.admissible_constant(1.0) == pytest.approx(1 / (4 * math.pi), abs=1e-15)
    assert kernel.admissible_constant(2.0) == pytest.approx(3 / (8 * math.pi), abs=1e-15)
    with pytest.raises(InadmissibleError):
        kernel.admissible_constant(0.5)
    with pytest.raises(InadmissibleError):
        kernel.admissible_constant(0.3)
    # monotone vanishing toward the admissibility edge, where <Q^{-1}> blows up
    vals = [kernel.admissible_constant(b) for b in (0.51, 0.6, 1.0, 4.0)]
    assert all(x < y for x, y in zip(vals, vals[1:]))
    assert vals[0] < 1e-2


def test_resolution_converges_beta_1():
    rep = kernel.resolution_check(PhasePoint(0, 1), PhasePoint(0, 1), 1.0, tol=1e-4)
    assert rep.verdict == "converged"
    assert rep.residual < 1e-4
    assert abs(rep.lhs - 1.0) < 1e-4


def test_resolution_cross_labels_beta_2():
    rep = kernel.resolution_check(PhasePoint(0, 1), PhasePoint(1, 2), 2.0, tol=1e-4)
    assert rep.verdict == "converged"
    assert rep.residual < 1e-4


def test_resolution_diverges_weak_beta():
    rep = kernel.resolution_check(PhasePoint(0, 1), PhasePoint(0, 1), 0.4)
    assert rep.verdict == "diverging"
    assert rep.residual == math.inf
    assert rep.slope == pytest.approx(0.2, abs=0.02)
    # trace strictly growing
    vals = [abs(v) for _, v in rep.cutoff_trace]
    assert all(x < y for x, y in zip(vals, vals[1:]))


def test_matrix_element_q_examples():
    for p, q in ((0.0, 1.0), (3.0, 2.0)):
        pt = PhasePoint(p, q)
        for beta in (0.4, 1.0, 2.0):
            assert kernel.matrix_element_Q(pt, pt, beta) == pytest.approx(q, abs=1e-12)
    a, b = PhasePoint(0.0, 1.0), PhasePoint(0.0, 2.0)
    closed = kernel.matrix_element_Q(a, b, 1.0)
    quad = kernel.matrix_element_Q(a, b, 1.0, method="quadrature")
    assert abs(closed - quad) < 1e-7


def test_matrix_element_q_is_p_derivative():
    a, b = PhasePoint(0.7, 1.4), PhasePoint(-0.2, 0.8)
    beta = 1.2
    h = 1e-5
    plus = kernel.overlap_closed(PhasePoint(a.p + h, a.q), b, beta).value
    minus = kernel.overlap_closed(PhasePoint(a.p - h, a.q), b, beta).value
    assert kernel.matrix_element_Q(a, b, beta) == pytest.approx(
        1j * (plus - minus) / (2 * h), rel=1e-8)


def test_matrix_element_d_examples():
    assert kernel.matrix_element_D(PhasePoint(3, 2), PhasePoint(3, 2), 1.0) == \
        pytest.approx(6.0, abs=1e-12)
    for q in (0.5, 1.0, 2.7):
        pt = PhasePoint(0.0, q)
        assert abs(kernel.matrix_element_D(pt, pt, 0.8)) < 1e-12
    a, b = PhasePoint(0.5, 1.2), PhasePoint(-0.4, 0.9)
    closed = kernel.matrix_element_D(a, b, 1.5)
    quad = kernel.matrix_element_D(a, b, 1.5, method="quadrature")
    assert abs(closed - quad) < 1e-7


def test_closed_overlap_against_oracle_formula():
    rng = np.random.default_rng(11)
    for _ in range(50):
        a = PhasePoint(float(rng.uniform(-4, 4)), float(math.exp(rng.uniform(-2, 2))))
        b = PhasePoint(float(rng.uniform(-4, 4)), float(math.exp(rng.uniform(-2, 2))))
        beta = float(rng.uniform(0.2, 3.0))
        assert kernel.overlap_closed(a, b, beta).value == pytest.approx(
            closed_overlap((a.p, a.q), (b.p, b.q), beta), rel=1e-12)
