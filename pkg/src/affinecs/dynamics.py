"""Closed-form dynamics for Hamiltonians R*Q + S*D, and symbol machinery.

The label group (p, q) composes as (p1 + p2/q1, q1*q2) with identity (0, 1)
and inverse (-p*q, 1/q).  The 2x2 faithful representation

    rho(p, q) = [[q, 0], [p*q, 1]]

is the internal engine for products and exponentials: it is exact,
branch-free, and independent of the infinite-dimensional representation.
The generator of e^{-i(RQ+SD)T} maps to X = [[S, 0], [-R, 0]], whose
exponential is closed-form because X^2 = S*X.

Evolving a bra label under e^{-i(RQ+SD)T} is the affine flow

    (p, q) -> (p e^{ST} + (R/S)(e^{ST} - 1), q e^{-ST}),

so propagators of these Hamiltonians are plain kernel overlaps at flowed
labels, for every beta > 0 -- with or without a resolution of unity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import NumericError, ParameterError
from .fiducial import FiducialSpec, moment
from .kernel import (PhasePoint, matrix_element_D, matrix_element_Q,
                     overlap_array, overlap_closed, xrep_matrix_element)

__all__ = [
    "AffineHamiltonian",
    "TimeDependentAffine",
    "GroupElement",
    "group_identity",
    "group_compose",
    "group_inverse",
    "exp_affine",
    "flow_labels",
    "propagator_affine",
    "propagator_affine_quadrature",
    "time_ordered_flow",
    "lower_symbol",
    "WeakSymbolReport",
    "weak_symbol_check",
    "sliced_short_time",
]

_TAYLOR_CUT = 1e-6


@dataclass(frozen=True)
class AffineHamiltonian:
    """Coefficients of H = R*Q + S*D."""

    R: float
    S: float

    def __post_init__(self):
        if not (math.isfinite(self.R) and math.isfinite(self.S)):
            raise ParameterError("Hamiltonian coefficients must be finite")


@dataclass(frozen=True)
class GroupElement:
    p: float
    q: float

    def __post_init__(self):
        if not self.q > 0:
            raise ParameterError(f"group coordinate q must be positive, got {self.q}")

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.q, 0.0], [self.p * self.q, 1.0]])


def group_identity() -> GroupElement:
    return GroupElement(0.0, 1.0)


def group_compose(g1: GroupElement, g2: GroupElement) -> GroupElement:
    return GroupElement(g1.p + g2.p / g1.q, g1.q * g2.q)


def group_inverse(g: GroupElement) -> GroupElement:
    return GroupElement(-g.p * g.q, 1.0 / g.q)


def _phi1(z: float) -> float:
    """(e^z - 1)/z with a Taylor branch near z = 0."""
    if abs(z) < _TAYLOR_CUT:
        return 1.0 + z / 2.0 + z * z / 6.0
    return math.expm1(z) / z


def exp_affine(H: AffineHamiltonian, T: float) -> GroupElement:
    """Group coordinates of e^{-i(RQ+SD)T} via the closed 2x2 exponential.

    q_g = e^{ST};  p_g = -R*T*phi1(-S*T)  (exact S = 0 branch: (-R*T, 1)).
    """
    st = H.S * T
    q_g = math.exp(st)
    p_g = -H.R * T * _phi1(-st)
    return GroupElement(p_g, q_g)


def flow_labels(b: PhasePoint, H: AffineHamiltonian, T: float) -> PhasePoint:
    """The bra-label flow (p e^{ST} + (R/S)(e^{ST}-1), q e^{-ST})."""
    st = H.S * T
    p_new = b.p * math.exp(st) + H.R * T * _phi1(st)
    return PhasePoint(p_new, b.q * math.exp(-st))


def propagator_affine(a: PhasePoint, b: PhasePoint, H: AffineHamiltonian,
                      T: float, beta: float) -> complex:
    """<a| e^{-i(RQ+SD)T} |b> = <flow_labels(a)|b>."""
    return overlap_closed(flow_labels(a, H, T), b, beta).value


def propagator_affine_quadrature(a: PhasePoint, b: PhasePoint, H: AffineHamiltonian,
                                 T: float, beta: float) -> complex:
    """Independent x-representation route for the same propagator.

    The evolved ket is built by function algebra alone:
    U[g](U[b] eta)(x) = e^{i p_g x} q_g^{-1/2} e^{i p_b x/q_g} q_b^{-1/2}
    eta(x/(q_g q_b)) with g = exp_affine(H, T), i.e. a plane wave of
    frequency p_g + p_b/q_g times eta dilated by q_g q_b.  The quadrature
    never touches flow_labels, the group law, or the closed-form kernel.
    """
    g = exp_affine(H, T)
    spec = FiducialSpec.one_parameter(beta)
    evolved_ket = PhasePoint(g.p + b.p / g.q, g.q * b.q)
    return xrep_matrix_element(a, evolved_ket, spec)


@dataclass(frozen=True)
class TimeDependentAffine:
    """Smooth coefficient functions r(t), s(t) on [0, T] for r(t)Q + s(t)D."""

    r: object  # callable t -> float
    s: object  # callable t -> float

    def r_bar(self, t: float) -> float:
        """(1/t) integral(r, 0, t); r_bar(T) plays the role of R."""
        if t == 0:
            return float(self.r(0.0))
        val, err = integrate.quad(self.r, 0.0, t, epsabs=1e-12, epsrel=1e-11, limit=200)
        if err > 1e-9 * max(1.0, abs(val)):
            raise NumericError("coefficient integral did not converge",
                               {"err": err, "t": t})
        return val / t

    def s_bar(self, t: float) -> float:
        if t == 0:
            return float(self.s(0.0))
        val, err = integrate.quad(self.s, 0.0, t, epsabs=1e-12, epsrel=1e-11, limit=200)
        if err > 1e-9 * max(1.0, abs(val)):
            raise NumericError("coefficient integral did not converge",
                               {"err": err, "t": t})
        return val / t


def ordered_product(f: TimeDependentAffine, T: float, n_steps: int) -> GroupElement:
    """Time-ordered product of incremental flows, latest factor leftmost."""
    g = group_identity()
    dt = T / n_steps
    for k in range(n_steps):
        t_mid = (k + 0.5) * dt
        step = exp_affine(AffineHamiltonian(float(f.r(t_mid)), float(f.s(t_mid))), dt)
        g = group_compose(step, g)
    return g


def time_ordered_flow(f: TimeDependentAffine, T: float, n_steps: int = 10000) -> AffineHamiltonian:
    """Effective constant (R, S) with T e^{-i int [r Q + s D] dt} = e^{-i(RQ+SD)T}.

    Extracted from the ordered product of n_steps incremental group elements:
    S = ln(q_g)/T and R from p_g = -R*T*phi1(-S*T).  When the coefficient
    pair satisfies the ordered-exponential identity (e.g. r = 0, or both
    constant), these coincide with the running averages (r_bar(T), s_bar(T)).
    """
    if T <= 0:
        raise ParameterError("T must be positive")
    g = ordered_product(f, T, n_steps)
    s_eff = math.log(g.q) / T
    r_eff = -g.p / (T * _phi1(-s_eff * T))
    return AffineHamiltonian(r_eff, s_eff)


def upper_symbol_scale(beta: float) -> float:
    """The constant connecting insertion symbols to target operators.

    The coherent-state quantization map h -> integral(h |p,q><p,q| dmu)
    sends q -> Q / gamma and p q -> D / gamma with the single constant
    gamma = <Q^{-1}>/<Q^{-2}> = 1 - 1/beta, finite for beta > 1 only.
    Reproducing a target R Q + S D therefore needs the rescaled symbol
    gamma * (R q + S p q); the naive unscaled symbol over-rotates by 1/gamma.
    The weak_symbol_check fit recovers exactly this constant.
    """
    if not beta > 1.0:
        raise ParameterError(
            f"the symbol quantization constant requires beta > 1 "
            f"(second inverse moment finite), got {beta}")
    return 1.0 - 1.0 / beta


_SYMBOL_OPS = ("Q", "D", "Q2", "D2", "QD")


def lower_symbol(op: str, at: PhasePoint, beta: float) -> float:
    """Diagonal expectation <p,q|Op|p,q> via label covariance plus moments.

    U+ Q U = qQ and U+ D U = D + pq Q reduce every entry to fiducial
    moments of the one-parameter family (<Q> = 1, <D> = 0, <(QD+DQ)> = 0):

        Q  -> q,   D -> p q,   Q^2 -> q^2 <Q^2>,
        D^2 -> <D^2> + p^2 q^2 <Q^2>,   sym(QD) -> p q^2 <Q^2>.
    """
    if op not in _SYMBOL_OPS:
        raise ParameterError(f"op must be one of {_SYMBOL_OPS}, got {op!r}")
    spec = FiducialSpec.one_parameter(beta)
    q1 = moment(1, spec).value
    q2 = moment(2, spec).value
    d2 = spec.beta / 2.0  # <D^2> = (2 alpha + 1)/4 on the one-parameter family
    p, q = at.p, at.q
    if op == "Q":
        return q * q1
    if op == "D":
        return p * q * q1
    if op == "Q2":
        return q * q * q2
    if op == "D2":
        return d2 + p * p * q * q * q2
    return p * q * q * q2  # sym(QD)


@dataclass(frozen=True)
class WeakSymbolReport:
    constants: tuple[float, ...]
    residual: float
    n_pairs: int
    basis_names: tuple[str, ...]


_DEFAULT_PAIRS = (
    ((0.0, 1.0), (0.0, 1.0)),
    ((0.0, 2.0), (0.0, 1.0)),
    ((0.5, 1.0), (0.0, 1.0)),
    ((0.3, 1.5), (-0.2, 0.8)),
    ((1.0, 1.0), (0.0, 1.0)),
    ((0.0, 0.5), (0.0, 1.0)),
)


def weak_symbol_check(H_target: AffineHamiltonian, beta: float,
                      pairs=None, r_max: float = 2048.0, s_max: float = 4096.0,
                      ngl: int = 24) -> WeakSymbolReport:
    """Fit constants in h(p,q) = c_R q + c_S p q against the sandwich integral.

    Compares integral(<a|p,q> h(p,q) <p,q|b> dmu) with R <a|Q|b> + S <a|D|b>
    over a fixed endpoint set; the fit is linear least squares in (c_R, c_S)
    and the report carries the relative rms residual.  Requires beta > 1/2
    (the measure exists only there); exact constants require beta > 1, where
    c_R = c_S = <Q^{-1}>/<Q^{-2}> -- at beta <= 1 the second inverse moment
    diverges and the fitted constants degrade logarithmically with s_max.
    """
    if not beta > 0.5:
        raise ParameterError("weak symbols need beta > 1/2")
    from .kernel import admissible_constant  # deferred to avoid cycle noise

    if pairs is None:
        pairs = _DEFAULT_PAIRS
    pts = [(PhasePoint(*a), PhasePoint(*b)) for a, b in pairs]
    c = admissible_constant(beta)

    # quadrature nodes: r dyadic symmetric, s geometric
    edges = [0.0, 0.25, 0.5, 1.0]
    while edges[-1] < r_max:
        edges.append(min(2 * edges[-1], r_max))
    rh, rw = _panel_nodes(np.array(edges), ngl)
    r_nodes = np.concatenate([-rh[::-1], rh])
    r_w = np.concatenate([rw[::-1], rw])
    sedges = np.geomspace(1e-4, s_max, int(math.log2(s_max / 1e-4)) + 1)
    s_nodes, s_w = _panel_nodes(sedges, ngl)
    rr, ss = np.meshgrid(r_nodes, s_nodes, indexing="ij")

    basis = []
    names = []
    if H_target.R != 0.0 or (H_target.R == 0.0 and H_target.S == 0.0):
        basis.append(ss)
        names.append("q")
    if H_target.S != 0.0:
        basis.append(rr * ss)
        names.append("p*q")
    if not basis:
        basis, names = [ss], ["q"]

    rows = []
    targets = []
    for a, b in pts:
        ka = overlap_array(a.p, a.q, rr, ss, beta)
        kb = overlap_array(rr, ss, b.p, b.q, beta)
        prod = ka * kb
        rows.append([c * complex(np.einsum("i,j,ij->", r_w, s_w, prod * bas))
                     for bas in basis])
        targets.append(H_target.R * matrix_element_Q(a, b, beta)
                       + H_target.S * matrix_element_D(a, b, beta))
    m = np.array(rows)
    t = np.array(targets)
    # real least squares on stacked re/im parts
    m2 = np.vstack([m.real, m.imag])
    t2 = np.concatenate([t.real, t.imag])
    coef, *_ = np.linalg.lstsq(m2, t2, rcond=None)
    resid_vec = m @ coef - t
    scale = math.sqrt(float(np.mean(np.abs(t) ** 2))) or 1.0
    residual = math.sqrt(float(np.mean(np.abs(resid_vec) ** 2))) / scale
    return WeakSymbolReport(constants=tuple(float(x) for x in coef),
                            residual=residual, n_pairs=len(pts),
                            basis_names=tuple(names))


def _panel_nodes(edges: np.ndarray, ngl: int):
    from numpy.polynomial.legendre import leggauss
    x, w = leggauss(ngl)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (hi + lo) + 0.5 * (hi - lo) * x)
        weights.append(0.5 * (hi - lo) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def sliced_short_time(a: PhasePoint, b: PhasePoint, H: AffineHamiltonian,
                      eps: float, beta: float) -> complex:
    """Single-slice approximation <a|(1 - i eps H)|b>; O(eps^2) from the flow."""
    k = overlap_closed(a, b, beta).value
    return k - 1j * eps * (H.R * matrix_element_Q(a, b, beta)
                           + H.S * matrix_element_D(a, b, beta))
