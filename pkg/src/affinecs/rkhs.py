"""Finite spans of coherent-state kernels and the complex-polarization probe.

A span element is psi(p,q) = sum_j alpha_j <p,q|p_j,q_j>.  Inner products are
Gram-based by definition, so they exist for every beta > 0, including the
weak range beta <= 1/2 where no measure-based inner product is available.

Every element of the beta-space is annihilated by the first-order operator

    B = -i q^{-1} d/dp + 1 + beta^{-1} q d/dq,

which ``polarization_residual`` verifies by central differences in p and in
ln q (the q-derivative is logarithmic, so stepping in ln q keeps the stencil
accuracy uniform across scales).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .kernel import PhasePoint, overlap_array

__all__ = [
    "SpanElement",
    "PolarizationResidual",
    "kernel_element",
    "eval_span",
    "inner_product",
    "polarization_residual",
]


@dataclass(frozen=True)
class SpanElement:
    beta: float
    coeffs: tuple[complex, ...]
    points: tuple[PhasePoint, ...]

    def __post_init__(self):
        if len(self.coeffs) != len(self.points):
            raise ParameterError("coeffs and points must have equal length")
        if len(self.coeffs) == 0:
            raise ParameterError("span element needs at least one term")
        if not self.beta > 0:
            raise ParameterError(f"beta must be positive, got {self.beta}")


def kernel_element(at: PhasePoint, beta: float) -> SpanElement:
    """The reproducing kernel at a point, as a one-term span element."""
    return SpanElement(beta=beta, coeffs=(1.0 + 0.0j,), points=(at,))


def eval_span(e: SpanElement, at: PhasePoint) -> complex:
    ps = np.array([pt.p for pt in e.points])
    qs = np.array([pt.q for pt in e.points])
    vals = overlap_array(at.p, at.q, ps, qs, e.beta)
    return complex(np.dot(np.asarray(e.coeffs), vals))


def inner_product(e1: SpanElement, e2: SpanElement) -> complex:
    """<e1|e2> = sum_jk conj(a_j) g_k <pt_j|pt_k>; spaces with different beta
    are mutually disjoint, so mixing them is a domain error."""
    if e1.beta != e2.beta:
        raise ParameterError(
            f"elements live in disjoint spaces (beta {e1.beta} vs {e2.beta})"
        )
    p1 = np.array([pt.p for pt in e1.points])[:, None]
    q1 = np.array([pt.q for pt in e1.points])[:, None]
    p2 = np.array([pt.p for pt in e2.points])[None, :]
    q2 = np.array([pt.q for pt in e2.points])[None, :]
    g = overlap_array(p1, q1, p2, q2, e1.beta)
    a = np.asarray(e1.coeffs)
    b = np.asarray(e2.coeffs)
    return complex(np.conj(a) @ g @ b)


@dataclass(frozen=True)
class PolarizationResidual:
    value: complex
    step: float
    point: PhasePoint


def _eval_maybe_span(f, at: PhasePoint) -> complex:
    if isinstance(f, SpanElement):
        return eval_span(f, at)
    return complex(f(at))


def polarization_residual(e, at: PhasePoint, h: float,
                          operator_beta: float | None = None) -> PolarizationResidual:
    """(B psi)(at) by second-order central differences with step h.

    ``e`` is a SpanElement or any callable PhasePoint -> complex.  The p
    stencil uses step h; the dilation term beta^{-1} q d/dq is evaluated as
    beta^{-1} d/d(ln q) with the same step.  ``operator_beta`` selects the
    beta in B (defaults to the element's own), which makes cross-space
    probes possible: applying B_{beta2} to a beta1 element leaves an O(1)
    residual, a numerical witness that the spaces are disjoint.
    """
    if not h > 0:
        raise ParameterError("step h must be positive")
    if not at.q > 2 * h:
        raise ParameterError(f"step h = {h} too large relative to q = {at.q}")
    beta_op = operator_beta
    if beta_op is None:
        if not isinstance(e, SpanElement):
            raise ParameterError("operator_beta is required for callable elements")
        beta_op = e.beta

    f0 = _eval_maybe_span(e, at)
    fp_plus = _eval_maybe_span(e, PhasePoint(at.p + h, at.q))
    fp_minus = _eval_maybe_span(e, PhasePoint(at.p - h, at.q))
    fq_plus = _eval_maybe_span(e, PhasePoint(at.p, at.q * math.exp(h)))
    fq_minus = _eval_maybe_span(e, PhasePoint(at.p, at.q * math.exp(-h)))

    d_p = (fp_plus - fp_minus) / (2 * h)
    d_u = (fq_plus - fq_minus) / (2 * h)
    value = -1j * d_p / at.q + f0 + d_u / beta_op
    return PolarizationResidual(value=value, step=h, point=at)
