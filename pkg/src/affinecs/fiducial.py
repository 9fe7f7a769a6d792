"""Fiducial-vector family eta(x) = N x^alpha e^(-beta x) on the half line.

The two-parameter family (alpha > -1/2, beta > 0) consists of real,
normalized minimum-uncertainty states for the operator pair (Q, D) with
[Q, D] = iQ.  Setting alpha = beta - 1/2 fixes the first moment <Q> = 1
and gives the one-parameter family used by the closed-form overlap kernel.

All moments <Q^k> are gamma-function ratios,

    <Q^k> = Gamma(2 alpha + k + 1) / Gamma(2 alpha + 1) * (2 beta)^(-k),

finite exactly when 2 alpha + k > -1.  The k = -1 moment is the
admissibility integral: it diverges on the one-parameter family whenever
beta <= 1/2, which is what makes those coherent-state families "weak"
(no resolution of unity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import ParameterError

__all__ = [
    "FiducialSpec",
    "MomentReport",
    "normalization_constant",
    "eval_fiducial",
    "eval_fiducial_log_derivative",
    "apply_dilation_generator",
    "moment",
    "uncertainty_product",
    "is_admissible",
]


def normalization_constant(alpha: float, beta: float) -> float:
    """Closed-form N with integral(N^2 x^(2 alpha) e^(-2 beta x), 0, inf) = 1.

    N^2 = (2 beta)^(2 alpha + 1) / Gamma(2 alpha + 1), evaluated in log
    space so large/small alpha, beta do not overflow.
    """
    if not alpha > -0.5:
        raise ParameterError(f"alpha must exceed -1/2, got {alpha}")
    if not beta > 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    log_n2 = (2 * alpha + 1) * math.log(2 * beta) - math.lgamma(2 * alpha + 1)
    return math.exp(0.5 * log_n2)


@dataclass(frozen=True)
class FiducialSpec:
    """Parameters (alpha, beta) plus the derived normalization constant."""

    alpha: float
    beta: float
    norm_const: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "norm_const", normalization_constant(self.alpha, self.beta))

    @classmethod
    def one_parameter(cls, beta: float) -> "FiducialSpec":
        """The <Q> = 1 family: alpha = beta - 1/2."""
        return cls(alpha=beta - 0.5, beta=beta)


@dataclass(frozen=True)
class MomentReport:
    """Value of <Q^order>, or a divergence flag when the integral blows up.

    ``value`` is None exactly when ``divergent`` is True; divergence is
    decided from the exact condition 2 alpha + order <= -1, never from a
    numeric threshold.
    """

    order: int
    value: float | None
    method: str
    divergent: bool = False


def eval_fiducial(x, spec: FiducialSpec):
    """Evaluate eta(x) = N x^alpha e^(-beta x); accepts scalars or arrays."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0.0):
        raise ParameterError("fiducial vector is defined for x > 0 only")
    out = spec.norm_const * np.power(arr, spec.alpha) * np.exp(-spec.beta * arr)
    return out if isinstance(x, np.ndarray) else float(out)


def eval_fiducial_log_derivative(x, spec: FiducialSpec):
    """eta'(x)/eta(x) = alpha/x - beta, used to apply operators analytically."""
    arr = np.asarray(x, dtype=float)
    return spec.alpha / arr - spec.beta


def apply_dilation_generator(x, spec: FiducialSpec):
    """(D eta)(x) for D = -(i/2)[x d/dx + d/dx x], reduced analytically.

    x eta' = (alpha - beta x) eta, so D eta = -i (alpha + 1/2 - beta x) eta.
    On the one-parameter family this is -i beta (1 - x) eta.  Returns the
    complex array -i (alpha + 1/2 - beta x) * eta(x).
    """
    eta = eval_fiducial(x, spec)
    arr = np.asarray(x, dtype=float)
    return -1j * (spec.alpha + 0.5 - spec.beta * arr) * eta


def _moment_quadrature(k: int, spec: FiducialSpec) -> float:
    # substitute x = u^2 to soften the x -> 0 endpoint for alpha near -1/2
    expo = 2 * spec.alpha + k

    def f(u):
        x = u * u
        return 2.0 * u * spec.norm_const**2 * x**expo * math.exp(-2 * spec.beta * x)

    upper = math.sqrt((expo + 60.0) / (2 * spec.beta)) + 10.0  # tail < 1e-16 of peak
    val, err = integrate.quad(f, 0.0, upper, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def moment(k: int, spec: FiducialSpec, method: str = "gamma-ratio") -> MomentReport:
    """<Q^k> for integer k >= -1, as a gamma ratio or by adaptive quadrature.

    Divergent moments (2 alpha + k <= -1) are flagged, never returned as a
    large number, so admissibility logic downstream stays exact.
    """
    if k < -1:
        raise ParameterError(f"moment order must be >= -1, got {k}")
    if 2 * spec.alpha + k <= -1.0:
        return MomentReport(order=k, value=None, method=method, divergent=True)
    if method == "gamma-ratio":
        log_val = (
            math.lgamma(2 * spec.alpha + k + 1)
            - math.lgamma(2 * spec.alpha + 1)
            - k * math.log(2 * spec.beta)
        )
        return MomentReport(order=k, value=math.exp(log_val), method=method)
    if method == "quadrature":
        return MomentReport(order=k, value=_moment_quadrature(k, spec), method=method)
    raise ParameterError(f"unknown moment method {method!r}")


def uncertainty_product(spec: FiducialSpec) -> float:
    """Delta Q * Delta D built from moments.

    Delta D comes from the analytic reduction D eta = -i(alpha + 1/2 - beta x) eta:
    <D> = 0 and <D^2> = (a+1/2)^2 - 2 beta (a+1/2) <Q> + beta^2 <Q^2>.
    Every member of the family saturates the bound Delta Q Delta D = <Q>/2.
    """
    q1 = moment(1, spec).value
    q2 = moment(2, spec).value
    var_q = q2 - q1 * q1
    a_half = spec.alpha + 0.5
    d2 = a_half * a_half - 2 * spec.beta * a_half * q1 + spec.beta**2 * q2
    return math.sqrt(var_q) * math.sqrt(d2)


def is_admissible(spec: FiducialSpec) -> bool:
    """True iff <Q^-1> is finite; on the one-parameter family, beta > 1/2."""
    return not moment(-1, spec).divergent
