"""Independent oracles used to freeze expected values in the tests.

Everything here is deliberately built from different primitives than the
library paths it checks: dense trapezoid grids instead of adaptive
quadrature, scipy's generic matrix exponential instead of the closed-form
group exponential, shoelace areas instead of the phase accumulator.
"""

import cmath
import math

import numpy as np
import scipy.linalg


def trapezoid_overlap(a, b, alpha, beta, n=400000, x_max=80.0):
    """Fixed-grid trapezoid rule for the overlap integral, general (alpha, beta).

    Uses the substitution x = u^2, which removes the endpoint derivative
    singularity of x^(2 alpha) for alpha < 1/2 and keeps plain trapezoid
    convergence at O(h^2).
    """
    n_const = math.exp(0.5 * ((2 * alpha + 1) * math.log(2 * beta)
                              - math.lgamma(2 * alpha + 1)))
    u = np.linspace(1e-9, math.sqrt(x_max), n)
    x = u * u
    eta_a = n_const * (x / a[1]) ** alpha * np.exp(-beta * x / a[1])
    eta_b = n_const * (x / b[1]) ** alpha * np.exp(-beta * x / b[1])
    f = 2 * u * eta_a * eta_b * np.exp(-1j * (a[0] - b[0]) * x) / math.sqrt(a[1] * b[1])
    return complex(np.trapezoid(f, u))


def closed_overlap(a, b, beta):
    """Reference closed form, written independently with cmath."""
    base = 0.5 * (1.0 / a[1] + 1.0 / b[1]) + 0.5j * (a[0] - b[0]) / beta
    return cmath.exp(-beta * (math.log(a[1]) + math.log(b[1]))
                     - 2.0 * beta * cmath.log(base))


def expm_group_coords(R, S, T):
    """Group coordinates of the flow via scipy's generic expm on the 2x2 rep."""
    X = np.array([[S, 0.0], [-R, 0.0]])
    M = scipy.linalg.expm(T * X)
    q = M[0, 0]
    p = M[1, 0] / q
    return p, q


def polygon_loop_area(ps, qs):
    """Shoelace signed area of a closed polygon in the (p, q) plane."""
    ps = np.asarray(ps)
    qs = np.asarray(qs)
    return 0.5 * float(np.sum(ps * np.roll(qs, -1) - np.roll(ps, -1) * qs))


def finite_diff_b_operator(f, p, q, beta, h=1e-5):
    """Apply B = -i q^{-1} d/dp + 1 + beta^{-1} q d/dq by plain differences
    directly in q (not ln q): an independent cross-check of the stencil."""
    dp = (f(p + h, q) - f(p - h, q)) / (2 * h)
    dq = (f(p, q + h) - f(p, q - h)) / (2 * h)
    return -1j * dp / q + f(p, q) + q * dq / beta
