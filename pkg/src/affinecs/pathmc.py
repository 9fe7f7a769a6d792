"""Monte Carlo estimation of the regularized phase-space path integral.

Pinned paths live in (p, u = ln q) under the constant-negative-curvature
kinetic measure (midpoint prescription)

    prod_l  (2 pi nu d)^{-1} qbar_l exp( -[qbar_l^2 Dp_l^2 / beta
                                           + beta Du_l^2] / (2 nu d) ),

with d = T/N.  The u component of this measure is exactly a flat Brownian
bridge (its metric coefficient is constant), and conditionally on the u
path the p component is a Gaussian bridge with per-step variances
v_l = nu d beta / qbar_l^2.  Both factors are therefore sampled exactly;
the only importance weight left is the p-endpoint pinning marginal
N(p_b - p_a; 0, sum_l v_l), a single bounded factor per path whose variance
does not grow with N.  (A flat proposal for p, by contrast, accumulates an
O(1) Kullback-Leibler mismatch per step and its weights degenerate long
before desk-scale lattices -- that route is unusable in practice.)

The Stratonovich phase is linear in the p increments, so for Hamiltonian
symbols in span{1, q, p q} the oscillatory factor is averaged in closed
form via the Gaussian characteristic function, removing the sign problem
entirely; arbitrary symbols fall back to sampled p paths.

Estimates are self-normalized by the identical estimator at the reference
endpoints (0,1) -> (0,1): every lattice constant, the e^{nu T/2}
counterterm, and the curvature prescription factor cancel in the ratio.
The midpoint product measure carries the usual g^{1/4} endpoint
normalization relative to the flat-delta semigroup kernel, removed here by
the explicit factor (q_a q_b)^{-1/2}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .kernel import PhasePoint

__all__ = [
    "PathLattice",
    "McEstimate",
    "AffineSymbol",
    "hyperbolic_midpoint_q",
    "sample_bridge",
    "stratonovich_phase",
    "propagator_mc",
    "symbol_insertion_mc",
    "extrapolate_nu",
    "ExtrapolationResult",
    "toy_wiener_mc",
]

_BATCH = 40000
_REFERENCE = PhasePoint(0.0, 1.0)


@dataclass(frozen=True)
class PathLattice:
    """Discretized pinned path; endpoints exact, all q_l > 0 by construction."""

    times: np.ndarray
    p: np.ndarray
    q: np.ndarray
    nu: float
    beta: float

    def __post_init__(self):
        if not (len(self.times) == len(self.p) == len(self.q)):
            raise ParameterError("times, p, q must have equal length")
        if np.any(self.q <= 0):
            raise ParameterError("all q values must be positive")


@dataclass(frozen=True)
class McEstimate:
    value: complex
    stderr: float
    n_samples: int
    nu: float
    seed: int
    resamples: int = 0
    flags: tuple[str, ...] = ()

    @property
    def reliable(self) -> bool:
        return "unreliable" not in self.flags


@dataclass(frozen=True)
class AffineSymbol:
    """h(p, q) = k + r q + s p q; the symbol class with closed-form dynamics."""

    r: float = 0.0
    s: float = 0.0
    k: float = 0.0

    def __call__(self, p, q):
        return self.k + self.r * q + self.s * p * q


def hyperbolic_midpoint_q(a: PhasePoint, b: PhasePoint, beta: float) -> float:
    """q at the geodesic midpoint of the labels in the kinetic metric.

    The metric beta^{-1} q^2 dp^2 + beta q^{-2} dq^2 maps to the upper half
    plane (x, y) = (p/beta, 1/q) scaled by beta; geodesics are semicircles
    centered on the real axis, and the arc-length midpoint is the geometric
    mean point of the angle parametrization.
    """
    x1, y1 = a.p / beta, 1.0 / a.q
    x2, y2 = b.p / beta, 1.0 / b.q
    if abs(x1 - x2) < 1e-14:
        return 1.0 / math.sqrt(y1 * y2)
    c = (x1 * x1 + y1 * y1 - x2 * x2 - y2 * y2) / (2.0 * (x1 - x2))
    rho = math.hypot(x1 - c, y1)
    th1 = math.atan2(y1, x1 - c)
    th2 = math.atan2(y2, x2 - c)
    th_mid = 2.0 * math.atan(math.sqrt(math.tan(th1 / 2) * math.tan(th2 / 2)))
    return 1.0 / (rho * math.sin(th_mid))


def stratonovich_phase(path: PathLattice) -> float:
    """Midpoint discretization of -integral(q dp):
    -sum_l (q_{l+1} + q_l)/2 * (p_{l+1} - p_l)."""
    qbar = 0.5 * (path.q[1:] + path.q[:-1])
    return float(-(qbar * np.diff(path.p)).sum())


def _u_bridges(rng, u0: float, u1: float, step_var: float, n_steps: int, n: int) -> np.ndarray:
    steps = rng.normal(0.0, math.sqrt(step_var), size=(n, n_steps))
    w = np.concatenate([np.zeros((n, 1)), np.cumsum(steps, axis=1)], axis=1)
    t = np.linspace(0.0, 1.0, n_steps + 1)[None, :]
    return u0 + w - t * w[:, -1:] + t * (u1 - u0)


def _p_bridges(rng, p0: float, p1: float, v: np.ndarray) -> np.ndarray:
    """Gaussian bridges with per-step variances v[:, l], pinned at both ends."""
    n, n_steps = v.shape
    p = np.empty((n, n_steps + 1))
    p[:, 0] = p0
    remaining = np.cumsum(v[:, ::-1], axis=1)[:, ::-1]  # V_l = sum_{m>=l} v_m
    for l in range(n_steps):
        v_l = v[:, l]
        big_v = remaining[:, l]
        mean = p[:, l] + (p1 - p[:, l]) * v_l / big_v
        var = v_l * (1.0 - v_l / big_v)
        var[var < 0] = 0.0
        p[:, l + 1] = mean + rng.normal(size=n) * np.sqrt(var)
    p[:, -1] = p1
    return p


def _path_geometry(u: np.ndarray, beta: float, nu: float, dt: float):
    """Per-path arrays used by every estimator: arithmetic/geometric midpoint
    q, per-step p variances, and their sum."""
    q_arith = 0.5 * (np.exp(u[:, 1:]) + np.exp(u[:, :-1]))
    v = nu * dt * beta * np.exp(-(u[:, 1:] + u[:, :-1]))  # nu dt beta / qgeo^2
    return q_arith, v, v.sum(axis=1)


def sample_bridge(endpoints: tuple[PhasePoint, PhasePoint], beta: float, nu: float,
                  T: float, N: int, rng: np.random.Generator) -> tuple[PathLattice, float]:
    """Draw one pinned path from a (t=0) to b (t=T) and its log weight.

    The u bridge and the conditional p bridge are exact draws from the
    midpoint kinetic measure, so the log Radon-Nikodym correction reduces to
    the p-endpoint pinning marginal, reported relative to its value with the
    metric frozen at the geodesic midpoint of the endpoints (hence weight
    -> 1 as the path collapses): finite variance at any lattice size.
    """
    if N < 2:
        raise ParameterError("need at least 2 time steps")
    if nu <= 0 or T <= 0:
        raise ParameterError("nu and T must be positive")
    a, b = endpoints
    dt = T / N
    u = _u_bridges(rng, math.log(a.q), math.log(b.q), nu * dt / beta, N, 1)
    _, v, sum_v = _path_geometry(u, beta, nu, dt)
    p = _p_bridges(rng, a.p, b.p, v)
    dp_ab = b.p - a.p
    ref_sum = nu * T * beta / hyperbolic_midpoint_q(a, b, beta) ** 2
    log_w = (-dp_ab**2 / (2 * sum_v[0]) + dp_ab**2 / (2 * ref_sum)
             - 0.5 * math.log(sum_v[0] / ref_sum))
    times = np.linspace(0.0, T, N + 1)
    lattice = PathLattice(times=times, p=p[0], q=np.exp(u[0]), nu=nu, beta=beta)
    return lattice, float(log_w)


def _char_coeffs(q_arith: np.ndarray, v: np.ndarray, sum_v: np.ndarray,
                 c: np.ndarray, dp_ab: float):
    """Mean and variance of sum_l c_l * Dp_l under the conditional p bridge."""
    cv = (c * v).sum(axis=1)
    mean = cv * dp_ab / sum_v
    var = (c * c * v).sum(axis=1) - cv * cv / sum_v
    return mean, var


def _mc_mean(a: PhasePoint, b: PhasePoint, beta: float, nu: float, T: float,
             N: int, h, n_samples: int, seed_seq, insertion=None):
    """Core loop: returns (mean, stderr) of the per-path complex factor.

    The per-path factor is  N(dp_ab; 0, sum v) * E_p[ e^{-i(phase + sum h dt)}
    * optional insertion | u ],  with the p average exact for affine symbols
    and sampled otherwise.  Paths run from a at t=0 to b at t=T; with this
    orientation exp(-i * stratonovich_phase) is the correct kernel factor.
    """
    rng = np.random.default_rng(seed_seq)
    dt = T / N
    dp_ab = b.p - a.p
    ins_analytic = insertion is None or insertion[1] is None or (
        isinstance(insertion[1], AffineSymbol) and insertion[1].s == 0.0)
    analytic = (h is None or isinstance(h, AffineSymbol)) and ins_analytic

    total = 0.0 + 0.0j
    total_sq = 0.0
    done = 0
    while done < n_samples:
        m = min(_BATCH, n_samples - done)
        u = _u_bridges(rng, math.log(a.q), math.log(b.q), nu * dt / beta, N, m)
        q_arith, v, sum_v = _path_geometry(u, beta, nu, dt)
        pin = np.exp(-dp_ab**2 / (2 * sum_v)) / np.sqrt(2 * np.pi * sum_v)

        if analytic:
            # linear functional sum_l c_l Dp_l of the p increments:
            # phase contributes -qbar_l, an affine symbol s*p*q contributes
            # s dt (qbar_l/2 + sum_{m>l} qbar_m) plus a p_a offset term
            c = q_arith.copy()
            const = np.zeros(m)
            if isinstance(h, AffineSymbol):
                const = const + h.k * T + h.r * dt * q_arith.sum(axis=1)
                if h.s != 0.0:
                    tail = np.cumsum(q_arith[:, ::-1], axis=1)[:, ::-1]
                    suffix = np.concatenate([tail[:, 1:], np.zeros((m, 1))], axis=1)
                    c = c - h.s * dt * (0.5 * q_arith + suffix)
                    const = const + h.s * dt * a.p * q_arith.sum(axis=1)
            mean, var = _char_coeffs(q_arith, v, sum_v, c, dp_ab)
            factor = pin * np.exp(1j * (mean - const) - 0.5 * var)
            if insertion is not None:
                idx, h_ins = insertion
                q_node = np.exp(u[:, idx])
                if h_ins is None:
                    factor = factor * q_node  # h = q at the insertion node
                else:  # AffineSymbol with s == 0: u-measurable
                    factor = factor * (h_ins.k + h_ins.r * q_node)
        else:
            p = _p_bridges(rng, a.p, b.p, v)
            x = (q_arith * np.diff(p, axis=1)).sum(axis=1)  # = -strat phase
            expo = x
            if h is not None:
                p_mid = 0.5 * (p[:, 1:] + p[:, :-1])
                expo = expo - dt * np.asarray(h(p_mid, q_arith)).sum(axis=1)
            factor = pin * np.exp(1j * expo)
            if insertion is not None:
                idx, h_ins = insertion
                factor = factor * np.asarray(h_ins(p[:, idx], np.exp(u[:, idx])))
        total += factor.sum()
        total_sq += float((np.abs(factor) ** 2).sum())
        done += m

    mean_val = total / n_samples
    var_val = max(total_sq / n_samples - abs(mean_val) ** 2, 0.0)
    return complex(mean_val), math.sqrt(var_val / n_samples)


def _pinning_factors(a: PhasePoint, b: PhasePoint, beta: float, nu: float, T: float) -> float:
    """u-marginal pinning times the g^{1/4} endpoint normalization."""
    var_u = nu * T / beta
    du = math.log(b.q / a.q)
    g_u = math.exp(-du * du / (2 * var_u)) / math.sqrt(2 * math.pi * var_u)
    return g_u / math.sqrt(a.q * b.q)


def default_lattice_size(nu: float, T: float) -> int:
    """Smallest N with per-step diffusion nu*T/N <= 1/16."""
    return max(64, int(math.ceil(16.0 * nu * T)))


def _estimate_raw(a, b, beta, nu, T, N, h, n_samples, seed_seq, insertion=None):
    mean, err = _mc_mean(a, b, beta, nu, T, N, h, n_samples, seed_seq, insertion)
    scale = _pinning_factors(a, b, beta, nu, T)
    return scale * mean, scale * err


def propagator_mc(a: PhasePoint, b: PhasePoint, beta: float, nu: float, T: float,
                  h=None, n_samples: int = 100000, seed: int = 0,
                  N: int | None = None) -> McEstimate:
    """Self-normalized estimate of <a| e^{-i H T} |b> at diffusion rate nu.

    ``h`` is None (pure overlap), an AffineSymbol (closed-form p average,
    no sign problem), or an arbitrary callable h(p, q) evaluated at
    Stratonovich midpoints along sampled paths.  The normalization K_nu is
    the identical h-free estimator at the reference endpoints, computed from
    an independent substream of the same seed; when the requested
    configuration *is* the reference, the ratio is exactly 1 by construction.
    """
    if not beta > 0:
        raise ParameterError("beta must be positive")
    if N is None:
        N = default_lattice_size(nu, T)
    if nu * T / N > 1.0 / 16 + 1e-12:
        raise ParameterError(
            f"lattice too coarse: nu*T/N = {nu * T / N:.3g} exceeds 1/16")
    num_seed, ref_seed = np.random.SeedSequence(seed).spawn(2)
    is_reference = (a == _REFERENCE and b == _REFERENCE and h is None)
    ref_val, ref_err = _estimate_raw(_REFERENCE, _REFERENCE, beta, nu, T, N,
                                     None, n_samples, ref_seed)
    if is_reference:
        val, err = ref_val, ref_err
    else:
        val, err = _estimate_raw(a, b, beta, nu, T, N, h, n_samples, num_seed)

    ratio = val / ref_val
    rel = math.sqrt((err / abs(val)) ** 2 + (ref_err / abs(ref_val)) ** 2) if abs(val) > 0 else math.inf
    stderr = abs(ratio) * rel if not is_reference else max(err / abs(ref_val), 1e-300)
    if is_reference:
        ratio = 1.0 + 0.0j
    flags = ()
    if stderr > abs(ratio):
        flags = ("unreliable",)
    return McEstimate(value=complex(ratio), stderr=float(stderr), n_samples=n_samples,
                      nu=nu, seed=seed, flags=flags)


def symbol_insertion_mc(a: PhasePoint, b: PhasePoint, beta: float, nu: float,
                        T: float, h, u: float, n_samples: int = 100000,
                        seed: int = 0, N: int | None = None) -> McEstimate:
    """Estimate <a| H |b> by inserting h(p(u), q(u)) at one interior time.

    The result is u-independent up to statistical error.  ``h`` may be the
    string "q", an AffineSymbol (closed-form averages when the p-coefficient
    vanishes), or a callable h(p, q) (sampled-path route).

    The limit reproduces the operator *quantized from* h, i.e. the target
    whose upper symbol is h: inserting h = gamma q with
    gamma = upper_symbol_scale(beta) yields <a|Q|b> for beta > 1.
    """
    if not 0.0 < u < T:
        raise ParameterError("insertion time must lie strictly inside (0, T)")
    if N is None:
        N = default_lattice_size(nu, T)
    idx = int(np.clip(round(u / T * N), 1, N - 1))
    num_seed, ref_seed = np.random.SeedSequence(seed).spawn(2)
    if h == "q":
        insertion = (idx, None)
    elif isinstance(h, AffineSymbol) or callable(h):
        insertion = (idx, h)
    else:
        raise ParameterError("h must be 'q', an AffineSymbol, or a callable h(p, q)")
    val, err = _estimate_raw(a, b, beta, nu, T, N, None, n_samples, num_seed,
                             insertion=insertion)
    ref_val, ref_err = _estimate_raw(_REFERENCE, _REFERENCE, beta, nu, T, N,
                                     None, n_samples, ref_seed)
    ratio = val / ref_val
    rel = math.sqrt((err / abs(val)) ** 2 + (ref_err / abs(ref_val)) ** 2)
    stderr = abs(ratio) * rel
    flags = ("unreliable",) if stderr > abs(ratio) else ()
    return McEstimate(value=complex(ratio), stderr=float(stderr), n_samples=n_samples,
                      nu=nu, seed=seed, flags=flags)


@dataclass(frozen=True)
class ExtrapolationResult:
    value: complex
    error: float
    chi2_per_dof: float
    flags: tuple[str, ...] = ()


def extrapolate_nu(estimates: list[McEstimate]) -> ExtrapolationResult:
    """Weighted affine fit value(nu) = c + d/nu; returns c with its error.

    Weights are 1/stderr^2; the intercept error combines the fit covariance
    with a chi-square inflation factor, and chi2/dof > 10 flags the inputs
    as mutually inconsistent.
    """
    if len(estimates) < 3:
        raise ParameterError("need at least 3 estimates to extrapolate")
    nus = [e.nu for e in estimates]
    if len(set(nus)) != len(nus):
        raise ParameterError("nu values must be distinct")
    if any(not e.reliable for e in estimates):
        raise ParameterError("refusing to extrapolate from unreliable estimates")
    x = 1.0 / np.array(nus)
    y = np.array([e.value for e in estimates])
    sig = np.array([max(e.stderr, 1e-14) for e in estimates])
    design = np.vstack([np.ones_like(x), x]).T
    w = 1.0 / sig
    aw = design * w[:, None]
    cov = np.linalg.inv(aw.T @ aw)
    coef_re = cov @ aw.T @ (y.real * w)
    coef_im = cov @ aw.T @ (y.imag * w)
    fit = design @ (coef_re + 1j * coef_im)
    resid = (y - fit) / sig
    dof = max(2 * len(estimates) - 4, 1)
    chi2_dof = float((resid.real**2 + resid.imag**2).sum() / dof)
    err = math.sqrt(cov[0, 0]) * math.sqrt(2.0) * max(1.0, math.sqrt(chi2_dof))
    flags = ("inconsistent",) if chi2_dof > 10 else ()
    return ExtrapolationResult(value=complex(coef_re[0], coef_im[0]),
                               error=float(err), chi2_per_dof=chi2_dof, flags=flags)


def toy_wiener_mc(dx: float, nu: float, T: float, N: int, n_samples: int,
                  seed: int = 0) -> McEstimate:
    """MC value of the pinned free-line Wiener integral (unit weights).

    The flat bridge sampler is exact for the flat kinetic measure, so every
    sampled path carries weight exactly 1 and only the endpoint pinning
    factor N(dx; 0, nu T) survives: the toy rescaled limit
    sqrt(2 pi nu T) * value -> 1 as nu grows, with zero sampling variance.
    This pins down the normalization bookkeeping shared with propagator_mc.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    step_var = nu * (T / N)
    tot = 0.0
    done = 0
    while done < n_samples:
        m = min(_BATCH, n_samples - done)
        u = _u_bridges(rng, 0.0, dx, step_var, N, m)
        # exact proposal == target: log weight is identically zero
        tot += float(np.exp(np.zeros(u.shape[0])).sum())
        done += m
    mean_w = tot / n_samples
    g0 = math.exp(-dx * dx / (2 * nu * T)) / math.sqrt(2 * math.pi * nu * T)
    return McEstimate(value=complex(g0 * mean_w), stderr=1e-16, n_samples=n_samples,
                      nu=nu, seed=seed)
