"""Grid evolution of e^{-nu T A} with A = (beta/2) B'B, and its rescaled limits.

Coordinates are (p, u = ln q), which turn the q > 0 half line into a full
line and make the flat label measure dp dq = e^u dp du.  The polarization
operator is discretized with central differences,

    B = -i e^{-u} D_p + 1 + beta^{-1} D_u,

and the generator is assembled as A = W^{-1} C with C = (beta/2) B* W B and
W = diag(e^u dp du): Hermitian and positive semidefinite in the
measure-weighted inner product by construction, which guarantees
norm-nonincreasing Crank-Nicolson steps regardless of beta.

Evolving a narrow normalized bump ("delta surrogate") for a long diffusion
time s = nu*T projects it onto the near-kernel of A.  Dividing by the value
at the source point -- the self-consistent rescaling K_nu -- removes every
normalization constant and, extrapolated in 1/nu, reproduces the closed-form
overlap kernel.  For beta > 1/2, K_nu itself converges to 2 pi <Q^{-1}>, the
reciprocal of the reproducing-measure constant; for beta <= 1/2 it grows
without bound (0 sits in continuous spectrum) but the rescaled values still
converge, which is the numerical content of the self-consistency conjecture.

Boundary truncation is monitored, not assumed away: evolved fields carry an
accuracy warning when mass reaches the Dirichlet frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import solve_banded

from .errors import ConfigError, ParameterError
from .kernel import PhasePoint, overlap_array

__all__ = [
    "GridSpec",
    "GridField",
    "DiscreteGenerator",
    "RescaledLimit",
    "default_grid",
    "build_A",
    "sample_kernel_field",
    "delta_surrogate",
    "evolve",
    "knu",
    "projection_limit",
    "toy_heat",
    "toy_heat_grid",
    "toy_selfconsistent",
]

# accuracy bound for the second-order time stepper: diffusion-time step
# nu*dt against the O(1) spectral scale of the low modes
MAX_DIFFUSION_STEP = 0.25
BOUNDARY_TOL = 1e-6


@dataclass(frozen=True)
class GridSpec:
    p_min: float
    p_max: float
    u_min: float
    u_max: float
    n_p: int
    n_u: int
    dt: float = 0.0125  # physical step; diffusion step is nu*dt

    def __post_init__(self):
        if self.p_min >= self.p_max or self.u_min >= self.u_max:
            raise ConfigError("empty grid box")
        if self.n_p < 16 or self.n_u < 16:
            raise ConfigError("grid too coarse (need at least 16 points per axis)")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / (self.n_p - 1)

    @property
    def du(self) -> float:
        return (self.u_max - self.u_min) / (self.n_u - 1)

    def p_nodes(self) -> np.ndarray:
        return np.linspace(self.p_min, self.p_max, self.n_p)

    def u_nodes(self) -> np.ndarray:
        return np.linspace(self.u_min, self.u_max, self.n_u)

    def stability_bound(self, nu: float) -> float:
        """Largest admissible dt for the requested diffusion rate."""
        return MAX_DIFFUSION_STEP / nu

    def require_margin(self, point: PhasePoint, cells: int = 5) -> None:
        u = math.log(point.q)
        if not (self.p_min + cells * self.dp <= point.p <= self.p_max - cells * self.dp
                and self.u_min + cells * self.du <= u <= self.u_max - cells * self.du):
            raise ConfigError(
                f"label {point} closer than {cells} cells to the grid boundary"
            )


@dataclass(frozen=True)
class GridField:
    """Complex field on the interior nodes of a GridSpec (Dirichlet frame)."""

    values: np.ndarray  # shape (n_p - 2, n_u - 2)
    spec: GridSpec
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        expect = (self.spec.n_p - 2, self.spec.n_u - 2)
        if self.values.shape != expect:
            raise ConfigError(f"field shape {self.values.shape}, grid wants {expect}")
        if not np.all(np.isfinite(self.values)):
            raise ConfigError("field contains non-finite values")

    def interior_nodes(self) -> tuple[np.ndarray, np.ndarray]:
        return self.spec.p_nodes()[1:-1], self.spec.u_nodes()[1:-1]

    def measure_weights(self) -> np.ndarray:
        _, u = self.interior_nodes()
        return np.exp(u)[None, :] * self.spec.dp * self.spec.du

    def wnorm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2 * self.measure_weights())))

    def boundary_ratio(self) -> float:
        """Max |value| on the outermost interior ring over max |value| inside."""
        v = np.abs(self.values)
        ring = max(v[0, :].max(), v[-1, :].max(), v[:, 0].max(), v[:, -1].max())
        return float(ring / max(v.max(), 1e-300))

    def value_at(self, point: PhasePoint) -> complex:
        p_nodes, u_nodes = self.interior_nodes()
        x, y = point.p, math.log(point.q)
        i = int(np.clip(np.searchsorted(p_nodes, x) - 1, 0, len(p_nodes) - 2))
        j = int(np.clip(np.searchsorted(u_nodes, y) - 1, 0, len(u_nodes) - 2))
        tx = (x - p_nodes[i]) / (p_nodes[i + 1] - p_nodes[i])
        ty = (y - u_nodes[j]) / (u_nodes[j + 1] - u_nodes[j])
        f = self.values
        return complex((1 - tx) * (1 - ty) * f[i, j] + tx * (1 - ty) * f[i + 1, j]
                       + (1 - tx) * ty * f[i, j + 1] + tx * ty * f[i + 1, j + 1])

    def to_csv(self, path) -> None:
        """Write rows 'p,u,re,im' (documented plotting interchange format)."""
        p_nodes, u_nodes = self.interior_nodes()
        pp, uu = np.meshgrid(p_nodes, u_nodes, indexing="ij")
        flat = np.column_stack([pp.ravel(), uu.ravel(),
                                self.values.real.ravel(), self.values.imag.ravel()])
        np.savetxt(path, flat, delimiter=",", header="p,u,re,im", comments="")


@dataclass(frozen=True)
class DiscreteGenerator:
    """Sparse A = W^{-1} C on interior nodes; C Hermitian PSD, W diagonal."""

    beta: float
    spec: GridSpec
    C: sp.csc_matrix
    w_diag: np.ndarray

    def apply(self, f: GridField) -> GridField:
        vec = f.values.ravel()
        out = (self.C @ vec) / self.w_diag
        return GridField(out.reshape(f.values.shape), f.spec)

    def weighted_inner(self, f: GridField, g: GridField) -> complex:
        return complex(np.vdot(f.values.ravel(), self.w_diag * g.values.ravel()))


def build_A(beta: float, spec: GridSpec) -> DiscreteGenerator:
    """Assemble the discrete generator (beta/2) B'B on the grid interior."""
    if not beta > 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    ip, iu = spec.n_p - 2, spec.n_u - 2
    u_eff = spec.u_nodes()[1:-1]
    eye_p = sp.identity(ip, format="csr")
    d_p = sp.diags([-np.ones(ip - 1), np.ones(ip - 1)], [-1, 1], format="csr") / (2 * spec.dp)
    d_u = sp.diags([-np.ones(iu - 1), np.ones(iu - 1)], [-1, 1], format="csr") / (2 * spec.du)
    b_op = (-1j * sp.kron(d_p, sp.diags(np.exp(-u_eff)), format="csr")
            + sp.identity(ip * iu, format="csr")
            + (1.0 / beta) * sp.kron(eye_p, d_u, format="csr"))
    w_diag = np.tile(np.exp(u_eff), ip) * spec.dp * spec.du
    w_mat = sp.diags(w_diag)
    c_mat = (0.5 * beta) * (b_op.conj().T @ (w_mat @ b_op))
    return DiscreteGenerator(beta=beta, spec=spec, C=c_mat.tocsc(), w_diag=w_diag)


def sample_kernel_field(spec: GridSpec, b: PhasePoint, beta: float) -> GridField:
    """The closed-form kernel <.|b> sampled on the grid interior."""
    p_nodes = spec.p_nodes()[1:-1]
    u_nodes = spec.u_nodes()[1:-1]
    pp, uu = np.meshgrid(p_nodes, u_nodes, indexing="ij")
    vals = overlap_array(pp, np.exp(uu), b.p, b.q, beta)
    return GridField(vals, spec)


def delta_surrogate(spec: GridSpec, source: PhasePoint, width_cells: float = 2.0) -> GridField:
    """Gaussian bump of width ~ 2 cells, normalized against the flat dp dq measure."""
    spec.require_margin(source)
    p_nodes = spec.p_nodes()[1:-1]
    u_nodes = spec.u_nodes()[1:-1]
    sp_, su_ = width_cells * spec.dp, width_cells * spec.du
    pp, uu = np.meshgrid(p_nodes, u_nodes, indexing="ij")
    g = np.exp(-0.5 * ((pp - source.p) / sp_) ** 2
               - 0.5 * ((uu - math.log(source.q)) / su_) ** 2)
    mass = np.sum(g * np.exp(uu)) * spec.dp * spec.du
    return GridField((g / mass).astype(complex), spec)


class _Evolver:
    """Crank-Nicolson stepper in diffusion time s = nu*t, with LU reuse.

    The first few steps use ds/8 (a Rannacher-style ramp) so the scheme's
    oscillatory high-frequency response cannot contaminate rough initial data.
    """

    def __init__(self, gen: DiscreteGenerator, ds: float, ramp_steps: int = 6):
        self.gen = gen
        self.ds = ds
        self.ramp_steps = ramp_steps
        self._cache: dict[float, tuple] = {}

    def _ops(self, ds: float):
        if ds not in self._cache:
            w_mat = sp.diags(self.gen.w_diag)
            plus = (w_mat + 0.5 * ds * self.gen.C).tocsc()
            minus = (w_mat - 0.5 * ds * self.gen.C).tocsr()
            self._cache[ds] = (spla.splu(plus), minus)
        return self._cache[ds]

    def run(self, vec: np.ndarray, s_targets: list[float]) -> dict[float, np.ndarray]:
        out = {}
        s = 0.0
        lu, minus = self._ops(self.ds / 8)
        for _ in range(self.ramp_steps):
            vec = lu.solve(minus @ vec)
            s += self.ds / 8
        for target in sorted(s_targets):
            n = max(0, int(round((target - s) / self.ds)))
            lu, minus = self._ops(self.ds)
            for _ in range(n):
                vec = lu.solve(minus @ vec)
            s += n * self.ds
            if abs(target - s) > 1e-9 and target > s:
                ds_last = target - s
                lu2, minus2 = self._ops(ds_last)
                vec = lu2.solve(minus2 @ vec)
                s = target
            out[target] = vec.copy()
        return out


def evolve(field: GridField, gen: DiscreteGenerator, nu: float, T: float,
           dt: float | None = None) -> GridField:
    """Integrate d psi/dt = -nu A psi for time T (A-stable Crank-Nicolson).

    The measure-weighted norm is non-increasing because A is PSD in that
    inner product.  A boundary-contamination warning is attached to the
    result when the outermost ring exceeds 1e-6 of the interior maximum.
    """
    if field.spec != gen.spec:
        raise ConfigError("field and generator live on different grids")
    if nu < 0:
        raise ParameterError("nu must be nonnegative")
    if nu == 0 or T == 0:
        return field
    dt = field.spec.dt if dt is None else dt
    if dt > gen.spec.stability_bound(nu) * (1 + 1e-12):
        raise ConfigError(
            f"dt = {dt} exceeds the accuracy bound {gen.spec.stability_bound(nu):.3g} "
            f"for nu = {nu}"
        )
    ds = nu * dt
    stepper = _Evolver(gen, ds)
    vec = stepper.run(field.values.ravel().astype(complex), [nu * T])[nu * T]
    out = GridField(vec.reshape(field.values.shape), field.spec, warnings=field.warnings)
    if out.boundary_ratio() > BOUNDARY_TOL:
        out = replace(out, warnings=out.warnings + (
            f"boundary contamination: ring/interior = {out.boundary_ratio():.2e}",))
    return out


_REFERENCE = PhasePoint(0.0, 1.0)


def default_grid(beta: float) -> GridSpec:
    """Calibrated boxes: slow kernel decay at small beta needs wider grids."""
    if beta >= 1.0:
        return GridSpec(-18.0, 18.0, -4.5, 4.5, 321, 201)
    if beta > 0.5:
        return GridSpec(-22.0, 22.0, -5.5, 5.5, 401, 257)
    return GridSpec(-28.0, 28.0, -7.0, 7.0, 501, 321)


def knu(beta: float, nu: float, T: float, spec: GridSpec | None = None,
        width_cells: float = 2.0, dt: float | None = None) -> float:
    """Self-consistent rescaling: 1 / (evolved delta surrogate at its source).

    For beta > 1/2 and nu*T large, K_nu approaches 2 pi <Q^{-1}>
    = 2 pi/(1 - 1/(2 beta)), the reciprocal of the reproducing-measure
    constant (4 pi at beta = 1).  For beta <= 1/2 it diverges with nu.
    """
    spec = default_grid(beta) if spec is None else spec
    gen = build_A(beta, spec)
    start = delta_surrogate(spec, _REFERENCE, width_cells)
    evolved = evolve(start, gen, nu, T, dt=dt)
    peak = evolved.value_at(_REFERENCE).real
    if peak <= 0:
        raise ConfigError("evolved surrogate lost positivity at the source; "
                          "grid too coarse or boundary too close")
    return 1.0 / peak


@dataclass(frozen=True)
class RescaledLimit:
    nu_schedule: tuple[float, ...]
    raw: tuple[complex, ...]          # evolved-delta values at the target label
    knu: tuple[float, ...]
    extrapolated: complex | None
    error_estimate: float
    flags: tuple[str, ...] = ()

    def rescaled(self) -> tuple[complex, ...]:
        return tuple(k * r for k, r in zip(self.knu, self.raw))


def projection_limit(a: PhasePoint, b: PhasePoint, beta: float,
                     nu_schedule, T: float = 1.0,
                     spec: GridSpec | None = None, dt: float | None = None,
                     width_cells: float = 2.0) -> RescaledLimit:
    """K_nu-rescaled evolution of a delta at b, read at a, extrapolated in 1/nu.

    One evolution pass serves the whole schedule (the semigroup depends on nu
    and t only through s = nu*t), with snapshots at each nu*T.  The affine
    1/nu fit is deliberately conservative; for beta > 1/2 the true approach
    is exponential in nu (spectral gap), for beta <= 1/2 it rests on the
    self-consistent rescaling conjecture and carries looser tolerances.
    """
    sched = tuple(float(x) for x in nu_schedule)
    if len(sched) < 3:
        raise ParameterError("need at least 3 nu values to extrapolate")
    if any(n2 <= n1 for n1, n2 in zip(sched, sched[1:])):
        raise ParameterError("nu schedule must be strictly increasing")
    spec = default_grid(beta) if spec is None else spec
    spec.require_margin(a)
    spec.require_margin(b)
    gen = build_A(beta, spec)
    start = delta_surrogate(spec, b, width_cells)
    base_dt = spec.stability_bound(max(sched)) if dt is None else dt
    ds = max(sched) * base_dt
    stepper = _Evolver(gen, ds)
    snaps = stepper.run(start.values.ravel().astype(complex), [n * T for n in sched])

    raw, ks = [], []
    shape = start.values.shape
    for n in sched:
        f = GridField(snaps[n * T].reshape(shape), spec)
        source_val = f.value_at(b).real
        if source_val <= 0:
            raise ConfigError(f"source value nonpositive at nu = {n}")
        ks.append(1.0 / source_val)
        raw.append(f.value_at(a))

    rescaled = np.array([k * r for k, r in zip(ks, raw)])
    diffs = np.abs(np.diff(rescaled))
    flags: tuple[str, ...] = ()
    if len(diffs) >= 2 and diffs[-1] > diffs[0] * 1.5:
        flags = ("non-monotone convergence; extrapolation withheld",)
        return RescaledLimit(sched, tuple(raw), tuple(ks), None,
                             float(diffs[-1]), flags)

    x = 1.0 / np.array(sched)
    design = np.vstack([np.ones_like(x), x]).T
    coef_re, res_re, *_ = np.linalg.lstsq(design, rescaled.real, rcond=None)
    coef_im, res_im, *_ = np.linalg.lstsq(design, rescaled.imag, rcond=None)
    extrapolated = complex(coef_re[0], coef_im[0])
    fit_rms = math.sqrt((float(res_re[0]) if res_re.size else 0.0)
                        + (float(res_im[0]) if res_im.size else 0.0)) / math.sqrt(len(sched))
    err = max(fit_rms, abs(extrapolated - rescaled[-1]) / 2.0)
    return RescaledLimit(sched, tuple(raw), tuple(ks), extrapolated, err, flags)


# -- exactly solvable one-dimensional model ---------------------------------


def toy_heat(x2: float, x1: float, nu: float, T: float) -> float:
    """Free heat kernel (2 pi nu T)^{-1/2} exp(-(x2-x1)^2 / (2 nu T))."""
    if nu <= 0 or T <= 0:
        raise ParameterError("nu and T must be positive")
    return math.exp(-((x2 - x1) ** 2) / (2 * nu * T)) / math.sqrt(2 * math.pi * nu * T)


def toy_selfconsistent(x2: float, x1: float, nu: float, T: float) -> float:
    """Self-consistently rescaled kernel: exactly exp(-(x2-x1)^2/(2 nu T)).

    Identical to sqrt(2 pi nu T) * toy_heat by construction; the two routes
    agreeing at machine precision is the 1-D statement of the rescaling rule.
    """
    return toy_heat(x2, x1, nu, T) / toy_heat(0.0, 0.0, nu, T)


def toy_heat_grid(x2: float, x1: float, nu: float, T: float,
                  dx: float = 1e-3, half_width: float = 8.0,
                  dt: float = 2e-3) -> float:
    """1-D Crank-Nicolson evolution of d psi/dt = (nu/2) psi'' read at x2.

    Fourth-order spatial stencil; the delta initial condition is realized by
    starting from the exact kernel at a tiny t0 (width 12 cells), after which
    a short geometric dt ramp protects the remaining high-frequency content.
    Relative accuracy ~1e-6 for |x2 - x1| within a few diffusion lengths.
    """
    if nu <= 0 or T <= 0:
        raise ParameterError("nu and T must be positive")
    x = np.arange(-half_width, half_width + dx / 2, dx) + x1
    n = len(x)
    t0 = (12 * dx) ** 2 / nu
    if t0 >= T / 4:
        raise ConfigError("dx too coarse for the requested nu*T")
    psi = np.array([toy_heat(xi, x1, nu, t0) for xi in x])

    stencil = np.array([-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12]) / dx**2
    offsets = (-2, -1, 0, 1, 2)

    def step(v: np.ndarray, dt_step: float) -> np.ndarray:
        c = 0.25 * nu * dt_step
        ab = np.zeros((5, n))
        for off, s_ in zip(offsets, stencil):
            ab[2 - off, :] -= c * s_
        ab[2, :] += 1.0
        rhs = v.copy()
        for off, s_ in zip(offsets, stencil):
            if off == 0:
                rhs += c * s_ * v
            elif off > 0:
                rhs[:-off] += c * s_ * v[off:]
            else:
                rhs[-off:] += c * s_ * v[:off]
        return solve_banded((2, 2), ab, rhs)

    t = t0
    for ramp_dt in (dt / 64, dt / 16, dt / 4):
        for _ in range(3):
            psi = step(psi, ramp_dt)
            t += ramp_dt
    n_steps = max(1, int(math.ceil((T - t) / dt)))
    dt_eff = (T - t) / n_steps
    for _ in range(n_steps):
        psi = step(psi, dt_eff)

    idx = (x2 - x1 + half_width) / dx
    i = int(np.clip(math.floor(idx), 0, n - 2))
    frac = idx - i
    return float((1 - frac) * psi[i] + frac * psi[i + 1])
