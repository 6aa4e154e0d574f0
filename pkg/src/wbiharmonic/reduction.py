"""Finite-dimensional reduction for the radially perturbed problem.

The perturbed functional is

    J_eps[u] = 1/2 ||u||^2 - 1/p int (1 + eps h) u_+^p,

and near the bubble family its critical points are found as U_lam + omega
with omega orthogonal (in <.,.>_alpha) to dU_lam/dlam. For each lam a
bordered Newton iteration solves the projected equation; the reduced energy
Gamma(lam) = J_eps[U_lam + omega] is then extremized in lam.

All computations use the t-grid energy matrix, so the discrete problem is
the exact gradient system of the discrete functional.
"""

from __future__ import annotations

import csv
import functools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence

from . import _numerics
from .closedform import ef_phi, j0_bubble
from .errors import NumericalError, ParameterError, RegimeWarning
from .grid import RadialField, TGrid, operators, project_dlambda
from .params import ProblemParams, degeneracy_check

log = logging.getLogger(__name__)

__all__ = [
    "PerturbationH",
    "ReductionConfig",
    "Corrector",
    "ReductionResult",
    "NewtonDivergence",
    "NearSingularError",
    "NoInteriorExtremum",
    "NaturalConstraintViolation",
    "h_functional",
    "j_eps",
    "j_eps_gradient",
    "j_eps_hessian",
    "dual_norm",
    "solve_omega",
    "gamma_curve",
    "find_critical",
    "eps_sweep",
    "estimate_eps0",
    "first_order_corrector",
]


class NewtonDivergence(NumericalError):
    pass


class NearSingularError(NumericalError):
    pass


class NoInteriorExtremum(NumericalError):
    pass


class NaturalConstraintViolation(NumericalError):
    pass


@dataclass(frozen=True)
class PerturbationH:
    """Radial perturbation h, described as a function of t = -ln r.

    kind "gauss": h = a exp(-((t - t0)/w)^2).
    kind "csv": cubic interpolation through (nodes, values), zero outside.
    """

    kind: str
    amplitude: float = 0.0
    center: float = 0.0
    width: float = 1.0
    nodes: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind == "gauss":
            if not self.width > 0:
                raise ParameterError(f"Gaussian width must be positive, got {self.width}")
        elif self.kind == "csv":
            if len(self.nodes) < 4 or len(self.nodes) != len(self.values):
                raise ParameterError("sampled h needs at least 4 (t, h) pairs")
            if np.any(np.diff(self.nodes) <= 0):
                raise ParameterError("sampled h: t values must be strictly increasing")
            peak = max(abs(v) for v in self.values)
            if max(abs(self.values[0]), abs(self.values[-1])) > 1e-6 * peak:
                raise ParameterError("sampled h must vanish at both ends (|h| <= 1e-6 max|h|)")
        else:
            raise ParameterError(f"unknown perturbation kind {self.kind!r}")

    @classmethod
    def gaussian(cls, a: float, t0: float = 0.0, w: float = 1.0):
        return cls("gauss", amplitude=float(a), center=float(t0), width=float(w))

    @classmethod
    def sampled(cls, nodes, values):
        return cls("csv", nodes=tuple(float(x) for x in nodes), values=tuple(float(x) for x in values))

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows or "t" not in rows[0] or "h" not in rows[0]:
            raise ParameterError(f"{path}: expected a CSV with columns t,h")
        return cls.sampled([r["t"] for r in rows], [r["h"] for r in rows])

    @classmethod
    def parse(cls, spec: str):
        """'gauss:a,t0,w' or 'csv:path'."""
        kind, _, rest = spec.partition(":")
        if kind == "gauss":
            try:
                a, t0, w = (float(x) for x in rest.split(","))
            except ValueError:
                raise ParameterError(f"expected gauss:a,t0,w, got {spec!r}") from None
            return cls.gaussian(a, t0, w)
        if kind == "csv" and rest:
            return cls.from_csv(rest)
        raise ParameterError(f"perturbation spec must be gauss:a,t0,w or csv:path, got {spec!r}")

    @functools.cached_property
    def _spline(self):
        return CubicSpline(np.array(self.nodes), np.array(self.values))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "gauss":
            return self.amplitude * np.exp(-(((t - self.center) / self.width) ** 2))
        inside = (t >= self.nodes[0]) & (t <= self.nodes[-1])
        return np.where(inside, self._spline(np.clip(t, self.nodes[0], self.nodes[-1])), 0.0)

    @property
    def bound(self) -> float:
        if self.kind == "gauss":
            return abs(self.amplitude)
        fine = np.linspace(self.nodes[0], self.nodes[-1], 20 * len(self.nodes))
        return float(np.max(np.abs(self(fine))))

    def describe(self) -> dict:
        if self.kind == "gauss":
            return {"kind": "gauss", "amplitude": self.amplitude, "center": self.center, "width": self.width}
        return {"kind": "csv", "n_nodes": len(self.nodes), "bound": self.bound}


@dataclass(frozen=True)
class ReductionConfig:
    newton_tol: float = 1e-10  # projected residual, relative to ||U_1||
    max_iter: int = 25
    divergence_steps: int = 3
    eps0: float = 0.5
    lambda_min: float = 1e-3
    lambda_max: float = 1e3
    n_lambda: int = 61
    tail_tol: float = 1e-4  # relative to |J_0[U_1]|
    golden_tol: float = 1e-6  # in ln lambda
    residual_tol: float = 1e-6  # natural-constraint check, relative to ||U_1||
    singular_tol: float = 1e-8
    check_singular: bool = True
    negativity_tol: float = 0.01

    def lambda_grid(self) -> np.ndarray:
        return np.logspace(math.log10(self.lambda_min), math.log10(self.lambda_max), self.n_lambda)


def _ops(u: RadialField):
    return operators(u.grid, u.params)


def _hvals(h: PerturbationH, u: RadialField) -> np.ndarray:
    return h(u.grid.nodes)


def h_functional(u: RadialField, h: PerturbationH) -> float:
    """H[u] = (omega/p) int h(e^{-t}) phi_+^p dt."""
    ops = _ops(u)
    p = ops.dc.two_star
    plus = np.maximum(u.values, 0.0)
    return float(ops.omega / p * np.dot(ops.weights, _hvals(h, u) * plus**p))


def _regime(h, eps):
    if abs(eps) * h.bound >= 1:
        warnings.warn(f"|eps| * sup|h| = {abs(eps) * h.bound:.3g} >= 1: 1 + eps h may change sign",
                      RegimeWarning, stacklevel=3)


def j_eps(u: RadialField, h: PerturbationH, eps: float) -> float:
    _regime(h, eps)
    ops = _ops(u)
    p = ops.dc.two_star
    plus = np.maximum(u.values, 0.0)
    lu = ops.lmat @ u.values  # omega sum w (L phi)^2 is far better conditioned than phi^T A phi
    quad = 0.5 * ops.omega * float(np.dot(ops.weights, lu * lu))
    pot = ops.omega / p * float(np.dot(ops.weights, (1.0 + eps * _hvals(h, u)) * plus**p))
    return quad - pot


def j_eps_gradient(u: RadialField, h: PerturbationH, eps: float) -> np.ndarray:
    """Gradient of the discrete J_eps with respect to the nodal values."""
    ops = _ops(u)
    p = ops.dc.two_star
    plus = np.maximum(u.values, 0.0)
    return ops.gram @ u.values - ops.omega * ops.weights * (1.0 + eps * _hvals(h, u)) * plus ** (p - 1)


def j_eps_hessian(u: RadialField, h: PerturbationH, eps: float) -> sp.csc_matrix:
    ops = _ops(u)
    p = ops.dc.two_star
    plus = np.maximum(u.values, 0.0)
    diag = (p - 1) * ops.omega * ops.weights * (1.0 + eps * _hvals(h, u)) * plus ** (p - 2)
    return (ops.gram - sp.diags(diag)).tocsc()


def dual_norm(g: np.ndarray, grid: TGrid, params: ProblemParams) -> float:
    """sqrt(g^T A^{-1} g): norm of a gradient as a functional on the energy space."""
    y = operators(grid, params).gram_lu.solve(g)
    return math.sqrt(max(float(g @ y), 0.0))


def _projected_dual(g, az, z, lu):
    c = float(z @ g) / float(z @ az)
    pg = g - c * az
    y = lu.solve(pg)
    return math.sqrt(max(float(pg @ y), 0.0))


def _bordered_solve(kmat, rhs):
    # Banded block plus one dense border row/column: natural order without
    # pivoting factors it with no fill-in; one refinement step, and a
    # pivoted solve if anything went wrong.
    try:
        lu = spla.splu(kmat, permc_spec="NATURAL", diag_pivot_thresh=0.0)
        x = lu.solve(rhs)
        x += lu.solve(rhs - kmat @ x)
        if np.all(np.isfinite(x)):
            return x
    except RuntimeError:
        pass
    return spla.spsolve(kmat, rhs)


@dataclass(frozen=True)
class Corrector:
    lam: float
    epsilon: float
    omega: RadialField
    multiplier: float
    iterations: int
    history: tuple
    constraint: float  # |<omega, dU/dlam>| / (||omega|| ||dU/dlam||), 0 when omega = 0

    @property
    def u(self) -> RadialField:
        return RadialField(self.omega.grid, ef_phi(self.omega.params, self.omega.grid.nodes, self.lam),
                           self.omega.params) + self.omega


def _check_singular(hess, gram, z, cfg: ReductionConfig, lam):
    # smallest |nu| of H v = nu A v away from the constrained direction
    try:
        vals, vecs = spla.eigsh(hess, k=3, M=gram, sigma=1e-3, which="LM", v0=np.ones(hess.shape[0]))
    except (ArpackNoConvergence, ArpackError) as exc:
        log.warning("singularity check skipped at lambda=%g: %s", lam, exc)
        return
    az = gram @ z
    zz = float(z @ az)
    for nu, v in zip(vals, vecs.T):
        vv = float(v @ (gram @ v))
        cos = abs(float(v @ az)) / math.sqrt(vv * zz)
        if cos < 0.9 and abs(nu) < cfg.singular_tol:
            raise NearSingularError(f"linearized operator nearly singular at lambda={lam:g} (nu={nu:.3g})",
                                    lam=lam, eigenvalue=float(nu))


def solve_omega(lam: float, eps: float, h: PerturbationH, params: ProblemParams,
                grid: Optional[TGrid] = None, config: Optional[ReductionConfig] = None,
                omega0: Optional[np.ndarray] = None) -> Corrector:
    """Corrector omega(lam, eps) orthogonal to dU_lam/dlam.

    Newton on the bordered system [[J'', A z], [z^T A, 0]] in (omega, multiplier).
    """
    grid = grid or TGrid()
    cfg = config or ReductionConfig()
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    if abs(eps) > cfg.eps0:
        raise ParameterError(f"|eps| = {abs(eps)} exceeds the configured eps0 = {cfg.eps0}")
    _regime(h, eps)
    ops = operators(grid, params)
    n = grid.n
    ubub = ef_phi(params, grid.nodes, lam)
    z = project_dlambda(params, grid, lam).values
    az = ops.gram @ z
    u_norm = math.sqrt(float(ubub @ (ops.gram @ ubub)))
    omega = np.zeros(n) if omega0 is None else np.array(omega0, dtype=float)
    mult = 0.0
    history = []
    rises = 0
    for it in range(cfg.max_iter + 1):
        u = RadialField(grid, ubub + omega, params)
        g = j_eps_gradient(u, h, eps)
        pres = _projected_dual(g, az, z, ops.gram_lu)
        history.append(pres / u_norm)
        if pres <= cfg.newton_tol * u_norm:
            break
        if len(history) > 1 and history[-1] > history[-2]:
            rises += 1
            if rises >= cfg.divergence_steps:
                raise NewtonDivergence(f"Newton diverging at lambda={lam:g}, eps={eps:g}",
                                       history=list(history), lam=lam, eps=eps)
        else:
            rises = 0
        if it == cfg.max_iter:
            raise NewtonDivergence(f"Newton did not converge in {cfg.max_iter} steps at lambda={lam:g}",
                                   history=list(history), lam=lam, eps=eps)
        hess = j_eps_hessian(u, h, eps)
        if it == 0 and cfg.check_singular:
            _check_singular(hess, ops.gram, z, cfg, lam)
        border = sp.csc_matrix(az.reshape(-1, 1))
        kmat = sp.bmat([[hess, border], [border.T, None]], format="csc")
        rhs = -np.concatenate([g + mult * az, [float(az @ omega)]])
        step = _bordered_solve(kmat, rhs)
        if not np.all(np.isfinite(step)):
            raise NearSingularError(f"bordered system singular at lambda={lam:g}", lam=lam, history=list(history))
        omega = omega + step[:n]
        mult += float(step[n])
    w = RadialField(grid, omega, params)
    on = math.sqrt(float(omega @ (ops.gram @ omega)))
    zn = math.sqrt(float(z @ az))
    constraint = abs(float(omega @ az)) / (on * zn) if on > 0 else 0.0
    return Corrector(lam=float(lam), epsilon=float(eps), omega=w, multiplier=mult,
                     iterations=it, history=tuple(history), constraint=constraint)


def _gamma(c: Corrector, h, eps) -> float:
    return j_eps(c.u, h, eps)


def gamma_curve(eps: float, h: PerturbationH, params: ProblemParams, lambda_grid: Optional[Sequence[float]] = None,
                grid: Optional[TGrid] = None, config: Optional[ReductionConfig] = None) -> list:
    """[(lam, Gamma_eps(lam))]; a failed corrector solve leaves (lam, None) in its place."""
    cfg = config or ReductionConfig()
    grid = grid or TGrid()
    lams = cfg.lambda_grid() if lambda_grid is None else lambda_grid
    out = []
    for lam in lams:
        try:
            c = solve_omega(float(lam), eps, h, params, grid, cfg)
            out.append((float(lam), _gamma(c, h, eps)))
        except NumericalError as exc:
            warnings.warn(f"corrector failed at lambda={lam:g}: {exc}", RuntimeWarning, stacklevel=2)
            out.append((float(lam), None))
    return out


@dataclass(frozen=True)
class ReductionResult:
    epsilon: float
    lambda_eps: float
    omega: RadialField = field(repr=False)
    omega_norm: float
    residual: float  # dual norm of the full gradient at u_eps, relative to ||U_1||
    gamma_samples: list = field(repr=False)
    newton_iterations: int
    multiplier: float = 0.0
    extremum: str = ""
    min_value: float = 0.0  # min of u_eps over the grid, relative to max
    negativity_fraction: float = 0.0
    constraint: float = 0.0

    def report(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "lambda_eps": self.lambda_eps,
            "omega_norm": self.omega_norm,
            "residual": self.residual,
            "gamma_samples": [[lam, g] for lam, g in self.gamma_samples],
            "newton_iterations": self.newton_iterations,
            "multiplier": self.multiplier,
            "extremum": self.extremum,
            "constraint": self.constraint,
            "negativity_fraction": self.negativity_fraction,
        }


def find_critical(eps: float, h: PerturbationH, params: ProblemParams, grid: Optional[TGrid] = None,
                  config: Optional[ReductionConfig] = None) -> ReductionResult:
    """Critical point of the reduced energy, then the full-gradient check at U_lam + omega."""
    if eps == 0:
        raise ParameterError("find_critical needs eps != 0 (every lambda is critical at eps = 0)")
    cfg = config or ReductionConfig()
    grid = grid or TGrid()
    if degeneracy_check(params).degenerate:
        log.warning("(N, alpha) = (%d, %s) is degenerate: the result is critical only among radial functions",
                    params.N, params.alpha)
    j0 = j0_bubble(params)
    samples = gamma_curve(eps, h, params, grid=grid, config=cfg)
    for lam, g in (samples[0], samples[-1]):
        if g is not None and abs(g - j0) >= cfg.tail_tol * abs(j0):
            warnings.warn(f"Gamma at lambda={lam:g} differs from J_0[U_1] by {abs(g - j0) / abs(j0):.2e} "
                          f"(relative); widen the lambda grid", RegimeWarning, stacklevel=2)
    gam = np.array([np.nan if g is None else g for _, g in samples])
    dev = np.abs(gam - j0)
    best, kind = None, ""
    for i in np.argsort(-np.nan_to_num(dev, nan=-1.0)):
        if i == 0 or i == len(gam) - 1 or not np.all(np.isfinite(gam[i - 1:i + 2])):
            continue
        if gam[i] >= gam[i - 1] and gam[i] >= gam[i + 1]:
            best, kind = int(i), "max"
        elif gam[i] <= gam[i - 1] and gam[i] <= gam[i + 1]:
            best, kind = int(i), "min"
        if best is not None:
            break
    # a curve flat to rounding (h = 0, say) has no meaningful extremum
    spread = float(np.nanmax(gam) - np.nanmin(gam)) if np.any(np.isfinite(gam)) else 0.0
    if best is None or spread <= 1e-12 * abs(j0):
        raise NoInteriorExtremum("Gamma_eps has no interior extremum on the lambda grid",
                                 gamma_samples=samples)
    sign = 1.0 if kind == "min" else -1.0
    lams = np.array([lam for lam, _ in samples])

    def objective(s):
        return sign * _gamma(solve_omega(math.exp(s), eps, h, params, grid, cfg), h, eps)

    s_eps, _, _ = _numerics.golden_section(objective, math.log(lams[best - 1]), math.log(lams[best + 1]),
                                           tol=cfg.golden_tol)
    # The multiplier is proportional to dGamma/dlam in the discrete problem, so its sign
    # change pins lambda_eps far below the ~sqrt(eps_machine) floor of a value search.
    cache = {}

    def multiplier(s):
        if s not in cache:
            cache[s] = solve_omega(math.exp(s), eps, h, params, grid, cfg)
        return cache[s].multiplier

    step = max(10 * cfg.golden_tol, 1e-5)
    a, b = s_eps - step, s_eps + step
    if multiplier(a) * multiplier(b) < 0:
        s_eps = brentq(multiplier, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    lam_eps = math.exp(s_eps)
    corr = cache.get(s_eps) or solve_omega(lam_eps, eps, h, params, grid, cfg)
    u = corr.u
    ops = operators(grid, params)
    u1 = ef_phi(params, grid.nodes)
    u1_norm = math.sqrt(float(u1 @ (ops.gram @ u1)))
    residual = dual_norm(j_eps_gradient(u, h, eps), grid, params) / u1_norm
    if residual > cfg.residual_tol:
        raise NaturalConstraintViolation(
            f"full gradient at the reduced critical point is {residual:.3g} ||U_1|| > {cfg.residual_tol:g}",
            lambda_eps=lam_eps, residual=residual, multiplier=corr.multiplier, gamma_samples=samples)
    vals = u.values
    neg = float(np.mean(vals < 0))
    if neg > cfg.negativity_tol:
        log.warning("u_eps is negative on %.1f%% of the nodes", 100 * neg)
    omega_norm = math.sqrt(float(corr.omega.values @ (ops.gram @ corr.omega.values)))
    return ReductionResult(epsilon=float(eps), lambda_eps=lam_eps, omega=corr.omega, omega_norm=omega_norm,
                           residual=residual, gamma_samples=samples, newton_iterations=corr.iterations,
                           multiplier=corr.multiplier, extremum=kind,
                           min_value=float(np.min(vals) / np.max(vals)), negativity_fraction=neg,
                           constraint=corr.constraint)


def eps_sweep(eps_values: Sequence[float], h: PerturbationH, params: ProblemParams,
              grid: Optional[TGrid] = None, config: Optional[ReductionConfig] = None):
    """find_critical for each eps and the least-squares slope of log||omega|| against log|eps|."""
    results = [find_critical(e, h, params, grid, config) for e in eps_values]
    x = np.log(np.abs(np.asarray(eps_values, dtype=float)))
    y = np.log([r.omega_norm for r in results])
    slope = float(np.polyfit(x, y, 1)[0])
    return slope, results


def first_order_corrector(lam: float, h: PerturbationH, params: ProblemParams,
                          grid: Optional[TGrid] = None) -> np.ndarray:
    """omega_1 with J_0''[U_lam] omega_1 = H'[U_lam] on the constrained space.

    The first-order expansion omega(lam, eps) ~ eps omega_1.
    """
    grid = grid or TGrid()
    ops = operators(grid, params)
    ub = RadialField(grid, ef_phi(params, grid.nodes, lam), params)
    z = project_dlambda(params, grid, lam).values
    az = ops.gram @ z
    hess = j_eps_hessian(ub, h, 0.0)
    p = ops.dc.two_star
    dh = ops.omega * ops.weights * h(grid.nodes) * np.maximum(ub.values, 0.0) ** (p - 1)
    # J_eps' = J_0' - eps H', and J_0'[U_lam] is zero up to discretization
    border = sp.csc_matrix(az.reshape(-1, 1))
    kmat = sp.bmat([[hess, border], [border.T, None]], format="csc")
    sol = _bordered_solve(kmat, np.concatenate([dh, [0.0]]))
    return sol[:grid.n]


def estimate_eps0(h: PerturbationH, params: ProblemParams, lambda_grid: Optional[Sequence[float]] = None,
                  grid: Optional[TGrid] = None, config: Optional[ReductionConfig] = None, j_max: int = 12) -> float:
    """Largest eps = 2^-j for which the corrector converges from zero on the whole lambda grid."""
    cfg = config or ReductionConfig()
    base = ReductionConfig(**{**cfg.__dict__, "eps0": math.inf, "check_singular": False})
    lams = base.lambda_grid() if lambda_grid is None else lambda_grid
    for j in range(j_max + 1):
        eps = 2.0 ** -j
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RegimeWarning)
                for lam in lams:
                    solve_omega(float(lam), eps, h, params, grid, base)
        except NumericalError:
            continue
        log.info("eps0 estimate: %g", eps)
        return eps
    raise NumericalError(f"corrector fails for every eps >= 2^-{j_max}")
