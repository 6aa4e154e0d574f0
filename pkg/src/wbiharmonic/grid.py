"""Uniform grids in t = -ln r, sampled radial fields and the energy quadratic forms.

A radial u(r) is stored through phi(t) = r^kappa1 u(r). In this variable the
weighted energy, the critical norm and the inner product carry no singular
weights, so plain centered differences and trapezoid sums are enough.
"""

from __future__ import annotations

import csv
import functools
import io
import math
import warnings
from dataclasses import dataclass
from types import SimpleNamespace
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _numerics
from .closedform import Family, RadialProfile, log_abs_profile, omega_sphere
from .errors import GridError, ParameterError, TruncationWarning
from .params import ProblemParams, derive

__all__ = [
    "TGrid",
    "RadialField",
    "project",
    "project_dlambda",
    "zero_field",
    "hnorm_sq",
    "hnorm",
    "lstar_norm",
    "inner_alpha",
    "rayleigh_quotient",
    "NormEquivalence",
    "norm_equivalence_report",
    "operators",
    "write_field_csv",
    "read_field_csv",
    "smooth_test_fields",
]


@dataclass(frozen=True)
class TGrid:
    """Nodes t_i = -t_max + i h, i = 0..n-1, on a symmetric interval.

    `stencil` is the order of the centered differences (2 or 4) and
    `quadrature` the rule used in every integral.
    """

    t_max: float = 40.0
    n: int = 4001
    stencil: int = 4
    quadrature: str = "trapezoid"

    def __post_init__(self):
        if not (self.t_max > 0 and math.isfinite(self.t_max)):
            raise GridError(f"t_max must be positive, got {self.t_max}")
        if self.n < 201 or self.n % 2 == 0:
            raise GridError(f"n must be odd and >= 201, got {self.n}")
        if self.stencil not in _numerics.STENCILS:
            raise GridError(f"stencil order must be one of {sorted(_numerics.STENCILS)}, got {self.stencil}")
        if self.quadrature not in _numerics.QUADRATURES:
            raise GridError(f"quadrature must be one of {_numerics.QUADRATURES}, got {self.quadrature!r}")

    @property
    def h(self) -> float:
        return 2.0 * self.t_max / (self.n - 1)

    @functools.cached_property
    def nodes(self) -> np.ndarray:
        t = -self.t_max + self.h * np.arange(self.n)
        t[(self.n - 1) // 2] = 0.0
        t.flags.writeable = False
        return t

    @functools.cached_property
    def weights(self) -> np.ndarray:
        w = _numerics.quad_weights(self.n, self.h, self.quadrature)
        w.flags.writeable = False
        return w

    def meta(self) -> dict:
        return {"t_max": self.t_max, "n": self.n, "h": self.h,
                "stencil": self.stencil, "quadrature": self.quadrature}


class RadialField:
    """phi sampled on a TGrid, for a given parameter pair. Immutable."""

    __slots__ = ("grid", "values", "params")

    def __init__(self, grid: TGrid, values, params: ProblemParams):
        v = np.array(values, dtype=float)
        if v.shape != (grid.n,):
            raise GridError(f"expected {grid.n} values, got shape {v.shape}")
        v.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "params", params)

    def __setattr__(self, name, value):
        raise AttributeError("RadialField is immutable")

    def __repr__(self):
        return f"RadialField(N={self.params.N}, alpha={self.params.alpha}, n={self.grid.n}, t_max={self.grid.t_max})"

    def with_values(self, values) -> "RadialField":
        return RadialField(self.grid, values, self.params)

    def _check(self, other):
        if not isinstance(other, RadialField):
            return NotImplemented
        if other.grid != self.grid or other.params != self.params:
            raise GridError("fields live on different grids or parameter pairs")
        return other

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return self.with_values(self.values - other.values)

    def __mul__(self, c):
        if isinstance(c, RadialField):
            return NotImplemented
        return self.with_values(float(c) * self.values)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def boundary_ratio(self) -> float:
        peak = float(np.max(np.abs(self.values)))
        if peak == 0.0:
            return 0.0
        return max(abs(self.values[0]), abs(self.values[-1])) / peak

    def decays(self, decay_tol: float = 1e-8) -> bool:
        return self.boundary_ratio() <= decay_tol

    @property
    def r(self) -> np.ndarray:
        return np.exp(-self.grid.nodes)

    def u_values(self) -> np.ndarray:
        kappa1 = derive(self.params).kappa1
        with np.errstate(over="ignore"):
            return np.exp(kappa1 * self.grid.nodes) * self.values


@functools.lru_cache(maxsize=32)
def operators(grid: TGrid, params: ProblemParams) -> SimpleNamespace:
    """Difference matrices and the Gram matrix of the energy on a grid.

    L maps phi to -phi'' + 2A phi' + B phi, the t-image of -div(|x|^a grad u);
    gram = omega * L^T W L so that ||u||^2 = phi^T gram phi.
    """
    dc = derive(params)
    n, h, order = grid.n, grid.h, grid.stencil
    d1 = _numerics.diff_matrix(n, h, order, 1)
    d2 = _numerics.diff_matrix(n, h, order, 2)
    eye = sp.identity(n, format="csr")
    lmat = (-d2 + 2 * dc.a_const * d1 + dc.b_const * eye).tocsr()
    omega = omega_sphere(params.N)
    w = grid.weights
    gram = (omega * (lmat.T @ sp.diags(w) @ lmat)).tocsc()
    gram = ((gram + gram.T) * 0.5).tocsc()
    return SimpleNamespace(d1=d1, d2=d2, lmat=lmat, weights=w, omega=omega,
                           gram=gram, gram_lu=spla.splu(gram), dc=dc)


def _phi_from_profile(p: RadialProfile, t: np.ndarray) -> np.ndarray:
    dc = derive(p.params)
    if p.family is Family.CUSTOM:
        r = np.exp(-t)
        with np.errstate(over="ignore", invalid="ignore"):
            vals = np.exp(-dc.kappa1 * t) * np.asarray(p.func(r), dtype=float)
        return np.where(np.isfinite(vals), vals, 0.0)
    sign, logabs = log_abs_profile(p, -t)
    return sign * np.exp(logabs - dc.kappa1 * t)


def project(p: RadialProfile, g: TGrid) -> RadialField:
    """Sample phi_i = r_i^kappa1 u(r_i) with r_i = e^{-t_i}."""
    return RadialField(g, _phi_from_profile(p, np.asarray(g.nodes)), p.params)


def project_dlambda(params: ProblemParams, g: TGrid, lam: float = 1.0) -> RadialField:
    """d/dlam of the projected bubble U_lam, from phi_lam(t) = phi_1(t - ln lam)."""
    from .closedform import emden_fowler_profile, ef_phi

    m, nu, _ = emden_fowler_profile(params)
    t = np.asarray(g.nodes)
    s = t - math.log(lam)
    vals = -m * nu * np.tanh(nu * s) * ef_phi(params, t, lam) / lam
    return RadialField(g, vals, params)


def zero_field(g: TGrid, params: ProblemParams) -> RadialField:
    return RadialField(g, np.zeros(g.n), params)


def _warn_truncation(*fields):
    for f in fields:
        if not f.decays():
            warnings.warn(
                f"field does not decay at t = +-{f.grid.t_max} "
                f"(boundary/peak = {f.boundary_ratio():.3g}); truncation error likely",
                TruncationWarning, stacklevel=3)


def _same(f: RadialField, g: RadialField):
    if f.grid != g.grid or f.params != g.params:
        raise GridError("fields live on different grids or parameter pairs")


def apply_l(f: RadialField) -> np.ndarray:
    return operators(f.grid, f.params).lmat @ f.values


def hnorm_sq(f: RadialField) -> float:
    """||u||^2 = omega int (-phi'' + 2A phi' + B phi)^2 dt."""
    _warn_truncation(f)
    ops = operators(f.grid, f.params)
    v = ops.lmat @ f.values
    return float(ops.omega * np.dot(ops.weights, v * v))


def hnorm(f: RadialField) -> float:
    return math.sqrt(hnorm_sq(f))


def lstar_norm(f: RadialField) -> float:
    _warn_truncation(f)
    ops = operators(f.grid, f.params)
    p = ops.dc.two_star
    return float(ops.omega * np.dot(ops.weights, np.abs(f.values) ** p)) ** (1.0 / p)


def inner_alpha(f: RadialField, g: RadialField) -> float:
    _same(f, g)
    _warn_truncation(f, g)
    ops = operators(f.grid, f.params)
    return float(ops.omega * np.dot(ops.weights, (ops.lmat @ f.values) * (ops.lmat @ g.values)))


def rayleigh_quotient(f: RadialField) -> float:
    ls = lstar_norm(f)
    if ls == 0.0:
        raise ValueError("Rayleigh quotient of the zero field is undefined")
    return hnorm_sq(f) / ls**2


class NormEquivalence(NamedTuple):
    form_div: float
    form_lap: float
    ratio: float


def norm_equivalence_report(f: RadialField) -> NormEquivalence:
    """Compare int |div(|x|^a grad u)|^2 with int |x|^{2a} |Delta u|^2.

    Both are built from u_r, u_rr reconstructed from phi, phi', phi''.
    Writing u = r^{-k1} phi and d/dr = -e^t d/dt, the scaled derivatives are
    r^{k1+1} u_r = -(k1 phi + phi') and r^{k1+2} u_rr = phi'' + (2k1+1) phi' + k1(k1+1) phi.
    """
    pr = f.params
    if pr.N < 5 or not 0 < pr.a < 2:
        raise ParameterError(f"norm equivalence is stated for N >= 5, 0 < alpha < 2; got N={pr.N}, alpha={pr.alpha}")
    _warn_truncation(f)
    ops = operators(f.grid, pr)
    k1 = ops.dc.kappa1
    phi = f.values
    p1 = ops.d1 @ phi
    p2 = ops.d2 @ phi
    ur = -(k1 * phi + p1)
    urr = p2 + (2 * k1 + 1) * p1 + k1 * (k1 + 1) * phi
    div = urr + (pr.N - 1 + pr.a) * ur
    lap = urr + (pr.N - 1) * ur
    w = ops.weights * ops.omega
    form_div = float(np.dot(w, div * div))
    form_lap = float(np.dot(w, lap * lap))
    return NormEquivalence(form_div, form_lap, form_lap / form_div if form_div else math.inf)


def write_field_csv(f: RadialField, dest=None) -> str:
    """CSV with header t,phi,r,u; returns the text and writes it to `dest` if given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "phi", "r", "u"])
    u = f.u_values()
    for t, phi, r, uu in zip(f.grid.nodes, f.values, f.r, u):
        w.writerow([f"{t:.17g}", f"{phi:.17g}", f"{r:.17g}", f"{uu:.17g}"])
    text = buf.getvalue()
    if dest is not None:
        with open(dest, "w", newline="") as fh:
            fh.write(text)
    return text


def read_field_csv(path, params: ProblemParams, stencil: int = 4, quadrature: str = "trapezoid") -> RadialField:
    """Read a field dump back; the grid is rebuilt from the t column."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "t" not in rows[0] or "phi" not in rows[0]:
        raise GridError(f"{path}: expected a CSV with columns t,phi")
    t = np.array([float(r["t"]) for r in rows])
    phi = np.array([float(r["phi"]) for r in rows])
    g = TGrid(t_max=float(-t[0]), n=len(t), stencil=stencil, quadrature=quadrature)
    if abs(t[-1] - g.t_max) > 1e-9 * g.t_max or np.max(np.abs(t - g.nodes)) > 1e-9 * g.t_max:
        raise GridError(f"{path}: t column is not a symmetric uniform grid")
    return RadialField(g, phi, params)


def smooth_test_fields(g: TGrid, params: ProblemParams, count: int = 20, seed: int = 0,
                       support: float = 25.0) -> list:
    """Reproducible smooth fields: a few Gaussian bumps in t, all inside |t| < support."""
    rng = np.random.default_rng(seed)
    t = np.asarray(g.nodes)
    out = []
    for _ in range(count):
        vals = np.zeros(g.n)
        for _ in range(int(rng.integers(1, 4))):
            width = rng.uniform(0.5, 3.0)
            center = rng.uniform(-support + 4 * width, support - 4 * width)
            vals += rng.normal() * np.exp(-((t - center) / width) ** 2)
        out.append(RadialField(g, vals, params))
    return out
