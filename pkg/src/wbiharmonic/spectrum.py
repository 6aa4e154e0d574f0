"""Mode-by-mode linearized eigenvalue problem around the bubble.

For spherical-harmonic degree k the radial coefficient X(s), s = r^q, solves

    T_k^2 X = mu K (1 + s^2)^{-4} X,   K = (M-4)(M-2)M(M+2),
    T_k X = -(X'' + (M-1)/s X' - lambda_k/(q^2 s^2) X).

On sigma = ln s with Y = s^beta X, beta = (M-4)/2, the measure s^{M-1} ds
disappears: T_k X = -s^{-beta-2}(Y'' + 2Y' - (beta(beta+2) + c)Y), c = lambda_k/q^2,
and the weight becomes K (2 cosh sigma)^{-4}. Eigenvalues come from the
symmetric pencil (L^T W L, diag(W K (2cosh)^-4)) on a uniform sigma grid.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh

from . import _numerics
from .closedform import RadialProfile
from .errors import GridError, NumericalError
from .grid import RadialField, TGrid, _phi_from_profile
from .params import DegeneracyReport, ProblemParams, degeneracy_check, derive, eigenvalue_lk

log = logging.getLogger(__name__)

__all__ = [
    "SGrid",
    "ModeSpectrum",
    "KernelCertificate",
    "InconsistentVerdict",
    "assemble_pencil",
    "mode_eigensolve",
    "kernel_certificate",
    "kernel_mode_bound",
    "mu3",
    "analytic_residual",
    "eigenvector_error",
    "candidate_y",
    "radial_eigenfield",
    "negative_count",
]


@dataclass(frozen=True)
class SGrid:
    """Uniform grid in sigma = ln s on [-sigma_max, sigma_max]."""

    sigma_max: float = 20.0
    n: int = 2001
    stencil: int = 4
    quadrature: str = "trapezoid"

    def __post_init__(self):
        if not self.sigma_max > 0:
            raise GridError(f"sigma_max must be positive, got {self.sigma_max}")
        if self.n < 1001 or self.n % 2 == 0:
            raise GridError(f"spectral grid needs odd n >= 1001, got {self.n}")
        if self.stencil not in _numerics.STENCILS:
            raise GridError(f"stencil order must be one of {sorted(_numerics.STENCILS)}")
        if self.quadrature not in _numerics.QUADRATURES:
            raise GridError(f"quadrature must be one of {_numerics.QUADRATURES}")

    @property
    def h(self) -> float:
        return 2.0 * self.sigma_max / (self.n - 1)

    @functools.cached_property
    def nodes(self) -> np.ndarray:
        s = -self.sigma_max + self.h * np.arange(self.n)
        s[(self.n - 1) // 2] = 0.0
        return s

    def meta(self) -> dict:
        return {"sigma_max": self.sigma_max, "n": self.n, "h": self.h,
                "stencil": self.stencil, "quadrature": self.quadrature}


class InconsistentVerdict(NumericalError):
    """Algebraic and spectral degeneracy verdicts disagree."""


@dataclass(frozen=True)
class ModeSpectrum:
    k: int
    lk: int
    eigenvalues: tuple
    eigenfields: np.ndarray = field(repr=False)  # columns are Y on the sigma grid
    residuals: tuple
    grid_meta: dict
    params: ProblemParams
    lam: float = 1.0

    def report(self) -> dict:
        from fractions import Fraction
        a = self.params.alpha
        return {
            "params": {"N": self.params.N, "alpha": float(a),
                       "alpha_exact": str(a) if isinstance(a, Fraction) else None},
            "k": self.k,
            "lk": self.lk,
            "eigenvalues": list(self.eigenvalues),
            "residuals": list(self.residuals),
            "grid_meta": dict(self.grid_meta),
        }


def _sech4(x):
    # (2 cosh x)^{-4} without overflow
    a = np.abs(x)
    return np.exp(-4.0 * (a + np.log1p(np.exp(-2.0 * a))))


def assemble_pencil(params: ProblemParams, k: int, sgrid: SGrid, lam: float = 1.0):
    """Sparse symmetric (A_k, B) for mode k; B uses the bubble U_lam."""
    if k < 0:
        raise ValueError("mode index must be nonnegative")
    dc = derive(params)
    q, M = dc.q, dc.m_dim
    beta = (M - 4) / 2
    c = eigenvalue_lk(params.N, k) / q**2
    n, h = sgrid.n, sgrid.h
    d1 = _numerics.diff_matrix(n, h, sgrid.stencil, 1)
    d2 = _numerics.diff_matrix(n, h, sgrid.stencil, 2)
    lmat = (d2 + 2.0 * d1 - (beta * (beta + 2.0) + c) * sp.identity(n, format="csr")).tocsr()
    w = _numerics.quad_weights(n, h, sgrid.quadrature)
    A = (lmat.T @ sp.diags(w) @ lmat).tocsc()
    A = ((A + A.T) * 0.5).tocsc()
    kw = (M - 4) * (M - 2) * M * (M + 2)
    bdiag = w * kw * _sech4(sgrid.nodes + q * math.log(lam))
    B = sp.diags(bdiag, format="csc")
    return A, B


def negative_count(mat, bandwidth: int) -> int:
    """Number of negative eigenvalues of a symmetric banded matrix.

    Sylvester inertia from an unpivoted banded LDL^T; exact zero pivots are
    nudged to the smallest normal number.
    """
    n = mat.shape[0]
    mat = sp.csr_matrix(mat)
    low = [mat.diagonal(-o).tolist() for o in range(bandwidth + 1)]
    lo = [None] + [[0.0] * n for _ in range(bandwidth)]
    d = [0.0] * n
    neg = 0
    tiny = np.finfo(float).tiny
    for j in range(n):
        s = low[0][j]
        for o in range(1, min(bandwidth, j) + 1):
            lj = lo[o][j]
            s -= lj * lj * d[j - o]
        if s == 0.0:
            s = tiny
        d[j] = s
        if s < 0:
            neg += 1
        for o in range(1, bandwidth + 1):
            i = j + o
            if i >= n:
                break
            acc = low[o][j]
            for r in range(1, bandwidth - o + 1):
                if j - r < 0:
                    break
                acc -= lo[o + r][i] * lo[r][j] * d[j - r]
            lo[o][i] = acc / s
    return neg


def _bandwidth(sgrid: SGrid) -> int:
    return 2 * _numerics.STENCILS[sgrid.stencil][2][0]


def _count_below(A, B, x, bw) -> int:
    return negative_count(A - x * B, bw)


def mode_eigensolve(params: ProblemParams, k: int, sgrid: Optional[SGrid] = None, count: int = 3,
                    lam: float = 1.0, max_extra: int = 4) -> ModeSpectrum:
    """The `count` smallest eigenvalues of the mode-k pencil.

    Shift-invert Lanczos at zero, then an inertia count confirms that no
    eigenvalue below the largest returned one was skipped; if one was, the
    solve is repeated with more vectors.
    """
    sgrid = sgrid or SGrid()
    if count < 1:
        raise ValueError("count must be positive")
    A, B = assemble_pencil(params, k, sgrid, lam)
    bw = _bandwidth(sgrid)
    bdiag = B.diagonal()
    if np.any(bdiag < 0) or not np.any(bdiag > 0):
        raise NumericalError("weight matrix is not positive semidefinite", k=k)
    if negative_count(A, bw) != 0:
        raise NumericalError("energy matrix is not positive definite", k=k)
    v0 = np.ones(sgrid.n)
    want = count
    for attempt in range(max_extra + 1):
        try:
            vals, vecs = eigsh(A, k=want, M=B, sigma=0.0, which="LM", v0=v0)
        except ArpackNoConvergence as exc:
            raise NumericalError(f"eigensolver did not converge for mode {k}", k=k, requested=want,
                                 converged=len(exc.eigenvalues)) from exc
        except ArpackError as exc:
            raise NumericalError(f"eigensolver failed for mode {k}: {exc}", k=k, requested=want) from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        top = vals[count - 1]
        below = _count_below(A, B, top * (1 + 1e-9) + 1e-12, bw)
        if below <= count:
            break
        log.info("mode %d: inertia count %d exceeds %d returned eigenvalues, retrying", k, below, count)
        want = below + 1
    else:
        raise NumericalError(f"could not isolate the {count} lowest eigenvalues of mode {k}",
                             k=k, inertia=below)
    vals, vecs = vals[:count], vecs[:, :count]
    for j in range(count):
        if vecs[np.argmax(np.abs(vecs[:, j])), j] < 0:
            vecs[:, j] = -vecs[:, j]
    res = []
    for j in range(count):
        av = A @ vecs[:, j]
        res.append(float(np.linalg.norm(av - vals[j] * (B @ vecs[:, j])) / np.linalg.norm(av)))
    return ModeSpectrum(k=k, lk=eigenvalue_lk(params.N, k), eigenvalues=tuple(float(v) for v in vals),
                        eigenfields=vecs, residuals=tuple(res), grid_meta=sgrid.meta(), params=params,
                        lam=float(lam))


def candidate_y(params: ProblemParams, profile: RadialProfile, sgrid: SGrid) -> np.ndarray:
    """Y(sigma) = s^beta X(s) of a closed-form radial function, X read in r = s^{1/q}."""
    q = derive(params).q
    return _phi_from_profile(profile, -np.asarray(sgrid.nodes) / q)


def analytic_residual(params: ProblemParams, k: int, profile: RadialProfile, mu: float,
                      sgrid: Optional[SGrid] = None) -> float:
    """Scaled residual |A y - mu B y| / |A y| of a projected candidate eigenfunction.

    Rows whose stencil reaches the zero padding are left out: a candidate
    that has not decayed at the ends would otherwise be judged on the
    truncation rather than on the equation.
    """
    sgrid = sgrid or SGrid()
    A, B = assemble_pencil(params, k, sgrid)
    y = candidate_y(params, profile, sgrid)
    keep = slice(2 * _bandwidth(sgrid), sgrid.n - 2 * _bandwidth(sgrid))
    ay = (A @ y)[keep]
    return float(np.linalg.norm(ay - mu * (B @ y)[keep]) / np.linalg.norm(ay))


def eigenvector_error(vec: np.ndarray, ref: np.ndarray, sgrid: SGrid) -> float:
    """Relative L2(d sigma) distance from vec to the best multiple of ref."""
    w = _numerics.quad_weights(sgrid.n, sgrid.h, sgrid.quadrature)
    c = np.dot(w, vec * ref) / np.dot(w, ref * ref)
    diff = vec - c * ref
    return float(math.sqrt(np.dot(w, diff * diff) / np.dot(w, vec * vec)))


def kernel_mode_bound(params: ProblemParams) -> int:
    """Smallest k >= 1 with lambda_k/q^2 > M-1; no mode beyond it can hold the kernel."""
    dc = derive(params)
    k = 1
    while eigenvalue_lk(params.N, k) / dc.q**2 <= dc.m_dim - 1:
        k += 1
    return k


@dataclass(frozen=True)
class KernelCertificate:
    algebraic: DegeneracyReport
    spectral_modes: tuple  # modes k >= 1 hosting 2**-1
    radial_hit: bool  # mode 0 hosts 2**-1
    kernel_dim: int
    k_max: int
    gap: float  # distance of 2**-1 to the spectra of modes k >= 1 without a hit
    residuals: dict
    spectra: tuple = field(repr=False)

    @property
    def degenerate(self) -> bool:
        return self.algebraic.degenerate


def kernel_certificate(params: ProblemParams, sgrid: Optional[SGrid] = None, k_max: Optional[int] = None,
                       count: int = 3, tol: float = 1e-3) -> KernelCertificate:
    """Check the algebraic degeneracy verdict against the computed mode spectra."""
    sgrid = sgrid or SGrid()
    dc = derive(params)
    target = dc.two_star - 1
    alg = degeneracy_check(params)
    if k_max is None:
        k_max = kernel_mode_bound(params) + 2
        log.info("kernel certificate scans k = 0..%d (lambda_k/q^2 > M-1 from k = %d on)",
                 k_max, k_max - 2)
    spectra = tuple(mode_eigensolve(params, k, sgrid, count=count) for k in range(k_max + 1))
    radial_hit = any(abs(mu - target) <= tol for mu in spectra[0].eigenvalues)
    hits, gap = [], math.inf
    for ms in spectra[1:]:
        dist = min(abs(mu - target) for mu in ms.eigenvalues)
        if dist <= tol:
            hits.append(ms.k)
        else:
            gap = min(gap, dist)
    residuals = {"Z0": analytic_residual(params, 0, RadialProfile.kernel_z0(params), target, sgrid)}
    if alg.degenerate:
        residuals["Zk"] = analytic_residual(params, alg.k_mode, RadialProfile.kernel_zk(params, alg.k_mode),
                                            target, sgrid)
    expected = [alg.k_mode] if alg.degenerate and alg.k_mode <= k_max else []
    if not radial_hit or hits != expected:
        raise InconsistentVerdict(
            "algebraic and spectral kernel verdicts disagree",
            algebraic=alg, spectral_modes=hits, radial_hit=radial_hit,
            spectra=[ms.report() for ms in spectra])
    return KernelCertificate(algebraic=alg, spectral_modes=tuple(hits), radial_hit=radial_hit,
                             kernel_dim=alg.kernel_dim, k_max=k_max, gap=gap, residuals=residuals,
                             spectra=spectra)


def mu3(params: ProblemParams, sgrid: Optional[SGrid] = None, modes: Optional[Sequence[int]] = None,
        count: int = 3, sep: float = 1e-6) -> float:
    """Smallest computed eigenvalue strictly above 2**-1 over the given modes.

    By default all modes 0..k_max of the kernel certificate are scanned;
    modes=(0,) restricts to radial functions.
    """
    sgrid = sgrid or SGrid()
    target = derive(params).two_star - 1
    if modes is None:
        modes = range(kernel_mode_bound(params) + 3)
    best = math.inf
    for k in modes:
        ms = mode_eigensolve(params, k, sgrid, count=count)
        above = [mu for mu in ms.eigenvalues if mu > target * (1 + sep)]
        if above:
            best = min(best, above[0])
    if not math.isfinite(best):
        raise NumericalError("no eigenvalue above 2**-1 among the computed ones; raise count",
                             modes=list(modes), count=count)
    return best


def radial_eigenfield(params: ProblemParams, index: int, tgrid: TGrid, sgrid: Optional[SGrid] = None,
                      lam: float = 1.0) -> RadialField:
    """The index-th (0-based) radial eigenfunction moved to the t-grid.

    phi(t) = Y(-q t); values outside the sigma range are set to zero.
    """
    sgrid = sgrid or SGrid()
    ms = mode_eigensolve(params, 0, sgrid, count=index + 1, lam=lam)
    y = ms.eigenfields[:, index]
    spline = CubicSpline(sgrid.nodes, y)
    sigma = -derive(params).q * np.asarray(tgrid.nodes)
    inside = np.abs(sigma) <= sgrid.sigma_max
    vals = np.where(inside, spline(np.clip(sigma, -sgrid.sigma_max, sgrid.sigma_max)), 0.0)
    return RadialField(tgrid, vals, params)
