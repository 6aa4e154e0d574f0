"""Distance to the bubble manifold, the Sobolev deficit and the stability ratio."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import _numerics
from .closedform import best_constant_radial, ef_phi
from .errors import NumericalError
from .grid import (RadialField, TGrid, hnorm_sq, inner_alpha, lstar_norm, operators,
                   project_dlambda)
from .params import ProblemParams, derive
from .spectrum import SGrid, mu3, radial_eigenfield

__all__ = [
    "ManifoldFit",
    "BracketError",
    "OnManifoldError",
    "dist_to_manifold",
    "deficit",
    "stability_ratio",
    "rho_prediction",
    "tangent_orthogonalize",
    "e3_field",
    "deficit_report",
    "demo_family",
]


class BracketError(NumericalError):
    """No interior maximum of the projection onto the bubble family."""


class OnManifoldError(ValueError):
    """The stability ratio is undefined for points of the manifold."""


@dataclass(frozen=True)
class ManifoldFit:
    c_star: float
    lambda_star: float
    dist: float
    converged: bool
    iterations: int


def _bubble_values(params, grid, log_lam):
    return ef_phi(params, grid.nodes, math.exp(log_lam))


def dist_to_manifold(u: RadialField, log_lambda_max: float = 10.0, n_scan: int = 64,
                     tol: float = 1e-8) -> ManifoldFit:
    """Best approximation of u by c U_lam in the energy norm.

    For fixed lam the optimal c is <u, U_lam>/||U_lam||^2, which leaves a
    one-dimensional search in ln lam: a coarse scan locates the bracket and
    golden-section refines it.
    """
    ops = operators(u.grid, u.params)
    uu = float(u.values @ (ops.gram @ u.values))
    if uu == 0.0:
        raise ValueError("distance of the zero field to the manifold is trivial; u must be nonzero")
    gu = ops.gram @ u.values

    def stats(s):
        b = _bubble_values(u.params, u.grid, s)
        return float(gu @ b), float(b @ (ops.gram @ b)), b

    def neg_score(s):
        ub, bb, _ = stats(s)
        return -ub * ub / bb

    def slope(s):
        # proportional to d/ds of <u,U_s>^2/||U_s||^2, free of the squaring cancellation
        ub, bb, b = stats(s)
        db = math.exp(s) * project_dlambda(u.params, u.grid, math.exp(s)).values
        return float(gu @ db) * bb - ub * float(b @ (ops.gram @ db))

    grid_s = np.linspace(-log_lambda_max, log_lambda_max, n_scan)
    scores = np.array([-neg_score(s) for s in grid_s])
    i = int(np.argmax(scores))
    if i == 0 or i == n_scan - 1:
        raise BracketError("projection onto the bubble family peaks at the edge of the scan",
                           log_lambda=grid_s.tolist(), score=scores.tolist())
    lo, hi = grid_s[i - 1], grid_s[i + 1]
    s_best, _, iters = _numerics.golden_section(neg_score, lo, hi, tol=tol)
    width = (hi - lo) * _numerics.INVPHI ** iters
    # golden-section on a quadratic maximum resolves s only to ~sqrt(eps);
    # finish on the sign change of the derivative
    a, b_ = max(lo, s_best - 1e-3), min(hi, s_best + 1e-3)
    fa, fb = slope(a), slope(b_)
    if fa * fb < 0:
        s_best = brentq(slope, a, b_, xtol=1e-13, rtol=4 * np.finfo(float).eps)
    ub, bb, b = stats(s_best)
    c = ub / bb
    r = u.values - c * b
    dist = math.sqrt(max(float(r @ (ops.gram @ r)), 0.0))
    return ManifoldFit(c_star=c, lambda_star=math.exp(s_best), dist=dist,
                       converged=bool(width <= 2 * tol), iterations=iters)


def deficit(u: RadialField) -> float:
    """||u||^2 - S^rad ||u||_*^2."""
    return hnorm_sq(u) - best_constant_radial(u.params) * lstar_norm(u) ** 2


def stability_ratio(u: RadialField, fit: Optional[ManifoldFit] = None) -> float:
    fit = fit or dist_to_manifold(u)
    scale = math.sqrt(hnorm_sq(u))
    if fit.dist <= 1e-8 * scale:
        raise OnManifoldError(f"u lies on the manifold (dist/||u|| = {fit.dist / scale:.3g})")
    return deficit(u) / fit.dist**2


def rho_prediction(params: ProblemParams, sgrid: Optional[SGrid] = None) -> float:
    """1 - (2**-1)/mu3 with the radial third eigenvalue."""
    return 1.0 - (derive(params).two_star - 1) / mu3(params, sgrid, modes=(0,))


def tangent_orthogonalize(w: RadialField, lam: float = 1.0) -> RadialField:
    """Remove from w its components along U_lam and dU_lam/dlam in <.,.>_alpha."""
    grid, params = w.grid, w.params
    basis = [RadialField(grid, ef_phi(params, grid.nodes, lam), params), project_dlambda(params, grid, lam)]
    gram = np.array([[inner_alpha(a, b) for b in basis] for a in basis])
    rhs = np.array([inner_alpha(a, w) for a in basis])
    coef = np.linalg.solve(gram, rhs)
    return w - (coef[0] * basis[0] + coef[1] * basis[1])


def e3_field(params: ProblemParams, tgrid: Optional[TGrid] = None, sgrid: Optional[SGrid] = None) -> RadialField:
    """Third radial eigenfield, made orthogonal to the tangent space at U_1 and scaled to ||U_1||."""
    tgrid = tgrid or TGrid()
    w = tangent_orthogonalize(radial_eigenfield(params, 2, tgrid, sgrid))
    u1 = RadialField(tgrid, ef_phi(params, tgrid.nodes), params)
    return math.sqrt(hnorm_sq(u1) / hnorm_sq(w)) * w


def _params_json(params: ProblemParams) -> dict:
    from fractions import Fraction
    a = params.alpha
    return {"N": params.N, "alpha": float(a), "alpha_exact": str(a) if isinstance(a, Fraction) else None}


def deficit_report(u: RadialField, sgrid: Optional[SGrid] = None, rho: Optional[float] = None) -> dict:
    fit = dist_to_manifold(u)
    d = deficit(u)
    norm = math.sqrt(hnorm_sq(u))
    ratio = d / fit.dist**2 if fit.dist > 1e-8 * norm else None
    if rho is None:
        rho = rho_prediction(u.params, sgrid)
    return {
        "params": _params_json(u.params),
        "dist": fit.dist,
        "c_star": fit.c_star,
        "lambda_star": fit.lambda_star,
        "deficit": d,
        "ratio": ratio,
        "rho_prediction": rho,
    }


def demo_family(params: ProblemParams, deltas: Sequence[float] = (1e-2, 5e-3, 2.5e-3),
                tgrid: Optional[TGrid] = None, sgrid: Optional[SGrid] = None) -> list:
    """Reports for u = U_1 + delta e3 along a sequence of deltas."""
    tgrid = tgrid or TGrid()
    e3 = e3_field(params, tgrid, sgrid)
    u1 = RadialField(tgrid, ef_phi(params, tgrid.nodes), params)
    rho = rho_prediction(params, sgrid)
    rows = []
    for delta in deltas:
        rep = deficit_report(u1 + delta * e3, sgrid, rho=rho)
        rep["delta"] = delta
        rows.append(rep)
    return rows
