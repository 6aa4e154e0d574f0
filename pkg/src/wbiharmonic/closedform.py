"""Closed-form radial profiles, the Emden-Fowler bubble and the radial best constant."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _numerics
from .errors import GridError, ParameterError
from .params import ProblemParams, derive, exact_constants

__all__ = [
    "Family",
    "RadialProfile",
    "eval_profile",
    "log_abs_profile",
    "emden_fowler_profile",
    "ef_phi",
    "residual_pwht",
    "bubble_residual",
    "omega_sphere",
    "c_of_m",
    "best_constant_radial",
    "bubble_energy",
    "j0_bubble",
    "hardy_rellich_mu2",
    "proof_variant_constant",
]


class Family(enum.Enum):
    BUBBLE = "bubble"
    KERNEL_Z0 = "kernel_z0"
    KERNEL_ZK_RADIAL = "kernel_zk_radial"
    EIGEN_X0 = "eigen_x0"
    EIGEN_X1 = "eigen_x1"
    CUSTOM = "custom"


@dataclass(frozen=True)
class RadialProfile:
    """A closed-form radial function u(r) tied to a parameter pair."""

    family: Family
    params: ProblemParams
    lambda_scale: float = 1.0
    k_mode: int = 0
    func: Optional[Callable] = None
    amplitude: Optional[float] = None  # overrides C_{N,alpha} for bubbles

    def __post_init__(self):
        if not self.lambda_scale > 0:
            raise ParameterError(f"lambda_scale must be positive, got {self.lambda_scale}")
        if self.k_mode < 0:
            raise ParameterError(f"k_mode must be nonnegative, got {self.k_mode}")
        if self.family is Family.CUSTOM and self.func is None:
            raise ParameterError("Custom profiles need a callable")

    @classmethod
    def bubble(cls, params, lam=1.0):
        return cls(Family.BUBBLE, params, lambda_scale=float(lam))

    @classmethod
    def kernel_z0(cls, params):
        return cls(Family.KERNEL_Z0, params)

    @classmethod
    def kernel_zk(cls, params, k=1):
        return cls(Family.KERNEL_ZK_RADIAL, params, k_mode=k)

    @classmethod
    def eigen_x0(cls, params):
        return cls(Family.EIGEN_X0, params)

    @classmethod
    def eigen_x1(cls, params):
        return cls(Family.EIGEN_X1, params)

    @classmethod
    def custom(cls, params, func):
        return cls(Family.CUSTOM, params, func=func)


def _log1pexp(x):
    return np.logaddexp(0.0, x)


def _log_abs_one_minus_exp(x):
    # log|1 - e^x| without cancellation or overflow
    return np.maximum(x, 0.0) + np.log(-np.expm1(-np.abs(x)))


def log_abs_profile(p: RadialProfile, log_r):
    """Return (sign, log|u|) at radii e^{log_r}; safe for any log_r."""
    pr = p.params
    dc = derive(pr)
    q = dc.q
    log_r = np.asarray(log_r, dtype=float)
    tail = (dc.m_dim - 2) / 2  # (N-2+alpha)/(2-alpha)
    fam = p.family
    with np.errstate(divide="ignore", invalid="ignore"):
        if fam is Family.BUBBLE:
            lg = math.log(p.lambda_scale)
            x = 2 * q * (lg + log_r)
            beta = (dc.m_dim - 4) / 2
            log_amp = dc.log_c_bubble if p.amplitude is None else math.log(p.amplitude)
            val = log_amp + dc.kappa1 * lg - beta * _log1pexp(x)
            return np.ones_like(val), val
        x = 2 * q * log_r
        if fam in (Family.KERNEL_Z0, Family.EIGEN_X0):
            # (1 - s^2)(1 + s^2)^{-(M-2)/2} with s = r^q
            val = _log_abs_one_minus_exp(x) - tail * _log1pexp(x)
            return np.sign(-x), val
        if fam in (Family.KERNEL_ZK_RADIAL, Family.EIGEN_X1):
            # s (1 + s^2)^{-(M-2)/2}
            val = q * log_r - tail * _log1pexp(x)
            return np.ones_like(val), val
    raise ValueError(f"log-space evaluation not available for {fam}")


def eval_profile(p: RadialProfile, r):
    """Evaluate u(r). EigenX families are read in s = r^q.

    With s = r^q the s-forms of X0 and X1 coincide with Z0 and the radial
    factor of Z_k, so all families are reported as functions of r.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("profiles are defined for r >= 0 only")
    if p.family is Family.CUSTOM:
        out = np.asarray(p.func(r_arr), dtype=float)
    else:
        with np.errstate(divide="ignore"):
            log_r = np.log(r_arr)
        sign, logabs = log_abs_profile(p, log_r)
        out = sign * np.exp(logabs)
    return out if out.ndim else float(out)


def emden_fowler_profile(params: ProblemParams):
    """(m, nu, amplitude) with phi(t) = amplitude * cosh(nu t)^m solving the t-ODE.

    m = -4/(2**-2) is negative, so the profile decays; nu is taken positive.
    """
    dc = derive(params)
    p = dc.two_star
    m = -4.0 / (p - 2.0)
    nu = dc.q
    c_amp = (m * (m - 1) * (m - 2) * (m - 3) * nu**4) ** (1.0 / (p - 2.0))
    return m, nu, c_amp


def ef_phi(params: ProblemParams, t, lam: float = 1.0):
    """Transformed bubble phi(t) = r^kappa1 U_lam(r); a dilation is a shift by ln lam."""
    m, nu, c_amp = emden_fowler_profile(params)
    s = nu * (np.asarray(t, dtype=float) - math.log(lam))
    # log cosh(s) = |s| + log1p(e^{-2|s|}) - log 2
    a = np.abs(s)
    return c_amp * np.exp(m * (a + np.log1p(np.exp(-2 * a)) - math.log(2.0)))


def _pwht_residual(phi, h, params, order, relative):
    dc = derive(params)
    dt = phi.dtype.type
    if params.exact:
        ex = exact_constants(params)
        k2, k0, p = (dt(ex[k].numerator) / dt(ex[k].denominator) for k in ("k2", "k0", "two_star"))
    else:
        k2, k0, p = dt(dc.k2), dt(dc.k0), dt(dc.two_star)
    trim = _numerics.STENCILS[order][4][0]
    d4 = _numerics.interior_derivative(phi, h, order, 4, trim)
    d2 = _numerics.interior_derivative(phi, h, order, 2, trim)
    core = phi[trim:len(phi) - trim]
    res = d4 - k2 * d2 + k0 * core - np.abs(core) ** (p - 2) * core
    sup = float(np.max(np.abs(res)))
    l2 = float(np.sqrt(dt(h) * np.sum(res * res)))
    if relative:
        scale = float(np.max(np.abs(phi))) ** (float(p) - 1)
        if scale > 0:
            sup, l2 = sup / scale, l2 / scale
    return sup, l2


def residual_pwht(field, order: int = 4, relative: bool = True):
    """Sup and discrete L2 norm of the residual of phi'''' - K2 phi'' + K0 phi = |phi|^{p-2} phi.

    Centered differences on interior nodes only. With relative=True both
    numbers are divided by max|phi|^{p-1}, the size of the nonlinear term.
    Float64 samples carry rounding noise that fourth differences amplify
    by about 1/h^4; see bubble_residual for analytic profiles.
    """
    grid = field.grid
    if grid.n < 200:
        raise GridError(f"grid too coarse for fourth differences: n={grid.n} < 200")
    return _pwht_residual(np.asarray(field.values, dtype=float), grid.h, field.params, order, relative)


def bubble_residual(params: ProblemParams, grid, order: int = 4, amplitude: Optional[float] = None,
                    relative: bool = True):
    """ODE residual of the analytic transformed bubble, sampled in extended precision.

    `amplitude` replaces the bubble constant C_{N,alpha} (the t-profile is
    rescaled by amplitude / C_{N,alpha}).
    """
    if grid.n < 200:
        raise GridError(f"grid too coarse for fourth differences: n={grid.n} < 200")
    ld = np.longdouble
    h = ld(2 * grid.t_max) / ld(grid.n - 1)
    t = -ld(grid.t_max) + h * np.arange(grid.n, dtype=ld)
    m, nu, c_amp = emden_fowler_profile(params)
    if params.exact:
        ex = exact_constants(params)
        q = ex["q"]
        m_ex = -4 / (ex["two_star"] - 2)
        nu_ld = ld(q.numerator) / ld(q.denominator)
        m_ld = ld(m_ex.numerator) / ld(m_ex.denominator)
    else:
        nu_ld, m_ld = ld(nu), ld(m)
    s = np.abs(nu_ld * t)
    shape = np.exp(m_ld * (s + np.log1p(np.exp(-2 * s)) - np.log(ld(2))))
    amp = ld(c_amp)
    if amplitude is not None:
        amp *= ld(amplitude) / ld(derive(params).c_bubble)
    return _pwht_residual(amp * shape, h, params, order, relative)


def omega_sphere(N: int) -> float:
    """Surface area of the unit sphere S^{N-1}."""
    return math.exp(math.log(2.0) + 0.5 * N * math.log(math.pi) - math.lgamma(N / 2))


def c_of_m(M: float) -> float:
    """(M-4)(M-2)M(M+2) [Gamma(M/2)^2 / (2 Gamma(M))]^{4/M}."""
    if not M > 4:
        raise ParameterError(f"c_of_m needs M > 4, got M={M}")
    log_bracket = 2 * math.lgamma(M / 2) - math.log(2.0) - math.lgamma(M)
    return (M - 4) * (M - 2) * M * (M + 2) * math.exp(4.0 / M * log_bracket)


def best_constant_radial(params: ProblemParams) -> float:
    """Sharp constant of the radial weighted Sobolev inequality."""
    dc = derive(params)
    N, a = params.N, params.a
    expo = (4 - 2 * a) / N
    return dc.q ** (4 - expo) * omega_sphere(N) ** expo * c_of_m(dc.m_dim)


def bubble_energy(params: ProblemParams) -> float:
    """||U||^2 = ||U||_*^p = S^{p/(p-2)} for the normalized bubble."""
    p = derive(params).two_star
    return best_constant_radial(params) ** (p / (p - 2))


def j0_bubble(params: ProblemParams) -> float:
    p = derive(params).two_star
    return (0.5 - 1.0 / p) * bubble_energy(params)


def hardy_rellich_mu2(params: ProblemParams) -> float:
    N, a = params.N, params.a
    if N < 5 or not 0 < a < 2:
        raise ParameterError(f"hardy_rellich_mu2 needs N >= 5 and 0 < alpha < 2, got N={N}, alpha={a}")
    return (N - 4 + 2 * a) * (N - 2 * a) / 4


def proof_variant_constant(params: ProblemParams) -> float:
    """The alternative amplitude [(N-4+a)(N-2)(N-a)(N+2-2a)]^{(N-4+2a)/(8-4a)}.

    Kept only so the residual check can show it does not give a solution.
    """
    N, a = params.N, params.a
    product = (N - 4 + a) * (N - 2) * (N - a) * (N + 2 - 2 * a)
    if product <= 0:
        raise ParameterError("alternative amplitude undefined for these parameters")
    return product ** ((N - 4 + 2 * a) / (8 - 4 * a))
