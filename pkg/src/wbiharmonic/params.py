"""Admissible parameters (N, alpha), derived constants and the degeneracy test."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Integral, Rational
from typing import Optional, Union

from .errors import ParameterError

__all__ = [
    "ParameterError",
    "ProblemParams",
    "DerivedConstants",
    "DegeneracyReport",
    "derive",
    "exact_constants",
    "degeneracy_check",
    "degenerate_alphas",
    "harmonic_dim",
    "eigenvalue_lk",
]

Number = Union[float, Fraction]


def _coerce_alpha(alpha) -> Number:
    if isinstance(alpha, bool):
        raise ParameterError(f"alpha must be a real number, got {alpha!r}")
    if isinstance(alpha, Fraction):
        return alpha
    if isinstance(alpha, (Integral, Rational)):
        return Fraction(alpha)
    try:
        a = float(alpha)
    except (TypeError, ValueError):
        raise ParameterError(f"alpha must be a real number, got {alpha!r}") from None
    if not math.isfinite(a):
        raise ParameterError(f"alpha must be finite, got {alpha!r}")
    return a


@dataclass(frozen=True)
class ProblemParams:
    """Dimension N and weight exponent alpha.

    Integer or Fraction alpha is kept exact; anything else is stored as float.
    """

    N: int
    alpha: Number

    def __post_init__(self):
        if isinstance(self.N, bool) or not isinstance(self.N, Integral):
            raise ParameterError(f"N must be an integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "alpha", _coerce_alpha(self.alpha))
        if self.N < 2:
            raise ParameterError(f"N must satisfy N >= 2, got N={self.N}")
        lower = Fraction(4 - self.N, 2)
        if not self.alpha > lower:
            raise ParameterError(
                f"alpha must satisfy alpha > (4-N)/2 = {lower} for N={self.N}, got alpha={self.alpha}"
            )
        if not self.alpha < 2:
            raise ParameterError(f"alpha must satisfy alpha < 2, got alpha={self.alpha}")

    @property
    def exact(self) -> bool:
        return isinstance(self.alpha, Fraction)

    @property
    def a(self) -> float:
        return float(self.alpha)


@dataclass(frozen=True)
class DerivedConstants:
    two_star: float
    kappa1: float
    kappa2: float
    a_const: float
    b_const: float
    k2: float
    k0: float
    q: float
    m_dim: float
    c_bubble: float
    log_c_bubble: float


def _formulas(N: int, a: Number, half: Number) -> dict:
    d = N - 4 + 2 * a
    kappa1 = d * half
    kappa2 = N * half
    q = (2 - a) * half
    return {
        "two_star": 2 * N / d,
        "kappa1": kappa1,
        "kappa2": kappa2,
        "a_const": q,
        "b_const": kappa1 * kappa2,
        "k2": kappa1**2 + kappa2**2,
        "k0": kappa1**2 * kappa2**2,
        "q": q,
        "m_dim": 2 * N / (2 - a),
    }


def exact_constants(params: ProblemParams) -> dict:
    """Rational constants as Fractions; requires an exact alpha."""
    if not params.exact:
        raise TypeError("exact constants need alpha given as an integer or Fraction")
    return _formulas(params.N, params.alpha, Fraction(1, 2))


def derive(params: ProblemParams) -> DerivedConstants:
    N = params.N
    if params.exact:
        vals = {k: float(v) for k, v in exact_constants(params).items()}
    else:
        vals = _formulas(N, params.a, 0.5)
    a = params.a
    product = (N - 4 + 2 * a) * (N - 2 + a) * N * (N + 2 - a)
    log_c = (N - 4 + 2 * a) / (8 - 4 * a) * math.log(product)
    c = math.exp(log_c) if log_c < 709.0 else math.inf
    return DerivedConstants(c_bubble=c, log_c_bubble=log_c, **vals)


@dataclass(frozen=True)
class DegeneracyReport:
    degenerate: bool
    k_mode: Optional[int]
    kernel_dim: int
    harmonic_dim: Optional[int]


def eigenvalue_lk(N: int, k: int) -> int:
    """k-th eigenvalue k(N-2+k) of the Laplace-Beltrami operator on S^{N-1}."""
    if N < 2 or k < 0:
        raise ParameterError(f"need N >= 2 and k >= 0, got N={N}, k={k}")
    return k * (N - 2 + k)


def harmonic_dim(N: int, k: int, limit: int = 2**63 - 1) -> int:
    """Dimension of degree-k spherical harmonics in R^N, in exact integers.

    Python integers cannot wrap, so `limit` is what stands in for overflow:
    results that do not fit the 64-bit output format raise OverflowError.
    """
    if N < 2 or k < 1:
        raise ParameterError(f"need N >= 2 and k >= 1, got N={N}, k={k}")
    num = (N + 2 * k - 2) * math.factorial(N + k - 3)
    den = math.factorial(N - 2) * math.factorial(k)
    dim, rem = divmod(num, den)
    if rem:
        raise ArithmeticError(f"non-integer harmonic dimension for N={N}, k={k}")
    if dim > limit:
        raise OverflowError(f"harmonic_dim({N}, {k}) = {dim} exceeds {limit}")
    return dim


def degeneracy_check(params: ProblemParams, tol: float = 1e-12) -> DegeneracyReport:
    """Is (2-alpha)(2N-2+alpha) = 4k(N-2+k) for some positive integer k?

    Exact for rational alpha, within `tol` otherwise. The right side
    increases with k, so the search stops once it passes the left side.
    """
    N, a = params.N, params.alpha
    lhs = (2 - a) * (2 * N - 2 + a)
    slack = 0 if params.exact else tol
    k = 1
    while True:
        rhs = 4 * k * (N - 2 + k)
        if abs(rhs - lhs) <= slack:
            dim = harmonic_dim(N, k)
            return DegeneracyReport(True, k, 1 + dim, dim)
        if rhs > lhs + slack:
            return DegeneracyReport(False, None, 1, None)
        k += 1


def degenerate_alphas(N: int, lo: float, hi: float) -> list:
    """Closed-form degenerate alpha values in [lo, hi] for dimension N.

    Solving (2-a)(2N-2+a) = 4k(N-2+k) gives a = -(N-2) +- sqrt((N-2k)^2 - 8k(k-1)).
    Returns (alpha, k) pairs sorted by alpha; alpha = 0 for k = 1 is exact.
    """
    out = []
    k = 1
    while 4 * k * (N - 2 + k) <= N * N:  # the left side never exceeds N^2
        disc = (N - 2 * k) ** 2 - 8 * k * (k - 1)
        if disc >= 0:
            root = math.isqrt(disc)
            if root * root == disc:
                cands = [Fraction(-(N - 2) + root), Fraction(-(N - 2) - root)]
            else:
                cands = [-(N - 2) + math.sqrt(disc), -(N - 2) - math.sqrt(disc)]
            for c in cands:
                if lo <= c <= hi and Fraction(4 - N, 2) < c < 2:
                    out.append((c, k))
        k += 1
    return sorted(set(out), key=lambda x: float(x[0]))
