"""Finite-difference stencils, quadrature weights and a golden-section search."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

# (half width, centered coefficients) for d/dt, d2/dt2 and d4/dt4, kept exact
_F = Fraction
EXACT_STENCILS = {
    2: {
        1: (1, (_F(-1, 2), _F(0), _F(1, 2))),
        2: (1, (_F(1), _F(-2), _F(1))),
        4: (2, (_F(1), _F(-4), _F(6), _F(-4), _F(1))),
    },
    4: {
        1: (2, (_F(1, 12), _F(-2, 3), _F(0), _F(2, 3), _F(-1, 12))),
        2: (2, (_F(-1, 12), _F(4, 3), _F(-5, 2), _F(4, 3), _F(-1, 12))),
        4: (3, (_F(-1, 6), _F(2), _F(-13, 2), _F(28, 3), _F(-13, 2), _F(2), _F(-1, 6))),
    },
}
STENCILS = {o: {d: (hw, tuple(float(c) for c in cs)) for d, (hw, cs) in table.items()}
            for o, table in EXACT_STENCILS.items()}


def diff_matrix(n: int, h: float, order: int, deriv: int) -> sp.csr_matrix:
    """Centered difference matrix with zero padding outside the grid."""
    hw, coeffs = STENCILS[order][deriv]
    data, offsets = [], []
    for j, c in zip(range(-hw, hw + 1), coeffs):
        if c != 0.0:
            data.append(np.full(n - abs(j), c))
            offsets.append(j)
    return sp.diags(data, offsets, shape=(n, n), format="csr") / h**deriv


def interior_derivative(values: np.ndarray, h, order: int, deriv: int, trim: int) -> np.ndarray:
    """Derivative on nodes trim..n-trim-1 using genuine grid values only.

    Works in the dtype of `values`; coefficients are rounded to that dtype.
    """
    hw, coeffs = EXACT_STENCILS[order][deriv]
    dt = values.dtype.type
    n = len(values)
    out = np.zeros(n - 2 * trim, dtype=values.dtype)
    for j, c in zip(range(-hw, hw + 1), coeffs):
        if c:
            out += (dt(c.numerator) / dt(c.denominator)) * values[trim + j: n - trim + j]
    return out / dt(h) ** deriv


QUADRATURES = ("trapezoid", "simpson")


def quad_weights(n: int, h: float, rule: str = "trapezoid") -> np.ndarray:
    if rule == "trapezoid":
        w = np.full(n, h)
        w[0] = w[-1] = h / 2
        return w
    if rule == "simpson":
        if n % 2 == 0:
            raise ValueError("Simpson's rule needs an odd number of nodes")
        w = np.full(n, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        return w * (h / 3)
    raise ValueError(f"unknown quadrature rule {rule!r}")


INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, a: float, b: float, tol: float = 1e-8, max_iter: int = 200):
    """Minimize a unimodal f on [a, b]; returns (x, f(x), iterations)."""
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while abs(b - a) > tol and it < max_iter:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)
        it += 1
    if fc < fd:
        return c, fc, it
    return d, fd, it
