import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wbiharmonic.closedform import RadialProfile
from wbiharmonic.errors import NumericalError
from wbiharmonic.params import ProblemParams, derive, eigenvalue_lk
from wbiharmonic.spectrum import (SGrid, analytic_residual, assemble_pencil, candidate_y, eigenvector_error,
                                  kernel_certificate, kernel_mode_bound, mode_eigensolve, mu3, negative_count)


def oracle(params, k, j):
    """Closed-form mode eigenvalues: the pencil is the radial part of the unweighted
    problem in dimension M with a fractional angular degree l_k."""
    dc = derive(params)
    M = dc.m_dim
    c = (M - 2) / 2
    ell = -c + math.sqrt(c * c + eigenvalue_lk(params.N, k) / dc.q ** 2)
    n = j + ell
    num = math.prod(n + M / 2 + a for a in (-2, -1, 0, 1))
    den = math.prod(M / 2 + a for a in (-2, -1, 0, 1))
    return num / den


def test_mode0_5_1(p51, sgrid):
    ms = mode_eigensolve(p51, 0, sgrid, count=3)
    assert abs(ms.eigenvalues[0] - 1) <= 1e-6
    assert abs(ms.eigenvalues[1] - 7 / 3) <= 1e-6
    assert ms.eigenvalues[2] == pytest.approx(14 / 3, abs=1e-5)
    assert max(ms.residuals) < 1e-8


def test_mode1_regression(p51, sgrid):
    ms = mode_eigensolve(p51, 1, sgrid, count=1)
    assert ms.eigenvalues[0] == pytest.approx(3.7297914, abs=1e-6)
    assert ms.eigenvalues[0] == pytest.approx(oracle(p51, 1, 0), abs=1e-6)


@pytest.mark.parametrize("k", range(4))
def test_oracle_all_modes(p51, sgrid, k):
    ms = mode_eigensolve(p51, k, sgrid, count=3)
    for j, mu in enumerate(ms.eigenvalues):
        assert mu == pytest.approx(oracle(p51, k, j), rel=1e-5)


def test_degenerate_mode_and_eigenvector(p50, sgrid):
    ms = mode_eigensolve(p50, 1, sgrid, count=2)
    assert abs(ms.eigenvalues[0] - 9) <= 1e-6
    ref = candidate_y(p50, RadialProfile.eigen_x1(p50), sgrid)
    assert eigenvector_error(ms.eigenfields[:, 0], ref, sgrid) <= 1e-6


@pytest.mark.parametrize("family, k, mu", [("kernel_z0", 0, 9), ("eigen_x0", 0, 9), ("bubble", 0, 1), ("eigen_x1", 1, 9)])
def test_closed_form_eigenfunctions(p50, sgrid, family, k, mu):
    prof = getattr(RadialProfile, family)(p50)
    assert analytic_residual(p50, k, prof, mu, sgrid) < 1e-5


def test_certificate_nondegenerate(p51, sgrid):
    cert = kernel_certificate(p51, sgrid)
    assert not cert.degenerate and cert.spectral_modes == () and cert.radial_hit
    assert cert.gap == pytest.approx(oracle(p51, 1, 0) - 7 / 3, abs=1e-5)
    assert cert.residuals["Z0"] < 1e-4


def test_certificate_degenerate(p50, sgrid):
    cert = kernel_certificate(p50, sgrid)
    assert cert.degenerate and cert.spectral_modes == (1,) and cert.kernel_dim == 6
    assert cert.residuals["Zk"] < 1e-4


def test_mu3(p51, sgrid):
    assert mu3(p51, sgrid, modes=(0,)) == pytest.approx(14 / 3, abs=1e-5)
    assert mu3(p51, sgrid) == pytest.approx(oracle(p51, 1, 0), abs=1e-5)


def test_pencil_definiteness(p51, sgrid):
    A, B = assemble_pencil(p51, 2, sgrid)
    assert negative_count(A.tocsr(), 4) == 0
    assert np.all(B.diagonal() >= 0)


def test_kernel_mode_bound(p51, p50):
    assert kernel_mode_bound(p50) == 2
    assert kernel_mode_bound(p51) >= 1


def test_grid_validation():
    with pytest.raises(ValueError):
        SGrid(20.0, 1000)
    with pytest.raises(ValueError):
        SGrid(-1.0, 2001)


# near M = 4 the eigenfunctions decay like exp(-beta |sigma|) with small beta
# and the truncated sigma range dominates, so stay away from that end
@settings(max_examples=8, deadline=None)
@given(N=st.integers(5, 9), frac=st.floats(0.3, 0.8), k=st.integers(0, 2))
def test_oracle_random_params(N, frac, k):
    lo = (4 - N) / 2
    p = ProblemParams(N, lo + frac * (2 - lo))
    ms = mode_eigensolve(p, k, SGrid(20.0, 2001), count=2)
    for j, mu in enumerate(ms.eigenvalues):
        assert mu == pytest.approx(oracle(p, k, j), rel=1e-4)


@settings(max_examples=5, deadline=None)
@given(loglam=st.floats(-2, 2))
def test_dilation_invariance(loglam):
    p = ProblemParams(5, 1)
    a = mode_eigensolve(p, 0, SGrid(), count=2, lam=math.exp(loglam))
    assert a.eigenvalues[0] == pytest.approx(1.0, abs=1e-5)
    assert a.eigenvalues[1] == pytest.approx(7 / 3, abs=1e-5)
