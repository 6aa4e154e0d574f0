import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wbiharmonic.closedform import (RadialProfile, best_constant_radial, bubble_residual, c_of_m,
                                    emden_fowler_profile, ef_phi, eval_profile, hardy_rellich_mu2,
                                    log_abs_profile, omega_sphere, proof_variant_constant)
from wbiharmonic.errors import GridError, ParameterError
from wbiharmonic.grid import TGrid, project
from wbiharmonic.closedform import residual_pwht
from wbiharmonic.params import ProblemParams, derive

from conftest import RESIDUAL_CASES


def test_bubble_at_origin_is_c(p51):
    u = eval_profile(RadialProfile.bubble(p51), np.array([0.0, 1.0]))
    c = derive(p51).c_bubble
    assert u[0] == pytest.approx(c, rel=1e-14)
    assert u[1] == pytest.approx(c * 2.0 ** -3, rel=1e-14)


def test_negative_radius_rejected(p51):
    with pytest.raises(ValueError):
        eval_profile(RadialProfile.bubble(p51), [-1.0])


def test_log_space_far_tail(p51):
    sign, lu = log_abs_profile(RadialProfile.bubble(p51), np.array([800.0]))
    # U ~ C r^{-(N-4+2a)} for large r
    assert lu[0] == pytest.approx(math.log(derive(p51).c_bubble) - 3 * 800.0, rel=1e-12)
    assert sign[0] == 1


def test_ef_exponent_sign(p51):
    m, nu, amp = emden_fowler_profile(p51)
    assert m == pytest.approx(-3)
    assert nu == 0.5
    assert amp == pytest.approx(derive(p51).c_bubble / 8)


def test_ef_matches_profile(p51):
    t = np.linspace(-30, 30, 121)
    r = np.exp(-t)
    u = eval_profile(RadialProfile.bubble(p51, lam=2.0), r)
    phi = ef_phi(p51, t, lam=2.0)
    np.testing.assert_allclose(r ** 1.5 * u, phi, rtol=1e-12)


@pytest.mark.parametrize("N, alpha", RESIDUAL_CASES)
def test_bubble_residual_fourth_order(N, alpha):
    p = ProblemParams(N, alpha)
    sups = [bubble_residual(p, TGrid(40.0, n))[0] for n in (1001, 2001, 4001)]
    orders = [math.log2(a / b) for a, b in zip(sups, sups[1:])]
    assert min(orders) > 3.5
    assert sups[-1] <= 1e-5


def test_second_order_stencil_converges_at_order_two(p51):
    sups = [bubble_residual(p51, TGrid(40.0, n, stencil=2), order=2)[0] for n in (1001, 2001)]
    assert math.log2(sups[0] / sups[1]) == pytest.approx(2.0, abs=0.1)


def test_proof_variant_constant_fails(p51):
    sup, _ = bubble_residual(p51, TGrid(), amplitude=proof_variant_constant(p51))
    assert sup > 1.0


def test_residual_needs_fine_grid(p51):
    with pytest.raises(GridError):
        TGrid(40.0, 199)
    sup, _ = residual_pwht(project(RadialProfile.bubble(p51), TGrid(40.0, 201)))
    assert sup < 1e-1


def test_c_of_m_domain():
    with pytest.raises(ParameterError):
        c_of_m(4.0)
    assert c_of_m(10.0) > 0


@pytest.mark.parametrize("N", range(5, 12))
def test_alpha_zero_best_constant_identity(N):
    s = best_constant_radial(ProblemParams(N, 0))
    ref = math.pi ** 2 * (N - 4) * (N - 2) * N * (N + 2) * (math.gamma(N / 2) / math.gamma(N)) ** (4 / N)
    assert s == pytest.approx(ref, rel=1e-10)


def test_hardy_rellich_regime():
    assert hardy_rellich_mu2(ProblemParams(5, 1)) == pytest.approx(2.25)
    with pytest.raises(ParameterError):
        hardy_rellich_mu2(ProblemParams(2, 1.5))


def test_omega_sphere():
    assert omega_sphere(3) == pytest.approx(4 * math.pi)
    assert omega_sphere(2) == pytest.approx(2 * math.pi)


@settings(max_examples=60, deadline=None)
@given(N=st.integers(3, 12), frac=st.floats(0.05, 0.95), lam=st.floats(0.1, 10.0),
       logr=st.floats(-20, 20))
def test_dilation_and_positivity(N, frac, lam, logr):
    lo = (4 - N) / 2
    p = ProblemParams(N, lo + frac * (2 - lo))
    d = derive(p)
    s1, l1 = log_abs_profile(RadialProfile.bubble(p, lam), np.array([logr]))
    s0, l0 = log_abs_profile(RadialProfile.bubble(p), np.array([logr + math.log(lam)]))
    assert s1[0] == 1
    # U_lam(r) = lam^{(N-4+2a)/2} U_1(lam r)
    assert l1[0] == pytest.approx(l0[0] + d.kappa1 * math.log(lam), abs=1e-9 * (1 + abs(l0[0])))


@settings(max_examples=40, deadline=None)
@given(logr=st.floats(-8, 8))
def test_z0_is_dilation_derivative(logr):
    p = ProblemParams(5, 1)
    r = np.array([math.exp(logr)])
    h = 1e-5
    up = eval_profile(RadialProfile.bubble(p, 1 + h), r)
    um = eval_profile(RadialProfile.bubble(p, 1 - h), r)
    z = eval_profile(RadialProfile.kernel_z0(p), r)
    fd = (up - um) / (2 * h)
    ratio = fd / z if abs(z[0]) > 1e-6 * np.max(np.abs(up)) else None
    if ratio is not None:
        # Z0 is proportional to dU/dlambda with a fixed constant
        ref = (eval_profile(RadialProfile.bubble(p, 1 + h), np.array([0.1])) -
               eval_profile(RadialProfile.bubble(p, 1 - h), np.array([0.1]))) / (2 * h) / \
            eval_profile(RadialProfile.kernel_z0(p), np.array([0.1]))
        assert ratio[0] == pytest.approx(ref[0], rel=1e-5)
