import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wbiharmonic.closedform import RadialProfile, ef_phi
from wbiharmonic.deficit import (BracketError, OnManifoldError, deficit, deficit_report, demo_family,
                                 dist_to_manifold, e3_field, rho_prediction, stability_ratio,
                                 tangent_orthogonalize)
from wbiharmonic.grid import RadialField, TGrid, hnorm_sq, inner_alpha, project, project_dlambda, smooth_test_fields
from wbiharmonic.params import ProblemParams

G = TGrid(40.0, 2001)
P = ProblemParams(5, 1)


def bubble(lam=1.0, grid=G, params=P):
    return RadialField(grid, ef_phi(params, grid.nodes, lam), params)


@pytest.fixture(scope="module")
def e3(tgrid, sgrid):
    return e3_field(P, tgrid, sgrid)


@pytest.fixture(scope="module")
def rho(sgrid):
    return rho_prediction(P, sgrid)


def test_rho_value(rho):
    assert rho == pytest.approx(1 - (7 / 3) / (14 / 3), abs=1e-5)


def test_bubble_has_zero_deficit():
    u = bubble()
    assert abs(deficit(u)) <= 1e-7 * hnorm_sq(u)


def test_fit_recovers_scaled_bubble():
    fit = dist_to_manifold(2.5 * bubble(3.0))
    assert fit.c_star == pytest.approx(2.5, rel=1e-9)
    assert fit.lambda_star == pytest.approx(3.0, rel=1e-9)
    assert fit.dist <= 1e-6 * math.sqrt(hnorm_sq(2.5 * bubble(3.0)))
    with pytest.raises(OnManifoldError):
        stability_ratio(2.5 * bubble(3.0))


def test_zero_field_rejected():
    with pytest.raises(ValueError):
        dist_to_manifold(0 * bubble())


def test_edge_peak_raises_bracket_error():
    with pytest.raises(BracketError):
        dist_to_manifold(bubble(math.exp(9.9)), log_lambda_max=3)


def test_e3_orthogonal_to_tangent(e3, tgrid):
    u1 = bubble(grid=tgrid)
    z = project_dlambda(P, tgrid)
    scale = math.sqrt(hnorm_sq(e3))
    assert abs(inner_alpha(e3, u1)) <= 1e-8 * scale * math.sqrt(hnorm_sq(u1))
    assert abs(inner_alpha(e3, z)) <= 1e-8 * scale * math.sqrt(hnorm_sq(z))


def test_demo_family_converges(tgrid, sgrid, rho):
    rows = demo_family(P, deltas=(1e-2, 5e-3, 2.5e-3), tgrid=tgrid, sgrid=sgrid)
    errs = [abs(r["ratio"] - rho) for r in rows]
    assert errs[0] <= 0.05 * rho
    assert errs[0] > errs[1] > errs[2]
    assert rows[0]["lambda_star"] == pytest.approx(1.0, abs=1e-4)


def test_report_fields(e3, tgrid, sgrid):
    rep = deficit_report(bubble(grid=tgrid) + 1e-2 * e3, sgrid)
    assert list(rep) == ["params", "dist", "c_star", "lambda_star", "deficit", "ratio", "rho_prediction"]


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_deficit_nonnegative(seed):
    f = smooth_test_fields(G, P, count=1, seed=seed)[0]
    assert deficit(f) >= -1e-8 * hnorm_sq(f)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 100_000), c=st.floats(0.1, 10.0))
def test_distance_homogeneous_and_bounded(seed, c):
    f = smooth_test_fields(G, P, count=1, seed=seed)[0] + bubble()
    a, b = dist_to_manifold(f), dist_to_manifold(c * f)
    assert a.dist <= math.sqrt(hnorm_sq(f)) * (1 + 1e-12)
    assert b.dist == pytest.approx(c * a.dist, rel=1e-6)
    assert stability_ratio(c * f, b) == pytest.approx(stability_ratio(f, a), rel=1e-5)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 100_000), delta=st.floats(2e-3, 2e-2))
def test_stability_floor(seed, delta, rho):
    w = tangent_orthogonalize(smooth_test_fields(G, P, count=1, seed=seed)[0])
    u1 = bubble()
    w = math.sqrt(hnorm_sq(u1) / hnorm_sq(w)) * w
    assert stability_ratio(u1 + delta * w) >= 0.5 * rho
