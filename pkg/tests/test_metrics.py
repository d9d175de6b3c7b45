import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from dpm3d.geometry import GridSpec, classify_nodes
from dpm3d.metrics import (
    ErrorReport,
    SurfaceGrid,
    bulk_gradient_norms,
    bulk_level,
    bulk_norms,
    convergence_rate,
    rates,
    surface_level,
    surface_norms,
)


@pytest.fixture(scope="module")
def bulk():
    spec = GridSpec(0.5, 16)
    sets = classify_nodes(spec)
    X, Y, Z = spec.mesh()
    return spec, sets, np.exp(X) * np.cos(Y) + Z


def test_exact_field_has_zero_error(bulk):
    spec, sets, u = bulk
    assert bulk_norms([u, u], [u, u], sets.Mplus, spec.h) == (0.0, 0.0, 0.0)
    assert bulk_gradient_norms([u], [u], sets.Mplus, spec.h) == (0.0, 0.0, 0.0)


def test_single_node_perturbation(bulk):
    spec, sets, u = bulk
    h, delta = spec.h, 1e-3
    c = spec.N // 2
    assert sets.Mplus[c - 1 : c + 2, c - 1 : c + 2, c - 1 : c + 2].all()
    num = u.copy()
    num[c, c, c] += delta
    inf, l2, h1 = bulk_norms([num], [u], sets.Mplus, h)
    assert_allclose(inf, delta)
    assert_allclose(l2, delta * h**1.5)
    # six neighbours each see a central difference delta / 2h
    assert_allclose(h1, math.sqrt(delta**2 * h**3 + 6 * (delta / (2 * h)) ** 2 * h**3))
    gx, gy, gz = bulk_gradient_norms([num], [u], sets.Mplus, h)
    assert_allclose([gx, gy, gz], delta / (2 * h))


def test_linear_offset_gives_constant_gradient_error(bulk):
    spec, sets, u = bulk
    X, _, _ = spec.mesh()
    gx, gy, gz = bulk_gradient_norms([u + 0.01 * X], [u], sets.Mplus, spec.h)
    assert_allclose(gx, 0.01)
    assert_allclose([gy, gz], 0.0, atol=1e-13)


def test_maximum_over_levels(bulk):
    spec, sets, u = bulk
    small, large = u + 1e-4 * sets.Mplus, u + 3e-4 * sets.Mplus
    assert_allclose(bulk_norms([small, large, small], [u] * 3, sets.Mplus, spec.h)[0], 3e-4)


def test_bulk_hand_case():
    # 5^3 lattice, M+ = the three centre nodes along x
    h = 0.5
    mask = np.zeros((5, 5, 5), bool)
    mask[1:4, 2, 2] = True
    err = np.zeros((5, 5, 5))
    err[1, 2, 2], err[2, 2, 2], err[3, 2, 2] = 1.0, 2.0, 4.0
    lv = bulk_level(err, np.zeros_like(err), mask, h)
    assert_allclose(lv["inf"], 4.0)
    assert_allclose(lv["l2sq"], (1 + 4 + 16) * h**3)
    # x differences at the three nodes: (2-0)/1, (4-1)/1, (0-2)/1
    gx = np.array([2.0, 3.0, -2.0])
    assert_allclose(lv["gradx"], 3.0)
    assert_allclose(lv["h1sq"], (21 + np.sum(gx**2)) * h**3)


def test_surface_constant_offset():
    grid = SurfaceGrid()
    th, ph = grid.angles()
    R, delta = 0.5, 2e-3
    ex = np.cos(th) * np.sin(ph)
    inf, l2, h1 = surface_norms([ex + delta], [ex], th, R, grid.dtheta, grid.dphi)
    area = R * R * np.sum(np.sin(th)) * grid.dtheta * grid.dphi
    assert_allclose(inf, delta)
    assert_allclose(l2, delta * math.sqrt(area))
    assert_allclose(l2, delta * math.sqrt(4 * math.pi) * R, rtol=1e-4)
    assert_allclose(h1, l2)


def test_surface_hand_case():
    th = np.array([[np.pi / 4, np.pi / 4], [3 * np.pi / 4, 3 * np.pi / 4]])
    e = np.array([[1.0, 2.0], [3.0, 5.0]])
    R, dth, dph = 2.0, np.pi / 2, np.pi
    lv = surface_level(e, np.zeros_like(e), th, R, dth, dph)
    s = np.sin(np.pi / 4)
    w = R * R * s * dth * dph
    assert_allclose(lv["l2sq"], w * (1 + 4 + 9 + 25))
    d_th = np.array([3.0 - 1.0, 5.0 - 2.0]) / (R * dth)
    d_ph = np.array([2 - 1, 1 - 2, 5 - 3, 3 - 5]) / (R * s * dph)
    assert_allclose(lv["h1sq"], lv["l2sq"] + w * np.sum(d_th**2) + w * np.sum(d_ph**2))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), R=st.floats(0.1, 3.0))
def test_surface_l2_bounded_by_max(seed, R):
    grid = SurfaceGrid(16, 32)
    th, _ = grid.angles()
    err = np.random.default_rng(seed).standard_normal(th.shape)
    lv = surface_level(err, np.zeros_like(err), th, R, grid.dtheta, grid.dphi)
    weights = R * R * np.sum(np.sin(th)) * grid.dtheta * grid.dphi
    assert math.sqrt(lv["l2sq"]) <= math.sqrt(weights) * lv["inf"] * (1 + 1e-12)
    assert math.sqrt(lv["l2sq"]) <= 2 * R * math.sqrt(math.pi) * lv["inf"] * (1 + 1e-2)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_bulk_norms_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    mask = np.zeros((6, 6, 6), bool)
    mask[1:5, 1:5, 1:5] = True
    err = np.zeros((6, 6, 6))
    err[mask] = rng.standard_normal(mask.sum())
    perm = err.copy()
    perm[mask] = rng.permutation(err[mask])
    a = bulk_level(err, 0 * err, mask, 0.1)
    b = bulk_level(perm, 0 * err, mask, 0.1)
    assert_allclose([a["inf"], a["l2sq"]], [b["inf"], b["l2sq"]], rtol=1e-12)


def test_validation():
    with pytest.raises(ValueError):
        bulk_level(np.zeros((3, 3, 3)), np.zeros((4, 4, 4)), np.ones((3, 3, 3), bool), 1.0)
    th = np.zeros((2, 2))
    with pytest.raises(ValueError, match="poles"):
        surface_level(th, th, th, 1.0, 0.1, 0.1)
    with pytest.raises(ValueError):
        surface_level(np.zeros((2, 2)), np.zeros((2, 3)), th + 1, 1.0, 0.1, 0.1)


def test_surface_grid_avoids_poles():
    th, ph = SurfaceGrid().angles()
    assert th.shape == (64, 128)
    assert th.min() > 0 and th.max() < np.pi
    assert ph.max() < 2 * np.pi


def test_rates():
    assert convergence_rate(4, 1) == 2
    assert convergence_rate(1, 1) == 0
    assert round(convergence_rate(5.7519e-6, 1.6449e-6), 2) == 1.81
    reps = [ErrorReport(31, E_inf_bulk=4.0), ErrorReport(63, E_inf_bulk=1.0), ErrorReport(127, E_inf_bulk=0.5)]
    assert rates(reps, "E_inf_bulk") == [None, 2.0, 1.0]


def test_report_absorbs_maxima():
    rep = ErrorReport(31)
    rep.absorb_bulk(dict(inf=1.0, l2sq=4.0, h1sq=9.0, gradx=1, grady=2, gradz=3))
    rep.absorb_bulk(dict(inf=0.5, l2sq=16.0, h1sq=1.0, gradx=0, grady=5, gradz=0))
    rep.absorb_surface(dict(inf=2.0, l2sq=1.0, h1sq=4.0))
    d = rep.as_dict()
    assert (d["E_inf_bulk"], d["E_l2_bulk"], d["E_h1_bulk"]) == (1.0, 4.0, 3.0)
    assert (d["E_inf_grady"], d["E_inf_surf"], d["E_h1_surf"]) == (5, 2.0, 2.0)
    assert all(d[n] >= 0 for n in ErrorReport.NORMS)
