import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from dpm3d.geometry import (
    GeometryError,
    GridSpec,
    boundary_nodes,
    classify_nodes,
    foot_point,
    perturb_boundary_data,
    perturbation_draws,
)


def brute_force_sets(R, N):
    """Point sets from plain loops and exact rational coordinates."""
    R = Fraction(R).limit_denominator()
    x = [Fraction(6, 5) * R * Fraction(2 * j - N, N) for j in range(N + 1)]
    interior = lambda p: all(1 <= c <= N - 1 for c in p)
    nodes = list(itertools.product(range(N + 1), repeat=3))
    mplus = {p for p in nodes if interior(p) and sum(x[c] ** 2 for c in p) < R * R}
    mminus = {p for p in nodes if interior(p) and p not in mplus}
    nbrs = [(0, 0, 0), (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]

    def dilate(s):
        return {tuple(a + b for a, b in zip(p, o)) for p in s for o in nbrs}

    nplus, nminus = dilate(mplus), dilate(mminus)
    gamma = nplus & nminus
    return mplus, nplus, gamma, gamma & mplus, gamma - mplus


def as_set(mask):
    return {tuple(int(i) for i in p) for p in zip(*np.nonzero(mask))}


class TestGridSpec:
    def test_spacing_and_coords(self):
        spec = GridSpec(0.5, 31)
        x = spec.coords()
        assert_allclose(spec.h, 1.2 / 31)
        assert_allclose([x[0], x[-1]], [-0.6, 0.6])
        assert_allclose(np.diff(x), spec.h)

    def test_default_time_rule_uses_dt_equal_h(self):
        spec = GridSpec(0.5, 31, 0.1)
        assert spec.n_steps == 2
        assert spec.dt == spec.h
        assert spec.t_end <= 0.1
        assert_allclose(spec.sigma, 2 / spec.h)

    def test_exact_time_rule_hits_horizon(self):
        spec = GridSpec(0.5, 31, 0.1, time_rule="exact")
        assert spec.n_steps == math.ceil(0.1 / spec.h)
        assert spec.dt <= spec.h
        assert_allclose(spec.t_end, 0.1, rtol=1e-14)

    def test_short_horizon_takes_one_step(self):
        spec = GridSpec(1.0, 8, 0.01)
        assert spec.n_steps == 1
        assert_allclose(spec.dt, 0.01)

    def test_fixed_step_count(self):
        spec = GridSpec(1.0, 31, 0.1, steps=4)
        assert spec.n_steps == 4
        assert_allclose(spec.dt, 0.025)

    @pytest.mark.parametrize(
        "kwargs",
        [dict(R=0.0, N=31), dict(R=-1, N=31), dict(R=1, N=1), dict(R=1, N=31, t_final=0.0),
         dict(R=1, N=31, steps=0), dict(R=1, N=31, time_rule="nope")],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(GeometryError):
            GridSpec(**kwargs)


class TestPointSets:
    @pytest.mark.parametrize("N", [12, 13, 16])
    def test_matches_brute_force(self, N):
        sets = classify_nodes(GridSpec(0.5, N))
        mplus, nplus, gamma, g_in, g_ex = brute_force_sets(0.5, N)
        assert as_set(sets.Mplus) == mplus
        assert as_set(sets.Nplus) == nplus
        assert as_set(sets.gamma_mask) == gamma
        assert as_set(sets.gamma_in_mask) == g_in
        assert as_set(sets.gamma_ex_mask) == g_ex

    def test_counts_scale_free(self):
        a = classify_nodes(GridSpec(0.5, 31)).counts()
        b = classify_nodes(GridSpec(1.0, 31)).counts()
        assert a == b
        assert (a["M+"], a["gamma"], a["gamma_in"], a["gamma_ex"]) == (9104, 3488, 1656, 1832)

    def test_margin_check(self):
        with pytest.raises(GeometryError, match="too close"):
            classify_nodes(GridSpec(0.5, 8))
        sets = classify_nodes(GridSpec(0.5, 8), check_margin=False)
        assert sets.gamma.size > 0

    @settings(max_examples=25, deadline=None)
    @given(N=st.integers(4, 40), R=st.sampled_from([0.5, 1.0, 2.0]))
    def test_partition_invariants(self, N, R):
        s = classify_nodes(GridSpec(R, N), check_margin=False)
        assert not np.any(s.Mplus & s.Mminus)
        assert np.array_equal(s.Mplus | s.Mminus, s.M0)
        assert np.all(s.Nplus[s.Mplus]) and np.all(s.Nminus[s.Mminus])
        assert np.array_equal(s.gamma_mask, s.Nplus & s.Nminus)
        assert set(s.gamma_in) | set(s.gamma_ex) == set(s.gamma)
        assert not set(s.gamma_in) & set(s.gamma_ex)
        assert np.all(s.Mplus.ravel()[s.gamma_in]) and np.all(s.Mminus.ravel()[s.gamma_ex])
        assert np.array_equal(s.gamma[s.gamma_in_pos], s.gamma_in)

    def test_gamma_hugs_the_sphere(self):
        spec = GridSpec(0.5, 31)
        nodes = boundary_nodes(classify_nodes(spec))
        assert np.all(np.abs(nodes.d) <= math.sqrt(3) * spec.h)


class TestFootPoint:
    def test_axis_points(self):
        th, ph, d = foot_point([1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, -0.5], 1.0)
        assert_allclose(th, [np.pi / 2, np.pi / 2, np.pi])
        assert_allclose(ph, [0.0, np.pi / 2, 0.0])
        assert_allclose(d, [0.0, 1.0, -0.5])

    def test_phi_range(self):
        _, ph, _ = foot_point(-1.0, -1e-3, 0.2, 1.0)
        assert 0 <= ph < 2 * np.pi and ph > np.pi

    def test_origin_rejected(self):
        with pytest.raises(GeometryError):
            foot_point(0.0, 0.0, 0.0, 1.0)

    @settings(max_examples=50, deadline=None)
    @given(st.tuples(*[st.floats(-3, 3)] * 3).filter(lambda p: sum(c * c for c in p) > 1e-4))
    def test_foot_lies_on_sphere_along_ray(self, p):
        R = 0.7
        th, ph, d = foot_point(*p, R)
        st_ = np.sin(th)
        foot = np.array([R * st_ * np.cos(ph), R * st_ * np.sin(ph), R * np.cos(th)])
        r = np.linalg.norm(p)
        assert_allclose(d, r - R, atol=1e-12)
        assert_allclose(foot * r / R, p, atol=1e-9)


class TestPerturbation:
    def test_draws_reproducible_and_keyed(self):
        spec = GridSpec(0.5, 12)
        a = perturbation_draws(spec, 3, "d")
        assert np.array_equal(a, perturbation_draws(spec, 3, "d"))
        assert not np.array_equal(a, perturbation_draws(spec, 4, "d"))
        assert not np.array_equal(a, perturbation_draws(spec, 3, "theta"))
        assert np.all((a >= 0) & (a < 1))

    def test_shift_bounded_by_h_cubed(self):
        spec = GridSpec(0.5, 16)
        nodes = boundary_nodes(classify_nodes(spec))
        pert = perturb_boundary_data(nodes, spec, 1, ["d", "phi"])
        assert np.all((pert.d - nodes.d >= 0) & (pert.d - nodes.d < spec.h**3))
        assert np.all((pert.phi - nodes.phi >= 0) & (pert.phi - nodes.phi < spec.h**3))
        assert np.array_equal(pert.theta, nodes.theta)

    def test_independent_of_node_subset(self):
        spec = GridSpec(0.5, 16)
        nodes = boundary_nodes(classify_nodes(spec))
        full = perturb_boundary_data(nodes, spec, 9, ["theta"])
        pos = np.arange(len(nodes))[::-3]
        part = perturb_boundary_data(nodes.subset(pos), spec, 9, ["theta"])
        assert np.array_equal(part.theta, full.theta[pos])

    def test_theta_clipped(self):
        spec = GridSpec(0.5, 4)
        nodes = boundary_nodes(classify_nodes(spec, check_margin=False))
        nodes.theta[:] = np.pi
        pert = perturb_boundary_data(nodes, spec, 0, ["theta"])
        assert np.all(pert.theta <= np.pi)

    def test_unknown_target(self):
        spec = GridSpec(0.5, 12)
        nodes = boundary_nodes(classify_nodes(spec))
        with pytest.raises(GeometryError):
            perturb_boundary_data(nodes, spec, 0, ["r"])
