"""Time marching for the three surface models.

One run precomputes the projected extension blocks ``(I - P_gamma)[A|B|C]``
restricted to gamma_in (one AP solve per basis column) and, for the linear
models, a Cholesky factor of the scaled normal matrix.  Each step then costs
three AP solves: the particular solution, the projection of the known
vector, and the Green's formula reconstruction.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import coupling, mms
from .apsolver import APSolver, apply_L, laplacian
from .geometry import (
    GridSpec,
    boundary_nodes,
    classify_nodes,
    perturb_boundary_data,
)
from .harmonics import SpectralBasis
from .lsq import NormalEquations
from .metrics import ErrorReport, SurfaceGrid, bulk_level, surface_level
from .potentials import Potentials

__all__ = ["NumericalAbort", "RunState", "Discretization", "DPMRun", "reconstruct_surface", "run"]

log = logging.getLogger(__name__)


class NumericalAbort(RuntimeError):
    pass


def reconstruct_surface(coefficients, basis: SpectralBasis, theta, phi) -> np.ndarray:
    return basis.reconstruct(coefficients, theta, phi)


@dataclass
class RunState:
    i: int
    t: float
    u: np.ndarray
    surf: dict
    coeffs: np.ndarray | None = None
    residual: float = 0.0


@dataclass
class Discretization:
    """Everything that depends on the mesh but not on the time level."""

    test: mms.TestCase
    spec: GridSpec
    L: int
    perturb: tuple = ()
    seed: int = 0
    batch: int = 64

    def __post_init__(self):
        t0 = time.perf_counter()
        spec = self.spec
        self.sets = classify_nodes(spec)
        self.solver = APSolver(spec)
        self.pot = Potentials(self.sets, self.solver, batch=self.batch)
        nodes = boundary_nodes(self.sets)
        if self.perturb:
            nodes = perturb_boundary_data(nodes, spec, self.seed, self.perturb)
        self.nodes = nodes
        self.foot = nodes.foot_xyz()
        self.basis = SpectralBasis(self.L, spec.R)
        self.phi = self.basis.evaluate(nodes.theta, nodes.phi)
        self.lam = self.basis.eigenvalues
        pos = self.sets.gamma_in_pos
        self.phi_in = self.phi[pos]

        case = self.test.case
        sigma, d, R = spec.sigma, nodes.d, spec.R
        if case == mms.DYNAMIC:
            self.blocks = [coupling.assemble_case1_A(self.phi, self.lam, d, sigma, R)]
        elif case == mms.LINEAR:
            self.blocks = list(coupling.assemble_case2a_AB(self.phi, self.lam, d, sigma))
        else:
            self.blocks = list(coupling.assemble_case2b_ABC(self.phi, self.lam, d, sigma))
        self.extension = np.hstack(self.blocks)
        self.projected = self.pot.project_columns(self.extension)

        self.normal = None
        if case in (mms.DYNAMIC, mms.LINEAR):
            self.normal = NormalEquations.from_matrix(self.projected)
        else:
            self.gram_bep = self.projected.T @ self.projected
            self.colmax_bep = np.max(np.abs(self.projected), axis=0)
            L = self.L
            Ap = -(-sigma * self.phi_in + self.phi_in * self.lam)
            self.coupling_A = Ap
            # Gram pieces of the coupling rows that do not change in time
            self.gram_AA = Ap.T @ Ap
            self.colmax_A = np.max(np.abs(Ap), axis=0)
            self.idx_a = np.arange(0, L)
            self.idx_c = np.arange(2 * L, 3 * L)

        # lattice points used every step
        x = spec.coords()
        self.mplus_idx = np.flatnonzero(self.sets.Mplus)
        self.nplus_idx = np.flatnonzero(self.sets.Nplus)
        self._mp_xyz = self._xyz(x, self.mplus_idx)
        self._np_xyz = self._xyz(x, self.nplus_idx)
        self.surface_grid = SurfaceGrid()
        th, ph = self.surface_grid.angles()
        self.surf_theta = th
        self.surf_basis = self.basis.evaluate(th.ravel(), ph.ravel())
        st = np.sin(th)
        self.surf_xyz = (R * st * np.cos(ph), R * st * np.sin(ph), R * np.cos(th))
        self.precompute_seconds = time.perf_counter() - t0
        self.precompute_solves = self.solver.calls

    def _xyz(self, x, flat):
        j, k, l = np.unravel_index(flat, self.spec.shape)
        return x[j], x[k], x[l]

    def f_on_mplus(self, t: float) -> np.ndarray:
        return mms.forcing_f(self.test, *self._mp_xyz, t)

    def exact_lattice(self, t: float) -> np.ndarray:
        out = np.zeros(int(np.prod(self.spec.shape)))
        out[self.nplus_idx] = mms.exact(self.test, "u", *self._np_xyz, t)
        return out.reshape(self.spec.shape)

    def condition(self, gram=None, scale=None, scaled: bool = True) -> float:
        if gram is None:
            return self.normal.condition(scaled)
        G = gram * np.outer(scale, scale) if scaled else gram
        ev = np.linalg.eigvalsh(G)
        return float(ev[-1] / ev[0]) if ev[0] > 0 else float("inf")


_CACHE: dict = {}
_CACHE_SIZE = 3


def discretization(test, spec, L, perturb=(), seed=0) -> Discretization:
    """Memoized :class:`Discretization` (precompute is the expensive part)."""
    key = (test.id, spec, L, tuple(sorted(perturb)), seed if perturb else 0)
    disc = _CACHE.get(key)
    if disc is None:
        disc = Discretization(test, spec, L, tuple(sorted(perturb)), seed)
        if len(_CACHE) >= _CACHE_SIZE:
            _CACHE.pop(next(iter(_CACHE)))
        _CACHE[key] = disc
    return disc


class DPMRun:
    """Driver for one test on one mesh."""

    def __init__(self, test, N: int, L: int | None = None, order: int = 2,
                 perturb=(), seed: int = 0, t_final: float = 0.1, steps: int | None = None,
                 time_rule: str = "h", cache: bool = True):
        self.test = mms.get_test(test) if isinstance(test, str) else test
        if order not in (2, 3):
            raise ValueError(f"linearization order must be 2 or 3, got {order}")
        self.order = order
        self.spec = GridSpec(self.test.R, N, t_final, steps, time_rule)
        L = self.test.L if L is None else L
        if cache:
            self.disc = discretization(self.test, self.spec, L, perturb, seed)
        else:
            self.disc = Discretization(self.test, self.spec, L, tuple(sorted(perturb)), seed)
        self.cond_history: list[float] = []
        self.cond_unscaled_history: list[float] = []

    @property
    def case(self) -> str:
        return self.test.case

    def initial_state(self) -> RunState:
        disc, test = self.disc, self.test
        u0 = disc.exact_lattice(0.0)
        fx, fy, fz = disc.foot
        if self.case == mms.DYNAMIC:
            surf = {
                "u": mms.exact(test, "u", fx, fy, fz, 0.0),
                "ut": mms.exact_dt(test, "u", fx, fy, fz, 0.0),
            }
        else:
            surf = {
                "v": mms.exact(test, "v", fx, fy, fz, 0.0),
                "vt": mms.exact_dt(test, "v", fx, fy, fz, 0.0),
                "vt_prev": None,
                # initial v_tt from the closed form (the e^t solutions satisfy v_tt = v)
                "vtt0": mms.exact_dt(test, "v", fx, fy, fz, 0.0),
            }
        return RunState(0, 0.0, u0, surf)

    def rhs(self, state: RunState) -> np.ndarray:
        """Bulk right-hand side on M+ (lattice array, zero elsewhere)."""
        spec, disc = self.spec, self.disc
        t_next = (state.i + 1) * spec.dt
        u = state.u
        F = np.zeros(int(np.prod(spec.shape)))
        lap = laplacian(u, spec.h).ravel()[disc.mplus_idx]
        F[disc.mplus_idx] = (
            -(lap + spec.sigma * u.ravel()[disc.mplus_idx])
            - disc.f_on_mplus(t_next)
            - disc.f_on_mplus(state.t)
        )
        return F.reshape(spec.shape)

    def step(self, state: RunState) -> RunState:
        spec, disc, test = self.spec, self.disc, self.test
        sigma, dt = spec.sigma, spec.dt
        t_next = (state.i + 1) * dt
        fx, fy, fz = disc.foot
        d = disc.nodes.d
        pos = disc.sets.gamma_in_pos

        F = self.rhs(state)
        G = disc.pot.particular_solution(F)
        gf_in = disc.pot.trace(G, "gamma_in")
        g_next = mms.forcing_g(test, fx, fy, fz, t_next)
        surf = dict(state.surf)

        if self.case == mms.DYNAMIC:
            f_next = mms.forcing_f(test, fx, fy, fz, t_next)
            known = coupling.case1_known_vector(surf["u"], surf["ut"], g_next, f_next, d, sigma, spec.R)
            rhs = gf_in - disc.pot.project_columns(known)
            coeffs = disc.normal.solve(rhs)
            if state.i == 0:
                self._record_condition(disc.normal.condition(), disc.normal.condition(False))
        elif self.case == mms.LINEAR:
            known = coupling.case2a_known_vector(surf["v"], surf["vt"], g_next, d, sigma)
            rhs = gf_in - disc.pot.project_columns(known)
            coeffs = disc.normal.solve(rhs)
            if state.i == 0:
                self._record_condition(disc.normal.condition(), disc.normal.condition(False))
        else:
            w_next = mms.forcing_w(test, fx, fy, fz, t_next)
            known = coupling.case2b_known_vector(surf["v"], surf["vt"], g_next, w_next, d, sigma)
            rhs = gf_in - disc.pot.project_columns(known)
            coeffs = self._solve_nonlinear(state, surf, g_next, rhs)

        if not np.all(np.isfinite(coeffs)):
            raise NumericalAbort(
                f"non-finite spectral coefficients at step {state.i + 1} (t={t_next:.4g}); "
                f"max |rhs| = {np.max(np.abs(rhs)):.3e}"
            )
        density = disc.extension @ coeffs + known
        u_next = disc.pot.difference_potential(density) + G
        if not np.all(np.isfinite(u_next)):
            raise NumericalAbort(
                f"non-finite bulk solution at step {state.i + 1} (t={t_next:.4g}); "
                f"max |coeff| = {np.max(np.abs(coeffs)):.3e}"
            )

        L = disc.L
        if self.case == mms.DYNAMIC:
            u_s = disc.phi @ coeffs
            surf["ut"] = coupling.update_ut(u_s, surf["u"], surf["ut"], sigma)
            surf["u"] = u_s
        else:
            v_s = disc.phi @ coeffs[:L]
            vt = coupling.update_vt(v_s, surf["v"], surf["vt"], sigma)
            surf["vt_prev"] = surf["vt"]
            surf["vt"] = vt
            surf["v"] = v_s

        resid = apply_L(u_next, spec.h, sigma, disc.mplus_idx) - F.ravel()[disc.mplus_idx]
        scale = max(np.max(np.abs(F.ravel()[disc.mplus_idx])), 1e-300)
        new = RunState(state.i + 1, t_next, u_next, surf, coeffs, float(np.max(np.abs(resid)) / scale))
        log.debug(
            "step %d t=%.5f |coeffs|=%.3e eq-residual=%.2e",
            new.i, new.t, np.max(np.abs(coeffs)), new.residual,
        )
        return new

    def _solve_nonlinear(self, state, surf, g_next, rhs_bep):
        disc, spec = self.disc, self.spec
        pos = disc.sets.gamma_in_pos
        L = disc.L
        order = self.order
        vtt = 0.0
        if order == 3:
            if surf["vt_prev"] is None:
                vtt = surf["vtt0"][pos]
            else:
                vtt = coupling.vtt_estimate(surf["vt"][pos], surf["vt_prev"][pos], spec.dt)
        v_lin = coupling.linearize_v(surf["v"][pos], surf["vt"][pos], vtt, spec.dt, order)
        _, C_p, rhs_c = coupling.case2b_coupling_rows(
            disc.phi_in, disc.lam, v_lin, surf["v"][pos], surf["vt"][pos], g_next[pos], spec.sigma
        )
        A_p = disc.coupling_A
        gram = disc.gram_bep.copy()
        ia, ic = disc.idx_a, disc.idx_c
        gram[np.ix_(ia, ia)] += disc.gram_AA
        cross = -(A_p.T @ C_p)
        gram[np.ix_(ia, ic)] += cross
        gram[np.ix_(ic, ia)] += cross.T
        gram[np.ix_(ic, ic)] += C_p.T @ C_p
        colmax = disc.colmax_bep.copy()
        colmax[ia] = np.maximum(colmax[ia], disc.colmax_A)
        colmax[ic] = np.maximum(colmax[ic], np.max(np.abs(C_p), axis=0))
        ne = NormalEquations.from_gram(gram, colmax, 2 * pos.size)
        Mtb = disc.projected.T @ rhs_bep
        Mtb[ia] += -(A_p.T @ rhs_c)
        Mtb[ic] += C_p.T @ rhs_c
        last = state.i + 1 == spec.n_steps
        if state.i == 0 or last:
            self._record_condition(ne.condition(), ne.condition(False))
        self.last_system = (gram, colmax)
        return ne.solve_projected(Mtb)

    def _record_condition(self, scaled, unscaled):
        self.cond_history.append(scaled)
        self.cond_unscaled_history.append(unscaled)

    def surface_values(self, coeffs) -> np.ndarray:
        disc = self.disc
        a = coeffs[: disc.L]
        return (disc.surf_basis @ a).reshape(disc.surf_theta.shape)

    def surface_exact(self, t: float) -> np.ndarray:
        which = "u" if self.case == mms.DYNAMIC else "v"
        return mms.exact(self.test, which, *self.disc.surf_xyz, t)

    def run(self, callback=None) -> tuple[ErrorReport, RunState]:
        t0 = time.perf_counter()
        disc, spec = self.disc, self.spec
        report = ErrorReport(N=spec.N)
        state = self.initial_state()
        grid = disc.surface_grid
        self.max_residual = 0.0
        for _ in range(spec.n_steps):
            state = self.step(state)
            self.max_residual = max(self.max_residual, state.residual)
            report.absorb_bulk(
                bulk_level(state.u, disc.exact_lattice(state.t), disc.sets.Mplus, spec.h)
            )
            report.absorb_surface(
                surface_level(
                    self.surface_values(state.coeffs), self.surface_exact(state.t),
                    disc.surf_theta, spec.R, grid.dtheta, grid.dphi,
                )
            )
            if callback is not None:
                callback(self, state)
        report.cond_normal = self.cond_history[0]
        report.cond_unscaled = self.cond_unscaled_history[0]
        report.cond_last = self.cond_history[-1]
        report.seconds = time.perf_counter() - t0 + disc.precompute_seconds
        report.extra = {
            "max_equation_residual": self.max_residual,
            "gamma_in": int(disc.sets.gamma_in.size),
            "gamma": int(disc.sets.gamma.size),
            "L": disc.L,
            "steps": spec.n_steps,
            "dt": spec.dt,
        }
        return report, state


def run(test, N: int, **kwargs) -> ErrorReport:
    report, _ = DPMRun(test, N, **kwargs).run()
    return report
