"""Particular solutions, difference potentials and boundary projections."""

from __future__ import annotations

import numpy as np

from .apsolver import APSolver, apply_L
from .geometry import PointSets

__all__ = ["Potentials"]


class Potentials:
    """DPM operators on one grid.

    Densities are 1-D arrays over ``sets.gamma`` (flat-index order) and are
    implicitly extended by zero to the rest of the lattice.  Fields returned
    here are full lattice arrays that vanish outside N+.
    """

    def __init__(self, sets: PointSets, solver: APSolver | None = None, batch: int = 64):
        self.sets = sets
        self.spec = sets.spec
        self.solver = solver if solver is not None else APSolver(sets.spec)
        self.batch = batch
        self._nplus = sets.Nplus.astype(float)
        self._mplus = sets.Mplus.astype(float)
        self._mminus = sets.Mminus.astype(float)

    def extend(self, w: np.ndarray) -> np.ndarray:
        """Zero extension of a density (or a ``(|gamma|, k)`` stack) to the lattice."""
        w = np.asarray(w, dtype=float)
        n_lat = int(np.prod(self.spec.shape))
        if w.ndim == 1:
            out = np.zeros(n_lat)
            out[self.sets.gamma] = w
            return out.reshape(self.spec.shape)
        out = np.zeros((w.shape[1], n_lat))
        out[:, self.sets.gamma] = w.T
        return out.reshape((w.shape[1],) + self.spec.shape)

    def particular_solution(self, F: np.ndarray) -> np.ndarray:
        """AP solve with ``F`` on M+ and zero on M-, restricted to N+.

        ``F`` is a lattice array; only its M+ entries are read.
        """
        F = np.asarray(F, dtype=float)
        if not np.all(np.isfinite(F[self.sets.Mplus])):
            raise ValueError("non-finite right-hand side on M+")
        return self.solver.solve(F * self._mplus) * self._nplus

    def _potential_rhs(self, W: np.ndarray) -> np.ndarray:
        return apply_L(W, self.spec.h, self.spec.sigma) * self._mminus

    def difference_potential(self, w: np.ndarray) -> np.ndarray:
        """``P_{N+ gamma} w``: AP solve with ``L[w]`` on M- and zero on M+."""
        W = self.extend(w)
        return self.solver.solve(self._potential_rhs(W)) * self._nplus

    def trace(self, field: np.ndarray, subset: str = "gamma") -> np.ndarray:
        idx = {"gamma": self.sets.gamma, "gamma_in": self.sets.gamma_in}[subset]
        flat = np.asarray(field).reshape(np.asarray(field).shape[:-3] + (-1,))
        return flat[..., idx]

    def project_gamma(self, w: np.ndarray) -> np.ndarray:
        """``P_gamma w``, the trace on gamma of the difference potential."""
        return self.trace(self.difference_potential(w), "gamma")

    def bep_residual(self, u_gamma, gf_gamma, restrict: str = "gamma") -> np.ndarray:
        """``u_gamma - Tr P u_gamma - GF_gamma`` on gamma or gamma_in.

        ``gf_gamma`` is the trace of the particular solution on gamma.
        """
        res = np.asarray(u_gamma) - self.project_gamma(u_gamma) - np.asarray(gf_gamma)
        if restrict == "gamma_in":
            return res[self.sets.gamma_in_pos]
        return res

    def project_columns(self, cols: np.ndarray) -> np.ndarray:
        """Apply ``I - P_gamma`` to each column and keep the gamma_in rows.

        ``cols`` is ``(|gamma|, k)``; one AP solve per column, processed in
        batches to bound memory.
        """
        cols = np.asarray(cols, dtype=float)
        if cols.ndim == 1:
            return self.project_columns(cols[:, None])[:, 0]
        pos = self.sets.gamma_in_pos
        out = np.empty((pos.size, cols.shape[1]))
        for start in range(0, cols.shape[1], self.batch):
            block = cols[:, start : start + self.batch]
            W = self.extend(block)
            Pw = self.solver.solve(self._potential_rhs(W))
            out[:, start : start + block.shape[1]] = (
                block[pos] - self.trace(Pw, "gamma_in").T
            )
        return out
