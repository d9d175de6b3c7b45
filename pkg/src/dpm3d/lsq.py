"""Column-scaled normal equations solved by Cholesky."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, lapack

__all__ = [
    "SingularSystemError",
    "LSSystem",
    "NormalEquations",
    "column_scaling",
    "solve_normal_equations",
    "condition_estimate",
]

log = logging.getLogger(__name__)


class SingularSystemError(np.linalg.LinAlgError):
    pass


def column_scaling(M: np.ndarray) -> np.ndarray:
    """Diagonal of ``P`` with ``P_ii = 1 / max |M[:, i]|``."""
    colmax = np.max(np.abs(M), axis=0)
    return _scaling_from_colmax(colmax)


def _scaling_from_colmax(colmax: np.ndarray) -> np.ndarray:
    if np.any(~(colmax > 0)):
        bad = np.flatnonzero(~(colmax > 0))
        raise SingularSystemError(f"zero column(s) in least-squares matrix: {bad[:10].tolist()}")
    return 1.0 / colmax


def _cholesky(G: np.ndarray):
    c, info = lapack.dpotrf(G, lower=False, clean=True, overwrite_a=False)
    if info > 0:
        diag = np.diag(G)
        raise SingularSystemError(
            f"normal matrix is not positive definite: Cholesky pivot {info} of "
            f"{G.shape[0]} failed (smallest diagonal entry {diag.min():.3e})"
        )
    if info < 0:
        raise ValueError(f"dpotrf rejected argument {-info}")
    return c


def _cond_spd(G: np.ndarray) -> float:
    ev = np.linalg.eigvalsh(G)
    if ev[0] <= 0:
        return float("inf")
    return float(ev[-1] / ev[0])


class NormalEquations:
    """Factorized ``(M P)^T (M P)`` for a tall matrix ``M``.

    Build either from ``M`` directly or, when rows are assembled in blocks,
    from the unscaled Gram matrix ``M^T M`` and the column maxima.
    """

    def __init__(self, gram: np.ndarray, scale: np.ndarray, n_rows: int, M: np.ndarray | None = None):
        n_cols = gram.shape[0]
        if n_rows < n_cols:
            raise SingularSystemError(
                f"least-squares system has {n_rows} rows for {n_cols} unknowns"
            )
        if n_rows < 2 * n_cols:
            log.warning("least-squares system is only %d x %d (rows < 2 x columns)", n_rows, n_cols)
        self.gram = gram
        self.scale = scale
        self.n_rows = n_rows
        self.M = M
        self.scaled = gram * np.outer(scale, scale)
        self.factor = _cholesky(self.scaled)

    @classmethod
    def from_matrix(cls, M: np.ndarray, scale: np.ndarray | None = None) -> "NormalEquations":
        M = np.asarray(M, dtype=float)
        if scale is None:
            scale = column_scaling(M)
        return cls(M.T @ M, scale, M.shape[0], M)

    @classmethod
    def from_gram(cls, gram: np.ndarray, colmax: np.ndarray, n_rows: int) -> "NormalEquations":
        return cls(gram, _scaling_from_colmax(colmax), n_rows)

    def solve_projected(self, Mtb: np.ndarray) -> np.ndarray:
        """Solve given ``M^T b`` (for callers that keep ``M`` in blocks)."""
        y = cho_solve((self.factor, False), self.scale * Mtb)
        return self.scale * y

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self.M is None:
            raise ValueError("system was built from a Gram matrix; use solve_projected")
        return self.solve_projected(self.M.T @ b)

    def condition(self, scaled: bool = True) -> float:
        """2-norm condition number of the (scaled) normal matrix.

        With ``M`` at hand the singular values of ``M P`` are used, which stays
        accurate when the normal matrix itself is numerically singular.
        """
        if self.M is not None:
            s = np.linalg.svd(self.M * self.scale if scaled else self.M, compute_uv=False)
            return float((s[0] / s[-1]) ** 2) if s[-1] > 0 else float("inf")
        return _cond_spd(self.scaled if scaled else self.gram)


@dataclass
class LSSystem:
    M: np.ndarray
    rhs: np.ndarray
    scale: np.ndarray | None = None

    def __post_init__(self):
        self.M = np.asarray(self.M, dtype=float)
        if self.scale is None:
            self.scale = column_scaling(self.M)


def solve_normal_equations(system: LSSystem) -> np.ndarray:
    return NormalEquations.from_matrix(system.M, system.scale).solve(system.rhs)


def condition_estimate(system: LSSystem, scaled: bool = True) -> float:
    M = system.M * system.scale if scaled else system.M
    return _cond_spd(M.T @ M)
