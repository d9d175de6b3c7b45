"""Auxiliary problem: ``(Delta_h - sigma I) w = q`` on the cube interior.

The 7-point Laplacian with homogeneous Dirichlet data on the faces is
diagonalized by the type-I discrete sine transform along each axis, which
gives an ``O(N^3 log N)`` direct solver for any ``N`` (no power-of-two
restriction).  A sparse LU solver is kept as a verification oracle for small
grids.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy import fft
from scipy.sparse.linalg import splu

from .geometry import GridSpec

__all__ = ["StencilError", "apply_L", "laplacian", "APSolver", "solve_ap", "solve_ap_dense"]

DENSE_MAX_N = 20


class StencilError(IndexError):
    pass


def laplacian(field: np.ndarray, h: float) -> np.ndarray:
    """7-point Laplacian on the interior nodes of the last three axes.

    Returns an array of the input's shape with zeros on the face layer.
    """
    out = np.zeros_like(field)
    c = field[..., 1:-1, 1:-1, 1:-1]
    out[..., 1:-1, 1:-1, 1:-1] = (
        field[..., 2:, 1:-1, 1:-1]
        + field[..., :-2, 1:-1, 1:-1]
        + field[..., 1:-1, 2:, 1:-1]
        + field[..., 1:-1, :-2, 1:-1]
        + field[..., 1:-1, 1:-1, 2:]
        + field[..., 1:-1, 1:-1, :-2]
        - 6.0 * c
    ) / (h * h)
    return out


def apply_L(field: np.ndarray, h: float, sigma: float, at=None) -> np.ndarray:
    """``(Delta_h - sigma I) field`` evaluated at the nodes ``at``.

    ``at`` is a boolean lattice mask or an array of flat indices; ``None``
    means every interior node and returns the full lattice array.
    """
    field = np.asarray(field, dtype=float)
    full = laplacian(field, h) - sigma * field
    if at is None:
        full[..., 0, :, :] = full[..., -1, :, :] = 0.0
        full[..., :, 0, :] = full[..., :, -1, :] = 0.0
        full[..., :, :, 0] = full[..., :, :, -1] = 0.0
        return full
    shape = field.shape[-3:]
    at = np.asarray(at)
    idx = np.flatnonzero(at) if at.dtype == bool else at.astype(np.int64).ravel()
    jkl = np.unravel_index(idx, shape)
    for axis, n in zip(jkl, shape):
        if np.any((axis == 0) | (axis == n - 1)):
            raise StencilError("7-point stencil leaves the lattice at a face node")
    return full.reshape(field.shape[:-3] + (-1,))[..., idx]


class APSolver:
    """Fast sine-transform solver bound to one grid.

    ``calls`` counts solved right-hand sides so callers can audit their
    per-step solve budget.
    """

    def __init__(self, spec: GridSpec, workers: int | None = -1):
        self.spec = spec
        self.workers = workers
        n = spec.N
        p = np.arange(1, n)
        lam1 = (2.0 * np.cos(p * np.pi / n) - 2.0) / spec.h**2
        self.eigenvalues = (
            lam1[:, None, None] + lam1[None, :, None] + lam1[None, None, :] - spec.sigma
        )
        self.calls = 0

    def solve(self, q: np.ndarray) -> np.ndarray:
        """Solve for one lattice array or a batch ``(B, N+1, N+1, N+1)``.

        Face entries of ``q`` are ignored; the result vanishes on the faces.
        """
        q = np.asarray(q, dtype=float)
        if q.shape[-3:] != self.spec.shape:
            raise ValueError(f"expected trailing shape {self.spec.shape}, got {q.shape}")
        if not np.all(np.isfinite(q)):
            raise ValueError("AP right-hand side contains non-finite entries")
        axes = (-3, -2, -1)
        inner = q[..., 1:-1, 1:-1, 1:-1]
        # orthonormal DST-I is an involution
        qhat = fft.dstn(inner, type=1, axes=axes, norm="ortho", workers=self.workers)
        qhat /= self.eigenvalues
        w = np.zeros_like(q)
        w[..., 1:-1, 1:-1, 1:-1] = fft.dstn(
            qhat, type=1, axes=axes, norm="ortho", workers=self.workers
        )
        self.calls += int(np.prod(q.shape[:-3], dtype=np.int64))
        return w


def solve_ap(q: np.ndarray, spec: GridSpec) -> np.ndarray:
    return APSolver(spec).solve(q)


def _dense_operator(spec: GridSpec) -> sp.csc_matrix:
    n = spec.N - 1
    main = -2.0 * np.ones(n)
    off = np.ones(n - 1)
    T = sp.diags([off, main, off], [-1, 0, 1]) / spec.h**2
    eye = sp.identity(n)
    A = (
        sp.kron(sp.kron(T, eye), eye)
        + sp.kron(sp.kron(eye, T), eye)
        + sp.kron(sp.kron(eye, eye), T)
        - spec.sigma * sp.identity(n**3)
    )
    return A.tocsc()


def solve_ap_dense(q: np.ndarray, spec: GridSpec) -> np.ndarray:
    """Reference solve by explicit sparse assembly and LU factorization."""
    if spec.N > DENSE_MAX_N:
        raise ValueError(f"dense oracle limited to N <= {DENSE_MAX_N}, got {spec.N}")
    q = np.asarray(q, dtype=float)
    if not np.all(np.isfinite(q)):
        raise ValueError("AP right-hand side contains non-finite entries")
    lu = splu(_dense_operator(spec))
    w = np.zeros_like(q)
    rhs = q[1:-1, 1:-1, 1:-1].ravel()
    w[1:-1, 1:-1, 1:-1] = lu.solve(rhs).reshape((spec.N - 1,) * 3)
    return w
