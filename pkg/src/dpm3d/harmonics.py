"""Real, unnormalized spherical harmonics indexed by a single integer kappa.

    kappa = l^2 + 2m + 1   (m >= 0)
    kappa = l^2 + 2|m|     (m < 0)

so kappa runs 1, 2, 3, ... through (l, m) = (0,0), (1,0), (1,-1), (1,1),
(2,0), ...  The associated Legendre functions carry no Condon-Shortley
phase and no normalization.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "kappa",
    "degree_order",
    "assoc_legendre",
    "eval_basis",
    "lb_eigenvalue",
    "SpectralBasis",
]


def kappa(l: int, m: int) -> int:
    if l < 0 or abs(m) > l:
        raise ValueError(f"invalid degree/order pair (l={l}, m={m})")
    return l * l + 2 * m + 1 if m >= 0 else l * l + 2 * abs(m)


def degree_order(k: int) -> tuple[int, int]:
    """Inverse of :func:`kappa`."""
    if k < 1:
        raise ValueError(f"kappa starts at 1, got {k}")
    l = math.isqrt(k - 1)
    r = k - l * l  # 1 .. 2l+1
    if r % 2 == 1:
        return l, (r - 1) // 2
    return l, -(r // 2)


def assoc_legendre(lmax: int, x) -> np.ndarray:
    """``P[l, m]`` for ``0 <= m <= l <= lmax`` at the points ``x``.

    Diagonal seeded by ``(2m-1)!! (1-x^2)^{m/2}``, then the three-term
    recurrence upward in ``l`` at fixed ``m``.  Entries with ``m > l`` are 0.
    """
    x = np.asarray(x, dtype=float)
    P = np.zeros((lmax + 1, lmax + 1) + x.shape)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    diag = np.ones_like(x)
    for m in range(lmax + 1):
        if m > 0:
            diag = diag * (2 * m - 1) * s
        P[m, m] = diag
        if m + 1 <= lmax:
            P[m + 1, m] = x * (2 * m + 1) * diag
        for l in range(m + 2, lmax + 1):
            P[l, m] = ((2 * l - 1) * x * P[l - 1, m] - (l + m - 1) * P[l - 2, m]) / (l - m)
    return P


def eval_basis(k: int, theta, phi) -> np.ndarray:
    """Value of basis function ``kappa = k`` at polar/azimuthal angles."""
    l, m = degree_order(k)
    plm = assoc_legendre(l, np.cos(theta))[l, abs(m)]
    if m > 0:
        return plm * np.cos(m * np.asarray(phi))
    if m < 0:
        return plm * np.sin(abs(m) * np.asarray(phi))
    return plm * np.ones_like(np.asarray(phi, dtype=float))


def lb_eigenvalue(l, R: float):
    """Laplace-Beltrami eigenvalue ``-l(l+1)/R^2`` on the sphere of radius R."""
    l = np.asarray(l)
    return -l * (l + 1) / (R * R)


class SpectralBasis:
    """The first ``L`` functions in kappa order on a sphere of radius ``R``."""

    def __init__(self, L: int, R: float):
        if L < 1:
            raise ValueError("basis needs at least one function")
        self.L = L
        self.R = R
        self.entries = [degree_order(k) for k in range(1, L + 1)]
        self.degrees = np.array([l for l, _ in self.entries])
        self.orders = np.array([m for _, m in self.entries])
        self.lmax = int(self.degrees.max())
        self.eigenvalues = lb_eigenvalue(self.degrees, R).astype(float)

    @classmethod
    def full(cls, lmax: int, R: float) -> "SpectralBasis":
        return cls((lmax + 1) ** 2, R)

    def evaluate(self, theta, phi) -> np.ndarray:
        """Matrix ``Phi[p, kappa-1]`` over sample points ``p``."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        P = assoc_legendre(self.lmax, np.cos(theta))
        out = np.empty((theta.size, self.L))
        for col, (l, m) in enumerate(self.entries):
            if m > 0:
                out[:, col] = P[l, m] * np.cos(m * phi)
            elif m < 0:
                out[:, col] = P[l, -m] * np.sin(-m * phi)
            else:
                out[:, col] = P[l, 0]
        return out

    def surface_laplacian(self, theta, phi) -> np.ndarray:
        return self.evaluate(theta, phi) * self.eigenvalues

    def reconstruct(self, coefficients, theta, phi) -> np.ndarray:
        return self.evaluate(theta, phi) @ np.asarray(coefficients)
