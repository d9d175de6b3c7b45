"""Discrete error norms in the bulk and on the surface, and mesh rates.

All norms take the maximum over the recorded time levels.  Bulk norms use
the indicator of M+ with cell weight ``h^3``; surface norms use a
``(theta_j, phi_k)`` sampling grid with area weight
``R^2 sin(theta_j) dtheta dphi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

__all__ = [
    "SurfaceGrid",
    "bulk_level",
    "bulk_norms",
    "bulk_gradient_norms",
    "surface_level",
    "surface_norms",
    "convergence_rate",
    "ErrorReport",
]


@dataclass(frozen=True)
class SurfaceGrid:
    """Midpoint grid in theta, uniform periodic grid in phi."""

    n_theta: int = 64
    n_phi: int = 128

    @property
    def dtheta(self) -> float:
        return math.pi / self.n_theta

    @property
    def dphi(self) -> float:
        return 2 * math.pi / self.n_phi

    def angles(self) -> tuple[np.ndarray, np.ndarray]:
        """Mesh arrays of shape ``(n_theta, n_phi)``."""
        th = (np.arange(self.n_theta) + 0.5) * self.dtheta
        ph = np.arange(self.n_phi) * self.dphi
        return np.meshgrid(th, ph, indexing="ij")


def _central(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    out = np.zeros_like(a)
    sl_c = [slice(1, -1)] * 3
    sl_p = list(sl_c)
    sl_m = list(sl_c)
    sl_p[axis] = slice(2, None)
    sl_m[axis] = slice(None, -2)
    out[tuple(sl_c)] = (a[tuple(sl_p)] - a[tuple(sl_m)]) / (2 * h)
    return out


def bulk_level(numeric: np.ndarray, exact: np.ndarray, mplus: np.ndarray, h: float) -> dict:
    """Bulk errors at one time level.

    Returns ``inf``, squared ``l2`` and ``h1`` sums (before the square
    root) and the per-component gradient maxima.
    """
    if numeric.shape != exact.shape or numeric.shape != mplus.shape:
        raise ValueError("numeric, exact and M+ arrays must share a shape")
    e = (exact - numeric)[mplus]
    out = {"inf": float(np.max(np.abs(e), initial=0.0)), "l2sq": float(np.sum(e * e) * h**3)}
    h1 = out["l2sq"]
    diff = exact - numeric
    for axis, name in enumerate("xyz"):
        ge = _central(diff, axis, h)[mplus]
        out["grad" + name] = float(np.max(np.abs(ge), initial=0.0))
        h1 += float(np.sum(ge * ge) * h**3)
    out["h1sq"] = h1
    return out


def bulk_norms(numeric_history, exact_history, mplus: np.ndarray, h: float):
    """``(E_inf, E_L2, E_H1)`` over paired sequences of lattice arrays."""
    inf = l2 = h1 = 0.0
    for num, ex in zip(numeric_history, exact_history, strict=True):
        lv = bulk_level(num, ex, mplus, h)
        inf = max(inf, lv["inf"])
        l2 = max(l2, math.sqrt(lv["l2sq"]))
        h1 = max(h1, math.sqrt(lv["h1sq"]))
    return inf, l2, h1


def bulk_gradient_norms(numeric_history, exact_history, mplus: np.ndarray, h: float):
    """Max-norm errors of the central-difference gradient components."""
    g = [0.0, 0.0, 0.0]
    for num, ex in zip(numeric_history, exact_history, strict=True):
        lv = bulk_level(num, ex, mplus, h)
        g = [max(g[i], lv["grad" + c]) for i, c in enumerate("xyz")]
    return tuple(g)


def surface_level(numeric: np.ndarray, exact: np.ndarray, theta: np.ndarray,
                  R: float, dtheta: float, dphi: float) -> dict:
    """Surface errors at one level on a ``(n_theta, n_phi)`` grid.

    The theta difference uses rows ``j`` with a successor ``j + 1``; the phi
    difference wraps periodically.
    """
    if numeric.shape != exact.shape:
        raise ValueError("numeric and exact surface arrays must share a shape")
    st = np.sin(theta)
    if np.any(st == 0):
        raise ValueError("surface grid rows must avoid the poles (sin theta = 0)")
    w = R * R * st * dtheta * dphi
    e = exact - numeric
    l2sq = float(np.sum(e * e * w))
    de_th = (e[1:, :] - e[:-1, :]) / (R * dtheta)
    de_ph = (np.roll(e, -1, axis=1) - e) / (R * st * dphi)
    h1sq = l2sq + float(np.sum(de_th**2 * w[:-1, :])) + float(np.sum(de_ph**2 * w))
    return {"inf": float(np.max(np.abs(e))), "l2sq": l2sq, "h1sq": h1sq}


def surface_norms(numeric_history, exact_history, theta, R: float, dtheta: float, dphi: float):
    inf = l2 = h1 = 0.0
    for num, ex in zip(numeric_history, exact_history, strict=True):
        lv = surface_level(num, ex, theta, R, dtheta, dphi)
        inf = max(inf, lv["inf"])
        l2 = max(l2, math.sqrt(lv["l2sq"]))
        h1 = max(h1, math.sqrt(lv["h1sq"]))
    return inf, l2, h1


def convergence_rate(e_coarse: float, e_fine: float) -> float:
    return math.log2(e_coarse / e_fine)


@dataclass
class ErrorReport:
    N: int
    E_inf_bulk: float = 0.0
    E_l2_bulk: float = 0.0
    E_h1_bulk: float = 0.0
    E_inf_surf: float = 0.0
    E_l2_surf: float = 0.0
    E_h1_surf: float = 0.0
    E_inf_gradx: float = 0.0
    E_inf_grady: float = 0.0
    E_inf_gradz: float = 0.0
    cond_normal: float = float("nan")
    cond_unscaled: float = float("nan")
    cond_last: float = float("nan")
    seconds: float = 0.0
    extra: dict = field(default_factory=dict)

    NORMS = (
        "E_inf_bulk", "E_l2_bulk", "E_h1_bulk",
        "E_inf_surf", "E_l2_surf", "E_h1_surf",
        "E_inf_gradx", "E_inf_grady", "E_inf_gradz",
    )

    def absorb_bulk(self, level: dict):
        self.E_inf_bulk = max(self.E_inf_bulk, level["inf"])
        self.E_l2_bulk = max(self.E_l2_bulk, math.sqrt(level["l2sq"]))
        self.E_h1_bulk = max(self.E_h1_bulk, math.sqrt(level["h1sq"]))
        self.E_inf_gradx = max(self.E_inf_gradx, level["gradx"])
        self.E_inf_grady = max(self.E_inf_grady, level["grady"])
        self.E_inf_gradz = max(self.E_inf_gradz, level["gradz"])

    def absorb_surface(self, level: dict):
        self.E_inf_surf = max(self.E_inf_surf, level["inf"])
        self.E_l2_surf = max(self.E_l2_surf, math.sqrt(level["l2sq"]))
        self.E_h1_surf = max(self.E_h1_surf, math.sqrt(level["h1sq"]))

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "extra"}


def rates(reports: list[ErrorReport], name: str) -> list[float | None]:
    out: list[float | None] = [None]
    for a, b in zip(reports, reports[1:]):
        out.append(convergence_rate(getattr(a, name), getattr(b, name)))
    return out
