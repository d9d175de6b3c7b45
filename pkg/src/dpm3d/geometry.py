"""Cubic auxiliary grid, DPM point sets, and foot points on the sphere.

The sphere of radius ``R`` is centred at the origin and embedded in the cube
``[-(R + R/5), R + R/5]^3`` discretized with ``N`` cells per axis.  Lattice
indices ``(j, k, l)`` run over ``0..N`` inclusive and arrays are laid out as
``field[j, k, l]`` with ``j`` along x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

__all__ = [
    "GeometryError",
    "GridSpec",
    "PointSets",
    "BoundaryNodes",
    "classify_nodes",
    "foot_point",
    "boundary_nodes",
    "perturb_boundary_data",
]

# field ids used to key the perturbation stream
PERTURB_FIELDS = {"d": 0, "theta": 1, "phi": 2}
TIME_RULES = ("h", "exact")


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Embedding cube, mesh and time step for one run.

    Time stepping rules:

    * ``"h"`` (default): ``dt = h`` and ``floor(t_final / h)`` steps, so the
      last level ``n dt`` may fall short of ``t_final``; if ``h > t_final`` a
      single step of length ``t_final`` is taken.
    * ``"exact"``: the largest ``dt <= h`` with ``n dt = t_final``.

    ``steps`` fixes the step count (``dt = t_final / steps``) and overrides
    both rules.  ``sigma = 2 / dt``.
    """

    R: float
    N: int
    t_final: float = 0.1
    steps: int | None = None
    time_rule: str = "h"

    def __post_init__(self):
        if not (self.R > 0 and math.isfinite(self.R)):
            raise GeometryError(f"radius must be positive, got {self.R}")
        if self.N < 2:
            raise GeometryError(f"need at least 2 cells per axis, got N={self.N}")
        if not (self.t_final > 0 and math.isfinite(self.t_final)):
            raise GeometryError(f"t_final must be positive, got {self.t_final}")
        if self.steps is not None and self.steps < 1:
            raise GeometryError(f"step count must be positive, got {self.steps}")
        if self.time_rule not in TIME_RULES:
            raise GeometryError(f"time_rule must be one of {TIME_RULES}, got {self.time_rule!r}")

    @property
    def lo(self) -> float:
        return -(self.R + self.R / 5)

    @property
    def hi(self) -> float:
        return self.R + self.R / 5

    @property
    def h(self) -> float:
        return 2 * (self.R + self.R / 5) / self.N

    @property
    def n_steps(self) -> int:
        if self.steps is not None:
            return self.steps
        # tolerance guards against t_final/h landing a hair off an integer
        if self.time_rule == "exact":
            return max(1, math.ceil(self.t_final / self.h - 1e-9))
        return max(1, math.floor(self.t_final / self.h + 1e-9))

    @property
    def dt(self) -> float:
        if self.steps is None and self.time_rule == "h" and self.h <= self.t_final * (1 + 1e-9):
            return self.h
        return self.t_final / self.n_steps

    @property
    def t_end(self) -> float:
        return self.n_steps * self.dt

    @property
    def sigma(self) -> float:
        return 2.0 / self.dt

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.N + 1,) * 3

    def coords(self) -> np.ndarray:
        """1-D node coordinates along one axis."""
        j = np.arange(self.N + 1)
        return self.R * 6.0 * (2 * j - self.N) / (5.0 * self.N)

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = self.coords()
        return np.meshgrid(x, x, x, indexing="ij")

    def with_t_final(self, t_final: float) -> "GridSpec":
        return replace(self, t_final=t_final)


@dataclass
class PointSets:
    """Membership masks over the ``(N+1)^3`` lattice plus flat index lists.

    ``gamma`` is ordered by flat lattice index; ``gamma_in_pos`` gives the
    positions of the interior part inside that ordering, so a density
    ``w`` on gamma restricts to gamma_in as ``w[gamma_in_pos]``.
    """

    spec: GridSpec
    M0: np.ndarray
    Mplus: np.ndarray
    Mminus: np.ndarray
    Nplus: np.ndarray
    Nminus: np.ndarray
    N0: np.ndarray
    gamma_mask: np.ndarray
    gamma: np.ndarray = field(init=False)
    gamma_in: np.ndarray = field(init=False)
    gamma_ex: np.ndarray = field(init=False)
    gamma_in_pos: np.ndarray = field(init=False)
    gamma_ex_pos: np.ndarray = field(init=False)

    def __post_init__(self):
        self.gamma = np.flatnonzero(self.gamma_mask)
        inside = self.Mplus.ravel()[self.gamma]
        self.gamma_in_pos = np.flatnonzero(inside)
        self.gamma_ex_pos = np.flatnonzero(~inside)
        self.gamma_in = self.gamma[self.gamma_in_pos]
        self.gamma_ex = self.gamma[self.gamma_ex_pos]

    @property
    def gamma_in_mask(self) -> np.ndarray:
        return self.gamma_mask & self.Mplus

    @property
    def gamma_ex_mask(self) -> np.ndarray:
        return self.gamma_mask & self.Mminus

    def counts(self) -> dict[str, int]:
        return {
            "M+": int(self.Mplus.sum()),
            "M-": int(self.Mminus.sum()),
            "N+": int(self.Nplus.sum()),
            "gamma": int(self.gamma.size),
            "gamma_in": int(self.gamma_in.size),
            "gamma_ex": int(self.gamma_ex.size),
        }


_STENCIL7 = ndimage.generate_binary_structure(3, 1)


def _inside_ball(spec: GridSpec) -> np.ndarray:
    # |x|^2 < R^2  <=>  36 * sum (2j - N)^2 < 25 N^2, evaluated in integers so
    # lattice nodes lying exactly on the sphere are classified deterministically
    m = 2 * np.arange(spec.N + 1, dtype=np.int64) - spec.N
    sq = m * m
    r2 = sq[:, None, None] + sq[None, :, None] + sq[None, None, :]
    return 36 * r2 < 25 * spec.N * spec.N


def classify_nodes(spec: GridSpec, check_margin: bool = True) -> PointSets:
    """Build M0, M+, M-, N+, N-, N0 and the discrete grid boundary.

    With ``check_margin`` the stencils of M+ must stay off the cube faces,
    otherwise the bulk update would read the homogeneous AP boundary data.
    """
    M0 = np.zeros(spec.shape, dtype=bool)
    M0[1:-1, 1:-1, 1:-1] = True
    Mplus = M0 & _inside_ball(spec)
    Mminus = M0 & ~Mplus
    Nplus = ndimage.binary_dilation(Mplus, _STENCIL7)
    Nminus = ndimage.binary_dilation(Mminus, _STENCIL7)
    N0 = ndimage.binary_dilation(M0, _STENCIL7)
    if check_margin and np.any(Nplus & ~M0):
        raise GeometryError(
            f"sphere R={spec.R} too close to the cube faces at N={spec.N}: "
            "stencils of interior nodes reach the boundary layer"
        )
    return PointSets(
        spec=spec,
        M0=M0,
        Mplus=Mplus,
        Mminus=Mminus,
        Nplus=Nplus,
        Nminus=Nminus,
        N0=N0,
        gamma_mask=Nplus & Nminus,
    )


@dataclass
class BoundaryNodes:
    """Gamma nodes with their foot-point angles and signed distances.

    ``index`` holds flat lattice indices (same order as ``PointSets.gamma``).
    """

    index: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    d: np.ndarray
    R: float

    def __len__(self):
        return self.index.size

    def foot_xyz(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Cartesian foot points rebuilt from the (possibly perturbed) angles."""
        st = np.sin(self.theta)
        return (
            self.R * st * np.cos(self.phi),
            self.R * st * np.sin(self.phi),
            self.R * np.cos(self.theta),
        )

    def subset(self, pos: np.ndarray) -> "BoundaryNodes":
        return BoundaryNodes(
            self.index[pos], self.theta[pos], self.phi[pos], self.d[pos], self.R
        )


def foot_point(x, y, z, R: float):
    """Radial projection onto the sphere: returns ``(theta, phi, d)``.

    ``d = |x| - R`` is positive outside; ``phi`` is mapped into ``[0, 2 pi)``.
    Works elementwise on arrays.
    """
    x, y, z = (np.asarray(a, dtype=float) for a in (x, y, z))
    r = np.sqrt(x * x + y * y + z * z)
    if np.any(r == 0):
        raise GeometryError("foot point undefined at the origin")
    theta = np.arccos(np.clip(z / r, -1.0, 1.0))
    phi = np.mod(np.arctan2(y, x), 2 * np.pi)
    return theta, phi, r - R


def boundary_nodes(sets: PointSets) -> BoundaryNodes:
    spec = sets.spec
    xc = spec.coords()
    j, k, l = np.unravel_index(sets.gamma, spec.shape)
    theta, phi, d = foot_point(xc[j], xc[k], xc[l], spec.R)
    return BoundaryNodes(sets.gamma.copy(), theta, phi, d, spec.R)


def perturbation_draws(spec: GridSpec, seed: int, name: str) -> np.ndarray:
    """Uniform [0, 1) draw for every lattice node, keyed by (seed, field).

    A node reads its draw at its flat lattice index, so the value does not
    depend on which other nodes are perturbed or in which order.
    """
    key = np.array([seed, PERTURB_FIELDS[name]], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    return rng.random(int(np.prod(spec.shape)))


def perturb_boundary_data(
    nodes: BoundaryNodes,
    spec: GridSpec,
    seed: int,
    targets=(),
) -> BoundaryNodes:
    """Shift each targeted field by ``eps * h**3`` with ``eps ~ U[0, 1]``."""
    targets = set(targets)
    unknown = targets - set(PERTURB_FIELDS)
    if unknown:
        raise GeometryError(f"unknown perturbation targets {sorted(unknown)}")
    out = {"d": nodes.d.copy(), "theta": nodes.theta.copy(), "phi": nodes.phi.copy()}
    h3 = spec.h**3
    for name in sorted(targets, key=PERTURB_FIELDS.get):
        eps = perturbation_draws(spec, seed, name)[nodes.index]
        out[name] = out[name] + eps * h3
    out["theta"] = np.clip(out["theta"], 0.0, np.pi)
    return BoundaryNodes(nodes.index.copy(), out["theta"], out["phi"], out["d"], nodes.R)
