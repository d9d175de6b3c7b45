"""Manufactured solutions and the forcing terms they induce.

Every exact solution has the form ``e^t s(x, y, z)``, so time derivatives
equal the function itself.  Spatial parts carry hand-derived gradients and
Hessians; radial derivatives and the surface Laplacian on the sphere follow
from

    u_r  = grad u . x / |x|
    u_rr = x^T (Hess u) x / |x|^2
    Delta_Gamma u = Delta u - u_rr - (2/R) u_r      on |x| = R
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "SpatialPart",
    "TestCase",
    "TESTS",
    "get_test",
    "exact",
    "exact_grad",
    "radial_derivatives",
    "surface_laplacian",
    "coupling_h",
    "forcing_f",
    "forcing_g",
    "forcing_w",
]

DYNAMIC = "dynamic"
LINEAR = "linear-coupling"
NONLINEAR = "nonlinear-coupling"


@dataclass(frozen=True)
class SpatialPart:
    value: Callable
    grad: Callable  # returns (sx, sy, sz)
    hess: Callable  # returns 3x3 nested tuple


def _quadratic():
    def value(x, y, z):
        return x * x + 2 * y * y + 3 * z * z

    def grad(x, y, z):
        return 2 * x, 4 * y, 6 * z

    def hess(x, y, z):
        o = np.zeros_like(np.asarray(x, dtype=float))
        return ((o + 2, o, o), (o, o + 4, o), (o, o, o + 6))

    return SpatialPart(value, grad, hess)


def _sines():
    def value(x, y, z):
        return np.sin(x) * np.sin(2 * y) * np.sin(3 * z)

    def grad(x, y, z):
        sx, sy, sz = np.sin(x), np.sin(2 * y), np.sin(3 * z)
        cx, cy, cz = np.cos(x), 2 * np.cos(2 * y), 3 * np.cos(3 * z)
        return cx * sy * sz, sx * cy * sz, sx * sy * cz

    def hess(x, y, z):
        sx, sy, sz = np.sin(x), np.sin(2 * y), np.sin(3 * z)
        cx, cy, cz = np.cos(x), 2 * np.cos(2 * y), 3 * np.cos(3 * z)
        xx = -sx * sy * sz
        yy = -4 * sx * sy * sz
        zz = -9 * sx * sy * sz
        xy = cx * cy * sz
        xz = cx * sy * cz
        yz = sx * cy * cz
        return ((xx, xy, xz), (xy, yy, yz), (xz, yz, zz))

    return SpatialPart(value, grad, hess)


def _gauss():
    # s = exp(q),  q = -x(x-1) - y(y-1)
    def value(x, y, z):
        return np.exp(-x * (x - 1) - y * (y - 1)) + 0 * z

    def grad(x, y, z):
        s = value(x, y, z)
        return s * (1 - 2 * x), s * (1 - 2 * y), 0 * s

    def hess(x, y, z):
        s = value(x, y, z)
        qx, qy = 1 - 2 * x, 1 - 2 * y
        o = 0 * s
        xx = s * (qx * qx - 2)
        yy = s * (qy * qy - 2)
        xy = s * qx * qy
        return ((xx, xy, o), (xy, yy, o), (o, o, o))

    return SpatialPart(value, grad, hess)


def _gauss_times_poly():
    # s * p with p = 1 + x(1-2x) + y(1-2y)
    g = _gauss()

    def p(x, y):
        return 1 + x * (1 - 2 * x) + y * (1 - 2 * y)

    def value(x, y, z):
        return g.value(x, y, z) * p(x, y)

    def grad(x, y, z):
        s = g.value(x, y, z)
        gs = g.grad(x, y, z)
        pv = p(x, y)
        gp = (1 - 4 * x, 1 - 4 * y, 0 * s)
        return tuple(pv * gs[i] + s * gp[i] for i in range(3))

    def hess(x, y, z):
        s = g.value(x, y, z)
        gs = g.grad(x, y, z)
        hs = g.hess(x, y, z)
        pv = p(x, y)
        gp = (1 - 4 * x, 1 - 4 * y, 0 * s)
        hp = ((-4 + 0 * s, 0 * s, 0 * s), (0 * s, -4 + 0 * s, 0 * s), (0 * s, 0 * s, 0 * s))
        return tuple(
            tuple(
                pv * hs[i][j] + gs[i] * gp[j] + gp[i] * gs[j] + s * hp[i][j]
                for j in range(3)
            )
            for i in range(3)
        )

    return SpatialPart(value, grad, hess)


@dataclass(frozen=True)
class TestCase:
    id: str
    case: str
    R: float
    L: int
    u: SpatialPart
    v: SpatialPart | None = None
    description: str = ""

    __test__ = False  # not a pytest class


TESTS = {
    "d1": TestCase("d1", DYNAMIC, 0.5, 9, _quadratic(), None, "u = e^t (x^2 + 2y^2 + 3z^2)"),
    "d2": TestCase("d2", DYNAMIC, 0.5, 400, _sines(), None, "u = e^t sin x sin 2y sin 3z"),
    "lin1": TestCase(
        "lin1", LINEAR, 1.0, 529, _gauss(), _gauss_times_poly(),
        "u = e^t e^{-x(x-1)-y(y-1)}, v = u (1 + x(1-2x) + y(1-2y))",
    ),
    "nl1": TestCase(
        "nl1", NONLINEAR, 1.0, 529, _gauss(), _gauss_times_poly(),
        "u = e^t e^{-x(x-1)-y(y-1)}, v = u (1 + x(1-2x) + y(1-2y))",
    ),
    "nl2": TestCase("nl2", NONLINEAR, 1.0, 400, _sines(), _sines(), "u = v = e^t sin x sin 2y sin 3z"),
}


def get_test(name: str) -> TestCase:
    try:
        return TESTS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown test {name!r}; choose from {sorted(TESTS)}") from None


def _part(test: TestCase, which: str) -> SpatialPart:
    if which == "u":
        return test.u
    if which == "v" and test.v is not None:
        return test.v
    raise ValueError(f"test {test.id} has no field {which!r}")


def exact(test: TestCase, which: str, x, y, z, t):
    return np.exp(t) * _part(test, which).value(x, y, z)


def exact_grad(test: TestCase, which: str, x, y, z, t):
    g = _part(test, which).grad(x, y, z)
    return tuple(np.exp(t) * gi for gi in g)


def laplacian(test: TestCase, which: str, x, y, z, t):
    H = _part(test, which).hess(x, y, z)
    return np.exp(t) * (H[0][0] + H[1][1] + H[2][2])


def radial_derivatives(test: TestCase, which: str, x, y, z, t):
    """``(f_r, f_rr)`` of the closed form at points away from the origin."""
    x, y, z = (np.asarray(a, dtype=float) for a in (x, y, z))
    part = _part(test, which)
    r = np.sqrt(x * x + y * y + z * z)
    n = (x / r, y / r, z / r)
    g = part.grad(x, y, z)
    H = part.hess(x, y, z)
    fr = sum(g[i] * n[i] for i in range(3))
    frr = sum(H[i][j] * n[i] * n[j] for i in range(3) for j in range(3))
    et = np.exp(t)
    return et * fr, et * frr


def surface_laplacian(test: TestCase, which: str, x, y, z, t, R: float | None = None):
    R = test.R if R is None else R
    fr, frr = radial_derivatives(test, which, x, y, z, t)
    return laplacian(test, which, x, y, z, t) - frr - (2.0 / R) * fr


def coupling_h(test: TestCase, u, v):
    if test.case == LINEAR:
        return u - v
    if test.case == NONLINEAR:
        return u * v
    raise ValueError(f"test {test.id} has no bulk-surface coupling")


def forcing_f(test: TestCase, x, y, z, t):
    """``f = u_t - Delta u``."""
    return exact(test, "u", x, y, z, t) - laplacian(test, "u", x, y, z, t)


def forcing_g(test: TestCase, x, y, z, t):
    """Surface source at points on the sphere.

    dynamic BC:  g = u_t + u + u_r - Delta_Gamma u
    coupling:    g = v_t - Delta_Gamma v - h(u, v)
    """
    if test.case == DYNAMIC:
        u = exact(test, "u", x, y, z, t)
        ur, _ = radial_derivatives(test, "u", x, y, z, t)
        return 2 * u + ur - surface_laplacian(test, "u", x, y, z, t)
    u = exact(test, "u", x, y, z, t)
    v = exact(test, "v", x, y, z, t)
    return v - surface_laplacian(test, "v", x, y, z, t) - coupling_h(test, u, v)


def forcing_w(test: TestCase, x, y, z, t):
    """Coupling source ``w = -u_r - u v`` for the nonlinear tests."""
    if test.case != NONLINEAR:
        raise ValueError(f"test {test.id} has no nonlinear coupling source")
    u = exact(test, "u", x, y, z, t)
    v = exact(test, "v", x, y, z, t)
    ur, _ = radial_derivatives(test, "u", x, y, z, t)
    return -ur - u * v


def exact_dt(test: TestCase, which: str, x, y, z, t):
    """Time derivative of the closed form (equal to the value for ``e^t s``)."""
    return exact(test, which, x, y, z, t)
