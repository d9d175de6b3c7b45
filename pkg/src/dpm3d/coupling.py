"""Extension-operator matrices, known vectors and surface time trackers.

For a gamma node at signed distance ``d`` from its foot point, the density is
the second-order normal Taylor extension ``u + d u_r + d^2/2 u_rr`` of
surface data.  Each case eliminates some of these terms through the surface
equation and leaves spectral unknowns:

* dynamic BC: ``u_gamma = A a + c``             (a: u on the surface)
* linear coupling: ``u_gamma = A a + B b + c``  (a: v, b: u_rr)
* nonlinear coupling: ``u_gamma = A a + B b + C c + d``  (a: v, b: u_rr, c: u)

``phi`` below is the basis matrix at the foot points (``|gamma| x L``) and
``lam`` the Laplace-Beltrami eigenvalues, so ``Delta_Gamma phi = phi * lam``.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "assemble_case1_A",
    "case1_known_vector",
    "update_ut",
    "assemble_case2a_AB",
    "case2a_known_vector",
    "assemble_case2b_ABC",
    "case2b_known_vector",
    "linearize_v",
    "case2b_coupling_rows",
    "update_vt",
    "vtt_estimate",
]


def assemble_case1_A(phi: np.ndarray, lam: np.ndarray, d: np.ndarray, sigma: float, R: float):
    d = np.asarray(d)[:, None]
    k = 2.0 / R + 1.0
    c_val = 1 - d * (1 + sigma) + d * d / 2 * (k * (1 + sigma) - 1)
    c_lap = d - d * d / 2 * k
    return c_val * phi + c_lap * (phi * lam)


def case1_known_vector(u_prev, ut_prev, g_next, f_next, d, sigma: float, R: float):
    """Known part of the dynamic-BC extension.

    ``f_next`` and ``g_next`` are sampled at the foot points.
    """
    k = 2.0 / R + 1.0
    s = sigma * np.asarray(u_prev) + g_next + ut_prev
    return d * s - d * d / 2 * (k * s) + d * d / 2 * (-np.asarray(f_next) + g_next)


def update_ut(u_next, u_prev, ut_prev, sigma: float):
    return sigma * np.asarray(u_next) - sigma * np.asarray(u_prev) - ut_prev


def assemble_case2a_AB(phi: np.ndarray, lam: np.ndarray, d: np.ndarray, sigma: float):
    d = np.asarray(d)[:, None]
    lap = phi * lam
    A = (1 + sigma) * phi - lap + d * (-sigma * phi + lap)
    B = d * d / 2 * phi
    return A, B


def case2a_known_vector(v_prev, vt_prev, g_next, d, sigma: float):
    s = sigma * np.asarray(v_prev) + g_next + vt_prev
    return (d - 1.0) * s


def assemble_case2b_ABC(phi: np.ndarray, lam: np.ndarray, d: np.ndarray, sigma: float):
    d = np.asarray(d)[:, None]
    A = d * (-sigma * phi + phi * lam)
    B = d * d / 2 * phi
    C = phi.copy()
    return A, B, C


def case2b_known_vector(v_prev, vt_prev, g_next, w_next, d, sigma: float):
    """``d (sigma v^i + g^{i+1} + v_t^i - w^{i+1})``; ``w`` is the coupling source."""
    return d * (sigma * np.asarray(v_prev) + g_next + vt_prev - w_next)


def linearize_v(v, vt, vtt, dt: float, order: int = 2):
    """Taylor guess for ``v^{i+1}`` used to linearize ``u v``."""
    if order == 2:
        return np.asarray(v) + dt * np.asarray(vt)
    if order == 3:
        return np.asarray(v) + dt * np.asarray(vt) + dt * dt / 2 * np.asarray(vtt)
    raise ValueError(f"linearization order must be 2 or 3, got {order}")


def case2b_coupling_rows(phi_in, lam, v_lin, v_prev, vt_prev, g_next, sigma: float):
    """Linearized coupling rows ``-A' a + C' c = rhs`` on gamma_in.

    Returns ``(A', C', rhs)``.  The coupling source cancels from this
    relation, so it does not appear.
    """
    A_p = -(-sigma * phi_in + phi_in * lam)
    C_p = phi_in * np.asarray(v_lin)[:, None]
    rhs = -sigma * np.asarray(v_prev) - g_next - vt_prev
    return A_p, C_p, rhs


def update_vt(v_next, v_prev, vt_prev, sigma: float):
    return sigma * np.asarray(v_next) - sigma * np.asarray(v_prev) - vt_prev


def vtt_estimate(vt, vt_prev, dt: float):
    return (np.asarray(vt) - np.asarray(vt_prev)) / dt
