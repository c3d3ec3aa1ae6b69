"""Vorticity, the weighted pair (Phi, Gamma) and residuals of the vorticity identities.

All quantities are cell-centred. Residual norms are weighted L^2 norms over an
interior window that drops ``collar`` cells next to the outer wall ``r = R``
and next to both z walls; the axis is kept, since the identities hold there
by parity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .fields import ScalarField, State
from .grid import Grid, lp_norm
from .ops import (curl_arrays, ddr_cell, ddz_cell, lap_cell_swirl_velocity, lap_rface_arrays,
                  lap_zface_arrays, rface_to_cell, zface_to_cell)

COLLAR = 3


@dataclass
class VorticityPack:
    omega_r: ScalarField
    omega_theta: ScalarField
    omega_3: ScalarField
    gamma: ScalarField
    phi: ScalarField
    gamma_norm: float
    phi_norm: float

    @property
    def B(self) -> tuple[ScalarField, ScalarField]:
        """Meridional vorticity ``omega^r e_r + omega^3 e_3`` as a component pair."""
        return self.omega_r, self.omega_3


def vorticity_pack(state: State, zbc: str = "noslip") -> VorticityPack:
    g = state.grid
    om_r, om_t, om_3 = curl_arrays(g, state.ur.values, state.uth.values, state.uz.values, zbc)
    rc = g.r_c[:, None]
    gamma = ScalarField(g, "cell", om_t / rc, "even")
    phi = ScalarField(g, "cell", om_r / rc, "even")
    return VorticityPack(
        omega_r=ScalarField(g, "cell", om_r, "odd"),
        omega_theta=ScalarField(g, "cell", om_t, "odd"),
        omega_3=ScalarField(g, "cell", om_3, "even"),
        gamma=gamma,
        phi=phi,
        gamma_norm=lp_norm(gamma, 2),
        phi_norm=lp_norm(phi, 2),
    )


def interior_mask(g: Grid, collar: int = COLLAR, axis_radius: float = 0.0) -> np.ndarray:
    """Cells at least ``collar`` cells from the walls and with ``r >= axis_radius``."""
    if collar < 0 or 2 * collar >= g.nz or collar >= g.nr:
        raise DomainError(f"collar of {collar} cells does not fit the grid")
    if not 0.0 <= axis_radius < g.R - collar * g.hr:
        raise DomainError(f"axis radius {axis_radius} leaves no interior cells")
    m = np.zeros(g.shape("cell"), dtype=bool)
    m[: g.nr - collar, collar: g.nz - collar] = True
    m[g.r_c < axis_radius] = False
    return m


def _window_l2(g: Grid, f: np.ndarray, mask: np.ndarray) -> float:
    w = g.weights("cell")
    return float(np.sqrt(np.sum((f * f * w)[mask])))


def cell_velocity(state: State) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return (rface_to_cell(state.ur.values), state.uth.values.copy(),
            zface_to_cell(state.uz.values))


def identity_residuals(state: State, collar: int = COLLAR, zbc: str = "noslip") -> dict:
    """Weighted L^2 residuals of the four vorticity identities.

    ``res1``: ``(Delta - 1/r^2) u^r - d_3 omega^theta``;
    ``res2``: ``(Delta - 1/r^2) u^theta - (d_r omega^3 - d_3 omega^r)``;
    ``res3``: ``Delta u^3 + d_r omega^theta + Gamma``;
    ``res_div``: ``(1/r) d_r (r omega^r) + d_3 omega^3``.

    The identities use ``div u = 0``; for a divergent field ``res1`` and
    ``res3`` pick up the components of ``grad div u``.
    """
    g = state.grid
    mask = interior_mask(g, collar)
    pack = vorticity_pack(state, zbc)
    om_r, om_t, om_3 = pack.omega_r.values, pack.omega_theta.values, pack.omega_3.values
    rc = g.r_c[:, None]

    lap_ur = rface_to_cell(lap_rface_arrays(g, state.ur.values, zbc))
    res1 = lap_ur - ddz_cell(g, om_t)

    lap_uth = lap_cell_swirl_velocity(g, state.uth.values, zbc)
    res2 = lap_uth - (ddr_cell(g, om_3, "even") - ddz_cell(g, om_r))

    lap_uz = zface_to_cell(lap_zface_arrays(g, state.uz.values))
    res3 = lap_uz + ddr_cell(g, om_t, "odd") + om_t / rc

    res_div = ddr_cell(g, om_r, "odd") + om_r / rc + ddz_cell(g, om_3)

    return {
        "res1": _window_l2(g, res1, mask),
        "res2": _window_l2(g, res2, mask),
        "res3": _window_l2(g, res3, mask),
        "res_div": _window_l2(g, res_div, mask),
    }


def phi_gamma_residual(history, collar: int = COLLAR, zbc: str = "noslip",
                       rtol: float = 1e-9, axis_radius: float = 0.0) -> dict:
    """Residuals of the (Phi, Gamma) evolution system at the middle of three states.

    The time derivative is the centred difference over the two intervals,
    which must have equal length. Every spatial term is assembled from the
    cell-centred stencils of :mod:`axiswirl.ops`.

    The conservative swirl Laplacian has an ``O(h^2 / r)`` truncation error
    next to the axis, and the equations divide it by ``r`` once more, so over
    the full window the residual converges at first order. Excluding a fixed
    radius ``axis_radius`` around the axis restores second order.
    """
    s0, s1, s2 = history
    dt1 = s1.t - s0.t
    dt2 = s2.t - s1.t
    if not (dt1 > 0 and dt2 > 0) or abs(dt1 - dt2) > rtol * max(dt1, dt2):
        raise DomainError(f"phi_gamma_residual needs a uniform step, got {dt1!r} and {dt2!r}")
    g = s1.grid
    mask = interior_mask(g, collar, axis_radius)
    rc = g.r_c[:, None]
    p0, p2 = vorticity_pack(s0, zbc), vorticity_pack(s2, zbc)
    p1 = vorticity_pack(s1, zbc)
    phi, gam = p1.phi.values, p1.gamma.values
    om_r, om_3 = p1.omega_r.values, p1.omega_3.values
    dphi_dt = (p2.phi.values - p0.phi.values) / (dt1 + dt2)
    dgam_dt = (p2.gamma.values - p0.gamma.values) / (dt1 + dt2)

    ur, uth, uz = cell_velocity(s1)
    rho = s1.rho.values
    pi = s1.pi.values

    def advect(q):
        return ur * ddr_cell(g, q, "even") + uz * ddz_cell(g, q)

    # Phi equation
    swirl_term = lap_cell_swirl_velocity(g, s1.uth.values, zbc) / rho
    q = ur / rc
    stretch = om_r * ddr_cell(g, q, "even") + om_3 * ddz_cell(g, q)
    res_phi = dphi_dt + advect(phi) + ddz_cell(g, swirl_term) / rc - stretch

    # Gamma equation
    a_r = (rface_to_cell(lap_rface_arrays(g, s1.ur.values, zbc)) - ddr_cell(g, pi, "even")) / rho
    a_z = (zface_to_cell(lap_zface_arrays(g, s1.uz.values)) - ddz_cell(g, pi)) / rho
    res_gam = (dgam_dt + advect(gam) - ddz_cell(g, a_r) / rc + ddr_cell(g, a_z, "even") / rc
               + 2.0 * uth / rc * phi)

    return {"res_phi": _window_l2(g, res_phi, mask), "res_gamma": _window_l2(g, res_gam, mask)}


def swirl_gradient_sq(state: State, zbc: str = "noslip") -> float:
    """``||grad(u^theta e_theta)||_2^2 = ||grad u^theta||_2^2 + ||u^theta / r||_2^2``.

    Computed from one-sided face differences of u^theta (independently of the
    vorticity stencils), with the wall ghost values of the velocity
    conditions.
    """
    g = state.grid
    u = state.uth.values
    hr, hz = g.hr, g.hz
    c = 2.0 * np.pi * hr * hz
    # radial differences at interior r-faces and at the wall face (ghost -u)
    dr = np.empty((g.nr, g.nz))
    dr[:-1] = (u[1:] - u[:-1]) / hr
    dr[-1] = -2.0 * u[-1] / hr
    gr = float(np.sum(dr * dr * g.r_f[1:, None])) * c
    # axial differences at z-faces including both walls
    zs = -1.0 if zbc == "noslip" else 1.0
    up = np.concatenate([zs * u[:, :1], u, zs * u[:, -1:]], axis=1)
    dz = (up[:, 1:] - up[:, :-1]) / hz
    wz = np.ones(g.nz + 1)
    wz[0] = wz[-1] = 0.5
    gz = float(np.sum(dz * dz * g.r_c[:, None] * wz[None, :])) * c
    hoop = float(np.sum((u / g.r_c[:, None]) ** 2 * g.weights("cell")))
    return gr + gz + hoop


def meridional_vorticity_sq(state: State, zbc: str = "noslip") -> float:
    """``||omega^r||_2^2 + ||omega^3||_2^2`` from the curl stencils."""
    pack = vorticity_pack(state, zbc)
    return lp_norm(pack.omega_r, 2) ** 2 + lp_norm(pack.omega_3, 2) ** 2
