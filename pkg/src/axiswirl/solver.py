"""Time integration of the axisymmetric inhomogeneous Navier-Stokes system.

One step is: explicit Heun predictor for (u^r, u^theta, u^3) without pressure,
variable-density projection onto discretely divergence-free fields, then
MUSCL transport of the density with the projected velocity. Viscosity is 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DomainError, SolverError, StepRejected
from .fields import ScalarField, State, apply_axis_parity
from .grid import Grid
from .ops import (DEFAULT_TOL, EllipticSolveReport, EllipticSolver, div_arrays, grad_arrays,
                  harmonic_face_coefficients, lap_cell_swirl_velocity, lap_rface_arrays,
                  lap_zface_arrays)

DEFAULT_SAFETY = 0.5



@dataclass
class StepReport:
    dt: float
    div_linf: float
    div_l2: float
    rho_min: float
    rho_max: float
    cfl_adv: float
    cfl_visc: float
    elliptic: EllipticSolveReport | None = None
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# face densities


def face_density(g: Grid, rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Arithmetic face means of rho (so 1/rho_f is the harmonic mean of 1/rho)."""
    rr = np.empty(g.shape("rface"))
    rr[1:-1] = 0.5 * (rho[1:] + rho[:-1])
    rr[0] = rho[0]
    rr[-1] = rho[-1]
    rz = np.empty(g.shape("zface"))
    rz[:, 1:-1] = 0.5 * (rho[:, 1:] + rho[:, :-1])
    rz[:, 0] = rho[:, 0]
    rz[:, -1] = rho[:, -1]
    return rr, rz


# ---------------------------------------------------------------------------
# time step restriction


def velocity_max(state: State) -> float:
    m = 0.0
    for f in state.velocity():
        v = f.values
        if v.size:
            # NaN and inf both propagate through the maximum
            vmax = float(np.abs(v).max())
            if not np.isfinite(vmax):
                raise StepRejected("non-finite velocity")
            m = max(m, vmax)
    return m


def cfl_dt(state: State, safety: float = DEFAULT_SAFETY) -> float:
    """``safety * min(h / |u|_max, h^2 rho_min / 4)``.

    Safety factors up to 1/2 keep the explicit viscous update positivity
    preserving (an L^1 contraction for r u^theta); larger values stay stable
    only up to about 2/3.
    """
    if not 0.0 < safety <= 1.0:
        raise DomainError(f"CFL safety factor must lie in (0, 1], got {safety}")
    g = state.grid
    h = g.h
    umax = velocity_max(state)
    rho_min = float(state.rho.values.min())
    dt_visc = 0.25 * h * h * rho_min
    dt_adv = h / umax if umax > 0 else np.inf
    return safety * min(dt_adv, dt_visc)


def advective_courant(g: Grid, ur: np.ndarray, uz: np.ndarray, dt: float) -> float:
    """Largest ``dt * sum_faces A |u| / V`` over cells (must stay <= 1)."""
    return float(dt * _kernels.courant(g.r_c, g.r_f, g.hr, g.hz, np.ascontiguousarray(ur),
                                       np.ascontiguousarray(uz)))


# ---------------------------------------------------------------------------
# density transport


def _minmod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.where(a * b > 0.0, np.where(np.abs(a) < np.abs(b), a, b), 0.0)


def _transport_rate(g: Grid, q: np.ndarray, ur: np.ndarray, uz: np.ndarray) -> np.ndarray:
    """``-(u . grad q)`` in upwind-difference form with minmod-limited face values.

    Every face contributes ``A u (q_face - q_cell)``, so constants are exact
    fixed points and each cell update is a convex combination of neighbours.
    """
    hr, hz = g.hr, g.hz
    # r direction: axis ghost even, outer ghost zero-gradient
    qp = np.concatenate([q[:1], q, q[-1:]], axis=0)
    d = qp[1:] - qp[:-1]  # (nr+1, nz) undivided differences at faces
    s = _minmod(d[1:], d[:-1])  # cell slopes (nr, nz)
    left = q[:-1] + 0.5 * s[:-1]  # value from the cell below face i (i=1..nr-1)
    right = q[1:] - 0.5 * s[1:]
    u = ur[1:-1]
    qf = np.where(u > 0.0, left, right)
    fl = g.r_f[1:-1, None] * u
    rate = np.zeros_like(q)
    rc_h = g.r_c[:, None] * hr
    rate[:-1] -= fl * (qf - q[:-1]) / rc_h[:-1]
    rate[1:] += fl * (qf - q[1:]) / rc_h[1:]
    # z direction: zero-gradient ghosts
    qp = np.concatenate([q[:, :1], q, q[:, -1:]], axis=1)
    d = qp[:, 1:] - qp[:, :-1]
    s = _minmod(d[:, 1:], d[:, :-1])
    left = q[:, :-1] + 0.5 * s[:, :-1]
    right = q[:, 1:] - 0.5 * s[:, 1:]
    w = uz[:, 1:-1]
    qf = np.where(w > 0.0, left, right)
    rate[:, :-1] -= w * (qf - q[:, :-1]) / hz
    rate[:, 1:] += w * (qf - q[:, 1:]) / hz
    return rate


def transport_rate(g: Grid, q: np.ndarray, ur: np.ndarray, uz: np.ndarray,
                   fast: bool = True) -> np.ndarray:
    if fast:
        rate = np.empty_like(q)
        _kernels.transport_rate(g.r_c, g.r_f, g.hr, g.hz, np.ascontiguousarray(q),
                                np.ascontiguousarray(ur), np.ascontiguousarray(uz), rate)
        return rate
    return _transport_rate(g, q, ur, uz)


def advect_density(rho: ScalarField, ur: ScalarField, uz: ScalarField, dt: float,
                   fast: bool = True) -> ScalarField:
    """Two-stage SSP Runge-Kutta MUSCL transport of rho by a frozen velocity."""
    g = rho.grid
    c = advective_courant(g, ur.values, uz.values, dt)
    if c > 1.0:
        raise StepRejected(f"advective Courant number {c:.3f} exceeds 1")
    q = rho.values
    q1 = q + dt * transport_rate(g, q, ur.values, uz.values, fast)
    q2 = q1 + dt * transport_rate(g, q1, ur.values, uz.values, fast)
    out = 0.5 * q + 0.5 * q2
    if not np.all(np.isfinite(out)):
        raise StepRejected("non-finite density after transport")
    return apply_axis_parity(ScalarField(g, "cell", out, "even"))


# ---------------------------------------------------------------------------
# momentum


def momentum_rhs(g: Grid, rho: np.ndarray, rho_r: np.ndarray, rho_z: np.ndarray,
                 ur: np.ndarray, uth: np.ndarray, uz: np.ndarray, zbc: str = "noslip"):
    """Time derivatives of (u^r, u^theta, u^3) without the pressure gradient."""
    hr, hz = g.hr, g.hz
    rc = g.r_c[:, None]
    rf = g.r_f[1:-1, None]
    zs = -1.0 if zbc == "noslip" else 1.0

    # u^r on interior r-faces
    dur = np.zeros_like(ur)
    ui = ur[1:-1]
    dr_ur = (ur[2:] - ur[:-2]) / (2.0 * hr)
    urp = np.concatenate([zs * ui[:, :1], ui, zs * ui[:, -1:]], axis=1)
    dz_ur = (urp[:, 2:] - urp[:, :-2]) / (2.0 * hz)
    w_at = 0.25 * (uz[:-1, :-1] + uz[:-1, 1:] + uz[1:, :-1] + uz[1:, 1:])
    cent = 0.5 * (uth[:-1] ** 2 + uth[1:] ** 2) / rf
    visc = lap_rface_arrays(g, ur, zbc)[1:-1] / rho_r[1:-1]
    dur[1:-1] = -(ui * dr_ur + w_at * dz_ur) + cent + visc

    # u^theta at cells: u.grad u^theta + u^r u^theta / r = (1/r) div(u r u^theta)
    gth = rc * uth
    fr = np.zeros(g.shape("rface"))
    fr[1:-1] = ur[1:-1] * 0.5 * (gth[1:] + gth[:-1])
    fz = np.zeros(g.shape("zface"))
    fz[:, 1:-1] = uz[:, 1:-1] * 0.5 * (gth[:, 1:] + gth[:, :-1])
    adv = div_arrays(g, fr, fz) / rc
    duth = -adv + lap_cell_swirl_velocity(g, uth, zbc) / rho

    # u^3 on interior z-faces
    duz = np.zeros_like(uz)
    wi = uz[:, 1:-1]
    u_at = 0.25 * (ur[:-1, :-1] + ur[1:, :-1] + ur[:-1, 1:] + ur[1:, 1:])
    wp = np.concatenate([wi[:1], wi, -wi[-1:]], axis=0)
    dr_uz = (wp[2:] - wp[:-2]) / (2.0 * hr)
    dz_uz = (uz[:, 2:] - uz[:, :-2]) / (2.0 * hz)
    visc = lap_zface_arrays(g, uz)[:, 1:-1] / rho_z[:, 1:-1]
    duz[:, 1:-1] = -(u_at * dr_uz + wi * dz_uz) + visc
    return dur, duth, duz


def _momentum_rhs_fast(g, rho, rho_r, rho_z, ur, uth, uz, zbc):
    out = (np.zeros_like(ur), np.zeros_like(uth), np.zeros_like(uz))
    zs = -1.0 if zbc == "noslip" else 1.0
    _kernels.momentum_rhs(g.r_c, g.r_f, g.hr, g.hz, zs, rho, rho_r, rho_z,
                          np.ascontiguousarray(ur), np.ascontiguousarray(uth),
                          np.ascontiguousarray(uz), *out)
    return out


def momentum_predictor(state: State, dt: float, zbc: str = "noslip", fast: bool = True,
                       faces: tuple[np.ndarray, np.ndarray] | None = None):
    """Heun (explicit trapezoid) update of the three velocity components.

    ``faces`` may pass precomputed :func:`face_density` arrays of ``state.rho``.
    """
    g = state.grid
    rho = state.rho.values
    rr, rz = face_density(g, rho) if faces is None else faces
    rhs = _momentum_rhs_fast if fast else momentum_rhs
    u0 = (state.ur.values, state.uth.values, state.uz.values)
    k1 = rhs(g, rho, rr, rz, *u0, zbc=zbc)
    u1 = tuple(a + dt * k for a, k in zip(u0, k1))
    k2 = rhs(g, rho, rr, rz, *u1, zbc=zbc)
    # u0 + dt (k1 + k2) / 2 = (u0 + u1 + dt k2) / 2, accumulated in place
    out = []
    for a, b, k in zip(u0, u1, k2):
        k *= dt
        k += a
        k += b
        k *= 0.5
        out.append(k)
    ur, uth, uz = out
    for v in (ur, uth, uz):
        if not np.all(np.isfinite(v)):
            raise StepRejected("non-finite velocity in momentum predictor")
    return (apply_axis_parity(ScalarField(g, "rface", ur, "odd")),
            apply_axis_parity(ScalarField(g, "cell", uth, "odd")),
            apply_axis_parity(ScalarField(g, "zface", uz, "even")))


# ---------------------------------------------------------------------------
# projection


ROUNDOFF_FLOOR = 1e-13


class Projector:
    """Caches the pressure operator and its factorisation between steps."""

    def __init__(self, grid: Grid, tol: float = DEFAULT_TOL, maxiter: int = 500):
        self.solver = EllipticSolver(grid, dirichlet=False, tol=tol, maxiter=maxiter)
        self._last_pi = None
        self._coef_key = None
        self._coef = None
        self._uniform = False

    def __call__(self, ur: ScalarField, uz: ScalarField, rho: ScalarField, dt: float):
        g = ur.grid
        key = (id(rho.values), dt)
        if key != self._coef_key or self._coef[0] is not rho.values:
            beta = dt / rho.values
            br, bz = harmonic_face_coefficients(g, beta)
            self.solver.set_coefficients(br, bz)
            self._coef_key = key
            self._coef = (rho.values, br, bz)
            self._uniform = _is_constant(rho.values)
        _, br, bz = self._coef
        rhs = div_arrays(g, ur.values, uz.values)
        # with uniform density the preconditioner is exact and a warm start
        # only costs an extra operator application
        x0 = None if self._uniform else self._last_pi
        # round-off floor: div u* of a discretely solenoidal field is O(eps |u| / h)
        umax = max(float(np.abs(ur.values).max()), float(np.abs(uz.values).max()))
        floor = ROUNDOFF_FLOOR * umax / min(g.hr, g.hz) * np.sqrt(np.sum(g.weights("cell")))
        pi, report = self.solver.solve(rhs, x0=x0, floor=floor)
        self._last_pi = pi
        gr, gz = grad_arrays(g, pi)
        new_r = ur.values - br * gr
        new_z = uz.values - bz * gz
        new_r[0] = 0.0
        return (apply_axis_parity(ScalarField(g, "rface", new_r, "odd")),
                apply_axis_parity(ScalarField(g, "zface", new_z, "even")),
                apply_axis_parity(ScalarField(g, "cell", pi, "even")),
                report)


def project(ur: ScalarField, uz: ScalarField, rho: ScalarField, dt: float,
            tol: float = DEFAULT_TOL, projector: Projector | None = None):
    """Solve ``div((dt/rho) grad Pi) = div u*`` and return ``(u^r, u^3, Pi, report)``."""
    if projector is None:
        projector = Projector(ur.grid, tol)
    return projector(ur, uz, rho, dt)


# ---------------------------------------------------------------------------
# full step


class Stepper:
    """Owns the per-run caches (pressure factorisation) and advances states."""

    def __init__(self, grid: Grid, safety: float = DEFAULT_SAFETY, tol: float = DEFAULT_TOL,
                 zbc: str = "noslip", transport_density: bool = True):
        if zbc not in ("noslip", "slip"):
            raise DomainError(f"z wall condition must be 'noslip' or 'slip', got {zbc!r}")
        self.grid = grid
        self.safety = safety
        self.tol = tol
        self.zbc = zbc
        self.transport_density = transport_density
        self.projector = Projector(grid, tol)
        self._faces = None

    def step(self, state: State, dt: float | None = None) -> tuple[State, StepReport]:
        g = self.grid
        if dt is None:
            dt = cfl_dt(state, self.safety)
        if not (np.isfinite(dt) and dt > 0):
            raise StepRejected(f"invalid time step {dt}")
        if self._faces is None or self._faces[0] is not state.rho.values:
            self._faces = (state.rho.values, face_density(g, state.rho.values))
        ur_s, uth_s, uz_s = momentum_predictor(state, dt, self.zbc, faces=self._faces[1])
        try:
            ur, uz, pi, erep = self.projector(ur_s, uz_s, state.rho, dt)
        except SolverError as exc:
            raise StepRejected(f"projection failed at t={state.t:.6g}: {exc}", exc.report) from exc
        if self.transport_density and not _is_constant(state.rho.values):
            rho = advect_density(state.rho, ur, uz, dt)
        else:
            rho = state.rho
        div = div_arrays(g, ur.values, uz.values)
        w = g.weights("cell")
        report = StepReport(
            dt=dt,
            div_linf=float(np.abs(div).max()),
            div_l2=float(np.sqrt(np.sum(div * div * w))),
            rho_min=float(rho.values.min()),
            rho_max=float(rho.values.max()),
            cfl_adv=advective_courant(g, ur.values, uz.values, dt),
            cfl_visc=dt / (0.25 * g.h**2 * float(state.rho.values.min())),
            elliptic=erep,
        )
        new = State(state.t + dt, rho, ur, uth_s, uz, pi)
        return new, report


def _is_constant(q: np.ndarray) -> bool:
    # a constant density is an exact fixed point of the transport scheme
    return bool(q.min() == q.max())


def step(state: State, dt: float | None = None, safety: float = DEFAULT_SAFETY,
         zbc: str = "noslip", stepper: Stepper | None = None):
    """Advance one step: predictor, projection, density transport, ``t += dt``."""
    if stepper is None:
        stepper = Stepper(state.grid, safety=safety, zbc=zbc)
    return stepper.step(state, dt)


# ---------------------------------------------------------------------------
# energy bookkeeping


def kinetic_energy(state: State) -> float:
    """``1/2 ||sqrt(rho) u||_2^2`` with face-averaged rho for the staggered components."""
    g = state.grid
    rr, rz = face_density(g, state.rho.values)
    e = np.sum(rr * state.ur.values**2 * g.weights("rface"))
    e += np.sum(state.rho.values * state.uth.values**2 * g.weights("cell"))
    e += np.sum(rz * state.uz.values**2 * g.weights("zface"))
    return 0.5 * float(e)


def velocity_l2_sq(state: State) -> float:
    g = state.grid
    return float(np.sum(state.ur.values**2 * g.weights("rface"))
                 + np.sum(state.uth.values**2 * g.weights("cell"))
                 + np.sum(state.uz.values**2 * g.weights("zface")))


def dissipation(state: State, zbc: str = "noslip") -> float:
    """``||grad u||_2^2`` as the discrete Dirichlet form ``-<u, Delta_h u>``.

    Equals ``||grad u^r||^2 + ||u^r/r||^2 + ||grad u^theta||^2 + ||u^theta/r||^2
    + ||grad u^3||^2`` for the wall conditions of the solver.
    """
    g = state.grid
    ur, uth, uz = state.ur.values, state.uth.values, state.uz.values
    d = -np.sum(ur * lap_rface_arrays(g, ur, zbc) * g.weights("rface"))
    d -= np.sum(uth * lap_cell_swirl_velocity(g, uth, zbc) * g.weights("cell"))
    d -= np.sum(uz * lap_zface_arrays(g, uz) * g.weights("zface"))
    return float(d)
