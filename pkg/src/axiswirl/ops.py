"""Cylindrical finite-difference operators and elliptic solvers.

Radial derivatives are written in conservative ``(1/r) d/dr (r .)`` form, so the
axis face (``r = 0``) never contributes a flux. With cell weights
``w = 2 pi r hr hz`` the divergence and gradient are negative adjoints of
each other, which is what makes the pressure projection exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ContractViolation, SolverError
from .fields import ScalarField, apply_axis_parity
from .grid import Grid, weighted_lp
from . import _kernels

DEFAULT_TOL = 1e-10
DEFAULT_MAXITER = 500


@dataclass
class EllipticSolveReport:
    iterations: int
    residual: float
    tolerance: float
    rhs_norm: float = 0.0
    compatibility_defect: float = 0.0
    floor: float = 0.0

    @property
    def converged(self) -> bool:
        return self.residual <= max(self.tolerance * self.rhs_norm, self.floor,
                                    np.finfo(float).tiny)


# ---------------------------------------------------------------------------
# array kernels (no ScalarField wrapping; used in the time loop)


def div_arrays(g: Grid, ur: np.ndarray, uz: np.ndarray) -> np.ndarray:
    """``(1/r) d_r (r u^r) + d_z u^3`` at cells from face values."""
    out = np.empty(g.shape("cell"))
    _kernels.divergence(g.r_c, g.r_f, g.hr, g.hz, np.ascontiguousarray(ur, dtype=float),
                        np.ascontiguousarray(uz, dtype=float), out)
    return out


def grad_arrays(g: Grid, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Face gradient of a cell field; zero normal gradient on every boundary face."""
    gr = np.zeros(g.shape("rface"))
    gz = np.zeros(g.shape("zface"))
    gr[1:-1] = (q[1:] - q[:-1]) / g.hr
    gz[:, 1:-1] = (q[:, 1:] - q[:, :-1]) / g.hz
    return gr, gz


def _outer_ghost(v: np.ndarray, bc: str, axis: int, last: bool) -> np.ndarray:
    idx = -1 if last else 0
    nxt = -2 if last else 1
    nn = -3 if last else 2
    a = np.take(v, idx, axis=axis)
    if bc == "dirichlet":
        return -a
    if bc == "neumann":
        return a
    if bc == "extrapolate":
        return 3.0 * a - 3.0 * np.take(v, nxt, axis=axis) + np.take(v, nn, axis=axis)
    raise ValueError(f"unknown boundary closure {bc!r}")


def lap_cell_arrays(g: Grid, f: np.ndarray, swirl: bool, bc: str = "dirichlet",
                    zbc: str | None = None) -> np.ndarray:
    """``(1/r) d_r (r d_r f) + d_z^2 f`` (minus ``f/r^2`` in swirl mode) at cells."""
    zbc = bc if zbc is None else zbc
    hr, hz = g.hr, g.hz
    rf = g.r_f[:, None]
    flux = np.empty((g.nr + 1, g.nz))
    flux[0] = 0.0
    flux[1:-1] = rf[1:-1] * (f[1:] - f[:-1]) / hr
    flux[-1] = rf[-1] * (_outer_ghost(f, bc, 0, True) - f[-1]) / hr
    out = (flux[1:] - flux[:-1]) / (g.r_c[:, None] * hr)
    lo = _outer_ghost(f, zbc, 1, False)
    hi = _outer_ghost(f, zbc, 1, True)
    fz = np.concatenate([lo[:, None], f, hi[:, None]], axis=1)
    out += (fz[:, 2:] - 2.0 * f + fz[:, :-2]) / (hz * hz)
    if swirl:
        out -= f / g.r_c[:, None] ** 2
    return out


def lap_rface_arrays(g: Grid, ur: np.ndarray, zbc: str = "noslip") -> np.ndarray:
    """``(Delta - 1/r^2) u^r`` at interior r-faces; u^r = 0 on axis and outer wall."""
    hr, hz = g.hr, g.hz
    out = np.zeros_like(ur)
    u = ur
    flux = g.r_c[:, None] * (u[1:] - u[:-1]) / hr  # at cells
    rf = g.r_f[1:-1, None]
    out[1:-1] = (flux[1:] - flux[:-1]) / (rf * hr) - u[1:-1] / rf**2
    sgn = -1.0 if zbc == "noslip" else 1.0
    ui = u[1:-1]
    uzp = np.concatenate([sgn * ui[:, :1], ui, sgn * ui[:, -1:]], axis=1)
    out[1:-1] += (uzp[:, 2:] - 2.0 * ui + uzp[:, :-2]) / (hz * hz)
    return out


def lap_zface_arrays(g: Grid, uz: np.ndarray) -> np.ndarray:
    """``Delta u^3`` at interior z-faces; u^3 = 0 on the z walls, no-slip at r = R."""
    hr, hz = g.hr, g.hz
    out = np.zeros_like(uz)
    u = uz[:, 1:-1]
    rf = g.r_f[:, None]
    flux = np.empty((g.nr + 1, u.shape[1]))
    flux[0] = 0.0
    flux[1:-1] = rf[1:-1] * (u[1:] - u[:-1]) / hr
    flux[-1] = rf[-1] * (-2.0 * u[-1]) / hr
    lap = (flux[1:] - flux[:-1]) / (g.r_c[:, None] * hr)
    lap += (uz[:, 2:] - 2.0 * u + uz[:, :-2]) / (hz * hz)
    out[:, 1:-1] = lap
    return out


def lap_cell_swirl_velocity(g: Grid, uth: np.ndarray, zbc: str = "noslip") -> np.ndarray:
    return lap_cell_arrays(g, uth, True, "dirichlet", "dirichlet" if zbc == "noslip" else "neumann")


def curl_arrays(g: Grid, ur: np.ndarray, uth: np.ndarray, uz: np.ndarray,
                zbc: str = "noslip"):
    """Cell-centred ``(omega^r, omega^theta, omega^3)`` of a staggered velocity."""
    hr, hz = g.hr, g.hz
    zs = -1.0 if zbc == "noslip" else 1.0
    # omega^r = -d_z u^theta (central)
    up = np.concatenate([zs * uth[:, :1], uth, zs * uth[:, -1:]], axis=1)
    om_r = -(up[:, 2:] - up[:, :-2]) / (2.0 * hz)
    # omega^theta at nodes, then averaged to cells
    urp = np.concatenate([zs * ur[:, :1], ur, zs * ur[:, -1:]], axis=1)  # (nr+1, nz+2)
    dz_ur = (urp[:, 1:] - urp[:, :-1]) / hz  # (nr+1, nz+1)
    uzp = np.concatenate([uz[:1], uz, -uz[-1:]], axis=0)  # axis even, wall no-slip
    dr_uz = (uzp[1:] - uzp[:-1]) / hr  # (nr+1, nz+1)
    om_node = dz_ur - dr_uz
    om_t = 0.25 * (om_node[:-1, :-1] + om_node[1:, :-1] + om_node[:-1, 1:] + om_node[1:, 1:])
    # omega^3 = (1/r) d_r (r u^theta) with face-averaged u^theta
    uf = np.zeros((g.nr + 1, g.nz))
    uf[1:-1] = 0.5 * (uth[1:] + uth[:-1])
    ruf = g.r_f[:, None] * uf
    om_3 = (ruf[1:] - ruf[:-1]) / (g.r_c[:, None] * hr)
    return om_r, om_t, om_3


def rface_to_cell(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a[1:] + a[:-1])


def zface_to_cell(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a[:, 1:] + a[:, :-1])


def ddr_cell(g: Grid, f: np.ndarray, parity: str, bc: str = "dirichlet") -> np.ndarray:
    """Central radial derivative of a cell field using the axis parity ghost."""
    sign = 1.0 if parity == "even" else -1.0
    fp = np.concatenate([sign * f[:1], f, _outer_ghost(f, bc, 0, True)[None, :]], axis=0)
    return (fp[2:] - fp[:-2]) / (2.0 * g.hr)


def ddz_cell(g: Grid, f: np.ndarray, bc: str = "dirichlet") -> np.ndarray:
    lo = _outer_ghost(f, bc, 1, False)
    hi = _outer_ghost(f, bc, 1, True)
    fp = np.concatenate([lo[:, None], f, hi[:, None]], axis=1)
    return (fp[:, 2:] - fp[:, :-2]) / (2.0 * g.hz)


# ---------------------------------------------------------------------------
# public ScalarField operators


def cyl_divergence(ur: ScalarField, uz: ScalarField) -> ScalarField:
    """``(1/r) d_r (r u^r) + d_z u^3`` at cell centres."""
    if ur.loc != "rface" or uz.loc != "zface":
        raise ContractViolation("divergence expects u^r on r-faces and u^3 on z-faces")
    return ScalarField(ur.grid, "cell", div_arrays(ur.grid, ur.values, uz.values), "even")


def cyl_gradient(q: ScalarField) -> tuple[ScalarField, ScalarField]:
    if q.loc != "cell":
        raise ContractViolation("gradient expects a cell-centred field")
    gr, gz = grad_arrays(q.grid, q.values)
    return ScalarField(q.grid, "rface", gr, "odd"), ScalarField(q.grid, "zface", gz, "even")


def cyl_laplacian(f: ScalarField, mode: str = "plain", bc: str = "dirichlet",
                  zbc: str = "noslip") -> ScalarField:
    """Plain ``d_r^2 + (1/r) d_r + d_z^2`` or swirl ``Delta - 1/r^2`` Laplacian.

    Cell fields accept ``bc`` in {"dirichlet", "neumann", "extrapolate"} for the
    ghost closure at ``r = R`` and ``z = +-Z``. Face fields use the velocity
    wall conditions (``zbc`` selects no-slip or stress-free z walls for u^r).
    """
    if mode not in ("plain", "swirl"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "swirl" and f.parity != "odd":
        raise ContractViolation("swirl-mode Laplacian requires an odd-parity field")
    g = f.grid
    if f.loc == "cell":
        vals = lap_cell_arrays(g, f.values, mode == "swirl", bc)
    elif f.loc == "rface":
        if mode != "swirl":
            raise ContractViolation("r-face fields carry u^r; use swirl mode")
        vals = lap_rface_arrays(g, f.values, zbc)
    elif f.loc == "zface":
        if mode != "plain":
            raise ContractViolation("z-face fields carry u^3; use plain mode")
        vals = lap_zface_arrays(g, f.values)
    else:
        raise ContractViolation("Laplacian is not defined on node fields")
    return ScalarField(g, f.loc, vals, f.parity)


def curl_axisym(ur: ScalarField, uth: ScalarField, uz: ScalarField, zbc: str = "noslip"):
    """Cell-centred vorticity ``(omega^r [odd], omega^theta [odd], omega^3 [even])``."""
    g = ur.grid
    om_r, om_t, om_3 = curl_arrays(g, ur.values, uth.values, uz.values, zbc)
    return (apply_axis_parity(ScalarField(g, "cell", om_r, "odd")),
            apply_axis_parity(ScalarField(g, "cell", om_t, "odd")),
            apply_axis_parity(ScalarField(g, "cell", om_3, "even")))


# ---------------------------------------------------------------------------
# sparse assembly


def _index(nr: int, nz: int) -> np.ndarray:
    return np.arange(nr * nz).reshape(nr, nz)


def assemble_stiffness(g: Grid, beta_r: np.ndarray, beta_z: np.ndarray,
                       dirichlet: bool) -> sp.csc_matrix:
    """Symmetric ``K = G^T W_f B G`` for ``-div(beta grad)`` times the cell weights.

    ``beta_r``/``beta_z`` are face coefficients on r-/z-faces. With
    ``dirichlet=True`` the outer faces see a zero ghost value (homogeneous
    Dirichlet, second-order at the wall); otherwise they carry no flux.
    """
    nr, nz = g.nr, g.nz
    idx = _index(nr, nz)
    c0 = 2.0 * np.pi * g.hr * g.hz
    rows, cols, vals = [], [], []
    diag = np.zeros((nr, nz))

    # interior r-faces i = 1..nr-1
    cr = c0 * g.r_f[1:-1, None] * beta_r[1:-1] / g.hr**2
    p, q = idx[:-1], idx[1:]
    rows += [p.ravel(), q.ravel()]
    cols += [q.ravel(), p.ravel()]
    vals += [-cr.ravel(), -cr.ravel()]
    diag[:-1] += cr
    diag[1:] += cr
    # interior z-faces
    cz = c0 * g.r_c[:, None] * beta_z[:, 1:-1] / g.hz**2
    p, q = idx[:, :-1], idx[:, 1:]
    rows += [p.ravel(), q.ravel()]
    cols += [q.ravel(), p.ravel()]
    vals += [-cz.ravel(), -cz.ravel()]
    diag[:, :-1] += cz
    diag[:, 1:] += cz
    if dirichlet:
        diag[-1] += 2.0 * c0 * g.r_f[-1] * beta_r[-1] / g.hr**2
        diag[:, 0] += 2.0 * c0 * g.r_c * beta_z[:, 0] / g.hz**2
        diag[:, -1] += 2.0 * c0 * g.r_c * beta_z[:, -1] / g.hz**2
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag.ravel())
    K = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(nr * nz, nr * nz))
    return K.tocsr()


def harmonic_face_coefficients(g: Grid, beta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Harmonic means of a positive cell coefficient on every face."""
    br = np.empty(g.shape("rface"))
    bz = np.empty(g.shape("zface"))
    br[1:-1] = 2.0 * beta[1:] * beta[:-1] / (beta[1:] + beta[:-1])
    br[0] = beta[0]
    br[-1] = beta[-1]
    bz[:, 1:-1] = 2.0 * beta[:, 1:] * beta[:, :-1] / (beta[:, 1:] + beta[:, :-1])
    bz[:, 0] = beta[:, 0]
    bz[:, -1] = beta[:, -1]
    return br, bz


class DCTPreconditioner:
    """Exact inverse of the constant-coefficient Neumann stiffness matrix.

    A cosine transform in z diagonalises the axial part; each axial mode
    leaves a tridiagonal radial system. The singular mean mode is pinned in
    the first cell, which keeps the operator symmetric positive definite.
    """

    def __init__(self, g: Grid, scale: float = 1.0):
        self.shape = g.shape("cell")
        c0 = 2.0 * np.pi * g.hr * g.hz
        cr = np.zeros(g.nr + 1)
        cr[1:-1] = c0 * g.r_f[1:-1] / g.hr**2
        cz = c0 * g.r_c / g.hz**2
        lam = 2.0 - 2.0 * np.cos(np.pi * np.arange(g.nz) / g.nz)
        diag = (cr[:-1] + cr[1:])[None, :] + lam[:, None] * cz[None, :]
        diag[0, 0] += cr[1]
        lower = np.zeros((g.nz, g.nr))
        upper = np.zeros((g.nz, g.nr))
        lower[:, 1:] = -cr[1:-1]
        upper[:, :-1] = -cr[1:-1]
        self.lower = np.ascontiguousarray(lower * scale)
        self._c, self._ib = _kernels.thomas_factor(self.lower, diag * scale, upper * scale)

    def solve(self, r: np.ndarray) -> np.ndarray:
        from scipy.fft import dct, idct

        rh = dct(r.reshape(self.shape), type=2, axis=1, norm="ortho")
        y = _kernels.thomas_solve(self.lower, self._c, self._ib, np.ascontiguousarray(rh.T))
        return idct(y.T, type=2, axis=1, norm="ortho").ravel()


class _LUPreconditioner:
    def __init__(self, K, pin: bool):
        if pin:
            K = K.tolil(copy=True)
            K[0, 0] = 2.0 * K[0, 0]
            K = K.tocsc()
        self._lu = spla.splu(sp.csc_matrix(K), permc_spec="MMD_AT_PLUS_A")

    def solve(self, r):
        return self._lu.solve(r)


class EllipticSolver:
    """Preconditioned conjugate gradients on ``K x = -W rhs``.

    Dirichlet problems are preconditioned by a sparse LU factorisation of
    ``K`` itself (exact, so CG stops after one or two iterations). Neumann
    problems use the fast cosine-transform inverse of the constant-coefficient
    operator scaled to the mean coefficient; the iteration count then depends
    only on the coefficient contrast.
    """

    def __init__(self, grid: Grid, dirichlet: bool, tol: float = DEFAULT_TOL,
                 maxiter: int = DEFAULT_MAXITER):
        self.grid = grid
        self.dirichlet = dirichlet
        self.tol = tol
        self.maxiter = maxiter
        self.K = None
        self._pre = None
        self._key = None
        self._scale = 1.0
        self.w = grid.weights("cell").ravel()

    def set_coefficients(self, beta_r: np.ndarray, beta_z: np.ndarray) -> None:
        key = (beta_r.tobytes(), beta_z.tobytes())
        if key == self._key:
            return
        self._key = key
        self.K = assemble_stiffness(self.grid, beta_r, beta_z, self.dirichlet)
        scale = float(np.sqrt(np.mean(beta_r) * np.mean(beta_z)))
        if self.dirichlet or scale != self._scale:
            self._scale = scale
            self._pre = None

    def _factor(self) -> None:
        if self.dirichlet:
            self._pre = _LUPreconditioner(self.K, pin=False)
        else:
            self._pre = DCTPreconditioner(self.grid, self._scale)

    def _residual_norm(self, r_k: np.ndarray) -> float:
        # ||A x - rhs||_{L2} with A x - rhs = -W^{-1} (K x - b)
        return float(np.sqrt(np.sum(r_k * r_k / self.w)))

    def solve(self, rhs: np.ndarray, x0: np.ndarray | None = None, floor: float = 0.0):
        """Solve to ``max(tol * ||rhs||, floor)`` in the weighted L^2 residual.

        ``floor`` lets callers accept round-off level residuals when the
        right-hand side is itself round-off (re-projecting a solenoidal field).
        """
        if self.K is None:
            raise RuntimeError("coefficients not set")
        if self._pre is None:
            self._factor()
        w = self.w
        f = rhs.ravel()
        defect = 0.0
        if not self.dirichlet:
            mean = float(np.sum(f * w) / np.sum(w))
            defect = abs(mean)
            f = f - mean
        rhs_norm = float(np.sqrt(np.sum(f * f * w)))
        x, its, res = self._pcg(-w * f, rhs_norm, x0, floor)
        if not self.dirichlet:
            x = x - np.sum(x * w) / np.sum(w)
        report = EllipticSolveReport(its, res, self.tol, rhs_norm, defect, floor)
        if rhs_norm > 0 and res > max(self.tol * rhs_norm, floor):
            raise SolverError(
                f"elliptic solve stalled: residual {res:.3e} > {self.tol:.1e} x {rhs_norm:.3e}",
                report,
            )
        return x.reshape(self.grid.shape("cell")), report

    def _pcg(self, b: np.ndarray, rhs_norm: float, x0, floor: float = 0.0):
        K, lu = self.K, self._pre
        if rhs_norm == 0.0:
            return np.zeros_like(b), 0, 0.0
        x = np.zeros_like(b) if x0 is None else x0.ravel().copy()
        r = b - K @ x if x0 is not None else b.copy()
        target = max(self.tol * rhs_norm, floor)
        res = self._residual_norm(r)
        if res <= target:
            return x, 0, res
        z = lu.solve(r)
        p = z.copy()
        rz = float(r @ z)
        its = 0
        while its < self.maxiter:
            its += 1
            Kp = K @ p
            alpha = rz / float(p @ Kp)
            x += alpha * p
            r -= alpha * Kp
            res = self._residual_norm(r)
            if res <= target:
                break
            z = lu.solve(r)
            rz_new = float(r @ z)
            p = z + (rz_new / rz) * p
            rz = rz_new
        return x, its, res


def poisson_solve(rhs: ScalarField, parity: str = "even", tol: float = DEFAULT_TOL,
                  maxiter: int = DEFAULT_MAXITER, solver: EllipticSolver | None = None):
    """Solve the plain cylindrical Poisson problem with homogeneous Dirichlet walls."""
    g = rhs.grid
    if rhs.loc != "cell":
        raise ContractViolation("Poisson right-hand side must be cell-centred")
    if solver is None:
        solver = _dirichlet_solver(g, tol, maxiter)
    f, report = solver.solve(rhs.values)
    return apply_axis_parity(ScalarField(g, "cell", f, parity)), report


_DIRICHLET_CACHE: dict = {}


def _dirichlet_solver(g: Grid, tol: float, maxiter: int) -> EllipticSolver:
    key = (g, tol, maxiter)
    s = _DIRICHLET_CACHE.get(key)
    if s is None:
        if len(_DIRICHLET_CACHE) > 8:
            _DIRICHLET_CACHE.clear()
        s = EllipticSolver(g, dirichlet=True, tol=tol, maxiter=maxiter)
        s.set_coefficients(np.ones(g.shape("rface")), np.ones(g.shape("zface")))
        _DIRICHLET_CACHE[key] = s
    return s


def variable_poisson_solve(beta: ScalarField, rhs: ScalarField, tol: float = DEFAULT_TOL,
                           maxiter: int = DEFAULT_MAXITER, solver: EllipticSolver | None = None):
    """Solve ``div(beta grad Pi) = rhs`` with zero-flux walls; returns mean-zero Pi.

    The right-hand side is made compatible by removing its weighted mean; the
    removed amount is recorded as ``compatibility_defect`` in the report.
    """
    g = rhs.grid
    b = beta.values
    if np.any(~np.isfinite(b)) or b.min() <= 0.0:
        raise ContractViolation("variable coefficient must be positive and finite")
    br, bz = harmonic_face_coefficients(g, b)
    if solver is None:
        solver = EllipticSolver(g, dirichlet=False, tol=tol, maxiter=maxiter)
    solver.set_coefficients(br, bz)
    pi, report = solver.solve(rhs.values)
    return apply_axis_parity(ScalarField(g, "cell", pi, "even")), report


def apply_variable_operator(beta: ScalarField, f: ScalarField) -> ScalarField:
    """``div(beta grad f)`` with harmonic face coefficients and zero-flux walls."""
    g = f.grid
    br, bz = harmonic_face_coefficients(g, beta.values)
    gr, gz = grad_arrays(g, f.values)
    return ScalarField(g, "cell", div_arrays(g, br * gr, bz * gz), "even")


# ---------------------------------------------------------------------------
# stream function and Biot-Savart


def _stream_operator(g: Grid) -> sp.csr_matrix:
    """Matrix mapping interior-node psi to interior-node omega^theta of curl(psi e_theta)."""
    nr, nz = g.nr, g.nz
    nn = (nr + 1) * (nz + 1)
    node = np.arange(nn).reshape(nr + 1, nz + 1)
    # u^r = -d_z psi on r-faces
    ri, rj = np.meshgrid(np.arange(nr + 1), np.arange(nz), indexing="ij")
    rf_idx = (ri * nz + rj).ravel()
    Ur = sp.coo_matrix(
        (np.concatenate([np.full(rf_idx.size, 1.0 / g.hz), np.full(rf_idx.size, -1.0 / g.hz)]),
         (np.concatenate([rf_idx, rf_idx]),
          np.concatenate([node[ri, rj].ravel(), node[ri, rj + 1].ravel()]))),
        shape=((nr + 1) * nz, nn)).tocsr()
    # u^3 = (1/r) d_r (r psi) on z-faces
    zi, zj = np.meshgrid(np.arange(nr), np.arange(nz + 1), indexing="ij")
    zf_idx = (zi * (nz + 1) + zj).ravel()
    rc = g.r_c[zi].ravel()
    Uz = sp.coo_matrix(
        (np.concatenate([g.r_f[zi + 1].ravel() / (rc * g.hr), -g.r_f[zi].ravel() / (rc * g.hr)]),
         (np.concatenate([zf_idx, zf_idx]),
          np.concatenate([node[zi + 1, zj].ravel(), node[zi, zj].ravel()]))),
        shape=(nr * (nz + 1), nn)).tocsr()
    # omega^theta at interior nodes = d_z u^r - d_r u^3
    ii, jj = np.meshgrid(np.arange(1, nr), np.arange(1, nz), indexing="ij")
    out = ((ii - 1) * (nz - 1) + (jj - 1)).ravel()
    Cr = sp.coo_matrix(
        (np.concatenate([np.full(out.size, 1.0 / g.hz), np.full(out.size, -1.0 / g.hz)]),
         (np.concatenate([out, out]),
          np.concatenate([(ii * nz + jj).ravel(), (ii * nz + jj - 1).ravel()]))),
        shape=((nr - 1) * (nz - 1), (nr + 1) * nz)).tocsr()
    Cz = sp.coo_matrix(
        (np.concatenate([np.full(out.size, -1.0 / g.hr), np.full(out.size, 1.0 / g.hr)]),
         (np.concatenate([out, out]),
          np.concatenate([(ii * (nz + 1) + jj).ravel(), ((ii - 1) * (nz + 1) + jj).ravel()]))),
        shape=((nr - 1) * (nz - 1), nr * (nz + 1))).tocsr()
    interior = node[1:-1, 1:-1].ravel()
    return (Cr @ Ur + Cz @ Uz)[:, interior]


def stream_function_from_vorticity(omega: ScalarField) -> ScalarField:
    """Node stream function whose discrete curl reproduces ``omega`` at interior nodes.

    ``psi`` vanishes on the axis and on the outer boundary (a closed box).
    """
    g = omega.grid
    if omega.loc != "node":
        raise ContractViolation("vorticity target must be node-sampled")
    S = _stream_operator(g).tocsc()
    rhs = omega.values[1:-1, 1:-1].ravel()
    sol = spla.spsolve(S, rhs)
    psi = np.zeros(g.shape("node"))
    psi[1:-1, 1:-1] = sol.reshape(g.nr - 1, g.nz - 1)
    return apply_axis_parity(ScalarField(g, "node", psi, "odd"))


_WEIGHTED_CACHE: dict = {}


def _weighted_solver(g: Grid, tol: float, maxiter: int) -> EllipticSolver:
    key = (g, tol, maxiter)
    s = _WEIGHTED_CACHE.get(key)
    if s is None:
        if len(_WEIGHTED_CACHE) > 8:
            _WEIGHTED_CACHE.clear()
        s = EllipticSolver(g, dirichlet=True, tol=tol, maxiter=maxiter)
        s.set_coefficients(np.broadcast_to(g.r_f[:, None] ** 2, g.shape("rface")).copy(),
                           np.broadcast_to(g.r_c[:, None] ** 2, g.shape("zface")).copy())
        _WEIGHTED_CACHE[key] = s
    return s


def biot_savart_ur_over_r(gamma: ScalarField, tol: float = DEFAULT_TOL,
                          maxiter: int = DEFAULT_MAXITER,
                          method: str = "weighted") -> ScalarField:
    """Reconstruct ``u^r / r`` from ``Gamma = omega^theta / r``.

    ``method="composite"`` evaluates
    ``Lap^-1 d_z Gamma - 2 (d_r / r) Lap^-2 d_z Gamma`` with two Dirichlet-box
    solves, extrapolating ``(d_r g2)/r`` in the first cell quadratically from
    the next three cells. On the whole space ``Lap^-2 d_z Gamma`` tends to a
    non-zero constant along rays, so clamping it to zero on the box walls
    leaves an error that shrinks only like ``L^-1/2`` with the box size ``L``.

    ``method="weighted"`` (default) uses the equivalent local form
    ``u^r / r = -d_z (psi / r)``, where ``psi / r`` solves the five-dimensional
    radial Poisson problem ``-(r^-3 d_r r^3 d_r + d_z^2)(psi / r) = Gamma``.
    Its solution decays like ``|x|^-3``, so a Dirichlet box of a few support
    radii is already accurate and the error is the O(h^2) truncation error.
    """
    g = gamma.grid
    if method == "weighted":
        solver = _weighted_solver(g, tol, maxiter)
        f, _ = solver.solve(-(g.r_c[:, None] ** 2) * gamma.values)
        return apply_axis_parity(ScalarField(g, "cell", -ddz_cell(g, f, "dirichlet"), "even"))
    if method != "composite":
        raise ContractViolation(f"unknown Biot-Savart method {method!r}")
    dz_gamma = ScalarField(g, "cell", ddz_cell(g, gamma.values, "dirichlet"), "even")
    g1, _ = poisson_solve(dz_gamma, "even", tol, maxiter)
    g2, _ = poisson_solve(g1, "even", tol, maxiter)
    q = ddr_cell(g, g2.values, "even") / g.r_c[:, None]
    q[0] = 3.0 * q[1] - 3.0 * q[2] + q[3]
    return apply_axis_parity(ScalarField(g, "cell", g1.values - 2.0 * q, "even"))


def weighted_l2(g: Grid, values: np.ndarray, loc: str = "cell") -> float:
    return weighted_lp(values, g.weights(loc), 2.0)
