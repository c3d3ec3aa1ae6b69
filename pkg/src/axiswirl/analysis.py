"""Quantitative diagnostics: smallness functionals, scaling, transport bounds,
weighted Sobolev ratios, density mollification and decay-exponent fits.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import DataError, DomainError
from .fields import ScalarField, State, apply_axis_parity, make_state
from .grid import Grid, hardy_weighted_norm, lp_norm, weighted_lp
from .ops import lap_cell_arrays
from .solver import StepReport, dissipation, kinetic_energy, velocity_l2_sq
from .vorticity import identity_residuals, swirl_gradient_sq, vorticity_pack

AXIS_TOL = 1e-3


# ---------------------------------------------------------------------------
# smallness functionals


def eta1(C: float, X: float) -> float:
    """``exp(-C X) / (2 C)``."""
    if not C > 0:
        raise DomainError(f"smallness constant must be positive, got {C}")
    return float(np.exp(-C * X) / (2.0 * C))


@dataclass
class SmallnessReport:
    F1: float
    F2: float
    F2rhs: float
    X: float
    C: float
    eta1: float
    uth_l3: float = 0.0
    a_over_r_inf: float = 0.0
    u_l2_sq: float = 0.0
    uth_sq_l2_sq: float = 0.0
    grad_u_sq: float = 0.0
    gamma_l2: float = 0.0
    phi_l2: float = 0.0

    def eta1_at(self, C: float) -> float:
        return eta1(C, self.X)

    def satisfied_at(self, C: float) -> bool:
        e = self.eta1_at(C)
        return bool(self.F1 <= e and self.F2 <= e * self.F2rhs)

    @property
    def satisfied(self) -> bool:
        return self.satisfied_at(self.C)


def axis_density(rho: ScalarField) -> np.ndarray:
    """Trace of an even cell field on ``r = 0``: quadratic extrapolation in ``r^2``."""
    v = rho.values
    return (75.0 * v[0] - 12.5 * v[1] + 1.5 * v[2]) / 64.0


def a_over_r(rho: ScalarField) -> np.ndarray:
    a = 1.0 / rho.values - 1.0
    return a / rho.grid.r_c[:, None]


def smallness_report(state: State, C: float = 1.0, axis_tol: float = AXIS_TOL,
                     zbc: str = "noslip") -> SmallnessReport:
    """Evaluate the smallness functionals of the data ``(rho0, u0)``.

    ``||grad u||_2^2`` is the full gradient of the vector field in cylindrical
    components, ``||grad u^r||^2 + ||u^r/r||^2 + ||grad u^theta||^2 +
    ||u^theta/r||^2 + ||grad u^3||^2``, evaluated as the discrete Dirichlet form.
    """
    if not C > 0:
        raise DomainError(f"smallness constant must be positive, got {C}")
    trace = axis_density(state.rho)
    if np.max(np.abs(trace - 1.0)) > axis_tol:
        raise DataError(
            f"density differs from 1 on the axis by {np.max(np.abs(trace - 1.0)):.3e}; "
            "a0/r is unbounded")
    aor = float(np.abs(a_over_r(state.rho)).max())
    uth3 = lp_norm(state.uth, 3)
    u2 = velocity_l2_sq(state)
    uth4 = lp_norm(state.uth, 4) ** 4
    grad = dissipation(state, zbc)
    pack = vorticity_pack(state, zbc)
    F1 = uth3 + aor * u2
    F2 = aor**2 * (uth4 + grad)
    F2rhs = pack.gamma_norm**2 + pack.phi_norm**2
    X = u2**1.5 * (pack.gamma_norm + pack.phi_norm)
    return SmallnessReport(F1=F1, F2=F2, F2rhs=F2rhs, X=X, C=C, eta1=eta1(C, X), uth_l3=uth3,
                           a_over_r_inf=aor, u_l2_sq=u2, uth_sq_l2_sq=uth4, grad_u_sq=grad,
                           gamma_l2=pack.gamma_norm, phi_l2=pack.phi_norm)


# ---------------------------------------------------------------------------
# scaling


def _resample(f: ScalarField, lam: float, target: Grid, support_tol: float) -> np.ndarray:
    """Values of ``f(lam r, lam z)`` at the sample points of ``target``."""
    g = f.grid
    r_src, z_src = g.coords(f.loc)
    r_src, z_src = r_src[:, 0], z_src[0]
    sign = 1.0 if f.parity == "even" else -1.0
    vals = f.values
    # parity extension across the axis so interpolation is second order at r -> 0
    if r_src[0] > 0:
        r_ext = np.concatenate([-r_src[:1], r_src])
        v_ext = np.concatenate([sign * vals[:1], vals], axis=0)
    else:
        r_ext, v_ext = r_src, vals
    peak = float(np.abs(vals).max())
    if peak > 0:
        # the rescaled support must fit in the target domain
        big = np.abs(vals) > support_tol * peak
        rr, zz = np.broadcast_arrays(r_src[:, None], z_src[None, :])
        if np.any(rr[big] / lam > target.R + 1e-12) or np.any(np.abs(zz[big]) / lam > target.Z + 1e-12):
            raise DomainError(f"rescaled support does not fit the domain for lambda={lam}")
    interp = RegularGridInterpolator((r_ext, z_src), v_ext, method="linear",
                                     bounds_error=False, fill_value=None)
    rt, zt = target.mesh(f.loc)
    rs, zs = lam * rt, lam * zt
    out = interp(np.stack([rs.ravel(), zs.ravel()], axis=-1)).reshape(rt.shape)
    outside = (rs > g.R) | (np.abs(zs) > g.Z)
    # beyond the source box the data are at their far-field value
    out[outside] = 0.0
    return out


def scaling_transform(state: State, lam: float, target: Grid | None = None,
                      support_tol: float = 1e-8) -> State:
    """``rho(lam x)``, ``lam u(lam x)``, ``lam^2 Pi(lam x)`` resampled bilinearly.

    The density is transformed through ``a = 1/rho - 1`` so that the far-field
    value 1 is kept outside the source box.
    """
    if not lam > 0:
        raise DomainError(f"scaling factor must be positive, got {lam}")
    g = state.grid
    target = g if target is None else target
    a = ScalarField(g, "cell", 1.0 / state.rho.values - 1.0, "even")
    a_l = _resample(a, lam, target, support_tol)
    rho = ScalarField(target, "cell", 1.0 / (1.0 + a_l), "even")
    ur = ScalarField(target, "rface", lam * _resample(state.ur, lam, target, support_tol), "odd")
    uth = ScalarField(target, "cell", lam * _resample(state.uth, lam, target, support_tol), "odd")
    uz = ScalarField(target, "zface", lam * _resample(state.uz, lam, target, support_tol), "even")
    pi = ScalarField(target, "cell", lam**2 * _resample(state.pi, lam, target, np.inf), "even")
    out = make_state(apply_axis_parity(rho), ur, uth, uz, apply_axis_parity(pi),
                     t=state.t / lam**2)
    return out


def scale_invariance_check(state: State, lambdas=(0.5, 2.0), C: float = 1.0) -> dict:
    """Relative deviations of F1, F2/F2rhs and X under the scaling transform.

    ``u_l2`` is a non-invariant control: its entry is the deviation of
    ``||u_lam||_2`` from the predicted ``lam^(-1/2) ||u||_2``, together with the
    raw deviation under key ``u_l2_raw`` (which should be about
    ``|lam^(-1/2) - 1|``).
    """
    base = smallness_report(state, C)
    u0 = np.sqrt(base.u_l2_sq)

    def rel(a, b):
        return abs(a - b) / abs(b) if b != 0 else abs(a - b)

    out = {}
    for lam in lambdas:
        s = scaling_transform(state, lam)
        rep = smallness_report(s, C)
        ratio0 = base.F2 / base.F2rhs if base.F2rhs > 0 else 0.0
        ratio = rep.F2 / rep.F2rhs if rep.F2rhs > 0 else 0.0
        ul = np.sqrt(rep.u_l2_sq)
        out[lam] = {
            "F1": rel(rep.F1, base.F1),
            "F2_ratio": rel(ratio, ratio0),
            "X": rel(rep.X, base.X),
            "u_l2": rel(ul, lam**-0.5 * u0),
            "u_l2_raw": rel(ul, u0),
            "satisfied": rep.satisfied == base.satisfied,
        }
    return out


# ---------------------------------------------------------------------------
# a / r transport monitor


@dataclass
class AOverRMonitor:
    """Tracks ``||a/r||_inf`` against ``||a0/r||_inf exp(int ||u^r/r||_inf)``."""

    a0: float = 0.0
    integral: float = 0.0
    t: float | None = None
    last_rate: float = 0.0
    flag_ratio: float = 1.05
    flagged: bool = False
    history: list = field(default_factory=list)

    @staticmethod
    def ur_over_r(state: State) -> float:
        g = state.grid
        v = state.ur.values[1:] / g.r_f[1:, None]
        return float(np.abs(v).max())

    def update(self, state: State) -> dict:
        value = float(np.abs(a_over_r(state.rho)).max())
        rate = self.ur_over_r(state)
        if self.t is None:
            self.a0 = value
        else:
            self.integral += 0.5 * (state.t - self.t) * (rate + self.last_rate)
        self.t = state.t
        self.last_rate = rate
        bound = self.a0 * float(np.exp(self.integral))
        over = value > self.flag_ratio * bound if bound > 0 else value > 0
        self.flagged = self.flagged or bool(over)
        rec = {"t": state.t, "value": value, "bound": bound, "flag": bool(over)}
        self.history.append(rec)
        return rec


def a_over_r_monitor(state: State, monitor: AOverRMonitor | None = None) -> dict:
    """Update (or start) a monitor with the current state; returns value and bound."""
    if monitor is None:
        monitor = AOverRMonitor()
    rec = monitor.update(state)
    rec["monitor"] = monitor
    return rec


# ---------------------------------------------------------------------------
# Sobolev-Hardy


def gradient_l2_sq(f: ScalarField) -> float:
    """``||grad f||_2^2`` of a cell field, zero beyond the walls."""
    lap = lap_cell_arrays(f.grid, f.values, False, "dirichlet")
    return float(-np.sum(f.values * lap * f.grid.weights("cell")))


def sobolev_hardy_check(f: ScalarField, s: float, q: float) -> float:
    """``||f / r^(s/q)||_q / (||f||_2^(theta) ||grad f||_2^(3/2 - (3-s)/q))``,
    with ``theta = (3 - s)/q - 1/2``."""
    lhs = hardy_weighted_norm(f, s, q)
    e1 = (3.0 - s) / q - 0.5
    e2 = 1.5 - (3.0 - s) / q
    n2 = lp_norm(f, 2)
    ng = np.sqrt(max(gradient_l2_sq(f), 0.0))
    if n2 == 0 or ng == 0:
        raise DataError("Sobolev-Hardy ratio needs a non-constant, non-zero field")
    return float(lhs / (n2**e1 * ng**e2))


# ---------------------------------------------------------------------------
# mollifier


def _smooth_drop(t):
    """C^2 step from 1 (t <= 0) to 0 (t >= 1)."""
    t = np.clip(t, 0.0, 1.0)
    return 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


def bump_radial(r):
    return _smooth_drop((np.asarray(r, dtype=float) - 0.5) / 1.5)


def bump_axial(z):
    return _smooth_drop((np.abs(np.asarray(z, dtype=float)) - 0.5) / 0.5)


def _bump_mass() -> tuple[float, float]:
    """``int j_r(r) 2 pi r dr`` and ``int j_z(z) dz`` by Gauss-Legendre."""
    x, w = np.polynomial.legendre.leggauss(64)
    total_r = 0.0
    for a, b in ((0.0, 0.5), (0.5, 2.0)):
        r = 0.5 * (b - a) * x + 0.5 * (a + b)
        total_r += 0.5 * (b - a) * np.sum(w * bump_radial(r) * 2.0 * np.pi * r)
    total_z = 0.0
    for a, b in ((-1.0, -0.5), (-0.5, 0.5), (0.5, 1.0)):
        z = 0.5 * (b - a) * x + 0.5 * (a + b)
        total_z += 0.5 * (b - a) * np.sum(w * bump_axial(z))
    return float(total_r), float(total_z)


def _radial_operator(g: Grid, eps: float, targets: np.ndarray, nsub: int = 4, nphi: int = 128):
    """Matrix of ``f -> int j_r^eps(|x_h - y_h|) f(|y_h|) dy_h`` on cell values.

    Rows are the target radii, columns the source cells; cell integrals use
    ``nsub`` Gauss points and the angle a midpoint rule over ``[0, pi]``.
    """
    mass_r, _ = _bump_mass()
    x, w = np.polynomial.legendre.leggauss(nsub)
    hr = g.hr
    phi = (np.arange(nphi) + 0.5) * np.pi / nphi
    cphi = np.cos(phi)
    M = np.zeros((targets.size, g.nr))
    reach = 2.0 * eps
    for i, r in enumerate(targets):
        k0 = max(int(np.floor((r - reach) / hr)), 0)
        k1 = min(int(np.ceil((r + reach) / hr)), g.nr)
        if k1 <= k0:
            continue
        ks = np.arange(k0, k1)
        rs = (ks[:, None] + 0.5 + 0.5 * x[None, :]) * hr  # (k, sub)
        d2 = r * r + rs[..., None] ** 2 - 2.0 * r * rs[..., None] * cphi
        kern = bump_radial(np.sqrt(np.maximum(d2, 0.0)) / eps)
        ang = 2.0 * np.pi * kern.mean(axis=-1)  # int over [0, 2 pi]
        M[i, ks] = 0.5 * hr * np.sum(w[None, :] * rs * ang, axis=1)
    return M / (mass_r * eps**2)


def _axial_operator(g: Grid, eps: float, nsub: int = 4) -> np.ndarray:
    _, mass_z = _bump_mass()
    x, w = np.polynomial.legendre.leggauss(nsub)
    hz = g.hz
    zs = g.z_c[:, None] + 0.5 * hz * x[None, :]  # (nz, sub)
    d = g.z_c[:, None, None] - zs[None, :, :]
    A = 0.5 * hz * np.sum(w * bump_axial(d / eps), axis=-1)
    return A / (mass_z * eps)


@dataclass
class MollifiedDensity:
    field: ScalarField
    axis: np.ndarray  # value on r = 0 at the cell heights
    eps: float


def mollify_density(rho0: ScalarField, eps: float) -> MollifiedDensity:
    """``J^eps * rho0 - (J^eps * (rho0 - 1))(0, x_3)``.

    ``J(r, z) = j_r(r) j_z(z)`` is a product of C^2 polynomial bumps with
    ``J = 1`` on ``{r <= 1/2, |z| <= 1/2}`` and support ``{r <= 2, |z| <= 1}``,
    normalised to unit mass. ``rho0 - 1`` is extended by zero outside the box.
    """
    g = rho0.grid
    if not eps >= 2.0 * max(g.hr, g.hz) * (1 - 1e-12):
        raise DomainError(f"eps={eps} is below the resolvable scale 2 max(hr, hz)")
    dev = rho0.values - 1.0
    Mr = _radial_operator(g, eps, np.concatenate([[0.0], g.r_c]))
    Az = _axial_operator(g, eps)
    conv = Mr @ dev @ Az.T  # (nr + 1, nz): row 0 is the axis
    axis_corr = conv[0]
    vals = 1.0 + conv[1:] - axis_corr[None, :]
    axis = 1.0 + conv[0] - axis_corr
    out = apply_axis_parity(ScalarField(g, "cell", vals, "even"))
    return MollifiedDensity(out, axis, float(eps))


@dataclass
class MollifierReport:
    axis_error: float
    lower_ok: bool
    upper_ok: bool
    rho_min: float
    rho_max: float
    lipschitz_C: float
    half_upper_ok: bool

    @property
    def passed(self) -> bool:
        return self.axis_error <= 1e-12 and self.lower_ok and self.upper_ok


def mollifier_property_check(rho0: ScalarField, mollified: MollifiedDensity,
                             m: float | None = None, M: float | None = None) -> MollifierReport:
    """Axis value, the bounds ``m/2 <= rho^eps <= 2M`` and the constant in ``|rho^eps - 1| <= C r``.

    ``half_upper_ok`` records the tighter upper bound ``M/2``, which fails
    for any density with ``max rho0 > M/2`` (in particular for ``rho0 == M``).
    """
    v = mollified.field.values
    m = float(rho0.values.min()) if m is None else m
    M = float(rho0.values.max()) if M is None else M
    C = float(np.max(np.abs(v - 1.0) / rho0.grid.r_c[:, None]))
    return MollifierReport(
        axis_error=float(np.max(np.abs(mollified.axis - 1.0))),
        lower_ok=bool(v.min() >= 0.5 * m),
        upper_ok=bool(v.max() <= 2.0 * M),
        rho_min=float(v.min()),
        rho_max=float(v.max()),
        lipschitz_C=C,
        half_upper_ok=bool(v.max() <= 0.5 * M),
    )


# ---------------------------------------------------------------------------
# decay fits


@dataclass
class DecayFit:
    alpha: float
    amplitude: float
    residual: float
    samples: int


def japanese_bracket(t):
    return np.sqrt(1.0 + np.asarray(t, dtype=float) ** 2)


def decay_fit(t, y, window=(5.0, None), min_samples: int = 10) -> DecayFit:
    """Least-squares fit of ``y = A <t>^(-alpha)`` in log-log form over ``window``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape:
        raise DataError("time and value series differ in length")
    a, b = window
    b = np.inf if b is None else b
    if not a < b:
        raise DomainError(f"degenerate fit window [{a}, {b}]")
    m = (t >= a) & (t <= b)
    if m.sum() < min_samples:
        raise DomainError(f"fit window [{a}, {b}] holds {int(m.sum())} samples, need {min_samples}")
    if np.any(~(y[m] > 0)):
        raise DataError("decay fit needs positive samples")
    x = np.log(japanese_bracket(t[m]))
    ly = np.log(y[m])
    X = np.stack([np.ones_like(x), -x], axis=1)
    coef, *_ = np.linalg.lstsq(X, ly, rcond=None)
    res = ly - X @ coef
    return DecayFit(alpha=float(coef[1]), amplitude=float(np.exp(coef[0])),
                    residual=float(np.sqrt(np.mean(res * res))), samples=int(m.sum()))


# ---------------------------------------------------------------------------
# diagnostics records

SCHEMA_VERSION = 1


@dataclass
class DiagnosticsRecord:
    step: int
    t: float
    energy: float
    grad_u_sq: float
    u_l2_sq: float
    uth_l2_sq: float
    uth_l3: float
    swirl_grad_sq: float
    ruth_l1: float
    ruth_l2_sq: float
    gamma_l2: float
    phi_l2: float
    a_over_r_inf: float
    ur_over_r_inf: float
    res1: float = float("nan")
    res2: float = float("nan")
    res3: float = float("nan")
    res_div: float = float("nan")
    dt: float = float("nan")
    div_linf: float = float("nan")
    rho_min: float = float("nan")
    rho_max: float = float("nan")
    cfl_adv: float = float("nan")
    cfl_visc: float = float("nan")
    elliptic_iterations: int = 0

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list[str]:
        # float() first: numpy scalars would otherwise print as np.float64(...)
        return [repr(float(v)) if isinstance(v, float) else str(int(v)) for v in asdict(self).values()]


def compute_diagnostics(state: State, step: int = 0, report: StepReport | None = None,
                        zbc: str = "noslip", identities: bool = True) -> DiagnosticsRecord:
    g = state.grid
    w = g.weights("cell")
    uth = state.uth.values
    ruth = g.r_c[:, None] * uth
    pack = vorticity_pack(state, zbc)
    rec = DiagnosticsRecord(
        step=int(step),
        t=float(state.t),
        energy=kinetic_energy(state),
        grad_u_sq=dissipation(state, zbc),
        u_l2_sq=velocity_l2_sq(state),
        uth_l2_sq=float(np.sum(uth * uth * w)),
        uth_l3=lp_norm(state.uth, 3),
        swirl_grad_sq=swirl_gradient_sq(state, zbc),
        ruth_l1=weighted_lp(ruth, w, 1),
        ruth_l2_sq=float(np.sum(ruth * ruth * w)),
        gamma_l2=pack.gamma_norm,
        phi_l2=pack.phi_norm,
        a_over_r_inf=float(np.abs(a_over_r(state.rho)).max()),
        ur_over_r_inf=AOverRMonitor.ur_over_r(state),
    )
    if identities:
        res = identity_residuals(state, zbc=zbc)
        rec.res1, rec.res2, rec.res3, rec.res_div = (res["res1"], res["res2"], res["res3"],
                                                     res["res_div"])
    if report is not None:
        rec.dt = float(report.dt)
        rec.div_linf = float(report.div_linf)
        rec.rho_min = float(report.rho_min)
        rec.rho_max = float(report.rho_max)
        rec.cfl_adv = float(report.cfl_adv)
        rec.cfl_visc = float(report.cfl_visc)
        rec.elliptic_iterations = int(report.elliptic.iterations) if report.elliptic else 0
    else:
        rec.rho_min = float(state.rho.values.min())
        rec.rho_max = float(state.rho.values.max())
    return rec


class DiagnosticsWriter:
    """CSV sink: a schema line, the column header, then one row per record."""

    def __init__(self, path, append: bool = False):
        self.path = path
        mode = "a" if append else "w"
        self._fh = open(path, mode, newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        if not append:
            self._fh.write(f"# axiswirl diagnostics schema {SCHEMA_VERSION}\n")
            self._w.writerow(DiagnosticsRecord.columns())

    def write(self, rec: DiagnosticsRecord) -> None:
        self._w.writerow(rec.row())

    def flush(self) -> None:
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_diagnostics(path) -> dict[str, np.ndarray]:
    """Load a diagnostics CSV into column arrays; checks the schema line."""
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# axiswirl diagnostics schema"):
            raise DataError(f"{path}: missing diagnostics schema line")
        version = int(first.split()[-1])
        if version != SCHEMA_VERSION:
            raise DataError(f"{path}: schema {version} is not supported")
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    cols = {}
    for j, name in enumerate(header):
        cols[name] = np.array([float(r[j]) for r in rows])
    return cols
