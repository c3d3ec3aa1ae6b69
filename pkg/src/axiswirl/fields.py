"""Field containers, axis parity, the solver state and initial-data generators."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataError
from .grid import LOCATIONS, Grid

PARITIES = ("even", "odd")


@dataclass
class ScalarField:
    """Axisymmetric samples of one scalar at one staggering location.

    ``ghost`` holds the mirror column across ``r = 0`` once
    :func:`apply_axis_parity` has been called; it is ``None`` before that.
    """

    grid: Grid
    loc: str
    values: np.ndarray
    parity: str = "even"
    ghost: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.loc not in LOCATIONS:
            raise ValueError(f"unknown location {self.loc!r}")
        if self.parity not in PARITIES:
            raise ValueError(f"unknown parity {self.parity!r}")
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape(self.loc):
            raise ValueError(
                f"{self.loc} field on {self.grid} needs shape "
                f"{self.grid.shape(self.loc)}, got {self.values.shape}"
            )

    def copy(self) -> "ScalarField":
        ghost = None if self.ghost is None else self.ghost.copy()
        return replace(self, values=self.values.copy(), ghost=ghost)

    def with_values(self, values: np.ndarray, parity: str | None = None) -> "ScalarField":
        return ScalarField(self.grid, self.loc, values, parity or self.parity)

    def __neg__(self):
        return self.with_values(-self.values)

    def __mul__(self, c):
        return self.with_values(self.values * c)

    __rmul__ = __mul__


def zeros(grid: Grid, loc: str = "cell", parity: str = "even") -> ScalarField:
    return ScalarField(grid, loc, np.zeros(grid.shape(loc)), parity)


def sample(grid: Grid, func, loc: str = "cell", parity: str = "even") -> ScalarField:
    """Evaluate ``func(r, z)`` (broadcasting) at the sample points of ``loc``."""
    r, z = grid.mesh(loc)
    return ScalarField(grid, loc, np.asarray(func(r, z), dtype=float) * np.ones_like(r), parity)


def apply_axis_parity(f: ScalarField) -> ScalarField:
    """Return a copy with the ghost column across the axis filled from the parity.

    Fields stored on the axis itself (r-faces, nodes) are forced to zero there
    when odd.
    """
    sign = 1.0 if f.parity == "even" else -1.0
    out = f.copy()
    v = out.values
    if f.loc in ("cell", "zface"):
        out.ghost = sign * v[0].copy()
    else:
        if f.parity == "odd":
            v[0] = 0.0
        out.ghost = sign * v[1].copy()
    return out


# ---------------------------------------------------------------------------
# state


@dataclass
class State:
    """Full unknown ``(rho, u^r, u^theta, u^3, Pi)`` at time ``t``."""

    t: float
    rho: ScalarField
    ur: ScalarField
    uth: ScalarField
    uz: ScalarField
    pi: ScalarField

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    @property
    def a(self) -> ScalarField:
        # derived on demand, never stored
        return self.rho.with_values(1.0 / self.rho.values - 1.0)

    def copy(self) -> "State":
        return State(self.t, self.rho.copy(), self.ur.copy(), self.uth.copy(),
                     self.uz.copy(), self.pi.copy())

    def velocity(self):
        return self.ur, self.uth, self.uz

    def check(self, div_tol: float | None = None) -> None:
        """Raise :class:`DataError` if a state invariant is violated."""
        rho = self.rho.values
        if not np.all(np.isfinite(rho)) or rho.min() <= 0.0:
            raise DataError("density must be finite and strictly positive")
        for f in (self.ur, self.uth, self.uz, self.pi):
            if not np.all(np.isfinite(f.values)):
                raise DataError("non-finite values in state")
        if np.any(self.ur.values[0] != 0.0):
            raise DataError("u^r must vanish on the axis face")
        if div_tol is not None:
            from .ops import cyl_divergence

            div = np.abs(cyl_divergence(self.ur, self.uz).values).max()
            if div > div_tol:
                raise DataError(f"discrete divergence {div:.3e} exceeds {div_tol:.3e}")


def make_state(rho: ScalarField, ur: ScalarField, uth: ScalarField, uz: ScalarField,
               pi: ScalarField | None = None, t: float = 0.0) -> State:
    grid = rho.grid
    if pi is None:
        pi = zeros(grid, "cell", "even")
    rho = apply_axis_parity(replace(rho, parity="even"))
    ur = apply_axis_parity(replace(ur, parity="odd"))
    uth = apply_axis_parity(replace(uth, parity="odd"))
    uz = apply_axis_parity(replace(uz, parity="even"))
    # no-slip walls: normal components vanish on the boundary faces
    ur.values[-1] = 0.0
    uz.values[:, 0] = 0.0
    uz.values[:, -1] = 0.0
    return State(float(t), rho, ur, uth, uz, apply_axis_parity(replace(pi, parity="even")))


def rest_state(grid: Grid) -> State:
    return make_state(sample(grid, lambda r, z: 1.0), zeros(grid, "rface", "odd"),
                      zeros(grid, "cell", "odd"), zeros(grid, "zface", "even"))


# ---------------------------------------------------------------------------
# stream function


def from_stream_function(psi: ScalarField, uth: ScalarField | None = None):
    """Velocity ``u = u^theta e_theta + curl(psi e_theta)`` on the staggered grid.

    ``psi`` is node-sampled; it is forced to zero on the axis and on the outer
    boundary. The discrete divergence of the result vanishes to round-off.
    """
    grid = psi.grid
    if psi.loc != "node":
        raise ValueError("stream function must be sampled at nodes")
    p = psi.values.copy()
    p[0] = 0.0
    p[-1] = 0.0
    p[:, 0] = 0.0
    p[:, -1] = 0.0
    ur = -(p[:, 1:] - p[:, :-1]) / grid.hz
    rp = grid.r_f[:, None] * p
    uz = (rp[1:] - rp[:-1]) / (grid.r_c[:, None] * grid.hr)
    if uth is None:
        uth = zeros(grid, "cell", "odd")
    ur_f = apply_axis_parity(ScalarField(grid, "rface", ur, "odd"))
    uz_f = apply_axis_parity(ScalarField(grid, "zface", uz, "even"))
    uth_f = apply_axis_parity(replace(uth, parity="odd"))
    return ur_f, uth_f, uz_f


# ---------------------------------------------------------------------------
# scenarios

SCENARIOS = ("no-swirl", "small-swirl", "homogeneous", "pure-swirl-column", "rest")


def _gauss(r, z, width):
    return np.exp(-(r * r + z * z) / (width * width))


def density_profile(grid: Grid, density: float, width: float = 1.0) -> ScalarField:
    """``rho = 1 / (1 + a)`` with ``a = density * (r/width)^2 exp(-|x|^2/width^2)``.

    ``a`` vanishes quadratically at the axis, so ``a / r`` is bounded and
    ``rho = 1`` there.
    """
    # max of x exp(-x) is 1/e, so 1 + a > 0 iff density > -e
    if density <= -np.e:
        raise ConfigurationError("density amplitude too negative: rho would blow up")

    def rho(r, z):
        a = density * (r / width) ** 2 * _gauss(r, z, width)
        return 1.0 / (1.0 + a)

    return sample(grid, rho, "cell", "even")


def oseen_swirl(r, nu: float = 1.0, circulation: float = 1.0):
    """Lamb-Oseen azimuthal velocity ``circ (1 - exp(-r^2 / 4 nu)) / (2 pi r)``."""
    r = np.asarray(r, dtype=float)
    return circulation * -np.expm1(-r * r / (4.0 * nu)) / (2.0 * np.pi * r)


SWIRL_PROFILES = {
    "gaussian": lambda zeta: 1.0,
    "dipole": lambda zeta: zeta,
    "quadrupole": lambda zeta: 1.0 - 2.0 * zeta * zeta,
}


def builtin_scenarios(name: str, grid: Grid, amplitude: float = 0.5, swirl: float = 0.1,
                      density: float = 0.3, width: float = 1.0, poloidal: str = "vorticity",
                      nu: float = 1.0, circulation: float = 1.0,
                      swirl_profile: str = "gaussian"):
    """Initial ``(rho0, (u^r, u^theta, u^3))`` for a named data family.

    Poloidal part: ``poloidal="vorticity"`` prescribes a Gaussian
    ``Gamma0 = amplitude * exp(-|x|^2/width^2)`` (``omega^theta = r Gamma0``)
    and inverts the discrete curl for the stream function, giving a flow with
    non-zero impulse; ``poloidal="stream"`` prescribes
    ``psi = amplitude * r exp(-|x|^2/width^2)`` directly.
    Swirl: ``u^theta = swirl * r * P(z) * exp(-|x|^2/width^2)`` with
    ``P = 1`` (``"gaussian"``), ``P = z / width`` (``"dipole"``, zero angular
    momentum) or ``P = 1 - 2 z^2 / width^2`` (``"quadrupole"``, zero angular
    momentum and zero first axial moment). Profiles with vanishing low moments
    make ``r u^theta`` decay faster.
    """
    if swirl_profile not in SWIRL_PROFILES:
        raise ConfigurationError(
            f"unknown swirl profile {swirl_profile!r}; choose from {tuple(SWIRL_PROFILES)}")
    if name not in SCENARIOS:
        raise ConfigurationError(f"unknown scenario {name!r}; choose from {SCENARIOS}")
    if width <= 0:
        raise ConfigurationError("width must be positive")

    if name == "rest":
        return (sample(grid, lambda r, z: 1.0, "cell", "even"),
                (zeros(grid, "rface", "odd"), zeros(grid, "cell", "odd"),
                 zeros(grid, "zface", "even")))

    if name == "pure-swirl-column":
        rho0 = sample(grid, lambda r, z: 1.0, "cell", "even")
        uth = sample(grid, lambda r, z: oseen_swirl(r, nu, circulation), "cell", "odd")
        return rho0, (zeros(grid, "rface", "odd"), apply_axis_parity(uth),
                      zeros(grid, "zface", "even"))

    if name == "homogeneous":
        rho0 = sample(grid, lambda r, z: 1.0, "cell", "even")
    else:
        rho0 = density_profile(grid, density, width)
    s = 0.0 if name == "no-swirl" else swirl
    shape = SWIRL_PROFILES[swirl_profile]
    uth = sample(grid, lambda r, z: s * r * shape(z / width) * _gauss(r, z, width), "cell", "odd")

    if poloidal == "stream":
        psi = sample(grid, lambda r, z: amplitude * r * _gauss(r, z, width), "node", "odd")
    elif poloidal == "vorticity":
        from .ops import stream_function_from_vorticity

        om = sample(grid, lambda r, z: amplitude * r * _gauss(r, z, width), "node", "odd")
        psi = stream_function_from_vorticity(om)
    else:
        raise ConfigurationError(f"unknown poloidal family {poloidal!r}")
    return apply_axis_parity(rho0), from_stream_function(psi, uth)


def scenario_state(name: str, grid: Grid, **params) -> State:
    rho0, (ur, uth, uz) = builtin_scenarios(name, grid, **params)
    return make_state(rho0, ur, uth, uz)


# ---------------------------------------------------------------------------
# checkpoints

MAGIC = b"AXI1"
_HEADER = struct.Struct("<4sqqddd")


def write_checkpoint(path, state: State) -> None:
    """Header ``AXI1, nr, nz, R, Z, t`` (little endian) then rho, u^r, u^theta, u^3, Pi."""
    g = state.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, g.nr, g.nz, g.R, g.Z, state.t))
        for f in (state.rho, state.ur, state.uth, state.uz, state.pi):
            fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes(order="C"))


def read_checkpoint(path) -> State:
    from .grid import make_grid

    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise DataError(f"{path}: truncated checkpoint header")
    magic, nr, nz, R, Z, t = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    try:
        grid = make_grid(R, Z, nr, nz)
    except ConfigurationError as exc:
        raise DataError(f"{path}: invalid grid in checkpoint header: {exc}") from exc
    offset = _HEADER.size
    arrays = []
    for loc in ("cell", "rface", "cell", "zface", "cell"):
        shape = grid.shape(loc)
        n = shape[0] * shape[1]
        if offset + 8 * n > len(data):
            raise DataError(f"{path}: truncated checkpoint body")
        chunk = np.frombuffer(data, dtype="<f8", count=n, offset=offset)
        arrays.append(chunk.reshape(shape).astype(float))
        offset += 8 * n
    if offset != len(data):
        raise DataError(f"{path}: {len(data) - offset} trailing bytes")
    rho, ur, uth, uz, pi = arrays
    return State(
        t,
        apply_axis_parity(ScalarField(grid, "cell", rho, "even")),
        apply_axis_parity(ScalarField(grid, "rface", ur, "odd")),
        apply_axis_parity(ScalarField(grid, "cell", uth, "odd")),
        apply_axis_parity(ScalarField(grid, "zface", uz, "even")),
        apply_axis_parity(ScalarField(grid, "cell", pi, "even")),
    )
