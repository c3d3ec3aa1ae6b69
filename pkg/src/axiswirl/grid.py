"""Staggered axisymmetric mesh on [0, R] x [-Z, Z] and its weighted quadrature.

Layout (MAC type):

* cell centres ``(r_i, z_j) = ((i + 1/2) hr, -Z + (j + 1/2) hz)`` carry rho, Pi,
  u_theta and every diagnostic, array shape ``(nr, nz)``;
* r-faces ``(i hr, z_j)``, shape ``(nr + 1, nz)``; face 0 sits on the axis;
* z-faces ``(r_i, -Z + j hz)``, shape ``(nr, nz + 1)``;
* nodes ``(i hr, -Z + j hz)``, shape ``(nr + 1, nz + 1)``; used for the
  stream function.

All volume integrals use the measure ``dx = 2 pi r dr dz``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, DomainError

LOCATIONS = ("cell", "rface", "zface", "node")


@dataclass(frozen=True)
class Grid:
    R: float
    Z: float
    nr: int
    nz: int

    @property
    def hr(self) -> float:
        return self.R / self.nr

    @property
    def hz(self) -> float:
        return 2.0 * self.Z / self.nz

    @property
    def h(self) -> float:
        return min(self.hr, self.hz)

    @cached_property
    def r_c(self) -> np.ndarray:
        return (np.arange(self.nr) + 0.5) * self.hr

    @cached_property
    def r_f(self) -> np.ndarray:
        return np.arange(self.nr + 1) * self.hr

    @cached_property
    def z_c(self) -> np.ndarray:
        return -self.Z + (np.arange(self.nz) + 0.5) * self.hz

    @cached_property
    def z_f(self) -> np.ndarray:
        return -self.Z + np.arange(self.nz + 1) * self.hz

    def shape(self, loc: str = "cell") -> tuple[int, int]:
        if loc == "cell":
            return (self.nr, self.nz)
        if loc == "rface":
            return (self.nr + 1, self.nz)
        if loc == "zface":
            return (self.nr, self.nz + 1)
        if loc == "node":
            return (self.nr + 1, self.nz + 1)
        raise ValueError(f"unknown location {loc!r}")

    def coords(self, loc: str = "cell") -> tuple[np.ndarray, np.ndarray]:
        """Broadcastable ``(r, z)`` sample coordinates for a location tag."""
        r = self.r_c if loc in ("cell", "zface") else self.r_f
        z = self.z_c if loc in ("cell", "rface") else self.z_f
        return r[:, None], z[None, :]

    def mesh(self, loc: str = "cell") -> tuple[np.ndarray, np.ndarray]:
        r, z = self.coords(loc)
        return np.broadcast_arrays(r, z)

    def weights(self, loc: str = "cell") -> np.ndarray:
        """Quadrature weights ``2 pi r hr hz`` (trapezoid halving on outer faces)."""
        return self._weights[loc]

    @cached_property
    def _weights(self) -> dict[str, np.ndarray]:
        c = 2.0 * np.pi * self.hr * self.hz
        out = {}
        out["cell"] = c * self.r_c[:, None] * np.ones((1, self.nz))
        wr = c * self.r_f[:, None] * np.ones((1, self.nz))
        wr[-1] *= 0.5
        out["rface"] = wr
        wz = c * self.r_c[:, None] * np.ones((1, self.nz + 1))
        wz[:, 0] *= 0.5
        wz[:, -1] *= 0.5
        out["zface"] = wz
        wn = c * self.r_f[:, None] * np.ones((1, self.nz + 1))
        wn[-1] *= 0.5
        wn[:, 0] *= 0.5
        wn[:, -1] *= 0.5
        out["node"] = wn
        for w in out.values():
            w.setflags(write=False)
        return out

    def refine(self, factor: int = 2) -> "Grid":
        return make_grid(self.R, self.Z, self.nr * factor, self.nz * factor)


def make_grid(R: float, Z: float, nr: int, nz: int) -> Grid:
    """Build a grid; every face of the coarse grid is a face of ``refine(2)``."""
    if not (np.isfinite(R) and np.isfinite(Z)) or R <= 0 or Z <= 0:
        raise ConfigurationError(f"domain sizes must be positive, got R={R}, Z={Z}")
    if int(nr) != nr or int(nz) != nz or nr < 4 or nz < 4:
        raise ConfigurationError(f"cell counts must be integers >= 4, got nr={nr}, nz={nz}")
    return Grid(float(R), float(Z), int(nr), int(nz))


def _check_p(p: float) -> float:
    p = float(p)
    if not p >= 1.0:
        raise DomainError(f"L^p exponent must be >= 1 (or inf), got {p}")
    return p


def weighted_lp(values: np.ndarray, weights: np.ndarray, p: float) -> float:
    p = _check_p(p)
    a = np.abs(values)
    if np.isinf(p):
        return float(a.max()) if a.size else 0.0
    if p == 1.0:
        return float(np.sum(a * weights))
    # normalise by the maximum so that a**p neither underflows nor overflows
    m = float(a.max()) if a.size else 0.0
    if m == 0.0 or not np.isfinite(m):
        return m
    a = a / m
    if p == 2.0:
        return m * float(np.sqrt(np.sum(a * a * weights)))
    return m * float(np.sum(a**p * weights) ** (1.0 / p))


def lp_norm(f, p: float = 2.0) -> float:
    """``(sum |f|^p 2 pi r hr hz)^(1/p)``; the sup over samples for ``p = inf``.

    The sampled maximum is a lower bound of the continuum supremum.
    """
    return weighted_lp(f.values, f.grid.weights(f.loc), p)


def hardy_weighted_norm(f, s: float, q: float) -> float:
    """``|| f / r^(s/q) ||_q`` evaluated at the sample radii of ``f``."""
    s = float(s)
    q = float(q)
    if not 0.0 <= s < 2.0:
        raise DomainError(f"weight exponent s must lie in [0, 2), got {s}")
    if not 2.0 <= q <= 2.0 * (3.0 - s):
        raise DomainError(f"q must lie in [2, {2.0 * (3.0 - s)}] for s={s}, got {q}")
    if f.loc not in ("cell", "zface"):
        raise DomainError("Hardy weight needs samples with r > 0 (cell or z-face)")
    if s == 0.0:
        return lp_norm(f, q)
    r, _ = f.grid.coords(f.loc)
    return weighted_lp(f.values * r ** (-s / q), f.grid.weights(f.loc), q)
