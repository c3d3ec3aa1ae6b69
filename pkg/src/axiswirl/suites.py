"""Named verification suites behind ``axiswirl verify``.

Every suite evaluates its property set on a base grid and on the grid refined
by two in each direction, and returns a list of :class:`Check` rows. The
thresholds are the acceptance thresholds of the project.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .analysis import (AOverRMonitor, mollifier_property_check, mollify_density,
                       scale_invariance_check, sobolev_hardy_check)
from .errors import ConfigurationError, SolverError
from .fields import ScalarField, from_stream_function, make_state, sample, scenario_state
from .grid import make_grid
from .solver import Stepper, dissipation, kinetic_energy
from .vorticity import identity_residuals


@dataclass
class Check:
    name: str
    value: float
    limit: str
    passed: bool

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict}  {self.name:<44s} {self.value:<14.6g} {self.limit}"


@dataclass
class SuiteReport:
    suite: str
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, value, limit, passed) -> None:
        self.checks.append(Check(name, float(value), limit, bool(passed)))


# ---------------------------------------------------------------------------
# test data


def stream_test_state(R: float, Z: float, nr: int, nz: int):
    """``psi = r exp(-r^2 - z^2)`` with swirl ``u^theta = r exp(-r^2 - z^2)``."""
    g = make_grid(R, Z, nr, nz)
    psi = sample(g, lambda r, z: r * np.exp(-r * r - z * z), "node", "odd")
    uth = sample(g, lambda r, z: r * np.exp(-r * r - z * z), "cell", "odd")
    ur, uth, uz = from_stream_function(psi, uth)
    return make_state(sample(g, lambda r, z: 1.0), ur, uth, uz)


def random_scenario_params(rng: np.random.Generator) -> dict:
    """Parameters of a randomised localised initial state (inhomogeneous, with swirl)."""
    return {
        "amplitude": float(rng.uniform(0.2, 3.0)),
        "swirl": float(rng.uniform(0.0, 2.0)),
        "density": float(rng.uniform(-0.8, 2.0)),
        "width": float(rng.uniform(0.6, 1.4)),
        "poloidal": str(rng.choice(["stream", "vorticity"])),
    }


def divergence_ratio(state, report) -> float:
    """Post-projection divergence over ``1e-8 max(1, |u|_inf / min(hr, hz))``."""
    g = state.grid
    umax = max(float(np.abs(f.values).max()) for f in state.velocity())
    return report.div_linf / (1e-8 * max(1.0, umax / min(g.hr, g.hz)))


def ruth_norms(state) -> tuple[float, float]:
    g = state.grid
    w = g.weights("cell")
    v = np.abs(g.r_c[:, None] * state.uth.values)
    return float(np.sum(v * w)), float(np.sqrt(np.sum(v * v * w)))


def energy_run(state, steps: int, zbc: str = "noslip") -> dict:
    """Largest per-step relative energy increase and ``max (E_n + sum dt |grad u|^2) / E_0``."""
    stepper = Stepper(state.grid, zbc=zbc)
    e0 = kinetic_energy(state)
    e = e0
    dissipated = 0.0
    worst_step = -np.inf
    worst_budget = 1.0
    for _ in range(steps):
        state, rep = stepper.step(state)
        e_new = kinetic_energy(state)
        dissipated += rep.dt * dissipation(state, zbc)
        worst_step = max(worst_step, (e_new - e) / e)
        worst_budget = max(worst_budget, (e_new + dissipated) / e0)
        e = e_new
    return {"step_increase": worst_step, "budget": worst_budget, "state": state}


def contraction_run(state, steps: int, zbc: str = "noslip") -> tuple[float, float]:
    """Largest per-step relative growth of ``||r u^theta||_1`` and ``||r u^theta||_2``."""
    stepper = Stepper(state.grid, zbc=zbc)
    p1, p2 = ruth_norms(state)
    g1 = g2 = -np.inf
    for _ in range(steps):
        state, _ = stepper.step(state)
        q1, q2 = ruth_norms(state)
        g1 = max(g1, (q1 - p1) / p1)
        g2 = max(g2, (q2 - p2) / p2)
        p1, p2 = q1, q2
    return g1, g2


def mollifier_test_density(R: float, Z: float, nr: int, nz: int) -> ScalarField:
    """``rho0 = 1 + r exp(-r^2 - z^2) / (2 (1 + r))``."""
    g = make_grid(R, Z, nr, nz)
    return sample(g, lambda r, z: 1.0 + 0.5 * r * np.exp(-r * r - z * z) / (1.0 + r))


def swirl_column_oracle(R: float, n: int, t: float, profile):
    """Radial swirl diffusion ``u_t = (1/r)(r u_r)_r - u/r^2`` with ``u(R) = 0`` to time ``t``.

    Conservative finite volumes on ``n`` cells (odd parity at the axis, ghost
    ``-u`` at the wall) integrated by Radau IIA at tight tolerances; the
    returned ``(r_c, u)`` serve as a reference for the z-independent column.
    """
    h = R / n
    rc = (np.arange(n) + 0.5) * h
    rf = np.arange(n + 1) * h
    lo = rf[1:-1] / (h * h * rc[1:])
    up = rf[1:-1] / (h * h * rc[:-1])
    d = -(rf[:-1] + rf[1:]) / (h * h * rc) - 1.0 / rc**2
    d[-1] -= rf[-1] / (h * h * rc[-1])
    A = sp.diags([lo, d, up], [-1, 0, 1]).tocsr()
    sol = solve_ivp(lambda _, u: A @ u, (0.0, t), profile(rc), method="Radau", jac=A,
                    rtol=1e-11, atol=1e-14)
    if not sol.success:
        raise SolverError(f"swirl column oracle failed: {sol.message}")
    return rc, sol.y[:, -1]


def sobolev_exact_ratio() -> float:
    """``||f||_6 / ||grad f||_2`` for ``f = exp(-|x|^2)`` on the whole space."""
    l6 = (np.pi / 6.0) ** 0.25
    grad = np.sqrt(3.0 * (np.pi / 2.0) ** 1.5)
    return l6 / grad


# ---------------------------------------------------------------------------
# suites


def _resolutions(nr, nz):
    return ((nr, nz), (2 * nr, 2 * nz))


def suite_identities(nr: int = 64, nz: int = 64) -> SuiteReport:
    rep = SuiteReport("identities")
    res = [identity_residuals(stream_test_state(4.0, 4.0, a, b)) for a, b in _resolutions(nr, nz)]
    for key in ("res1", "res2", "res3", "res_div"):
        ratio = res[0][key] / res[1][key]
        rep.add(f"{key} {nr}x{nz}", res[0][key], "reported", True)
        rep.add(f"{key} convergence ratio", ratio, "in [3, 5]", 3.0 <= ratio <= 5.0)
    return rep


def suite_projection(nr: int = 128, nz: int = 256, steps: int = 100) -> SuiteReport:
    rep = SuiteReport("projection")
    for a, b in _resolutions(nr, nz):
        g = make_grid(4.0, 4.0, a, b)
        state = scenario_state("small-swirl", g)
        stepper = Stepper(g)
        worst = 0.0
        for _ in range(steps):
            state, srep = stepper.step(state)
            worst = max(worst, divergence_ratio(state, srep))
        rep.add(f"normalised divergence {a}x{b}", worst, "<= 1", worst <= 1.0)
    return rep


def scaling_deviations(n: int, L: float = 10.0) -> dict:
    g = make_grid(L, L, n, n)
    state = scenario_state("small-swirl", g, poloidal="stream")
    return scale_invariance_check(state, (0.5, 2.0))


def suite_scaling(nr: int = 256, nz: int = 256) -> SuiteReport:
    rep = SuiteReport("scaling")
    if nr != nz:
        raise ConfigurationError("the scaling suite uses square grids (nr == nz)")
    coarse, fine = scaling_deviations(nr), scaling_deviations(2 * nr)
    for lam in (0.5, 2.0):
        for key in ("F1", "F2_ratio", "X"):
            c, f = coarse[lam][key], fine[lam][key]
            rep.add(f"lambda={lam} {key} deviation {nr}^2", c, "<= 2e-2", c <= 2e-2)
            shrink = c / f if f > 0 else np.inf
            rep.add(f"lambda={lam} {key} shrink {nr}^2 -> {2 * nr}^2", shrink, ">= 3",
                    shrink >= 3.0)
        rep.add(f"lambda={lam} satisfied(C) unchanged", 0.0, "true",
                coarse[lam]["satisfied"] and fine[lam]["satisfied"])
        # the control is bilinear interpolation error, O(h^2); judged on the finer grid
        ctrl = fine[lam]["u_l2"]
        rep.add(f"lambda={lam} control |u|_2 vs lambda^-1/2 at {2 * nr}^2", ctrl, "<= 1e-3",
                ctrl <= 1e-3)
    return rep


def hardy_family(nr: int, nz: int, seed: int = 0, members: int = 20) -> np.ndarray:
    """Sobolev-Hardy ratios (s=1, q=3) for random anisotropic Gaussians."""
    rng = np.random.default_rng(seed)
    g = make_grid(8.0, 8.0, nr, nz)
    out = []
    for _ in range(members):
        z0 = rng.uniform(-2.0, 2.0)
        wr, wz = rng.uniform(0.5, 1.5, size=2)
        f = sample(g, lambda r, z: np.exp(-(r / wr) ** 2 - ((z - z0) / wz) ** 2))
        out.append(sobolev_hardy_check(f, 1.0, 3.0))
    return np.array(out)


def suite_hardy(nr: int = 128, nz: int = 128) -> SuiteReport:
    rep = SuiteReport("hardy")
    exact = sobolev_exact_ratio()
    ratios = []
    for a, b in _resolutions(nr, nz):
        g = make_grid(6.0, 6.0, a, b)
        f = sample(g, lambda r, z: np.exp(-r * r - z * z))
        ratios.append(sobolev_hardy_check(f, 0.0, 6.0))
        err = abs(ratios[-1] - exact) / exact
        rep.add(f"Sobolev ratio s=0 q=6 vs quadrature {a}x{b}", err, "<= 1e-3", err <= 1e-3)
    drift = abs(ratios[1] - ratios[0]) / ratios[1]
    rep.add("Sobolev ratio drift under refinement", drift, "<= 1e-3", drift <= 1e-3)
    for a, b in _resolutions(nr, nz):
        fam = hardy_family(a, b)
        spread = fam.max() / np.median(fam)
        rep.add(f"family max ratio s=1 q=3 {a}x{b}", fam.max(), "finite",
                bool(np.isfinite(fam.max())))
        rep.add(f"family max / median {a}x{b}", spread, "<= 10", spread <= 10.0)
    return rep


def mollifier_sweep(rho0: ScalarField, factors=(2, 4, 8)):
    g = rho0.grid
    h = max(g.hr, g.hz)
    out = []
    for k in factors:
        mol = mollify_density(rho0, k * h)
        out.append((k, mollifier_property_check(rho0, mol)))
    return out


def suite_mollifier(nr: int = 256, nz: int = 512) -> SuiteReport:
    rep = SuiteReport("mollifier")
    g = make_grid(3.0, 3.0, nr, nz)
    trivial = mollifier_sweep(sample(g, lambda r, z: 1.0), (2,))[0][1]
    rep.add("rho0 == 1: C", trivial.lipschitz_C, "== 0",
            trivial.passed and trivial.lipschitz_C == 0.0)
    for a, b in _resolutions(nr, nz):
        sweep = mollifier_sweep(mollifier_test_density(3.0, 3.0, a, b))
        for k, r in sweep:
            rep.add(f"{a}x{b} eps={k}h axis error", r.axis_error, "<= 1e-12", r.axis_error <= 1e-12)
            rep.add(f"{a}x{b} eps={k}h m/2 <= rho <= 2M", r.rho_max, "bounds",
                    r.lower_ok and r.upper_ok)
        cs = np.array([r.lipschitz_C for _, r in sweep])
        var = cs.max() / cs.min()
        rep.add(f"{a}x{b} variation of C over eps", var, "<= 2", var <= 2.0)
    return rep


def suite_swirl_contraction(nr: int = 64, nz: int = 128, steps: int = 200) -> SuiteReport:
    rep = SuiteReport("swirl-contraction")
    cases = [("small-swirl", {"swirl_profile": p}, "noslip")
             for p in ("gaussian", "dipole", "quadrupole")]
    cases.append(("homogeneous", {}, "noslip"))
    cases.append(("pure-swirl-column", {}, "slip"))
    for a, b in _resolutions(nr, nz):
        g = make_grid(4.0, 4.0, a, b)
        for name, params, zbc in cases:
            g1, g2 = contraction_run(scenario_state(name, g, **params), steps, zbc)
            label = name + (f"/{params['swirl_profile']}" if params else "")
            rep.add(f"{label} {a}x{b} |r u^theta|_1 growth", g1, "<= 1e-8", g1 <= 1e-8)
            rep.add(f"{label} {a}x{b} |r u^theta|_2 growth", g2, "<= 1e-8", g2 <= 1e-8)
    return rep


def suite_energy(nr: int = 32, nz: int = 64, runs: int = 10, steps: int = 200,
                 seed: int = 0) -> SuiteReport:
    rep = SuiteReport("energy")
    for a, b in _resolutions(nr, nz):
        g = make_grid(4.0, 4.0, a, b)
        rng = np.random.default_rng(seed)
        inc, budget = -np.inf, 0.0
        for _ in range(runs):
            out = energy_run(scenario_state("small-swirl", g, **random_scenario_params(rng)), steps)
            inc = max(inc, out["step_increase"])
            budget = max(budget, out["budget"])
        rep.add(f"{a}x{b} max per-step energy growth", inc, "<= 1e-10", inc <= 1e-10)
        rep.add(f"{a}x{b} max (E + dissipated) / E0", budget, "<= 1.05", budget <= 1.05)
    return rep


def suite_a_over_r(nr: int = 64, nz: int = 128, steps: int = 200) -> SuiteReport:
    rep = SuiteReport("a-over-r")
    for a, b in _resolutions(nr, nz):
        g = make_grid(4.0, 4.0, a, b)
        state = scenario_state("small-swirl", g)
        mon = AOverRMonitor()
        mon.update(state)
        stepper = Stepper(g)
        worst = 0.0
        for _ in range(steps):
            state, _ = stepper.step(state)
            rec = mon.update(state)
            worst = max(worst, rec["value"] / rec["bound"])
        rep.add(f"{a}x{b} max |a/r|_inf / bound", worst, "<= 1.05", worst <= 1.05)
    return rep


SUITES = {
    "identities": suite_identities,
    "projection": suite_projection,
    "scaling": suite_scaling,
    "hardy": suite_hardy,
    "mollifier": suite_mollifier,
    "swirl-contraction": suite_swirl_contraction,
    "energy": suite_energy,
    "a-over-r": suite_a_over_r,
}


def run_suite(name: str, nr: int | None = None, nz: int | None = None) -> SuiteReport:
    if name not in SUITES:
        raise ConfigurationError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    kwargs = {}
    if nr is not None:
        kwargs["nr"] = nr
    if nz is not None:
        kwargs["nz"] = nz
    elif nr is not None and name in ("identities", "scaling", "hardy"):
        kwargs["nz"] = nr
    return SUITES[name](**kwargs)


__all__ = ["Check", "SuiteReport", "SUITES", "run_suite"]
