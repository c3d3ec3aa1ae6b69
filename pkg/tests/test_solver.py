import numpy as np
import pytest
from scipy.integrate import solve_ivp

from axiswirl.errors import DomainError, StepRejected
from axiswirl.fields import (ScalarField, from_stream_function, make_state, rest_state, sample,
                             scenario_state, zeros)
from axiswirl.grid import make_grid
from axiswirl.ops import cyl_divergence, grad_arrays
from axiswirl.solver import (DEFAULT_SAFETY, Stepper, advect_density, advective_courant, cfl_dt, dissipation,
                             face_density, kinetic_energy, momentum_predictor, momentum_rhs,
                             project, step, transport_rate, _momentum_rhs_fast)
from axiswirl.suites import energy_run, random_scenario_params, swirl_column_oracle

from conftest import rel_l2


# ---------------------------------------------------------------------------
# time step


def test_cfl_viscous_limit_at_rest():
    g = make_grid(1.0, 0.5, 16, 16)
    assert cfl_dt(rest_state(g), 0.5) == pytest.approx(0.5 * g.h**2 / 4, rel=1e-15)
    assert cfl_dt(rest_state(g.refine()), 0.5) == pytest.approx(cfl_dt(rest_state(g), 0.5) / 4)


def test_cfl_takes_the_smaller_limit():
    g = make_grid(1.28, 0.64, 128, 128)  # h = 0.01
    st = rest_state(g)
    st.uth.values[5, 5] = 10.0
    # advective limit 0.5 * 0.01 / 10 = 5e-4, viscous 0.5 * 1e-4 / 4 = 1.25e-5
    assert cfl_dt(st, 0.5) == pytest.approx(1.25e-5)
    st.rho.values[:] = 1e4
    assert cfl_dt(st, 0.5) == pytest.approx(5e-4)


def test_cfl_rejects_bad_input(small_grid):
    st = rest_state(small_grid)
    with pytest.raises(DomainError):
        cfl_dt(st, 1.5)
    st.ur.values[3, 3] = np.nan
    with pytest.raises(StepRejected):
        cfl_dt(st)


# ---------------------------------------------------------------------------
# density transport


def _stream_velocity(g, amp=1.0):
    psi = sample(g, lambda r, z: amp * r * np.exp(-r * r - z * z), "node", "odd")
    ur, _, uz = from_stream_function(psi)
    return ur, uz


def test_constant_density_is_invariant(small_grid):
    ur, uz = _stream_velocity(small_grid)
    rho = sample(small_grid, lambda r, z: 1.7)
    out = advect_density(rho, ur, uz, 0.01)
    assert np.all(out.values == 1.7)


def test_no_flow_leaves_density_unchanged(small_grid):
    rho = sample(small_grid, lambda r, z: 1 + np.exp(-r * r - z * z))
    out = advect_density(rho, zeros(small_grid, "rface", "odd"), zeros(small_grid, "zface"), 0.1)
    np.testing.assert_array_equal(out.values, rho.values)


def test_transport_is_bounded_and_conserves_mass():
    g = make_grid(3.0, 3.0, 48, 96)
    ur, uz = _stream_velocity(g, 2.0)
    rho = sample(g, lambda r, z: 1 + 0.8 * np.exp(-((r - 0.8) ** 2 + z * z) / 0.1))
    lo, hi = rho.values.min(), rho.values.max()
    w = g.weights()
    mass0 = np.sum(rho.values * w)
    dt = 0.4 / advective_courant(g, ur.values, uz.values, 1.0)
    for _ in range(100):
        new = advect_density(rho, ur, uz, dt)
        assert abs(np.sum(new.values * w) - np.sum(rho.values * w)) <= 1e-10 * mass0
        rho = new
    assert rho.values.min() >= lo - 1e-12 and rho.values.max() <= hi + 1e-12


def test_transport_rejects_large_courant(small_grid):
    ur, uz = _stream_velocity(small_grid, 5.0)
    with pytest.raises(StepRejected):
        advect_density(sample(small_grid, lambda r, z: 1.0 + r), ur, uz, 10.0)


def test_compiled_and_array_transport_agree(small_grid):
    ur, uz = _stream_velocity(small_grid)
    q = sample(small_grid, lambda r, z: np.exp(-(r - 1) ** 2 - z * z) + 0.1 * np.sin(3 * z)).values
    a = transport_rate(small_grid, q, ur.values, uz.values, fast=True)
    b = transport_rate(small_grid, q, ur.values, uz.values, fast=False)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-13)


def test_blob_follows_characteristics():
    # a small blob advected by the steady field of psi = r exp(-r^2 - z^2)
    g = make_grid(3.0, 3.0, 96, 192)
    ur, uz = _stream_velocity(g)
    r0, z0, s = 0.9, 0.2, 0.12
    rho = sample(g, lambda r, z: 1 + np.exp(-((r - r0) ** 2 + (z - z0) ** 2) / s**2))
    T = 1.0
    n = int(np.ceil(T * advective_courant(g, ur.values, uz.values, 1.0) / 0.4))
    for _ in range(n):
        rho = advect_density(rho, ur, uz, T / n)

    def vel(t, x):
        r, z = x
        e = np.exp(-r * r - z * z)
        return [2 * z * r * e, (2 - 2 * r * r) * e]

    path = solve_ivp(vel, (0, T), [r0, z0], rtol=1e-10, atol=1e-12).y[:, -1]
    dev = rho.values - 1
    r, z = g.mesh()
    peak = dev > 0.2 * dev.max()
    wgt = dev * peak
    centre = np.array([np.sum(wgt * r), np.sum(wgt * z)]) / wgt.sum()
    assert np.hypot(*(centre - path)) < 2 * g.h


# ---------------------------------------------------------------------------
# momentum predictor


def test_predictor_keeps_rest(small_grid):
    st = rest_state(small_grid)
    for f in momentum_predictor(st, 1e-3):
        assert not f.values.any()


@pytest.mark.parametrize("zbc", ["noslip", "slip"])
def test_compiled_and_array_momentum_agree(small_grid, zbc):
    st = scenario_state("small-swirl", small_grid, swirl=0.7, density=0.9)
    rho = st.rho.values
    rr, rz = face_density(small_grid, rho)
    args = (small_grid, rho, rr, rz, st.ur.values, st.uth.values, st.uz.values)
    for a, b in zip(momentum_rhs(*args, zbc=zbc), _momentum_rhs_fast(*args, zbc=zbc)):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12 * np.abs(a).max())


def test_centrifugal_spin_up_is_outward():
    g = make_grid(4.0, 2.0, 32, 32)
    chi = lambda r: np.exp(-(r / 1.5) ** 8)  # noqa: E731
    st = make_state(sample(g, lambda r, z: 1.0), zeros(g, "rface", "odd"),
                    sample(g, lambda r, z: r * chi(r), "cell", "odd"), zeros(g, "zface"))
    dt = 1e-4
    ur, _, _ = momentum_predictor(st, dt, zbc="slip")
    inner = (g.r_f > 0) & (g.r_f < 1.0)
    assert np.all(ur.values[inner] > 0)
    # hand evaluation of the first step at one face: dt * (u^theta)^2 / r
    i = 8
    expected = dt * (0.5 * ((g.r_c[i - 1] * chi(g.r_c[i - 1])) ** 2
                            + (g.r_c[i] * chi(g.r_c[i])) ** 2)) / g.r_f[i]
    assert ur.values[i, 16] == pytest.approx(expected, rel=1e-2)


# ---------------------------------------------------------------------------
# projection


def test_projection_of_solenoidal_field_is_identity(small_grid):
    st = scenario_state("small-swirl", small_grid)
    ur, uz, pi, rep = project(st.ur, st.uz, st.rho, 1e-3)
    assert np.sqrt(np.sum(pi.values**2 * small_grid.weights())) <= 1e-9
    np.testing.assert_allclose(ur.values, st.ur.values, atol=1e-10)
    np.testing.assert_allclose(uz.values, st.uz.values, atol=1e-10)


def test_projection_removes_gradients_at_second_order():
    phi = lambda r, z: np.exp(-2 * (r * r + z * z))  # noqa: E731
    norms = []
    for n in (32, 64, 128):
        g = make_grid(4.0, 4.0, n, n)
        r, z = g.mesh("rface")
        ur = ScalarField(g, "rface", -4 * r * phi(r, z), "odd")
        r, z = g.mesh("zface")
        uz = ScalarField(g, "zface", -4 * z * phi(r, z), "even")
        pu, pz, _, _ = project(ur, uz, sample(g, lambda r, z: 1.0), 1.0)
        norms.append(np.sqrt(np.sum(pu.values**2 * g.weights("rface"))
                             + np.sum(pz.values**2 * g.weights("zface"))))
    assert norms[-1] < 1e-3
    assert 3.5 < norms[1] / norms[2] < 4.5


def test_projection_is_idempotent_and_solenoidal(small_grid):
    rng = np.random.default_rng(1)
    ur = ScalarField(small_grid, "rface", rng.standard_normal(small_grid.shape("rface")), "odd")
    uz = ScalarField(small_grid, "zface", rng.standard_normal(small_grid.shape("zface")))
    ur.values[[0, -1]] = 0.0
    uz.values[:, [0, -1]] = 0.0
    rho = sample(small_grid, lambda r, z: 1 + 0.5 * np.exp(-r * r - z * z))
    a_r, a_z, _, _ = project(ur, uz, rho, 0.1)
    b_r, b_z, _, _ = project(a_r, a_z, rho, 0.1)
    assert np.abs(cyl_divergence(a_r, a_z).values).max() < 1e-8 * np.abs(ur.values).max() / small_grid.h
    np.testing.assert_allclose(b_r.values, a_r.values, atol=1e-8)
    np.testing.assert_allclose(b_z.values, a_z.values, atol=1e-8)


# ---------------------------------------------------------------------------
# full steps


def test_rest_state_is_a_fixed_point(small_grid):
    new, rep = step(rest_state(small_grid))
    for f in new.velocity():
        assert not f.values.any()
    assert rep.div_linf == 0.0 and np.all(new.rho.values == 1.0)


def test_step_rejects_bad_input(small_grid):
    with pytest.raises(StepRejected):
        step(rest_state(small_grid), dt=-1.0)
    with pytest.raises(DomainError):
        Stepper(small_grid, zbc="periodic")


def test_step_report_fields(small_grid):
    st = scenario_state("small-swirl", small_grid)
    new, rep = step(st)
    assert new.t == pytest.approx(rep.dt)
    assert rep.cfl_visc == pytest.approx(DEFAULT_SAFETY, rel=1e-12) or rep.cfl_visc < DEFAULT_SAFETY
    assert rep.cfl_adv <= 1.0
    assert rep.elliptic.converged
    assert rep.rho_min > 0


def test_energy_decreases_on_random_states():
    rng = np.random.default_rng(11)
    g = make_grid(4.0, 4.0, 24, 48)
    for _ in range(4):
        out = energy_run(scenario_state("small-swirl", g, **random_scenario_params(rng)), 60)
        assert out["step_increase"] <= 1e-10
        assert out["budget"] <= 1.05


def test_dissipation_is_positive_quadratic_form(small_grid):
    st = scenario_state("small-swirl", small_grid)
    d = dissipation(st)
    assert d > 0
    st2 = make_state(st.rho, st.ur * 2.0, st.uth * 2.0, st.uz * 2.0)
    assert dissipation(st2) == pytest.approx(4 * d, rel=1e-12)
    assert kinetic_energy(st2) == pytest.approx(4 * kinetic_energy(st), rel=1e-12)


def _column_run(nr, steps, R=6.0):
    g = make_grid(R, 4 * R / nr, nr, 8)
    st = scenario_state("pure-swirl-column", g)
    stepper = Stepper(g, zbc="slip")
    for _ in range(steps):
        st, _ = stepper.step(st)
    return g, st


def test_pure_swirl_column_matches_radial_oracle():
    from axiswirl.fields import oseen_swirl

    errs = []
    for nr, steps in ((32, 100), (64, 400)):
        g, st = _column_run(nr, steps)
        # z-independence is exact
        assert np.ptp(st.uth.values, axis=1).max() == 0.0
        assert np.abs(st.ur.values).max() < 1e-12 and np.abs(st.uz.values).max() < 1e-12
        rc, u = swirl_column_oracle(g.R, 4096, st.t, oseen_swirl)
        ref = np.interp(g.r_c, rc, u)
        errs.append(rel_l2(st.uth.values[:, 0], ref, g.r_c))
    assert errs[-1] < 1e-3
    assert errs[0] / errs[1] > 3.0
