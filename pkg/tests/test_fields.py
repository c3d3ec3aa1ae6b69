import struct

import numpy as np
import pytest

from axiswirl.analysis import a_over_r
from axiswirl.errors import ConfigurationError, DataError
from axiswirl.fields import (ScalarField, apply_axis_parity, builtin_scenarios, from_stream_function,
                             make_state, oseen_swirl, read_checkpoint, rest_state, sample,
                             scenario_state, write_checkpoint, zeros)
from axiswirl.grid import lp_norm, make_grid
from axiswirl.ops import cyl_divergence, rface_to_cell, zface_to_cell


@pytest.mark.parametrize("parity,sign", [("odd", -1.0), ("even", 1.0)])
def test_cell_ghost_follows_parity(small_grid, parity, sign):
    f = sample(small_grid, lambda r, z: 1.0 + r + z, "cell", parity)
    out = apply_axis_parity(f)
    np.testing.assert_array_equal(out.ghost, sign * f.values[0])
    np.testing.assert_array_equal(out.values, f.values)


def test_odd_rface_field_vanishes_on_axis(small_grid):
    f = ScalarField(small_grid, "rface", np.ones(small_grid.shape("rface")), "odd")
    out = apply_axis_parity(f)
    assert np.all(out.values[0] == 0.0)
    assert np.all(out.values[1:] == 1.0)


def test_field_shape_and_tags_are_validated(small_grid):
    with pytest.raises(ValueError):
        ScalarField(small_grid, "cell", np.zeros((3, 3)))
    with pytest.raises(ValueError):
        ScalarField(small_grid, "edge", np.zeros(small_grid.shape("cell")))
    with pytest.raises(ValueError):
        ScalarField(small_grid, "cell", np.zeros(small_grid.shape("cell")), "neither")


def test_zero_stream_function_gives_rest(small_grid):
    ur, uth, uz = from_stream_function(zeros(small_grid, "node", "odd"))
    for f in (ur, uth, uz):
        assert not f.values.any()


def _psi(r, z):
    return r * np.exp(-r * r - z * z)


def test_stream_function_velocity_matches_derivatives():
    errs = []
    for n in (32, 64):
        g = make_grid(4.0, 4.0, n, 2 * n)
        ur, _, uz = from_stream_function(sample(g, _psi, "node", "odd"))
        r, z = g.mesh("rface")
        e_r = np.abs(ur.values - 2 * z * r * np.exp(-r * r - z * z)).max()
        r, z = g.mesh("zface")
        e_z = np.abs(uz.values - (2 - 2 * r * r) * np.exp(-r * r - z * z)).max()
        errs.append(max(e_r, e_z))
    assert errs[1] < 5e-3
    assert errs[0] / errs[1] > 3.5


def test_stream_function_velocity_is_discretely_solenoidal():
    rng = np.random.default_rng(3)
    g = make_grid(2.0, 1.0, 24, 20)
    psi = np.zeros(g.shape("node"))
    psi[1:-1, 1:-1] = rng.standard_normal((g.nr - 1, g.nz - 1))
    ur, uth, uz = from_stream_function(ScalarField(g, "node", psi, "odd"))
    assert np.abs(cyl_divergence(ur, uz).values).max() <= 1e-12 * max(1, np.abs(psi).max() / g.h)
    again = [apply_axis_parity(f) for f in (ur, uth, uz)]
    for a, b in zip((ur, uth, uz), again):
        np.testing.assert_array_equal(a.values, b.values)


def test_no_swirl_and_homogeneous_scenarios(small_grid):
    _, (_, uth, _) = builtin_scenarios("no-swirl", small_grid)
    assert lp_norm(uth, 3) == 0.0
    rho, _ = builtin_scenarios("homogeneous", small_grid)
    assert np.all(rho.values == 1.0)
    assert np.abs(a_over_r(rho)).max() == 0.0


def test_pure_swirl_column_is_oseen(small_grid):
    rho, (ur, uth, uz) = builtin_scenarios("pure-swirl-column", small_grid)
    r = small_grid.r_c
    # independent evaluation of the Lamb-Oseen profile for nu = 1
    expected = (1.0 - np.exp(-r * r / 4.0)) / (2.0 * np.pi * r)
    np.testing.assert_allclose(uth.values, np.repeat(expected[:, None], small_grid.nz, 1), rtol=1e-13)
    assert not ur.values.any() and not uz.values.any()
    assert oseen_swirl(np.array([1e-12]))[0] == pytest.approx(1e-12 / (8 * np.pi), rel=1e-6)


@pytest.mark.parametrize("name", ["no-swirl", "small-swirl", "homogeneous", "pure-swirl-column", "rest"])
def test_generated_states_satisfy_invariants(small_grid, name):
    st = scenario_state(name, small_grid)
    st.check(div_tol=1e-10)
    rho = st.rho.values
    assert rho.min() > 0
    # rho = 1 on the axis: a/r stays bounded at the first cell
    assert np.abs(a_over_r(st.rho)).max() < 10


@pytest.mark.parametrize("profile", ["gaussian", "dipole", "quadrupole"])
def test_swirl_profiles(small_grid, profile):
    st = scenario_state("small-swirl", small_grid, swirl_profile=profile)
    w = small_grid.weights("cell")
    moment = np.sum(small_grid.r_c[:, None] * st.uth.values * w)
    if profile == "gaussian":
        assert moment > 0
    else:
        assert abs(moment) < 1e-5 * np.sum(np.abs(small_grid.r_c[:, None] * st.uth.values) * w)


@pytest.mark.parametrize("kwargs", [{"name": "vortex-ring"}, {"name": "small-swirl", "width": 0},
                                    {"name": "small-swirl", "poloidal": "potential"},
                                    {"name": "small-swirl", "swirl_profile": "octupole"},
                                    {"name": "small-swirl", "density": -3.0}])
def test_bad_scenarios_raise(small_grid, kwargs):
    name = kwargs.pop("name")
    with pytest.raises(ConfigurationError):
        builtin_scenarios(name, small_grid, **kwargs)


def test_state_check_flags_violations(small_grid):
    st = rest_state(small_grid)
    st.rho.values[3, 3] = -1.0
    with pytest.raises(DataError):
        st.check()
    st = rest_state(small_grid)
    st.ur.values[0, 0] = 1.0
    with pytest.raises(DataError):
        st.check()


def test_checkpoint_round_trip_is_bit_exact(tmp_path, small_grid):
    st = scenario_state("small-swirl", small_grid)
    st.pi.values[:] = np.random.default_rng(0).standard_normal(small_grid.shape())
    st.t = 1.25
    p = tmp_path / "state.bin"
    write_checkpoint(p, st)
    back = read_checkpoint(p)
    assert back.t == st.t and back.grid == st.grid
    for a, b in zip((st.rho, st.ur, st.uth, st.uz, st.pi), (back.rho, back.ur, back.uth, back.uz, back.pi)):
        np.testing.assert_array_equal(a.values, b.values)


def test_checkpoint_layout(tmp_path):
    g = make_grid(1.0, 2.0, 4, 6)
    st = rest_state(g)
    p = tmp_path / "s.bin"
    write_checkpoint(p, st)
    data = p.read_bytes()
    magic, nr, nz, R, Z, t = struct.unpack_from("<4sqqddd", data)
    assert (magic, nr, nz, R, Z, t) == (b"AXI1", 4, 6, 1.0, 2.0, 0.0)
    n = 4 * 6 + 5 * 6 + 4 * 6 + 4 * 7 + 4 * 6
    assert len(data) == struct.calcsize("<4sqqddd") + 8 * n
    rho = np.frombuffer(data, "<f8", 24, struct.calcsize("<4sqqddd"))
    assert np.all(rho == 1.0)


@pytest.mark.parametrize("mutate", [lambda d: b"XXXX" + d[4:], lambda d: d[:20], lambda d: d[:-8],
                                    lambda d: d + b"\0" * 8])
def test_corrupt_checkpoints_raise(tmp_path, mutate):
    p = tmp_path / "s.bin"
    write_checkpoint(p, rest_state(make_grid(1.0, 1.0, 4, 4)))
    p.write_bytes(mutate(p.read_bytes()))
    with pytest.raises(DataError):
        read_checkpoint(p)


def test_make_state_enforces_wall_conditions(small_grid):
    ur = sample(small_grid, lambda r, z: 1.0, "rface", "odd")
    uz = sample(small_grid, lambda r, z: 1.0, "zface", "even")
    st = make_state(sample(small_grid, lambda r, z: 1.0), ur, zeros(small_grid, "cell", "odd"), uz)
    assert not st.ur.values[0].any() and not st.ur.values[-1].any()
    assert not st.uz.values[:, 0].any() and not st.uz.values[:, -1].any()
    assert np.all(rface_to_cell(st.ur.values)[1:-1] == 1.0)
    assert np.all(zface_to_cell(st.uz.values)[:, 1:-1] == 1.0)
