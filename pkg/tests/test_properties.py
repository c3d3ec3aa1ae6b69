"""Randomised properties of norms, parity handling, the discrete curl and the fitter."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from axiswirl.analysis import decay_fit, japanese_bracket
from axiswirl.fields import ScalarField, apply_axis_parity, from_stream_function
from axiswirl.grid import lp_norm, make_grid
from axiswirl.ops import cyl_divergence

GRID = make_grid(2.0, 1.0, 8, 6)
finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
exponents = st.sampled_from([1.0, 1.5, 2.0, 3.0, 4.0, np.inf])


def cell_field(values):
    return ScalarField(GRID, "cell", values)


cells = arrays(np.float64, GRID.shape("cell"), elements=finite)


@given(cells, st.floats(-50, 50, allow_nan=False), exponents)
def test_norm_is_absolutely_homogeneous(v, c, p):
    a = lp_norm(cell_field(v * c), p)
    b = abs(c) * lp_norm(cell_field(v), p)
    assert np.isclose(a, b, rtol=1e-12, atol=1e-300)


@given(cells, cells, exponents)
def test_norm_triangle_inequality(u, v, p):
    lhs = lp_norm(cell_field(u + v), p)
    rhs = lp_norm(cell_field(u), p) + lp_norm(cell_field(v), p)
    assert lhs <= rhs * (1 + 1e-12) + 1e-12


@given(st.sampled_from(["cell", "rface", "zface", "node"]), st.sampled_from(["even", "odd"]),
       st.data())
def test_parity_ghosts(loc, parity, data):
    v = data.draw(arrays(np.float64, GRID.shape(loc), elements=finite))
    f = apply_axis_parity(ScalarField(GRID, loc, v, parity))
    sign = 1.0 if parity == "even" else -1.0
    if loc in ("cell", "zface"):
        np.testing.assert_array_equal(f.ghost, sign * v[0])
        np.testing.assert_array_equal(f.values, v)
    else:
        if parity == "odd":
            assert not f.values[0].any()
        np.testing.assert_array_equal(f.ghost, sign * f.values[1])
    # applying twice changes nothing
    g = apply_axis_parity(f)
    np.testing.assert_array_equal(g.values, f.values)
    np.testing.assert_array_equal(g.ghost, f.ghost)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, GRID.shape("node"), elements=st.floats(-1, 1)))
def test_stream_function_velocity_is_solenoidal(psi):
    ur, _, uz = from_stream_function(ScalarField(GRID, "node", psi, "odd"))
    div = cyl_divergence(ur, uz).values
    scale = max(1.0, np.abs(psi).max()) / GRID.h**2
    assert np.abs(div).max() <= 1e-12 * scale


@given(st.floats(0.0, 4.0), st.floats(1e-3, 1e3), st.floats(1e-6, 1e6))
def test_fit_recovers_any_exponent_and_is_scale_covariant(alpha, amp, c):
    t = np.linspace(0.0, 40.0, 81)
    y = amp * japanese_bracket(t) ** -alpha
    fit = decay_fit(t, y, window=(0.0, 40.0))
    assert abs(fit.alpha - alpha) < 1e-9
    assert abs(decay_fit(t, c * y, window=(0.0, 40.0)).alpha - fit.alpha) < 1e-9
