import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stokeselast import mac
from stokeselast.fields import (CENTER, NODE, XFACE, YFACE, Grid2, GridError, ScalarField,
                                VectorField2, boundary_ring, cell_gradient, divergence,
                                l2_inner, l2_norm, scalar_curl, sobolev_norm, stream_velocity,
                                sym_gradient)


def vec(g, f):
    return VectorField2.from_function(g, f)


@pytest.mark.parametrize("n", [4, 7, 16])
def test_sym_gradient_exact_on_compression(n):
    e = sym_gradient(vec(Grid2.unit_square(n), lambda X, Y: (X, -Y)))
    assert np.all(e.txx.values == pytest.approx(1.0, abs=1e-13))
    assert np.all(e.tyy.values == pytest.approx(-1.0, abs=1e-13))
    assert np.max(np.abs(e.txy.values)) < 1e-13


def test_sym_gradient_linear_shear():
    e = sym_gradient(vec(Grid2.rectangle(6, 9, 2.0, 1.5), lambda X, Y: (Y, 0 * X)))
    assert np.max(np.abs(e.txx.values)) < 1e-13
    assert np.max(np.abs(e.tyy.values)) < 1e-13
    np.testing.assert_allclose(e.txy.values, 0.5, atol=1e-13)


def test_sym_gradient_second_order():
    errs = []
    for n in (16, 32, 64):
        g = Grid2.unit_square(n)
        u = vec(g, lambda X, Y: (np.sin(np.pi * X) * np.cos(np.pi * Y),
                                 -np.cos(np.pi * X) * np.sin(np.pi * Y)))
        X, Y = g.coords(CENTER)
        exact = np.pi * np.cos(np.pi * X) * np.cos(np.pi * Y)
        errs.append(np.max(np.abs(sym_gradient(u).txx.values - exact)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9)


def test_grid_too_small():
    with pytest.raises(GridError):
        Grid2.unit_square(3)


def test_divergence_exact_on_linear_fields():
    g = Grid2.unit_square(8)
    assert np.max(np.abs(divergence(vec(g, lambda X, Y: (X, -Y))).values)) < 1e-13
    np.testing.assert_allclose(divergence(vec(g, lambda X, Y: (X, Y))).values, 2.0, atol=1e-13)


def test_stream_function_velocity_is_discretely_solenoidal():
    g = Grid2.unit_square(24)
    psi = ScalarField.from_function(
        g, lambda X, Y: np.sin(np.pi * X) ** 2 * np.sin(np.pi * Y) ** 2, NODE)
    u = stream_velocity(psi)
    assert np.max(np.abs(divergence(u).values)) < 1e-12


def test_curl_of_gradient_vanishes():
    g = Grid2.unit_square(10)
    phi = ScalarField.from_function(g, lambda X, Y: X ** 2 + 3 * Y, CENTER)
    # interior nodes only; boundary faces of a cell gradient are not defined
    assert np.max(np.abs(scalar_curl(cell_gradient(phi)).values[1:-1, 1:-1])) < 1e-12


def test_curl_of_rotation_is_two():
    c = scalar_curl(vec(Grid2.unit_square(8), lambda X, Y: (-Y, X)))
    np.testing.assert_allclose(c.values, 2.0, atol=1e-12)


def test_curl_of_poiseuille_profile():
    g = Grid2.unit_square(8)
    c = scalar_curl(vec(g, lambda X, Y: (Y * (1 - Y), 0 * X)))
    X, Y = g.coords(NODE)
    np.testing.assert_allclose(c.values[1:-1, 1:-1], (2 * Y - 1)[1:-1, 1:-1], atol=1e-12)


@pytest.mark.parametrize("order", range(6))
def test_sobolev_norm_of_constant(order):
    g = Grid2.rectangle(8, 8, 2.0, 0.5)
    f = ScalarField.constant(g, -3.0)
    assert sobolev_norm(f, order) == pytest.approx(3.0 * np.sqrt(g.area), rel=1e-12)


def test_sobolev_norm_sine_values():
    g = Grid2.unit_square(256)
    f = ScalarField.from_function(g, lambda X, Y: np.sin(2 * np.pi * X) * np.sin(2 * np.pi * Y))
    assert l2_norm(f) == pytest.approx(0.5, rel=1e-3)
    assert sobolev_norm(f, 1, "seminorm") == pytest.approx(np.sqrt(2) * np.pi, rel=1e-3)


def test_sobolev_norm_order4_converges():
    # |grad^k f|^2 integrates to (8 pi^2)^k / 4 for this f, summed over k = 0..4
    exact = np.sqrt(sum((8 * np.pi ** 2) ** k / 4 for k in range(5)))
    g = Grid2.unit_square(256)
    f = ScalarField.from_function(g, lambda X, Y: np.sin(2 * np.pi * X) * np.sin(2 * np.pi * Y))
    assert abs(sobolev_norm(f, 4) / exact - 1) < 0.01


def test_sobolev_order_out_of_range():
    f = ScalarField.constant(Grid2.unit_square(4), 1.0)
    with pytest.raises(ValueError):
        sobolev_norm(f, 6)
    with pytest.raises(ValueError):
        sobolev_norm(f, 2, "weird")


def test_boundary_ring_counts():
    g = Grid2.unit_square(8)
    assert boundary_ring(g, 1).sum() == 64 - 36
    assert boundary_ring(g, 2).sum() == 64 - 16


def test_inner_product_rejects_mixed_layouts():
    g = Grid2.unit_square(4)
    with pytest.raises(GridError):
        l2_inner(ScalarField.zeros(g, CENTER), ScalarField.zeros(g, NODE))


arrays = st.integers(0, 2 ** 32 - 1)


@settings(max_examples=25, deadline=None)
@given(seed=arrays, a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_operators_are_linear(seed, a, b):
    g = Grid2.rectangle(6, 5, 1.2, 0.8)
    rng = np.random.default_rng(seed)
    f1 = VectorField2(ScalarField(g, XFACE, rng.standard_normal(g.shape(XFACE))),
                      ScalarField(g, YFACE, rng.standard_normal(g.shape(YFACE))))
    f2 = VectorField2(ScalarField(g, XFACE, rng.standard_normal(g.shape(XFACE))),
                      ScalarField(g, YFACE, rng.standard_normal(g.shape(YFACE))))
    mix = f1 * a + f2 * b
    for op in (divergence, scalar_curl):
        lhs = op(mix).values
        rhs = a * op(f1).values + b * op(f2).values
        np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + np.max(np.abs(rhs))))
    e, e1, e2 = sym_gradient(mix), sym_gradient(f1), sym_gradient(f2)
    np.testing.assert_allclose(e.txy.values, a * e1.txy.values + b * e2.txy.values,
                               atol=1e-10 * (1 + np.max(np.abs(e.txy.values))))


@settings(max_examples=25, deadline=None)
@given(seed=arrays)
def test_curl_annihilates_every_discrete_gradient(seed):
    g = Grid2.unit_square(7)
    phi = ScalarField(g, CENTER, np.random.default_rng(seed).standard_normal(g.shape(CENTER)))
    assert np.max(np.abs(scalar_curl(cell_gradient(phi)).values[1:-1, 1:-1])) < 1e-10


@settings(max_examples=20, deadline=None)
@given(seed=arrays)
def test_sobolev_norm_monotone_in_order(seed):
    g = Grid2.unit_square(8)
    f = ScalarField(g, CENTER, np.random.default_rng(seed).standard_normal(g.shape(CENTER)))
    norms = [sobolev_norm(f, k) for k in range(6)]
    assert norms[0] == l2_norm(f)
    assert all(b >= a for a, b in zip(norms, norms[1:]))
