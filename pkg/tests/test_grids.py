import numpy as np
import pytest

from qclab.grids import (
    PhaseSpaceGrid,
    gradient,
    integrate,
    integrate_2d,
    laplacian,
    make_grid,
)


def test_make_grid_unit_spacing():
    g = make_grid(8, 0.0, 8.0)
    assert g.dx == 1.0
    assert np.array_equal(g.x, np.arange(8.0))


def test_make_grid_desk_scale():
    g = make_grid(1024, -20.0, 20.0)
    assert g.dx == pytest.approx(40.0 / 1024)
    assert g.x[0] == -20.0
    assert g.x[-1] == pytest.approx(20.0 - g.dx)


@pytest.mark.parametrize("n", [7, 6, 4, 0])
def test_make_grid_rejects_bad_sizes(n):
    with pytest.raises(ValueError):
        make_grid(n, 0.0, 1.0)


def test_make_grid_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        make_grid(8, 1.0, 0.0)


def test_gradient_of_constant_is_zero():
    g = make_grid(64, 0.0, 1.0)
    assert np.allclose(gradient(np.full(64, 3.7), g), 0.0, atol=1e-13)


def test_gradient_sin():
    g = make_grid(256, 0.0, 5.0)
    k = 2 * np.pi / 5.0
    err = np.max(np.abs(gradient(np.sin(k * g.x), g) - k * np.cos(k * g.x)))
    assert err <= 1e-10


def test_gradient_fourier_eigenfunction():
    g = make_grid(128, -4.0, 4.0)
    k = 2 * np.pi * 5 / g.length
    f = np.exp(1j * k * g.x)
    assert np.max(np.abs(gradient(f, g) - 1j * k * f)) <= 1e-11


def test_laplacian_constant_and_sin():
    g = make_grid(256, 0.0, 2 * np.pi)
    assert np.allclose(laplacian(np.ones(256), g), 0.0, atol=1e-13)
    k = 3.0
    f = np.sin(k * g.x)
    assert np.max(np.abs(laplacian(f, g) + k ** 2 * f)) <= 1e-9


def test_laplacian_gaussian_analytic():
    g = make_grid(1024, -20.0, 20.0)
    f = np.exp(-g.x ** 2 / 2)
    exact = (g.x ** 2 - 1) * f
    assert np.max(np.abs(laplacian(f, g) - exact)) <= 1e-8


def test_integrate_constant_and_symmetry():
    g = make_grid(64, 0.0, 1.0)
    assert integrate(np.ones(64), g) == pytest.approx(1.0, abs=1e-14)
    g2 = make_grid(128, 0.0, 3.0)
    assert abs(integrate(np.sin(2 * np.pi * g2.x / 3.0), g2)) <= 1e-12


def test_integrate_normalized_gaussian():
    g = make_grid(1024, -20.0, 20.0)
    rho = np.exp(-g.x ** 2 / 2) / np.sqrt(2 * np.pi)
    assert integrate(rho, g) == pytest.approx(1.0, abs=1e-12)


def test_gradient_twice_matches_laplacian_on_bandlimited_field():
    g = make_grid(256, 0.0, 2 * np.pi)
    f = np.sin(3 * g.x) + 0.5 * np.cos(7 * g.x)
    err = np.max(np.abs(gradient(gradient(f, g), g) - laplacian(f, g)))
    assert err <= 1e-9


def test_integral_of_gradient_vanishes():
    g = make_grid(512, -10.0, 10.0)
    f = np.exp(-g.x ** 2) + np.sin(2 * np.pi * g.x / g.length)
    assert abs(integrate(gradient(f, g), g)) <= 1e-10


def test_spectral_operators_are_linear():
    g = make_grid(128, -5.0, 5.0)
    rng = np.random.default_rng(7)
    f = rng.standard_normal(128)
    h = rng.standard_normal(128)
    a, b = 2.5, -1.25
    for op in (gradient, laplacian):
        lhs = op(a * f + b * h, g)
        rhs = a * op(f, g) + b * op(h, g)
        assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0, np.max(np.abs(rhs)))


def test_field_shape_mismatch():
    g = make_grid(64, 0.0, 1.0)
    with pytest.raises(ValueError):
        gradient(np.zeros(32), g)
    with pytest.raises(ValueError):
        integrate(np.zeros(128), g)


def test_phase_space_grid_geometry():
    g = make_grid(64, -4.0, 4.0)
    g2 = PhaseSpaceGrid(x_axis=g, n_p=32, p_min=-2.0, p_max=2.0)
    assert g2.dp == pytest.approx(0.125)
    assert g2.cell_area > 0
    assert g2.shape == (64, 32)
    assert integrate_2d(np.ones(g2.shape), g2) == pytest.approx(8.0 * 4.0)


def test_phase_space_grid_rejects_degenerate_axes():
    g = make_grid(64, -4.0, 4.0)
    with pytest.raises(ValueError):
        PhaseSpaceGrid(x_axis=g, n_p=4, p_min=-2.0, p_max=2.0)
    with pytest.raises(ValueError):
        PhaseSpaceGrid(x_axis=g, n_p=32, p_min=2.0, p_max=-2.0)
