import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lagflow.errors import SolverDivergence
from lagflow.hodge import (codifferential, codifferential_divergence, differential, exterior_derivative,
                           hodge_decompose, inner_product, laplace_beltrami, laplace_beltrami_divergence,
                           loop_periods)

from conftest import state_for


def smooth_function(x, c):
    return np.exp(c[0] * np.sin(x[..., 0]) + c[1] * np.cos(x[..., -1] + 0.3)) + c[2] * np.sin(2 * x[..., 0])


def test_d_squared_and_constants():
    _, s = state_for("product_torus", 32)
    x = s.grid.coords
    f = np.sin(x[..., 0])
    assert np.abs(exterior_derivative(differential(f, s.grid), s.grid)).max() <= 1e-12
    const = np.broadcast_to([1.5, -2.0], s.grid.shape + (2,))
    assert np.array_equal(exterior_derivative(const, s.grid), np.zeros(s.grid.shape + (2, 2)))
    assert np.abs(exterior_derivative(s.H, s.grid)).max() <= 1e-12
    dt = exterior_derivative(np.stack([np.sin(x[..., 1]), x[..., 0] * 0], -1), s.grid)
    assert np.array_equal(dt, -np.swapaxes(dt, -1, -2))


def test_codifferential_examples():
    _, s = state_for("product_torus", 32)
    const = np.broadcast_to([1.5, -2.0], s.grid.shape + (2,)).copy()
    assert np.abs(codifferential(const, s)).max() <= 1e-12
    _, flat = state_for("flat_plane", 32)
    x = flat.grid.coords
    phi = np.sin(x[..., 0]) * np.cos(2 * x[..., 1])
    np.testing.assert_allclose(codifferential(differential(phi, flat.grid), flat), -5 * phi, atol=1e-11)


@pytest.mark.parametrize("name, size, tol", [("ellipse", 128, 1e-9), ("lagrangian_graph", 64, 1e-8),
                                             ("perturbed_lagrangian", 64, 1e-8), ("circle", 32, 1e-8)])
def test_adjointness(name, size, tol):
    _, s = state_for(name, size)
    x = s.grid.coords
    phi = smooth_function(x, (0.3, 0.5, 0.2))
    theta = np.stack([np.cos(x[..., 0] + x[..., -1]) for _ in range(s.n)], -1) * 0.7
    theta[..., 0] += np.sin(x[..., -1])
    lhs = inner_product(differential(phi, s.grid), theta, s)
    rhs = -inner_product(phi, codifferential(theta, s), s)
    assert abs(lhs - rhs) <= tol


@pytest.mark.parametrize("name, size", [("ellipse", 128), ("lagrangian_graph", 64), ("perturbed_lagrangian", 64)])
def test_two_laplacians_agree(name, size):
    _, s = state_for(name, size)
    phi = smooth_function(s.grid.coords, (0.4, 0.2, 0.1))
    assert np.abs(laplace_beltrami(phi, s) - laplace_beltrami_divergence(phi, s)).max() <= 1e-8
    theta = differential(phi, s.grid) + 0.2
    assert np.abs(codifferential(theta, s) - codifferential_divergence(theta, s)).max() <= 1e-8


def test_laplacian_examples():
    _, flat = state_for("flat_plane", 16)
    x = flat.grid.coords
    assert np.abs(laplace_beltrami(np.full(flat.grid.shape, 2.0), flat)).max() <= 1e-13
    np.testing.assert_allclose(laplace_beltrami(np.sin(x[..., 0]), flat), -np.sin(x[..., 0]), atol=1e-12)
    _, c = state_for("circle", 32, r=2.0)
    xc = c.grid.coords[..., 0]
    np.testing.assert_allclose(laplace_beltrami(np.sin(xc), c), -np.sin(xc) / 4, atol=1e-12)


def test_exact_input_recovers_potential():
    _, s = state_for("lagrangian_graph", 32)
    phi0 = smooth_function(s.grid.coords, (0.5, 0.3, 0.2))
    split = hodge_decompose(differential(phi0, s.grid), s, basepoint=(3, 5))
    assert np.abs(split.psi).max() <= 1e-9
    np.testing.assert_allclose(split.phi, phi0 - phi0[3, 5], atol=1e-9)
    assert split.phi[3, 5] == 0.0 and split.basepoint == (3, 5)
    assert split.relative_residual <= 1e-10


def test_constant_form_is_harmonic():
    _, flat = state_for("flat_plane", 16)
    theta = np.broadcast_to([0.7, -1.1], flat.grid.shape + (2,)).copy()
    split = hodge_decompose(theta, flat)
    assert np.abs(split.phi).max() <= 1e-12
    np.testing.assert_allclose(split.psi, theta, atol=1e-12)


def test_graph_H_is_exact_and_matches_angle():
    sc, s = state_for("lagrangian_graph", 64)
    split = hodge_decompose(s.H, s)
    assert np.abs(split.psi).max() <= 1e-7
    # the Lagrangian angle is an independent potential: H = -d(angle)
    angle = sc.references["lagrangian_angle"](s.grid.coords)
    np.testing.assert_allclose(split.phi, -(angle - angle[0, 0]), atol=1e-9)


def test_split_properties_and_idempotence():
    _, s = state_for("perturbed_lagrangian", 32)
    x = s.grid.coords
    theta = np.stack([np.sin(x[..., 1]) + 0.4, np.cos(x[..., 0] - x[..., 1])], -1)
    split = hodge_decompose(theta, s)
    assert np.abs(codifferential_divergence(split.psi, s)).max() <= 1e-9
    np.testing.assert_allclose(split.psi + differential(split.phi, s.grid), theta, atol=1e-13)
    again = hodge_decompose(split.psi, s)
    assert np.abs(again.phi).max() <= 1e-9


def test_iteration_cap_raises():
    _, s = state_for("lagrangian_graph", 32)
    with pytest.raises(SolverDivergence):
        hodge_decompose(s.H, s, maxiter=1)


def test_loop_period_examples():
    _, flat = state_for("flat_plane", 16)
    x = flat.grid.coords
    exact = differential(np.sin(x[..., 0] + x[..., 1]), flat.grid)
    assert np.abs(loop_periods(exact, flat.grid)).max() <= 1e-12
    const = np.broadcast_to([0.5, 0.0], flat.grid.shape + (2,))
    np.testing.assert_allclose(loop_periods(const, flat.grid), [np.pi, 0.0], atol=1e-14)
    _, torus = state_for("product_torus", 16)
    np.testing.assert_allclose(loop_periods(torus.H, torus.grid), [-2 * np.pi, -2 * np.pi], atol=1e-12)


def test_periods_independent_of_transverse_loop(graph_state):
    _, s = graph_state
    base = loop_periods(s.H, s.grid)
    for transverse in [(5, 9), (20, 40), (63, 1)]:
        assert np.abs(loop_periods(s.H, s.grid, transverse) - base).max() <= 1e-9


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=3, max_size=3))
def test_periods_of_differentials_vanish(c):
    _, s = state_for("flat_plane", 16)
    phi = smooth_function(s.grid.coords, c)
    assert np.abs(loop_periods(differential(phi, s.grid), s.grid)).max() <= 1e-10
