import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lagflow.errors import DegenerateImmersion, NIsomorphismFailure
from lagflow.geometry import (GeometryState, build_frame, christoffels, covariant_derivative, eta_tensor,
                              mcf_velocity, norms, pullback_metric, sym_inverse, sym_min_eig)
from lagflow.grid import ImmersionField, ParamGrid
from lagflow.scenarios import make_scenario

from conftest import state_for


def test_flat_plane():
    sc, st_ = state_for("flat_plane", 16)
    e = st_.e
    np.testing.assert_allclose(e[..., 0, :], np.broadcast_to([1, 0, 0, 0], e.shape[:-2] + (4,)), atol=1e-14)
    assert np.abs(st_.eDD).max() <= 1e-13
    np.testing.assert_allclose(st_.g, np.broadcast_to(np.eye(2), st_.g.shape), atol=1e-14)
    np.testing.assert_allclose(st_.nu[..., 1, :], np.broadcast_to([0, 0, 0, 1], e.shape[:-2] + (4,)), atol=1e-14)
    assert np.abs(st_.h).max() <= 1e-13 and np.abs(st_.H).max() <= 1e-13
    assert np.abs(mcf_velocity(st_)).max() <= 1e-13


def test_circle_closed_forms():
    sc, s = state_for("circle", 64)
    x = s.grid.coords[..., 0]
    np.testing.assert_allclose(s.e[:, 0], np.stack([-np.sin(x), np.cos(x)], -1), atol=1e-13)
    np.testing.assert_allclose(s.eDD[:, 0, 0], np.stack([-np.cos(x), -np.sin(x)], -1), atol=1e-12)
    np.testing.assert_allclose(s.nu[:, 0], np.stack([-np.cos(x), -np.sin(x)], -1), atol=1e-13)
    np.testing.assert_allclose(s.h[..., 0, 0, 0], -1.0, atol=1e-12)
    np.testing.assert_allclose(s.H[..., 0], -1.0, atol=1e-12)
    np.testing.assert_allclose(s.H_sq, 1.0, atol=1e-12)
    assert np.abs(s.Gamma).max() <= 1e-12
    assert np.abs(s.D_h).max() <= 1e-11
    assert s.omega_max == 0.0
    assert np.abs(s.R).max() == 0.0
    v = mcf_velocity(s)
    np.testing.assert_allclose(v, -np.stack([np.cos(x), np.sin(x)], -1), atol=1e-12)


@pytest.mark.parametrize("r", [0.5, 2.0])
def test_circle_radius_scaling(r):
    _, s = state_for("circle", 32, r=r)
    np.testing.assert_allclose(s.g[..., 0, 0], r * r, rtol=1e-13)
    np.testing.assert_allclose(s.h[..., 0, 0, 0], -r * r, rtol=1e-12)
    np.testing.assert_allclose(s.H[..., 0], -1.0, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(mcf_velocity(s), axis=-1), 1 / r, rtol=1e-12)
    assert s.area == pytest.approx(2 * np.pi * r, rel=1e-13)


def test_torus_closed_forms(torus_state):
    _, s = torus_state
    np.testing.assert_allclose(s.g, np.broadcast_to(np.diag([1.0, 9.0]), s.g.shape), atol=1e-12)
    assert np.abs(s.omega).max() <= 1e-14
    h = s.h
    np.testing.assert_allclose(h[..., 0, 0, 0], -1.0, atol=1e-12)
    np.testing.assert_allclose(h[..., 1, 1, 1], -9.0, atol=1e-11)
    mixed = h.copy()
    mixed[..., 0, 0, 0] = mixed[..., 1, 1, 1] = 0.0
    assert np.abs(mixed).max() <= 1e-12
    np.testing.assert_allclose(s.H, -1.0, atol=1e-12)
    assert np.abs(s.Gamma).max() <= 1e-11
    assert np.abs(s.R).max() <= 1e-10


def test_clifford_unit():
    _, s = state_for("product_torus", 32)
    assert np.abs(np.einsum("...a,...a->...", s.e[..., 0, :], s.e[..., 1, :])).max() <= 1e-14
    np.testing.assert_allclose((mcf_velocity(s) ** 2).sum(-1), 2.0, atol=1e-12)


def test_affine_sheet():
    _, s = state_for("affine_sheet", 16)
    np.testing.assert_allclose(s.g, np.broadcast_to([[1, 0], [0, 2]], s.g.shape), atol=1e-14)
    np.testing.assert_allclose(s.omega[..., 0, 1], 1.0, atol=1e-14)
    np.testing.assert_allclose(s.eta, np.broadcast_to(np.diag([0.5, 1.0]), s.g.shape), atol=1e-14)
    # nu_1 = dy1/2 - dx2/2 in (x1, x2, y1, y2)
    np.testing.assert_allclose(s.nu[..., 0, :], np.broadcast_to([0, -0.5, 0.5, 0], s.e.shape[:-2] + (4,)),
                               atol=1e-14)
    np.testing.assert_allclose(norms(s)["omega_sq"], 1.0, atol=1e-14)
    # eta_11 = 1/2 sits below g_11 = 1: the correction is not a positive shift
    assert s.eta[0, 0, 0, 0] < s.g[0, 0, 0, 0]


def test_ellipse_gamma():
    sc, s = state_for("ellipse", 64, a=1.0, b=2.0)
    x = s.grid.coords
    np.testing.assert_allclose(s.g, sc.references["g"](x), atol=1e-12)
    np.testing.assert_allclose(s.Gamma, sc.references["Gamma"](x), atol=1e-11)
    g11 = np.sin(x[..., 0]) ** 2 + 4 * np.cos(x[..., 0]) ** 2
    dg11 = -3 * np.sin(2 * x[..., 0])
    np.testing.assert_allclose(s.Gamma[..., 0, 0, 0], dg11 / (2 * g11), atol=1e-11)


def test_metric_compatibility_on_ellipse():
    _, s = state_for("ellipse", 128)
    assert np.abs(s.nabla(s.g, "dd")).max() <= 1e-9


def test_leibniz(rng, graph_state):
    _, s = graph_state
    x = s.grid.coords
    f = np.exp(0.3 * np.sin(x[..., 0] + 2 * x[..., 1]))
    lhs = s.nabla(f[..., None, None] * s.g, "dd")
    rhs = s.grid.gradient(f)[..., None, None, :] * s.g[..., None]
    assert np.abs(lhs - rhs).max() <= 1e-10


def test_riemann_symmetries_and_gauss(graph_state):
    _, s = graph_state
    R = s.R
    assert np.abs(R + np.swapaxes(R, -4, -3)).max() <= 1e-10
    assert np.abs(R + np.swapaxes(R, -2, -1)).max() <= 1e-10
    pair = np.moveaxis(R, (-4, -3, -2, -1), (-2, -1, -4, -3))
    assert np.abs(R - pair).max() <= 1e-10
    bianchi = R + np.einsum("...ijkl->...iklj", R) + np.einsum("...ijkl->...iljk", R)
    assert np.abs(bianchi).max() <= 1e-10
    h, gi = s.h, s.gInv
    gauss = np.einsum("...mn,...m,...n->...", gi, h[..., 0, 0], h[..., 1, 1]) - \
        np.einsum("...mn,...m,...n->...", gi, h[..., 0, 1], h[..., 1, 0])
    assert np.abs(R[..., 0, 1, 0, 1] - gauss).max() <= 1e-6


@pytest.mark.parametrize("name", ["ellipse", "product_torus", "lagrangian_graph", "affine_sheet",
                                  "perturbed_lagrangian", "circle", "flat_plane"])
def test_structural_invariants(name):
    _, s = state_for(name, 64)
    assert np.array_equal(s.h, np.swapaxes(s.h, -1, -2))
    nu_e = np.einsum("...ia,...ja->...ij", s.nu, s.e)
    assert np.abs(nu_e).max() <= 1e-10
    nu_nu = np.einsum("...ia,...ja->...ij", s.nu, s.nu)
    assert np.abs(nu_nu - s.eta).max() <= 1e-10
    assert np.all(s.sqrtDetG > 0)
    np.testing.assert_allclose(np.einsum("...ij,...jk->...ik", s.gInv, s.g),
                               np.broadcast_to(np.eye(s.n), s.g.shape), atol=1e-12)
    if s.is_lagrangian:
        assert np.abs(s.h - np.swapaxes(s.h, -3, -2)).max() <= 1e-8
        assert np.abs(s.eta - s.g).max() <= 1e-12


def test_general_h_symmetry_defect():
    _, s = state_for("perturbed_lagrangian", 64)
    # h_kij - h_ikj - nabla_j w_ik
    defect = s.h - np.swapaxes(s.h, -3, -2) - np.einsum("...ikj->...kij", s.D_omega)
    assert np.abs(defect).max() <= 1e-7
    assert s.omega_max > 1e-3


def test_gauss_weingarten():
    for name in ("ellipse", "lagrangian_graph", "perturbed_lagrangian"):
        _, s = state_for(name, 64)
        rec = np.einsum("...kij,...ka->...ija", s.Gamma, s.e) - \
            np.einsum("...mn,...mij,...na->...ija", s.etaInv, s.h, s.nu)
        assert np.abs(s.eDD - rec).max() <= 1e-8


def test_fast_path_agrees(graph_state):
    sc, slow = graph_state
    fast = GeometryState(slow.F, lagrangian_fast_path=True)
    assert fast.fast_path and not slow.fast_path
    for key in ("eta", "etaInv", "nu", "h", "H"):
        assert np.abs(getattr(fast, key) - getattr(slow, key)).max() <= 1e-9


def test_fast_path_refused_off_lagrangian():
    sc = make_scenario("affine_sheet")
    s = GeometryState(sc.sample(ParamGrid.uniform(2, 8)), lagrangian_fast_path=True)
    assert not s.fast_path


def test_wrong_raising_convention_detected():
    _, s = state_for("perturbed_lagrangian", 32)
    bad = GeometryState(s.F, omega_sign=-1)
    nu_nu = np.einsum("...ia,...ja->...ij", bad.nu, bad.nu)
    assert np.abs(nu_nu - bad.eta).max() > 1e-6


def test_degenerate_immersion():
    g = ParamGrid.uniform(1, 16)
    F = ImmersionField(g, np.zeros((16, 2)), np.zeros((2, 1)))
    with pytest.raises(DegenerateImmersion):
        GeometryState(F)


def test_eta_failure():
    g = np.broadcast_to(np.eye(2), (4, 2, 2)).copy()
    w = np.zeros((4, 2, 2))
    w[:, 0, 1], w[:, 1, 0] = 1.0, -1.0
    # |w|^2 = 2 with g = I gives eta = 0: N is not an isomorphism
    with pytest.raises(NIsomorphismFailure):
        eta_tensor(g, g, w)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 10), st.floats(-5, 5), st.floats(0.1, 10))
def test_small_matrix_helpers(a, b, d):
    m = np.array([[a, b], [b, d]])
    if a * d - b * b <= 1e-6:
        return
    inv, det = sym_inverse(m[None])
    np.testing.assert_allclose(inv[0], np.linalg.inv(m), rtol=1e-9, atol=1e-12)
    assert det[0] == pytest.approx(np.linalg.det(m), rel=1e-9, abs=1e-12)
    assert sym_min_eig(m[None])[0] == pytest.approx(np.linalg.eigvalsh(m)[0], rel=1e-9, abs=1e-9)


def test_covariant_derivative_validation(torus_state):
    _, s = torus_state
    with pytest.raises(ValueError):
        covariant_derivative(s.g, s.Gamma, s.grid, "dx")
    with pytest.raises(ValueError):
        covariant_derivative(s.g, s.Gamma, s.grid, "ddd")
    # raising an index commutes with nabla
    Hup_D = s.nabla(s.H_up, "u")
    via = np.einsum("...ij,...jk->...ik", s.gInv, s.nabla(s.H, "d"))
    assert np.abs(Hup_D - via).max() <= 1e-12


def test_christoffel_symmetry(graph_state):
    _, s = graph_state
    G = christoffels(s.g, s.gInv, s.grid)
    assert np.abs(G - np.swapaxes(G, -1, -2)).max() <= 1e-14


def test_json_dump(tmp_path):
    _, s = state_for("circle", 8)
    path = tmp_path / "geo.json"
    s.dump_json(path)
    data = json.loads(path.read_text())
    assert data["sizes"] == [8] and len(data["h"]) == 8
    assert data["H"][0][0] == pytest.approx(-1.0)


def test_build_frame_symmetry(graph_state):
    _, s = graph_state
    frame = build_frame(s.F)
    assert np.array_equal(frame.eDD, np.swapaxes(frame.eDD, -3, -2))
    g, gInv, sq = pullback_metric(frame)
    assert np.array_equal(g, np.swapaxes(g, -1, -2))
