"""Pointwise tensors of an immersed n-manifold in flat C^n.

Index layout: node axes first, then tensor indices in the order they are
written.  A covariant derivative appends its direction index last, so
``nabla_l h_ikj`` is ``D(h)[..., i, k, j, l]`` and ``nabla_k nabla_j w_li`` is
``DD(w)[..., l, i, j, k]``.

Conventions
-----------
* ``e_i = dF/dx^i``, ``e_ij = d^2F/dx^i dx^j``.
* ``omega_ij = <J e_i, e_j>``, raised as ``omega_i^l = omega_ik g^kl``.
* ``nu_i = N(e_i) = J e_i - omega_i^l e_l``, ``eta_ij = <nu_i, nu_j>``.
* ``h_kij = -<nu_k, e_ij>``, ``H_i = g^kl h_ikl``.
* ``R^l_kij = d_i Gamma^l_jk - d_j Gamma^l_ik + Gamma^l_im Gamma^m_jk - Gamma^l_jm Gamma^m_ik``
  and ``R_lkij = g_lm R^m_kij``, so ``R_1212`` is the sectional curvature times ``det g``.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .ambient import AmbientStructure
from .errors import DegenerateImmersion, NIsomorphismFailure
from .grid import ImmersionField, ParamGrid

TOL_LAG = 1e-8
DET_G_MIN = 1e-12
ETA_EIG_MIN = 1e-10


def sym_inverse(m: np.ndarray):
    """Inverse and determinant of a field of small symmetric matrices.

    Closed forms for sizes 1 and 2 (the only ones the grid supports) avoid
    the per-node LAPACK overhead, which dominates on large grids.
    """
    k = m.shape[-1]
    if k > 2:
        inv = np.linalg.inv(m)
        return 0.5 * (inv + np.swapaxes(inv, -1, -2)), np.linalg.det(m)
    # singular input yields inf; callers reject it through det
    with np.errstate(divide="ignore", invalid="ignore"):
        if k == 1:
            return 1.0 / m, m[..., 0, 0].copy()
        a, b, d = m[..., 0, 0], 0.5 * (m[..., 0, 1] + m[..., 1, 0]), m[..., 1, 1]
        det = a * d - b * b
        inv = np.empty_like(m)
        inv[..., 0, 0] = d / det
        inv[..., 1, 1] = a / det
        inv[..., 0, 1] = inv[..., 1, 0] = -b / det
        return inv, det


def sym_min_eig(m: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue at each node of a symmetric matrix field."""
    k = m.shape[-1]
    if k == 1:
        return m[..., 0, 0]
    if k == 2:
        a, b, d = m[..., 0, 0], 0.5 * (m[..., 0, 1] + m[..., 1, 0]), m[..., 1, 1]
        return 0.5 * (a + d) - np.hypot(0.5 * (a - d), b)
    return np.linalg.eigvalsh(m)[..., 0]


@dataclass(frozen=True)
class Frame:
    e: np.ndarray    # (*nodes, n, 2n)
    eDD: np.ndarray  # (*nodes, n, n, 2n), symmetric in the two parameter indices


def build_frame(F: ImmersionField) -> Frame:
    grid = F.grid
    n = grid.n
    P = F.periodic_part()
    first = [grid.partial(P, i) for i in range(n)]
    e = np.stack([first[i] + F.winding[:, i] for i in range(n)], axis=-2)
    eDD = np.empty(grid.sizes + (n, n, 2 * n))
    for i in range(n):
        for j in range(i, n):
            eij = grid.partial(first[j], i)
            eDD[..., i, j, :] = eij
            eDD[..., j, i, :] = eij
    return Frame(e, eDD)


def pullback_metric(frame: Frame):
    """Return ``(g, gInv, sqrtDetG)``; raises DegenerateImmersion if det g < 1e-12."""
    g = frame.e @ np.swapaxes(frame.e, -1, -2)
    g = 0.5 * (g + np.swapaxes(g, -1, -2))
    gInv, det = sym_inverse(g)
    if not np.all(det >= DET_G_MIN):
        raise DegenerateImmersion(f"det g dropped to {det.min():.3e}")
    return g, gInv, np.sqrt(det)


def pullback_symplectic(frame: Frame, ambient: AmbientStructure) -> np.ndarray:
    Je = ambient.apply_J(frame.e)
    w = Je @ np.swapaxes(frame.e, -1, -2)
    return 0.5 * (w - np.swapaxes(w, -1, -2))


def raise_omega(omega: np.ndarray, gInv: np.ndarray, sign: int = 1) -> np.ndarray:
    """``omega_i^l = omega_ik g^kl``.  ``sign=-1`` is a deliberately wrong test hook."""
    if sign == 1:
        return omega @ gInv
    return np.swapaxes(omega, -1, -2) @ gInv


def normal_map(frame: Frame, gInv: np.ndarray, omega: np.ndarray, ambient: AmbientStructure,
               omega_sign: int = 1) -> np.ndarray:
    om_up = raise_omega(omega, gInv, omega_sign)
    return ambient.apply_J(frame.e) - om_up @ frame.e


def eta_tensor(g: np.ndarray, gInv: np.ndarray, omega: np.ndarray, omega_sign: int = 1):
    """``eta_ij = g_ij + omega_i^l omega_lj``; returns ``(eta, etaInv)``."""
    om_up = raise_omega(omega, gInv, omega_sign)
    eta = g + om_up @ omega
    eta = 0.5 * (eta + np.swapaxes(eta, -1, -2))
    lam = sym_min_eig(eta)
    if not np.all(lam > ETA_EIG_MIN):
        raise NIsomorphismFailure(f"eta lost positivity: min eigenvalue {lam.min():.3e}")
    return eta, sym_inverse(eta)[0]


def second_fundamental(frame: Frame, nu: np.ndarray) -> np.ndarray:
    """``h_kij = -<nu_k, e_ij>`` (flat ambient: the covariant derivative is d^2F)."""
    return -np.einsum("...ka,...ija->...kij", nu, frame.eDD)


def mean_curvature_form(gInv: np.ndarray, h: np.ndarray) -> np.ndarray:
    return np.einsum("...kl,...ikl->...i", gInv, h)


def christoffels(g: np.ndarray, gInv: np.ndarray, grid: ParamGrid) -> np.ndarray:
    """``Gamma[..., k, i, j] = Gamma^k_ij`` from grid derivatives of g."""
    dg = grid.gradient(g)  # dg[..., a, b, c] = d_c g_ab
    lower = 0.5 * (
        np.einsum("...jli->...lij", dg)
        + np.einsum("...ilj->...lij", dg)
        - np.einsum("...ijl->...lij", dg)
    )
    return np.einsum("...kl,...lij->...kij", gInv, lower)


def covariant_derivative(T: np.ndarray, Gamma: np.ndarray, grid: ParamGrid, signature: str) -> np.ndarray:
    """Levi-Civita derivative of a tensor field.

    ``signature`` has one character per tensor index, ``"d"`` (covariant) or
    ``"u"`` (contravariant); the result carries the derivative index last.
    """
    rank = len(signature)
    n = grid.n
    if set(signature) - {"d", "u"}:
        raise ValueError(f"bad variance signature {signature!r}")
    if T.ndim != len(grid.sizes) + rank or any(s != n for s in T.shape[len(grid.sizes):]):
        raise ValueError(f"tensor shape {T.shape} does not match signature {signature!r}")
    out = grid.gradient(T)
    letters = string.ascii_lowercase[:rank]
    z, y = "z", "y"
    for slot, kind in enumerate(signature):
        X = letters[slot]
        t_in = letters[:slot] + y + letters[slot + 1:]
        t_out = letters + z
        if kind == "d":
            out = out - np.einsum(f"...{y}{z}{X},...{t_in}->...{t_out}", Gamma, T)
        else:
            out = out + np.einsum(f"...{X}{z}{y},...{t_in}->...{t_out}", Gamma, T)
    return out


def intrinsic_riemann(Gamma: np.ndarray, g: np.ndarray, grid: ParamGrid):
    """Return ``(R_up, R)`` with ``R_up[l,k,i,j] = R^l_kij`` and ``R = g_lm R^m_kij``."""
    dG = grid.gradient(Gamma)  # dG[l, a, b, c] = d_c Gamma^l_ab
    R_up = (
        np.einsum("...ljki->...lkij", dG)
        - np.einsum("...likj->...lkij", dG)
        + np.einsum("...lim,...mjk->...lkij", Gamma, Gamma)
        - np.einsum("...ljm,...mik->...lkij", Gamma, Gamma)
    )
    return R_up, np.einsum("...am,...mkij->...akij", g, R_up)


class GeometryState:
    """All pointwise tensors of one immersion at one time.

    Frame, metric, omega, eta, nu, h and H are computed on construction;
    Christoffel symbols, curvature and derivative tensors are computed lazily.
    Treat every array as read-only.

    Parameters
    ----------
    F : ImmersionField
    lagrangian_fast_path : bool
        Skip the omega corrections (eta = g, nu = J e).  Only honoured when
        ``omega_max <= TOL_LAG``.
    omega_sign : int
        Test hook; ``-1`` raises omega with the wrong index and breaks
        ``<nu_i, nu_j> = eta_ij`` on non-Lagrangian data.
    """

    def __init__(self, F: ImmersionField, lagrangian_fast_path: bool = False, omega_sign: int = 1):
        self.F = F
        self.grid = F.grid
        self.n = F.grid.n
        self.ambient = AmbientStructure(self.n)
        self.omega_sign = omega_sign
        self.frame = build_frame(F)
        self.g, self.gInv, self.sqrtDetG = pullback_metric(self.frame)
        self.omega = pullback_symplectic(self.frame, self.ambient)
        # |omega|^2 = g^ik g^jl w_ij w_kl = -tr((w g^-1)^2) by antisymmetry
        w_up = self.omega @ self.gInv
        self.omega_sq = -np.einsum("...il,...li->...", w_up, w_up)
        self.omega_max = float(np.sqrt(max(self.omega_sq.max(), 0.0))) + 0.0  # no -0.0
        self.fast_path = bool(lagrangian_fast_path and self.omega_max <= TOL_LAG)
        if self.fast_path:
            self.eta, self.etaInv = self.g, self.gInv
            self.nu = self.ambient.apply_J(self.frame.e)
        else:
            self.eta, self.etaInv = eta_tensor(self.g, self.gInv, self.omega, omega_sign)
            self.nu = normal_map(self.frame, self.gInv, self.omega, self.ambient, omega_sign)
        self.h = second_fundamental(self.frame, self.nu)
        self.H = mean_curvature_form(self.gInv, self.h)

    @property
    def e(self) -> np.ndarray:
        return self.frame.e

    @property
    def eDD(self) -> np.ndarray:
        return self.frame.eDD

    @property
    def is_lagrangian(self) -> bool:
        return self.omega_max <= TOL_LAG

    @cached_property
    def omega_up(self) -> np.ndarray:
        return raise_omega(self.omega, self.gInv, self.omega_sign)

    @cached_property
    def Gamma(self) -> np.ndarray:
        return christoffels(self.g, self.gInv, self.grid)

    @cached_property
    def _riemann(self):
        return intrinsic_riemann(self.Gamma, self.g, self.grid)

    @property
    def R_up(self) -> np.ndarray:
        return self._riemann[0]

    @property
    def R(self) -> np.ndarray:
        return self._riemann[1]

    def nabla(self, T: np.ndarray, signature: str) -> np.ndarray:
        return covariant_derivative(T, self.Gamma, self.grid, signature)

    @cached_property
    def D_omega(self) -> np.ndarray:
        return self.nabla(self.omega, "dd")

    @cached_property
    def DD_omega(self) -> np.ndarray:
        return self.nabla(self.D_omega, "ddd")

    @cached_property
    def D_h(self) -> np.ndarray:
        return self.nabla(self.h, "ddd")

    @cached_property
    def DD_h(self) -> np.ndarray:
        return self.nabla(self.D_h, "dddd")

    @cached_property
    def H_up(self) -> np.ndarray:
        return np.einsum("...ij,...j->...i", self.gInv, self.H)

    @cached_property
    def H_sq(self) -> np.ndarray:
        return np.einsum("...i,...i->...", self.H_up, self.H)

    @cached_property
    def min_eig_g(self) -> float:
        return float(sym_min_eig(self.g).min())

    @property
    def area(self) -> float:
        return self.grid.integrate(1.0, self.sqrtDetG)

    def velocity(self, theta: np.ndarray | None = None) -> np.ndarray:
        """``-eta^mn theta_m nu_n`` with ``theta = H`` by default (mean curvature flow)."""
        theta = self.H if theta is None else theta
        coef = (self.etaInv @ theta[..., :, None])[..., 0]
        return -(coef[..., None, :] @ self.nu)[..., 0, :]

    def to_dict(self) -> dict:
        """Per-node tensors as nested lists (debug dump)."""
        keys = ("g", "gInv", "omega", "eta", "etaInv", "nu", "h", "H", "sqrtDetG")
        out = {"n": self.n, "sizes": list(self.grid.sizes), "scheme": self.grid.scheme}
        for k in keys:
            out[k] = np.asarray(getattr(self, k)).tolist()
        out["Gamma"] = self.Gamma.tolist()
        return out

    def dump_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)


def build_geometry(F: ImmersionField, **kwargs) -> GeometryState:
    return GeometryState(F, **kwargs)


def mcf_velocity(state: GeometryState) -> np.ndarray:
    return state.velocity()


def norms(state: GeometryState) -> dict:
    return {"omega_sq": state.omega_sq, "H_sq": state.H_sq, "omega_max": state.omega_max}
