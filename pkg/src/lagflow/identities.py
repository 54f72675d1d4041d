"""Structural identities of immersed submanifolds in flat C^n, as residual fields.

Every ambient curvature and ambient Christoffel term is zero here, so each
identity below is the flat-ambient reduction.  Residuals are LHS - RHS over all
free indices and nodes.

Term table (index order follows the layout documented in ``geometry``):

==========  ===============================================================
P1_1        h_kij - h_ikj - D_j w_ik
P1_2        DD_kj w_li - DD_lj w_ki - DD_ji w_lk
            - R^s_ilj w_ks - R^s_ijk w_ls + R^s_jkl w_si
P1_3b       D_l h_ikj - D_k h_ilj
            - eta^mn w_n^s (h_mlj h_ski - h_mkj h_sli)
            - eta^mn w_i^s (h_mkj h_nls - h_mlj h_nks)
P1_3c       R_ijkl - eta^mn (h_mik h_njl - h_mil h_njk)
L1_4        D_l h_kij - D_k h_lij - DD_ji w_lk - w_k^s R_silj - w_l^s R_sijk
            - eta^mn w_n^s (h_mlj h_ski - h_mkj h_sli)
P2_1a       h_ijk - h_jik  and  h_ijk - h_jki
P2_1d       R_ijkl - g^mn (h_mik h_njl - h_mil h_njk)
P2_1e       d_i H_j - d_j H_i
P2_2a       h_jkl - <J e_jk, e_l>
P2_2b       d_i nu_s - Gamma^l_is nu_l - h_si^l e_l
P2_8        DD_ij h_rsk - DD_rs h_ijk
            - h^n_sk (h_nr^m h_mji - h_ni^m h_mjr)
            - h^n_jk (h_nr^m h_msi - h_ni^m h_msr)
            - h^n_js (h_nr^m h_mki - h_ni^m h_mkr)
==========  ===============================================================

Here ``w`` is omega, ``D`` the induced Levi-Civita derivative and
``DD_kj T = D_k D_j T``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from enum import Enum
from typing import Iterable

import numpy as np

from .errors import NotLagrangian
from .geometry import GeometryState
from .grid import ParamGrid


class IdentityId(str, Enum):
    P1_1 = "P1_1"
    P1_2 = "P1_2"
    P1_3b = "P1_3b"
    P1_3c = "P1_3c"
    L1_4 = "L1_4"
    P2_1a = "P2_1a"
    P2_1d = "P2_1d"
    P2_1e = "P2_1e"
    P2_2a = "P2_2a"
    P2_2b = "P2_2b"
    P2_8 = "P2_8"


LAGRANGIAN_ONLY = frozenset(
    {IdentityId.P2_1a, IdentityId.P2_1d, IdentityId.P2_1e, IdentityId.P2_2a, IdentityId.P2_2b, IdentityId.P2_8}
)
# identities whose content is vacuous on curves (rank-4 objects or 2-forms)
VACUOUS_IN_1D = frozenset(
    {IdentityId.P1_2, IdentityId.P1_3c, IdentityId.L1_4, IdentityId.P2_1d, IdentityId.P2_1e, IdentityId.P2_8}
)


@dataclass(frozen=True)
class ResidualReport:
    id: str
    sizes: tuple
    scheme: str
    max_residual: float
    mean_residual: float
    lagrangian_only: bool
    scenario: str = ""

    def to_dict(self) -> dict:
        out = asdict(self)
        out["sizes"] = list(self.sizes)
        return out


def _ein(spec, *ops):
    return np.einsum(spec, *ops, optimize=True)


def _p1_1(st):
    return st.h - np.swapaxes(st.h, -3, -2) - np.einsum("...ikj->...kij", st.D_omega)


def _p1_2(st):
    DD, w, Ru = st.DD_omega, st.omega, st.R_up
    # DD[l,i,j,k] = D_k D_j w_li; result indexed [l,i,k,j]
    t1 = np.einsum("...lijk->...likj", DD)
    t2 = np.einsum("...kijl->...likj", DD)
    t3 = np.einsum("...lkij->...likj", DD)
    r1 = _ein("...silj,...ks->...likj", Ru, w)
    r2 = _ein("...sijk,...ls->...likj", Ru, w)
    r3 = _ein("...sjkl,...si->...likj", Ru, w)
    return t1 - t2 - t3 - r1 - r2 + r3


def _omega_h_terms(st):
    """``eta^mn w_n^s (h_mlj h_ski - h_mkj h_sli)`` indexed ``[i,k,j,l]``."""
    A = _ein("...mn,...ns->...ms", st.etaInv, st.omega_up)
    return _ein("...ms,...mlj,...ski->...ikjl", A, st.h, st.h) - _ein("...ms,...mkj,...sli->...ikjl", A, st.h, st.h)


def _p1_3b(st):
    Dh, h = st.D_h, st.h
    lhs = Dh - np.einsum("...iljk->...ikjl", Dh)
    second = _ein("...mn,...is,...mkj,...nls->...ikjl", st.etaInv, st.omega_up, h, h) - _ein(
        "...mn,...is,...mlj,...nks->...ikjl", st.etaInv, st.omega_up, h, h
    )
    return lhs - _omega_h_terms(st) - second


def _gauss(metric_inv, h):
    return _ein("...mn,...mik,...njl->...ijkl", metric_inv, h, h) - _ein("...mn,...mil,...njk->...ijkl", metric_inv, h, h)


def _p1_3c(st):
    return st.R - _gauss(st.etaInv, st.h)


def _l1_4(st):
    Dh, DD, R, wu = st.D_h, st.DD_omega, st.R, st.omega_up
    # result indexed [k,l,i,j]
    lhs = np.einsum("...kijl->...klij", Dh) - np.einsum("...lijk->...klij", Dh)
    dd = np.einsum("...lkij->...klij", DD)
    r1 = _ein("...ks,...silj->...klij", wu, R)
    r2 = _ein("...ls,...sijk->...klij", wu, R)
    quad = np.einsum("...ikjl->...klij", _omega_h_terms(st))
    return lhs - dd - r1 - r2 - quad


def _p2_1a(st):
    h = st.h
    return np.stack([h - np.swapaxes(h, -3, -2), h - np.einsum("...jki->...ijk", h)], axis=-1)


def _p2_1d(st):
    return st.R - _gauss(st.gInv, st.h)


def _p2_1e(st):
    from .hodge import exterior_derivative

    return exterior_derivative(st.H, st.grid)


def _p2_2a(st):
    Je = st.ambient.apply_J(st.eDD)
    return st.h - np.einsum("...jka,...la->...jkl", Je, st.e)


def _p2_2b(st):
    grid = st.grid
    dnu = np.stack([grid.partial(st.nu, i) for i in range(st.n)], axis=-2)  # [s, i, a]
    h_mixed = np.einsum("...sim,...ml->...sil", st.h, st.gInv)
    return dnu - np.einsum("...lis,...la->...sia", st.Gamma, st.nu) - np.einsum("...sil,...la->...sia", h_mixed, st.e)


def _p2_8(st):
    DD, h, gi = st.DD_h, st.h, st.gInv
    # DD[r,s,k,j,i] = D_i D_j h_rsk; result indexed [r,s,k,i,j]
    lhs = np.einsum("...rskji->...rskij", DD) - np.einsum("...ijksr->...rskij", DD)
    hu = _ein("...na,...ask->...nsk", gi, h)       # h^n_sk
    hd = _ein("...nrb,...bm->...nrm", h, gi)       # h_nr^m
    hhh = (
        _ein("...nsk,...nrm,...mji->...rskij", hu, hd, h) - _ein("...nsk,...nim,...mjr->...rskij", hu, hd, h)
        + _ein("...njk,...nrm,...msi->...rskij", hu, hd, h) - _ein("...njk,...nim,...msr->...rskij", hu, hd, h)
        + _ein("...njs,...nrm,...mki->...rskij", hu, hd, h) - _ein("...njs,...nim,...mkr->...rskij", hu, hd, h)
    )
    return lhs - hhh


_RESIDUALS = {
    IdentityId.P1_1: _p1_1,
    IdentityId.P1_2: _p1_2,
    IdentityId.P1_3b: _p1_3b,
    IdentityId.P1_3c: _p1_3c,
    IdentityId.L1_4: _l1_4,
    IdentityId.P2_1a: _p2_1a,
    IdentityId.P2_1d: _p2_1d,
    IdentityId.P2_1e: _p2_1e,
    IdentityId.P2_2a: _p2_2a,
    IdentityId.P2_2b: _p2_2b,
    IdentityId.P2_8: _p2_8,
}


def residual_field(identity, state: GeometryState) -> np.ndarray:
    identity = IdentityId(identity)
    if identity in LAGRANGIAN_ONLY and not state.is_lagrangian:
        raise NotLagrangian(f"{identity.value} needs omega = 0, got omega_max = {state.omega_max:.3e}")
    return _RESIDUALS[identity](state)


def evaluate_identity(identity, state: GeometryState, scenario: str = "") -> ResidualReport:
    identity = IdentityId(identity)
    res = np.abs(residual_field(identity, state))
    return ResidualReport(
        id=identity.value,
        sizes=state.grid.sizes,
        scheme=state.grid.scheme,
        max_residual=float(res.max()) if res.size else 0.0,
        mean_residual=float(res.mean()) if res.size else 0.0,
        lagrangian_only=identity in LAGRANGIAN_ONLY,
        scenario=scenario,
    )


def applicable(identity, state: GeometryState, skip_vacuous: bool = True) -> bool:
    identity = IdentityId(identity)
    if identity in LAGRANGIAN_ONLY and not state.is_lagrangian:
        return False
    if skip_vacuous and state.n == 1 and identity in VACUOUS_IN_1D:
        return False
    return True


def evaluate_all(state: GeometryState, ids: Iterable | None = None, scenario: str = "",
                 skip_vacuous: bool = True) -> list:
    ids = list(IdentityId) if ids is None else [IdentityId(i) for i in ids]
    return [evaluate_identity(i, state, scenario) for i in ids if applicable(i, state, skip_vacuous)]


def consistency_reports(state: GeometryState, scenario: str = "") -> list:
    """Frame-level checks: ``<nu_i, e_j> = 0``, ``<nu_i, nu_j> = eta_ij`` and Gauss-Weingarten."""
    nu, e = state.nu, state.e
    checks = {
        "nu_tangency": np.einsum("...ia,...ja->...ij", nu, e),
        "eta_nu": np.einsum("...ia,...ja->...ij", nu, nu) - state.eta,
        "gauss_weingarten": state.eDD
        - np.einsum("...kij,...ka->...ija", state.Gamma, e)
        + np.einsum("...mn,...mij,...na->...ija", state.etaInv, state.h, nu),
    }
    out = []
    for name, field in checks.items():
        res = np.abs(field)
        out.append(ResidualReport(name, state.grid.sizes, state.grid.scheme, float(res.max()),
                                  float(res.mean()), False, scenario))
    return out


def convergence_study(identity, scenario, sizes, scheme: str = "spectral", **geometry_kwargs) -> list:
    """Evaluate one identity on a ladder of grid sizes (ascending)."""
    sizes = list(sizes)
    if sizes != sorted(sizes):
        raise ValueError("sizes must be ascending")
    reports = []
    for N in sizes:
        grid = ParamGrid.uniform(scenario.n, N, scheme)
        state = GeometryState(scenario.sample(grid), **geometry_kwargs)
        reports.append(evaluate_identity(identity, state, scenario.name))
    return reports
