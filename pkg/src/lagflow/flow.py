"""Method-of-lines integration of ``dF/dt = -eta^mn theta_m nu_n``.

``theta`` is the mean curvature form (mean curvature flow) or ``d f`` for a
fixed function ``f`` of the parameters.  Evolution-equation checks compare
centred finite differences in time of recorded snapshots with the analytic
right-hand sides at the middle snapshot.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (ConfigError, InsufficientSnapshots, LagrangianViolation, NIsomorphismFailure,
                     NotLagrangian, SingularityStop)
from .geometry import TOL_LAG, GeometryState
from .grid import ImmersionField
from .hodge import codifferential, exterior_derivative, hodge_decompose, laplace_beltrami, loop_periods

log = logging.getLogger(__name__)

LAGRANGIAN_RUN_TOL = 1e-9

# scalar functions of the parameters usable as ``grad:<name>``
GRADIENT_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sin_x1": lambda x: np.sin(x[..., 0]),
    "cos_x1": lambda x: np.cos(x[..., 0]),
    "sin_x1_sin_x2": lambda x: np.sin(x[..., 0]) * np.sin(x[..., -1]),
    "cos_sum": lambda x: np.cos(x.sum(axis=-1)),
}


@dataclass(frozen=True)
class FlowConfig:
    theta: str = "mcf"
    dt: float = 1e-4
    t_end: float = 0.01
    cfl_safety: float = 0.1
    stop_min_eig_g: float = 1e-6
    snapshot_stride: int = 10
    scheme: str = "spectral"
    keep_snapshots: bool = True
    dealias: bool = True
    max_substeps: int = 1000

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not 0 < self.cfl_safety <= 1:
            raise ConfigError("cfl_safety must lie in (0, 1]")
        if not self.stop_min_eig_g > 0:
            raise ConfigError("stop_min_eig_g must be positive")
        if self.max_substeps < 1:
            raise ConfigError("max_substeps must be >= 1")
        if self.snapshot_stride < 1:
            raise ConfigError("snapshot_stride must be >= 1")
        if self.t_end < 0:
            raise ConfigError("t_end must be non-negative")
        self.gradient_function  # validates the theta tag

    @property
    def gradient_function(self) -> Optional[Callable]:
        if self.theta in ("mcf", "mean_curvature"):
            return None
        if self.theta.startswith("grad:"):
            name = self.theta[5:]
            if name not in GRADIENT_FUNCTIONS:
                raise ConfigError(f"unknown gradient function {name!r}; choose from {sorted(GRADIENT_FUNCTIONS)}")
            return GRADIENT_FUNCTIONS[name]
        raise ConfigError(f"theta must be 'mcf' or 'grad:<name>', got {self.theta!r}")

    @property
    def is_mcf(self) -> bool:
        return self.gradient_function is None


def theta_form(state: GeometryState, config: FlowConfig) -> np.ndarray:
    f = config.gradient_function
    if f is None:
        return state.H
    return state.grid.gradient(f(state.grid.coords))


def deformation_field(state: GeometryState, config: FlowConfig) -> np.ndarray:
    """``-eta^mn theta_m nu_n`` at every node.

    With ``config.dealias`` the field is truncated by the 2/3 rule; without it
    aliased products feed the top resolved modes and they grow without bound.
    """
    V = state.velocity(theta_form(state, config))
    return state.grid.dealias(V) if config.dealias else V


def _checked_state(F: ImmersionField, config: FlowConfig, t: float) -> GeometryState:
    state = GeometryState(F)
    lam = state.min_eig_g
    if lam < config.stop_min_eig_g:
        raise SingularityStop(f"min eigenvalue of g fell to {lam:.3e} at t = {t:.6g}", t=t, min_eig_g=lam)
    return state


def stable_dt(state: GeometryState, config: FlowConfig) -> float:
    """``cfl_safety * h_min^2 / max(1, max |H|^2)`` with ``h_min`` the metric-scaled spacing."""
    h_min_sq = min(state.grid.spacing) ** 2 * state.min_eig_g
    return config.cfl_safety * h_min_sq / max(1.0, float(state.H_sq.max()))


def _rk4(F: ImmersionField, dt: float, config: FlowConfig, t: float, state0: GeometryState) -> ImmersionField:
    X = F.values
    k1 = deformation_field(state0, config)
    k2 = deformation_field(_checked_state(F.replace(X + 0.5 * dt * k1), config, t), config)
    k3 = deformation_field(_checked_state(F.replace(X + 0.5 * dt * k2), config, t), config)
    k4 = deformation_field(_checked_state(F.replace(X + dt * k3), config, t), config)
    return F.replace(X + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))


def step_rk4(F: ImmersionField, config: FlowConfig, t: float = 0.0) -> tuple:
    """Advance by ``config.dt`` with classical RK4.

    When the stability bound is below ``config.dt`` the step is split into equal
    substeps, so recorded times stay on the uniform ``dt`` lattice.  Returns the
    new field and the number of substeps taken.
    """
    state = _checked_state(F, config, t)
    substeps = max(1, math.ceil(config.dt / stable_dt(state, config) - 1e-12))
    if substeps > config.max_substeps:
        # the stable step collapses like |H|^-2 near a singularity
        raise SingularityStop(f"stable step fell below dt / {config.max_substeps} at t = {t:.6g}",
                              t=t, min_eig_g=state.min_eig_g)
    h = config.dt / substeps
    for s in range(substeps):
        if s:
            state = _checked_state(F, config, t)
        F = _rk4(F, h, config, t, state)
        t += h
    return F, substeps


@dataclass
class Diagnostics:
    t: float
    area: float
    omega_max: float
    H_sq_max: float
    min_eig_g: float
    periods: np.ndarray
    dtheta_max: float

    def row(self) -> list:
        return [self.t, self.area, self.omega_max, self.H_sq_max, self.min_eig_g, *map(float, self.periods)]


def diagnostics(state: GeometryState, t: float, config: FlowConfig) -> Diagnostics:
    theta = theta_form(state, config)
    dtheta = exterior_derivative(state.H, state.grid)
    return Diagnostics(
        t=float(t),
        area=state.area,
        omega_max=state.omega_max,
        H_sq_max=float(state.H_sq.max()),
        min_eig_g=state.min_eig_g,
        periods=loop_periods(state.H, state.grid),
        dtheta_max=float(np.abs(dtheta).max()),
    ) if theta is not None else None


@dataclass
class FlowRecord:
    """Append-only time series of diagnostics plus optional immersion snapshots.

    ``dtheta_max`` in each diagnostics entry is ``max |dH|`` (closedness of H).
    """

    config: FlowConfig
    lagrangian: bool
    times: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    substeps: list = field(default_factory=list)
    stop_reason: Optional[str] = None

    @property
    def final_time(self) -> float:
        return self.times[-1]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(d, name) for d in self.diagnostics])

    @property
    def periods(self) -> np.ndarray:
        return np.array([d.periods for d in self.diagnostics])

    def snapshot_times(self) -> np.ndarray:
        return np.array([t for t, _ in self.snapshots])

    def states(self) -> list:
        return [GeometryState(F) for _, F in self.snapshots]


def run_flow(F0: ImmersionField, config: FlowConfig,
             on_record: Optional[Callable[[Diagnostics], None]] = None) -> FlowRecord:
    """Integrate until ``t_end`` or until the metric degenerates.

    Records diagnostics (and snapshots) at step 0 and every
    ``snapshot_stride`` steps.  Runs started from Lagrangian data raise
    ``LagrangianViolation`` if ``omega_max`` exceeds 1e-9 at a record point.
    """
    grid = F0.grid.with_scheme(config.scheme)
    F = F0.replace(F0.values, grid)
    state = GeometryState(F)
    record = FlowRecord(config, lagrangian=state.omega_max <= TOL_LAG)
    n_steps = int(round(config.t_end / config.dt))

    def record_point(step, state):
        t = step * config.dt
        d = diagnostics(state, t, config)
        if record.lagrangian and d.omega_max > LAGRANGIAN_RUN_TOL:
            raise LagrangianViolation(f"omega_max = {d.omega_max:.3e} at t = {t:.6g}")
        record.times.append(t)
        record.diagnostics.append(d)
        if config.keep_snapshots:
            record.snapshots.append((t, F))
        if on_record is not None:
            on_record(d)

    record_point(0, state)
    for step in range(1, n_steps + 1):
        t = (step - 1) * config.dt
        try:
            F, m = step_rk4(F, config, t)
        except (SingularityStop, NIsomorphismFailure) as exc:
            record.stop_reason = str(exc)
            log.info("flow stopped: %s", exc)
            break
        record.substeps.append(m)
        if step % config.snapshot_stride == 0 or step == n_steps:
            try:
                state = GeometryState(F)
            except NIsomorphismFailure as exc:
                record.stop_reason = str(exc)
                break
            if state.min_eig_g < config.stop_min_eig_g:
                record.stop_reason = f"min eigenvalue of g fell to {state.min_eig_g:.3e}"
                break
            record_point(step, state)
    return record


# ----------------------------------------------------------------------------
# evolution-equation checks


def _triple(record: FlowRecord, index: Optional[int]):
    snaps = record.snapshots
    if len(snaps) < 3:
        raise InsufficientSnapshots("need at least three snapshots")
    if index is None:
        index = len(snaps) // 2
    if not 1 <= index <= len(snaps) - 2:
        raise InsufficientSnapshots(f"snapshot {index} has no neighbours on both sides")
    (t0, F0), (t1, F1), (t2, F2) = snaps[index - 1:index + 2]
    step = t1 - t0
    if not math.isclose(t2 - t1, step, rel_tol=1e-9, abs_tol=1e-15) or step <= 0:
        raise InsufficientSnapshots("snapshots around the check point are not uniformly spaced")
    return GeometryState(F0), GeometryState(F1), GeometryState(F2), step


def _theta_up(state, theta):
    return np.einsum("...ij,...j->...i", state.etaInv, theta)


def evolution_g_rhs(state: GeometryState, config: FlowConfig) -> np.ndarray:
    """``-2 eta^kl theta_k h_lij``."""
    return -2.0 * np.einsum("...l,...lij->...ij", _theta_up(state, theta_form(state, config)), state.h)


def evolution_volume_rhs(state: GeometryState, config: FlowConfig) -> np.ndarray:
    """``-eta^mn theta_m H_n sqrt(det g)``."""
    return -np.einsum("...n,...n->...", _theta_up(state, theta_form(state, config)), state.H) * state.sqrtDetG


def evolution_omega_rhs(state: GeometryState, config: FlowConfig) -> np.ndarray:
    return exterior_derivative(theta_form(state, config), state.grid)


def evolution_h_rhs(state: GeometryState, config: FlowConfig) -> np.ndarray:
    """``D_k D_j theta_l - theta^n (h_nj^m h_mkl + h_nl^m h_mkj)`` indexed ``[j, k, l]``."""
    theta = theta_form(state, config)
    DD = state.nabla(state.nabla(theta, "d"), "dd")  # DD[l, j, k] = D_k D_j theta_l
    hess = np.einsum("...ljk->...jkl", DD)
    th_up = np.einsum("...ij,...j->...i", state.gInv, theta)
    h_mixed = np.einsum("...njp,...pm->...njm", state.h, state.gInv)
    quad = (np.einsum("...n,...njm,...mkl->...jkl", th_up, h_mixed, state.h)
            + np.einsum("...n,...nlm,...mkj->...jkl", th_up, h_mixed, state.h))
    return hess - quad


def evolution_H_rhs(state: GeometryState, config: FlowConfig) -> np.ndarray:
    """``d d^dagger theta``."""
    return state.grid.gradient(codifferential(theta_form(state, config), state))


def _fd_check(record, index, quantity, rhs):
    s0, s1, s2, step = _triple(record, index)
    fd = (quantity(s2) - quantity(s0)) / (2.0 * step)
    return float(np.abs(fd - rhs(s1, record.config)).max())


def check_evolution_g(record: FlowRecord, index: Optional[int] = None) -> float:
    return _fd_check(record, index, lambda s: s.g, evolution_g_rhs)


def check_evolution_volume(record: FlowRecord, index: Optional[int] = None) -> float:
    return _fd_check(record, index, lambda s: s.sqrtDetG, evolution_volume_rhs)


def check_evolution_omega(record: FlowRecord, index: Optional[int] = None) -> float:
    return _fd_check(record, index, lambda s: s.omega, evolution_omega_rhs)


def check_evolution_h(record: FlowRecord, index: Optional[int] = None) -> float:
    if not record.lagrangian:
        raise NotLagrangian("the evolution equation of h is checked on Lagrangian runs only")
    return _fd_check(record, index, lambda s: s.h, evolution_h_rhs)


def check_evolution_H(record: FlowRecord, index: Optional[int] = None) -> float:
    return _fd_check(record, index, lambda s: s.H, evolution_H_rhs)


def fd_in_time(record: FlowRecord, quantity: Callable[[GeometryState], np.ndarray],
               index: Optional[int] = None) -> np.ndarray:
    """Centred difference of ``quantity`` at a snapshot (for closed-form comparisons)."""
    s0, _, s2, step = _triple(record, index)
    return (quantity(s2) - quantity(s0)) / (2.0 * step)


@dataclass
class PotentialTrack:
    times: np.ndarray
    phi: list
    psi: list
    periods: np.ndarray
    period_drift: float
    psi_max: np.ndarray
    heat_defect: np.ndarray  # one entry per interior snapshot

    @property
    def max_heat_defect(self) -> float:
        return float(self.heat_defect.max()) if self.heat_defect.size else 0.0


def potential_track(record: FlowRecord, basepoint=None) -> PotentialTrack:
    """Hodge-split ``H_t`` at every snapshot and test ``d phi/dt = Delta phi + c(t)``.

    The spatially constant ``c(t)`` comes from pinning ``phi`` at the basepoint
    and is removed by subtracting the node mean of the defect.
    """
    if len(record.snapshots) < 1:
        raise InsufficientSnapshots("potential tracking needs stored snapshots")
    states = record.states()
    times = record.snapshot_times()
    splits = [hodge_decompose(s.H, s, basepoint) for s in states]
    periods = np.array([loop_periods(s.H, s.grid) for s in states])
    defects = []
    for k in range(1, len(states) - 1):
        step = times[k] - times[k - 1]
        if not math.isclose(times[k + 1] - times[k], step, rel_tol=1e-9):
            raise InsufficientSnapshots("snapshots are not uniformly spaced")
        dphi = (splits[k + 1].phi - splits[k - 1].phi) / (2 * step)
        defect = dphi - laplace_beltrami(splits[k].phi, states[k])
        defects.append(float(np.abs(defect - defect.mean()).max()))
    return PotentialTrack(
        times=times,
        phi=[sp.phi for sp in splits],
        psi=[sp.psi for sp in splits],
        periods=periods,
        period_drift=float(np.abs(periods - periods[0]).max()),
        psi_max=np.array([np.abs(sp.psi).max() for sp in splits]),
        heat_defect=np.array(defects),
    )
