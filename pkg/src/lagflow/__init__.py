"""Numerical Lagrangian mean curvature flow and deformation diagnostics in flat C^n."""

from lagflow.ambient import AmbientStructure, apply_J, ambient_symplectic
from lagflow.grid import ImmersionField, ParamGrid
from lagflow.geometry import GeometryState, build_geometry
from lagflow.scenarios import Scenario, make_scenario, SCENARIO_NAMES
from lagflow.identities import IdentityId, ResidualReport, evaluate_identity, evaluate_all
from lagflow.hodge import HodgeSplit, hodge_decompose, loop_periods
from lagflow.flow import FlowConfig, FlowRecord, run_flow

__version__ = "0.1.0"

__all__ = [
    "AmbientStructure",
    "apply_J",
    "ambient_symplectic",
    "ImmersionField",
    "ParamGrid",
    "GeometryState",
    "build_geometry",
    "Scenario",
    "make_scenario",
    "SCENARIO_NAMES",
    "IdentityId",
    "ResidualReport",
    "evaluate_identity",
    "evaluate_all",
    "HodgeSplit",
    "hodge_decompose",
    "loop_periods",
    "FlowConfig",
    "FlowRecord",
    "run_flow",
]
