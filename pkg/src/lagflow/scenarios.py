"""Analytic initial data with closed-form reference quantities."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError
from .grid import ImmersionField, ParamGrid

TWO_PI = 2 * np.pi


@dataclass
class Scenario:
    """An immersion ``F(x)`` given in closed form.

    ``positions(x)`` maps node coordinates of shape ``(..., n)`` to ambient
    points ``(..., 2n)``.  ``references`` holds closed-form quantities keyed by
    name (callables of ``x`` or of ``t``, or plain values).
    """

    name: str
    n: int
    params: dict
    positions: Callable[[np.ndarray], np.ndarray]
    winding: np.ndarray
    lagrangian: bool
    lattice: Optional[tuple] = None
    references: dict = field(default_factory=dict)

    def sample(self, grid: ParamGrid) -> ImmersionField:
        if grid.n != self.n:
            raise ConfigError(f"scenario {self.name} is {self.n}-dimensional, grid is {grid.n}-dimensional")
        return ImmersionField(grid, self.positions(grid.coords), self.winding)


def _positive(name, value):
    value = float(value)
    if not value > 0:
        raise ConfigError(f"parameter {name} must be positive, got {value}")
    return value


def flat_plane(n: int = 2) -> Scenario:
    n = int(n)
    if n not in (1, 2):
        raise ConfigError("flat_plane needs n in {1, 2}")
    winding = np.vstack([np.eye(n), np.zeros((n, n))])

    def positions(x):
        return np.concatenate([x, np.zeros_like(x)], axis=-1)

    zero = lambda x: np.zeros(x.shape[:-1] + (n,))
    return Scenario(
        "flat_plane", n, {"n": n}, positions, winding, True,
        lattice=(TWO_PI,) * n + (None,) * n,
        references={
            "g": lambda x: np.broadcast_to(np.eye(n), x.shape[:-1] + (n, n)),
            "H": zero,
            "periods": (0.0,) * n,
            "area": lambda t: TWO_PI ** n,
        },
    )


def circle(r: float = 1.0, phase: float = 0.0) -> Scenario:
    r = _positive("r", r)
    phase = float(phase)

    def positions(x):
        s = x[..., 0] + phase
        return np.stack([r * np.cos(s), r * np.sin(s)], axis=-1)

    return Scenario(
        "circle", 1, {"r": r, "phase": phase}, positions, np.zeros((2, 1)), True,
        references={
            "g": lambda x: np.full(x.shape[:-1] + (1, 1), r * r),
            "h": lambda x: np.full(x.shape[:-1] + (1, 1, 1), -r * r),
            "H": lambda x: np.full(x.shape[:-1] + (1,), -1.0),
            "radius": lambda t: np.sqrt(r * r - 2 * t),
            "area": lambda t: TWO_PI * np.sqrt(r * r - 2 * t),
            "periods": (-TWO_PI,),
        },
    )


def ellipse(a: float = 1.0, b: float = 2.0) -> Scenario:
    a, b = _positive("a", a), _positive("b", b)

    def positions(x):
        s = x[..., 0]
        return np.stack([a * np.cos(s), b * np.sin(s)], axis=-1)

    def metric(x):
        s = x[..., 0]
        return ((a * np.sin(s)) ** 2 + (b * np.cos(s)) ** 2)[..., None, None]

    def gamma(x):
        # Gamma^1_11 = d_1 g_11 / (2 g_11)
        s = x[..., 0]
        g11 = (a * np.sin(s)) ** 2 + (b * np.cos(s)) ** 2
        dg11 = 2 * (a * a - b * b) * np.sin(s) * np.cos(s)
        return (dg11 / (2 * g11))[..., None, None, None]

    return Scenario(
        "ellipse", 1, {"a": a, "b": b}, positions, np.zeros((2, 1)), True,
        references={
            "g": metric,
            "Gamma": gamma,
            "h": lambda x: np.full(x.shape[:-1] + (1, 1, 1), -a * b),
            "periods": (-TWO_PI,),
        },
    )


def product_torus(r: float = 1.0, s: float = 1.0) -> Scenario:
    r, s = _positive("r", r), _positive("s", s)

    def positions(x):
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([r * np.cos(x1), s * np.cos(x2), r * np.sin(x1), s * np.sin(x2)], axis=-1)

    def h_ref(x):
        h = np.zeros(x.shape[:-1] + (2, 2, 2))
        h[..., 0, 0, 0] = -r * r
        h[..., 1, 1, 1] = -s * s
        return h

    refs = {
        "g": lambda x: np.broadcast_to(np.diag([r * r, s * s]), x.shape[:-1] + (2, 2)),
        "h": h_ref,
        "H": lambda x: np.full(x.shape[:-1] + (2,), -1.0),
        "periods": (-TWO_PI, -TWO_PI),
    }
    if r == s:
        refs["area"] = lambda t: 4 * np.pi ** 2 * (r * r - 2 * t)
        refs["radius"] = lambda t: np.sqrt(r * r - 2 * t)
    return Scenario("product_torus", 2, {"r": r, "s": s}, positions, np.zeros((4, 2)), True, references=refs)


class _SineProduct:
    """``u(x) = amplitude * prod_i sin(k_i x^i)`` with analytic derivatives."""

    def __init__(self, amplitude, wavenumbers):
        self.amplitude = float(amplitude)
        self.k = np.asarray(wavenumbers, dtype=float)

    def _factor(self, xi, k, order):
        # order-th derivative of sin(k x)
        kx = k * xi
        return [np.sin(kx), k * np.cos(kx), -k * k * np.sin(kx), -k ** 3 * np.cos(kx), k ** 4 * np.sin(kx)][order]

    def derivative(self, x, orders):
        """Mixed partial with ``orders[i]`` derivatives along axis i."""
        out = np.full(x.shape[:-1], self.amplitude)
        for i, m in enumerate(orders):
            out = out * self._factor(x[..., i], self.k[i], int(m))
        return out

    def __call__(self, x):
        return self.derivative(x, [0] * len(self.k))

    def grad(self, x):
        n = len(self.k)
        return np.stack([self.derivative(x, np.eye(n, dtype=int)[i]) for i in range(n)], axis=-1)

    def hessian(self, x):
        n = len(self.k)
        I = np.eye(n, dtype=int)
        return np.stack([np.stack([self.derivative(x, I[i] + I[j]) for j in range(n)], axis=-1)
                         for i in range(n)], axis=-2)

    def third(self, x):
        n = len(self.k)
        I = np.eye(n, dtype=int)
        out = np.empty(x.shape[:-1] + (n, n, n))
        for i in range(n):
            for j in range(n):
                for l in range(n):
                    out[..., i, j, l] = self.derivative(x, I[i] + I[j] + I[l])
        return out


def lagrangian_angle(u_hessian: np.ndarray) -> np.ndarray:
    """``sum_i arctan(lambda_i(D^2 u))``.  External fact, used only as a test oracle."""
    return np.arctan(np.linalg.eigvalsh(u_hessian)).sum(axis=-1)


def lagrangian_graph(amplitude: float = 0.1, wavenumbers=None, n: int = 2) -> Scenario:
    """Gradient graph ``F = (x, grad u)``, exactly Lagrangian."""
    n = int(n)
    if wavenumbers is None:
        wavenumbers = (1,) * n
    if len(wavenumbers) != n or any(int(k) != k for k in wavenumbers):
        raise ConfigError("wavenumbers must be n integers")
    u = _SineProduct(amplitude, wavenumbers)
    winding = np.vstack([np.eye(n), np.zeros((n, n))])

    def positions(x):
        return np.concatenate([x, u.grad(x)], axis=-1)

    def metric(x):
        D2 = u.hessian(x)
        return np.eye(n) + np.einsum("...ik,...kj->...ij", D2, D2)

    return Scenario(
        "lagrangian_graph", n, {"amplitude": float(amplitude), "wavenumbers": [int(k) for k in wavenumbers], "n": n},
        positions, winding, True,
        lattice=(TWO_PI,) * n + (None,) * n,
        references={
            "g": metric,
            "h": lambda x: -u.third(x),
            "u": u,
            "lagrangian_angle": lambda x: lagrangian_angle(u.hessian(x)),
            "periods": (0.0,) * n,
        },
    )


def affine_sheet() -> Scenario:
    """``F = (x1, x2, x2, 0)``: flat, non-Lagrangian with omega_12 = 1."""
    winding = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [0.0, 0.0]])

    def positions(x):
        return x @ winding.T

    return Scenario(
        "affine_sheet", 2, {}, positions, winding, False,
        lattice=(TWO_PI, TWO_PI, TWO_PI, None),
        references={
            "g": lambda x: np.broadcast_to(np.array([[1.0, 0.0], [0.0, 2.0]]), x.shape[:-1] + (2, 2)),
            "omega12": 1.0,
            "eta": lambda x: np.broadcast_to(np.diag([0.5, 1.0]), x.shape[:-1] + (2, 2)),
            "omega_sq": 1.0,
        },
    )


def perturbed_lagrangian(eps: float = 0.05, amplitude: float = 0.1, pole: float = 1.6) -> Scenario:
    """Graph of ``grad u + eps * V`` with ``V = (q(x2), q(x1))``, ``q(s) = 1 / (pole - cos s)``.

    ``V`` has curl, so omega != 0.  ``q`` is analytic but not a trigonometric
    polynomial, which keeps spectral truncation error visible at coarse grids.
    """
    eps = float(eps)
    pole = float(pole)
    if pole <= 1.0:
        raise ConfigError("pole must exceed 1 for a smooth perturbation")
    u = _SineProduct(amplitude, (1, 1))
    winding = np.vstack([np.eye(2), np.zeros((2, 2))])

    def q(s):
        return 1.0 / (pole - np.cos(s))

    def dq(s):
        return -np.sin(s) / (pole - np.cos(s)) ** 2

    def slope(x):
        V = np.stack([q(x[..., 1]), q(x[..., 0])], axis=-1)
        return u.grad(x) + eps * V

    def slope_jacobian(x):
        # J[..., i, j] = d_j Y_i
        Jm = u.hessian(x).copy()
        Jm[..., 0, 1] += eps * dq(x[..., 1])
        Jm[..., 1, 0] += eps * dq(x[..., 0])
        return Jm

    def positions(x):
        return np.concatenate([x, slope(x)], axis=-1)

    def metric(x):
        Jm = slope_jacobian(x)
        return np.eye(2) + np.einsum("...ki,...kj->...ij", Jm, Jm)

    def omega12(x):
        # <J e_1, e_2> = d_2 Y_1 - d_1 Y_2
        return eps * (dq(x[..., 1]) - dq(x[..., 0]))

    return Scenario(
        "perturbed_lagrangian", 2, {"eps": eps, "amplitude": float(amplitude), "pole": pole},
        positions, winding, eps == 0.0,
        lattice=(TWO_PI, TWO_PI, None, None),
        references={"g": metric, "omega12": omega12},
    )


_REGISTRY = {
    "flat_plane": flat_plane,
    "circle": circle,
    "ellipse": ellipse,
    "product_torus": product_torus,
    "lagrangian_graph": lagrangian_graph,
    "affine_sheet": affine_sheet,
    "perturbed_lagrangian": perturbed_lagrangian,
}

SCENARIO_NAMES = tuple(_REGISTRY)


def make_scenario(name: str, params: dict | None = None) -> Scenario:
    if name not in _REGISTRY:
        raise ConfigError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIO_NAMES)}")
    try:
        return _REGISTRY[name](**(params or {}))
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {name}: {exc}") from None
