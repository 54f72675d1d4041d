"""Exterior calculus of 0- and 1-forms on the parameter torus with an induced metric.

Inner products are the L^2(dmu) pairing of the current induced metric, which
makes the codifferential the negative adjoint of d.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .errors import SolverDivergence
from .grid import ParamGrid


def exterior_derivative(theta: np.ndarray, grid: ParamGrid) -> np.ndarray:
    """``(d theta)_ij = d_i theta_j - d_j theta_i``, shape ``(*nodes, n, n)``."""
    D = np.stack([grid.partial(theta, i) for i in range(grid.n)], axis=-2)
    return D - np.swapaxes(D, -1, -2)


def differential(phi: np.ndarray, grid: ParamGrid) -> np.ndarray:
    """Exterior derivative of a function, a 1-form of shape ``(*nodes, n)``."""
    return grid.gradient(phi)


def codifferential(theta: np.ndarray, state) -> np.ndarray:
    """``d^dagger theta = g^ij (d_i theta_j - Gamma^k_ij theta_k)``."""
    return np.einsum("...ij,...ji->...", state.gInv, state.nabla(theta, "d"))


def codifferential_divergence(theta: np.ndarray, state) -> np.ndarray:
    """Same operator in divergence form ``(1/sqrt g) d_i (sqrt g g^ij theta_j)``."""
    flux = state.sqrtDetG[..., None] * np.einsum("...ij,...j->...i", state.gInv, theta)
    div = sum(state.grid.partial(flux[..., i], i) for i in range(state.n))
    return div / state.sqrtDetG


def laplace_beltrami(phi: np.ndarray, state) -> np.ndarray:
    """``Delta phi = d^dagger d phi`` (non-positive operator; ``Delta sin = -sin`` on the flat torus)."""
    return codifferential(differential(phi, state.grid), state)


def laplace_beltrami_divergence(phi: np.ndarray, state) -> np.ndarray:
    return codifferential_divergence(differential(phi, state.grid), state)


def inner_product(a: np.ndarray, b: np.ndarray, state) -> float:
    """``int <a, b>_g dmu`` for 1-forms, or ``int a b dmu`` for functions."""
    if a.ndim == state.grid.n:
        pointwise = a * b
    else:
        pointwise = np.einsum("...ij,...i,...j->...", state.gInv, a, b)
    return state.grid.integrate(pointwise, state.sqrtDetG)


@dataclass(frozen=True)
class HodgeSplit:
    """``theta = psi + d phi`` with ``d^dagger psi = 0`` and ``phi(basepoint) = 0``."""

    psi: np.ndarray
    phi: np.ndarray
    basepoint: tuple
    iterations: int
    relative_residual: float


class _FlatPreconditioner:
    """Inverse of ``-c^ij d_i d_j`` with the node-averaged coefficient, on mean-zero data."""

    def __init__(self, grid: ParamGrid, coeff: np.ndarray):
        ks = np.meshgrid(*[sfft.fftfreq(s, d=1.0 / s) for s in grid.sizes], indexing="ij")
        symbol = sum(coeff[i, j] * ks[i] * ks[j] for i in range(grid.n) for j in range(grid.n))
        with np.errstate(divide="ignore"):
            inv = np.where(symbol > 0, 1.0 / np.where(symbol > 0, symbol, 1.0), 0.0)
        self.inv = inv

    def __call__(self, r):
        return np.real(sfft.ifftn(sfft.fftn(r) * self.inv))


def _conjugate_gradient(apply_A, b, precond, rtol, maxiter, floor=0.0):
    """Preconditioned CG; stops at ``|r| <= rtol |b|`` or at the absolute ``floor``."""
    x = np.zeros_like(b)
    bnorm = np.linalg.norm(b)
    if bnorm <= floor:
        return x, 0, 0.0
    r = b.copy()
    z = precond(r)
    p = z.copy()
    rz = np.vdot(r, z)
    for it in range(1, maxiter + 1):
        Ap = apply_A(p)
        alpha = rz / np.vdot(p, Ap)
        x += alpha * p
        r -= alpha * Ap
        rnorm = np.linalg.norm(r)
        rel = rnorm / bnorm
        if rel <= rtol or rnorm <= floor:
            # recompute the true residual once to guard against drift
            rnorm = np.linalg.norm(b - apply_A(x))
            rel = rnorm / bnorm
            if rel <= rtol or rnorm <= floor:
                return x, it, rel
        z = precond(r)
        rz_new = np.vdot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverDivergence(f"CG reached {maxiter} iterations, relative residual {rel:.3e}")


def hodge_decompose(theta: np.ndarray, state, basepoint=None, rtol: float = 1e-10,
                    maxiter: int | None = None) -> HodgeSplit:
    """Split a 1-form into coclosed and exact parts for the induced metric.

    Solves ``Delta phi = d^dagger theta`` in the symmetric weighted form
    ``-d_i(sqrt g g^ij d_j phi) = -d_i(sqrt g g^ij theta_j)`` by preconditioned
    conjugate gradients, then sets ``psi = theta - d phi``.  Whatever harmonic
    content theta has stays in ``psi``.
    """
    grid = state.grid
    if basepoint is None:
        basepoint = (0,) * grid.n
    basepoint = tuple(int(b) for b in basepoint)
    weight = state.sqrtDetG[..., None, None] * state.gInv

    def flux_div(form):
        flux = np.einsum("...ij,...j->...i", weight, form)
        return sum(grid.partial(flux[..., i], i) for i in range(grid.n))

    def apply_A(phi):
        return -flux_div(differential(phi, grid))

    b = -flux_div(theta)
    b -= b.mean()
    # b is a sum of terms that cancel for (nearly) coclosed input; below this
    # level it is rounding noise and no relative reduction is meaningful
    flux = np.einsum("...ij,...j->...i", weight, theta)
    scale = sum(np.linalg.norm(grid.partial(flux[..., i], i)) for i in range(grid.n))
    floor = 1e3 * np.finfo(float).eps * scale
    precond = _FlatPreconditioner(grid, weight.reshape(-1, grid.n, grid.n).mean(axis=0))
    if maxiter is None:
        maxiter = 10 * max(grid.sizes) ** 2
    phi, iterations, rel = _conjugate_gradient(apply_A, b, precond, rtol, maxiter, floor)
    phi = phi - phi[basepoint]
    psi = theta - differential(phi, grid)
    return HodgeSplit(psi, phi, basepoint, iterations, float(rel))


def loop_periods(theta: np.ndarray, grid: ParamGrid, transverse=None) -> np.ndarray:
    """Integral of ``theta_k dx^k`` around the k-th coordinate loop.

    The other coordinates are held at node index ``transverse`` (0 by default).
    """
    n = grid.n
    transverse = (0,) * n if transverse is None else tuple(transverse)
    periods = np.empty(n)
    for k in range(n):
        index = list(transverse)
        index[k] = slice(None)
        periods[k] = theta[tuple(index) + (k,)].sum() * grid.spacing[k]
    return periods
