"""Flat Calabi-Yau ambient space R^{2n} = C^n.

Coordinates are ordered ``(x_1, ..., x_n, y_1, ..., y_n)`` with ``z_j = x_j + i y_j``.
The complex structure acts by ``J dx_j = dy_j`` and ``J dy_j = -dx_j``; the metric is
Euclidean and the Kaehler form is ``omega_bar(u, v) = <Ju, v>``.  Christoffel symbols
and curvature of the ambient metric vanish identically, so no field stores them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class AmbientStructure:
    """Complex structure, metric and Kaehler form on flat ``C^n``.

    Parameters
    ----------
    n : int
        Complex dimension (1 or 2).
    lattice : sequence of float, optional
        Period length per ambient coordinate for quotient tori.  Only used when
        positions are wrapped for rendering; tensors never see it.
    """

    n: int
    lattice: Optional[tuple] = None

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"complex dimension must be 1 or 2, got {self.n}")
        if self.lattice is not None:
            lat = tuple(float(p) if p is not None else None for p in self.lattice)
            if len(lat) != 2 * self.n:
                raise ValueError("lattice needs one period per ambient coordinate")
            object.__setattr__(self, "lattice", lat)

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def j_matrix(self) -> np.ndarray:
        """Matrix of J acting on column vectors, ``(Jv)^g = J[g, a] v^a``."""
        n = self.n
        J = np.zeros((2 * n, 2 * n))
        J[n:, :n] = np.eye(n)
        J[:n, n:] = -np.eye(n)
        return J

    @property
    def kahler_matrix(self) -> np.ndarray:
        """``omega_bar[a, b] = g_bar[b, c] J[c, a]``."""
        return self.j_matrix.T.copy()

    def _check(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != 2 * self.n:
            raise ValueError(f"expected ambient vectors of length {2 * self.n}, got {v.shape[-1]}")
        return v

    def apply_J(self, v) -> np.ndarray:
        """Return ``Jv`` for a vector (or stack of vectors along the last axis)."""
        v = self._check(v)
        n = self.n
        return np.concatenate([-v[..., n:], v[..., :n]], axis=-1)

    def inner(self, u, v) -> np.ndarray:
        """Flat metric, summed one complex coordinate at a time.

        Pairing ``x_j`` with ``y_j`` before summing over ``j`` makes
        ``inner(Ju, Jv) == inner(u, v)`` hold bit for bit.
        """
        u, v = self._check(u), self._check(v)
        n = self.n
        pairs = u[..., :n] * v[..., :n] + u[..., n:] * v[..., n:]
        total = pairs[..., 0]
        for j in range(1, n):
            total = total + pairs[..., j]
        return total

    def symplectic(self, u, v) -> np.ndarray:
        """``omega_bar(u, v) = <Ju, v>``; antisymmetric bit for bit."""
        return self.inner(self.apply_J(u), v)


def ambient_for(n: int, lattice: Optional[Sequence[float]] = None) -> AmbientStructure:
    return AmbientStructure(n, None if lattice is None else tuple(lattice))


def apply_J(v) -> np.ndarray:
    """Complex structure on ``R^{2n}``, with ``n`` inferred from the vector length."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] % 2:
        raise ValueError("ambient vectors have even length")
    return AmbientStructure(v.shape[-1] // 2).apply_J(v)


def ambient_symplectic(u, v) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape[-1] != v.shape[-1] or u.shape[-1] % 2:
        raise ValueError("dimension mismatch between ambient vectors")
    return AmbientStructure(u.shape[-1] // 2).symplectic(u, v)
