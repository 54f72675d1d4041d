"""Periodic parameter grids on the torus [0, 2pi)^n and derivatives on them.

Fields are plain ndarrays whose leading axes are the grid axes (node-major);
any trailing axes are tensor or ambient components.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.fft as sfft

SCHEMES = ("spectral", "central4")

# worker count handed to scipy.fft; 1 keeps every run serial and reproducible
_FFT_WORKERS = 1


def set_workers(workers: int) -> None:
    global _FFT_WORKERS
    _FFT_WORKERS = max(1, int(workers))


@dataclass(frozen=True)
class ParamGrid:
    """Uniform periodic grid with ``sizes[i]`` nodes along axis ``i``.

    Node ``k`` on an axis sits at ``2 pi k / size``.  ``scheme`` selects Fourier
    (``"spectral"``) or fourth-order central differences (``"central4"``).
    """

    sizes: tuple
    scheme: str = "spectral"
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        sizes = tuple(int(s) for s in np.atleast_1d(self.sizes))
        if len(sizes) not in (1, 2):
            raise ValueError("parameter dimension must be 1 or 2")
        for s in sizes:
            if s < 8 or s % 2:
                raise ValueError(f"grid sizes must be even and >= 8, got {s}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown derivative scheme {self.scheme!r}")
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def uniform(cls, n: int, size: int, scheme: str = "spectral") -> "ParamGrid":
        return cls((size,) * n, scheme)

    def with_scheme(self, scheme: str) -> "ParamGrid":
        return self if scheme == self.scheme else ParamGrid(self.sizes, scheme)

    @property
    def n(self) -> int:
        return len(self.sizes)

    @property
    def shape(self) -> tuple:
        return self.sizes

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.sizes))

    @property
    def spacing(self) -> tuple:
        return tuple(2 * np.pi / s for s in self.sizes)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @cached_property
    def axes(self) -> list:
        return [2 * np.pi * np.arange(s) / s for s in self.sizes]

    @cached_property
    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``(*sizes, n)``."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def _check_axis(self, axis: int) -> None:
        if not 0 <= axis < self.n:
            raise IndexError(f"axis {axis} out of range for a {self.n}-dimensional grid")

    def _spectral_multiplier(self, axis: int, ndim: int) -> np.ndarray:
        key = ("ik", axis, ndim)
        if key not in self._cache:
            size = self.sizes[axis]
            mult = 1j * sfft.rfftfreq(size, d=1.0 / size)
            mult[-1] = 0.0  # Nyquist mode has no odd derivative
            shape = [1] * ndim
            shape[axis] = mult.size
            self._cache[key] = mult.reshape(shape)
        return self._cache[key]

    def partial(self, field: np.ndarray, axis: int) -> np.ndarray:
        """First derivative along parameter ``axis`` under the grid's scheme."""
        self._check_axis(axis)
        field = np.asarray(field, dtype=float)
        if self.scheme == "spectral":
            spec = sfft.rfft(field, axis=axis, workers=_FFT_WORKERS)
            spec *= self._spectral_multiplier(axis, field.ndim)
            return sfft.irfft(spec, n=self.sizes[axis], axis=axis, workers=_FFT_WORKERS)
        h = self.spacing[axis]
        return (
            8.0 * (np.roll(field, -1, axis) - np.roll(field, 1, axis))
            - (np.roll(field, -2, axis) - np.roll(field, 2, axis))
        ) / (12.0 * h)

    def second_partial(self, field: np.ndarray, axis_i: int, axis_j: int) -> np.ndarray:
        return self.partial(self.partial(field, axis_j), axis_i)

    def gradient(self, field: np.ndarray) -> np.ndarray:
        """All first partials stacked on a new last axis."""
        return np.stack([self.partial(field, a) for a in range(self.n)], axis=-1)

    def dealias(self, field: np.ndarray) -> np.ndarray:
        """Damp the top of the spectrum with ``exp(-36 (|k| / k_max)^36)`` per axis.

        The factor stays within 1e-13 of one for ``|k| < 0.4 k_max`` and above
        0.99 up to ``0.77 k_max``; the top few modes are removed.
        """
        field = np.asarray(field, dtype=float)
        key = ("filter", field.ndim)
        if key not in self._cache:
            factor = 1.0
            for axis, size in enumerate(self.sizes):
                k = np.abs(sfft.fftfreq(size, d=1.0 / size)) / (size // 2)
                shape = [1] * field.ndim
                shape[axis] = size
                factor = factor * np.exp(-36.0 * k ** 36).reshape(shape)
            self._cache[key] = factor
        axes = tuple(range(self.n))
        spec = sfft.fftn(field, axes=axes, workers=_FFT_WORKERS) * self._cache[key]
        return np.real(sfft.ifftn(spec, axes=axes, workers=_FFT_WORKERS))

    def integrate(self, f: np.ndarray, density: np.ndarray | float = 1.0) -> float:
        """Trapezoid rule ``sum f * density * cell_volume``; density must be positive."""
        density = np.broadcast_to(np.asarray(density, dtype=float), self.sizes)
        if np.any(density <= 0):
            raise ValueError("integration density must be positive at every node")
        return float(np.sum(np.asarray(f, dtype=float) * density) * self.cell_volume)


@dataclass(frozen=True)
class ImmersionField:
    """Sampled map ``F: T^n -> R^{2n}``.

    ``values`` holds positions with shape ``(*sizes, 2n)``.  ``winding`` is the
    constant ``2n x n`` matrix ``A`` with ``F(x + 2 pi e_i) = F(x) + 2 pi A[:, i]``,
    so ``F - A x`` is periodic and can be differentiated on the grid.
    """

    grid: ParamGrid
    values: np.ndarray
    winding: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        n = self.grid.n
        if values.shape != self.grid.sizes + (2 * n,):
            raise ValueError(f"immersion values must have shape {self.grid.sizes + (2 * n,)}")
        winding = np.asarray(self.winding, dtype=float).reshape(2 * n, n)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "winding", winding)

    @property
    def n(self) -> int:
        return self.grid.n

    def periodic_part(self) -> np.ndarray:
        return self.values - self.grid.coords @ self.winding.T

    def replace(self, values: np.ndarray, grid: ParamGrid | None = None) -> "ImmersionField":
        return ImmersionField(grid or self.grid, values, self.winding)

    def wrapped(self, lattice: Sequence[float | None] | None) -> np.ndarray:
        """Positions reduced modulo the ambient lattice periods (rendering only)."""
        out = self.values.copy()
        if lattice:
            for a, period in enumerate(lattice):
                if period:
                    out[..., a] = np.mod(out[..., a], period)
        return out


def field_to_csv(path, grid: ParamGrid, field: np.ndarray, names: Sequence[str] | None = None) -> None:
    """Write one row per node: parameter coordinates followed by the field values."""
    field = np.asarray(field, dtype=float)
    flat = field.reshape(grid.num_nodes, -1)
    coords = grid.coords.reshape(grid.num_nodes, grid.n)
    if names is None:
        names = [f"v{c}" for c in range(flat.shape[1])]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(grid.n)] + list(names))
        for xrow, vrow in zip(coords, flat):
            writer.writerow([repr(float(v)) for v in xrow] + [repr(float(v)) for v in vrow])
