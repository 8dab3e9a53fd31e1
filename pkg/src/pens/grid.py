"""Uniform periodic grids and their Fourier-mode bookkeeping.

The box is [0, L)^d sampled at N points per axis (row-major, last axis
fastest). Wavenumbers along each axis run through
(2*pi/L) * {0, 1, ..., N/2-1, -N/2, ..., -1} in standard FFT order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Periodic grid metadata: dimension d, points per axis N, edge length L."""

    d: int
    N: int
    L: float

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.d}")
        if self.N < 8 or not _is_power_of_two(self.N):
            raise ValueError(f"N must be a power of two >= 8, got {self.N}")
        if not (self.L > 0):
            raise ValueError(f"box length must be positive, got {self.L}")

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def dxi(self) -> float:
        """Mode spacing 2*pi/L."""
        return 2.0 * np.pi / self.L

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.dx**self.d

    @property
    def mode_volume(self) -> float:
        return self.dxi**self.d

    def coordinate_axes(self):
        """1-D physical coordinates along one axis, shared by all axes."""
        return np.arange(self.N) * self.dx

    def meshgrid(self):
        """Physical coordinates, d arrays of shape `grid.shape`."""
        x = self.coordinate_axes()
        return np.meshgrid(*([x] * self.d), indexing="ij")


def wavenumber_axis(N: int, L: float) -> np.ndarray:
    """FFT-ordered wavenumbers (2*pi/L)*{0,...,N/2-1,-N/2,...,-1} for one axis."""
    return 2.0 * np.pi / L * np.fft.fftfreq(N, d=1.0 / N)


def wavenumber_grid(grid: Grid) -> np.ndarray:
    """Mode vectors of shape (d, N, ..., N) in FFT order per axis."""
    return np.array(_mesh(grid))


@lru_cache(maxsize=8)
def _mesh(grid: Grid):
    axis = wavenumber_axis(grid.N, grid.L)
    return tuple(np.meshgrid(*([axis] * grid.d), indexing="ij"))


@lru_cache(maxsize=8)
def _k2(grid: Grid) -> np.ndarray:
    k = _mesh(grid)
    out = k[0] ** 2
    for a in k[1:]:
        out = out + a**2
    return out


@lru_cache(maxsize=8)
def _dealias_mask(grid: Grid) -> np.ndarray:
    """Modes with any integer axis index |n_j| > N/3 are aliased by quadratic products."""
    n = np.fft.fftfreq(grid.N, d=1.0 / grid.N)
    keep1d = np.abs(n) <= grid.N / 3.0
    mask = keep1d
    for _ in range(grid.d - 1):
        mask = np.multiply.outer(mask, keep1d)
    return mask
