"""Real and spectral fields on the periodic grid, and the operator algebra
(transforms, Fourier multipliers, differentiation, Leray projection,
dealiasing) shared by the solver, oracles, and diagnostics.

Normalization: the forward transform carries a (dx)^d / (2*pi)^{d/2} weight so
the discrete Plancherel identity

    sum_x |f(x)|^2 (dx)^d  ==  sum_xi |fhat(xi)|^2 (dxi)^d

holds exactly. Every norm downstream relies on this convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as _fft

from .errors import SymmetryError, ZeroFrequencyError
from .grid import Grid, _dealias_mask, _k2, _mesh

_FFT_WORKERS = 1


def set_fft_workers(n: int):
    """Set the FFT thread count. Outputs are reproducible per fixed count."""
    global _FFT_WORKERS
    _FFT_WORKERS = int(n)


def _spatial_axes(grid: Grid, a: np.ndarray):
    return tuple(range(a.ndim - grid.d, a.ndim))


def _fftn(grid: Grid, a: np.ndarray) -> np.ndarray:
    return _fft.fftn(a, axes=_spatial_axes(grid, a), workers=_FFT_WORKERS)


def _ifftn(grid: Grid, a: np.ndarray) -> np.ndarray:
    return _fft.ifftn(a, axes=_spatial_axes(grid, a), workers=_FFT_WORKERS)


@dataclass
class RealField:
    """Real samples at grid points, shape (components, N, ..., N), row-major."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == self.grid.d:
            v = v[None]
        if v.shape != (v.shape[0],) + self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite values in real field")
        self.values = v

    @property
    def components(self) -> int:
        return self.values.shape[0]

    def component(self, i: int) -> np.ndarray:
        return self.values[i]

    def __add__(self, other: "RealField") -> "RealField":
        return RealField(self.grid, self.values + other.values)

    def __sub__(self, other: "RealField") -> "RealField":
        return RealField(self.grid, self.values - other.values)

    def __mul__(self, c) -> "RealField":
        return RealField(self.grid, self.values * float(c))

    __rmul__ = __mul__


@dataclass
class SpectralField:
    """Complex Fourier coefficients, shape (components, N, ..., N), FFT mode order."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.ndim == self.grid.d:
            c = c[None]
        if c.shape != (c.shape[0],) + self.grid.shape:
            raise ValueError(f"coeffs shape {c.shape} does not match grid {self.grid.shape}")
        self.coeffs = c

    @property
    def components(self) -> int:
        return self.coeffs.shape[0]

    def component(self, i: int) -> np.ndarray:
        return self.coeffs[i]

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, c) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * complex(c))

    __rmul__ = __mul__


# -- raw-array kernels (no validation; used in the solver hot loop) ----------

def forward_raw(grid: Grid, values: np.ndarray) -> np.ndarray:
    scale = grid.cell_volume / (2.0 * np.pi) ** (grid.d / 2.0)
    return _fftn(grid, values) * scale


def inverse_raw(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    scale = (2.0 * np.pi) ** (grid.d / 2.0) / grid.cell_volume
    return _ifftn(grid, coeffs).real * scale


def _reversed_modes(a: np.ndarray, d: int) -> np.ndarray:
    """a evaluated at -xi: index reversal mod N along each spatial axis."""
    out = a
    for ax in range(a.ndim - d, a.ndim):
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return out


def symmetry_defect(field: SpectralField) -> float:
    """Relative size of fhat(-xi) - conj(fhat(xi))."""
    c = field.coeffs
    defect = c - np.conj(_reversed_modes(c, field.grid.d))
    norm = np.max(np.abs(c))
    if norm == 0.0:
        return 0.0
    return float(np.max(np.abs(defect)) / norm)


def transform(field, direction: str = None):
    """Forward (RealField -> SpectralField) or inverse (SpectralField -> RealField).

    Unitary in the discrete Plancherel sense. The inverse checks conjugate
    symmetry of its input (relative tolerance 1e-10) before discarding the
    imaginary part.
    """
    if direction is None:
        direction = "forward" if isinstance(field, RealField) else "inverse"
    if direction == "forward":
        if not isinstance(field, RealField):
            raise TypeError("forward transform takes a RealField")
        return SpectralField(field.grid, forward_raw(field.grid, field.values))
    if direction == "inverse":
        if not isinstance(field, SpectralField):
            raise TypeError("inverse transform takes a SpectralField")
        defect = symmetry_defect(field)
        if defect > 1e-10:
            raise SymmetryError(
                f"conjugate symmetry violated on inverse input (defect {defect:.3e})")
        return RealField(field.grid, inverse_raw(field.grid, field.coeffs))
    raise ValueError(f"unknown direction {direction!r}")


def to_spectral(field: RealField) -> SpectralField:
    return transform(field, "forward")


def to_real(field: SpectralField) -> RealField:
    return transform(field, "inverse")


def apply_multiplier(field: SpectralField, symbol) -> SpectralField:
    """Coefficientwise product m(xi) * fhat(xi).

    `symbol` is called with the mode-vector array of shape (d, N, ..., N).
    Symbols singular at xi = 0 (e.g. |xi|^{-a}) are accepted only when the
    mean mode of the field is exactly zero; the product at xi = 0 is then
    defined as zero.
    """
    grid = field.grid
    xi = np.array(_mesh(grid))
    m = np.asarray(symbol(xi))
    if m.shape != grid.shape:
        raise ValueError(f"symbol must return an array of shape {grid.shape}")
    finite = np.isfinite(m)
    if not finite.all():
        origin = (0,) * grid.d
        bad = ~finite
        if finite[origin] or bad.sum() != 1:
            raise ValueError("multiplier symbol is non-finite away from the zero mode")
        mean = field.coeffs[(slice(None),) + origin]
        if np.any(mean != 0):
            raise ZeroFrequencyError(
                "zero-frequency singularity: singular symbol with nonzero mean mode")
        m = m.copy()
        m[origin] = 0.0
    return SpectralField(grid, field.coeffs * m)


def gradient(field: SpectralField) -> SpectralField:
    """Component j of the gradient of a scalar field is i*xi_j*fhat."""
    if field.components != 1:
        raise ValueError("gradient takes a scalar field")
    return SpectralField(field.grid, gradient_raw(field.grid, field.coeffs[0]))


def gradient_raw(grid: Grid, coeff: np.ndarray) -> np.ndarray:
    k = _mesh(grid)
    return np.stack([1j * k[j] * coeff for j in range(grid.d)])


def divergence(field: SpectralField) -> SpectralField:
    """sum_j i*xi_j*what_j of a vector field."""
    if field.components != field.grid.d:
        raise ValueError("divergence takes a d-component vector field")
    return SpectralField(field.grid, divergence_raw(field.grid, field.coeffs)[None])


def divergence_raw(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    k = _mesh(grid)
    out = 1j * k[0] * coeffs[0]
    for j in range(1, grid.d):
        out = out + 1j * k[j] * coeffs[j]
    return out


def leray_project(field: SpectralField) -> SpectralField:
    """Project onto divergence-free modes: what - xi (xi . what)/|xi|^2.

    The mean mode is untouched (P(0) = identity), keeping momentum bookkeeping
    intact; it is a removable point of the projector on mean-free fields.
    """
    if field.components != field.grid.d:
        raise ValueError("Leray projection takes a d-component vector field")
    return SpectralField(field.grid, leray_raw(field.grid, field.coeffs))


def leray_raw(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    k = _mesh(grid)
    k2 = _k2(grid)
    inv = np.zeros_like(k2)
    nz = k2 > 0
    inv[nz] = 1.0 / k2[nz]
    dot = k[0] * coeffs[0]
    for j in range(1, grid.d):
        dot = dot + k[j] * coeffs[j]
    dot = dot * inv
    return np.stack([coeffs[j] - k[j] * dot for j in range(grid.d)])


def dealias(field: SpectralField) -> SpectralField:
    """Zero every mode with any axis index |n_j| > N/3 (2/3-rule)."""
    return SpectralField(field.grid, field.coeffs * _dealias_mask(field.grid))


def dealias_raw(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    return coeffs * _dealias_mask(grid)
