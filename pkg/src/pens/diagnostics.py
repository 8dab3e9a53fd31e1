"""Norms, energy bookkeeping, time-series containers, and the scalar
functionals built from them.

Conventions: L^1/L^2 quadrature carries the cell volume (dx)^d, spectral sums
carry the mode volume (dxi)^d, and L^infinity is a max over grid points of the
pointwise Euclidean magnitude. Fractional and negative Sobolev norms are
defined spectrally; negative homogeneous orders require a vanishing mean mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ChannelError, ZeroFrequencyError
from .fields import (RealField, SpectralField, apply_multiplier, forward_raw,
                     gradient_raw, inverse_raw, to_spectral)
from .grid import _k2

MEAN_TOL = 1e-10


def _magnitude(values: np.ndarray) -> np.ndarray:
    """Pointwise Euclidean magnitude across components."""
    if values.shape[0] == 1:
        return np.abs(values[0])
    return np.sqrt(np.sum(np.abs(values) ** 2, axis=0))


def lp_norm(f: RealField, p) -> float:
    """Grid-quadrature Lebesgue norm for p in {1, 2, inf}."""
    mag = _magnitude(f.values)
    w = f.grid.cell_volume
    if p == 1:
        return float(np.sum(mag) * w)
    if p == 2:
        return float(np.sqrt(np.sum(mag**2) * w))
    if p in (np.inf, "inf"):
        return float(np.max(mag))
    raise ValueError(f"p must be 1, 2 or inf, got {p!r}")


def _as_spectral(f) -> SpectralField:
    if isinstance(f, SpectralField):
        return f
    if isinstance(f, RealField):
        return to_spectral(f)
    raise TypeError("expected RealField or SpectralField")


def _check_mean_free(fhat: SpectralField):
    origin = (slice(None),) + (0,) * fhat.grid.d
    mean = np.abs(fhat.coeffs[origin]).max()
    total = np.sqrt(np.sum(np.abs(fhat.coeffs) ** 2))
    if mean > MEAN_TOL * max(total, 1e-300):
        raise ZeroFrequencyError(
            "zero-frequency singularity: negative homogeneous order needs a mean-free field")
    out = fhat.coeffs.copy()
    out[origin] = 0.0
    return SpectralField(fhat.grid, out)


def sobolev_norm(f, s: float, homogeneous: bool = False) -> float:
    """Spectral Sobolev norm of any real order.

    Inhomogeneous: ||(1+|xi|^2)^{s/2} fhat||_{L^2}; homogeneous uses |xi|^s.
    """
    fhat = _as_spectral(f)
    if homogeneous:
        if s < 0:
            fhat = _check_mean_free(fhat)
        weighted = apply_multiplier(fhat, lambda xi: np.sum(xi**2, axis=0) ** (s / 2.0))
    else:
        weighted = apply_multiplier(fhat, lambda xi: (1.0 + np.sum(xi**2, axis=0)) ** (s / 2.0))
    return float(np.sqrt(np.sum(np.abs(weighted.coeffs) ** 2) * fhat.grid.mode_volume))


def fourier_l1(f, k: float = 0.0) -> float:
    """Weighted spectral l^1 sum: sum_xi |xi|^k |fhat(xi)| (dxi)^d."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    fhat = _as_spectral(f)
    mag = _magnitude(fhat.coeffs)
    if k != 0.0:
        mag = mag * _k2(fhat.grid) ** (k / 2.0)
    return float(np.sum(mag) * fhat.grid.mode_volume)


def energy(state) -> float:
    """Total kinetic energy (1/2) int rho |u|^2 + (1/2) int |v|^2."""
    w = state.grid.cell_volume
    e_u = 0.5 * np.sum(state.rho.values[0] * np.sum(state.u.values**2, axis=0)) * w
    e_v = 0.5 * np.sum(state.v.values**2) * w
    return float(e_u + e_v)


def dissipation(state) -> float:
    """int |grad v|^2 + int rho |u - v|^2 by grid quadrature."""
    grid = state.grid
    w = grid.cell_volume
    vhat = forward_raw(grid, state.v.values)
    grad2 = 0.0
    for i in range(grid.d):
        gv = inverse_raw(grid, gradient_raw(grid, vhat[i]))
        grad2 += np.sum(gv**2)
    rel = state.u.values - state.v.values
    drag = np.sum(state.rho.values[0] * np.sum(rel**2, axis=0))
    return float((grad2 + drag) * w)


@dataclass
class TimeSeries:
    """Sampled diagnostics: strictly increasing times and aligned channels."""

    times: np.ndarray
    channels: dict
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        if t.ndim != 1 or t.size == 0:
            raise ValueError("times must be a nonempty 1-D array")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        self.times = t
        chans = {}
        for name, vals in self.channels.items():
            v = np.asarray(vals, dtype=np.float64)
            if v.shape != t.shape:
                raise ValueError(f"channel {name!r} length {v.size} != {t.size} samples")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"channel {name!r} contains non-finite values")
            if np.any(v < 0):
                raise ValueError(f"channel {name!r} contains negative values")
            chans[name] = v
        self.channels = chans

    def require(self, *names) -> tuple:
        out = []
        for name in names:
            if name not in self.channels:
                raise ChannelError(f"missing channel {name!r}")
            out.append(self.channels[name])
        return tuple(out)


def energy_residual(series: TimeSeries) -> np.ndarray:
    """Per-interval defect of the energy identity:
    R_n = E(t_{n+1}) - E(t_n) + trapezoid(D; t_n, t_{n+1})."""
    E, D = series.require("E", "D")
    t = series.times
    dt = np.diff(t)
    return np.diff(E) + 0.5 * dt * (D[:-1] + D[1:])


def _bochner_l2(series: TimeSeries, d: int) -> float:
    """||v||_{L^{(d+4)/2}(0,T;L^2)} by trapezoid in t."""
    (l2_v,) = series.require("l2_v")
    p = (d + 4) / 2.0
    if series.times.size < 2:
        return 0.0
    return float(np.trapz(l2_v**p, series.times) ** (1.0 / p))


def _meta_value(series: TimeSeries, key: str, override):
    if override is not None:
        if key in series.meta and not np.isclose(series.meta[key], override):
            raise ValueError(f"{key}={override} conflicts with series meta {series.meta[key]}")
        return override
    if key not in series.meta:
        raise ChannelError(f"series meta lacks {key!r}")
    return series.meta[key]


def functional_X(series: TimeSeries, s: float = None, m: float = None) -> float:
    """Sup-in-time norm bundle plus the squared Bochner norm of v.

    sup_t(||rho||_{H^s}^2 + ||u||_{H^m}^2 + ||v||_{H^s}^2)
      + ||v||^2_{L^{(d+4)/2}(0,T;L^2)}.
    """
    _meta_value(series, "s", s)
    _meta_value(series, "m", m)
    d = int(_meta_value(series, "d", None))
    hs_rho, hm_u, hs_v = series.require("hs_rho", "hm_u", "hs_v")
    sup_part = float(np.max(hs_rho**2 + hm_u**2 + hs_v**2))
    return sup_part + _bochner_l2(series, d) ** 2


def functional_D(series: TimeSeries, s: float = None, m: float = None) -> float:
    """Integrated dissipation bundle:

    int ||grad u||_inf + int |||xi| vhat||_{L^1} + int ||grad^2 u||_{H^{m-2}}
      + int ||grad^2 v||_{H^{m-2}} + int ||u-v||_{L^2}
      + ||v||_{L^{(d+4)/2}(0,T;L^2)}.
    """
    _meta_value(series, "s", s)
    _meta_value(series, "m", m)
    d = int(_meta_value(series, "d", None))
    chans = series.require("linf_grad_u", "xi_l1_v", "hm2_d2u", "hm2_d2v", "l2_umv")
    t = series.times
    total = 0.0
    if t.size > 1:
        for c in chans:
            total += float(np.trapz(c, t))
    return total + _bochner_l2(series, d)


def stability_metric(a, b, alpha: float) -> float:
    """Squared stability seminorm between two states on the same grid:

    ||rho_a - rho_b||^2_{Hdot^{-alpha}} + ||u_a - u_b||^2_{H^1}
      + ||v_a - v_b||^2_{L^2}.

    The density difference must be mass-matched (mean-zero to 1e-10 relative).
    """
    if a.grid != b.grid:
        raise ValueError("states live on different grids")
    if not (0.0 < alpha < 0.5):
        raise ValueError("alpha must lie in (0, 1/2)")
    grid = a.grid
    drho = a.rho.values - b.rho.values
    mass_scale = abs(float(np.sum(a.rho.values))) * grid.cell_volume
    mean_defect = abs(float(np.sum(drho))) * grid.cell_volume
    if mean_defect > MEAN_TOL * max(mass_scale, 1e-300):
        raise ValueError("density difference is not mass-matched (mean mode mismatch)")
    rho_term = sobolev_norm(RealField(grid, drho), -alpha, homogeneous=True) ** 2
    u_term = sobolev_norm(RealField(grid, a.u.values - b.u.values), 1.0) ** 2
    v_term = lp_norm(RealField(grid, a.v.values - b.v.values), 2) ** 2
    return rho_term + u_term + v_term


def default_channels(d: int) -> list:
    """Channel set recorded by runs: energies, Lebesgue/Sobolev/spectral-l1
    norms of u, v, u-v, and the bundle constituents."""
    names = [
        "E", "D", "l2_u", "l2_v", "l2_umv",
        "hk_u[1]", "hk_u[2]", "hk_v[1]", "hk_v[2]",
        "linf_dv", "xi_l1_v", "xi2_l1_v", "l1hat_umv",
        "hs_rho", "hm_u", "hs_v", "linf_grad_u", "hm2_d2u", "hm2_d2v",
    ]
    if d == 3:
        names.append("hth_umv[1]")
    return names


def _order_of(name: str) -> float:
    return float(name[name.index("[") + 1:name.index("]")])


def compute_channels(state, m: float, s: float, names) -> dict:
    """Evaluate the named channels on one state."""
    grid = state.grid
    w_mode = grid.mode_volume
    umv = RealField(grid, state.u.values - state.v.values)
    rho_hat = SpectralField(grid, forward_raw(grid, state.rho.values))
    u_hat = SpectralField(grid, forward_raw(grid, state.u.values))
    v_hat = SpectralField(grid, forward_raw(grid, state.v.values))
    umv_hat = SpectralField(grid, u_hat.coeffs - v_hat.coeffs)
    k2 = _k2(grid)

    def spectral_l2(coeffs, weight) -> float:
        mag2 = np.sum(np.abs(coeffs) ** 2, axis=0)
        return float(np.sqrt(np.sum(weight**2 * mag2) * w_mode))

    out = {}
    for name in names:
        if name == "E":
            out[name] = energy(state)
        elif name == "D":
            out[name] = dissipation(state)
        elif name == "l2_u":
            out[name] = lp_norm(state.u, 2)
        elif name == "l2_v":
            out[name] = lp_norm(state.v, 2)
        elif name == "l2_umv":
            out[name] = lp_norm(umv, 2)
        elif name.startswith("hk_u["):
            out[name] = sobolev_norm(u_hat, _order_of(name), homogeneous=True)
        elif name.startswith("hk_v["):
            out[name] = sobolev_norm(v_hat, _order_of(name), homogeneous=True)
        elif name.startswith("hth_umv["):
            out[name] = sobolev_norm(umv_hat, _order_of(name), homogeneous=True)
        elif name == "linf_dv":
            lap_v = inverse_raw(grid, -k2 * v_hat.coeffs)
            out[name] = float(_magnitude(lap_v).max())
        elif name == "xi_l1_v":
            out[name] = fourier_l1(v_hat, 1.0)
        elif name == "xi2_l1_v":
            out[name] = fourier_l1(v_hat, 2.0)
        elif name == "l1hat_umv":
            out[name] = fourier_l1(umv_hat, 0.0)
        elif name == "hs_rho":
            out[name] = sobolev_norm(rho_hat, s)
        elif name == "hm_u":
            out[name] = sobolev_norm(u_hat, m)
        elif name == "hs_v":
            out[name] = sobolev_norm(v_hat, s)
        elif name == "linf_grad_u":
            g2 = 0.0
            for i in range(grid.d):
                gu = inverse_raw(grid, gradient_raw(grid, u_hat.coeffs[i]))
                g2 = g2 + np.sum(gu**2, axis=0)
            out[name] = float(np.sqrt(g2.max()))
        elif name == "hm2_d2u":
            out[name] = spectral_l2(u_hat.coeffs, k2 * (1.0 + k2) ** ((m - 2.0) / 2.0))
        elif name == "hm2_d2v":
            out[name] = spectral_l2(v_hat.coeffs, k2 * (1.0 + k2) ** ((m - 2.0) / 2.0))
        elif name == "l1_v":
            out[name] = lp_norm(state.v, 1)
        else:
            raise ChannelError(f"unknown channel {name!r}")
    return out


def recover_pressure(state) -> RealField:
    """Solve -lap p = div[(v.grad)v - rho(u-v)] spectrally, mean of p zero."""
    from .solver import _nonlinear_products  # deferred: solver builds on this module

    grid = state.grid
    conv_v, drag, _ = _nonlinear_products(grid, state)
    ghat = conv_v - drag
    k2 = _k2(grid)
    inv = np.zeros_like(k2)
    nz = k2 > 0
    inv[nz] = 1.0 / k2[nz]
    from .fields import divergence_raw

    phat = divergence_raw(grid, ghat) * inv
    phat[(0,) * grid.d] = 0.0
    return RealField(grid, inverse_raw(grid, phat)[None])
