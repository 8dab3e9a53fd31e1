"""Time integration of the drag-coupled system on the periodic box:

    d/dt rho + div(rho u) = 0
    d/dt u + (u.grad)u    = -(u - v)
    d/dt v + (v.grad)v + grad p - lap v = rho (u - v),   div v = 0.

The u-equation is advanced in velocity (nonconservative) form, valid for
smooth rho > 0. Stiff linear parts are integrated exactly: the viscous factor
exp(-|xi|^2 dt) on v and the unit-rate relaxation of u toward v. Everything
else (advection, density transport, the drag force on v, which are all small
in the regime of interest) is advanced by a two-stage second-order explicit
scheme in integrating-factor variables. The drag coefficient is fixed at 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diagnostics import TimeSeries, compute_channels, default_channels, lp_norm
from .errors import CflError, VacuumError
from .fields import (RealField, dealias_raw, forward_raw, gradient_raw,
                     inverse_raw, leray_raw)
from .grid import Grid, _k2, _mesh

FLOOR_FRACTION = 0.1
PRESETS = ("zero-velocity", "heat-only", "coupled-small", "random-small")


@dataclass
class SimState:
    """Density, transported velocity u, viscous velocity v at one instant."""

    grid: Grid
    rho: RealField
    u: RealField
    v: RealField
    t: float = 0.0

    def __post_init__(self):
        d = self.grid.d
        if self.rho.components != 1:
            raise ValueError("rho must be a scalar field")
        if self.u.components != d or self.v.components != d:
            raise ValueError("u and v must have d components")

    @property
    def mass(self) -> float:
        return float(np.sum(self.rho.values)) * self.grid.cell_volume

    def min_density(self) -> float:
        return float(np.min(self.rho.values))

    def max_speed(self) -> float:
        su = np.sqrt(np.sum(self.u.values**2, axis=0)).max()
        sv = np.sqrt(np.sum(self.v.values**2, axis=0)).max()
        return float(max(su, sv))


@dataclass
class SolverConfig:
    """Run parameters; epsilon scales the initial-data amplitude."""

    d: int = 2
    N: int = 128
    L: float = 64.0 * np.pi
    dt_max: float = 0.05
    cfl_safety: float = 0.4
    t_end: float = 10.0
    sample_every: float = 0.25
    preset: str = "coupled-small"
    epsilon: float = 1e-2
    seed: int = 0

    def __post_init__(self):
        Grid(self.d, self.N, self.L)  # validates d, N, L
        if not (self.t_end > 0):
            raise ValueError("t_end must be positive")
        if not (self.epsilon > 0):
            raise ValueError("epsilon must be positive")
        if not (0.0 < self.cfl_safety <= 1.0):
            raise ValueError("cfl_safety must lie in (0, 1]")
        if not (self.dt_max > 0):
            raise ValueError("dt_max must be positive")
        if not (0 < self.sample_every <= self.t_end):
            raise ValueError("sample_every must lie in (0, t_end]")
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}")

    @property
    def grid(self) -> Grid:
        return Grid(self.d, self.N, self.L)


# -- initial data -------------------------------------------------------------

def _envelope(grid: Grid, width: float) -> np.ndarray:
    x = grid.meshgrid()
    c = grid.L / 2.0
    r2 = sum((xi - c) ** 2 for xi in x)
    return np.exp(-r2 / (2.0 * width**2))

def _pattern_wavenumber(grid: Grid, target: float) -> float:
    """Nearest positive multiple of the mode spacing to `target`."""
    return max(1.0, np.round(target / grid.dxi)) * grid.dxi

def _taylor_green(grid: Grid, a: float) -> np.ndarray:
    """Cellular divergence-free pattern, phase-shifted a quarter period so the
    Gaussian-windowed integral of the first component does not cancel (the
    spectral density must not vanish as xi -> 0)."""
    x = grid.meshgrid()
    c = grid.L / 2.0
    s = [xi - c for xi in x]
    if grid.d == 2:
        return np.stack([
            np.cos(a * s[0]) * np.cos(a * s[1]),
            np.sin(a * s[0]) * np.sin(a * s[1]),
        ])
    return np.stack([
        np.cos(a * s[0]) * np.cos(a * s[1]) * np.cos(a * s[2]),
        np.sin(a * s[0]) * np.sin(a * s[1]) * np.cos(a * s[2]),
        np.zeros(grid.shape),
    ])

def _solenoidal(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Band-limit, project onto divergence-free modes, zero the mean mode."""
    what = dealias_raw(grid, leray_raw(grid, forward_raw(grid, values)))
    what[(slice(None),) + (0,) * grid.d] = 0.0
    return inverse_raw(grid, what)

def _smooth(grid: Grid, values: np.ndarray, zero_mean: bool = True) -> np.ndarray:
    what = dealias_raw(grid, forward_raw(grid, values))
    if zero_mean:
        what[(...,) + (0,) * grid.d] = 0.0
    return inverse_raw(grid, what)


def initial_data(preset: str, grid: Grid, amplitude: float, seed: int = 0) -> SimState:
    """Construct band-limited initial data of size `amplitude`.

    Density is a Gaussian bump over a strictly positive floor (both scaled by
    the amplitude); v is solenoidal with a Gaussian envelope whose spectral
    density is nonzero arbitrarily close to xi = 0 while the mean mode itself
    is exactly zero.
    """
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}")
    eps = float(amplitude)
    w_rho = grid.L / 16.0
    w_vel = min(3.0, grid.L / 8.0)
    bump = _envelope(grid, w_rho)
    env = _envelope(grid, w_vel)
    zeros = np.zeros((grid.d,) + grid.shape)
    e = np.ones(grid.d) / np.sqrt(grid.d)

    if preset == "zero-velocity":
        rho = eps * (FLOOR_FRACTION + _smooth(grid, bump[None], zero_mean=False)[0])
        u, v = zeros, zeros.copy()
    elif preset == "heat-only":
        rho = np.full(grid.shape, eps * FLOOR_FRACTION)
        u = zeros
        v = eps * _solenoidal(grid, env * e.reshape((grid.d,) + (1,) * grid.d))
    elif preset == "coupled-small":
        a = _pattern_wavenumber(grid, 1.0 / (2.0 * w_vel))
        rho = eps * (FLOOR_FRACTION + _smooth(grid, bump[None], zero_mean=False)[0])
        v = eps * _solenoidal(grid, env * _taylor_green(grid, a))
        x = grid.meshgrid()
        c = grid.L / 2.0
        pattern = np.stack([np.cos(a * (x[(j + 1) % grid.d] - c)) for j in range(grid.d)])
        u = eps * _smooth(grid, env * pattern)
    else:  # random-small
        rng = np.random.default_rng(seed)
        rho = eps * (FLOOR_FRACTION + _smooth(grid, bump[None], zero_mean=False)[0])
        u = eps * _smooth(grid, env * rng.standard_normal((grid.d,) + grid.shape))
        v = eps * _solenoidal(grid, env * rng.standard_normal((grid.d,) + grid.shape))

    state = SimState(grid, RealField(grid, rho[None] if rho.ndim == grid.d else rho),
                     RealField(grid, u), RealField(grid, v), t=0.0)
    if state.min_density() <= 0:
        raise VacuumError("initial density is not strictly positive")
    return state


# -- tendencies ---------------------------------------------------------------

def _grad_tensor(grid: Grid, what: np.ndarray) -> np.ndarray:
    """d_j w_i as real arrays, shape (d, d, N, ..., N); index [i][j]."""
    return np.stack([inverse_raw(grid, gradient_raw(grid, what[i]))
                     for i in range(grid.d)])

def _advection_hat(grid: Grid, w_real: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Dealiased transform of (w.grad)w."""
    conv = np.stack([sum(w_real[j] * grad[i, j] for j in range(grid.d))
                     for i in range(grid.d)])
    return dealias_raw(grid, forward_raw(grid, conv))


def _spectral_tendencies(grid: Grid, rho_hat, u_hat, v_hat):
    """Stiff-free tendency transforms and the advective speed bound.

    Returns (f_rho, f_u, f_v, max_speed): f_rho = -[div(rho u)]^,
    f_u = vhat - [(u.grad)u]^, f_v = P[-[(v.grad)v]^ + [rho(u-v)]^],
    with every quadratic product dealiased once.
    """
    k = _mesh(grid)
    rho = inverse_raw(grid, rho_hat)
    u = inverse_raw(grid, u_hat)
    v = inverse_raw(grid, v_hat)
    if np.min(rho) <= 0.0:
        raise VacuumError(f"vacuum/negativity: min density {np.min(rho):.3e}")

    flux_hat = dealias_raw(grid, forward_raw(grid, rho * u))
    f_rho = -sum(1j * k[j] * flux_hat[j] for j in range(grid.d))

    conv_u = _advection_hat(grid, u, _grad_tensor(grid, u_hat))
    f_u = v_hat - conv_u

    conv_v = _advection_hat(grid, v, _grad_tensor(grid, v_hat))
    drag_hat = dealias_raw(grid, forward_raw(grid, rho * (u - v)))
    f_v = leray_raw(grid, drag_hat - conv_v)

    smax = max(np.sqrt(np.sum(u**2, axis=0)).max(), np.sqrt(np.sum(v**2, axis=0)).max())
    return f_rho, f_u, f_v, float(smax)


def _nonlinear_products(grid: Grid, state: SimState):
    """Dealiased transforms of (v.grad)v, rho(u-v), (u.grad)u (diagnostic use)."""
    u_hat = forward_raw(grid, state.u.values)
    v_hat = forward_raw(grid, state.v.values)
    conv_v = _advection_hat(grid, state.v.values, _grad_tensor(grid, v_hat))
    conv_u = _advection_hat(grid, state.u.values, _grad_tensor(grid, u_hat))
    drag = dealias_raw(grid, forward_raw(grid, state.rho.values[0] * (state.u.values - state.v.values)))
    return conv_v, drag, conv_u


def euler_tendency(state: SimState):
    """Stiff-free transport tendencies (-div(rho u), -(u.grad)u) as real fields.

    The -(u-v) relaxation is excluded; the stepper integrates it exactly.
    """
    grid = state.grid
    if state.min_density() <= 0:
        raise VacuumError(f"vacuum/negativity: min density {state.min_density():.3e}")
    rho_hat = forward_raw(grid, state.rho.values[0])
    u_hat = forward_raw(grid, state.u.values)
    v_hat = forward_raw(grid, state.v.values)
    f_rho, f_u, _, _ = _spectral_tendencies(grid, rho_hat, u_hat, v_hat)
    drho = RealField(grid, inverse_raw(grid, f_rho)[None])
    du = RealField(grid, inverse_raw(grid, f_u - v_hat))
    return drho, du


def ns_tendency(state: SimState) -> RealField:
    """Projected stiff-free tendency P[-(v.grad)v + rho(u-v)] as a real field.

    The viscous term is excluded; the stepper applies it as an exact factor.
    """
    grid = state.grid
    if state.min_density() <= 0:
        raise VacuumError(f"vacuum/negativity: min density {state.min_density():.3e}")
    rho_hat = forward_raw(grid, state.rho.values[0])
    u_hat = forward_raw(grid, state.u.values)
    v_hat = forward_raw(grid, state.v.values)
    _, _, f_v, _ = _spectral_tendencies(grid, rho_hat, u_hat, v_hat)
    return RealField(grid, inverse_raw(grid, f_v))


# -- time stepping ------------------------------------------------------------

class _StepWorkspace:
    """Caches the viscous decay factors per (grid, dt)."""

    def __init__(self, grid: Grid):
        self.grid = grid
        self.k2 = _k2(grid)
        self._cache = {}

    def factors(self, dt: float):
        hit = self._cache.get(dt)
        if hit is None:
            hit = (np.exp(-self.k2 * dt), float(np.exp(-dt)))
            if len(self._cache) > 8:
                self._cache.clear()
            self._cache[dt] = hit
        return hit


def _step_spectral(grid: Grid, rho_hat, u_hat, v_hat, dt: float, ws: _StepWorkspace):
    """One integrating-factor Heun step on the spectral state."""
    Ev, Eu = ws.factors(dt)
    f1_rho, f1_u, f1_v, smax = _spectral_tendencies(grid, rho_hat, u_hat, v_hat)
    limit = grid.dx / max(1e-12, smax)
    if dt > limit * (1.0 + 1e-12):
        raise CflError(f"dt {dt:.3e} exceeds advective limit {limit:.3e}")

    rho_p = rho_hat + dt * f1_rho
    u_p = Eu * (u_hat + dt * f1_u)
    v_p = Ev * (v_hat + dt * f1_v)
    f2_rho, f2_u, f2_v, _ = _spectral_tendencies(grid, rho_p, u_p, v_p)

    rho_new = rho_hat + 0.5 * dt * (f1_rho + f2_rho)
    u_new = Eu * u_hat + 0.5 * dt * (Eu * f1_u + f2_u)
    v_new = Ev * v_hat + 0.5 * dt * (Ev * f1_v + f2_v)
    v_new = leray_raw(grid, v_new)
    return rho_new, u_new, v_new


def _check_state(grid: Grid, rho, u, v, mass0=None):
    if not (np.isfinite(rho).all() and np.isfinite(u).all() and np.isfinite(v).all()):
        raise FloatingPointError("non-finite values in state")
    if np.min(rho) <= 0.0:
        raise VacuumError(f"vacuum/negativity: min density {np.min(rho):.3e}")
    if mass0 is not None:
        mass = float(np.sum(rho)) * grid.cell_volume
        if abs(mass - mass0) > 1e-12 * abs(mass0):
            raise FloatingPointError(f"mass drift {mass - mass0:.3e}")


def step(state: SimState, dt: float) -> SimState:
    """Advance one step of size dt. dt must satisfy dt <= dx / max speed."""
    if not (dt > 0):
        raise ValueError("dt must be positive")
    grid = state.grid
    ws = _StepWorkspace(grid)
    rho_hat = forward_raw(grid, state.rho.values[0])
    u_hat = forward_raw(grid, state.u.values)
    v_hat = forward_raw(grid, state.v.values)
    rho_hat, u_hat, v_hat = _step_spectral(grid, rho_hat, u_hat, v_hat, dt, ws)
    rho = inverse_raw(grid, rho_hat)
    u = inverse_raw(grid, u_hat)
    v = inverse_raw(grid, v_hat)
    _check_state(grid, rho, u, v)
    return SimState(grid, RealField(grid, rho[None]), RealField(grid, u),
                    RealField(grid, v), t=state.t + dt)


@dataclass
class RunResult:
    series: TimeSeries
    final_state: SimState


def run(config: SolverConfig, m: float = None, s: float = None,
        channels=None) -> RunResult:
    """Integrate to t_end, sampling diagnostics every `sample_every`.

    dt = min(dt_max, cfl_safety * dx / max speed), clipped to land exactly on
    sample times. Deterministic for a fixed config, seed, and FFT thread count.
    """
    grid = config.grid
    if m is None:
        m = grid.d / 2.0 + 1.5
    if s is None:
        s = m - 1.25
    if channels is None:
        channels = default_channels(grid.d)

    state0 = initial_data(config.preset, grid, config.epsilon, config.seed)
    ws = _StepWorkspace(grid)
    rho_hat = forward_raw(grid, state0.rho.values[0])
    u_hat = forward_raw(grid, state0.u.values)
    v_hat = forward_raw(grid, state0.v.values)
    rho, u, v = state0.rho.values[0], state0.u.values, state0.v.values
    mass0 = float(np.sum(rho)) * grid.cell_volume

    meta = {
        "d": grid.d, "N": grid.N, "L": grid.L, "m": m, "s": s,
        "preset": config.preset, "epsilon": config.epsilon, "seed": config.seed,
        "dt_max": config.dt_max, "cfl_safety": config.cfl_safety,
        "sample_every": config.sample_every, "t_end": config.t_end,
        "l1_v0": lp_norm(state0.v, 1),
    }

    times = [0.0]
    rows = [compute_channels(_mk_state(grid, rho, u, v, 0.0), m, s, channels)]

    t = 0.0
    k_sample = 1
    t_next = config.sample_every
    t_eps = 1e-9 * max(1.0, config.t_end)
    while t < config.t_end - t_eps:
        smax = max(np.sqrt(np.sum(u**2, axis=0)).max(),
                   np.sqrt(np.sum(v**2, axis=0)).max())
        dt = min(config.dt_max, config.cfl_safety * grid.dx / max(1e-12, smax),
                 t_next - t)
        rho_hat, u_hat, v_hat = _step_spectral(grid, rho_hat, u_hat, v_hat, dt, ws)
        rho = inverse_raw(grid, rho_hat)
        u = inverse_raw(grid, u_hat)
        v = inverse_raw(grid, v_hat)
        _check_state(grid, rho, u, v, mass0)
        t += dt
        if t >= t_next - t_eps:
            t = t_next  # absorb accumulated roundoff at the sample point
            times.append(t)
            rows.append(compute_channels(_mk_state(grid, rho, u, v, t), m, s, channels))
            k_sample += 1
            t_next = min(k_sample * config.sample_every, config.t_end)
            if t_next <= t + t_eps and t < config.t_end - t_eps:
                t_next = config.t_end

    series = TimeSeries(np.array(times),
                        {name: np.array([r[name] for r in rows]) for name in rows[0]},
                        meta=meta)
    return RunResult(series, _mk_state(grid, rho, u, v, t))


def _mk_state(grid: Grid, rho, u, v, t: float) -> SimState:
    return SimState(grid, RealField(grid, rho[None] if rho.ndim == grid.d else rho),
                    RealField(grid, u), RealField(grid, v), t=t)
