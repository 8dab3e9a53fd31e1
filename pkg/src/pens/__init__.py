"""Pseudo-spectral simulator and rate-verification lab for a pressureless
two-phase flow: compressible transport coupled to incompressible
Navier-Stokes through a drag force, on a large periodic box."""

from .grid import Grid, wavenumber_axis, wavenumber_grid
from .fields import (RealField, SpectralField, apply_multiplier, dealias,
                     divergence, gradient, leray_project, set_fft_workers,
                     to_real, to_spectral, transform)
from .diagnostics import (TimeSeries, compute_channels, default_channels,
                          dissipation, energy, energy_residual, fourier_l1,
                          functional_D, functional_X, lp_norm, recover_pressure,
                          sobolev_norm, stability_metric)
from .solver import (RunResult, SimState, SolverConfig, euler_tendency,
                     initial_data, ns_tendency, run, step)
from .mild import duhamel_integral, heat_envelope, picard_solve
from .decay import (DecayFunctionals, DecayReport, check_weighted_energy,
                    decay_functionals, expected_exponent, fit_power_law,
                    run_decay_experiment)
from .config import parse_config, render_config
from .storage import emit_timeseries, read_snapshot, read_timeseries, write_snapshot

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
