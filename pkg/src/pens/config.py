"""Flat key=value run configuration: total parsing with line-numbered errors,
range validation, defaults, and exact reserialization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diagnostics import default_channels
from .errors import ConfigError
from .solver import PRESETS, SolverConfig

_INT_KEYS = {"d", "N", "seed"}
_FLOAT_KEYS = {"L", "dt_max", "cfl_safety", "t_end", "sample_every", "epsilon", "m", "s"}
_STR_KEYS = {"preset", "out_dir", "channels"}
KNOWN_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS

_KEY_ORDER = ["d", "N", "L", "dt_max", "cfl_safety", "t_end", "sample_every",
              "preset", "epsilon", "seed", "m", "s", "channels", "out_dir"]

DEFAULTS = {
    "d": 2,
    "N": 128,
    "L": 64.0 * np.pi,
    "dt_max": 0.05,
    "cfl_safety": 0.4,
    "t_end": 10.0,
    "sample_every": 0.25,
    "preset": "coupled-small",
    "epsilon": 1e-2,
    "seed": 0,
    "out_dir": ".",
}


@dataclass
class Settings:
    """A validated solver configuration plus diagnostic settings."""

    solver: SolverConfig
    m: float
    s: float
    channels: list
    out_dir: str = "."

    def as_text(self) -> str:
        return render_config(self)


def _parse_scalar(key: str, raw: str, line_no: int):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
    except ValueError:
        kind = "integer" if key in _INT_KEYS else "number"
        raise ConfigError(f"line {line_no}: {key} must be a {kind}, got {raw!r}")
    return raw


def _known_channel(name: str) -> bool:
    from .decay import _BRACKET

    fixed = {"E", "D", "l2_u", "l2_v", "l2_umv", "linf_dv", "xi_l1_v", "xi2_l1_v",
             "l1hat_umv", "hs_rho", "hm_u", "hs_v", "linf_grad_u", "hm2_d2u",
             "hm2_d2v", "l1_v"}
    return name in fixed or _BRACKET.match(name) is not None


def parse_config(text: str) -> Settings:
    """Parse and validate configuration text; blank lines and '#' comments are
    skipped, every other line must be key=value with a known key."""
    values = {}
    lines = {}
    for i, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {i}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {i}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {i}: duplicate key {key!r}")
        values[key] = _parse_scalar(key, raw, i)
        lines[key] = i

    def line_of(key):
        return lines.get(key, 0)

    def fail(key, message):
        raise ConfigError(f"line {line_of(key)}: {message}")

    d = values.get("d", DEFAULTS["d"])
    merged = {k: values.get(k, DEFAULTS[k]) for k in DEFAULTS}
    m = values.get("m", d / 2.0 + 1.5)
    s = values.get("s", m - 1.25)

    try:
        solver = SolverConfig(d=merged["d"], N=merged["N"], L=merged["L"],
                              dt_max=merged["dt_max"], cfl_safety=merged["cfl_safety"],
                              t_end=merged["t_end"], sample_every=merged["sample_every"],
                              preset=merged["preset"], epsilon=merged["epsilon"],
                              seed=merged["seed"])
    except ValueError as exc:
        message = str(exc)
        blame = {"dimension": "d", "N must": "N", "box length": "L",
                 "dt_max": "dt_max", "cfl_safety": "cfl_safety", "t_end": "t_end",
                 "sample_every": "sample_every", "epsilon": "epsilon",
                 "unknown preset": "preset"}
        for prefix, key in blame.items():
            if message.startswith(prefix):
                fail(key, message)
        raise ConfigError(f"line 0: {message}")

    if not (m > d / 2.0 + 1.0):
        fail("m", f"m must exceed d/2 + 1 = {d / 2.0 + 1.0}")
    if not (m - 2.0 < s <= m - 1.0):
        fail("s", "s must lie in (m-2, m-1]")

    if "channels" in values:
        channels = [c.strip() for c in values["channels"].split(",") if c.strip()]
        for c in channels:
            if not _known_channel(c):
                fail("channels", f"unknown channel {c!r}")
    else:
        channels = default_channels(d)

    return Settings(solver=solver, m=m, s=s, channels=channels,
                    out_dir=merged["out_dir"])


def render_config(settings: Settings) -> str:
    """Serialize settings back to the key=value grammar (round-trippable)."""
    sv = settings.solver
    values = {
        "d": sv.d, "N": sv.N, "L": sv.L, "dt_max": sv.dt_max,
        "cfl_safety": sv.cfl_safety, "t_end": sv.t_end,
        "sample_every": sv.sample_every, "preset": sv.preset,
        "epsilon": sv.epsilon, "seed": sv.seed, "m": settings.m, "s": settings.s,
        "channels": ",".join(settings.channels), "out_dir": settings.out_dir,
    }
    out = []
    for key in _KEY_ORDER:
        v = values[key]
        out.append(f"{key}={v!r}" if isinstance(v, float) else f"{key}={v}")
    return "\n".join(out) + "\n"
