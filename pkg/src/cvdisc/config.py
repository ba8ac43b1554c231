"""Run configuration: INI files (or a previous run's manifest) to typed inputs.

Sections and keys (all optional unless a command needs them)::

    [scenario]       n, r_e | r_e2, mu, theta, lambda,
                     t, r, n0, n_a            (source/channel instead of n)
                     omega_hz, temperature_k, temperature_rule   (mu from T)
    [constellation]  family, scale, m, phase, nx, ny, points, probs, recenter
    [sweep]          s_values | s_min, s_max, s_points, spacing
    [boundary]       omega_values_hz | omega_min_hz, omega_max_hz, omega_points,
                     temperature_k, temperature_rule, method, channel_occupation,
                     r_lo, r_hi, tolerance, scan
    [wigner]         s, keep, x_min, x_max, x_points, p_min, p_max, p_points
"""

from __future__ import annotations

import configparser
import json
import math
from pathlib import Path

import numpy as np

from .boundary import DEFAULT_R_RANGE, RULES, ChannelProfile, TemperatureConstraint
from .constellation import Constellation, build_constellation
from .errors import ConfigError, ParameterError
from .gaussian import SourceChannelParams, bose_einstein_occupation
from .rates import ScenarioConfig

SCHEMA = {
    "scenario": {"n", "r_e", "r_e2", "mu", "theta", "lambda", "t", "r", "n0", "n_a", "omega_hz", "temperature_k",
                 "temperature_rule"},
    "constellation": {"family", "scale", "m", "phase", "nx", "ny", "points", "probs", "recenter"},
    "sweep": {"s_values", "s_min", "s_max", "s_points", "spacing"},
    "boundary": {"omega_values_hz", "omega_min_hz", "omega_max_hz", "omega_points", "temperature_k",
                 "temperature_rule", "method", "channel_occupation", "r_lo", "r_hi", "tolerance", "scan"},
    "wigner": {"s", "keep", "x_min", "x_max", "x_points", "p_min", "p_max", "p_points"},
    "output": {"label"},
}

DEFAULT_SCENARIO = {"n": "0.3", "r_e": "0.5", "mu": "0.6"}


class RunConfig:
    """Validated view over the raw key/value sections."""

    def __init__(self, sections: dict[str, dict[str, str]], source: str = "<defaults>"):
        self.source = source
        self.sections = {k: dict(v) for k, v in sections.items()}
        for sec, keys in self.sections.items():
            if sec not in SCHEMA:
                raise ConfigError(f"unknown section [{sec}]", field=sec)
            for key in keys:
                if key not in SCHEMA[sec]:
                    raise ConfigError(f"unknown key (allowed: {', '.join(sorted(SCHEMA[sec]))})",
                                      field=f"{sec}.{key}")

    # ---------------------------------------------------------------- raw access

    def has(self, sec: str, key: str) -> bool:
        return key in self.sections.get(sec, {})

    def raw(self, sec: str, key: str, default: str | None = None) -> str | None:
        return self.sections.get(sec, {}).get(key, default)

    def _parse(self, sec, key, conv, default=None):
        text = self.raw(sec, key)
        if text is None:
            return default
        try:
            return conv(text.strip())
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"cannot parse {text!r}: {exc}", field=f"{sec}.{key}") from None

    def float(self, sec, key, default=None):
        v = self._parse(sec, key, float, default)
        if v is not None and not math.isfinite(v):
            raise ConfigError("must be finite", field=f"{sec}.{key}")
        return v

    def int(self, sec, key, default=None):
        return self._parse(sec, key, int, default)

    def complex(self, sec, key, default=None):
        return self._parse(sec, key, lambda t: complex(t.replace(" ", "")), default)

    def floats(self, sec, key):
        return self._parse(sec, key, lambda t: [float(x) for x in t.replace(",", " ").split()], None)

    def complexes(self, sec, key):
        return self._parse(sec, key, lambda t: [complex(x) for x in t.replace(" ", "").split(",") if x], None)

    def to_dict(self) -> dict:
        return {sec: dict(sorted(keys.items())) for sec, keys in sorted(self.sections.items())}


def load_config(path: str | Path | None) -> RunConfig:
    """Read an INI file, or the ``config`` block of a ``manifest.json``."""
    if path is None:
        return RunConfig({"scenario": dict(DEFAULT_SCENARIO)})
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", field="--config") from None
    if path.suffix == ".json":
        try:
            doc = json.loads(text)
            sections = doc["config"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ConfigError(f"not a run manifest: {exc}", field=str(path)) from None
        return RunConfig(sections, str(path))
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace("\n", " "), field=str(path)) from None
    return RunConfig({s: dict(parser.items(s)) for s in parser.sections()}, str(path))


# ---------------------------------------------------------------- resolution


def resolve_constellation(cfg: RunConfig) -> Constellation:
    sec = "constellation"
    family = (cfg.raw(sec, "family") or "four-point").strip().lower()
    kw = dict(
        scale=cfg.float(sec, "scale", 1.0),
        m=cfg.int(sec, "m", 4),
        phase=cfg.float(sec, "phase", 0.0),
        nx=cfg.int(sec, "nx", 2),
        ny=cfg.int(sec, "ny", 2),
        points=cfg.complexes(sec, "points"),
        probs=cfg.floats(sec, "probs"),
        recenter=(cfg.raw(sec, "recenter", "true").strip().lower() in ("1", "true", "yes", "on")),
    )
    try:
        return build_constellation(family, **kw)
    except ParameterError as exc:
        raise ConfigError(str(exc), field=f"{sec}.family" if "family" in str(exc) else sec) from None


def _r_e(cfg: RunConfig, sec: str = "scenario") -> float:
    if cfg.has(sec, "r_e") and cfg.has(sec, "r_e2"):
        raise ConfigError("give r_e or r_e2, not both", field=f"{sec}.r_e2")
    if cfg.has(sec, "r_e2"):
        r2 = cfg.float(sec, "r_e2")
        if r2 < 0:
            raise ConfigError("must be >= 0", field=f"{sec}.r_e2")
        return math.sqrt(r2)
    if not cfg.has(sec, "r_e"):
        raise ConfigError("missing coupling r_e (or r_e2)", field=f"{sec}.r_e")
    return cfg.float(sec, "r_e")


def resolve_scenario(cfg: RunConfig) -> ScenarioConfig:
    sec = "scenario"
    constellation = resolve_constellation(cfg)
    r_e = _r_e(cfg)
    theta = cfg.float(sec, "theta", 0.0)
    lam = cfg.float(sec, "lambda", 1.0)

    channel_keys = [k for k in ("t", "r", "n0", "n_a") if cfg.has(sec, k)]
    if channel_keys and cfg.has(sec, "n"):
        raise ConfigError("give either n or the source/channel parameters t, r, n0, n_a", field=f"{sec}.n")
    t_channel = 1.0
    n = cfg.float(sec, "n")
    if channel_keys:
        t = cfg.complex(sec, "t", 1.0)
        r = cfg.complex(sec, "r", complex(math.sqrt(max(0.0, 1 - abs(t) ** 2))))
        try:
            ch = SourceChannelParams(t=t, r=r, n0=cfg.float(sec, "n0", 0.0), n_a=cfg.float(sec, "n_a", 0.0))
        except ParameterError as exc:
            raise ConfigError(str(exc), field=f"{sec}.t") from None
        n = abs(ch.t) ** 2 * ch.n0 + abs(ch.r) ** 2 * ch.n_a
        t_channel = ch.t

    thermal = cfg.has(sec, "omega_hz") or cfg.has(sec, "temperature_k")
    if thermal:
        if cfg.has(sec, "mu"):
            raise ConfigError("mu is derived from omega_hz and temperature_k; remove it", field=f"{sec}.mu")
        omega = cfg.float(sec, "omega_hz")
        temp = cfg.float(sec, "temperature_k")
        if omega is None or temp is None:
            raise ConfigError("omega_hz and temperature_k must be given together", field=f"{sec}.omega_hz")
        rule = (cfg.raw(sec, "temperature_rule") or "environment").strip()
        try:
            constraint = TemperatureConstraint(temp, rule)
            mu = constraint.mu(omega, r_e)
            if n is None:
                n = bose_einstein_occupation(omega, temp)
        except ParameterError as exc:
            raise ConfigError(str(exc), field=f"{sec}.temperature_rule" if "rule" in str(exc) else f"{sec}.r_e") \
                from None
    else:
        mu = cfg.float(sec, "mu")
        if mu is None:
            raise ConfigError("missing mu (or omega_hz with temperature_k)", field=f"{sec}.mu")
    if n is None:
        raise ConfigError("missing channel occupation n", field=f"{sec}.n")
    try:
        return ScenarioConfig(constellation, n=n, r_E=r_e, mu=mu, theta=theta, lam=lam, t_channel=t_channel,
                              label=cfg.raw("output", "label", "") or "")
    except ParameterError as exc:
        msg = str(exc)
        field = next((k for k in ("r_E", "mu", "lambda", "reconciliation", "occupation", "t_channel") if k in msg), "")
        key = {"r_E": "r_e", "reconciliation": "lambda", "occupation": "n", "t_channel": "t"}.get(field, field)
        raise ConfigError(msg, field=f"{sec}.{key}" if key else sec) from None


def _grid(cfg: RunConfig, sec: str, prefix: str, values_key: str, default):
    if cfg.has(sec, values_key):
        vals = cfg.floats(sec, values_key)
        return np.array(vals, dtype=float)
    lo = cfg.float(sec, f"{prefix}_min")
    hi = cfg.float(sec, f"{prefix}_max")
    pts = cfg.int(sec, f"{prefix}_points")
    if lo is None and hi is None and pts is None:
        return np.array(default, dtype=float)
    if lo is None or hi is None or pts is None:
        raise ConfigError(f"{prefix}_min, {prefix}_max and {prefix}_points go together", field=f"{sec}.{prefix}_min")
    if pts < 0:
        raise ConfigError("must be >= 0", field=f"{sec}.{prefix}_points")
    spacing = (cfg.raw(sec, "spacing") or "log").strip() if sec == "sweep" else "log"
    if spacing == "log":
        if lo <= 0 or hi <= 0:
            raise ConfigError("log spacing needs positive bounds", field=f"{sec}.{prefix}_min")
        return np.logspace(math.log10(lo), math.log10(hi), pts)
    if spacing == "linear":
        return np.linspace(lo, hi, pts)
    raise ConfigError("spacing must be log or linear", field=f"{sec}.spacing")


def resolve_s_grid(cfg: RunConfig, default=None) -> np.ndarray:
    from .boundary import DEFAULT_S_GRID

    grid = _grid(cfg, "sweep", "s", "s_values", DEFAULT_S_GRID if default is None else default)
    if grid.size and (np.any(grid <= 0) or np.any(np.diff(grid) <= 0)):
        raise ConfigError("s grid must be positive and strictly increasing", field="sweep.s_values")
    return grid


def resolve_boundary(cfg: RunConfig):
    sec = "boundary"
    omegas = _grid(cfg, sec, "omega", "omega_values_hz", [])
    if omegas.size == 0:
        raise ConfigError("no frequencies given", field=f"{sec}.omega_values_hz")
    temp = cfg.float(sec, "temperature_k", 300.0)
    rule = (cfg.raw(sec, "temperature_rule") or "environment").strip()
    if rule not in RULES:
        raise ConfigError(f"must be one of {RULES}", field=f"{sec}.temperature_rule")
    method = (cfg.raw(sec, "method") or "both").strip()
    if method not in ("weak", "numeric", "both"):
        raise ConfigError("must be weak, numeric or both", field=f"{sec}.method")
    try:
        constraint = TemperatureConstraint(temp, rule)
    except ParameterError as exc:
        raise ConfigError(str(exc), field=f"{sec}.temperature_k") from None
    profile = ChannelProfile(
        occupation=cfg.float(sec, "channel_occupation"),
        theta=cfg.float("scenario", "theta", 0.0),
        lam=cfg.float("scenario", "lambda", 1.0),
    )
    r_range = (cfg.float(sec, "r_lo", DEFAULT_R_RANGE[0]), cfg.float(sec, "r_hi", DEFAULT_R_RANGE[1]))
    return dict(
        omegas=omegas,
        constraint=constraint,
        method=method,
        profile=profile,
        r_range=r_range,
        tol=cfg.float(sec, "tolerance", 1e-4),
        scan=cfg.int(sec, "scan", 12),
        constellation=resolve_constellation(cfg),
        s_grid=resolve_s_grid(cfg),
    )


def resolve_wigner(cfg: RunConfig):
    sec = "wigner"
    keep = (cfg.raw(sec, "keep") or "partner").strip()
    if keep not in ("partner", "mixed"):
        raise ConfigError("must be partner or mixed", field=f"{sec}.keep")
    s = cfg.float(sec, "s", 1.0)
    x = np.linspace(cfg.float(sec, "x_min", -6.0), cfg.float(sec, "x_max", 6.0), cfg.int(sec, "x_points", 121))
    p = np.linspace(cfg.float(sec, "p_min", -6.0), cfg.float(sec, "p_max", 6.0), cfg.int(sec, "p_points", 121))
    if x.size < 2 or p.size < 2:
        raise ConfigError("grid needs at least 2 points per axis", field=f"{sec}.x_points")
    return dict(s=s, keep=keep, x=x, p=p)
