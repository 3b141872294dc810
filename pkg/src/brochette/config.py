"""Experiment configuration: INI-style ``key = value`` files with sections.

Example::

    [env]
    dim = 2
    mode = brochette
    master_seed = 7

    [dist]
    family = shifted_weibull
    a = 1
    beta = 1
    lam = 1

    [sweep]
    n_grid = 64, 128, 256
    replicates = 20

Unknown sections or keys are rejected. The canonical rendering of a config
(:meth:`ExperimentConfig.render`) is what gets hashed and echoed into output
headers, so two files that differ only in comments or ordering share a hash.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .env import Environment, distribution_from_spec
from .geodesic import DEFAULT_TIE_TOLERANCE, BoxPolicy


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ChecksConfig:
    epsilon: float = 0.05
    K: float = 4.0
    exponent_tolerance: float = 0.15
    weibull_m: int = 10_000
    weibull_reps: int = 10_000
    ks_tolerance: float = 0.02
    time_constant_reps: int = 20
    time_constant_tolerance: float = 0.1
    mean_time_grid: tuple = (64, 128, 256, 512)
    mean_time_reps: int = 50
    mean_time_tolerance: float = 0.1
    rho_radii: tuple = (64, 128, 256, 512)
    rho_seeds: int = 20


@dataclass(frozen=True)
class ExperimentConfig:
    dim: int = 2
    dist: Mapping = field(default_factory=lambda: {"family": "shifted_weibull", "a": 1.0, "beta": 1.0, "lam": 1.0})
    master_seed: int = 0
    mode: str = "brochette"
    n_grid: tuple = (64, 128, 256)
    replicates: int = 10
    tie_tolerance: float = DEFAULT_TIE_TOLERANCE
    certify: bool = True
    box: BoxPolicy = field(default_factory=BoxPolicy)
    checks: ChecksConfig = field(default_factory=ChecksConfig)
    threads: Optional[int] = None
    out: Optional[str] = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.dim < 2:
            raise ConfigError("dim must be at least 2")
        if self.mode not in ("brochette", "iid"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if not 0 <= self.master_seed < 1 << 64:
            raise ConfigError("master_seed must fit in an unsigned 64-bit integer")
        try:
            distribution_from_spec(self.dist)
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"bad [dist]: {exc}") from exc
        if not self.n_grid or any(n < 0 for n in self.n_grid):
            raise ConfigError("n_grid must be a non-empty list of non-negative integers")
        if len(set(self.n_grid)) != len(self.n_grid):
            raise ConfigError("n_grid has duplicates")
        if self.replicates < 1:
            raise ConfigError("replicates must be positive")
        if not self.tie_tolerance >= 0:
            raise ConfigError("tie_tolerance must be non-negative")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be positive")
        b = self.box
        if b.growth < 2 or b.cap < 1 or b.min_half_width < 1 or b.scale <= 0 or b.zero_fraction <= 0:
            raise ConfigError("bad [box] settings")
        c = self.checks
        if not 0 < c.epsilon < 1:
            raise ConfigError("epsilon must lie in (0, 1)")
        if c.weibull_m < 1 or c.weibull_reps < 1 or c.rho_seeds < 1:
            raise ConfigError("check sample sizes must be positive")

    @property
    def distribution(self):
        return distribution_from_spec(self.dist)

    def environment(self, seed: Optional[int] = None) -> Environment:
        return Environment(self.dim, self.distribution, self.master_seed if seed is None else seed, self.mode)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    # canonical text form

    def sections(self) -> dict[str, dict[str, str]]:
        b = self.box
        c = self.checks
        return {
            "env": {"dim": str(self.dim), "mode": self.mode, "master_seed": str(self.master_seed)},
            "dist": {k: _fmt(v) for k, v in sorted(self.dist.items())},
            "sweep": {
                "n_grid": _fmt_list(self.n_grid),
                "replicates": str(self.replicates),
                "tie_tolerance": _fmt(self.tie_tolerance),
                "certify": _fmt(self.certify),
            },
            "box": {
                "h0": "" if b.h0 is None else str(b.h0),
                "scale": _fmt(b.scale),
                "zero_fraction": _fmt(b.zero_fraction),
                "min_half_width": str(b.min_half_width),
                "growth": str(b.growth),
                "cap": str(b.cap),
                "max_vertices": "" if b.max_vertices is None else str(b.max_vertices),
            },
            "checks": {f.name: _fmt(getattr(c, f.name)) for f in dataclasses.fields(c)},
        }

    def render(self) -> str:
        lines = []
        for name, items in self.sections().items():
            lines.append(f"[{name}]")
            lines.extend(f"{k} = {v}" for k, v in items.items())
        return "\n".join(lines) + "\n"

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.render().encode()).hexdigest()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    if isinstance(v, (tuple, list)):
        return _fmt_list(v)
    return str(v)


def _fmt_list(v: Iterable) -> str:
    return ", ".join(str(x) for x in v)


def _ints(text: str) -> tuple:
    return tuple(int(t) for t in text.replace(",", " ").split())


_SWEEP_KEYS = {"n_grid", "replicates", "tie_tolerance", "certify"}
_BOX_KEYS = {"h0", "scale", "zero_fraction", "min_half_width", "growth", "cap", "max_vertices"}
_OUTPUT_KEYS = {"out", "threads"}


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    known = {"env", "dist", "sweep", "box", "checks", "output"}
    extra = set(cp.sections()) - known
    if extra:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(extra))}")
    kw: dict = {}
    try:
        if cp.has_section("env"):
            env = dict(cp["env"])
            _reject(env, {"dim", "mode", "master_seed"}, "env")
            if "dim" in env:
                kw["dim"] = int(env["dim"])
            if "mode" in env:
                kw["mode"] = env["mode"].strip()
            if "master_seed" in env:
                kw["master_seed"] = int(env["master_seed"], 0)
        if cp.has_section("dist"):
            dist = {}
            for k, v in cp["dist"].items():
                dist[k] = v.strip() if k == "family" else float(v)
            kw["dist"] = dist
        if cp.has_section("sweep"):
            sw = dict(cp["sweep"])
            _reject(sw, _SWEEP_KEYS, "sweep")
            if "n_grid" in sw:
                kw["n_grid"] = _ints(sw["n_grid"])
            if "replicates" in sw:
                kw["replicates"] = int(sw["replicates"])
            if "tie_tolerance" in sw:
                kw["tie_tolerance"] = float(sw["tie_tolerance"])
            if "certify" in sw:
                kw["certify"] = cp["sweep"].getboolean("certify")
        if cp.has_section("box"):
            bx = dict(cp["box"])
            _reject(bx, _BOX_KEYS, "box")
            bk = {}
            for k, v in bx.items():
                if k in ("h0", "max_vertices"):
                    bk[k] = int(v) if v.strip() else None
                elif k in ("scale", "zero_fraction"):
                    bk[k] = float(v)
                else:
                    bk[k] = int(v)
            kw["box"] = BoxPolicy(**bk)
        if cp.has_section("checks"):
            ck = {}
            defaults = ChecksConfig()
            for k, v in cp["checks"].items():
                if not hasattr(defaults, k):
                    raise ConfigError(f"unknown key [checks] {k}")
                ref = getattr(defaults, k)
                if isinstance(ref, tuple):
                    ck[k] = _ints(v)
                else:
                    ck[k] = type(ref)(float(v)) if isinstance(ref, int) else float(v)
            kw["checks"] = ChecksConfig(**ck)
        if cp.has_section("output"):
            out = dict(cp["output"])
            _reject(out, _OUTPUT_KEYS, "output")
            if out.get("threads", "").strip():
                kw["threads"] = int(out["threads"])
            if out.get("out", "").strip():
                kw["out"] = out["out"].strip()
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(**kw)


def _reject(items: Mapping, allowed: set, section: str) -> None:
    bad = set(items) - allowed
    if bad:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(bad))}")


def load_config(path: Optional[str]) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def header_lines(cfg: ExperimentConfig, version: str) -> list[str]:
    """Provenance block written as '#' comments at the top of CSV outputs."""
    lines = [f"brochette {version}", f"config_sha256 {cfg.digest}"]
    lines.extend(cfg.render().splitlines())
    return [f"# {ln}" for ln in lines]


def config_from_header(lines: Iterable[str]) -> Optional[ExperimentConfig]:
    """Rebuild the config echoed in a CSV header, or None when absent."""
    body = []
    seen = False
    for ln in lines:
        if not ln.startswith("#"):
            break
        text = ln[1:].strip()
        if text.startswith("config_sha256"):
            seen = True
            continue
        if seen:
            body.append(text)
    if not seen:
        return None
    return parse_config("\n".join(body))


def provenance(cfg: ExperimentConfig, version: str) -> dict:
    return {"version": version, "config_sha256": cfg.digest, "config": cfg.render()}
