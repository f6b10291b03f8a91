"""Flat ``key = value`` run configuration.

One key per line, ``#`` starts a comment, lists are comma separated and
``none`` stands for an unset optional value.  Unknown keys are rejected.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from types import SimpleNamespace

from .errors import ConfigError
from .jumps import JumpConfig
from .mesh import BC_KINDS, Mesh
from .potential import PotentialSplit
from .stepper import SCENARIOS, SchemeConfig
from .wiener import WienerConfig


@dataclass
class RunConfig:
    run_id: str = "run"
    scenario: str = "random_half"
    init_amplitude: float = 0.05
    # mesh
    n: int = 64
    bc: str = "neumann"
    # scheme
    tau: float = 0.05
    t_final: float = 4.0
    eps: float = 0.000625
    mode: str = "exact_barrier"
    lam: float | None = None
    splitting: str = "implicit_f1"
    newton_tol: float = 1e-10
    newton_max_iter: int = 60
    # potential
    theta: float = 0.5
    theta0: float = 1.0
    L: float = 1.0
    f1_coeff: float = 4.0
    # Wiener noise
    c_noise: float = 0.5
    alpha: float = 0.125
    n_modes: int = 16
    # jumps
    lambda_jump: float = 0.0
    sigma_track: float = 0.1
    amplitude: str = "bilinear"
    amplitude_scale: float = 0.5
    compensated: bool = True
    compensator_in_f2: bool = False
    # run control and output
    seed: int = 0
    realizations: int = 1
    workers: int = 1
    snapshots: list = field(default_factory=list)
    record_events: bool = True
    write_pgm: bool = False
    write_vtk: bool = False

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def validate(self):
        """Build every component once so that invalid values surface early."""
        self.build()
        return self

    def build(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}", "scenario")
        if self.bc not in BC_KINDS:
            raise ConfigError(f"bc must be one of {BC_KINDS}", "bc")
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1", "realizations")
        parts = {}
        for name, make, keys in (
            ("split", lambda: PotentialSplit(self.theta, self.theta0, self.L, self.f1_coeff),
             "theta"),
            ("scheme", lambda: SchemeConfig(
                tau=self.tau, t_final=self.t_final, eps=self.eps, mode=self.mode,
                lam=self.lam, splitting=self.splitting, newton_tol=self.newton_tol,
                newton_max_iter=self.newton_max_iter), "tau"),
            ("wiener", lambda: WienerConfig(self.c_noise, self.alpha, self.n_modes), "c_noise"),
            ("jump", lambda: JumpConfig(
                self.lambda_jump, self.sigma_track, self.amplitude, self.amplitude_scale,
                self.compensated, self.compensator_in_f2), "lambda_jump"),
            ("mesh", lambda: Mesh(self.n, self.bc), "n"),
        ):
            try:
                parts[name] = make()
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"{keys}-group: {exc}", _guess_key(str(exc), keys)) from exc
        parts["scheme"].check_split(parts["split"])
        return SimpleNamespace(**parts)


def _guess_key(message, default):
    for f in dataclasses.fields(RunConfig):
        if message.startswith(f.name) or f" {f.name} " in f" {message} ":
            return f.name
    return default


def _field_types():
    return {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(key, kind, text):
    text = text.strip()
    try:
        if kind == "str":
            return text
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "float | None":
            return None if text.lower() == "none" else float(text)
        if kind == "bool":
            return _parse_bool(text)
        if kind == "list":
            return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {exc}", key) from exc
    raise ConfigError(f"no converter for {key!r}", key)


# written into manifests next to the configuration; ignored when a manifest is
# read back as a config so that a run can be repeated from its manifest
PROVENANCE_KEYS = ("code_version", "numpy_version", "python_version", "status", "failure",
                   "failed_realizations")


def parse_config(text, validate=True):
    types = _field_types()
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'", None)
        key, value = (s.strip() for s in line.split("=", 1))
        if key in PROVENANCE_KEYS:
            continue
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}", key)
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}", key)
        values[key] = _convert(key, types[key], value)
    cfg = RunConfig(**values)
    return cfg.validate() if validate else cfg


def load_config(path, validate=True):
    return parse_config(Path(path).read_text(), validate=validate)


def _format(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ",".join(repr(float(v)) for v in value)
    return str(value)


def serialize_config(cfg):
    return "".join(f"{f.name} = {_format(getattr(cfg, f.name))}\n"
                   for f in dataclasses.fields(RunConfig))


def bundled_configs():
    """Names of the recipe configs shipped with the package."""
    root = resources.files("stochac") / "configs"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".cfg"))


def bundled_config(name, validate=True):
    if not name.endswith(".cfg"):
        name += ".cfg"
    text = (resources.files("stochac") / "configs" / name).read_text()
    return parse_config(text, validate=validate)
