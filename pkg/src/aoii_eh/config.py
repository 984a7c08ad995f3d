"""Flat ``key = value`` experiment configuration.

Blank lines and ``#`` comments are ignored.  List-valued keys take
comma-separated values.  Unknown keys are rejected so typos fail loudly.

Keys and defaults::

    p = 0.7                 # source self-transition probability
    mu = 0.5                # energy arrival probability
    cap_e = 10              # battery capacity
    c_s = 1                 # sampling cost
    c_t = 1                 # transmission cost
    n_max = 20              # AoI truncation bound
    objective = aoii        # aoii | aoi
    epsilon = 1e-9          # RVI span tolerance
    max_iters = 1000000
    ref_e = 0               # RVI reference state
    ref_theta = 1
    damping = 0             # aperiodicity damping, 0 disables
    horizon = 1000000       # slots per replication
    replications = 5
    seed = 0
    burn_in = 0.01          # fraction of the horizon discarded
    batches = 20            # batch means per replication
    sweep_n = 2,5,10,15,20,25,30
    sweep_p = 0.6,0.7,0.8,0.9
    sweep_mu =              # empty: use mu
    stability_tol = 1e-3    # sweep-n flatness tolerance
    baseline_objective = aoi
    baseline_transmit = always   # always | on_mismatch
    tiny_oracle = false     # solve also runs the enumeration oracle
    threads = 1
    out_dir = out
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from aoii_eh.mdp import Objective, TransmitRule
from aoii_eh.model import MdpState, ModelParams


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    p: float = 0.7
    mu: float = 0.5
    cap_e: int = 10
    c_s: int = 1
    c_t: int = 1
    n_max: int = 20
    objective: Objective = Objective.AOII
    epsilon: float = 1e-9
    max_iters: int = 1_000_000
    ref_e: int = 0
    ref_theta: int = 1
    damping: float = 0.0
    horizon: int = 1_000_000
    replications: int = 5
    seed: int = 0
    burn_in: float = 0.01
    batches: int = 20
    sweep_n: list[int] = field(default_factory=lambda: [2, 5, 10, 15, 20, 25, 30])
    sweep_p: list[float] = field(default_factory=lambda: [0.6, 0.7, 0.8, 0.9])
    sweep_mu: list[float] = field(default_factory=list)
    stability_tol: float = 1e-3
    baseline_objective: Objective = Objective.AOI
    baseline_transmit: TransmitRule = TransmitRule.ALWAYS
    tiny_oracle: bool = False
    threads: int = 1
    out_dir: Path = Path("out")

    def params(self, **overrides) -> ModelParams:
        fields = dict(
            p=self.p, mu=self.mu, cap_e=self.cap_e, c_s=self.c_s, c_t=self.c_t, n_max=self.n_max
        )
        fields.update(overrides)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                return ModelParams(**fields)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def ref_state(self) -> MdpState:
        return MdpState(self.ref_e, self.ref_theta)

    def validate(self) -> ExperimentConfig:
        base = self.params()
        if not (0 <= self.ref_e <= base.cap_e) or not (1 <= self.ref_theta <= base.n_max):
            raise ConfigError(f"reference state {tuple(self.ref_state)} outside the state space")
        for n in self.sweep_n:
            self.params(n_max=n)
        for p in self.sweep_p:
            self.params(p=p)
        for mu in self.sweep_mu:
            self.params(mu=mu)
        if self.epsilon <= 0 or self.max_iters < 1:
            raise ConfigError("epsilon must be positive and max_iters >= 1")
        if not (0.0 <= self.damping < 1.0):
            raise ConfigError("damping must lie in [0, 1)")
        if self.horizon < 1 or self.replications < 1 or self.batches < 2:
            raise ConfigError("horizon, replications must be >= 1 and batches >= 2")
        if not (0.0 <= self.burn_in < 1.0):
            raise ConfigError("burn_in must lie in [0, 1)")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        return self

    def as_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (Objective, TransmitRule)):
                v = v.value
            elif isinstance(v, Path):
                v = str(v)
            out[f.name] = v
        return out


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_INT = {"cap_e", "c_s", "c_t", "n_max", "max_iters", "ref_e", "ref_theta", "horizon",
        "replications", "seed", "batches", "threads"}
_FLOAT = {"p", "mu", "epsilon", "damping", "burn_in", "stability_tol"}


def _parse_int(key: str, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def _parse_float(key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None


def _parse_bool(key: str, text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def parse_value(key: str, text: str):
    if key not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    text = text.strip()
    if key in _INT:
        return _parse_int(key, text)
    if key in _FLOAT:
        return _parse_float(key, text)
    if key in ("sweep_n", "sweep_p", "sweep_mu"):
        items = [t.strip() for t in text.split(",") if t.strip()]
        parse = _parse_int if key == "sweep_n" else _parse_float
        return [parse(key, t) for t in items]
    if key in ("objective", "baseline_objective"):
        try:
            return Objective(text.lower())
        except ValueError:
            raise ConfigError(f"{key}: expected aoii or aoi, got {text!r}") from None
    if key == "baseline_transmit":
        try:
            return TransmitRule(text.lower())
        except ValueError:
            raise ConfigError(f"{key}: expected always or on_mismatch, got {text!r}") from None
    if key == "tiny_oracle":
        return _parse_bool(key, text)
    if key == "out_dir":
        return Path(text)
    raise AssertionError(key)


def parse_lines(lines) -> dict:
    values = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, text = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = parse_value(key, text)
    return values


def load_config(path: str | Path | None = None, overrides: dict | None = None,
                **defaults) -> ExperimentConfig:
    """Defaults, then ``defaults``, then the file, then ``overrides``."""
    values = dict(defaults)
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        values.update(parse_lines(text.splitlines()))
    values.update(overrides or {})
    return ExperimentConfig(**values).validate()
