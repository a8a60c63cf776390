"""Experiment configuration: a single JSON file with a documented schema.

Top-level keys:

  model      s (catalog name), noise (gaussian|uniform|rademacher),
             varsigma (>= 1, default 1), a, b (default 0, 1), y0 (default 0)
  sizes      list of sample sizes n (each >= 25)
  stability  eps in (0,1) (default 0.1), L > 0 (default 5.0)
  procedure  mu0 in (0,1) (default 0.5), delta in (0, 1/12] (default 1/12),
             k_star0 >= 0 (default 0)
  run        replications (default 200), base_seed (default 0),
             densities (default all three), out_dir (default "out"),
             workers (default 1; env SEQAR_WORKERS overrides),
             eval_points (default 1000)
"""

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Any

from .process import (NOISE_KINDS, ModelSpec, NoiseDensity, StabilityParams,
                      make_coefficient)
from .risk import ProcedureParams

DELTA_MAX = 1.0 / 12.0


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending key."""


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _get_number(section: dict, section_name: str, key: str, default=None) -> float:
    if key not in section:
        _require(default is not None, f"missing {section_name}.{key}")
        return default
    val = section[key]
    _require(isinstance(val, (int, float)) and not isinstance(val, bool),
             f"{section_name}.{key}: expected a number, got {val!r}")
    return float(val)


@dataclass
class ExperimentConfig:
    """Parsed and validated experiment description."""

    s_name: str
    noise_kind: str
    varsigma: float
    a: float
    b: float
    y0: float
    sizes: list[int]
    eps: float
    L: float
    mu0: float
    delta: float
    k_star0: float
    replications: int
    base_seed: int
    densities: list[str]
    out_dir: str
    workers: int
    eval_points: int
    raw: dict = field(repr=False, default_factory=dict)

    def model_spec(self, n: int) -> ModelSpec:
        return ModelSpec(a=self.a, b=self.b, n=n, S=make_coefficient(self.s_name),
                         noise=NoiseDensity(self.noise_kind, self.varsigma),
                         y0=self.y0)

    def stability(self) -> StabilityParams:
        return StabilityParams(eps=self.eps, L=self.L)

    def procedure(self) -> ProcedureParams:
        return ProcedureParams(mu0=self.mu0, delta=self.delta, k_star0=self.k_star0)

    def density_set(self) -> list[NoiseDensity]:
        return [NoiseDensity(k, self.varsigma) for k in self.densities]

    def resolved(self) -> dict:
        """Canonical dict of every resolved value (defaults filled in)."""
        return {
            "model": {"s": self.s_name, "noise": self.noise_kind,
                      "varsigma": self.varsigma, "a": self.a, "b": self.b,
                      "y0": self.y0},
            "sizes": list(self.sizes),
            "stability": {"eps": self.eps, "L": self.L},
            "procedure": {"mu0": self.mu0, "delta": self.delta,
                          "k_star0": self.k_star0},
            "run": {"replications": self.replications, "base_seed": self.base_seed,
                    "densities": list(self.densities), "out_dir": self.out_dir,
                    "workers": self.workers, "eval_points": self.eval_points},
        }

    def sha256(self) -> str:
        blob = json.dumps(self.resolved(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def parse_config(doc: Any) -> ExperimentConfig:
    """Validate a decoded JSON document and fill in defaults."""
    _require(isinstance(doc, dict), "config root must be a JSON object")
    _require("model" in doc, "missing model")
    model = doc["model"]
    _require(isinstance(model, dict), "model: expected an object")
    _require("s" in model, "missing model.s")
    s_name = model["s"]
    _require(isinstance(s_name, str), "model.s: expected a string")
    try:
        make_coefficient(s_name)
    except ValueError as exc:
        raise ConfigError(f"model.s: {exc}") from None
    _require("noise" in model, "missing model.noise")
    noise_kind = model["noise"]
    _require(noise_kind in NOISE_KINDS,
             f"model.noise: {noise_kind!r} not in {NOISE_KINDS}")
    varsigma = _get_number(model, "model", "varsigma", 1.0)
    _require(varsigma >= 1.0, "model.varsigma: must be >= 1")
    a = _get_number(model, "model", "a", 0.0)
    b = _get_number(model, "model", "b", 1.0)
    _require(a < b, "model.b: need a < b")
    y0 = _get_number(model, "model", "y0", 0.0)

    _require("sizes" in doc, "missing sizes")
    sizes_raw = doc["sizes"]
    _require(isinstance(sizes_raw, list) and len(sizes_raw) > 0,
             "sizes: expected a nonempty list")
    sizes = []
    for item in sizes_raw:
        _require(isinstance(item, int) and not isinstance(item, bool),
                 f"sizes: expected integers, got {item!r}")
        _require(item >= 25, f"sizes: every n must be >= 25, got {item}")
        sizes.append(item)

    stability = doc.get("stability", {})
    _require(isinstance(stability, dict), "stability: expected an object")
    eps = _get_number(stability, "stability", "eps", 0.1)
    _require(0.0 < eps < 1.0, "stability.eps: must lie in (0, 1)")
    L = _get_number(stability, "stability", "L", 5.0)
    _require(L > 0, "stability.L: must be positive")

    procedure = doc.get("procedure", {})
    _require(isinstance(procedure, dict), "procedure: expected an object")
    mu0 = _get_number(procedure, "procedure", "mu0", 0.5)
    _require(0.0 < mu0 < 1.0, "procedure.mu0: must lie in (0, 1)")
    delta = _get_number(procedure, "procedure", "delta", DELTA_MAX)
    _require(0.0 < delta <= DELTA_MAX,
             f"procedure.delta: must lie in (0, 1/12], got {delta}")
    k_star0 = _get_number(procedure, "procedure", "k_star0", 0.0)
    _require(k_star0 >= 0, "procedure.k_star0: must be >= 0")

    run = doc.get("run", {})
    _require(isinstance(run, dict), "run: expected an object")
    replications = int(_get_number(run, "run", "replications", 200))
    _require(replications >= 1, "run.replications: must be >= 1")
    base_seed = int(_get_number(run, "run", "base_seed", 0))
    densities = run.get("densities", list(NOISE_KINDS))
    _require(isinstance(densities, list) and len(densities) > 0,
             "run.densities: expected a nonempty list")
    for k in densities:
        _require(k in NOISE_KINDS, f"run.densities: {k!r} not in {NOISE_KINDS}")
    out_dir = run.get("out_dir", "out")
    _require(isinstance(out_dir, str), "run.out_dir: expected a string")
    workers = int(_get_number(run, "run", "workers", 1))
    env_workers = os.environ.get("SEQAR_WORKERS", "").strip()
    if env_workers:
        workers = int(env_workers)
    _require(workers >= 1, "run.workers: must be >= 1")
    eval_points = int(_get_number(run, "run", "eval_points", 1000))
    _require(eval_points >= 2, "run.eval_points: must be >= 2")

    return ExperimentConfig(
        s_name=s_name, noise_kind=noise_kind, varsigma=varsigma, a=a, b=b, y0=y0,
        sizes=sizes, eps=eps, L=L, mu0=mu0, delta=delta, k_star0=k_star0,
        replications=replications, base_seed=base_seed, densities=densities,
        out_dir=out_dir, workers=workers, eval_points=eval_points,
        raw=doc if isinstance(doc, dict) else {})


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as f:
            doc = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config parse error at line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}") from None
    return parse_config(doc)


def describe(cfg: ExperimentConfig) -> list[str]:
    """Human-readable listing of every resolved value (for the validate verb)."""
    res = cfg.resolved()
    lines = []
    for section in sorted(res):
        body = res[section]
        if isinstance(body, dict):
            for key in sorted(body):
                lines.append(f"{section}.{key} = {body[key]!r}")
        else:
            lines.append(f"{section} = {body!r}")
    return lines
