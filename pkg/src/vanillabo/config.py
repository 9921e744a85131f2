"""Flat ``key = value`` experiment configuration with named presets.

Syntax: one ``key = value`` per line, ``#`` starts a comment, blank lines
are ignored. Lists are comma separated. A ``preset = NAME`` line applies
the preset's values first; explicit keys override it regardless of order.
See ``KEYS`` for every accepted key, its type and its default.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass

from .acquisition import AcqConfig
from .benchmarks import Base, make_embedded
from .bo import BOConfig
from .complexity import ModelClassSpec, Variant
from .exceptions import ConfigError, ContractViolation
from .fit import (
    DEFAULT_NOISE_PRIOR,
    LEARNED_SIGNAL_PRIOR,
    FitConfig,
    FitMode,
    Fixed,
    Gamma,
    HyperpriorSpec,
    LogNormal,
    ScaledLogNormal,
)
from .gp import KernelFamily

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)
WORKERS_ENV = "VANILLABO_WORKERS"
EXECUTION_KEYS = ("workers",)  # affect scheduling only, excluded from the config hash


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_int(s: str):
    return None if s.strip().lower() in ("none", "auto", "") else int(s)


def _choice(*options):
    def parse(s: str) -> str:
        v = s.strip().lower()
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {s!r}")
        return v

    return parse


def _list(item):
    def parse(s: str):
        return tuple(item(p.strip()) for p in s.split(",") if p.strip())

    return parse


def _signal(s: str):
    v = s.strip().lower()
    return "learned" if v == "learned" else float(v)


# key -> (parser, default)
KEYS = {
    "benchmark": (_choice("hartmann6", "levy4"), "hartmann6"),
    "dim": (_opt_int, None),  # ambient dimension; None -> effective dimension
    "budget": (int, 100),
    "n_init": (_opt_int, None),  # None -> ceil(3 sqrt(D))
    "noise_std": (float, 0.01),
    "seed": (int, 0),
    "reps": (int, 1),
    "workers": (int, 1),
    "kernel": (_choice("matern52", "rbf"), "matern52"),
    "lengthscale_prior": (_choice("scaled_lognormal", "lognormal", "gamma"), "scaled_lognormal"),
    "ls_mu0": (float, SQRT2),
    "ls_sigma0": (float, SQRT3),
    "ls_gamma_alpha": (float, 3.0),
    "ls_gamma_beta": (float, 6.0),
    "ls_gamma_scale_dim": (_bool, False),
    "noise_prior_loc": (float, DEFAULT_NOISE_PRIOR.loc),
    "noise_prior_scale": (float, DEFAULT_NOISE_PRIOR.scale),
    "signal_variance": (_signal, 1.0),  # a float fixes it, "learned" puts LN(0, 1) on it
    "fit_mode": (_choice("map", "mle"), "map"),
    "fit_restarts": (int, 4),
    "fit_max_iterations": (int, 200),
    "acq_sobol": (int, 512),
    "acq_local": (int, 512),
    "acq_refine": (int, 4),
    "acq_local_scale": (float, 1e-3),
    "record_wall_time": (_bool, False),
    "mig_variants": (_list(_choice(*[v.value for v in Variant])), ("fixed", "scaled", "independent")),
    "mig_dims": (_list(int), (50, 100, 500)),
    "mig_n": (int, 1000),
    "mig_method": (_choice("sobol", "greedy"), "sobol"),
    "mig_family": (_choice("rbf", "matern52"), "rbf"),
    "mig_lengthscale": (float, 0.5),
    "mig_noise": (float, 1.0),
    "mig_signal": (float, 1.0),
    "mig_effective_dim": (int, 4),
    "prop1_yhat_min": (float, 0.1),
    "prop1_yhat_max": (float, 3.0),
    "prop1_points": (int, 30),
}


def _mode_preserving_mu(sigma0: float) -> float:
    # LogNormal mode is exp(mu - sigma^2): move mu with sigma^2 to keep it
    return SQRT2 + sigma0**2 - SQRT3**2


PRESETS: dict[str, dict[str, str]] = {
    "default": {},
    "complexity-low": {"ls_mu0": repr(SQRT2 + 0.5)},
    "complexity-high": {"ls_mu0": repr(SQRT2 - 0.5)},
    "uncertainty-low": {"ls_sigma0": "1.0", "ls_mu0": repr(_mode_preserving_mu(1.0))},
    "uncertainty-high": {"ls_sigma0": "2.0", "ls_mu0": repr(_mode_preserving_mu(2.0))},
    "gamma-map": {"lengthscale_prior": "gamma", "signal_variance": "learned"},
    "mle": {"fit_mode": "mle", "signal_variance": "learned"},
    "learned-signal": {"signal_variance": "learned"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict
    preset: str = "default"

    def __getitem__(self, key):
        return self.values[key]

    def canonical(self) -> str:
        lines = [f"preset = {self.preset}"]
        for k in sorted(self.values):
            if k in EXECUTION_KEYS:
                continue
            v = self.values[k]
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def with_overrides(self, **kw) -> "ExperimentConfig":
        values = dict(self.values)
        for k, v in kw.items():
            if k not in KEYS:
                raise ConfigError(k, "unknown key")
            values[k] = v
        out = ExperimentConfig(values, self.preset)
        validate(out)
        return out

    def benchmark(self, seed: int):
        base = Base(self["benchmark"])
        dim = self["dim"] or base.effective_dim
        return make_embedded(base, dim, seed=seed, noise_std=self["noise_std"])

    def priors(self) -> HyperpriorSpec:
        v = self.values
        if v["lengthscale_prior"] == "scaled_lognormal":
            ls = ScaledLogNormal(v["ls_mu0"], v["ls_sigma0"])
        elif v["lengthscale_prior"] == "lognormal":
            ls = LogNormal(v["ls_mu0"], v["ls_sigma0"])
        else:
            ls = Gamma(v["ls_gamma_alpha"], v["ls_gamma_beta"], v["ls_gamma_scale_dim"])
        noise = LogNormal(v["noise_prior_loc"], v["noise_prior_scale"])
        sig = v["signal_variance"]
        signal = LEARNED_SIGNAL_PRIOR if sig == "learned" else Fixed(float(sig))
        return HyperpriorSpec(ls, noise, signal)

    def bo_config(self, seed: int) -> BOConfig:
        v = self.values
        return BOConfig(
            budget=v["budget"],
            priors=self.priors(),
            acq=AcqConfig(v["acq_sobol"], v["acq_local"], v["acq_refine"], v["acq_local_scale"]),
            fit=FitConfig(v["fit_restarts"], v["fit_max_iterations"], mode=FitMode(v["fit_mode"])),
            kernel=KernelFamily(v["kernel"]),
            seed=seed,
            n_init=v["n_init"],
        )

    def model_classes(self) -> list[ModelClassSpec]:
        v = self.values
        return [
            ModelClassSpec(
                variant=name,
                family=v["mig_family"],
                signal_variance=v["mig_signal"],
                noise_variance=v["mig_noise"],
                lengthscale=v["mig_lengthscale"],
                effective_dim=v["mig_effective_dim"],
                seed=v["seed"],
            )
            for name in v["mig_variants"]
        ]

    def worker_count(self) -> int:
        env = os.environ.get(WORKERS_ENV)
        if env:
            try:
                n = int(env)
            except ValueError:
                raise ConfigError(WORKERS_ENV, f"not an integer: {env!r}") from None
            if n < 1:
                raise ConfigError(WORKERS_ENV, "must be >= 1")
            return n
        return self["workers"]


def _positive(key, values, strict=True):
    v = values[key]
    if (v <= 0) if strict else (v < 0):
        raise ConfigError(key, f"must be {'>' if strict else '>='} 0, got {v}")


def validate(cfg: ExperimentConfig) -> None:
    v = cfg.values
    for key in ("budget", "reps", "workers", "fit_restarts", "fit_max_iterations", "acq_sobol",
                "acq_local", "acq_refine", "mig_n", "prop1_points", "mig_effective_dim"):
        _positive(key, v)
    for key in ("ls_sigma0", "ls_gamma_alpha", "ls_gamma_beta", "noise_prior_scale",
                "acq_local_scale", "mig_lengthscale", "mig_noise", "mig_signal", "prop1_yhat_min"):
        _positive(key, v)
    _positive("noise_std", v, strict=False)
    if v["seed"] < 0:
        raise ConfigError("seed", "must be >= 0")
    if v["signal_variance"] != "learned" and not v["signal_variance"] > 0:
        raise ConfigError("signal_variance", "must be > 0 or 'learned'")
    if v["prop1_yhat_max"] < v["prop1_yhat_min"]:
        raise ConfigError("prop1_yhat_max", "must be >= prop1_yhat_min")
    base = Base(v["benchmark"])
    if v["dim"] is not None and v["dim"] < base.effective_dim:
        raise ConfigError(
            "dim", f"ambient dimension {v['dim']} is below the effective dimension {base.effective_dim}"
        )
    dim = v["dim"] or base.effective_dim
    if v["n_init"] is not None:
        _positive("n_init", v)
    n_init = cfg.bo_config(0).init_size(dim) if v["n_init"] is None else v["n_init"]
    if v["budget"] < n_init:
        raise ConfigError("budget", f"{v['budget']} is below the initial design size {n_init}")
    if v["acq_refine"] > v["acq_sobol"] + v["acq_local"]:
        raise ConfigError("acq_refine", "exceeds the number of raw candidates")
    if not v["mig_variants"]:
        raise ConfigError("mig_variants", "empty list")
    if not v["mig_dims"] or min(v["mig_dims"]) < 1:
        raise ConfigError("mig_dims", "dimensions must be >= 1")
    if "rembo" in v["mig_variants"] and min(v["mig_dims"]) < v["mig_effective_dim"]:
        raise ConfigError("mig_dims", "below mig_effective_dim for rembo")
    try:
        cfg.priors()
    except ContractViolation as exc:
        raise ConfigError("lengthscale_prior", str(exc)) from None


def from_mapping(raw: dict[str, str], preset: str = "default") -> ExperimentConfig:
    """Build a config from string values, applying defaults and a preset."""
    if preset not in PRESETS:
        raise ConfigError("preset", f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
    merged = {**PRESETS[preset], **raw}
    values = {}
    for key, (parse, default) in KEYS.items():
        if key in merged:
            try:
                values[key] = parse(str(merged[key]))
            except ValueError as exc:
                raise ConfigError(key, str(exc)) from None
        else:
            values[key] = default
    for key in merged:
        if key not in KEYS:
            raise ConfigError(key, "unknown key")
    cfg = ExperimentConfig(values, preset)
    validate(cfg)
    return cfg


def parse_text(text: str) -> ExperimentConfig:
    raw: dict[str, str] = {}
    preset = "default"
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line, f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key in raw or (key == "preset" and preset != "default"):
            raise ConfigError(key, f"line {lineno}: duplicate key")
        if key == "preset":
            preset = value
        else:
            raw[key] = value
    return from_mapping(raw, preset)


def parse_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_text(fh.read())


def default_config() -> ExperimentConfig:
    return from_mapping({})
