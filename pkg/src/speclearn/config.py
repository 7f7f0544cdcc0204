"""Run configuration: a strict YAML document with problem, sampling,
network, optimizer, and paths blocks.

Unknown keys are errors, not warnings: a silently ignored typo in nu or dt
would invalidate an experiment.  Omitted fields fall back to the published
per-family defaults.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .network import LayerSpec
from .sampling import (
    GrfSpec,
    InputSample,
    sample_advection_coefficient,
    sample_cde_initial,
    sample_forcing_dre,
    sample_grf_periodic,
)
from .solvers import FAMILIES, PdeProblem, cached_basis
from .training import TrainSettings

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "config_digest", "sample_inputs"]


class ConfigError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


_SAMPLING_DEFAULTS = {
    "diffusion_reaction": dict(kind="sq_exp", sigma=25.0, ell=0.2, p_train=2000, p_test=2000),
    "burgers": dict(kind="grf_periodic", sigma=25.0, tau=5.0, gamma=2.0, p_train=2000, p_test=2000),
    "advection": dict(kind="grf_shifted", sigma=30.0, tau=8.0, gamma=2.0, p_train=2000, p_test=2000),
    "convection_diffusion_bl": dict(kind="uniform_modes", p_train=2000, p_test=2000),
    "kse_2d": dict(kind="grf_periodic", sigma=4.0, tau=2.0, gamma=2.5, p_train=3000, p_test=1000),
    "nse_2d": dict(kind="grf_periodic", sigma=9.0, tau=3.0, gamma=2.5, p_train=2000, p_test=1000),
}

_BLOCK_KEYS = {
    "problem": {"family", "nu", "mu", "reynolds", "N", "dt", "T", "Q", "R"},
    "sampling": {"kind", "sigma", "tau", "gamma", "ell", "p_train", "p_test", "seed"},
    "network": {"init_seed", "layers"},
    "optimizer": {
        "method",
        "memory",
        "c1",
        "c2",
        "plateau_window",
        "plateau_eps",
        "max_iters",
        "ls_max_evals",
        "adam_lr",
    },
    "paths": {"out_dir"},
}
_LAYER_KEYS = {"kind", "width", "kernel", "activation"}


@dataclass
class RunConfig:
    problem: PdeProblem
    sampling: dict
    network_layers: tuple[LayerSpec, ...] | None
    init_seed: int
    optimizer: TrainSettings
    out_dir: Path
    raw: dict

    @property
    def digest(self) -> str:
        return config_digest(self.raw)


def config_digest(raw: dict) -> str:
    return hashlib.sha256(
        json.dumps(raw, sort_keys=True, default=str).encode()
    ).hexdigest()


def _check_keys(block: str, mapping: dict):
    if not isinstance(mapping, dict):
        raise ConfigError("E_CONFIG_INVALID", f"{block} must be a mapping")
    unknown = set(mapping) - _BLOCK_KEYS[block]
    if unknown:
        raise ConfigError(
            "E_CONFIG_UNKNOWN_KEY",
            f"unknown key(s) in {block}: {', '.join(sorted(unknown))}",
        )


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("E_CONFIG_INVALID", "top level must be a mapping")
    unknown = set(raw) - set(_BLOCK_KEYS)
    if unknown:
        raise ConfigError(
            "E_CONFIG_UNKNOWN_KEY",
            f"unknown top-level key(s): {', '.join(sorted(unknown))}",
        )
    prob = raw.get("problem")
    if prob is None:
        raise ConfigError("E_CONFIG_MISSING", "problem block is required")
    _check_keys("problem", prob)
    family = prob.get("family")
    if family not in FAMILIES:
        raise ConfigError(
            "E_CONFIG_INVALID", f"problem.family must be one of {', '.join(FAMILIES)}"
        )
    overrides = {k: v for k, v in prob.items() if k != "family"}
    try:
        problem = PdeProblem.defaults(family, **overrides)
    except (ValueError, TypeError) as err:
        raise ConfigError("E_CONFIG_INVALID", str(err)) from err

    sampling = dict(_SAMPLING_DEFAULTS[family])
    sampling["seed"] = 0
    user_sampling = raw.get("sampling", {}) or {}
    _check_keys("sampling", user_sampling)
    sampling.update(user_sampling)
    for key in ("p_train", "p_test"):
        if not isinstance(sampling[key], int) or sampling[key] < 1:
            raise ConfigError("E_CONFIG_INVALID", f"sampling.{key} must be a positive integer")

    network = raw.get("network", {}) or {}
    _check_keys("network", network)
    layers = None
    if "layers" in network and network["layers"] is not None:
        specs = []
        for i, item in enumerate(network["layers"]):
            if not isinstance(item, dict):
                raise ConfigError("E_CONFIG_INVALID", f"network.layers[{i}] must be a mapping")
            bad = set(item) - _LAYER_KEYS
            if bad:
                raise ConfigError(
                    "E_CONFIG_UNKNOWN_KEY",
                    f"unknown key(s) in network.layers[{i}]: {', '.join(sorted(bad))}",
                )
            try:
                specs.append(LayerSpec(**item))
            except (ValueError, TypeError) as err:
                raise ConfigError("E_CONFIG_INVALID", str(err)) from err
        layers = tuple(specs)
    init_seed = network.get("init_seed", 0)

    opt = raw.get("optimizer", {}) or {}
    _check_keys("optimizer", opt)
    try:
        settings = TrainSettings(**opt)
    except TypeError as err:
        raise ConfigError("E_CONFIG_INVALID", str(err)) from err
    if settings.method not in ("lbfgs", "adam"):
        raise ConfigError("E_CONFIG_INVALID", "optimizer.method must be lbfgs or adam")

    paths = raw.get("paths", {}) or {}
    _check_keys("paths", paths)
    if "out_dir" in paths:
        out_dir = Path(paths["out_dir"])
    else:
        out_dir = Path("runs") / family

    return RunConfig(
        problem=problem,
        sampling=sampling,
        network_layers=layers,
        init_seed=init_seed,
        optimizer=settings,
        out_dir=out_dir,
        raw=raw,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError("E_MISSING_FILE", str(path))
    with open(path) as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as err:
            raise ConfigError("E_CONFIG_PARSE", str(err)) from err
    return parse_config(raw)


def sample_inputs(cfg: RunConfig, split: str) -> list[InputSample]:
    """Draw the dataset for one split deterministically from the config.

    Train and test draws come from disjoint index ranges of the same keyed
    stream, so regenerating either split is reproducible and they never
    overlap.
    """
    if split not in ("train", "test"):
        raise ConfigError("E_CONFIG_INVALID", f"unknown split {split!r}")
    s = cfg.sampling
    count = s["p_train"] if split == "train" else s["p_test"]
    offset = 0 if split == "train" else s["p_train"]
    family = cfg.problem.family
    N = cfg.problem.N
    kind = s["kind"]
    out = []
    if kind == "sq_exp":
        for i in range(count):
            out.append(
                sample_forcing_dre(
                    s["seed"], N, sigma=s["sigma"], ell=s["ell"], index=offset + i
                )
            )
    elif kind == "uniform_modes":
        basis = cached_basis(N, corrector_nu=cfg.problem.nu)
        for i in range(count):
            out.append(sample_cde_initial(s["seed"], basis, index=offset + i))
    else:
        dims = 2 if family in ("kse_2d", "nse_2d") else 1
        spec = GrfSpec(
            sigma=s["sigma"],
            tau=s["tau"],
            gamma=s["gamma"],
            dims=dims,
            N=N,
            seed=s["seed"],
        )
        sampler = (
            sample_advection_coefficient if kind == "grf_shifted" else sample_grf_periodic
        )
        for i in range(count):
            out.append(sampler(spec, index=offset + i))
    for sample in out:
        sample.problem_tag = family
    return out
