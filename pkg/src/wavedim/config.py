"""TOML configuration: parsing and model construction.

Schema (every table optional)::

    [domain]
    sides = ["pi"]            # numbers or multiples of pi such as "2pi", "0.5*pi"

    [model]
    scenario = "rotational"   # linear | gradient_cubic | rotational | custom
    gamma = 0.1
    M = 64                    # omitted: chosen from gamma and b
    N = 2
    b = 1.0                   # rotational strength
    a = 0.0                   # real shift used by the mode counter
    kappa = 0.0               # gradient_cubic: F0 = |u|^4/4 - kappa |u|^2/2
    potential = [{exponents = [4], coef = 0.25}]   # custom F0 monomials
    forcing = [{mode = 1, component = 1, value = 0.5}]

    [run]
    dt = 0.0078125            # omitted: the largest resolved step
    T = 50.0
    t_burn = 0.0
    stride = 8
    energy = 1.0              # energy norm of the seeded initial state

    [lyapunov]
    k = 8
    T = 100.0
    qr_interval = 0.5
    method = "auto"           # auto | frozen | trajectory
    epsilon = 0.025           # omitted: min(gamma/4, lambda_1/(2 gamma))
    t_burn = 200.0            # omitted: 20/gamma
    start = "random"          # random | zero

    [sweep]
    gammas = [0.2, 0.1, 0.05, 0.025]
    seeds = [0]
    T_sample = 20.0
    k_trajectory = 64
    T_equilibrium = 200.0
"""
from __future__ import annotations

import math
import re
from pathlib import Path

import numpy as np
import tomli

from .dynamics import GalerkinModel, NonlinearitySpec
from .spectral import Domain, build_spectrum, spectrum_below

SCENARIOS = ("linear", "gradient_cubic", "rotational", "custom")


class ConfigError(ValueError):
    pass


def read_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


_PI = re.compile(r"^\s*([0-9.eE+-]*)\s*\*?\s*pi\s*$")


def parse_length(value) -> float:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, str):
        m = _PI.match(value)
        if m:
            return (float(m.group(1)) if m.group(1) else 1.0) * math.pi
        try:
            return float(value)
        except ValueError:
            pass
    raise ConfigError(f"cannot read a length from {value!r}")


def domain_from(cfg: dict) -> Domain:
    sides = cfg.get("domain", {}).get("sides", ["pi"])
    if not isinstance(sides, list):
        sides = [sides]
    try:
        return Domain(tuple(parse_length(s) for s in sides))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def default_mode_count(domain: Domain, gamma: float, b: float = 1.0) -> int:
    """At least 64 modes and four times the band of potentially unstable modes."""
    if domain.d == 1:
        lam1 = (math.pi / domain.length) ** 2
        return max(64, 4 * math.ceil(abs(b) / (gamma * math.sqrt(lam1))))
    band = spectrum_below(domain, (abs(b) / gamma) ** 2)
    count = band.M if band.lambdas[0] < (abs(b) / gamma) ** 2 else 0
    return max(64, 4 * count)


def nonlinearity_from(model: dict, gamma: float, M: int) -> NonlinearitySpec:
    scenario = model.get("scenario", "linear")
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    N = int(model.get("N", 2 if scenario == "rotational" else 1))
    forcing = None
    if model.get("forcing"):
        forcing = np.zeros((M, N))
        for entry in model["forcing"]:
            j, r = int(entry["mode"]) - 1, int(entry.get("component", 1)) - 1
            if not (0 <= j < M and 0 <= r < N):
                raise ConfigError(f"forcing entry {entry} outside the {M}x{N} coefficient block")
            forcing[j, r] = float(entry["value"])
    try:
        if scenario == "linear":
            return NonlinearitySpec(N=N, gamma=gamma, forcing=forcing)
        if scenario == "gradient_cubic":
            return NonlinearitySpec.quartic(gamma, float(model.get("kappa", 0.0)), N, forcing=forcing)
        if scenario == "rotational":
            if N != 2:
                raise ConfigError("the rotational scenario needs N = 2")
            return NonlinearitySpec.rotational_example(gamma, float(model.get("b", 1.0)),
                                                       forcing=forcing)
        pot = {tuple(t["exponents"]): float(t["coef"]) for t in model.get("potential", [])}
        return NonlinearitySpec(N=N, potential=pot, gamma=gamma,
                                rotational=bool(model.get("rotational", False)),
                                b=float(model.get("b", 1.0)), forcing=forcing)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed [model] table: {exc}") from exc


def model_from(cfg: dict, gamma: float | None = None) -> GalerkinModel:
    model = cfg.get("model", {})
    gamma = float(model.get("gamma", 0.1)) if gamma is None else gamma
    if gamma <= 0:
        raise ConfigError(f"gamma must be positive, got {gamma}")
    domain = domain_from(cfg)
    M = int(model.get("M") or default_mode_count(domain, gamma, float(model.get("b", 1.0))))
    try:
        spec = nonlinearity_from(model, gamma, M)
        return GalerkinModel(domain, M, spec)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def spectrum_from(cfg: dict, M: int | None = None, N: int | None = None):
    model = cfg.get("model", {})
    return build_spectrum(domain_from(cfg), int(M or model.get("M", 16)), int(N or model.get("N", 1)))


def load(path: str | Path | None) -> dict:
    return read_toml(path) if path else {}
