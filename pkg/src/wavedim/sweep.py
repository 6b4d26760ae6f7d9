"""Gamma sweeps: dimension estimates, unstable mode counts and closed-form bounds.

The attractor-dimension proxy is the Kaplan-Yorke dimension of the Galerkin
system, taken as the larger of the value at the zero equilibrium (when it
is one) and the value along a post-burn-in trajectory.
"""
from __future__ import annotations

import copy
import hashlib
import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    Fit,
    loglog_fit,
    unstable_count_on,
    upper_bound_d1,
    upper_bound_d1_simple,
    upper_bound_d2,
    upper_bound_d3plus,
)
from .config import SCENARIOS, ConfigError, domain_from, model_from
from .dynamics import estimate_Bd, simulate
from .lyapunov import ConvergenceWarning, _is_equilibrium, compute_exponents

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = (
    "gamma", "seed", "status", "M", "mode_count", "lower_proxy", "ky_dimension",
    "ky_equilibrium", "ky_trajectory", "top_exponent", "B_d", "d1_root", "d1_majorant",
    "d1_simple", "d2_bound", "d3_bound", "error",
)
N_TOP = 8
N_Q = 32


class SweepError(RuntimeError):
    """Every gamma point of a sweep failed."""


@dataclass(frozen=True)
class SweepConfig:
    """Full description of a sweep; ``cfg`` is the TOML document minus ``[sweep]``."""

    gammas: tuple[float, ...]
    cfg: dict
    seeds: tuple[int, ...] = (0,)
    T_sample: float = 20.0
    k_trajectory: int = 64
    T_equilibrium: float = 200.0

    def __post_init__(self):
        g = tuple(float(x) for x in self.gammas)
        if not g or min(g) <= 0:
            raise ConfigError("gamma values must be positive")
        if any(a <= b for a, b in zip(g, g[1:])):
            raise ConfigError("gamma values must be sorted strictly descending")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        scenario = self.cfg.get("model", {}).get("scenario", "linear")
        if scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {scenario!r}")
        object.__setattr__(self, "gammas", g)
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    @classmethod
    def from_dict(cls, doc: dict, seed: int | None = None) -> "SweepConfig":
        doc = copy.deepcopy(doc)
        sw = doc.pop("sweep", {})
        if "gammas" not in sw:
            raise ConfigError("[sweep] needs a gammas list")
        seeds = [seed] if seed is not None else sw.get("seeds", [0])
        return cls(
            gammas=tuple(sw["gammas"]),
            cfg=doc,
            seeds=tuple(seeds),
            T_sample=float(sw.get("T_sample", 20.0)),
            k_trajectory=int(sw.get("k_trajectory", 64)),
            T_equilibrium=float(sw.get("T_equilibrium", 200.0)),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gammas"], d["seeds"] = list(self.gammas), list(self.seeds)
        return d

    @property
    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class RunRecord:
    config_hash: str
    config: dict
    results: list[dict]
    version: str = __version__
    timestamps: dict = field(default_factory=dict)

    def payload(self) -> dict:
        """Everything except the timestamps."""
        return {"config_hash": self.config_hash, "config": self.config,
                "results": self.results, "version": self.version}

    def to_dict(self) -> dict:
        return {**self.payload(), "timestamps": self.timestamps}

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(d["config_hash"], d["config"], d["results"], d.get("version", ""),
                   d.get("timestamps", {}))

    @property
    def failed(self) -> list[dict]:
        return [r for r in self.results if r["status"] != "ok"]


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _bounds(d: int, gamma: float, N: int, domain, Bd: float) -> dict:
    out = dict.fromkeys(("d1_root", "d1_majorant", "d1_simple", "d2_bound", "d3_bound"))
    if d == 1:
        root, maj = upper_bound_d1(gamma, N, domain.length, Bd)
        out.update(d1_root=root, d1_majorant=maj,
                   d1_simple=upper_bound_d1_simple(gamma, N, domain.length, Bd))
    elif d == 2:
        out["d2_bound"] = upper_bound_d2(gamma, N, domain.measure, Bd)
    else:
        out["d3_bound"] = upper_bound_d3plus(gamma, N, d, Bd).upper_bound
    return out


def run_point(config: SweepConfig, gamma: float, seed: int) -> dict:
    """One gamma point; failures are caught and reported in the result."""
    row = {"gamma": gamma, "seed": seed, "status": "ok", "error": None}
    try:
        row.update(_run_point(config, gamma, seed))
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        log.warning("gamma=%s seed=%s failed: %s", gamma, seed, exc)
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    return row


def _run_point(config: SweepConfig, gamma: float, seed: int) -> dict:
    cfg = config.cfg
    model = model_from(cfg, gamma)
    domain = model.domain
    run = cfg.get("run", {})
    ly = cfg.get("lyapunov", {})
    qr = float(ly.get("qr_interval", 0.5))
    dt = float(run.get("dt") or qr / math.ceil(qr / model.max_dt() - 1e-9))
    t_burn = float(ly.get("t_burn", 20.0 / gamma))
    stride = int(run.get("stride", 8))
    xi0 = model.random_state(float(run.get("energy", 1.0)), seed=seed)
    traj = simulate(xi0, model, config.T_sample, dt, stride=stride, t_burn=t_burn)
    Bd = estimate_Bd(model, traj)

    T = float(ly.get("T", 20.0))
    ky_eq = None
    zero = model.zero_state()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        if _is_equilibrium(model, zero):
            eq = compute_exponents(model, zero, model.dim, config.T_equilibrium, qr_interval=qr,
                                   method="frozen", seed=seed)
            ky_eq = eq.ky_dimension
        k = min(config.k_trajectory, model.dim)
        tr = compute_exponents(model, traj.final, k, T, qr_interval=qr, dt=dt, t_burn=0.0,
                               method="trajectory", seed=seed)
    ky = max(tr.ky_dimension, ky_eq if ky_eq is not None else -math.inf)

    spec = model.spec
    count = unstable_count_on(domain, gamma, float(cfg.get("model", {}).get("a", 0.0)),
                              spec.b).count if spec.rotational else 0
    out = {
        "M": model.M,
        "mode_count": count,
        "lower_proxy": 2 * count,
        "ky_dimension": _num(ky),
        "ky_equilibrium": _num(ky_eq),
        "ky_trajectory": _num(tr.ky_dimension),
        "top_exponent": _num(tr.exponents[0]),
        "top_exponents": [_num(x) for x in tr.exponents[:N_TOP]],
        "q_curve": [_num(x) for x in tr.q_samples[:N_Q]],
        "converged": bool(tr.converged),
        "B_d": _num(Bd),
    }
    out.update({k: _num(v) for k, v in _bounds(domain.d, gamma, spec.N, domain, Bd).items()})
    return out


def run_sweep(config: SweepConfig, out_dir: str | Path | None = None, force: bool = False,
              threads: int = 1) -> RunRecord:
    """Run every (gamma, seed) point and persist under ``out_dir/<config hash>/``.

    An existing manifest for the same hash is loaded instead of recomputed
    unless ``force`` is set.
    """
    target = Path(out_dir) / config.hash if out_dir is not None else None
    if target is not None and (target / "manifest.json").exists() and not force:
        log.info("sweep %s already on disk; skipping", config.hash)
        return load_record(target / "manifest.json")
    started = datetime.now(timezone.utc).isoformat()
    jobs = [(g, s) for g in config.gammas for s in config.seeds]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_point, [config] * len(jobs), *zip(*jobs)))
    else:
        results = [run_point(config, g, s) for g, s in jobs]
    record = RunRecord(config.hash, config.to_dict(), results,
                       timestamps={"started": started,
                                   "finished": datetime.now(timezone.utc).isoformat()})
    if target is not None:
        from .report import write_record
        write_record(record, target)
    if len(record.failed) == len(results):
        raise SweepError(f"all {len(results)} sweep points failed; first: {results[0]['error']}")
    return record


def load_record(path: str | Path) -> RunRecord:
    with open(path) as fh:
        return RunRecord.from_dict(json.load(fh))


def _per_gamma(record, quantity: str):
    rows = record.results if isinstance(record, RunRecord) else record
    vals: dict[float, list[float]] = {}
    for r in rows:
        if r["status"] == "ok" and r.get(quantity) is not None:
            vals.setdefault(r["gamma"], []).append(float(r[quantity]))
    g = sorted(vals, reverse=True)
    return g, [float(np.mean(vals[x])) for x in g]


def fit_scaling(record, quantity: str) -> Fit:
    """Slope of ``log(quantity)`` against ``log(1/gamma)`` over successful points.

    ``record`` is a ``RunRecord`` or a list of result rows carrying
    ``gamma``, ``status`` and the quantity; seeds are averaged per gamma.
    """
    g, v = _per_gamma(record, quantity)
    if len(g) < 4:
        raise ValueError(f"need at least 4 gamma points for {quantity!r}, have {len(g)}")
    return loglog_fit(g, v)
