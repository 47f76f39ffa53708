"""Config-driven benchmark runs and sweeps.

A run is a pure function of (config, master seed, run index): problem
geometry, starting point, algorithm directions, and oracle noise each draw
from their own named stream, so trajectories are bit-reproducible and
independent of scheduling.  Sweeps fan runs over a worker pool and merge
results by run index; the aggregate JSON depends only on the plan and the
seeds, never on timing or worker count.

The config is a YAML mapping with sections problem / oracle / algorithm /
target and an optional sweep section holding axis lists; the full grammar
is documented in the README.  Unknown keys are rejected by name.
"""
from __future__ import annotations

import copy
import hashlib
import itertools
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .algorithms import (
    StepSchedule,
    Trajectory,
    constant_schedule,
    cosine_schedule,
    ncrs_run,
    ncrs_vote_run,
    rsgf_run,
    rsgf_stable_step,
    theory_schedule,
)
from .geometry import RngStream, stream_id_for
from .objectives import (
    INNER_KINDS,
    InnerFunction,
    RidgeObjective,
    initial_point,
    random_ridge_objective,
)
from .oracles import CONFIDENCE_KINDS, LINK_KINDS, ConfidenceOracle, LinkFunction, SignOracle

logger = logging.getLogger("ncrs")

ALGORITHM_KINDS = ("ncrs", "ncrs_vote", "rsgf")
ORACLE_KINDS = ("sign",) + CONFIDENCE_KINDS
TARGET_KINDS = ("relative", "absolute")

# Sweep axes in enumeration order, mapped to the config key they override.
SWEEP_AXES = (
    ("d", ("problem", "d")),
    ("k", ("problem", "k")),
    ("tau", ("problem", "tau")),
    ("advantage", ("oracle", "advantage")),
    ("votes", ("algorithm", "votes")),
)

CSV_HEADER = "t,f,grad_norm,accepted,queries"


class ConfigError(ValueError):
    """A config file or override that the grammar rejects."""


def default_config() -> dict:
    return {
        "problem": {
            "d": 50,
            "k": 5,
            "inner": "pure_quadratic",
            "amplitude": 1.0,
            "frequency": 3.0,
            "tau": 0.0,
            "nuisance_dim": 0,
            "init_radius_scale": 3.0,
        },
        "oracle": {
            "kind": "sign",
            "advantage": 0.5,
            "link": "logistic",
            "scale": 1.0,
        },
        "algorithm": {
            "kind": "ncrs",
            "horizon": 10_000,
            "horizon_scale": 2.0,
            "schedule": "theory_constant",
            "alpha0": "auto",
            "alpha": 0.05,
            "votes": 1,
            "mu": 1.0e-4,
            "max_rate": 0.0,
            "min_rate": 0.0,
            "decay_steps": 0,
        },
        "target": {
            "kind": "relative",
            "value": 0.25,
        },
    }


def _reject_unknown_keys(raw: dict, allowed: dict, path: str = "") -> None:
    for key, value in raw.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in allowed:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(allowed[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config section {where} must be a mapping")
            _reject_unknown_keys(value, allowed[key], where)


def _merge_defaults(raw: dict, defaults: dict) -> dict:
    merged = copy.deepcopy(defaults)
    for key, value in raw.items():
        if isinstance(defaults.get(key), dict) and isinstance(value, dict):
            merged[key] = _merge_defaults(value, defaults[key])
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)) and math.isfinite(v)


def validate_config(raw: dict) -> dict:
    """Merge a raw mapping over the defaults and validate every field.

    Returns the normalized config.  Raises ConfigError naming the first
    offending key.  The sweep section, when present, may hold lists for the
    axes d / k / tau / advantage / votes plus a seeds list; every axis
    combination is validated here as its own config before any run starts.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    raw = copy.deepcopy(raw)
    sweep = raw.pop("sweep", None)
    skeleton = default_config()
    _reject_unknown_keys(raw, skeleton)
    cfg = _merge_defaults(raw, skeleton)

    p = cfg["problem"]
    _require(_is_int(p["d"]) and p["d"] >= 1, "problem.d must be a positive integer")
    _require(_is_int(p["k"]) and p["k"] >= 1, "problem.k must be a positive integer")
    _require(p["k"] <= p["d"], f"problem.k={p['k']} exceeds problem.d={p['d']}")
    _require(p["inner"] in INNER_KINDS, f"problem.inner must be one of {INNER_KINDS}")
    _require(_is_num(p["amplitude"]) and p["amplitude"] >= 0, "problem.amplitude must be >= 0")
    _require(_is_num(p["frequency"]) and p["frequency"] > 0, "problem.frequency must be > 0")
    _require(_is_num(p["tau"]) and p["tau"] >= 0, "problem.tau must be >= 0")
    _require(
        _is_int(p["nuisance_dim"]) and p["nuisance_dim"] >= 0,
        "problem.nuisance_dim must be a nonnegative integer",
    )
    if p["tau"] > 0:
        _require(p["nuisance_dim"] >= 1, "problem.tau > 0 requires problem.nuisance_dim >= 1")
        _require(
            p["k"] + p["nuisance_dim"] <= p["d"],
            f"problem.k + problem.nuisance_dim must not exceed problem.d="
            f"{p['d']} (got {p['k']} + {p['nuisance_dim']})",
        )
    _require(
        _is_num(p["init_radius_scale"]) and p["init_radius_scale"] > 0,
        "problem.init_radius_scale must be > 0",
    )

    o = cfg["oracle"]
    _require(o["kind"] in ORACLE_KINDS, f"oracle.kind must be one of {ORACLE_KINDS}")
    _require(
        _is_num(o["advantage"]) and 0 < o["advantage"] <= 0.5,
        "oracle.advantage must lie in (0, 0.5]",
    )
    _require(o["link"] in LINK_KINDS, f"oracle.link must be one of {LINK_KINDS}")
    _require(_is_num(o["scale"]) and o["scale"] > 0, "oracle.scale must be > 0")

    a = cfg["algorithm"]
    _require(a["kind"] in ALGORITHM_KINDS, f"algorithm.kind must be one of {ALGORITHM_KINDS}")
    if a["kind"] == "ncrs":
        _require(o["kind"] == "sign", "algorithm.kind=ncrs needs oracle.kind=sign")
    if a["kind"] == "ncrs_vote":
        _require(
            o["kind"] in CONFIDENCE_KINDS,
            f"algorithm.kind=ncrs_vote needs oracle.kind in {CONFIDENCE_KINDS}",
        )
    if a["horizon"] == "auto":
        _require(
            a["kind"] == "ncrs" and o["kind"] == "sign",
            "algorithm.horizon=auto is defined only for ncrs with a sign oracle",
        )
    else:
        _require(
            _is_int(a["horizon"]) and a["horizon"] >= 1,
            "algorithm.horizon must be a positive integer or 'auto'",
        )
    _require(
        _is_num(a["horizon_scale"]) and a["horizon_scale"] > 0,
        "algorithm.horizon_scale must be > 0",
    )
    _require(
        a["schedule"] in ("constant", "theory_constant", "cosine_decay"),
        "algorithm.schedule must be constant, theory_constant, or cosine_decay",
    )
    if a["alpha0"] != "auto":
        _require(_is_num(a["alpha0"]) and a["alpha0"] > 0, "algorithm.alpha0 must be > 0 or 'auto'")
    elif a["kind"] == "ncrs":
        _require(
            a["schedule"] == "theory_constant",
            "algorithm.alpha0=auto is defined only for the theory_constant schedule",
        )
    if a["alpha"] != "auto":
        _require(_is_num(a["alpha"]) and a["alpha"] > 0, "algorithm.alpha must be > 0 or 'auto'")
    else:
        _require(a["kind"] == "rsgf", "algorithm.alpha=auto is defined only for rsgf")
    _require(_is_int(a["votes"]) and a["votes"] >= 1, "algorithm.votes must be a positive integer")
    _require(_is_num(a["mu"]) and a["mu"] > 0, "algorithm.mu must be > 0")
    if a["kind"] == "ncrs" and a["schedule"] == "cosine_decay":
        _require(
            _is_num(a["max_rate"]) and _is_num(a["min_rate"]) and 0 < a["min_rate"] <= a["max_rate"],
            "cosine_decay needs 0 < algorithm.min_rate <= algorithm.max_rate",
        )
        _require(
            _is_int(a["decay_steps"]) and a["decay_steps"] >= 1,
            "cosine_decay needs algorithm.decay_steps >= 1",
        )

    t = cfg["target"]
    _require(t["kind"] in TARGET_KINDS, f"target.kind must be one of {TARGET_KINDS}")
    _require(_is_num(t["value"]) and t["value"] > 0, "target.value must be > 0")

    if sweep is not None:
        if not isinstance(sweep, dict):
            raise ConfigError("sweep must be a mapping of axis lists")
        axis_names = {name for name, _ in SWEEP_AXES}
        for key, values in sweep.items():
            where = f"sweep.{key}"
            if key == "seeds":
                _require(isinstance(values, list), f"{where} must be a list")
                for s in values:
                    _require(_is_int(s) and s >= 0, f"{where} entries must be nonnegative integers")
            elif key in axis_names:
                _require(isinstance(values, list), f"{where} must be a list")
            else:
                raise ConfigError(f"unknown config key: {where}")
        cfg["sweep"] = copy.deepcopy(sweep)
        for cell_cfg, _ in expand_cells(cfg):
            validate_config(cell_cfg)  # reject bad combinations before any run
    return cfg


def load_config(path: str | Path) -> dict:
    """Read and validate a YAML config file."""
    text = Path(path).read_text()
    raw = yaml.safe_load(text)
    if raw is None:
        raw = {}
    return validate_config(raw)


def apply_overrides(cfg: dict, assignments: list[str]) -> dict:
    """Apply dotted-key overrides like 'oracle.advantage=0.25' and revalidate.

    Values are parsed as YAML scalars (so 1e-3, true, and quoted strings all
    work); list values use YAML flow syntax, e.g. 'sweep.k=[5, 10]'.
    """
    out = copy.deepcopy(cfg)
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        dotted, _, raw_value = item.partition("=")
        keys = [k for k in dotted.strip().split(".") if k]
        if not keys:
            raise ConfigError(f"override {item!r} has an empty key")
        try:
            value = yaml.safe_load(raw_value)
        except yaml.YAMLError as exc:
            raise ConfigError(f"override {item!r} has an unparseable value: {exc}") from exc
        if isinstance(value, str):
            # YAML 1.1 only resolves floats containing a dot, so cover 1e-3 etc.
            try:
                value = float(value)
            except ValueError:
                pass
        node = out
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {dotted!r} descends through a scalar")
        node[keys[-1]] = value
    return validate_config(out)


@dataclass
class RunSummary:
    """Per-run results; the running-average series mirrors the trajectory."""

    config: dict
    seed: int
    run_index: int
    epsilon: float
    horizon: int
    iterations_to_target: int | None
    final_value: float
    final_running_avg: float
    total_queries: int
    wall_time: float
    running_avg: np.ndarray = field(repr=False, default=None)
    error: str | None = None

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "seed": self.seed,
            "run_index": self.run_index,
            "epsilon": self.epsilon,
            "horizon": self.horizon,
            "iterations_to_target": self.iterations_to_target,
            "final_value": self.final_value,
            "final_running_avg": self.final_running_avg,
            "total_queries": self.total_queries,
            "wall_time": self.wall_time,
            "error": self.error,
        }


def running_average(grad_norms: np.ndarray) -> np.ndarray:
    g = np.asarray(grad_norms, dtype=np.float64)
    if g.size == 0:
        return g
    return np.cumsum(g) / np.arange(1, g.size + 1)


def iterations_to_target(traj: Trajectory, epsilon: float) -> int | None:
    """Smallest logged t whose running-average gradient norm is <= epsilon."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    avg = running_average(traj.grad_norms)
    hits = np.nonzero(avg <= epsilon)[0]
    if hits.size == 0:
        return None
    return int(traj.steps[hits[0]])


def fit_scaling(cells: list[tuple[float, float, float]]) -> tuple[float, float, float]:
    """Least-squares line through (log x, log mean); returns (slope, intercept, r2).

    The stderr entries ride along for reporting; the fit itself is unweighted.
    """
    if len(cells) < 2:
        raise ValueError("need at least 2 cells to fit")
    xs = np.array([c[0] for c in cells], dtype=np.float64)
    ys = np.array([c[1] for c in cells], dtype=np.float64)
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("fit_scaling needs positive x and mean values")
    lx, ly = np.log(xs), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res < 1e-24 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


def _streams(master_seed: int, run_index: int) -> dict[str, RngStream]:
    return {
        role: RngStream(master_seed, stream_id_for(run_index, role))
        for role in ("subspace", "nuisance", "init", "algorithm", "oracle")
    }


def _build_problem(cfg: dict, streams: dict[str, RngStream]) -> tuple[RidgeObjective, np.ndarray]:
    p = cfg["problem"]
    inner = InnerFunction(
        kind=p["inner"], amplitude=float(p["amplitude"]), frequency=float(p["frequency"])
    )
    tau = float(p["tau"])
    objective = random_ridge_objective(
        streams["subspace"],
        int(p["d"]),
        int(p["k"]),
        inner,
        tau=tau,
        nuisance_dim=int(p["nuisance_dim"]) if tau > 0 else 0,
        nuisance_rng=streams["nuisance"],
    )
    theta1 = initial_point(objective, streams["init"], float(p["init_radius_scale"]))
    return objective, theta1


def run_one(
    cfg: dict, master_seed: int, run_index: int = 0
) -> tuple[Trajectory, RunSummary]:
    """Execute one run described by a validated config.

    Streams are keyed by (master_seed, hash(run_index, role)) for the roles
    subspace / nuisance / init / algorithm / oracle, making the trajectory a
    pure function of (config, master_seed, run_index).
    """
    cfg = validate_config(cfg)
    cfg.pop("sweep", None)
    streams = _streams(master_seed, run_index)
    objective, theta1 = _build_problem(cfg, streams)
    d = objective.ambient_dim
    k = objective.intrinsic_dim
    smoothness = objective.smoothness

    grad0 = float(np.linalg.norm(objective.gradient(theta1)))
    value0 = float(objective.value(theta1))
    tgt = cfg["target"]
    epsilon = float(tgt["value"]) * (grad0 if tgt["kind"] == "relative" else 1.0)
    if epsilon <= 0:
        raise ConfigError("resolved target epsilon is not positive")
    value_gap = value0 - objective.lower_bound

    a = cfg["algorithm"]
    o = cfg["oracle"]
    advantage = float(o["advantage"])
    if a["horizon"] == "auto":
        # Horizon recipe T = O(k / (p^2 eps^2)): horizon_scale * pi * L * gap
        # * k / (p^2 eps^2), with the run's own certified gap and target.
        horizon = math.ceil(
            float(a["horizon_scale"])
            * math.pi
            * smoothness
            * value_gap
            * k
            / (advantage**2 * epsilon**2)
        )
    else:
        horizon = int(a["horizon"])

    def instrument(t: int, theta: np.ndarray) -> tuple[float, float]:
        return (
            float(objective.value(theta)),
            float(np.linalg.norm(objective.gradient(theta))),
        )

    start = time.perf_counter()
    if a["kind"] == "ncrs":
        oracle = SignOracle(objective, advantage, streams["oracle"])
        schedule = _build_schedule(a, k, horizon, value_gap, smoothness)
        traj = ncrs_run(oracle, d, theta1, schedule, horizon, streams["algorithm"], instrument)
    elif a["kind"] == "ncrs_vote":
        link = LinkFunction(kind=o["link"], scale=float(o["scale"]))
        oracle = ConfidenceOracle(objective, o["kind"], link, streams["oracle"])
        traj = ncrs_vote_run(
            oracle,
            d,
            theta1,
            float(a["alpha"]),
            int(a["votes"]),
            horizon,
            streams["algorithm"],
            instrument,
        )
    else:
        alpha = a["alpha"]
        stable = rsgf_stable_step(smoothness, k)
        if alpha == "auto":
            alpha = stable
        elif float(alpha) > stable * (1 + 1e-12):
            logger.warning(
                "rsgf step size %.6g exceeds the certified stable bound %.6g",
                float(alpha),
                stable,
            )
        traj = rsgf_run(
            objective.value,
            d,
            theta1,
            float(alpha),
            float(a["mu"]),
            horizon,
            streams["algorithm"],
            instrument,
        )
    wall = time.perf_counter() - start

    traj.config = {"run": copy.deepcopy(cfg), "seed": master_seed, "run_index": run_index}
    avg = running_average(traj.grad_norms)
    summary = RunSummary(
        config=traj.config,
        seed=master_seed,
        run_index=run_index,
        epsilon=epsilon,
        horizon=horizon,
        iterations_to_target=iterations_to_target(traj, epsilon),
        final_value=float(objective.value(traj.theta_final)),
        final_running_avg=float(avg[-1]) if avg.size else math.nan,
        total_queries=traj.total_queries,
        wall_time=wall,
        running_avg=avg,
    )
    return traj, summary


def _build_schedule(
    a: dict, k: int, horizon: int, value_gap: float, smoothness: float
) -> StepSchedule:
    if a["schedule"] == "constant":
        return constant_schedule(float(a["alpha0"]), horizon)
    if a["schedule"] == "theory_constant":
        alpha0 = a["alpha0"]
        if alpha0 == "auto":
            # minimizes the horizon bound: alpha0* = sqrt(2 gap / L)
            alpha0 = math.sqrt(2.0 * value_gap / smoothness)
        return theory_schedule(float(alpha0), k, horizon)
    return cosine_schedule(
        float(a["max_rate"]), float(a["min_rate"]), int(a["decay_steps"]), horizon
    )


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    """CSV with header t,f,grad_norm,accepted,queries; LF endings; floats at
    17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [CSV_HEADER]
    for t, f, g, acc, q in zip(
        traj.steps, traj.values, traj.grad_norms, traj.accepted, traj.queries
    ):
        lines.append(f"{int(t)},{float(f):.17g},{float(g):.17g},{int(acc)},{int(q)}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def cell_hash(cell_cfg: dict) -> str:
    """Stable short id for a cell: sha256 of its canonical JSON."""
    canonical = json.dumps(cell_cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def expand_cells(cfg: dict) -> list[tuple[dict, dict]]:
    """All (cell config, axis values) combinations of the sweep section.

    Axis order is d, k, tau, advantage, votes; the cell config is the base
    config with the axis values substituted and no sweep section.
    """
    sweep = cfg.get("sweep", {}) or {}
    base = {key: copy.deepcopy(val) for key, val in cfg.items() if key != "sweep"}
    names = [name for name, _ in SWEEP_AXES if name in sweep]
    value_lists = [sweep[name] for name in names]
    cells = []
    for combo in itertools.product(*value_lists):
        cell_cfg = copy.deepcopy(base)
        axes = {}
        for name, value in zip(names, combo):
            section, key = dict(SWEEP_AXES)[name]
            cell_cfg[section][key] = value
            axes[name] = value
        cells.append((cell_cfg, axes))
    return cells


def _sweep_worker(args: tuple[dict, int, int, str]) -> dict:
    cell_cfg, seed, run_index, csv_path = args
    try:
        traj, summary = run_one(cell_cfg, seed, run_index)
        write_trajectory_csv(traj, csv_path)
        return summary.to_json()
    except Exception as exc:  # recorded per-run; the sweep continues
        return {
            "seed": seed,
            "run_index": run_index,
            "error": f"{type(exc).__name__}: {exc}",
            "iterations_to_target": None,
            "final_running_avg": None,
            "total_queries": None,
        }


def _stat(values: list) -> dict:
    present = [v for v in values if v is not None]
    out = {"values": values, "count": len(present)}
    if present:
        arr = np.asarray(present, dtype=np.float64)
        out["mean"] = float(arr.mean())
        out["stderr"] = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    else:
        out["mean"] = None
        out["stderr"] = None
    return out


def run_sweep(cfg: dict, out_dir: str | Path, workers: int = 1) -> dict:
    """Run every (cell, seed) combination, write per-run CSVs and the
    aggregate JSON, and return the aggregate.

    Layout: <out_dir>/<cell-hash>/<seed>.csv and <out_dir>/aggregate.json.
    The aggregate depends only on (plan, seeds): identical for any worker
    count, as runs derive their randomness from (seed, run index) alone.
    """
    cfg = validate_config(cfg)
    if workers < 1:
        raise ConfigError("workers must be a positive integer")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = list(cfg.get("sweep", {}).get("seeds", [1, 2, 3, 4, 5]))
    cells = expand_cells(cfg)

    jobs = []
    run_index = 0
    for cell_cfg, axes in cells:
        chash = cell_hash(cell_cfg)
        for seed in seeds:
            csv_path = str(out_dir / chash / f"{seed}.csv")
            jobs.append((cell_cfg, seed, run_index, csv_path))
            run_index += 1

    if workers == 1 or len(jobs) <= 1:
        results = [_sweep_worker(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_worker, jobs))

    aggregate = {
        "plan": {
            "base": {k: v for k, v in cfg.items() if k != "sweep"},
            "axes": {k: v for k, v in (cfg.get("sweep") or {}).items() if k != "seeds"},
            "seeds": seeds,
        },
        "cells": [],
    }
    idx = 0
    for cell_cfg, axes in cells:
        rows = results[idx : idx + len(seeds)]
        idx += len(seeds)
        aggregate["cells"].append(
            {
                "axes": axes,
                "cell_hash": cell_hash(cell_cfg),
                "seeds": seeds,
                "iterations_to_target": _stat([r["iterations_to_target"] for r in rows]),
                "final_running_avg": _stat([r["final_running_avg"] for r in rows]),
                "total_queries": _stat([r["total_queries"] for r in rows]),
                "errors": [r.get("error") for r in rows],
            }
        )
    text = json.dumps(aggregate, sort_keys=True, indent=2) + "\n"
    with open(out_dir / "aggregate.json", "w", newline="\n") as fh:
        fh.write(text)
    return aggregate
