"""Command-line front end: configs, runs, exports, comparison reports.

A single YAML file carries every parameter a run needs, so config + seed
fully reproduce a simulation.  Numeric fields accept either plain SI
numbers or strings with an explicit unit suffix ("73.8 mph", "8.2 ft/s2",
"600 s"); everything is converted to SI on load.  Exports are plain CSV
with fixed six-decimal formatting, and comparison reports come in both a
machine-readable JSON form and an aligned text table.

Exit codes: 0 success, 2 configuration error, 3 collision abort.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from statistics import mean, stdev

import numpy as np
import yaml

from .fuel import DEFAULT_COEFFICIENTS, FuelCoefficients, ML_PER_GALLON
from .idm import IdmParams
from .sequencing import ScoringContext
from .simulation import (
    CollisionError,
    ControlMode,
    DemandPhase,
    RunMetrics,
    ScenarioConfig,
    TrajectoryLog,
    run_scenario,
)
from .vehicles import ControlLimits, MergeGeometry

OUT_ENV_VAR = "RAMPMERGE_OUT"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_COLLISION = 3

KM_PER_MILE = 1.609344


class ConfigError(ValueError):
    """One or more invalid config fields, each with its path."""

    def __init__(self, issues: list[tuple[str, str]]):
        self.issues = issues
        lines = [f"{path}: {msg}" for path, msg in issues]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))


# ---------------------------------------------------------------------------
# unit handling

_UNIT_TABLES = {
    "speed": {"m/s": 1.0, "mps": 1.0, "mph": 0.44704, "km/h": 1.0 / 3.6,
              "kph": 1.0 / 3.6, "ft/s": 0.3048},
    "accel": {"m/s2": 1.0, "m/s^2": 1.0, "ft/s2": 0.3048, "ft/s^2": 0.3048},
    "length": {"m": 1.0, "ft": 0.3048, "km": 1000.0, "mi": 1609.344},
    "time": {"s": 1.0, "ms": 1e-3, "min": 60.0, "h": 3600.0, "hr": 3600.0},
    # vehicle flows resolve to veh/s
    "rate": {"veh/s": 1.0, "veh/h": 1.0 / 3600.0, "veh/hr": 1.0 / 3600.0,
             "pcu/h": 1.0 / 3600.0, "pcu/hr": 1.0 / 3600.0,
             "pcu/hr/ln": 1.0 / 3600.0, "veh/min": 1.0 / 60.0},
}


def convert_quantity(value, dimension: str) -> float:
    """Resolve a config number to SI.

    Plain numbers pass through unchanged (SI assumed).  Strings must be
    "<number> <unit>" with a unit known for ``dimension``; dimensionless
    fields ("plain") reject unit suffixes outright.
    """
    if isinstance(value, bool):
        raise ValueError("expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"expected a number or '<value> <unit>' string, got {value!r}")
    text = value.replace("−", "-").strip()
    parts = text.split()
    if len(parts) == 1:
        try:
            return float(parts[0])
        except ValueError:
            raise ValueError(f"cannot parse number from {value!r}") from None
    if len(parts) != 2:
        raise ValueError(f"expected '<value> <unit>', got {value!r}")
    try:
        magnitude = float(parts[0])
    except ValueError:
        raise ValueError(f"cannot parse number from {value!r}") from None
    if dimension == "plain":
        raise ValueError(f"field is dimensionless, drop the unit in {value!r}")
    table = _UNIT_TABLES[dimension]
    unit = parts[1].lower()
    if unit not in table:
        known = ", ".join(sorted(table))
        raise ValueError(f"unknown {dimension} unit {parts[1]!r} (known: {known})")
    return magnitude * table[unit]


# ---------------------------------------------------------------------------
# config schema: (field name, dimension) per section

_GEOMETRY_DIMS = {
    "ramp_control_zone_len": "length",
    "ramp_buffer_zone_len": "length",
    "mainline_control_zone_len": "length",
    "merge_zone_len": "length",
    "trigger_point": "length",
    "upstream_extent": "length",
    "downstream_extent": "length",
    "ramp_length": "length",
}
_LIMITS_DIMS = {
    "acc_min": "accel",
    "acc_max": "accel",
    "gap_min_headway": "time",
    "gap_floor": "length",
    "v_max": "speed",
}
_IDM_DIMS = {
    "v0": "speed", "T": "time", "a": "accel", "b": "accel",
    "s0": "length", "delta": "plain",
}
_SCORING_DIMS = {
    "horizon": "plain",
    "horizon_growth": "plain",
    "max_horizon": "plain",
    "gap_weight_mainline": "plain",
    "gap_weight_ramp": "plain",
    "speed_weight_mainline": "plain",
    "speed_weight_ramp": "plain",
    "control_weight": "plain",
    "terminal_factor": "plain",
    "desired_speed": "speed",
    "desired_time_headway": "time",
    "merge_entry": "length",
    "activation_margin": "length",
    "cap": "plain",
    "workers": "plain",
}
_FUEL_DIMS = {name: "plain" for name in ("b0", "b1", "b2", "b3", "c0", "c1", "c2")}
_PHASE_DIMS = {
    "duration": "time",
    "mainline": "rate",
    "ramp": "rate",
    "suggested": "rate",
}
_INT_FIELDS = {"horizon", "max_horizon", "cap", "workers", "seed"}

_TOP_KEYS = {
    "name", "mode", "seed", "dt", "vehicle_length", "geometry", "limits",
    "mainline_idm", "ramp_idm", "scoring", "fuel", "demand",
}


def _parse_section(raw, dims, path, issues) -> dict:
    out = {}
    if raw is None:
        return out
    if not isinstance(raw, dict):
        issues.append((path, "expected a mapping"))
        return out
    for key, value in raw.items():
        if key not in dims:
            issues.append((f"{path}.{key}", "unknown field"))
            continue
        try:
            si = convert_quantity(value, dims[key])
        except ValueError as exc:
            issues.append((f"{path}.{key}", str(exc)))
            continue
        out[key] = int(si) if key in _INT_FIELDS else si
    return out


def load_config(path: str | Path, mode: str | None = None,
                seed: int | None = None) -> ScenarioConfig:
    """Parse a YAML scenario file into a validated ScenarioConfig.

    ``mode`` and ``seed`` override whatever the file carries.  Raises
    ConfigError listing every offending field, not just the first.
    """
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError([(str(path), f"cannot read config: {exc}")]) from exc
    except yaml.YAMLError as exc:
        raise ConfigError([(str(path), f"YAML parse error: {exc}")]) from exc
    if not isinstance(raw, dict):
        raise ConfigError([(str(path), "top level must be a mapping")])

    issues: list[tuple[str, str]] = []
    for key in raw:
        if key not in _TOP_KEYS:
            issues.append((key, "unknown field"))

    mode_text = mode if mode is not None else raw.get("mode", "optimal")
    try:
        run_mode = ControlMode(str(mode_text).lower())
    except ValueError:
        names = ", ".join(m.value for m in ControlMode)
        issues.append(("mode", f"unknown mode {mode_text!r} (expected one of {names})"))
        run_mode = ControlMode.OPTIMAL

    if seed is not None:
        run_seed = seed
    else:
        try:
            run_seed = int(convert_quantity(raw.get("seed", 0), "plain"))
        except ValueError as exc:
            issues.append(("seed", str(exc)))
            run_seed = 0

    scalars = {}
    for key, dim in (("dt", "time"), ("vehicle_length", "length")):
        if key in raw:
            try:
                scalars[key] = convert_quantity(raw[key], dim)
            except ValueError as exc:
                issues.append((key, str(exc)))

    geometry_kw = _parse_section(raw.get("geometry"), _GEOMETRY_DIMS, "geometry", issues)
    limits_kw = _parse_section(raw.get("limits"), _LIMITS_DIMS, "limits", issues)
    mainline_kw = _parse_section(raw.get("mainline_idm"), _IDM_DIMS, "mainline_idm", issues)
    ramp_kw = _parse_section(raw.get("ramp_idm"), _IDM_DIMS, "ramp_idm", issues)
    scoring_kw = _parse_section(raw.get("scoring"), _SCORING_DIMS, "scoring", issues)
    fuel_kw = _parse_section(raw.get("fuel"), _FUEL_DIMS, "fuel", issues)

    phases = []
    raw_demand = raw.get("demand")
    if not isinstance(raw_demand, list) or not raw_demand:
        issues.append(("demand", "at least one demand phase is required"))
        raw_demand = []
    for i, entry in enumerate(raw_demand):
        kw = _parse_section(entry, _PHASE_DIMS, f"demand[{i}]", issues)
        missing = sorted(set(_PHASE_DIMS) - set(kw))
        if missing:
            issues.append((f"demand[{i}]", f"missing fields: {', '.join(missing)}"))
            continue
        phases.append(DemandPhase(
            duration=kw["duration"],
            mainline_rate=kw["mainline"],
            ramp_rate=kw["ramp"],
            q_suggested=kw["suggested"],
        ))

    if issues:
        raise ConfigError(issues)

    # anything a section omits falls back to the scenario defaults
    def scenario_default(name: str):
        return ScenarioConfig.__dataclass_fields__[name].default_factory()

    config = ScenarioConfig(
        phases=phases,
        mode=run_mode,
        seed=run_seed,
        name=str(raw.get("name", path.stem)),
        geometry=MergeGeometry(**geometry_kw),
        limits=replace(scenario_default("limits"), **limits_kw),
        mainline_idm=replace(scenario_default("mainline_idm"), **mainline_kw),
        ramp_idm=replace(scenario_default("ramp_idm"), **ramp_kw),
        scoring=replace(scenario_default("scoring"), **scoring_kw),
        fuel=FuelCoefficients(**fuel_kw) if fuel_kw else DEFAULT_COEFFICIENTS,
        **scalars,
    )
    try:
        config.validate()
    except ValueError as exc:
        raise ConfigError([("config", str(exc))]) from exc
    return config


def resolved_parameters(config: ScenarioConfig) -> dict:
    """The full SI parameter set of a config, as plain nested dicts."""
    return {
        "name": config.name,
        "mode": config.mode.value,
        "seed": config.seed,
        "dt": config.dt,
        "vehicle_length": config.vehicle_length,
        "geometry": asdict(config.geometry),
        "limits": asdict(config.limits),
        "mainline_idm": asdict(config.mainline_idm),
        "ramp_idm": asdict(config.ramp_idm),
        "scoring": {
            k: v for k, v in asdict(config.scoring).items()
            if k not in ("limits", "fuel", "dt", "vehicle_length")
        },
        "fuel": asdict(config.fuel),
        "demand": [
            {
                "duration": p.duration,
                "mainline": p.mainline_rate,
                "ramp": p.ramp_rate,
                "suggested": p.q_suggested,
            }
            for p in config.phases
        ],
    }


def dump_config(config: ScenarioConfig) -> str:
    """Serialize the resolved SI parameter set back to YAML.

    load_config(dump_config(cfg)) resolves to an identical parameter set,
    so a saved config is a faithful reproduction recipe.
    """
    return yaml.safe_dump(resolved_parameters(config), sort_keys=True)


def config_digest(config: ScenarioConfig) -> str:
    """sha256 over the canonical JSON of the resolved parameters.

    name, mode and seed are excluded: the digest identifies the physical
    scenario, the run manifest carries mode and seed alongside it.  Key
    order cannot affect the digest because the JSON is sorted.
    """
    params = resolved_parameters(config)
    params.pop("name")
    params.pop("mode")
    params.pop("seed")
    canon = json.dumps(params, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


# ---------------------------------------------------------------------------
# trajectory files

_EXPORT_FMT = "%.6f,%d,%d,%.6f,%.6f,%.6f,%d,%.6f"
_HEADER = ",".join(TrajectoryLog.FIELDS)


def export_trajectories(log: dict[str, np.ndarray], path: str | Path) -> Path:
    """Write a trajectory log as CSV, rows sorted by (t, id)."""
    path = Path(path)
    order = np.lexsort((log["id"], log["t"]))
    table = np.column_stack([log[name][order].astype(float)
                             for name in TrajectoryLog.FIELDS])
    try:
        with path.open("w") as handle:
            handle.write(_HEADER + "\n")
            if table.size:
                np.savetxt(handle, table, fmt=_EXPORT_FMT)
    except OSError as exc:
        raise RuntimeError(f"cannot write trajectories to {path}: {exc}") from exc
    return path


def load_trajectories(path: str | Path) -> dict[str, np.ndarray]:
    """Read an exported trajectory CSV back into column arrays."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise RuntimeError(f"cannot read trajectories from {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or lines[0].strip() != _HEADER:
        raise RuntimeError(f"{path} is not a trajectory export (bad header)")
    if len(lines) == 1:
        return TrajectoryLog().arrays()
    table = np.loadtxt(lines[1:], delimiter=",", ndmin=2)
    out = {}
    for j, name in enumerate(TrajectoryLog.FIELDS):
        col = table[:, j]
        if name in ("id", "lane", "status"):
            out[name] = col.astype(np.int64)
        else:
            out[name] = col
    return out


# ---------------------------------------------------------------------------
# reports

_MODE_ORDER = ("optimal", "metering", "none")


def _metric_rows(metrics: RunMetrics) -> list[tuple[str, str, float]]:
    rows = []
    for group_name in ("overall", "mainline", "ramp"):
        g = getattr(metrics, group_name)
        label = group_name.capitalize()
        rows += [
            (label, "vehicles", float(g.n_vehicles)),
            (label, "VMT (mi)", g.vmt_miles),
            (label, "VMT (km)", g.vmt_miles * KM_PER_MILE),
            (label, "VHT (h)", g.vht_hours),
            (label, "Q (mph)", g.q_mph),
            (label, "Q (km/h)", g.q_mph * KM_PER_MILE),
            (label, "fuel (gal)", g.fuel_ml / ML_PER_GALLON),
            (label, "fuel (L)", g.fuel_ml / 1000.0),
            (label, "economy (mpg)", g.economy_mpg),
            (label, "economy (km/L)", g.economy_mpg * KM_PER_MILE / 3.785411784),
        ]
    return rows


def _improvement(new: float, base: float) -> float:
    if base == 0.0 or not math.isfinite(base) or not math.isfinite(new):
        return math.nan
    return (new / base - 1.0) * 100.0


def report_metrics(per_mode: dict[str, RunMetrics], path: str | Path) -> str:
    """Write a comparison report (JSON + aligned text) and return the text.

    ``path`` names the JSON file; the text table lands next to it with a
    .txt suffix.  Improvement percentages compare the coordinated mode
    against each baseline present.
    """
    if not per_mode:
        raise ValueError("report_metrics needs at least one mode")
    path = Path(path)
    modes = [m for m in _MODE_ORDER if m in per_mode]
    modes += [m for m in per_mode if m not in modes]

    improvements = {}
    if "optimal" in per_mode:
        opt = per_mode["optimal"].overall
        for base_name in modes:
            if base_name == "optimal":
                continue
            base = per_mode[base_name].overall
            improvements[f"optimal_vs_{base_name}"] = {
                "q_pct": _improvement(opt.q_mph, base.q_mph),
                "economy_pct": _improvement(opt.economy_mpg, base.economy_mpg),
                "vmt_pct": _improvement(opt.vmt_miles, base.vmt_miles),
            }

    payload = {
        "modes": {name: asdict(per_mode[name]) for name in modes},
        "improvements": improvements,
    }

    width = max(len(m) for m in modes) + 2
    lines = []
    header = f"{'group':<10}{'metric':<16}" + "".join(f"{m:>{max(width, 12)}}" for m in modes)
    lines.append(header)
    lines.append("-" * len(header))
    row_keys = _metric_rows(per_mode[modes[0]])
    tables = {name: dict(((g, k), v) for g, k, v in _metric_rows(per_mode[name]))
              for name in modes}
    seen_groups = set()
    for group, key, _ in row_keys:
        if group not in seen_groups and seen_groups:
            lines.append("")
        seen_groups.add(group)
        cells = "".join(
            f"{tables[name][(group, key)]:>{max(width, 12)}.2f}" for name in modes
        )
        lines.append(f"{group:<10}{key:<16}" + cells)
    if improvements:
        lines.append("")
        for pair, vals in improvements.items():
            vs = pair.split("_vs_")[1]
            lines.append(
                f"optimal vs {vs}: Q {vals['q_pct']:+.1f}%, "
                f"economy {vals['economy_pct']:+.1f}%"
            )
    text = "\n".join(lines) + "\n"

    try:
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        path.with_suffix(".txt").write_text(text)
    except OSError as exc:
        raise RuntimeError(f"cannot write report to {path}: {exc}") from exc
    return text


# ---------------------------------------------------------------------------
# manifests

@dataclass
class RunManifest:
    """Reproducibility record written beside every run's outputs."""

    config_digest: str
    config_path: str
    mode: str
    seed: int
    started: str
    finished: str
    wall_seconds: float
    outputs: dict[str, str] = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# ---------------------------------------------------------------------------
# subcommands

def _out_dir(args) -> Path:
    out = args.out or os.environ.get(OUT_ENV_VAR) or "runs"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _execute(config: ScenarioConfig, config_path: str, out_dir: Path,
             stem: str) -> tuple[RunManifest, RunMetrics]:
    started = _utc_now()
    tic = time.perf_counter()
    result = run_scenario(config)
    wall = time.perf_counter() - tic
    traj_path = export_trajectories(result.log, out_dir / f"{stem}_trajectories.csv")
    metrics_path = out_dir / f"{stem}_metrics.json"
    metrics_path.write_text(
        json.dumps(asdict(result.metrics), indent=2, sort_keys=True) + "\n")
    manifest = RunManifest(
        config_digest=config_digest(config),
        config_path=str(config_path),
        mode=config.mode.value,
        seed=config.seed,
        started=started,
        finished=_utc_now(),
        wall_seconds=round(wall, 3),
        outputs={
            "trajectories": str(traj_path),
            "metrics": str(metrics_path),
        },
        metrics=asdict(result.metrics.overall),
    )
    manifest.write(out_dir / f"{stem}_manifest.json")
    return manifest, result.metrics


def _summary_line(mode: str, metrics: RunMetrics) -> str:
    g = metrics.overall
    return (f"{mode:>9}: Q {g.q_mph:6.2f} mph, VMT {g.vmt_miles:7.2f} mi, "
            f"VHT {g.vht_hours:6.2f} h, economy {g.economy_mpg:5.2f} mpg")


def _cmd_run(args) -> int:
    config = load_config(args.config, mode=args.mode, seed=args.seed)
    out_dir = _out_dir(args)
    stem = f"run_{config.mode.value}_seed{config.seed}"
    try:
        manifest, metrics = _execute(config, args.config, out_dir, stem)
    except CollisionError as exc:
        print(f"collision abort: {exc}", file=sys.stderr)
        if exc.log is not None:
            partial = export_trajectories(
                exc.log, out_dir / f"{stem}_trajectories_partial.csv")
            print(f"partial trajectories: {partial}", file=sys.stderr)
        return EXIT_COLLISION
    print(_summary_line(config.mode.value, metrics))
    for kind, file_path in manifest.outputs.items():
        print(f"  {kind}: {file_path}")
    print(f"  manifest: {out_dir / (stem + '_manifest.json')}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    out_dir = _out_dir(args)
    per_mode: dict[str, RunMetrics] = {}
    for mode in _MODE_ORDER:
        config = load_config(args.config, mode=mode, seed=args.seed)
        stem = f"compare_{mode}_seed{config.seed}"
        try:
            _, metrics = _execute(config, args.config, out_dir, stem)
        except CollisionError as exc:
            print(f"collision abort in {mode} mode: {exc}", file=sys.stderr)
            return EXIT_COLLISION
        per_mode[mode] = metrics
        print(_summary_line(mode, metrics))
    text = report_metrics(per_mode, out_dir / f"compare_seed{args.seed}_report.json")
    print()
    print(text, end="")
    return EXIT_OK


def _sweep_one(payload):
    config_path, mode, seed = payload
    config = load_config(config_path, mode=mode, seed=seed)
    result = run_scenario(config)
    return mode, seed, result.metrics


def _cmd_sweep(args) -> int:
    seeds = args.seeds
    modes = args.modes
    # config errors should surface before any worker spins up
    load_config(args.config, mode=modes[0], seed=seeds[0])
    out_dir = _out_dir(args)
    jobs = [(args.config, mode, seed) for mode in modes for seed in seeds]
    results = []
    try:
        if args.workers > 1:
            with concurrent.futures.ProcessPoolExecutor(args.workers) as pool:
                for item in pool.map(_sweep_one, jobs):
                    results.append(item)
                    print(f"  done: {item[0]} seed {item[1]}")
        else:
            for job in jobs:
                item = _sweep_one(job)
                results.append(item)
                print(f"  done: {item[0]} seed {item[1]}")
    except CollisionError as exc:
        print(f"collision abort: {exc}", file=sys.stderr)
        return EXIT_COLLISION

    by_mode: dict[str, list[tuple[int, RunMetrics]]] = {m: [] for m in modes}
    for mode, seed, metrics in results:
        by_mode[mode].append((seed, metrics))

    aggregate = {}
    lines = [f"{'mode':>9} {'seeds':>5} {'Q mph':>14} {'economy mpg':>16} {'VMT mi':>16}"]
    for mode in modes:
        rows = sorted(by_mode[mode])
        qs = [m.overall.q_mph for _, m in rows]
        mpgs = [m.overall.economy_mpg for _, m in rows]
        vmts = [m.overall.vmt_miles for _, m in rows]
        stats = {}
        for name, series in (("q_mph", qs), ("economy_mpg", mpgs), ("vmt_miles", vmts)):
            stats[name] = {
                "mean": mean(series),
                "sd": stdev(series) if len(series) > 1 else 0.0,
            }
        aggregate[mode] = {
            "seeds": [s for s, _ in rows],
            "stats": stats,
            "runs": {str(s): asdict(m.overall) for s, m in rows},
        }
        lines.append(
            f"{mode:>9} {len(rows):>5} "
            f"{stats['q_mph']['mean']:>8.2f}±{stats['q_mph']['sd']:<5.2f} "
            f"{stats['economy_mpg']['mean']:>10.2f}±{stats['economy_mpg']['sd']:<5.2f} "
            f"{stats['vmt_miles']['mean']:>10.2f}±{stats['vmt_miles']['sd']:<5.2f}"
        )
    text = "\n".join(lines) + "\n"
    sweep_json = out_dir / "sweep.json"
    sweep_json.write_text(json.dumps(aggregate, indent=2, sort_keys=True) + "\n")
    sweep_json.with_suffix(".txt").write_text(text)
    print()
    print(text, end="")
    print(f"  aggregate: {sweep_json}")
    return EXIT_OK


def _flatten(params: dict, prefix: str = "") -> list[tuple[str, object]]:
    rows = []
    for key, value in params.items():
        label = f"{prefix}{key}"
        if isinstance(value, dict):
            rows += _flatten(value, label + ".")
        elif isinstance(value, list):
            for i, entry in enumerate(value):
                rows += _flatten(entry, f"{label}[{i}].")
        else:
            rows.append((label, value))
    return rows


def _cmd_validate(args) -> int:
    config = load_config(args.config, mode=args.mode, seed=args.seed)
    rows = _flatten(resolved_parameters(config))
    width = max(len(label) for label, _ in rows)
    print(f"configuration OK: {args.config}")
    print(f"scenario digest: {config_digest(config)}")
    for label, value in rows:
        print(f"  {label:<{width}}  {value}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rampmerge",
        description="Merge-corridor simulation runner and report generator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_mode=True):
        p.add_argument("--config", required=True, help="scenario YAML file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config's RNG seed")
        p.add_argument("--out", default=None,
                       help=f"output directory (default ${OUT_ENV_VAR} or ./runs)")
        if with_mode:
            p.add_argument("--mode", choices=[m.value for m in ControlMode],
                           default=None, help="override the config's control mode")

    p_run = sub.add_parser("run", help="execute one simulation")
    add_common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="run all three modes and report")
    add_common(p_cmp, with_mode=False)
    p_cmp.set_defaults(func=_cmd_compare)

    p_sweep = sub.add_parser("sweep", help="run several seeds and aggregate")
    add_common(p_sweep, with_mode=False)
    p_sweep.add_argument("--seeds", type=int, nargs="+", required=True,
                         help="explicit seed list")
    p_sweep.add_argument("--modes", nargs="+", default=list(_MODE_ORDER),
                         choices=[m.value for m in ControlMode])
    p_sweep.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                         help="parallel worker processes")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_val = sub.add_parser("validate", help="check a config, print resolved SI values")
    add_common(p_val)
    p_val.set_defaults(func=_cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
