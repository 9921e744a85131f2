"""Experiment orchestration and bit-stable result files.

Each repetition ``i`` uses seed ``seed + i`` for both the benchmark
instance and the optimiser. Repetitions may run in worker processes; all
files are written by the parent, one file at a time, so outputs do not
depend on the worker count or completion order.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path

import numpy as np

from . import __version__
from .benchmarks import as_problem
from .bo import RunHistory, run
from .complexity import default_pool, greedy_mig, log_grid, sobol_mig, write_mig_csv
from .config import ExperimentConfig
from .exceptions import RunError
from .geometry import locality_report, prop1_table, write_prop1_csv

log = logging.getLogger(__name__)

TRACE_TAIL = (
    "y_raw",
    "y_true",
    "incumbent_value",
    "regret",
    "dist_to_incumbent",
    "min_dist_to_data",
    "ell_median",
    "sigma_eps2",
    "mean_c",
    "fit_restarts_used",
    "wall_ms",
)
QUANTILES = (0.25, 0.75)
TRACE_NAME = re.compile(r"seed_(\d+)\.csv")


def fmt(v) -> str:
    """17 significant digits; enough to round-trip any double."""
    return format(float(v), ".17g")


def provenance(cfg: ExperimentConfig, seed=None) -> str:
    parts = [f"vanillabo={__version__}", f"config_hash={cfg.config_hash()}"]
    if seed is not None:
        parts.append(f"seed={seed}")
    return " ".join(parts)


def trace_columns(dim: int) -> list[str]:
    return ["iteration", *(f"x_{i}" for i in range(dim)), *TRACE_TAIL]


def write_trace(fh, history: RunHistory, header: str, wall_time: bool = False) -> None:
    fh.write(f"# {header}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(trace_columns(history.dim))
    for r in history.records:
        w.writerow(
            [
                r.iteration,
                *(fmt(v) for v in r.x),
                fmt(r.y_raw),
                fmt(r.y_true),
                fmt(r.incumbent_value),
                fmt(r.regret),
                fmt(r.dist_to_incumbent),
                fmt(r.min_dist_to_data),
                fmt(r.ell_median),
                fmt(r.sigma_eps2),
                fmt(r.mean_c),
                r.fit_restarts_used,
                fmt(r.wall_ms if wall_time else 0.0),
            ]
        )


def read_trace(path) -> dict[str, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(rows)
    header = next(reader)
    data = np.array([[float(v) for v in row] for row in reader]).reshape(-1, len(header))
    return {name: data[:, j] for j, name in enumerate(header)}


def _one_run(cfg: ExperimentConfig, seed: int):
    """Worker body; never raises so a failed seed cannot take siblings down."""
    bench = cfg.benchmark(seed)
    try:
        hist = run(as_problem(bench), cfg.bo_config(seed))
        return seed, bench.metadata(), hist, None
    except RunError as exc:
        return seed, bench.metadata(), exc.history, f"{exc}"
    except Exception as exc:  # noqa: BLE001 - isolate arbitrary failures
        return seed, bench.metadata(), None, "".join(traceback.format_exception_only(exc)).strip()


def _run_all(cfg: ExperimentConfig, on_result):
    seeds = [cfg["seed"] + i for i in range(cfg["reps"])]
    workers = min(cfg.worker_count(), len(seeds))
    if workers <= 1:
        for s in seeds:
            on_result(_one_run(cfg, s))
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(_one_run, cfg, s): s for s in seeds}
        for fut in as_completed(futures):
            try:
                on_result(fut.result())
            except Exception as exc:  # worker process died
                on_result((futures[fut], None, None, f"worker crashed: {exc!r}"))


def _regret_summary(regrets: list[np.ndarray]) -> dict:
    if not regrets:
        return {"iterations": 0, "median": [], "q25": [], "q75": []}
    n = min(len(r) for r in regrets)
    R = np.array([r[:n] for r in regrets])
    return {
        "iterations": n,
        "median": np.median(R, axis=0).tolist(),
        "q25": np.quantile(R, QUANTILES[0], axis=0).tolist(),
        "q75": np.quantile(R, QUANTILES[1], axis=0).tolist(),
    }


def _write_aggregate(path: Path, summary: dict, header: str, name="regret") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {header}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", f"{name}_median", f"{name}_q25", f"{name}_q75"])
        for i in range(summary["iterations"]):
            w.writerow([i, fmt(summary["median"][i]), fmt(summary["q25"][i]), fmt(summary["q75"][i])])


def _write_json(path: Path, obj) -> None:
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return None
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        return v

    with open(path, "w", encoding="utf-8") as fh:
        json.dump(clean(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def execute_runs(cfg: ExperimentConfig, out: Path, locality: bool = False) -> int:
    """BO repetitions -> per-seed traces, metadata, summary and aggregates."""
    out.mkdir(parents=True, exist_ok=True)
    (out / "traces").mkdir(exist_ok=True)
    (out / "config.txt").write_text(cfg.canonical(), encoding="utf-8")
    results = {}

    def on_result(res):
        seed, meta, hist, err = res
        results[seed] = (hist, err)
        stem = out / "traces" / f"seed_{seed}"
        if meta is not None:
            _write_json(
                stem.with_suffix(".meta.json"),
                {"benchmark": meta, "config_hash": cfg.config_hash(), "seed": seed,
                 "version": __version__, "error": err},
            )
        if hist is not None and len(hist):
            with open(stem.with_suffix(".csv"), "w", encoding="utf-8", newline="") as fh:
                write_trace(fh, hist, provenance(cfg, seed), cfg["record_wall_time"])
            if locality:
                _write_locality(stem.with_name(f"seed_{seed}.locality.csv"), hist, provenance(cfg, seed))
        if err:
            log.warning("seed %d failed: %s", seed, err)

    _run_all(cfg, on_result)
    return _summarise(cfg, out, results, locality)


def _write_locality(path: Path, hist: RunHistory, header: str) -> None:
    rep = locality_report(hist)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {header}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "dist_to_incumbent", "min_dist_to_data", "phase"])
        for i, d, m, p in zip(rep.iterations, rep.dist_to_incumbent, rep.min_dist_to_data, rep.post_doe):
            w.writerow([int(i), fmt(d), fmt(m), "bo" if p else "doe"])


def _summarise(cfg, out: Path, results: dict, locality: bool) -> int:
    seeds = sorted(results)
    complete = [s for s in seeds if results[s][1] is None]
    regrets = [np.array([r.regret for r in results[s][0].records]) for s in complete]
    summary = {
        "config_hash": cfg.config_hash(),
        "version": __version__,
        "seeds": seeds,
        "completed": complete,
        "failed": {str(s): results[s][1] for s in seeds if results[s][1] is not None},
        "regret": _regret_summary(regrets),
        "final_regret": {str(s): float(r[-1]) for s, r in zip(complete, regrets)},
    }
    header = provenance(cfg)
    _write_aggregate(out / "regret_aggregate.csv", summary["regret"], header)
    if locality:
        dists = [np.nan_to_num(np.array([r.dist_to_incumbent for r in results[s][0].records]))
                 for s in complete]
        loc = _regret_summary(dists)
        summary["dist_to_incumbent"] = loc
        summary["median_post_doe_distance"] = {
            str(s): locality_report(results[s][0]).median_post_doe_distance() for s in complete
        }
        _write_aggregate(out / "locality_aggregate.csv", loc, header, name="dist_to_incumbent")
    _write_json(out / "summary.json", summary)
    return 0 if complete else 1


def execute_mig(cfg: ExperimentConfig, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    n = cfg["mig_n"]
    rows = []
    for spec in cfg.model_classes():
        for dim in cfg["mig_dims"]:
            if cfg["mig_method"] == "greedy":
                curve = greedy_mig(spec, default_pool(spec, dim, n, cfg["seed"]), n, dim)
                idx = log_grid(len(curve.counts)) - 1
                pairs = zip(curve.counts[idx], curve.values[idx])
            else:
                curve = sobol_mig(spec, dim, n, seed=cfg["seed"])
                pairs = zip(curve.counts, curve.values)
            rows += [(spec.variant.value, dim, int(k), g, spec.noise_variance, cfg["seed"])
                     for k, g in pairs]
    with open(out / "mig.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {provenance(cfg, cfg['seed'])}\n")
        write_mig_csv(fh, rows)
    return 0


def execute_prop1(cfg: ExperimentConfig, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    yhats = np.linspace(cfg["prop1_yhat_min"], cfg["prop1_yhat_max"], cfg["prop1_points"])
    with open(out / "prop1.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {provenance(cfg)}\n")
        write_prop1_csv(fh, prop1_table(yhats))
    return 0


def execute_report(cfg: ExperimentConfig, out: Path) -> int:
    """Re-aggregate the traces already present in ``out/traces``."""
    found = [(TRACE_NAME.fullmatch(p.name), p) for p in (out / "traces").glob("seed_*.csv")]
    paths = [p for _, p in sorted(((int(m.group(1)), p) for m, p in found if m), key=lambda t: t[0])]
    if not paths:
        log.error("no traces found under %s", out / "traces")
        return 1
    regrets = [read_trace(p)["regret"] for p in paths]
    summary = _regret_summary(regrets)
    _write_aggregate(out / "report_aggregate.csv", summary, provenance(cfg))
    _write_json(out / "report.json", {"traces": [p.name for p in paths], "regret": summary,
                                      "config_hash": cfg.config_hash(), "version": __version__})
    return 0


COMMANDS = {
    "run": lambda cfg, out: execute_runs(cfg, out),
    "locality": lambda cfg, out: execute_runs(cfg, out, locality=True),
    "mig": execute_mig,
    "prop1": execute_prop1,
    "report": execute_report,
}


def execute(command: str, cfg: ExperimentConfig, out) -> int:
    return COMMANDS[command](cfg, Path(out))
