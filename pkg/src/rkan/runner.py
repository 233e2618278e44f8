"""Seed sweeps over a parsed config, flat CSV results and a median summary."""

from __future__ import annotations

import csv
import json
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from importlib import resources

from .config import ExperimentConfig, parse_config
from .experiments import (GRADCHECK_TOL, OdeTask, RegressionTask, gradient_check, solve_elliptic_pde,
                          solve_lane_emden, train_regression)
from .layers import RKAN_KINDS

CSV_COLUMNS = ("experiment", "seed", "layer", "K", "p", "mapping", "train_mse", "test_mse",
               "root", "root_err", "max_abs_err", "wall_s", "status")
_FLOAT_COLUMNS = ("train_mse", "test_mse", "root", "root_err", "max_abs_err", "wall_s")
_INT_COLUMNS = ("seed", "K", "p")

REPLICATIONS = ("table1", "table2", "table3", "table5", "pde")


@dataclass
class ResultRow:
    experiment: str
    seed: int
    layer: str
    K: int
    p: int
    mapping: str
    train_mse: float | None = None
    test_mse: float | None = None
    root: float | None = None
    root_err: float | None = None
    max_abs_err: float | None = None
    wall_s: float = 0.0
    status: str = "ok"
    config_hash: str = field(default="", compare=False)

    def to_record(self) -> dict:
        rec = {}
        for name in CSV_COLUMNS:
            v = getattr(self, name)
            if v is None:
                rec[name] = ""
            elif name == "wall_s":
                rec[name] = f"{v:.3f}"
            elif name in _FLOAT_COLUMNS:
                rec[name] = repr(float(v))
            else:
                rec[name] = str(v)
        return rec

    @classmethod
    def from_record(cls, rec: dict, config_hash="") -> "ResultRow":
        kw = {}
        for name in CSV_COLUMNS:
            text = rec[name]
            if name in _INT_COLUMNS:
                kw[name] = int(text)
            elif name in _FLOAT_COLUMNS:
                kw[name] = float(text) if text != "" else None
            else:
                kw[name] = text
        return cls(**kw, config_hash=config_hash)


def effective_mapping(layer, mapping):
    """Name of the domain map a layer kind actually applies."""
    if layer == "jacobi-rkan":
        return mapping or "inf-alg"
    if layer == "fjacobi-rkan":
        return mapping or "semi-alg"
    if layer == "fpade-rkan":
        return "fractional"
    if layer == "pade-rkan":
        return "identity"
    return "none"


def _row(config: ExperimentConfig, seed, report=None, **override) -> ResultRow:
    net = config.network
    row = ResultRow(config.experiment, seed, net.layer, net.degree, net.den_degree,
                    effective_mapping(net.layer, net.mapping), config_hash=config.hash())
    if report is not None:
        for name in ("train_mse", "test_mse", "root", "root_err", "max_abs_err", "wall_s", "status"):
            setattr(row, name, getattr(report, name))
    for k, v in override.items():
        setattr(row, k, v)
    return row


def run_seed(config: ExperimentConfig, seed: int) -> list:
    """All result rows for one seed; failures become status rows."""
    start = time.perf_counter()
    try:
        if config.experiment == "gradcheck":
            rows = []
            for kind in RKAN_KINDS:
                for mode in ("kan", "activation"):
                    t0 = time.perf_counter()
                    err = gradient_check(kind, seed, as_activation=(mode == "activation"),
                                         degree=config.network.degree, den_degree=config.network.den_degree)
                    rows.append(_row(config, seed, layer=f"{kind}:{mode}",
                                     mapping=effective_mapping(kind, None), max_abs_err=err,
                                     wall_s=time.perf_counter() - t0,
                                     status="ok" if err < GRADCHECK_TOL else "failed"))
            return rows
        if config.experiment == "regression":
            report = train_regression(RegressionTask(config.target, seed=seed), config.network, config.optimizer)
        elif config.experiment == "lane-emden":
            report = solve_lane_emden(config.w, config.network, config.optimizer, seed, OdeTask(config.w))
        else:
            report = solve_elliptic_pde(config.network, config.optimizer, seed)
        return [_row(config, seed, report)]
    except Exception as exc:  # one bad seed must not sink the sweep
        return [_row(config, seed, wall_s=time.perf_counter() - start, status=f"error:{type(exc).__name__}")]


def resolve_seeds(config: ExperimentConfig, seeds=None):
    """Command-line seeds beat ``RKAN_SEED``, which beats the config file."""
    if seeds:
        return list(seeds)
    env = os.environ.get("RKAN_SEED", "").strip()
    if env:
        return [int(s) for s in env.replace(",", " ").split()]
    return list(config.seeds)


def run(config: ExperimentConfig, seeds=None, parallel=1) -> list:
    seeds = resolve_seeds(config, seeds)
    job = partial(run_seed, config)
    if parallel > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            per_seed = list(pool.map(job, seeds))
    else:
        per_seed = [job(s) for s in seeds]
    return [row for rows in per_seed for row in rows]


def write_csv(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row.to_record())


def read_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        return [ResultRow.from_record(rec) for rec in reader]


def write_sidecar(configs, path):
    """Config echo keyed by hash, so CSV rows can be traced back to their settings."""
    payload = {cfg.hash(): cfg.canonical() for cfg in configs}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def summarize(rows) -> str:
    """One line: medians over rows that finished ``ok``."""
    ok = [r for r in rows if r.status == "ok"]
    parts = [f"{len(ok)}/{len(rows)} ok"]
    for name in ("train_mse", "test_mse", "root", "root_err", "max_abs_err"):
        vals = [getattr(r, name) for r in ok if getattr(r, name) is not None]
        if vals:
            parts.append(f"{name}={statistics.median(vals):.4e}")
    return "median " + " ".join(parts)


def all_ok(rows) -> bool:
    return bool(rows) and all(r.status == "ok" for r in rows)


def replication_configs(name):
    """Bundled ``(filename, ExperimentConfig)`` pairs for a replication target."""
    if name not in REPLICATIONS:
        raise ValueError(f"unknown replication {name!r}; expected one of {REPLICATIONS}")
    folder = resources.files("rkan") / "configs" / name
    entries = sorted((e for e in folder.iterdir() if e.name.endswith(".ini")), key=lambda e: e.name)
    return [(e.name, parse_config(e.read_text(encoding="utf-8"))) for e in entries]
