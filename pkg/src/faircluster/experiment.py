"""Experiment orchestration: (k, delta) grids, reports, and plot-ready CSVs.

Per cell we run the vanilla solver, the fair pipeline, and optionally the
almost-fair LP and the brute-force oracle. Outputs:

  report.json  - full nested report (config echo, per-cell metrics, timings)
  cells.csv    - one flat row per grid cell, no timings, byte-reproducible
  clusters.csv - long-format per-cluster group counts and balance

Cell failures are recorded with a status and the run continues; partial
failure is reflected in the process exit code, not an exception.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .fair import fair_clustering
from .ingest import IngestResult, ingest
from .instance import FairnessProfile, delta_to_profile
from .lower_bounded import lb_clustering
from .oracle import GuardExceededError, almost_fair_lp, brute_force_fair
from .vanilla import SolverId, default_solver_for

log = logging.getLogger("faircluster")

_CSV_FIELDS = [
    "k", "delta", "solver_id", "seed", "n", "vanilla_cost", "fair_cost",
    "cost_of_fairness", "lambda_max", "lp_objective", "aflp_cost",
    "opt_vnll", "opt_fair", "rounding_iterations", "status",
]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if not math.isfinite(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def _resolve_solver(config: ExperimentConfig) -> SolverId:
    if config.solver_id is None:
        return default_solver_for(config.p)
    try:
        return SolverId(config.solver_id)
    except ValueError:
        names = sorted(s.value for s in SolverId)
        raise ValueError(f"unknown solver_id {config.solver_id!r}; choose from {names}")


def _run_cell(instance, config: ExperimentConfig, k: int, delta, solver: SolverId) -> dict:
    inst = instance.with_k(k)
    if delta == "vacuous":
        profile = FairnessProfile.vacuous(inst.ell)
    else:
        profile = delta_to_profile(inst, float(delta))
    t0 = time.perf_counter()
    cell: dict = {"k": k, "delta": delta, "solver_id": solver.value,
                  "seed": config.seed, "n": inst.n, "status": "ok", "warnings": []}
    try:
        run = fair_clustering(inst, profile, solver, seed=config.seed)
        hard_bound = 4 * inst.delta + 3
        if run.lambda_observed > hard_bound:
            raise AssertionError(
                f"violation {run.lambda_observed} exceeds hard bound {hard_bound}"
            )
        fair_cost = run.solution.cost_p
        report = run.report
        cell.update({
            "vanilla_cost": run.vanilla.cost_p,
            "fair_cost": fair_cost,
            "cost_of_fairness": report.cost_of_fairness,
            "lambda_max": report.lambda_max,
            "rounding_iterations": run.fair.rounding_iterations,
            "lp_objective": run.fair.initial_lp_objective,
            "radius": run.fair.guess,
            "per_cluster_balance": report.balance,
            "cluster_sizes": report.cluster_sizes,
            "group_counts": {f: list(c) for f, c in report.group_counts.items()},
            "largest_clusters": [f for f, _ in sorted(
                report.cluster_sizes.items(), key=lambda kv: (-kv[1], kv[0]))[:3]],
            "timings_ms": dict(report.timings_ms),
        })
        if run.fair.initial_lp_objective is not None:
            floor = run.fair.initial_lp_objective ** (1.0 / config.p)
            if fair_cost < floor - 1e-6 * max(1.0, floor):
                # rounding may legitimately undercut the fair LP once windows
                # replace the ratio rows; report it rather than fail
                cell["warnings"].append(
                    f"fair cost {fair_cost:.6g} below LP floor {floor:.6g}"
                )
        if config.run_aflp and not math.isinf(config.p):
            cell["aflp_cost"] = almost_fair_lp(inst, profile, lam=report.lambda_max)
        if config.run_oracle:
            try:
                orc = brute_force_fair(inst, profile)
                cell["opt_vnll"] = orc.opt_vnll
                cell["opt_fair"] = orc.opt_fair
            except GuardExceededError as exc:
                cell["warnings"].append(f"oracle skipped: {exc}")
    except Exception as exc:  # noqa: BLE001 - cell isolation is the contract
        log.warning("cell (k=%s, delta=%s) failed: %s", k, delta, exc)
        cell["status"] = f"failed: {exc}"
    cell["wall_ms"] = (time.perf_counter() - t0) * 1e3
    return cell


@dataclass(frozen=True)
class ExperimentSummary:
    report_path: Path
    cells_path: Path
    clusters_path: Path
    statuses: tuple[str, ...]

    @property
    def all_ok(self) -> bool:
        return all(s == "ok" for s in self.statuses)


def run_experiment(config: ExperimentConfig, ingest_result: IngestResult | None = None) -> ExperimentSummary:
    """Run the full (k, delta) grid and write report.json / cells.csv / clusters.csv."""
    ing = ingest_result or ingest(config)
    instance = ing.instance
    solver = _resolve_solver(config)
    grid = [(k, d) for k in config.k_values for d in config.delta_values]
    log.info("running %d cells on n=%d points (solver=%s)",
             len(grid), instance.n, solver.value)

    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            futures = {cellkey: pool.submit(_run_cell, instance, config, k, d, solver)
                       for cellkey, (k, d) in enumerate(grid)}
            cells = [futures[i].result() for i in range(len(grid))]
    else:
        cells = [_run_cell(instance, config, k, d, solver) for k, d in grid]

    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)

    report = {
        "config": _json_safe({
            "dataset_path": config.dataset_path,
            "coordinate_columns": list(config.coordinate_columns),
            "sensitive_attributes": [
                {"column": a.column, "groups": a.groups} for a in config.sensitive_attributes
            ],
            "k_values": list(config.k_values),
            "p": "inf" if math.isinf(config.p) else config.p,
            "delta_values": list(config.delta_values),
            "max_points": config.max_points,
            "seed": config.seed,
            "solver_id": solver.value,
            "standardize": config.standardize,
        }),
        "ingest": {
            "rows_total": ing.rows_total,
            "rows_dropped": ing.rows_dropped,
            "n": instance.n,
            "groups": list(ing.group_names),
            "delta_overlap": instance.delta,
            "violation_hard_bound": 4 * instance.delta + 3,
        },
        "cells": [_json_safe(c) for c in cells],
    }
    report_path = outdir / "report.json"
    with open(report_path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")

    cells_path = outdir / "cells.csv"
    with open(cells_path, "w") as fh:
        fh.write(",".join(_CSV_FIELDS) + "\n")
        for c in cells:
            fh.write(",".join(_fmt(c.get(f)) for f in _CSV_FIELDS) + "\n")

    clusters_path = outdir / "clusters.csv"
    with open(clusters_path, "w") as fh:
        fh.write("k,delta,facility,size,balance,top3," +
                 ",".join(f"count_{g}" for g in ing.group_names) + "\n")
        for c in cells:
            if c["status"] != "ok":
                continue
            top3 = set(c["largest_clusters"])
            for f in sorted(c["cluster_sizes"]):
                counts = c["group_counts"][f]
                bal = c["per_cluster_balance"].get(f)
                fh.write(",".join([
                    _fmt(c["k"]), _fmt(c["delta"]), _fmt(f),
                    _fmt(c["cluster_sizes"][f]), _fmt(bal), _fmt(int(f in top3)),
                ] + [_fmt(x) for x in counts]) + "\n")

    return ExperimentSummary(
        report_path=report_path, cells_path=cells_path, clusters_path=clusters_path,
        statuses=tuple(c["status"] for c in cells),
    )


def run_lb(config: ExperimentConfig, L: int | None = None) -> Path:
    """Lower-bounded clustering over the configured k grid; writes lb_report.json."""
    L = config.L if L is None else L
    if L is None or L < 1:
        raise ValueError("lower-bounded mode needs a positive L")
    ing = ingest(config)
    solver = _resolve_solver(config)
    rows = []
    for k in config.k_values:
        inst = ing.instance.with_k(k)
        t0 = time.perf_counter()
        try:
            res = lb_clustering(inst, L=L, solver_id=solver, seed=config.seed)
            rows.append({
                "k": k, "L": L, "status": "ok",
                "cost": res.solution.cost_p,
                "vanilla_cost": res.vanilla.cost_p,
                "opened": list(res.solution.opened),
                "cluster_sizes": res.solution.cluster_sizes(),
                "subsets_evaluated": res.subsets_evaluated,
                "wall_ms": (time.perf_counter() - t0) * 1e3,
            })
        except Exception as exc:  # noqa: BLE001
            rows.append({"k": k, "L": L, "status": f"failed: {exc}"})
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "lb_report.json"
    with open(path, "w") as fh:
        json.dump({"rows": [_json_safe(r) for r in rows]}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def run_oracle(config: ExperimentConfig) -> Path:
    """Brute-force optima per (k, delta); tiny instances only (guarded)."""
    ing = ingest(config)
    rows = []
    for k in config.k_values:
        for d in config.delta_values:
            inst = ing.instance.with_k(k)
            profile = FairnessProfile.vacuous(inst.ell) if d == "vacuous" \
                else delta_to_profile(inst, float(d))
            try:
                orc = brute_force_fair(inst, profile)
                rows.append({"k": k, "delta": d, "status": "ok",
                             "opt_vnll": orc.opt_vnll, "opt_fair": orc.opt_fair})
            except GuardExceededError as exc:
                rows.append({"k": k, "delta": d, "status": f"skipped: {exc}"})
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "oracle_report.json"
    with open(path, "w") as fh:
        json.dump({"rows": [_json_safe(r) for r in rows]}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
