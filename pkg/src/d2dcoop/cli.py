"""Command-line experiment runner and analysis tool.

Subcommands
    generate             config -> instance JSON
    compare-cooperation  clustered sweep: per-cluster LP energy vs direct downloads
    heuristics           random-layout sweep: greedy / greedy-global / random (exact when small)
    analyze              core / convex / dc-stable / merge-split report for an instance

Exit codes: 0 success, 2 config error, 3 size cap exceeded, 4 solver failure.
Seeds fan out over a process pool capped by the D2D_THREADS environment
variable; result rows are sorted before writing so output is deterministic.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import game, optimizer, stability
from .model import (Coalition, coalition_value, instance_from_json,
                    instance_to_json, plan_energies,
                    standalone_download_energy)
from .scenario import ScenarioConfig, build_instance, cluster_partition
from .simplex import SimplexCycleError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAP = 3
EXIT_SOLVER = 4


class ConfigError(Exception):
    pass


class CapError(Exception):
    pass


@dataclass(frozen=True)
class RunRecord:
    """One algorithm run on one generated instance."""

    scenario_hash: str
    seed: int
    algo: str
    partition: str | None
    total_energy_j: float
    per_user_energy_j: tuple[float, ...]
    wall_time_s: float

    def __post_init__(self):
        total = sum(self.per_user_energy_j)
        scale = max(1.0, abs(self.total_energy_j))
        if np.isfinite(self.total_energy_j) and \
                abs(total - self.total_energy_j) > 1e-9 * scale:
            raise ValueError("per-user energies do not add up to the total")


def _load_config(path) -> ScenarioConfig:
    try:
        return ScenarioConfig.from_file(path)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _load_instance(path):
    try:
        with open(path) as fh:
            return instance_from_json(fh.read())
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _scenario_hash(cfg: ScenarioConfig) -> str:
    doc = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(doc.encode()).hexdigest()[:16]


def _pool_size() -> int:
    env = os.environ.get("D2D_THREADS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def _parse_grid(text: str, as_int: bool):
    try:
        a, b, step = (float(t) for t in text.split(":"))
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}, expected a:b:step") from exc
    if step <= 0 or b < a:
        raise ConfigError(f"bad grid {text!r}")
    vals, v = [], a
    while v <= b + 1e-9:
        vals.append(int(round(v)) if as_int else round(v, 10))
        v += step
    return vals

def _apply_sweep(cfg_doc: dict, sweep: str, value):
    doc = dict(cfg_doc)
    if sweep == "users":
        doc["n_users"] = int(value)
    elif sweep == "files":
        doc["n_files"] = int(value)
    elif sweep == "zipf":
        doc["zipf_exponent"] = float(value)
    else:
        raise ConfigError(f"unknown sweep variable {sweep!r}")
    return doc


# -- compare-cooperation --------------------------------------------------------

def _coop_task(args):
    cfg_doc, sweep, value, seed = args
    cfg = ScenarioConfig.from_dict(_apply_sweep(cfg_doc, sweep, value)).replace(seed=seed)
    inst = build_instance(cfg)
    coop = 0.0
    for block in cluster_partition(cfg):
        _, cost = optimizer.solve_model_a_lp(inst, block)
        coop += cost
    nocoop = standalone_download_energy(inst)
    return {"sweep_var": sweep, "value": value, "seed": seed,
            "coop_energy_J": coop, "nocoop_energy_J": nocoop}


def cmd_compare_cooperation(args) -> int:
    cfg = _load_config(args.config)
    if cfg.layout != "clustered":
        raise ConfigError("compare-cooperation requires a clustered layout")
    base_seed = cfg.seed if args.seed is None else args.seed
    grid = _parse_grid(args.grid, as_int=args.sweep != "zipf")
    tasks = [(cfg.to_dict(), args.sweep, v, base_seed + k)
             for v in grid for k in range(args.seeds)]
    rows = _run_tasks(_coop_task, tasks)
    rows.sort(key=lambda r: (r["sweep_var"], r["value"], r["seed"]))
    _write_csv(args.out, rows,
               ["sweep_var", "value", "seed", "coop_energy_J", "nocoop_energy_J"])
    return EXIT_OK


# -- heuristics -----------------------------------------------------------------

def _heuristics_task(args):
    cfg_doc, sweep, value, seed, caps = args
    cfg = ScenarioConfig.from_dict(_apply_sweep(cfg_doc, sweep, value)).replace(seed=seed)
    inst = build_instance(cfg)
    S = inst.grand_coalition()
    shash = _scenario_hash(cfg)
    ranks = tuple(range(1, inst.n_files + 1))
    rows, skipped = [], False

    def record(algo, run):
        t0 = time.perf_counter()
        result = run()
        wall = time.perf_counter() - t0
        if result.complete:
            plan = result.assignment.to_plan(inst, S)
            pe = plan_energies(inst, S, plan)
            per_user = tuple(pe.user_total(i) for i in S)
            energy = pe.total()
        else:
            per_user, energy = (), float("inf")
        rec = RunRecord(shash, seed, algo, None, energy, per_user, wall)
        rows.append({"sweep_var": sweep, "value": value, "seed": seed,
                     "algo": algo, "energy_J": rec.total_energy_j})

    record("greedy", lambda: optimizer.greedy_assign(inst, S, ranks))
    record("greedy-global", lambda: optimizer.greedy_global_assign(inst, S))
    record("random", lambda: optimizer.random_assign(inst, S, seed=seed))
    max_files, max_users = caps
    n_requested = len(inst.requested_files(S))
    if n_requested <= max_files and len(S) <= max_users:
        try:
            assignment, cost = optimizer.solve_model_b_exact(
                inst, S, max_files=max_files, max_users=max_users)
            rows.append({"sweep_var": sweep, "value": value, "seed": seed,
                         "algo": "exact", "energy_J": cost})
        except optimizer.InfeasibleError:
            rows.append({"sweep_var": sweep, "value": value, "seed": seed,
                         "algo": "exact", "energy_J": float("inf")})
    else:
        skipped = True
    return rows, skipped


def cmd_heuristics(args) -> int:
    cfg = _load_config(args.config)
    if cfg.layout != "random":
        raise ConfigError("heuristics experiment requires the random layout")
    try:
        max_files, max_users = (int(t) for t in args.exact_caps.split(":"))
    except ValueError as exc:
        raise ConfigError(f"bad --exact-caps {args.exact_caps!r}") from exc
    base_seed = cfg.seed if args.seed is None else args.seed
    grid = _parse_grid(args.grid, as_int=args.sweep != "zipf")
    tasks = [(cfg.to_dict(), args.sweep, v, base_seed + k, (max_files, max_users))
             for v in grid for k in range(args.seeds)]
    outputs = _run_tasks(_heuristics_task, tasks)
    rows = [r for out, _ in outputs for r in out]
    if any(skipped for _, skipped in outputs):
        print("note: exact solver skipped where size caps were exceeded",
              file=sys.stderr)
    rows.sort(key=lambda r: (r["sweep_var"], r["value"], r["seed"], r["algo"]))
    _write_csv(args.out, rows, ["sweep_var", "value", "seed", "algo", "energy_J"])
    return EXIT_OK


# -- generate / analyze ----------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    inst = build_instance(cfg)
    with open(args.out, "w") as fh:
        fh.write(instance_to_json(inst))
        fh.write("\n")
    return EXIT_OK


def _parse_partition(text: str, n: int) -> stability.Partition:
    try:
        blocks = [[int(t) for t in part.split(",")] for part in text.split("|")]
        return stability.Partition.of(blocks, n)
    except ValueError as exc:
        raise ConfigError(f"bad partition spec {text!r}: {exc}") from exc


def cmd_analyze(args) -> int:
    inst = _load_instance(args.instance)
    n = inst.n_users
    oracle = game.ValueOracle.from_instance(inst, mode=args.mode)
    report: dict = {"analysis": args.analysis, "users": n}
    try:
        if args.analysis == "core":
            res = game.check_core(oracle, n)
            report["status"] = res.status
            if res.witness is not None:
                report["witness"] = list(res.witness.x)
            if res.blocking is not None:
                report["blocking"] = [list(c.members) for c in res.blocking]
        elif args.analysis == "convex":
            ok, pair = game.check_convex(oracle, n)
            report["convex"] = ok
            if pair is not None:
                report["witness"] = [list(c.members) for c in pair]
        elif args.analysis == "dc-stable":
            if not args.partition:
                raise ConfigError("dc-stable analysis needs --partition")
            P = _parse_partition(args.partition, n)
            res = stability.is_dc_stable(oracle, P, n)
            report["partition"] = [list(b.members) for b in P]
            report["verdict"] = res.verdict
            if res.witness is not None:
                if isinstance(res.witness, Coalition):
                    report["witness"] = list(res.witness.members)
                else:
                    report["witness"] = [list(c.members) for c in res.witness]
        elif args.analysis == "merge-split":
            initial = (_parse_partition(args.partition, n)
                       if args.partition else None)
            res = stability.merge_and_split(oracle, n, initial)
            report["final"] = [list(b.members) for b in res.partition]
            report["value"] = stability.partition_value(oracle, res.partition)
            report["log"] = [json.loads(line) for line in
                             stability.oplog_to_jsonl(res.log).splitlines()]
        else:
            raise ConfigError(f"unknown analysis {args.analysis!r}")
    except ValueError as exc:
        if "capped" in str(exc):
            raise CapError(str(exc)) from exc
        raise
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


# -- plumbing ---------------------------------------------------------------------

def _run_tasks(fn, tasks):
    workers = min(_pool_size(), len(tasks)) if tasks else 1
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _write_csv(path, rows, header):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=header)
        writer.writeheader()
        writer.writerows(rows)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="d2dcoop",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate an instance from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("compare-cooperation",
                       help="cluster-coalition LP energy vs direct downloads")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--seed", type=int, default=None, help="base seed override")
    p.add_argument("--sweep", choices=["users", "files", "zipf"], required=True)
    p.add_argument("--grid", required=True, help="a:b:step")
    p.set_defaults(fn=cmd_compare_cooperation)

    p = sub.add_parser("heuristics",
                       help="greedy / greedy-global / random comparison")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--sweep", choices=["users", "files", "zipf"], required=True)
    p.add_argument("--grid", required=True, help="a:b:step")
    p.add_argument("--exact-caps", default="12:12",
                   help="files:users caps for the exact solver")
    p.set_defaults(fn=cmd_heuristics)

    p = sub.add_parser("analyze", help="game analysis of an instance file")
    p.add_argument("--instance", required=True)
    p.add_argument("--analysis", required=True,
                   choices=["core", "convex", "dc-stable", "merge-split"])
    p.add_argument("--partition", default=None, help='e.g. "1,2|3,4"')
    p.add_argument("--mode", choices=["fractional", "binary"], default="fractional")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_analyze)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CapError, optimizer.CapExceededError) as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (SimplexCycleError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
