"""Configuration-driven experiment runner, report emission, and CLI."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile
import time
from typing import Dict, List, Optional

import numpy as np

from . import constants as ct
from . import entropy as ent
from . import linalg as la
from . import ricci as rc
from . import transport as tp
from .config import (
    ExperimentConfig,
    build_generator,
    config_from_json,
    fixtures,
)
from .errors import ConfigError, QBecknerError, UnknownFixture
from .semigroup import DbcLindbladian, evolve
from .verify import verify_suite

TASK_ORDER = ["constants", "decay", "mixing", "transport", "ricci", "verify"]
# decay and mixing run off closed-form constant tables; only the curvature
# cross-report consumes the estimated constants
NEEDS_CONSTANTS = {"ricci"}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return la.matrix_to_json(obj) if obj.ndim == 2 else [_jsonable(v) for v in obj]
    if dataclasses.is_dataclass(obj):
        return _jsonable(dataclasses.asdict(obj))
    return obj


def _is_flat_depol(cfg: ExperimentConfig, L: DbcLindbladian) -> bool:
    d = L.d
    flat = la.frob(L.sigma - np.eye(d) / d) <= 1e-10
    return flat and cfg.generator.get("kind") == "depolarizing"


def _alpha_table(cfg: ExperimentConfig, L: DbcLindbladian) -> Dict[float, float]:
    """Valid lower bounds on the Beckner constants used for decay/mixing
    bounds: the classical reduction for the flat depolarizing model, the
    certified spectral-gap bounds otherwise."""
    lam = L.primitivity.spectral_gap
    if _is_flat_depol(cfg, L):
        gamma = float(cfg.generator.get("gamma", 1.0))
        return {p: gamma * ct.depol_classical(p, L.d) for p in cfg.p_grid}
    smin = L.sigma_min
    return {p: ct.certified_alpha_lower(lam, smin, p) for p in cfg.p_grid}


def run_constants(cfg: ExperimentConfig, L: DbcLindbladian) -> Dict:
    opts = ct.EstimateOpts(num_starts=cfg.num_starts,
                           seed=int(cfg.seeds.get("starts", 0)))
    estimates = {("poincare",): ct.estimate_constant(L, "poincare")}
    for p in cfg.p_grid:
        estimates[("beckner", p)] = ct.estimate_constant(L, "beckner", p=p, opts=opts)
    estimates[("mlsi",)] = ct.estimate_constant(L, "mlsi", opts=opts)
    estimates[("lsi",)] = ct.estimate_constant(L, "lsi", opts=opts)
    for q in cfg.q_grid:
        estimates[("dual_beckner", q)] = ct.estimate_constant(
            L, "dual_beckner", q=q, opts=opts)
    ledger = ct.bound_ledger(estimates, L.sigma_min, cfg.p_grid)
    rows = []
    for key, est in estimates.items():
        rows.append({
            "kind": est.kind,
            "p_or_q": est.param,
            "value": est.value,
            "capped": est.capped,
            "num_starts": est.num_starts,
            "residual": est.best_residual,
        })
    return {
        "rows": rows,
        "ledger": [dataclasses.asdict(e) for e in ledger.entries],
        "ledger_hard_pass": ledger.hard_pass,
        "estimates": {f"{k[0]}" + (f"[{k[1]}]" if len(k) > 1 else ""): est.value
                      for k, est in estimates.items()},
    }


def run_decay(cfg: ExperimentConfig, L: DbcLindbladian) -> Dict:
    rng = np.random.default_rng(int(cfg.seeds.get("master", 7)))
    rho0 = la.random_density(rng, L.d, floor=0.02)
    alphas = _alpha_table(cfg, L)
    ts = np.linspace(0.0, 5.0, 16)
    curves = {}
    for p in cfg.p_grid:
        F0 = ent.p_divergence(rho0, L.sigma, p).value
        rows = []
        for t in ts:
            rho_t = evolve(L, float(t), "schrodinger", rho0)
            F = ent.p_divergence(rho_t, L.sigma, p).value
            bound = float(np.exp(-4.0 * alphas[p] * t / p) * F0)
            rows.append({"t": float(t), "F_p": F, "bound": bound,
                         "within": F <= bound * (1.0 + 1e-6)})
        curves[str(p)] = rows
    all_within = all(r["within"] for rows in curves.values() for r in rows)
    return {"curves": curves, "alphas": {str(p): a for p, a in alphas.items()},
            "all_within_bound": all_within}


def run_mixing(cfg: ExperimentConfig, L: DbcLindbladian) -> Dict:
    alphas = _alpha_table(cfg, L)
    rows = []
    for eps in cfg.epsilons:
        emp = ct.mixing(L, eps, "empirical", seed=int(cfg.seeds.get("master", 7)))
        bound = ct.mixing(L, eps, "bound_inf", alphas=alphas, p_grid=cfg.p_grid)
        rows.append({"epsilon": eps, "empirical": emp, "bound_inf": bound,
                     "within": emp <= bound})
    return {"rows": rows, "all_within_bound": all(r["within"] for r in rows)}


def run_transport(cfg: ExperimentConfig, L: DbcLindbladian) -> Dict:
    rng = np.random.default_rng(int(cfg.seeds.get("master", 7)))
    opts = tp.W2Opts(N=cfg.transport_steps, tol=cfg.transport_tol)
    pairs = [(la.random_density(rng, L.d, floor=0.05),
              la.random_density(rng, L.d, floor=0.05)) for _ in range(2)]
    ps = sorted({min(cfg.p_grid), max(cfg.p_grid)})
    results = []
    for i, (r0, r1) in enumerate(pairs):
        for p in ps:
            dist, path = tp.w2p_solve(L, r0, r1, p, opts)
            entry = {
                "pair": i, "p": p, "distance": dist,
                "converged": path.converged,
                "endpoint_residual": path.endpoint_residual,
                "action_per_step": list(path.action_per_step),
                "uniformity": (max(path.action_per_step)
                               / max(min(path.action_per_step), 1e-300) - 1.0),
                "trace_lower_bound_ok": la.trace_norm(r1 - r0)
                <= tp.trace_distance_prefactor(L, p) * dist * (1 + 1e-9),
            }
            if p == 2.0:
                flat = tp.flat_w22(L, r0, r1)
                entry["flat_w22"] = flat
                entry["flat_gap"] = abs(dist - flat) / max(flat, 1e-300)
            results.append(entry)
    return {"solves": results}


def run_ricci(cfg: ExperimentConfig, L: DbcLindbladian,
              constants_out: Optional[Dict]) -> Dict:
    rng = np.random.default_rng(int(cfg.seeds.get("master", 7)))
    ps = sorted({min(cfg.p_grid), max(cfg.p_grid)})
    out = {}
    states = [la.random_density(rng, L.d, floor=0.05) for _ in range(2)]
    for p in ps:
        est = rc.ricci_estimate(L, p, num_states=cfg.ricci_samples,
                                seed=int(cfg.seeds.get("master", 7)))
        entry = {"kappa": est.kappa, "samples": est.samples,
                 "worst_state": la.matrix_to_json(est.worst_state),
                 "worst_direction": la.matrix_to_json(est.worst_direction)}
        if est.kappa > 0:
            checks = rc.inequality_checks(
                L, p, est.kappa, states, checks=("hwi", "tcp", "diameter"),
                w_opts=tp.W2Opts(N=min(cfg.transport_steps, 12)))
            entry["inequalities"] = checks
            if constants_out is not None:
                alpha = constants_out["estimates"].get(f"beckner[{p}]")
                if alpha is not None:
                    entry["beckner_vs_curvature"] = {
                        "alpha_estimate": alpha, "kappa_p_over_2": est.kappa * p / 2.0}
        out[str(p)] = entry
    return out


def run(cfg: ExperimentConfig) -> Dict:
    """Execute the configured tasks in dependency order; errors per task are
    collected and the run continues. Deterministic given the seeds."""
    report: Dict = {"config": cfg.to_dict(), "results": {}, "errors": {},
                    "timings": {}, "summary": {}}
    tasks = [t for t in TASK_ORDER if t in cfg.tasks]
    if any(t in NEEDS_CONSTANTS for t in tasks) and "constants" not in tasks:
        tasks.insert(0, "constants")
    L = None
    constants_out = None
    failures = []
    for task in tasks:
        t0 = time.perf_counter()
        try:
            if L is None and task != "verify":
                L = build_generator(cfg)
            if task == "constants":
                constants_out = run_constants(cfg, L)
                report["results"]["constants"] = constants_out
                if not constants_out["ledger_hard_pass"]:
                    failures.append("constants.ledger")
            elif task == "decay":
                out = run_decay(cfg, L)
                report["results"]["decay"] = out
                if not out["all_within_bound"]:
                    failures.append("decay.bound")
            elif task == "mixing":
                out = run_mixing(cfg, L)
                report["results"]["mixing"] = out
                if not out["all_within_bound"]:
                    failures.append("mixing.bound")
            elif task == "transport":
                report["results"]["transport"] = run_transport(cfg, L)
            elif task == "ricci":
                report["results"]["ricci"] = run_ricci(cfg, L, constants_out)
            elif task == "verify":
                checks = verify_suite(cfg)
                report["results"]["verify"] = [dataclasses.asdict(c) for c in checks]
                failures.extend(f"verify.{c.name}" for c in checks if c.failed)
        except QBecknerError as exc:
            report["errors"][task] = f"{type(exc).__name__}: {exc}"
            failures.append(f"{task}.error")
        report["timings"][task] = time.perf_counter() - t0
    report["summary"] = {"failures": failures, "passed": not failures}
    return _jsonable(report)


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(rows: List[Dict], columns: List[str]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(str(row.get(c, "")) for c in columns))
    return "\n".join(lines) + "\n"


def emit(report: Dict, fmt: str, outdir: str) -> List[str]:
    """Write the report in the requested format; returns written paths."""
    written = []

    def write(name: str, text: str) -> None:
        path = os.path.join(outdir, name)
        _atomic_write(path, text)
        written.append(path)

    if fmt == "json":
        stripped = {k: v for k, v in report.items() if k != "timings"}
        write("report.json", json.dumps(stripped, indent=2, sort_keys=True))
        write("timings.json", json.dumps(report.get("timings", {}), indent=2,
                                         sort_keys=True))
        return written
    results = report.get("results", {})
    if fmt == "csv":
        if "constants" in results:
            write("constants.csv", _csv(results["constants"]["rows"],
                  ["kind", "p_or_q", "value", "capped", "num_starts", "residual"]))
            write("ledger.json", json.dumps(results["constants"]["ledger"],
                                            indent=2, sort_keys=True))
        if "decay" in results:
            for p, rows in results["decay"]["curves"].items():
                write(f"decay_p{p}.csv", _csv(rows, ["t", "F_p", "bound"]))
        if "mixing" in results:
            write("mixing.csv", _csv(results["mixing"]["rows"],
                  ["epsilon", "empirical", "bound_inf", "within"]))
        if "transport" in results:
            for entry in results["transport"]["solves"]:
                rows = [{"k": k, "action_k": a}
                        for k, a in enumerate(entry["action_per_step"])]
                write(f"action_pair{entry['pair']}_p{entry['p']}.csv",
                      _csv(rows, ["k", "action_k"]))
        if "verify" in results:
            write("verify.csv", _csv(results["verify"],
                  ["name", "status", "lhs", "rhs", "slack"]))
        return written
    if fmt == "plotdata":
        if "decay" in results:
            for p, rows in results["decay"]["curves"].items():
                write(f"decay_p{p}.csv", _csv(rows, ["t", "F_p", "bound"]))
        if "constants" in results:
            rows = [r for r in results["constants"]["rows"] if r["kind"] == "beckner"]
            write("constants_vs_p.csv", _csv(rows, ["p_or_q", "value"]))
        if "transport" in results:
            for entry in results["transport"]["solves"]:
                rows = [{"k": k, "action_k": a}
                        for k, a in enumerate(entry["action_per_step"])]
                write(f"action_pair{entry['pair']}_p{entry['p']}.csv",
                      _csv(rows, ["k", "action_k"]))
        return written
    raise ConfigError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------


def _load_config(args) -> ExperimentConfig:
    if args.config:
        with open(args.config) as fh:
            cfg = config_from_json(fh.read())
    else:
        cfg = fixtures(args.fixture)
    if args.seed is not None:
        cfg.seeds["master"] = args.seed
    return cfg


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="qbeckner",
        description="Functional inequalities and transport metrics of "
                    "detailed-balance quantum Markov semigroups")
    parser.add_argument("task", choices=TASK_ORDER + ["fixtures"],
                        help="task to run, or 'fixtures' to print a canonical config")
    parser.add_argument("--config", help="path to a JSON config")
    parser.add_argument("--fixture", default="depol2",
                        help="fixture name when no --config is given")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--format", default="json",
                        choices=["json", "csv", "plotdata"])
    parser.add_argument("--p", type=float, default=None,
                        help="restrict the p grid to a single value")
    parser.add_argument("--steps", type=int, default=None,
                        help="transport discretization intervals")
    parser.add_argument("--tol", type=float, default=None,
                        help="transport solver tolerance")
    parser.add_argument("--samples", type=int, default=None,
                        help="curvature sample count")
    args = parser.parse_args(argv)

    try:
        if args.task == "fixtures":
            print(fixtures(args.fixture).to_json())
            return 0
        cfg = _load_config(args)
        cfg.tasks = [args.task]
        if args.p is not None:
            cfg.p_grid = [args.p]
        if args.steps is not None:
            cfg.transport_steps = args.steps
        if args.tol is not None:
            cfg.transport_tol = args.tol
        if args.samples is not None:
            cfg.ricci_samples = args.samples
        report = run(cfg)
    except (ConfigError, UnknownFixture, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    paths = emit(report, args.format, args.out)
    if args.format != "json":
        paths += emit(report, "json", args.out)
    for p in paths:
        print(f"wrote {p}")
    if args.task == "verify":
        checks = report["results"].get("verify", [])
        fails = [c for c in checks if c["status"] == "fail"]
        for c in checks:
            print(f"{c['status']:>5}  {c['name']}  slack={c['slack']:.3e}")
        if fails:
            print(f"{len(fails)} checks failed")
            return 1
        return 0
    return 0 if report["summary"]["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
