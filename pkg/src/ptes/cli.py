"""Command-line entry point.

Exit codes: 0 success, 2 input error, 3 a solve did not converge (artifacts
are still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import plots
from .capability import (
    CapabilitySpec,
    capability_grid,
    coefficients_from_fits,
    fit_capability_params,
    sample_curves,
)
from .cem import (
    CemOptions,
    cem_report,
    cluster_weeks,
    load_system,
    solve_cem_specs,
    toy_system,
    validate_cem,
)
from .design import reference_design
from .dispatch import build_problem
from .errors import InputError, PtesError
from .io import (
    PriceInput,
    RunConfig,
    analyze_directory,
    load_config,
    run_dispatch,
    run_full_pipeline,
    synthetic_prices,
    write_json,
)
from .lp import Status
from .optimizer import solve_milp_piecewise, solve_piecewise_lp, with_options

log = logging.getLogger("ptes")

CEM_SPECS = ("A", "B:M", "C2:75", "C3", "D", "E")
TOY_PERIODS = 3
CEM_TIME_LIMIT = 900.0  # s per model; Model A fixed points are slow on CEM LPs


class NotConverged(Exception):
    pass


def _models(arg: str | None, default) -> list[str]:
    return _split_tags(arg) if arg else list(default)


def _split_tags(arg: str) -> list[str]:
    """Split a comma list of tags where ``CN:x1,x2`` breakpoint lists may
    contain commas: a bare number continues the previous tag."""
    out: list[str] = []
    for part in (p.strip() for p in arg.split(",")):
        if not part:
            continue
        if out and _is_number(part) and ":" in out[-1] and out[-1].upper().startswith("C"):
            out[-1] += "," + part
        else:
            out.append(part)
    return out


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _config(args) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
    elif args.seed is not None:
        cfg = RunConfig(prices=[PriceInput(f"synthetic_168h_s{args.seed}", hours=168, seed=args.seed)])
    else:
        cfg = RunConfig()
    changes = {}
    if args.models:
        changes["models"] = _models(args.models, cfg.models)
    if args.reps is not None:
        changes["repetitions"] = args.reps
    if args.policy:
        changes["policy"] = args.policy
    if args.out:
        changes["out_dir"] = args.out
    return replace(cfg, **changes) if changes else cfg


def _check_runs(runs) -> None:
    bad = [f"{r.model}/{r.dataset}" for r in runs if not r.converged]
    if bad:
        raise NotConverged("no convergence for " + ", ".join(bad))


# ---------------------------------------------------------------------- verbs


def cmd_capability_dump(args) -> None:
    out = Path(args.out or "capability")
    out.mkdir(parents=True, exist_ok=True)
    tags = _models(args.models, ("A", "B:M", "B:H", "C2:75", "C3", "D", "E"))
    frames = []
    for tag in tags:
        spec = CapabilitySpec.parse(tag)
        rows = capability_grid(spec, n=101, p_levels=(0.3, 0.5, 0.75, 1.0))
        frames.append(pd.DataFrame(rows, columns=["soc_pct", "p", "eta_ch", "eta_dis"]).assign(model=spec.tag))
    pd.concat(frames, ignore_index=True).to_csv(out / "capability.csv", index=False, lineterminator="\n")
    plots.capability_curves(tags, out / "capability.svg")
    print(f"wrote {out / 'capability.csv'}")


def cmd_dispatch(args) -> None:
    cfg = _config(args)
    runs = run_dispatch(cfg)
    for r in runs:
        print(f"{r.dataset:>24s} {r.model:>8s} profit {r.solution.objective:12.4f} "
              f"status {r.stats[0].status.value}")
    _check_runs(runs)


def cmd_batch(args) -> None:
    cfg = _config(args)
    bundle = run_full_pipeline(cfg, workers=args.workers)
    print(f"bundle written to {bundle['out_dir']}")
    _check_runs(bundle["runs"])


def cmd_analyze(args) -> None:
    run_dir = Path(args.out or "out")
    cfg = load_config(args.config) if args.config else RunConfig()
    tables = analyze_directory(run_dir, cfg.design, cfg.reference, cfg.speed_weight)
    print(tables["tradeoff"][["model", "rmsd_soc_mean", "rmsd_w_mean", "time_ratio_mean"]].to_string(index=False))


def cmd_cem(args) -> None:
    out = Path(args.out or "cem_out")
    out.mkdir(parents=True, exist_ok=True)
    system = load_system(args.system) if args.system else toy_system(seed=args.seed or 0)
    periods = cluster_weeks(system.series(), args.periods, seed=args.seed or 0)
    specs = _models(args.models, CEM_SPECS)
    t0 = time.perf_counter()
    limit = args.time_limit if args.time_limit and args.time_limit > 0 else float("inf")
    sols, probs = solve_cem_specs(system, periods, specs, CemOptions(time_limit=limit), return_problems=True)
    report = cem_report(sols, probs)
    for name, df in report.items():
        df.to_csv(out / f"cem_{name}.csv", index=False, lineterminator="\n")
    if not report["soc"].empty:
        plots.cem_soc_plot(report["soc"], out / "cem_soc.svg")
    if not report["ecdf"].empty:
        plots.ecdf_plot(report["ecdf"], out / "cem_ecdf.svg", group="spec")
    meta = {
        "rep_weeks": periods.rep_weeks.tolist(),
        "weights": periods.weights.tolist(),
        "wall_time_s": time.perf_counter() - t0,
        "specs": {
            tag: {
                "total_cost": s.total_cost,
                "status": s.status.value,
                "iterations": s.iterations,
                "wall_time_s": s.wall_time,
                "notes": s.notes,
                **validate_cem(probs[tag], s),
            }
            for tag, s in sols.items()
        },
    }
    write_json(meta, out / "cem_meta.json")
    print(report["costs"].to_string(index=False))
    bad = [t for t, s in sols.items() if s.status != Status.OPTIMAL]
    if bad:
        raise NotConverged("CEM did not converge for " + ", ".join(bad))


def cmd_bench_piecewise(args) -> None:
    """Continuous LP against the segment-selection MILP on synthetic prices.
    Time ratios are relative to the median LP time of the same instance."""
    out = Path(args.out or "bench")
    out.mkdir(parents=True, exist_ok=True)
    tags = _models(args.models, ("C2:75", "C3"))
    reps = args.reps or 5
    rows = []
    design = reference_design()
    for hours in (24, 168):
        prices = synthetic_prices(hours, args.seed or 0)
        for tag in tags:
            spec = CapabilitySpec.parse(tag)
            problem = build_problem(design, spec, prices)
            runs = {}
            for name, fn in (("lp", solve_piecewise_lp), ("milp", solve_milp_piecewise)):
                sols = [fn(problem, with_options(None)) for _ in range(reps)]
                runs[name] = (sols[0], np.array([s.stats.wall_time for s in sols]))
            base = float(np.median(runs["lp"][1]))
            ref_obj = runs["lp"][0].objective
            for name, (sol, times) in runs.items():
                ratio = times / base
                rows.append({"hours": hours, "model": spec.tag, "formulation": name, "N": spec.n_segments,
                             "mean_time_ratio": ratio.mean(), "min": ratio.min(), "max": ratio.max(),
                             "objective": sol.objective,
                             "rel_diff_to_lp": abs(sol.objective - ref_obj) / max(abs(ref_obj), 1e-12),
                             "nodes": sol.stats.nodes, "status": sol.stats.status.value})
    df = pd.DataFrame(rows)
    df.to_csv(out / "bench_piecewise.csv", index=False, lineterminator="\n")
    print(df.to_string(index=False))


def cmd_fit(args) -> None:
    """Fit part-load coefficients from ``side,p,soc_pct,eta`` samples (or
    synthetic samples when no file is given)."""
    out = Path(args.out or "fit")
    out.mkdir(parents=True, exist_ok=True)
    if args.samples:
        df = pd.read_csv(args.samples)
        missing = {"side", "p", "soc_pct", "eta"} - set(df.columns)
        if missing:
            raise InputError(f"{args.samples}: missing columns {sorted(missing)}")
        by_side = {
            side: {float(p): (g.soc_pct.to_numpy(), g.eta.to_numpy()) for p, g in df[df.side == side].groupby("p")}
            for side in ("charge", "discharge")
        }
    else:
        levels = (0.3, 0.5, 0.75, 1.0)
        by_side = {side: sample_curves(levels, side, noise=0.005, seed=args.seed or 0) for side in ("charge", "discharge")}
    fits = {side: fit_capability_params(s, side) for side, s in by_side.items()}
    doc = {side: asdict(f) for side, f in fits.items()}
    try:
        doc["coefficients"] = asdict(coefficients_from_fits(fits["charge"], fits["discharge"]))
    except PtesError as exc:
        doc["coefficients"] = None
        doc["note"] = str(exc)
    write_json(doc, out / "fit.json")
    print(json.dumps(doc.get("coefficients"), indent=2))


VERBS = {
    "capability-dump": cmd_capability_dump,
    "dispatch": cmd_dispatch,
    "batch": cmd_batch,
    "analyze": cmd_analyze,
    "cem": cmd_cem,
    "bench-piecewise": cmd_bench_piecewise,
    "fit": cmd_fit,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ptes", description="PTES capability models: dispatch, analysis and CEM")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        p = sub.add_parser(verb)
        p.add_argument("--config", help="YAML or JSON run config")
        p.add_argument("--models", help="comma-separated model tags, e.g. A,B:M,C3")
        p.add_argument("--out", help="output directory")
        p.add_argument("--reps", type=int, help="timing repetitions")
        p.add_argument("--policy", choices=("reject", "interpolate"), help="missing-hour policy for price CSVs")
        p.add_argument("--seed", type=int, help="RNG seed for synthetic inputs (default 0)")
        if verb == "batch":
            p.add_argument("--workers", type=int, default=1, help="parallel dispatch jobs")
        if verb == "cem":
            p.add_argument("--system", help="system YAML/JSON (default: bundled toy system)")
            p.add_argument("--periods", type=int, default=TOY_PERIODS, help="representative weeks")
            p.add_argument("--time-limit", type=float, default=CEM_TIME_LIMIT,
                           help="seconds per model; 0 for none (default %(default)s)")
        if verb == "fit":
            p.add_argument("--samples", help="CSV with side,p,soc_pct,eta")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        VERBS[args.verb](args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except NotConverged as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
