"""Command-line workbench: simulate, detect-eval, sensitivity, compare, report.

Exit codes: 0 success, 1 usage error, 2 configuration error, 3 simulation
failure.  ``WORKBENCH_THREADS`` bounds worker parallelism.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .detector import events_to_csv
from .model import FS_OUT, SimulationBlowup
from .protocol import (detect_eval, run_cohort, run_protocol, summarize,
                       write_boxplot_csv, write_detect_eval_csv,
                       write_runs_csv, write_summary_csv)
from .report import write_report
from .scenario import (SCENARIO_KINDS, make_scenario, run_sensitivity,
                       sensitivity_report_csv)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_SIM = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_config(args) -> cfgmod.RunConfiguration:
    if getattr(args, "config", None):
        run_config = cfgmod.load(args.config)
    else:
        run_config = cfgmod.RunConfiguration()
    if getattr(args, "scenario", None):
        run_config.scenario = args.scenario
    if getattr(args, "controller", None):
        run_config.controller = args.controller
    if getattr(args, "seed", None) is not None:
        run_config.seed = args.seed
    run_config.validate()
    return run_config


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _snapshot(run_config, outdir: Path) -> None:
    cfgmod.save(outdir / "config.kv", run_config)


def cmd_simulate(args) -> int:
    run_config = _load_config(args)
    out = _outdir(args)
    scenario = (make_scenario(run_config.scenario)
                if run_config.scenario != "none" else None)
    setup = run_config.setup()
    if args.speed is not None:
        setup.protocol.constant_speed = args.speed
    controller = run_config.controller
    result = run_protocol(None, scenario, controller, setup,
                          enforce_eligibility=False, keep_trace=True,
                          noise_seed=run_config.seed)
    if not result.ok or result.trace is None:
        print(f"simulation failed: status={result.status}", file=sys.stderr)
        return EXIT_SIM
    result.trace.to_csv(out / "trace.csv")
    _snapshot(run_config, out)
    with open(out / "run.kv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"status = {result.status}\n"
                 f"sae = {result.sae!r}\n"
                 f"setpoint = {result.setpoint!r}\n"
                 f"congestion = {'true' if result.congestion else 'false'}\n"
                 f"suction = {'true' if result.suction else 'false'}\n"
                 f"min_plv = {result.min_plv!r}\n"
                 f"rows = {len(result.trace)}\n")
    print(f"wrote {out / 'trace.csv'} ({len(result.trace)} rows at "
          f"{FS_OUT:.0f} Hz)")
    return EXIT_OK


def cmd_detect_eval(args) -> int:
    run_config = _load_config(args)
    try:
        levels = [float(v) for v in args.variances.split(",") if v != ""]
    except ValueError:
        raise UsageError(f"bad variance list {args.variances!r}")
    if not levels:
        raise UsageError("empty variance list")
    if args.patients < 1:
        raise UsageError("--patients must be >= 1")
    out = _outdir(args)
    scenarios = [make_scenario(k) for k in SCENARIO_KINDS]
    rows = detect_eval(scenarios, levels, args.patients, run_config.seed,
                       run_config.setup(), workers=args.workers)
    write_detect_eval_csv(out / "detect_eval.csv", rows)
    _snapshot(run_config, out)
    print(f"wrote {out / 'detect_eval.csv'} ({len(rows)} rows)")
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    run_config = _load_config(args)
    if run_config.scenario == "none":
        raise UsageError("sensitivity requires --scenario")
    out = _outdir(args)
    scenario = make_scenario(run_config.scenario)
    parameters = args.parameters.split(",") if args.parameters else None
    rows = run_sensitivity(scenario, parameters=parameters,
                           workers=args.workers)
    sensitivity_report_csv(rows, out / "sensitivity.csv")
    _snapshot(run_config, out)
    significant = [r["parameter"] for r in rows if r["significant"]]
    print(f"wrote {out / 'sensitivity.csv'}; significant: "
          f"{', '.join(significant) if significant else '(none)'}")
    return EXIT_OK


def cmd_compare(args) -> int:
    run_config = _load_config(args)
    if args.patients < 1:
        raise UsageError("--patients must be >= 1")
    kinds = (list(SCENARIO_KINDS) if args.scenario in (None, "all")
             else [args.scenario])
    out = _outdir(args)
    setup = run_config.setup()
    cohorts = []
    for kind in kinds:
        cohort = run_cohort(make_scenario(kind), args.patients,
                            run_config.seed, setup, workers=args.workers)
        cohorts.append(cohort)
        print(f"{kind}: {len(cohort.runs)} runs, "
              f"{len(cohort.excluded)} excluded, p={cohort.p_value:.4g}")
    summary_rows, box_rows = summarize(cohorts)
    write_runs_csv(out / "runs.csv", cohorts)
    write_summary_csv(out / "summary.csv", summary_rows)
    write_boxplot_csv(out / "boxplot.csv", box_rows)
    _snapshot(run_config, out)
    print(f"wrote {out / 'runs.csv'}, summary.csv, boxplot.csv")
    return EXIT_OK


def _read_csv_rows(path: Path) -> list:
    lines = path.read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[1:]]


def cmd_report(args) -> int:
    out = Path(args.out)
    summary_path = out / "summary.csv"
    box_path = out / "boxplot.csv"
    if not summary_path.exists() or not box_path.exists():
        print(f"missing summary.csv/boxplot.csv in {out}", file=sys.stderr)
        return EXIT_CONFIG
    summary_rows = []
    for row in _read_csv_rows(summary_path):
        if row.get("n") in ("0", "", None):
            summary_rows.append({"scenario": row["scenario"],
                                 "controller": row["controller"],
                                 "absent": True})
            continue
        summary_rows.append({
            "scenario": row["scenario"], "controller": row["controller"],
            "n": int(row["n"]), "sae_mean": float(row["sae_mean"]),
            "sae_std": float(row["sae_std"]),
            "sae_median": float(row["sae_median"]),
            "congestion_runs": int(row["congestion_runs"]),
            "suction_runs": int(row["suction_runs"]),
            "wilcoxon_p": float(row["wilcoxon_p"]), "absent": False})
    box_rows = []
    for row in _read_csv_rows(box_path):
        outliers = [float(v) for v in row["outliers"].split(";") if v]
        box_rows.append({
            "scenario": row["scenario"], "controller": row["controller"],
            "median": float(row["median"]), "q1": float(row["q1"]),
            "q3": float(row["q3"]),
            "whisker_low": float(row["whisker_low"]),
            "whisker_high": float(row["whisker_high"]),
            "outliers": outliers})
    written = write_report(out, summary_rows, box_rows)
    print("wrote " + ", ".join(str(p) for p in written))
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="lvadbench",
                     description="Adaptive vs fixed-gain pump-speed control "
                                 "workbench on a closed-loop circulation model")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario_choices):
        p.add_argument("--config", help="run configuration file (kv format)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--workers", type=int, default=None)
        if scenario_choices is not None:
            p.add_argument("--scenario", choices=scenario_choices)

    p = sub.add_parser("simulate", help="one run, write the 200 Hz trace")
    common(p, list(SCENARIO_KINDS))
    p.add_argument("--controller", choices=["mfac", "pid", "none"])
    p.add_argument("--speed", type=float, default=None,
                   help="constant speed for --controller none (rpm)")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("detect-eval",
                       help="detector quality per scenario and noise level")
    common(p, None)
    p.add_argument("--variances", default="0,1,2,3,4",
                   help="comma-separated noise levels")
    p.add_argument("--patients", type=int, default=5)
    p.set_defaults(fn=cmd_detect_eval)

    p = sub.add_parser("sensitivity",
                       help="one-at-a-time parameter sweep for one scenario")
    common(p, list(SCENARIO_KINDS))
    p.add_argument("--parameters", default=None,
                   help="comma-separated subset (default: all 43)")
    p.set_defaults(fn=cmd_sensitivity)

    p = sub.add_parser("compare",
                       help="paired MFAC/PID cohort comparison")
    common(p, list(SCENARIO_KINDS) + ["all"])
    p.add_argument("--patients", type=int, default=20)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("report", help="render plots from a compare directory")
    p.add_argument("--out", required=True,
                   help="directory holding summary.csv and boxplot.csv")
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except cfgmod.ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationBlowup as exc:
        print(f"simulation failure: {exc}", file=sys.stderr)
        return EXIT_SIM


if __name__ == "__main__":
    sys.exit(main())
