"""Command-line entry point: ``llmroute {fit,anova,route,sweep,gen,power}``.

Data goes to standard output (or ``--out``) as CSV with a fixed header;
``--markdown`` renders the same table for humans. Exit codes: 0 success,
2 usage error, 65 bad input data or infeasible routing, 66 missing file.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from typing import Sequence

from . import core, powertrace, scheduler, stats

EX_DATAERR = 65
EX_NOINPUT = 66

SCHEMAS = """\
file schemas:
  workload CSV      tau_in,tau_out
  measurement CSV   model,tau_in,tau_out,energy_j,runtime_s,trial
  timechart CSV     time_s,core_id,power_w
  residency CSV     core_id,start_s,end_s
  profile document  TOML, one [[model]] table per model with
                    name, accuracy_const, alpha = [a0,a1,a2], beta = [b0,b1,b2], gamma (optional)
"""


def _f(x: float) -> str:
    return f"{x:.6f}"


def _e(x: float) -> str:
    return f"{x:.6e}"


def _read(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    with open(path, "rb") as fh:
        return fh.read()


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout
    return open(path, "w", newline="")


def _emit(header: Sequence[str], rows: Sequence[Sequence], out, markdown: bool = False) -> None:
    if markdown:
        out.write("| " + " | ".join(header) + " |\n")
        out.write("|" + "|".join("---" for _ in header) + "|\n")
        for r in rows:
            out.write("| " + " | ".join(str(c) for c in r) + " |\n")
        return
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


# ------------------------------------------------------------- subcommands

def cmd_fit(args) -> int:
    records = core.parse_measurements(_read(args.measurements))
    metrics = ["energy", "runtime"] if args.metric == "both" else [args.metric]
    rows = []
    for metric in metrics:
        for name, fit in stats.fit_records(records, metric).items():
            row = [name, *(_e(c) for c in fit.coeffs), _f(fit.r_squared), _f(fit.f_statistic), _e(fit.p_value)]
            rows.append([metric, *row] if len(metrics) > 1 else row)
    header = ["model", "a0", "a1", "a2", "r2", "f", "p"]
    if len(metrics) > 1:
        header = ["metric", *header]
    out = _open_out(args.out)
    try:
        _emit(header, rows, out, args.markdown)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_anova(args) -> int:
    records = core.parse_measurements(_read(args.measurements))
    table = stats.anova_from_records(records, args.metric, interaction=not args.no_interaction)
    rows = []
    for r in table.rows:
        rows.append([args.metric, r.source, _e(r.sum_squares), r.dof,
                     "" if r.f_statistic is None else _f(r.f_statistic),
                     "" if r.p_value is None else _e(r.p_value)])
    rows.append([args.metric, "total", _e(table.ss_total), sum(r.dof for r in table.rows), "", ""])
    _emit(["metric", "variable", "sum_squares", "dof", "f_statistic", "p_value"], rows,
          sys.stdout, args.markdown)
    return 0


def _constraints(args) -> scheduler.RoutingConstraints:
    mode = scheduler.CapacityMode.FRACTION_CAP if args.use_gamma else scheduler.CapacityMode.UNBOUNDED
    return scheduler.RoutingConstraints(args.min_per_model, mode)


def _baseline(spec: str, workload, fleet, seed):
    if spec == "roundrobin":
        return scheduler.round_robin(workload, fleet)
    if spec == "random":
        if seed is None:
            raise core.ParseError("--baseline random requires --seed")
        return scheduler.random_assign(workload, fleet, seed)
    if spec.startswith("single:"):
        key = spec.split(":", 1)[1]
        names = [p.name for p in fleet]
        if key in names:
            return scheduler.single_model(workload, fleet, names.index(key))
        try:
            return scheduler.single_model(workload, fleet, int(key))
        except ValueError as exc:
            raise core.ParseError(f"bad single-model baseline {spec!r}: {exc}") from None
    raise core.ParseError(f"unknown baseline {spec!r}; use roundrobin, random or single:K")


def cmd_route(args) -> int:
    fleet = core.parse_profiles(_read(args.profiles))
    workload = core.parse_workload(_read(args.workload))
    if args.baseline:
        assignment = _baseline(args.baseline, workload, fleet, args.seed)
        metrics = scheduler.evaluate(assignment, fleet, workload, args.zeta)
    else:
        assignment, metrics = scheduler.solve_offline(fleet, workload, args.zeta, _constraints(args))
    rows = [[i, fleet[k].name] for i, k in enumerate(assignment.model_of)]
    out = _open_out(args.out)
    try:
        _emit(["query_index", "model"], rows, out, args.markdown)
    finally:
        if out is not sys.stdout:
            out.close()
    summary = [
        ["zeta", _f(args.zeta)],
        ["total_energy_j", _f(metrics.total_energy_j)],
        ["mean_runtime_s", _f(metrics.mean_runtime_s)],
        ["total_accuracy", _f(metrics.total_accuracy)],
        ["objective", _f(metrics.objective_value)],
        *([f"count:{name}", c] for name, c in metrics.per_model_counts.items()),
    ]
    if args.out is None or args.out == "-":
        sys.stdout.write("\n")
    _emit(["metric", "value"], summary, sys.stdout, args.markdown)
    return 0


def cmd_sweep(args) -> int:
    fleet = core.parse_profiles(_read(args.profiles))
    workload = core.parse_workload(_read(args.workload))
    try:
        grid = scheduler.parse_grid(args.grid)
    except ValueError as exc:
        raise core.ParseError(str(exc)) from None
    rows_out = scheduler.sweep_zeta(fleet, workload, _constraints(args), grid, jobs=args.jobs)
    header = ["zeta", "total_energy_j", "mean_runtime_s", "total_accuracy",
              *(f"count_{p.name}" for p in fleet)]
    rows = []
    for r in rows_out:
        m = r.metrics
        rows.append([_f(r.zeta), _f(m.total_energy_j), _f(m.mean_runtime_s), _f(m.total_accuracy),
                     *(m.per_model_counts[p.name] for p in fleet)])
    out = _open_out(args.out)
    try:
        _emit(header, rows, out, args.markdown)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_gen(args) -> int:
    dist = core.parse_dist(args.dist)
    dist_out = core.parse_dist(args.dist_out) if args.dist_out else None
    try:
        workload = core.generate_workload(args.count, dist, args.seed, dist_out)
    except ValueError as exc:
        raise core.ParseError(str(exc)) from None
    out = _open_out(args.out)
    try:
        out.write(core.serialize_workload(workload))
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_power(args) -> int:
    trace = powertrace.parse_timechart(_read(args.timechart))
    residency = powertrace.parse_residency(_read(args.residency))
    cpu = powertrace.integrate_cpu_energy(trace, residency)
    sys.stdout.write(_f(powertrace.total_energy(cpu, args.gpu_joules)) + "\n")
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(
        prog="llmroute", formatter_class=fmt, epilog=SCHEMAS,
        description="Fit LLM energy/runtime models and route workloads offline.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver details to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_, func):
        p = sub.add_parser(name, help=help_, description=help_, epilog=SCHEMAS, formatter_class=fmt)
        p.set_defaults(func=func)
        return p

    p = add("fit", "fit per-model no-intercept energy/runtime models from a measurement CSV", cmd_fit)
    p.add_argument("--measurements", required=True, metavar="PATH", help="measurement CSV")
    p.add_argument("--metric", choices=["energy", "runtime", "both"], default="both",
                   help="which response to fit (default: both, adds a leading metric column)")
    p.add_argument("--out", metavar="PATH", help="output CSV (default: stdout); columns model,a0,a1,a2,r2,f,p")
    p.add_argument("--markdown", action="store_true", help="render a markdown table instead of CSV")

    p = add("anova", "two-way ANOVA of input x output tokens on a balanced measurement grid", cmd_anova)
    p.add_argument("--measurements", required=True, metavar="PATH", help="measurement CSV")
    p.add_argument("--metric", choices=["energy", "runtime"], required=True, help="response variable")
    p.add_argument("--no-interaction", action="store_true",
                   help="additive model (pools interaction into error; allows one trial per cell)")
    p.add_argument("--markdown", action="store_true", help="render a markdown table instead of CSV")

    p = add("route", "assign every query of a workload to a model", cmd_route)
    p.add_argument("--profiles", required=True, metavar="PATH", help="profile document")
    p.add_argument("--workload", required=True, metavar="PATH", help="workload CSV")
    p.add_argument("--zeta", required=True, type=float, metavar="F",
                   help="trade-off in [0,1]: 0 maximizes accuracy, 1 minimizes energy")
    p.add_argument("--min-per-model", type=int, default=1, metavar="N",
                   help="minimum queries per model (default 1; 0 relaxes)")
    p.add_argument("--use-gamma", action="store_true",
                   help="cap model K at ceil(gamma_K * m) queries")
    p.add_argument("--baseline", metavar="roundrobin|random|single:K",
                   help="use a baseline assignment instead of the optimizer (K: index or name)")
    p.add_argument("--seed", type=int, metavar="N", help="seed for --baseline random")
    p.add_argument("--out", metavar="PATH", help="assignment CSV query_index,model (default: stdout)")
    p.add_argument("--markdown", action="store_true", help="render markdown tables instead of CSV")

    p = add("sweep", "solve the routing problem over a grid of zeta values", cmd_sweep)
    p.add_argument("--profiles", required=True, metavar="PATH", help="profile document")
    p.add_argument("--workload", required=True, metavar="PATH", help="workload CSV")
    p.add_argument("--grid", required=True, metavar="LO:HI:STEP", help="inclusive zeta grid, e.g. 0:1:0.05")
    p.add_argument("--min-per-model", type=int, default=1, metavar="N", help="minimum queries per model")
    p.add_argument("--use-gamma", action="store_true", help="cap model K at ceil(gamma_K * m) queries")
    p.add_argument("--jobs", type=int, default=1, metavar="N", help="parallel zeta evaluations")
    p.add_argument("--out", metavar="PATH",
                   help="CSV zeta,total_energy_j,mean_runtime_s,total_accuracy,count_<model>... (default: stdout)")
    p.add_argument("--markdown", action="store_true", help="render a markdown table instead of CSV")

    p = add("gen", "generate a synthetic workload CSV", cmd_gen)
    p.add_argument("--count", required=True, type=int, metavar="N", help="number of queries")
    p.add_argument("--seed", required=True, type=int, metavar="N", help="RNG seed")
    p.add_argument("--dist", required=True, metavar="SPEC",
                   help="uniform:LO,HI or lognormal:MU,SIGMA,CAP (input tokens, and output unless --dist-out)")
    p.add_argument("--dist-out", metavar="SPEC", help="separate distribution for output tokens")
    p.add_argument("--out", required=True, metavar="PATH", help="workload CSV to write ('-' for stdout)")

    p = add("power", "CPU energy from a per-core timechart and residency log, plus GPU joules", cmd_power)
    p.add_argument("--timechart", required=True, metavar="PATH", help="timechart CSV")
    p.add_argument("--residency", required=True, metavar="PATH", help="residency CSV")
    p.add_argument("--gpu-joules", type=float, default=0.0, metavar="F", help="GPU energy to add (J)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"llmroute {args.command}: error: file not found: {exc.filename}", file=sys.stderr)
        return EX_NOINPUT
    except (core.LLMRouteError, ValueError) as exc:
        print(f"llmroute {args.command}: error: {exc}", file=sys.stderr)
        return EX_DATAERR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
