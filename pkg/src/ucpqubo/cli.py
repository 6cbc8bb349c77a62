"""Command-line interface: ``ucpqubo {validate,build,solve,exact,bench,report}``.

Exit codes: 0 success, 1 validation or infeasibility findings, 2 I/O or usage
errors. JSON and CSV outputs carry a ``format_version``; wall-time fields are
the only values that differ between runs with the same inputs and seed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
import warnings
from pathlib import Path
from typing import Optional, Sequence

from . import bench, instances
from .builder import build_qubo, tune_penalties
from .evaluate import estimate_violation_rate, exact_commitment_oracle, oracle_bounds_problem, score
from .model import Instance, StochasticInstance, instance_hash, load_instance, validate
from .solve import DEFAULT_SEED, AnnealParams, simulated_anneal
from .stochastic import build_qubo_relaxed, tune_all_relaxed

FORMAT_VERSION = 1
EXIT_OK, EXIT_FINDINGS, EXIT_IO = 0, 1, 2


class CliError(Exception):
    """I/O or usage problem; reported on stderr with exit code 2."""


def resolve_instance(spec: str, formulation: Optional[str] = None, resolution: Optional[int] = None) -> Instance:
    """Load a JSON instance file, or a bundled one by name (``xxs``, ``xs``, ``...-relaxed``).

    A deterministic formulation of a stochastic instance uses its expectations.
    """
    path = Path(spec)
    if path.exists():
        try:
            inst = load_instance(path)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise CliError(f"cannot read instance {spec}: {exc}") from exc
    elif spec.lower() in instances.BUNDLED:
        name = spec.lower()
        if formulation == "relaxed" and not name.endswith("-relaxed"):
            name += "-relaxed"
        inst = instances.BUNDLED[name]()
    else:
        raise CliError(f"instance file not found: {spec}")
    if formulation == "relaxed" and not isinstance(inst, StochasticInstance):
        raise CliError("relaxed formulation needs a stochastic instance")
    if formulation == "deterministic" and isinstance(inst, StochasticInstance):
        inst = inst.expected_instance()
    if resolution is not None:
        inst = inst.with_resolution(resolution)
    return inst


def _weights(inst: Instance):
    return tune_all_relaxed(inst) if isinstance(inst, StochasticInstance) else tune_penalties(inst)


def _matrix(inst: Instance):
    if isinstance(inst, StochasticInstance):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return build_qubo_relaxed(inst)
    return build_qubo(inst)


def _dump(payload: dict, out: Optional[str]) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        try:
            Path(out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise CliError(f"cannot write {out}: {exc}") from exc
    else:
        sys.stdout.write(text)


def _errors_of(inst: Instance) -> list:
    findings = validate(inst)
    for f in findings:
        print(f, file=sys.stderr)
    return [f for f in findings if f.level == "error"]


# -- subcommands ----------------------------------------------------------------------


def cmd_validate(args) -> int:
    inst = resolve_instance(args.instance, resolution=args.resolution)
    findings = validate(inst)
    for f in findings:
        print(f)
    errors = [f for f in findings if f.level == "error"]
    if not findings:
        print("ok")
    return EXIT_FINDINGS if errors else EXIT_OK


def cmd_build(args) -> int:
    inst = resolve_instance(args.instance, args.formulation, args.resolution)
    if _errors_of(inst):
        return EXIT_FINDINGS
    q = _matrix(inst)
    if args.out:
        try:
            q.save(args.out)
        except OSError as exc:
            raise CliError(f"cannot write {args.out}: {exc}") from exc
    lo, hi = q.coefficient_range()
    summary = {
        "format_version": FORMAT_VERSION,
        "formulation": "relaxed" if isinstance(inst, StochasticInstance) else "deterministic",
        "instance_hash": instance_hash(inst),
        "dim": q.dim,
        "nnz": q.nnz,
        "offset": q.offset,
        "coefficient_range": [lo, hi],
        "weights": _weights(inst).to_dict(),
        "matrix_file": args.out,
    }
    _dump(summary, args.summary)
    return EXIT_OK


def _c_min(inst: Instance, enabled: bool):
    if not enabled:
        return None, "disabled"
    problem = oracle_bounds_problem(inst)
    if problem:
        return None, f"unavailable ({problem})"
    return exact_commitment_oracle(inst).cost, "exact_commitment_oracle"


def cmd_solve(args) -> int:
    inst = resolve_instance(args.instance, args.formulation, args.resolution)
    if _errors_of(inst):
        return EXIT_FINDINGS
    q = _matrix(inst)
    params = AnnealParams(reads=args.reads, sweeps=args.sweeps, seed=args.seed)

    def run(run_seed: int):
        result = simulated_anneal(q, AnnealParams(params.reads, params.sweeps, seed=run_seed))
        return result.best, result.energy

    seeds = [args.seed] if args.runs == 1 else None
    estimate = estimate_violation_rate(
        inst, run, runs=args.runs, seed=args.seed, demand_is_hard=args.demand_hard, seeds=seeds
    )
    c_min, source = _c_min(inst, not args.no_oracle)
    runs = [r.to_dict(include_wall_time=False) for r in estimate.runs]
    payload = {
        "format_version": FORMAT_VERSION,
        "instance_hash": instance_hash(inst),
        "formulation": "relaxed" if isinstance(inst, StochasticInstance) else "deterministic",
        "dim": q.dim,
        "solver": {"name": "simulated_anneal", **params.to_dict(), "descent": True},
        "runs": runs,
        "nu_bar": estimate.nu_bar,
        "mean_cost": estimate.mean_cost,
        "c_min": c_min,
        "c_min_source": source,
        "f": None
        if c_min is None
        else math.fsum(score(estimate.nu_bar, r.cost, c_min) for r in estimate.runs) / args.runs,
        "wall_time_s": [r.wall_time for r in estimate.runs],
    }
    _dump(payload, args.out)
    return EXIT_FINDINGS if estimate.nu_bar > 0 else EXIT_OK


def cmd_exact(args) -> int:
    inst = resolve_instance(args.instance, args.formulation, args.resolution)
    if _errors_of(inst):
        return EXIT_FINDINGS
    problem = oracle_bounds_problem(inst)
    if problem:
        raise CliError(f"instance exceeds the exact oracle bounds: {problem}")
    began = time.perf_counter()
    result = exact_commitment_oracle(inst)
    elapsed = time.perf_counter() - began
    payload = {
        "format_version": FORMAT_VERSION,
        "instance_hash": instance_hash(inst),
        "formulation": "relaxed" if isinstance(inst, StochasticInstance) else "deterministic",
        "solver": {"name": "exact_commitment_oracle"},
        "c_min": result.cost,
        "energy": result.energy,
        "patterns": result.patterns,
        "schedule": result.schedule.to_dict(),
        "assignment": "".join(str(int(b)) for b in result.assignment),
        "wall_time_s": elapsed,
    }
    if result.scenario is not None:
        payload["scenario"] = result.scenario.to_dict()
    _dump(payload, args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    names = [n.strip() for n in args.preset.split(",") if n.strip()]
    try:
        for name in names:
            bench.preset(name)
        solvers = [bench.SolverConfig(s.strip(), args.reads, args.sweeps) for s in args.solver.split(",") if s.strip()]
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    results = bench.run_benchmark(names, solvers, runs=args.runs, formulation=args.formulation, seed=args.seed)
    csv_text = bench.results_csv(results)
    json_text = bench.results_json(results) + "\n"
    if args.out:
        out = Path(args.out)
        try:
            out.write_text(csv_text, encoding="utf-8")
            out.with_suffix(".json").write_text(json_text, encoding="utf-8")
        except OSError as exc:
            raise CliError(f"cannot write {out}: {exc}") from exc
    else:
        sys.stdout.write(csv_text)
    failed = [r for r in results if "error" in r["meta"]]
    for r in failed:
        print(f"{r['row']['preset']}/{r['row']['solver']}: {r['meta']['error']}", file=sys.stderr)
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        data = json.loads(Path(args.results).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read results {args.results}: {exc}") from exc
    if "points" in data:  # benchmark companion JSON
        print(f"{'preset':<6} {'form':<13} {'dim':>8} {'solver':<6} {'nu_bar':>7} {'mean_f':>9} {'mean_cost':>12} {'c_min':>12}")
        for point in data["points"]:
            row = point["row"]
            print(
                f"{row['preset']:<6} {row['formulation']:<13} {row['dim']:>8} {row['solver']:<6} "
                f"{_cell(row['nu_bar'], 3):>7} {_cell(row['mean_f'], 4):>9} {_cell(row['mean_cost'], 1):>12} {_cell(row['c_min'], 1):>12}"
            )
        return EXIT_OK
    if "runs" in data:
        c_min = args.c_min if args.c_min is not None else data.get("c_min")
        print(f"instance {data.get('instance_hash')}  formulation {data.get('formulation')}  dim {data.get('dim')}")
        for run in data["runs"]:
            print(f"  seed {run['seed']:>20}  energy {run['energy']:.10g}  cost {run['cost']:.2f}  feasible {run['feasible']}  mismatch {run['mismatch']:.4g}")
        nu_bar = data["nu_bar"]
        print(f"nu_bar {nu_bar:.3f}  mean cost {data['mean_cost']:.2f}")
        if c_min:
            f = math.fsum(score(nu_bar, run["cost"], c_min) for run in data["runs"]) / len(data["runs"])
            print(f"c_min {c_min:.2f}  f {f:.4f}")
        return EXIT_FINDINGS if nu_bar > 0 else EXIT_OK
    if "c_min" in data:
        print(f"exact optimum: cost {data['c_min']:.2f}  energy {data['energy']:.10g}")
        return EXIT_OK
    raise CliError("unrecognized results file")


def _cell(value, digits: int) -> str:
    if value in ("", None):
        return "-"
    return f"{float(value):.{digits}f}"


# -- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ucpqubo", description="Unit commitment as QUBO: build, solve, benchmark.")
    sub = parser.add_subparsers(dest="command", required=True)

    def instance_args(p, formulation=True):
        p.add_argument("--instance", required=True, help="instance JSON file or bundled name (xxs, xs, xs-relaxed, ...)")
        if formulation:
            p.add_argument("--formulation", choices=("deterministic", "relaxed"), default=None)
        p.add_argument("--resolution", type=int, default=None, help="override power bits per unit (B)")

    p = sub.add_parser("validate", help="check an instance file")
    instance_args(p, formulation=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("build", help="assemble the QUBO and export it")
    instance_args(p)
    p.add_argument("--out", help="matrix text file")
    p.add_argument("--summary", help="write the JSON summary here instead of stdout")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("solve", help="simulated annealing with descent")
    instance_args(p)
    p.add_argument("--reads", type=int, default=1000)
    p.add_argument("--sweeps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--runs", type=int, default=1, help="independent runs for the violation rate")
    p.add_argument("--out", help="results JSON")
    p.add_argument("--no-oracle", action="store_true", help="skip the exact reference cost")
    p.add_argument("--demand-hard", action="store_true", help="count demand mismatch above tolerance as a violation")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("exact", help="exact commitment oracle")
    instance_args(p)
    p.add_argument("--out", help="results JSON")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("bench", help="run the size ladder")
    p.add_argument("--preset", default="XXS,XS,S", help="comma-separated preset names")
    p.add_argument("--formulation", choices=("deterministic", "relaxed"), default="deterministic")
    p.add_argument("--solver", default="sa", help="comma-separated: sa, brute, exact")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--reads", type=int, default=1000)
    p.add_argument("--sweeps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", help="CSV path; a .json companion is written next to it")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="summarize a solve or bench results file")
    p.add_argument("results", help="results JSON from solve, exact or bench")
    p.add_argument("--c-min", type=float, default=None, help="reference optimum for the score")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_IO if exc.code else EXIT_OK
    for name in ("reads", "sweeps", "runs"):
        if getattr(args, name, 1) is not None and getattr(args, name, 1) < 1:
            print(f"error: --{name} must be at least 1", file=sys.stderr)
            return EXIT_IO
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
