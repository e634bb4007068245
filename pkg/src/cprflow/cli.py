"""Command-line front end.

    cprflow solve --input net.min [--trace run.jsonl] [--oracle-check]
    cprflow solve --gen grid:20:40 --seed 3
    cprflow gen --family transshipment --nodes 12 --arcs 30 --seed 1
    cprflow bench --sizes 8,16,32 --repeats 3 --jobs 2 --output bench.csv

``solve`` exits with 0 (optimal), 2 (infeasible), 3 (unbounded) or 1 (error).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

from . import eflow, ipm
from .core import (InstanceError, ProblemInstance, SolverError, Status, format_solution,
                   parse_dimacs, write_dimacs)
from .generators import FAMILIES, generate
from .oracle import OracleLimitError, ssp_mincost
from .pipeline import SolverConfig, solve

TRACE_FORMAT = "cprflow-trace"
TRACE_VERSION = 1
EXIT_CODES = {Status.OPTIMAL: 0, Status.INFEASIBLE: 2, Status.UNBOUNDED: 3}
EXIT_ERROR = 1
BENCH_HEADER = ("family", "n", "m", "seed", "status", "objective", "ipm_iterations", "p0",
                "iteration_bound", "eflow_iterations", "seconds")


@dataclass
class RunConfig:
    input: str | None = None
    gen: str | None = None
    seed: int = 0
    target_gap: float = ipm.TARGET_GAP
    delta: float = ipm.DELTA
    eflow_backend: str = "a"
    exact: bool = False
    trace: str | None = None
    oracle_check: bool = False
    dump_trace: str | None = None
    standard_dimacs: bool = False
    output: str | None = None

    def __post_init__(self):
        if (self.input is None) == (self.gen is None):
            raise ValueError("give exactly one of --input and --gen")
        if not 0 < self.target_gap <= 1:
            raise ValueError("--target-gap must lie in (0, 1]")
        if not 0 < self.delta <= 1 / 8:
            raise ValueError("--delta must lie in (0, 1/8]")

    def solver_config(self) -> SolverConfig:
        return SolverConfig(seed=self.seed, target_gap=self.target_gap, delta=self.delta,
                            backend=self.eflow_backend, exact=self.exact)


def parse_gen_spec(spec: str, default_seed: int = 0) -> tuple[str, int, int, int]:
    """``family:n:m[:seed]`` -> ``(family, n, m, seed)``."""
    parts = spec.split(":")
    if len(parts) not in (3, 4):
        raise ValueError(f"generator spec {spec!r} is not family:n:m[:seed]")
    family = parts[0]
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
    n, m = int(parts[1]), int(parts[2])
    seed = int(parts[3]) if len(parts) == 4 else default_seed
    return family, n, m, seed


def load_instance(config: RunConfig) -> ProblemInstance:
    if config.gen is not None:
        return generate(*parse_gen_spec(config.gen, config.seed))
    if config.input == "-":
        text = sys.stdin.read()
    else:
        with open(config.input, encoding="utf-8") as fh:
            text = fh.read()
    return parse_dimacs(text, standard_sign=config.standard_dimacs)


class TraceWriter:
    """JSON-lines trace: a versioned header, one line per event, a closing summary."""

    def __init__(self, stream, config: RunConfig):
        self.stream = stream
        header = {"format": TRACE_FORMAT, "version": TRACE_VERSION,
                  "config": {k: v for k, v in asdict(config).items()
                             if k not in ("trace", "output", "dump_trace")}}
        self._write(header)

    def _write(self, obj):
        self.stream.write(json.dumps(obj, sort_keys=True) + "\n")

    def __call__(self, event: dict):
        self._write(event)

    def close(self, solution):
        summary = {"event": "solution", "status": solution.status.value,
                   "objective": solution.objective}
        comps = solution.info.get("components", [])
        # wall time is left out so that traces are reproducible
        summary["components"] = [{k: v for k, v in c.items() if k != "seconds"} for c in comps]
        self._write(summary)


def oracle_verdict(instance: ProblemInstance, solution) -> str:
    try:
        ref = ssp_mincost(instance)
    except OracleLimitError as exc:
        return f"SKIPPED ({exc})"
    if ref.status is solution.status and ref.objective == solution.objective:
        return "AGREE"
    return (f"DISAGREE (oracle {ref.status.value} {ref.objective}, "
            f"solver {solution.status.value} {solution.objective})")


def cmd_solve(config: RunConfig, out=None) -> int:
    out = out or sys.stdout
    try:
        instance = load_instance(config)
        tracer = fh = None
        if config.trace:
            fh = open(config.trace, "w", encoding="utf-8")
            tracer = TraceWriter(fh, config)
        try:
            solution = solve(instance, config.solver_config(), trace=tracer)
            if tracer is not None:
                tracer.close(solution)
        finally:
            if fh is not None:
                fh.close()
        if config.dump_trace:
            with open(config.dump_trace, "w", encoding="utf-8") as dst:
                dst.write(solution.info["reduction"].to_json() + "\n")
        text = format_solution(solution)
        if config.output:
            with open(config.output, "w", encoding="utf-8") as dst:
                dst.write(text)
        else:
            out.write(text)
        if config.oracle_check:
            verdict = oracle_verdict(instance, solution)
            out.write(f"c oracle {verdict}\n")
            if verdict.startswith("DISAGREE"):
                return EXIT_ERROR
    except (InstanceError, SolverError, ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_CODES[solution.status]


def cmd_gen(family: str, n: int, m: int, seed: int = 0, **options) -> str:
    """DIMACS text of a generated instance."""
    instance = generate(family, n, m, seed, **options)
    return write_dimacs(instance, comment=f"cprflow gen {family} n={n} m={m} seed={seed}")


# --------------------------------------------------------------------------
# benchmark


def _bench_one(job) -> dict:
    family, n, m, seed, backend = job
    instance = generate(family, n, m, seed)
    started = time.perf_counter()
    sol = solve(instance, SolverConfig(seed=seed, backend=backend))
    seconds = time.perf_counter() - started
    comps = [c for c in sol.info.get("components", []) if c["method"] == "ipm"]
    for c in comps:
        if c["iterations"] > 64 * c["initial_potential"] + 1:
            raise SolverError(f"{family} n={n} seed={seed}: {c['iterations']} IPM iterations "
                              f"exceed 64 P0 + 1 with P0 = {c['initial_potential']:.3f}")
    p0 = sum(c["initial_potential"] for c in comps)
    return {"family": family, "n": n, "m": m, "seed": seed, "status": sol.status.value,
            "objective": sol.objective, "ipm_iterations": sum(c["iterations"] for c in comps),
            "p0": round(p0, 6), "iteration_bound": int(math.floor(64 * p0 + 1)) if comps else 0,
            "eflow_iterations": sum(c["eflow_iterations"] for c in comps),
            "seconds": round(seconds, 4), "gamma": instance.stats.gamma}


def bench_jobs(sizes, repeats: int, seed: int, families=FAMILIES, density: int = 3,
               backend: str = eflow.NAIVE):
    return [(family, n, density * n, seed + rep, backend)
            for n in sizes for family in families for rep in range(repeats)]


def run_bench(jobs, workers: int = 1) -> list[dict]:
    if workers <= 1:
        return [_bench_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_bench_one, jobs))


def trend_report(rows, factor: float = 3.0) -> dict:
    """Median IPM iterations per size rung against ``sqrt(m) log(n gamma)``.

    The ratio ``median / (sqrt(m) log(n gamma))`` should stay within
    ``factor`` of its value on the smallest rung.
    """
    rungs: dict[int, list[dict]] = {}
    for row in rows:
        if row["ipm_iterations"]:
            rungs.setdefault(row["n"], []).append(row)
    ratios = {}
    for n in sorted(rungs):
        group = rungs[n]
        med = statistics.median(r["ipm_iterations"] for r in group)
        m = statistics.median(r["m"] for r in group)
        gamma = statistics.median(r["gamma"] for r in group)
        ratios[n] = med / (math.sqrt(m) * math.log(max(n * gamma, 3)))
    values = list(ratios.values())
    spread = max(values) / values[0] if values else 1.0
    return {"ratios": ratios, "spread": spread, "within_factor": spread <= factor}


def write_csv(rows, stream) -> None:
    writer = csv.DictWriter(stream, fieldnames=BENCH_HEADER, extrasaction="ignore",
                            lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)


def cmd_bench(sizes, repeats: int = 3, seed: int = 0, jobs: int = 1, backend: str = "a",
              density: int = 3, out=None) -> tuple[list[dict], dict]:
    rows = run_bench(bench_jobs(sizes, repeats, seed, density=density,
                                backend=eflow.BACKEND_ALIASES[backend]), jobs)
    write_csv(rows, out or sys.stdout)
    return rows, trend_report(rows)


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cprflow", description="Exact min-cost flow by "
                                     "potential reduction with electrical-flow projections.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a DIMACS or generated instance")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="DIMACS min file ('-' for stdin)")
    src.add_argument("--gen", metavar="FAMILY:N:M[:SEED]", help="solve a generated instance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target-gap", type=float, default=ipm.TARGET_GAP)
    p.add_argument("--delta", type=float, default=ipm.DELTA)
    p.add_argument("--eflow-backend", choices=sorted(eflow.BACKEND_ALIASES), default="a",
                   help="a/naive: direct cycle updates; b/tree: path decomposition")
    p.add_argument("--exact", action="store_true", help="rational arithmetic (small inputs)")
    p.add_argument("--trace", metavar="PATH", help="write a JSON-lines trace")
    p.add_argument("--oracle-check", action="store_true",
                   help="compare with successive shortest paths")
    p.add_argument("--dump-trace", metavar="PATH",
                   help="write the preprocessing reductions as JSON")
    p.add_argument("--standard-dimacs", action="store_true",
                   help="node lines give supplies (positive = source)")
    p.add_argument("--output", "-o", help="write the solution here instead of stdout")

    g = sub.add_parser("gen", help="print a random instance in DIMACS format")
    g.add_argument("--family", choices=FAMILIES, default=FAMILIES[0])
    g.add_argument("--nodes", "-n", type=int, required=True)
    g.add_argument("--arcs", "-m", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--output", "-o")

    b = sub.add_parser("bench", help="run a size ladder and emit CSV")
    b.add_argument("--sizes", default="8,16,32", help="comma separated node counts")
    b.add_argument("--repeats", type=int, default=3)
    b.add_argument("--density", type=int, default=3, help="arcs per node")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--jobs", type=int, default=1, help="worker processes")
    b.add_argument("--eflow-backend", choices=sorted(eflow.BACKEND_ALIASES), default="a")
    b.add_argument("--output", "-o", help="CSV path (default stdout)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "solve":
        try:
            config = RunConfig(input=args.input, gen=args.gen, seed=args.seed,
                               target_gap=args.target_gap, delta=args.delta,
                               eflow_backend=args.eflow_backend, exact=args.exact,
                               trace=args.trace, oracle_check=args.oracle_check,
                               dump_trace=args.dump_trace,
                               standard_dimacs=args.standard_dimacs, output=args.output)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ERROR
        return cmd_solve(config)

    if args.command == "gen":
        try:
            text = cmd_gen(args.family, args.nodes, args.arcs, args.seed)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ERROR
        if args.output:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0

    sizes = [int(s) for s in args.sizes.split(",") if s]
    buf = io.StringIO()
    try:
        _, trend = cmd_bench(sizes, args.repeats, args.seed, args.jobs, args.eflow_backend,
                             args.density, out=buf)
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    for n, ratio in trend["ratios"].items():
        print(f"trend n={n}: median iterations / (sqrt(m) log(n gamma)) = {ratio:.3f}",
              file=sys.stderr)
    print(f"trend spread {trend['spread']:.3f} "
          f"({'within' if trend['within_factor'] else 'outside'} factor 3)", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
