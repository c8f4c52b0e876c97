"""Command-line entry point: generate, solve, oracle, bench, sample-stats.

Exit codes: 0 success, 2 configuration or input error, 3 bilevel problem
infeasible, 4 enumeration guard exceeded.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import statistics
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .driver import ConfigError, SolverConfig, fmt, neural_bilevel
from .instance import (BilevelInstance, InstanceFormatError, format_bits, generate_instance, load_instance,
                       save_instance)
from .oracle import brute_force_bilevel, objective_difference
from .sampler import BilevelInfeasible, GuardExceeded, enhanced_sampling, random_sampling

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_GUARD = 4

log = logging.getLogger("neurobilevel")

SOLVER_KEYS = {f.name for f in dataclasses.fields(SolverConfig)}
TOP_KEYS = {"instance", "solver", "replications", "seed", "output", "bench", "sample_stats"}
BENCH_KEYS = {"kinds", "iterations", "oracle"}
SAMPLE_KEYS = {"time_budget", "n_samples", "attempt_limit"}
GENERATOR_KEYS = {"n", "m", "lower_kind", "seed"}


@dataclass
class BenchGrid:
    kinds: list = field(default_factory=lambda: ["GNN", "ISNN"])
    iterations: list = field(default_factory=lambda: [1])
    oracle: bool = True


@dataclass
class SampleStatsConfig:
    time_budget: float = 10.0
    n_samples: int = 1000
    attempt_limit: int | None = None


@dataclass
class RunConfig:
    instance: dict | None = None  # {"path": ...} or {"generate": {n, m, lower_kind, seed}}
    solver: SolverConfig = field(default_factory=SolverConfig)
    replications: int = 1
    seed: int = 0
    output: str = "runs"
    bench: BenchGrid = field(default_factory=BenchGrid)
    sample_stats: SampleStatsConfig = field(default_factory=SampleStatsConfig)

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.instance is not None:
            if set(self.instance) == {"path"}:
                pass
            elif set(self.instance) == {"generate"}:
                unknown = set(self.instance["generate"]) - GENERATOR_KEYS
                if unknown:
                    raise ConfigError(f"unknown generator key(s): {', '.join(sorted(unknown))}")
                missing = {"n", "m"} - set(self.instance["generate"])
                if missing:
                    raise ConfigError(f"generator settings miss {', '.join(sorted(missing))}")
            else:
                raise ConfigError("instance must be {\"path\": ...} or {\"generate\": {...}}")

    def load_instance(self) -> BilevelInstance:
        if self.instance is None:
            raise ConfigError("no instance given (positional path or config 'instance')")
        if "path" in self.instance:
            return load_instance(self.instance["path"])
        g = self.instance["generate"]
        return generate_instance(int(g["n"]), int(g["m"]), g.get("lower_kind", "Continuous"), int(g.get("seed", 0)))

    def to_dict(self) -> dict:
        return {
            "instance": self.instance,
            "solver": self.solver.to_dict(),
            "replications": self.replications,
            "seed": self.seed,
            "output": self.output,
            "bench": dataclasses.asdict(self.bench),
            "sample_stats": dataclasses.asdict(self.sample_stats),
        }


def _reject_unknown(section: str, doc: dict, allowed: set) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(sorted(unknown))}")


def parse_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Config file values, then flag overrides; unknown keys are rejected.

    ``overrides`` is flat: solver fields by name plus ``instance``,
    ``replications``, ``seed``, ``output``, ``kinds``, ``iterations``,
    ``oracle``, ``time_budget``, ``attempt_limit``.
    """
    doc: dict = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config line {exc.lineno}: {exc.msg}") from None
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
    _reject_unknown("config", doc, TOP_KEYS)
    solver = dict(doc.get("solver", {}))
    _reject_unknown("solver", solver, SOLVER_KEYS)
    bench = dict(doc.get("bench", {}))
    _reject_unknown("bench", bench, BENCH_KEYS)
    stats = dict(doc.get("sample_stats", {}))
    _reject_unknown("sample_stats", stats, SAMPLE_KEYS)
    top = {k: doc[k] for k in ("instance", "replications", "seed", "output") if k in doc}
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key in ("instance", "replications", "seed", "output"):
            top[key] = val
        elif key in ("kinds", "iterations", "oracle"):
            bench[key] = val
        elif key in ("time_budget", "attempt_limit"):
            stats[key] = val
        elif key in SOLVER_KEYS:
            solver[key] = val
        else:
            raise ConfigError(f"unknown option {key}")
    seed = int(top.get("seed", solver.get("seed", 0)))
    solver["seed"] = seed
    if "n_samples" in solver and "n_samples" not in stats:
        stats["n_samples"] = solver["n_samples"]
    try:
        return RunConfig(instance=top.get("instance"), solver=SolverConfig(**solver),
                         replications=int(top.get("replications", 1)), seed=seed,
                         output=str(top.get("output", "runs")), bench=BenchGrid(**bench),
                         sample_stats=SampleStatsConfig(**stats))
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def replication_seeds(master: int, count: int) -> list[int]:
    """Per-replication seeds: ``SeedSequence(master).spawn(count)``, first 32-bit word of each child."""
    return [int(c.generate_state(1)[0]) for c in np.random.SeedSequence(master).spawn(count)]


# -- commands -------------------------------------------------------------------


def cmd_generate(args) -> int:
    inst = generate_instance(args.n, args.m, args.kind, args.seed)
    save_instance(inst, args.output)
    print(f"wrote {args.output} ({inst.name})")
    return EXIT_OK


def cmd_oracle(args) -> int:
    inst = load_instance(args.instance)
    res = brute_force_bilevel(inst)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res.write_audit(out / "oracle_audit.csv")
    doc = {"x": format_bits(res.x), "y": res.y.tolist(), "f": res.f}
    (out / "oracle.json").write_text(json.dumps(doc, indent=1) + "\n")
    print(json.dumps(doc))
    return EXIT_OK


def _rep_dir(root: Path, r: int) -> Path:
    d = root / f"rep-{r:02d}"
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_config(cfg: RunConfig, root: Path) -> None:
    root.mkdir(parents=True, exist_ok=True)
    (root / "config.json").write_text(json.dumps(cfg.to_dict(), indent=1) + "\n")


def cmd_solve(cfg: RunConfig) -> int:
    inst = cfg.load_instance()
    root = Path(cfg.output)
    _write_config(cfg, root)
    for r, seed in enumerate(replication_seeds(cfg.seed, cfg.replications)):
        solver = dataclasses.replace(cfg.solver, seed=seed)
        report = neural_bilevel(inst, solver)
        report.write(_rep_dir(root, r))
        print(f"replication {r}: f_ub={report.f_ub!r} x={''.join(map(str, report.best_x))}")
    return EXIT_OK


BENCH_COLUMNS = ["replication", "kind", "n_iterations", "f_ub", "benchmark_f", "benchmark", "gap",
                 "t_sample", "t_train", "t_solve"]
AGGREGATE_COLUMNS = ["kind", "n_iterations", "replications", "benchmark", "avg_gap", "min_gap", "max_gap",
                     "avg_t_sample", "avg_t_train", "avg_t_solve"]


def cmd_bench(cfg: RunConfig) -> int:
    """Replications x {kind, iterations} grid with gaps against the oracle or the best value seen.

    GNN cells always use the big-M embedding; ISNN cells use the configured mode.
    """
    inst = cfg.load_instance()
    root = Path(cfg.output)
    _write_config(cfg, root)
    benchmark, bench_f = "best-known", math.nan
    if cfg.bench.oracle:
        try:
            bench_f = brute_force_bilevel(inst).f
            benchmark = "oracle"
        except GuardExceeded:
            log.warning("oracle guard exceeded for n=%d; gaps are against the best value found", inst.n)
    rows = []
    for r, seed in enumerate(replication_seeds(cfg.seed, cfg.replications)):
        for kind in cfg.bench.kinds:
            for n_it in cfg.bench.iterations:
                solver = dataclasses.replace(cfg.solver, seed=seed, kind=kind, n_iterations=int(n_it),
                                             mode=cfg.solver.mode if kind.upper() == "ISNN" else "bigm")
                report = neural_bilevel(inst, solver)
                its = report.iterations
                rows.append({"replication": r, "kind": solver.kind, "n_iterations": int(n_it), "f_ub": report.f_ub,
                             "t_sample": sum(i.t_sample for i in its), "t_train": sum(i.t_train for i in its),
                             "t_solve": sum(i.t_solve for i in its)})
    if benchmark == "best-known":
        bench_f = min(row["f_ub"] for row in rows)
    for row in rows:
        row["benchmark_f"] = bench_f
        row["benchmark"] = benchmark
        row["gap"] = objective_difference(row["f_ub"], bench_f)
    for r in range(cfg.replications):
        with open(_rep_dir(root, r) / "bench.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(BENCH_COLUMNS)
            for row in rows:
                if row["replication"] == r:
                    w.writerow([_cell(row[c]) for c in BENCH_COLUMNS])
    with open(root / "aggregate.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(AGGREGATE_COLUMNS)
        cells = {}
        for row in rows:
            cells.setdefault((row["kind"], row["n_iterations"]), []).append(row)
        for (kind, n_it), group in cells.items():
            gaps = [g["gap"] for g in group]
            w.writerow([kind, n_it, len(group), benchmark, fmt(statistics.fmean(gaps)), fmt(min(gaps)),
                        fmt(max(gaps)), fmt(statistics.fmean(g["t_sample"] for g in group)),
                        fmt(statistics.fmean(g["t_train"] for g in group)),
                        fmt(statistics.fmean(g["t_solve"] for g in group))])
    print(f"wrote {root / 'aggregate.csv'}")
    return EXIT_OK


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    return fmt(v)


SAMPLING_COLUMNS = ["instance", "strategy", "time_budget", "samples", "draws", "flags"]


def cmd_sample_stats(cfg: RunConfig, instances: list[BilevelInstance]) -> int:
    """Enhanced vs random sampling under the same wall-clock budget per instance."""
    root = Path(cfg.output)
    _write_config(cfg, root)
    pools_dir = root / "pools"
    pools_dir.mkdir(parents=True, exist_ok=True)
    st = cfg.sample_stats
    attempts = st.attempt_limit if st.attempt_limit is not None else 10 ** 9
    seed = replication_seeds(cfg.seed, 1)[0]
    with open(root / "sampling.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SAMPLING_COLUMNS)
        for k, inst in enumerate(instances):
            name = inst.name or f"instance{k}"
            pools = {
                "enhanced": enhanced_sampling(inst, st.n_samples, cfg.solver.n_updates, rng=np.random.default_rng(seed),
                                              time_budget=st.time_budget, seed=seed),
                "random": random_sampling(inst, st.n_samples, attempts, np.random.default_rng(seed),
                                          time_budget=st.time_budget, seed=seed),
            }
            for strategy, pool in pools.items():
                pool.save(pools_dir / f"{name}-{strategy}.json")
                w.writerow([name, strategy, fmt(st.time_budget), len(pool), pool.draws, ";".join(pool.flags)])
    print(f"wrote {root / 'sampling.csv'}")
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------------


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--kind", dest="kind", help="network kind: gnn or isnn")
    p.add_argument("--mode", help="bigm or cuts (cuts needs isnn)")
    p.add_argument("--n-samples", dest="n_samples", type=int)
    p.add_argument("--n-updates", dest="n_updates", type=int)
    p.add_argument("--n-iterations", dest="n_iterations", type=int)
    p.add_argument("--sampling", help="enhanced, enumerate or random")
    p.add_argument("--fit", help="train or exact")
    p.add_argument("--reset-pool", dest="accumulate_pool", action="store_const", const=False,
                   help="resample from scratch every iteration instead of growing one pool")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--decay", type=float)
    p.add_argument("--sample-time-budget", dest="sample_time_budget", type=float)
    p.add_argument("--node-limit", dest="node_limit", type=int)
    p.add_argument("--time-limit", dest="time_limit", type=float)
    p.add_argument("--no-timings", dest="record_timings", action="store_const", const=False,
                   help="write zero stage times so outputs are byte-reproducible")
    p.add_argument("--seed", type=int)
    p.add_argument("--replications", type=int)
    p.add_argument("-o", "--out", dest="output", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="neurobilevel", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random instance")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--kind", default="Continuous", help="lower level: lp/continuous or milp/integer")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", required=True)

    o = sub.add_parser("oracle", help="exact solve by enumerating tenders")
    o.add_argument("instance")
    o.add_argument("-o", "--out", default="oracle")

    s = sub.add_parser("solve", help="run the sample/train/reformulate loop")
    s.add_argument("instance", nargs="?")
    _add_solver_flags(s)

    b = sub.add_parser("bench", help="replications over a kind x iterations grid")
    b.add_argument("instance", nargs="?")
    _add_solver_flags(b)
    b.add_argument("--kinds", nargs="+")
    b.add_argument("--iterations", nargs="+", type=int)
    b.add_argument("--no-oracle", dest="oracle", action="store_const", const=False)

    t = sub.add_parser("sample-stats", help="enhanced vs random sampling under a time budget")
    t.add_argument("instances", nargs="*")
    _add_solver_flags(t)
    t.add_argument("--time-budget", dest="time_budget", type=float)
    t.add_argument("--attempt-limit", dest="attempt_limit", type=int)
    return parser


_FLAG_KEYS = ("kind", "mode", "n_samples", "n_updates", "n_iterations", "sampling", "fit", "accumulate_pool",
              "epochs", "lr", "decay", "sample_time_budget", "node_limit", "time_limit", "record_timings", "seed",
              "replications", "output", "kinds", "iterations", "oracle", "time_budget", "attempt_limit")


def config_from_args(args) -> RunConfig:
    overrides = {k: getattr(args, k) for k in _FLAG_KEYS if hasattr(args, k)}
    inst = getattr(args, "instance", None)
    if inst:
        overrides["instance"] = {"path": inst}
    return parse_config(args.config, overrides)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "generate":
            return cmd_generate(args)
        if args.command == "oracle":
            return cmd_oracle(args)
        cfg = config_from_args(args)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "bench":
            return cmd_bench(cfg)
        instances = [load_instance(p) for p in args.instances] or [cfg.load_instance()]
        return cmd_sample_stats(cfg, instances)
    except (ConfigError, InstanceFormatError, ValueError) as exc:
        if isinstance(exc, GuardExceeded):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_GUARD
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BilevelInfeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
