"""The sample / train / reformulate loop and its report."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoder import embed_bigm, lazy_cut_solve
from .formulation import lower_objective, relaxation_block, upper_objective
from .instance import (BilevelInstance, binary_points, fixture_lower_argmax, fixture_phi, fixture_upper_objective,
                       fixture_y_bound)
from .milp import MipParams, Model, Status, solve_mip
from .oracle import optimistic_response
from .sampler import (BilevelInfeasible, LowerLevelInfeasible, SamplePool, SampleRecord, enhanced_sampling,
                      enumerate_all, lower_level_value, random_sampling)
from .valuenet import (GNN, ISNN, TrainConfig, ValueNet, exact_fit_gnn, exact_fit_isnn, parse_kind,
                       size_for, train)

HAUSDORFF_GUARD = 16
CERTIFY_TOL = 1e-6
MODES = ("bigm", "cuts")
SAMPLINGS = ("enhanced", "enumerate", "random")
FITS = ("train", "exact")


class ConfigError(ValueError):
    """Invalid solver settings, raised before any work starts."""


@dataclass
class SolverConfig:
    kind: str = ISNN
    mode: str = "bigm"
    n_samples: int = 1000
    n_updates: int = 5
    n_iterations: int = 1
    sampling: str = "enhanced"
    fit: str = "train"
    accumulate_pool: bool = True
    epochs: int = 1000
    lr: float = 1e-3
    decay: float = 1e-3
    polish: bool = True
    sample_time_budget: float | None = None
    stall_factor: int = 50
    random_attempts: int | None = None
    node_limit: int | None = None
    time_limit: float | None = None
    cut_limit: int = 200
    record_timings: bool = True
    seed: int = 0

    def __post_init__(self):
        try:
            self.kind = parse_kind(self.kind)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        self.mode = str(self.mode).lower()
        self.sampling = str(self.sampling).lower()
        self.fit = str(self.fit).lower()
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.sampling not in SAMPLINGS:
            raise ConfigError(f"sampling must be one of {SAMPLINGS}, got {self.sampling!r}")
        if self.fit not in FITS:
            raise ConfigError(f"fit must be one of {FITS}, got {self.fit!r}")
        if self.mode == "cuts" and self.kind != ISNN:
            raise ConfigError("mode 'cuts' needs kind ISNN")
        for key in ("n_samples", "n_updates", "n_iterations", "epochs", "cut_limit", "stall_factor"):
            if getattr(self, key) < 0:
                raise ConfigError(f"{key} must be nonnegative")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        if self.lr <= 0 or self.decay < 0:
            raise ConfigError("lr must be positive and decay nonnegative")

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, lr=self.lr, decay=self.decay, seed=seed, polish=self.polish)

    def mip_params(self) -> MipParams:
        return MipParams(node_limit=self.node_limit, time_limit=self.time_limit, cut_limit=self.cut_limit)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# -- single solves ----------------------------------------------------------------


@dataclass
class Relaxation:
    x: np.ndarray
    y: np.ndarray
    bound: float


def solve_relaxation(inst: BilevelInstance) -> Relaxation:
    """Single-level problem without follower optimality; its optimum bounds the bilevel one from below."""
    block = relaxation_block(inst)
    block.model.set_objective(upper_objective(inst, block), direction="min")
    sol = solve_mip(block.model, gap=0.0)
    if sol.status is Status.INFEASIBLE:
        raise BilevelInfeasible("the relaxation is infeasible")
    if sol.status is not Status.OPTIMAL:
        raise RuntimeError(f"relaxation solve ended with {sol.status.value}")
    return Relaxation(block.x_value(sol).astype(float), block.y_value(sol), sol.objective)


@dataclass
class ReformulationResult:
    status: Status
    x: np.ndarray | None
    y: np.ndarray | None
    objective: float
    nodes: int = 0
    cuts: int = 0
    flags: list = field(default_factory=list)


def solve_reformulation(inst: BilevelInstance, net: ValueNet, mode: str = "bigm",
                        params: MipParams | None = None, start=None) -> ReformulationResult:
    """``min f`` over ``x in X, y in Y(x)`` with ``d2'y >= net(x)``, embedded (bigm) or by cuts.

    ``start`` is an optional ``(x, y)`` pair offered to the search as first
    incumbent; it is used only if it satisfies the reformulation.
    """
    if net.n != inst.n:
        raise ValueError(f"network built for n={net.n}, instance has n={inst.n}")
    mode = mode.lower()
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    block = relaxation_block(inst)
    model = block.model
    model.set_objective(upper_objective(inst, block), direction="min")
    g = lower_objective(inst, block)
    point = None
    if start is not None:
        point = np.zeros(model.num_vars)
        point[block.x] = start[0]
        point[block.y] = start[1]
    if mode == "bigm":
        phi, emb = embed_bigm(model, net, block.x)
        row = dict(g)
        row[phi] = -1.0
        model.add_constr(row, ">=", 0.0, name="follower_value")
        if point is not None:
            point = np.concatenate([point, np.zeros(model.num_vars - len(point))])
            for v, val in emb.completion(net, start[0]).items():
                point[v] = val
        sol = solve_mip(model, params, start=point)
    else:
        if net.kind != ISNN:
            raise ValueError("mode 'cuts' needs an ISNN")
        sol = lazy_cut_solve(model, net, block.x, g, params, start=point)
    has_point = sol.x.size and np.all(np.isfinite(sol.x[block.x]))
    x = block.x_value(sol).astype(float) if has_point else None
    y = block.y_value(sol) if has_point else None
    return ReformulationResult(sol.status, x, y, sol.objective, sol.nodes, sol.cuts_added, list(sol.flags))


@dataclass
class Certificate:
    x: np.ndarray
    y: np.ndarray
    f: float
    phi: float


def certify(inst: BilevelInstance, x) -> Certificate:
    """Follower optimum at ``x`` and the leader-preferred optimal response."""
    x = np.asarray(x, dtype=float)
    phi, y_star = lower_level_value(inst, x)
    val, y = optimistic_response(inst, x, phi, start=y_star)
    return Certificate(x, y, float(inst.c @ x) + val, phi)


def validate_incumbent(inst: BilevelInstance, x, y, f: float, tol: float = CERTIFY_TOL) -> bool:
    """``(x, y)`` is bilevel feasible with value ``f`` (fresh follower solve)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if not inst.upper_feasible(x) or np.any(np.abs(x - np.round(x)) > 0):
        return False
    try:
        phi, _ = lower_level_value(inst, x)
    except LowerLevelInfeasible:
        return False
    scale = max(1.0, abs(phi))
    if np.any(y < -tol) or np.any(y > inst.y_upper + tol):
        return False
    if inst.integer_lower and np.any(np.abs(y - np.round(y)) > tol):
        return False
    if np.any(inst.A2 @ x + inst.B2 @ y > inst.b2 + tol * np.maximum(1.0, np.abs(inst.b2))):
        return False
    if inst.d2 @ y < phi - tol * scale:
        return False
    return abs(inst.upper_objective(x, y) - f) <= tol * max(1.0, abs(f))


# -- the iterative loop -----------------------------------------------------------


@dataclass
class IterationRecord:
    iteration: int
    pool_size: int = 0
    new_samples: int = 0
    train_mse: float = math.nan
    neurons: int = 0
    status: str = ""
    ref_objective: float = math.nan
    x: list | None = None
    y: list | None = None
    candidate_f: float = math.nan
    f_ub: float = math.inf
    t_sample: float = 0.0
    t_train: float = 0.0
    t_solve: float = 0.0
    notes: list = field(default_factory=list)


@dataclass
class RunReport:
    config: dict
    seed: int
    relaxation_bound: float
    iterations: list[IterationRecord]
    best_x: list
    best_y: list
    f_ub: float

    @property
    def f_ub_trajectory(self) -> list[float]:
        return [r.f_ub for r in self.iterations]

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "seed": self.seed,
            "relaxation_bound": _num(self.relaxation_bound),
            "best": {"x": self.best_x, "y": self.best_y, "f_ub": _num(self.f_ub)},
            "iterations": [{k: _clean(v) for k, v in dataclasses.asdict(r).items()} for r in self.iterations],
        }

    def write(self, outdir) -> None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(self.to_dict(), indent=1) + "\n")
        write_iterations_csv(self, out / "iterations.csv")


ITERATION_COLUMNS = ["iter", "pool_size", "train_mse", "ref_obj", "f_ub", "t_sample", "t_train", "t_solve"]


def write_iterations_csv(report: RunReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ITERATION_COLUMNS)
        for r in report.iterations:
            w.writerow([r.iteration, r.pool_size, fmt(r.train_mse), fmt(r.ref_objective), fmt(r.f_ub),
                        fmt(r.t_sample), fmt(r.t_train), fmt(r.t_solve)])


def fmt(v) -> str:
    """Full-precision decimal text for CSV cells."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def _num(v):
    return v if math.isfinite(v) else repr(float(v))


def _clean(v):
    if isinstance(v, float):
        return _num(v)
    return v


class _Clock:
    def __init__(self, enabled: bool):
        self.enabled = enabled

    def __call__(self) -> float:
        return time.perf_counter() if self.enabled else 0.0


def _fit(pool: SamplePool, n: int, cfg: SolverConfig, seed: int) -> ValueNet:
    if cfg.fit == "exact":
        table = pool.table()
        filler = min(table.values())
        full = {tuple(int(v) for v in p): table.get(tuple(int(v) for v in p), filler) for p in binary_points(n)}
        net = exact_fit_gnn(full) if cfg.kind == GNN else exact_fit_isnn(full)
        net.info["train_mse"] = float(np.mean([(net.forward(np.array(k)) - v) ** 2 for k, v in table.items()]))
        return net
    arch = size_for(cfg.kind, len(pool), n)
    return train(arch, pool.X, pool.labels, cfg.train_config(seed))


def _sample(inst: BilevelInstance, cfg: SolverConfig, f_ub: float, seed: int) -> SamplePool:
    rng = np.random.default_rng(seed)
    if cfg.sampling == "enumerate":
        return enumerate_all(inst)
    if cfg.sampling == "random":
        attempts = cfg.random_attempts if cfg.random_attempts is not None else 50 * cfg.n_samples
        return random_sampling(inst, cfg.n_samples, attempts, rng, time_budget=cfg.sample_time_budget, seed=seed)
    return enhanced_sampling(inst, cfg.n_samples, cfg.n_updates, f_ub, rng,
                             time_budget=cfg.sample_time_budget, stall_factor=cfg.stall_factor, seed=seed)


def stage_seeds(seed: int, n_iterations: int) -> list[tuple[int, int]]:
    """Independent (sampling, training) seeds per iteration, derived from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(n_iterations)
    return [tuple(int(s) for s in c.generate_state(2)) for c in children]


def neural_bilevel(inst: BilevelInstance, config: SolverConfig | None = None) -> RunReport:
    """Relaxation incumbent, then rounds of sampling, fitting and reformulation solving.

    After each round ``f_ub`` becomes the minimum of itself, the certified value
    at the reformulation's tender and the best value in the pool. Stage failures
    other than bilevel infeasibility are noted and the previous incumbent is kept.
    """
    cfg = config or SolverConfig()
    clock = _Clock(cfg.record_timings)
    t0 = clock()
    relax = solve_relaxation(inst)
    cert = certify(inst, relax.x)
    best = (cert.f, cert.x, cert.y)
    head = IterationRecord(0, status="relaxation", ref_objective=relax.bound, x=_ints(cert.x),
                           y=cert.y.tolist(), candidate_f=cert.f, f_ub=cert.f, t_solve=clock() - t0)
    records = [head]
    pool: SamplePool | None = None
    for it, (s_seed, t_seed) in enumerate(stage_seeds(cfg.seed, cfg.n_iterations), start=1):
        rec = IterationRecord(it)
        t0 = clock()
        if pool is not None and cfg.sampling == "enumerate":
            fresh = pool
        else:
            fresh = _sample(inst, cfg, best[0], s_seed)
        before = len(pool) if (pool is not None and cfg.accumulate_pool) else 0
        pool = pool.merged(fresh) if (pool is not None and cfg.accumulate_pool) else fresh
        rec.t_sample = clock() - t0
        rec.pool_size = len(pool)
        rec.new_samples = len(pool) - before
        rec.notes.extend(fresh.flags)
        top = pool.best()
        if top is not None and top.upper_value < best[0]:
            best = (top.upper_value, np.array(top.x, float), top.y_star)
        if len(pool) < 2 and cfg.fit == "train":
            rec.status = "pool-too-small"
        else:
            t0 = clock()
            net = _fit(pool, inst.n, cfg, t_seed)
            rec.t_train = clock() - t0
            rec.train_mse = net.info.get("train_mse", math.nan)
            rec.neurons = net.n_neurons
            t0 = clock()
            res = solve_reformulation(inst, net, cfg.mode, cfg.mip_params(), start=(best[1], best[2]))
            rec.status = res.status.value
            rec.notes.extend(res.flags)
            rec.ref_objective = res.objective
            if res.x is not None:
                cand = certify(inst, res.x)
                rec.x, rec.y, rec.candidate_f = _ints(cand.x), cand.y.tolist(), cand.f
                if cand.f < best[0]:
                    best = (cand.f, cand.x, cand.y)
            rec.t_solve = clock() - t0
        rec.f_ub = best[0]
        records.append(rec)
    return RunReport(cfg.to_dict(), cfg.seed, relax.bound, records, _ints(best[1]),
                     np.asarray(best[2], float).tolist(), best[0])


def _ints(x) -> list:
    return [int(round(v)) for v in x]


# -- diagnostics ------------------------------------------------------------------


def hausdorff_unsampled(inst: BilevelInstance, pool, chunk: int = 4096) -> float:
    """Largest distance from a tender in X outside the pool to its nearest pooled tender."""
    if inst.n > HAUSDORFF_GUARD:
        raise ValueError(f"Hausdorff distance refused for n={inst.n} > {HAUSDORFF_GUARD}")
    sampled = {tuple(int(v) for v in (r.x if hasattr(r, "x") else r)) for r in pool}
    pts = binary_points(inst.n)
    feasible = pts[np.all(pts @ inst.A1.T <= inst.b1 + 1e-9, axis=1)]
    keys = [tuple(p) for p in feasible]
    rest = feasible[[k not in sampled for k in keys]] if len(feasible) else feasible
    if len(rest) == 0:
        return 0.0
    if not sampled:
        return math.inf
    P = np.array(sorted(sampled), dtype=float)
    worst = 0.0
    for s in range(0, len(rest), chunk):
        R = rest[s:s + chunk].astype(float)
        ham = R @ (1.0 - P).T + (1.0 - R) @ P.T
        worst = max(worst, float(ham.min(axis=1).max()))
    return math.sqrt(worst)


# -- the two-variable toy ----------------------------------------------------------


@dataclass
class FixtureSolution:
    x: tuple
    y: float
    f: float
    phi_hat: dict


def solve_fixture(net: ValueNet, tol: float = CERTIFY_TOL) -> FixtureSolution:
    """Reformulation of the two-variable toy with the network as follower-value bound.

    The network is embedded in a MILP and evaluated at each tender; the
    follower constraint ``-(y-2)^2 >= phi_hat`` then leaves ``y`` in an
    interval around 2, so the best feasible ``y`` has a closed form.
    """
    if net.n != 2:
        raise ValueError("the toy has two tender variables")
    model = Model("min", name="toy")
    xv = [model.add_binary(name=f"x{i}") for i in range(2)]
    phi, _ = embed_bigm(model, net, xv)
    model.set_objective({phi: 1.0})
    best = None
    values = {}
    for x1, x2 in ((0, 0), (0, 1), (1, 0), (1, 1)):
        model.set_bounds(xv[0], x1, x1)
        model.set_bounds(xv[1], x2, x2)
        sol = solve_mip(model)
        p = float(sol.x[phi])
        values[(x1, x2)] = p
        if p > tol:
            continue
        radius = math.sqrt(max(-p, 0.0))
        ub = fixture_y_bound(x1, x2)
        if 2.0 - radius > ub + tol:
            continue
        y = min(ub, 2.0 + radius)
        f = fixture_upper_objective(x1, x2, y)
        if best is None or f < best[2]:
            best = ((x1, x2), y, f)
    if best is None:
        raise BilevelInfeasible("the network excludes every tender")
    return FixtureSolution(best[0], best[1], best[2], values)


def fixture_pool() -> SamplePool:
    """All four toy tenders labelled with the follower optimum."""
    recs = []
    for x in ((0, 0), (0, 1), (1, 0), (1, 1)):
        y = fixture_lower_argmax(*x)
        recs.append(SampleRecord(x, fixture_phi(*x), np.array([y]), fixture_upper_objective(*x, y)))
    return SamplePool(recs, strategy="enumerate")
