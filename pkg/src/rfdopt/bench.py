"""Benchmark harness: budgeted campaigns and performance profiles.

A campaign runs every (problem, solver) pair from the same start point
under a fixed evaluation budget, scores each run with the eta-relative
convergence test against the best value any solver found, and turns
the resulting cost matrix into performance-profile curves
rho_s(alpha) = fraction of problems solver s finishes within a factor
alpha of the cheapest solver.
"""
from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional

import numpy as np

from .solver import RunTrace, SolverConfig, _write_csv_atomic, run, with_budget

UNSOLVED = math.inf

COST_METRICS = ("fe", "re", "wall")


class CampaignError(RuntimeError):
    """One or more runs aborted; carries the partial table."""

    def __init__(self, failures, table):
        self.failures = failures
        self.table = table
        details = "; ".join(f"{p}/{s}: {err}" for p, s, err in failures)
        super().__init__(f"{len(failures)} run(s) aborted: {details}")


@dataclass
class ConvergenceSpec:
    eta: float = 1e-3
    budget: Optional[int] = None     # default 100*(d+1) per problem
    cost_metric: str = "fe"

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ValueError("eta must lie in (0, 1)")
        if self.cost_metric not in COST_METRICS:
            raise ValueError(f"cost_metric must be one of {COST_METRICS}")


@dataclass
class ProfileTable:
    problems: List[str]
    solvers: List[str]
    costs: np.ndarray                 # shape (P, S), UNSOLVED where unsolved
    f_best: Optional[np.ndarray] = None
    f0: Optional[np.ndarray] = None
    known_optimum: Optional[List[Optional[float]]] = None
    traces: Dict[tuple, RunTrace] = field(default_factory=dict)


@dataclass
class ProfileCurve:
    solver: str
    alpha: np.ndarray
    rho: np.ndarray


def _record_cost(rec, metric):
    if metric == "fe":
        return float(rec.fe)
    if metric == "re":
        return float(rec.re)
    return rec.wall


def convergence_cost(trace, f0, f_best, spec):
    """Cumulative cost at the first record passing the convergence test,
    or UNSOLVED."""
    if f_best > f0:
        warnings.warn("f_best above f(x0); reporting UNSOLVED")
        return UNSOLVED
    threshold = f0 - (1.0 - spec.eta) * (f0 - f_best)
    for rec in trace.records:
        if rec.f <= threshold:
            return _record_cost(rec, spec.cost_metric)
    return UNSOLVED


def run_campaign(suite, solvers: Mapping[str, SolverConfig],
                 spec=None, x0_seed=0, jobs=1):
    """Run every (problem, solver) pair and assemble the cost matrix.

    All solvers share the same start point per problem.  A run that
    aborts marks its cell UNSOLVED; after all pairs finish,
    CampaignError is raised listing the failed pairs (with the partial
    table attached).
    """
    spec = spec or ConvergenceSpec()
    instances = list(suite)
    solver_names = list(solvers)
    tasks = []
    for inst in instances:
        x0 = inst.initial_point(x0_seed)
        budget = spec.budget
        if budget is None:
            budget = 100 * (inst.manifold.dim + 1)
        for name in solver_names:
            cfg = solvers[name]
            if cfg.budget_fe is None:
                cfg = with_budget(cfg, budget)
            tasks.append((inst, name, cfg, x0))

    def _one(task):
        inst, name, cfg, x0 = task
        return run(inst.objective, inst.manifold, x0, cfg, problem=inst.name)

    results = []
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_one, t) for t in tasks]
            for task, fut in zip(tasks, futures):
                try:
                    results.append((task, fut.result(), None))
                except Exception as exc:
                    results.append((task, None, exc))
    else:
        for task in tasks:
            try:
                results.append((task, _one(task), None))
            except Exception as exc:
                results.append((task, None, exc))

    traces = {}
    failures = []
    for (inst, name, _, _), trace, exc in results:
        if exc is not None:
            failures.append((inst.name, name, exc))
        else:
            traces[(inst.name, name)] = trace

    P, S = len(instances), len(solver_names)
    costs = np.full((P, S), UNSOLVED)
    f_best = np.full(P, np.nan)
    f0s = np.full(P, np.nan)
    for p, inst in enumerate(instances):
        pair_traces = [traces.get((inst.name, s)) for s in solver_names]
        have = [t for t in pair_traces if t is not None]
        if not have:
            continue
        f0s[p] = have[0].f0
        f_best[p] = min(t.f_final for t in have)
        for s, t in enumerate(pair_traces):
            if t is not None:
                costs[p, s] = convergence_cost(t, f0s[p], f_best[p], spec)

    table = ProfileTable(
        problems=[i.name for i in instances], solvers=solver_names,
        costs=costs, f_best=f_best, f0=f0s,
        known_optimum=[i.optimum for i in instances], traces=traces)
    if failures:
        raise CampaignError(failures, table)
    return table


def build_profile(table, alpha_grid=None):
    """Performance-profile curves from a cost matrix.

    Unsolved cells never count as solved for any alpha; the denominator
    is always the full problem count.
    """
    if len(table.problems) == 0:
        raise ValueError("empty problem set")
    if alpha_grid is None:
        alpha_grid = np.geomspace(1.0, 32.0, 200)
    alpha_grid = np.asarray(alpha_grid, float)
    costs = np.asarray(table.costs, float)
    P, S = costs.shape
    ratios = np.full((P, S), np.inf)
    for p in range(P):
        finite = np.isfinite(costs[p])
        if finite.any():
            ratios[p] = costs[p] / costs[p][finite].min()
    curves = []
    for s, name in enumerate(table.solvers):
        rho = np.array([np.count_nonzero(ratios[:, s] <= a) / P
                        for a in alpha_grid])
        curves.append(ProfileCurve(solver=name, alpha=alpha_grid, rho=rho))
    return curves


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def cost_table_to_csv(table, path):
    """Columns: problem,solver,cost,solved."""
    rows = []
    for p, prob in enumerate(table.problems):
        for s, solver in enumerate(table.solvers):
            c = table.costs[p, s]
            solved = math.isfinite(c)
            rows.append([prob, solver, repr(float(c)) if solved else "inf",
                         int(solved)])
    _write_csv_atomic(path, ["problem", "solver", "cost", "solved"], rows)


def cost_table_from_csv(path):
    """Rebuild a ProfileTable (costs only) from a cost-table CSV."""
    cells = {}
    problems: List[str] = []
    solvers: List[str] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {
                "problem", "solver", "cost", "solved"}.issubset(reader.fieldnames):
            raise ValueError(f"{path}:1: expected header "
                             "problem,solver,cost,solved")
        for line, row in enumerate(reader, start=2):
            try:
                prob, solver = row["problem"], row["solver"]
                solved = bool(int(row["solved"]))
                cost = float(row["cost"]) if solved else UNSOLVED
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{line}: malformed cost row "
                                 f"({exc})") from exc
            if prob not in problems:
                problems.append(prob)
            if solver not in solvers:
                solvers.append(solver)
            cells[(prob, solver)] = cost
    costs = np.full((len(problems), len(solvers)), UNSOLVED)
    for (prob, solver), cost in cells.items():
        costs[problems.index(prob), solvers.index(solver)] = cost
    return ProfileTable(problems=problems, solvers=solvers, costs=costs)


def profiles_to_csv(curves, path):
    """Columns: solver,alpha,rho."""
    rows = []
    for curve in curves:
        for a, r in zip(curve.alpha, curve.rho):
            rows.append([curve.solver, repr(float(a)), repr(float(r))])
    _write_csv_atomic(path, ["solver", "alpha", "rho"], rows)


def profiles_from_csv(path):
    data: Dict[str, List[tuple]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for line, row in enumerate(reader, start=2):
            try:
                data.setdefault(row["solver"], []).append(
                    (float(row["alpha"]), float(row["rho"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{line}: malformed profile row "
                                 f"({exc})") from exc
    curves = []
    for solver, pts in data.items():
        alpha, rho = zip(*pts)
        curves.append(ProfileCurve(solver=solver, alpha=np.array(alpha),
                                   rho=np.array(rho)))
    return curves


def plot_profiles(curves, path):
    """Render the curves to a static vector-graphics file."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for curve in curves:
        ax.step(curve.alpha, curve.rho, where="post", label=curve.solver)
    ax.set_xscale("log", base=2)
    ax.set_xlabel(r"performance ratio $\alpha$")
    ax.set_ylabel(r"$\rho(\alpha)$")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
