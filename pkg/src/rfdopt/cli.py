"""Command-line interface: single runs, campaigns, profiles, listings.

Exit codes: 0 success, 2 configuration error, 3 aborted run.  The
default output directory comes from $RFDOPT_OUTDIR (falling back to
./runs).  A key=value config file can override any solve flag.
"""
from __future__ import annotations

import os
import sys

import click

from . import bench, problems, solver

OUTDIR_ENV = "RFDOPT_OUTDIR"
EXIT_ABORT = 3

_CONFIG_KEYS = {
    "problem": str, "solver": str, "sigma0": float, "tau0": float,
    "eps": float, "budget": int, "seed": int, "out": str,
}


def _default_out():
    return os.environ.get(OUTDIR_ENV, "runs")


def _read_config_file(path):
    overrides = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise click.UsageError(
                    f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise click.UsageError(
                    f"{path}:{lineno}: unknown key {key!r} "
                    f"(known: {', '.join(sorted(_CONFIG_KEYS))})")
            try:
                overrides[key] = _CONFIG_KEYS[key](value)
            except ValueError:
                raise click.UsageError(
                    f"{path}:{lineno}: bad value {value!r} for {key}")
    return overrides


def _solver_config(scheme, sigma0, tau0, eps, budget, seed, lipschitz_ref=None):
    try:
        return solver.SolverConfig(
            scheme=scheme, sigma0=sigma0, tau0=tau0, epsilon=eps,
            budget_fe=budget, seed=seed, lipschitz_ref=lipschitz_ref)
    except solver.ConfigError as exc:
        raise click.UsageError(str(exc))


@click.group()
def main():
    """Derivative-free Riemannian optimization with adaptive
    finite-difference accuracy and stepsize."""


@main.command()
@click.option("--problem", help="Instance name, e.g. quad-n2 or tsv-5-5-2.")
@click.option("--solver", "scheme",
              type=click.Choice(solver.SCHEMES), default=solver.INT_RFD,
              show_default=True)
@click.option("--sigma0", type=float, default=1.0, show_default=True)
@click.option("--tau0", type=float, default=100.0, show_default=True)
@click.option("--eps", type=float, default=1e-5, show_default=True)
@click.option("--budget", type=int, default=None,
              help="FE budget [default: 100*(d+1)].")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", default=None, help="Output directory.")
@click.option("--config", "config_file", type=click.Path(exists=True),
              help="key=value file overriding the flags above.")
def solve(problem, scheme, sigma0, tau0, eps, budget, seed, out, config_file):
    """Run one solver on one problem and write its trace CSV."""
    if config_file:
        over = _read_config_file(config_file)
        problem = over.get("problem", problem)
        scheme = over.get("solver", scheme)
        sigma0 = over.get("sigma0", sigma0)
        tau0 = over.get("tau0", tau0)
        eps = over.get("eps", eps)
        budget = over.get("budget", budget)
        seed = over.get("seed", seed)
        out = over.get("out", out)
    if problem is None:
        raise click.UsageError("--problem is required")
    if scheme not in solver.SCHEMES:
        raise click.UsageError(f"unknown solver {scheme!r}")
    out = out or _default_out()
    cfg = _solver_config(scheme, sigma0, tau0, eps, budget, seed)
    try:
        inst = problems.get_problem(problem, seed)
    except KeyError as exc:
        raise click.UsageError(f"unknown problem: {exc}")
    if scheme == solver.EXT_RFD and not inst.objective.extrinsic_evaluable:
        raise click.UsageError(
            f"--solver ext-rfd needs an objective evaluable off the "
            f"manifold; problem {problem!r} is manifold-only")
    x0 = inst.initial_point(seed)
    try:
        trace = solver.run(inst.objective, inst.manifold, x0, cfg,
                           problem=problem)
    except (solver.SolverAbort, Exception) as exc:
        if isinstance(exc, click.ClickException):
            raise
        click.echo(f"run aborted: {exc}", err=True)
        sys.exit(EXIT_ABORT)
    path = os.path.join(out, problem, f"{scheme}.csv")
    trace.to_csv(path)
    click.echo(f"problem={problem} solver={scheme} "
               f"f_final={trace.f_final:.9g} fe={trace.fe_total} "
               f"re={trace.re_total} reason={trace.termination_reason} "
               f"trace={path}")


def _load_suite(name, seed, limit):
    if name == "euclidean":
        suite = problems.euclidean_suite(seed)
    elif name == "riemannian":
        suite = problems.riemannian_suite(seed)
    else:
        raise click.UsageError(f"unknown suite {name!r}")
    if limit is not None:
        suite = problems.ProblemSuite(suite.instances[:limit], seed)
    return suite


@main.command("bench")
@click.option("--suite", default="euclidean", show_default=True,
              help="euclidean or riemannian.")
@click.option("--solvers", default="int-rfd,dfqrm", show_default=True,
              help="Comma-separated solver schemes.")
@click.option("--sigma0", type=float, default=1.0, show_default=True)
@click.option("--tau0", type=float, default=100.0, show_default=True)
@click.option("--eps", type=float, default=1e-5, show_default=True)
@click.option("--eta", type=float, default=1e-3, show_default=True)
@click.option("--budget", type=int, default=None,
              help="FE budget per run [default: 100*(d+1)].")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--limit", type=int, default=None,
              help="Use only the first N suite instances.")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--out", default=None, help="Output directory.")
def bench_cmd(suite, solvers, sigma0, tau0, eps, eta, budget, seed, limit,
              jobs, out):
    """Run a campaign and write its cost table plus all traces."""
    out = out or _default_out()
    names = [s.strip() for s in solvers.split(",") if s.strip()]
    if not names:
        raise click.UsageError("--solvers must name at least one scheme")
    cfgs = {}
    for name in names:
        if name not in solver.SCHEMES:
            raise click.UsageError(f"unknown solver {name!r} in --solvers")
        cfgs[name] = _solver_config(name, sigma0, tau0, eps, budget, seed)
    suite_obj = _load_suite(suite, seed, limit)
    try:
        spec = bench.ConvergenceSpec(eta=eta, budget=budget)
    except ValueError as exc:
        raise click.UsageError(str(exc))

    campaign_id = f"{suite}-seed{seed}"
    base = os.path.join(out, campaign_id)
    aborted = None
    try:
        table = bench.run_campaign(suite_obj, cfgs, spec, x0_seed=seed,
                                   jobs=jobs)
    except bench.CampaignError as exc:
        table = exc.table
        aborted = exc

    for (prob, sname), trace in table.traces.items():
        trace.to_csv(os.path.join(base, prob, f"{sname}.csv"))
    bench.cost_table_to_csv(table, os.path.join(base, "costs.csv"))
    manifest = [
        f"campaign={campaign_id}", f"suite={suite}",
        f"solvers={','.join(names)}",
        f"sigma0={sigma0!r}", f"tau0={tau0!r}", f"eps={eps!r}",
        f"eta={eta!r}", f"budget={budget}", f"seed={seed}",
        f"problems={len(table.problems)}",
    ]
    _write_text_atomic(os.path.join(base, "manifest.txt"),
                       "\n".join(manifest) + "\n")
    click.echo(f"campaign {campaign_id}: {len(table.problems)} problems x "
               f"{len(table.solvers)} solvers -> {base}/costs.csv")
    if aborted is not None:
        click.echo(f"campaign had failures: {aborted}", err=True)
        sys.exit(EXIT_ABORT)


def _write_text_atomic(path, text):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


@main.command("profiles")
@click.option("--costs", "costs_file", required=True,
              type=click.Path(exists=True), help="Cost-table CSV from bench.")
@click.option("--out", default=None, help="Output directory.")
@click.option("--alpha-max", type=float, default=32.0, show_default=True)
@click.option("--points", type=int, default=200, show_default=True)
def profiles_cmd(costs_file, out, alpha_max, points):
    """Build performance-profile curves from a cost table."""
    import numpy as np
    out = out or _default_out()
    if alpha_max <= 1.0 or points < 2:
        raise click.UsageError("need --alpha-max > 1 and --points >= 2")
    try:
        table = bench.cost_table_from_csv(costs_file)
        curves = bench.build_profile(
            table, np.geomspace(1.0, alpha_max, points))
    except ValueError as exc:
        raise click.UsageError(str(exc))
    os.makedirs(out, exist_ok=True)
    csv_path = os.path.join(out, "profiles.csv")
    svg_path = os.path.join(out, "profiles.svg")
    bench.profiles_to_csv(curves, csv_path)
    bench.plot_profiles(curves, svg_path)
    click.echo(f"profiles -> {csv_path}, {svg_path}")


@main.command("list-problems")
@click.option("--suite", default="riemannian", show_default=True)
@click.option("--csv", "csv_path", default=None,
              help="Also export the grid as CSV.")
@click.option("--seed", type=int, default=0, show_default=True)
def list_problems(suite, csv_path, seed):
    """Print the instance grid with ambient and manifold dimensions."""
    if suite == "riemannian":
        rows = problems.table1_metadata()
        click.echo(f"{'name':<16} {'m1':>4} {'m2':>4} {'m3':>4} "
                   f"{'n':>6} {'d':>6}")
        for r in rows:
            m3 = "" if r["m3"] is None else r["m3"]
            click.echo(f"{r['name']:<16} {r['m1']:>4} {r['m2']:>4} "
                       f"{m3:>4} {r['n']:>6} {r['d']:>6}")
        click.echo(f"{len(rows)} instances")
        if csv_path:
            problems.suite_metadata_csv(csv_path, seed)
            click.echo(f"grid -> {csv_path}")
    elif suite == "euclidean":
        click.echo(f"{'name':<16} {'n':>6} {'d':>6}")
        insts = list(problems.euclidean_suite(seed))
        for inst in insts:
            click.echo(f"{inst.name:<16} {inst.dims['n']:>6} "
                       f"{inst.dims['d']:>6}")
        click.echo(f"{len(insts)} instances")
    else:
        raise click.UsageError(f"unknown suite {suite!r}")


if __name__ == "__main__":
    main()
