"""Command line driver: validate, ray, estimate, solve, continue, sweep.

Every subcommand reads one TOML config (see config.py for the schema)
and writes CSVs into the configured output directory. Exit codes: 0 on
success, 1 on configuration problems, 2 when hypothesis validation
fails, 3 when a solver or estimator does not converge. With a fixed
config and seed all outputs are byte identical across runs; the
NEHARI_PHI_THREADS variable sizes the sweep worker pool and may change
wall time only.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import click
import numpy as np

from . import config as cf
from . import domain as dm
from .energy import with_lambda
from .errors import ConfigError, HypothesisError, NehariError
from .extremal import EstimateOptions, estimate_extremal
from .fibering import analyze_ray, trace
from .nfunction import validate_hypotheses
from .solver import (
    BRANCH_MINUS,
    BRANCH_PLUS,
    SolveOptions,
    best_branch_attempt,
    continuation_to_lambda_star,
    default_starts,
    sweep,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VALIDATION = 2
EXIT_NO_CONVERGENCE = 3

THREADS_ENV = "NEHARI_PHI_THREADS"


def _cell(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def _prepare_out(directory: str, out_override: str | None) -> Path:
    out = Path(out_override) if out_override else Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path: Path, header, rows, force: bool):
    if path.exists() and not force:
        raise ConfigError(f"refusing to overwrite {path} (pass --force)")
    with open(path, "w", newline="") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_cell(x) for x in row) + "\n")
    click.echo(f"wrote {path}")


def _write_nodal(path: Path, values, force: bool):
    if path.exists() and not force:
        raise ConfigError(f"refusing to overwrite {path} (pass --force)")
    dm.write_nodal_csv(path, np.asarray(values, dtype=float))
    click.echo(f"wrote {path}")


def _solve_options(cfg: cf.RunConfig, force: bool, hint: float | None) -> SolveOptions:
    s = cfg.solver
    return SolveOptions(
        tol=s.tol,
        max_iters=s.max_iters,
        starts=s.starts,
        seed=s.seed,
        force=force or s.force,
        lambda_star_hint=hint,
    )


def _estimate_options(cfg: cf.RunConfig) -> EstimateOptions:
    e = cfg.estimate
    return EstimateOptions(
        starts=e.starts, max_iters=e.max_iters, step=e.step, seed=e.seed
    )


def _get_extremal(cfg: cf.RunConfig, prob, star: float | None, lower: float | None):
    """Use explicit estimates when given, otherwise run the optimizer."""
    if star is None or lower is None:
        est = estimate_extremal(prob, _estimate_options(cfg))
        star = est.lambda_star if star is None else star
        lower = est.lambda_lower if lower is None else lower
    return star, lower


def _ray_direction(cfg: cf.RunConfig, mesh: dm.Mesh) -> dm.Field:
    ray = cfg.ray
    if ray.direction == "bump":
        field = dm.bump_field(mesh)
    elif ray.direction == "sine":
        k = ray.mode
        if mesh.dim == 1:
            lo, hi = mesh.bounds
            field = dm.field_from_function(
                mesh, lambda x: np.sin(k * np.pi * (x - lo) / (hi - lo))
            )
        else:
            (x0, x1), (y0, y1) = mesh.bounds
            field = dm.field_from_function(
                mesh,
                lambda x, y: np.sin(k * np.pi * (x - x0) / (x1 - x0))
                * np.sin(k * np.pi * (y - y0) / (y1 - y0)),
            )
    else:
        rng = np.random.default_rng(ray.seed)
        field = dm.interior_to_field(
            mesh, rng.standard_normal(mesh.interior_count)
        )
    return dm.make_field(mesh, ray.scale * dm.nodal_array(mesh, field))


@click.group()
def cli():
    """Nehari-manifold branch solver for concave-convex Phi-Laplacian problems."""


@cli.command()
@click.argument("config_path", type=click.Path())
def validate(config_path):
    """Check the structural hypotheses and print the verdict table."""
    cfg = cf.load_config(config_path)
    model = cf.build_model(cfg.problem.phi)
    report = validate_hypotheses(model, cfg.problem.q, cfg.problem.p, cfg.problem.dim)
    click.echo(report.table())
    pr = cfg.problem
    subs = pr.subdivisions if pr.dim == 2 else pr.subdivisions[0]
    mesh = dm.build_mesh(pr.dim, pr.bounds, subs)
    weight_ok = True
    try:
        weight = cf.build_weight(mesh, pr.weight)
        floor = float(np.min(weight.values))
        click.echo(f"{'weight':<12} {'pass':<16} floor = {floor:g}")
    except HypothesisError as exc:
        weight_ok = False
        click.echo(f"{'weight':<12} {'fail':<16} {exc}")
    if not (report.all_pass() and weight_ok):
        raise _ValidationFailure("hypothesis validation failed")
    click.echo("all hypotheses pass")


class _ValidationFailure(NehariError):
    pass


@cli.command()
@click.argument("config_path", type=click.Path())
@click.option("--out", default=None, help="output directory override")
@click.option("--force", is_flag=True, help="overwrite existing outputs")
def ray(config_path, out, force):
    """Trace the fibering quotients along one direction; write ray.csv."""
    cfg = cf.load_config(config_path)
    prob = cf.build_problem(cfg)
    u = _ray_direction(cfg, prob.mesh)
    ts = np.logspace(
        np.log10(cfg.ray.t_min), np.log10(cfg.ray.t_max), cfg.ray.samples
    )
    lam = prob.lam if prob.lam > 0.0 else None
    rows = trace(prob, u, ts, lam=prob.lam)
    summary = analyze_ray(prob, u, lam=lam)
    out_dir = _prepare_out(cfg.output.directory, out)
    _write_csv(out_dir / "ray.csv", ("t", "rn", "re", "gamma"), rows, force)
    click.echo(
        f"t_n = {summary.t_n:.12g}  t_e = {summary.t_e:.12g}  "
        f"Lambda_n = {summary.Lambda_n:.12g}  Lambda_e = {summary.Lambda_e:.12g}"
    )
    if summary.roots is not None:
        r = summary.roots
        if r.kind == "two_roots":
            click.echo(f"roots at lambda = {summary.lambda_used:g}: "
                       f"t_plus = {r.t_plus:.12g}  t_minus = {r.t_minus:.12g}")
        else:
            click.echo(f"roots at lambda = {summary.lambda_used:g}: {r.kind}")


@cli.command()
@click.argument("config_path", type=click.Path())
@click.option("--out", default=None, help="output directory override")
@click.option("--force", is_flag=True, help="overwrite existing outputs")
def estimate(config_path, out, force):
    """Estimate both extremal parameters; write lambda_star.csv and minimizers."""
    cfg = cf.load_config(config_path)
    prob = cf.build_problem(cfg)
    opts = _estimate_options(cfg)
    est = estimate_extremal(prob, opts)
    out_dir = _prepare_out(cfg.output.directory, out)
    _write_csv(
        out_dir / "lambda_star.csv",
        ("quantity", "value", "starts", "iters", "seed"),
        [
            ("lambda_star", est.lambda_star, est.starts, est.iters, opts.seed),
            ("lambda_lower", est.lambda_lower, est.starts, est.iters, opts.seed),
        ],
        force,
    )
    _write_nodal(out_dir / "minimizer_n.csv",
                 dm.nodal_array(prob.mesh, est.minimizer_n), force)
    _write_nodal(out_dir / "minimizer_e.csv",
                 dm.nodal_array(prob.mesh, est.minimizer_e), force)
    click.echo(f"lambda_star  = {est.lambda_star:.12g}")
    click.echo(f"lambda_lower = {est.lambda_lower:.12g}")


_REPORT_HEADER = (
    "branch_requested", "status", "lambda", "branch", "J_value",
    "residual", "second_diag", "iterations", "converged",
)


def _report_row(requested: str, status: str, rep):
    if rep is None:
        return (requested, status, np.nan, "", np.nan, np.nan, np.nan, 0, False)
    return (
        requested, status, rep.lam, rep.branch, rep.J_value,
        rep.residual, rep.second_diag, rep.iterations, rep.converged,
    )


@cli.command()
@click.argument("config_path", type=click.Path())
@click.option("--out", default=None, help="output directory override")
@click.option("--force", is_flag=True, help="overwrite outputs / ignore lambda guard")
@click.option("--lambda-star", type=float, default=None,
              help="extremal estimate for the guardrail (skips the optimizer)")
def solve(config_path, out, force, lambda_star):
    """Solve both branches at the configured lambda; write solutions + report."""
    cfg = cf.load_config(config_path)
    prob = cf.build_problem(cfg)
    if lambda_star is None:
        est = estimate_extremal(prob, _estimate_options(cfg))
        lambda_star = est.lambda_star
        click.echo(f"lambda_star estimate = {lambda_star:.12g}")
    opts = _solve_options(cfg, force, lambda_star)
    inits = default_starts(prob.mesh, opts.starts, opts.seed)
    rep_p, status_p = best_branch_attempt(prob, inits, opts, BRANCH_PLUS)
    rep_m, status_m = best_branch_attempt(prob, inits, opts, BRANCH_MINUS)
    out_dir = _prepare_out(cfg.output.directory, out)
    _write_csv(
        out_dir / "solve_report.csv",
        _REPORT_HEADER,
        [_report_row("plus", status_p, rep_p), _report_row("minus", status_m, rep_m)],
        force,
    )
    for tag, rep in (("plus", rep_p), ("minus", rep_m)):
        if rep is not None:
            _write_nodal(out_dir / f"solution_{tag}.csv",
                         dm.nodal_array(prob.mesh, rep.u), force)
    for tag, rep, status in (("plus", rep_p, status_p), ("minus", rep_m, status_m)):
        if rep is None:
            click.echo(f"{tag}: {status}")
        else:
            click.echo(
                f"{tag}: {status} branch={rep.branch} J={rep.J_value:.12g} "
                f"residual={rep.residual:.3g} iterations={rep.iterations}"
            )
    if not (rep_p and rep_p.converged and rep_m and rep_m.converged):
        raise _NonConvergence("at least one branch did not converge")


class _NonConvergence(NehariError):
    pass


@cli.command("continue")
@click.argument("config_path", type=click.Path())
@click.option("--out", default=None, help="output directory override")
@click.option("--force", is_flag=True, help="overwrite existing outputs")
@click.option("--lambda-star", type=float, default=None,
              help="target extremal value (skips the optimizer)")
def continue_cmd(config_path, out, force, lambda_star):
    """Walk lambda up to the extremal estimate with warm starts."""
    cfg = cf.load_config(config_path)
    prob = cf.build_problem(cfg)
    if lambda_star is None:
        est = estimate_extremal(prob, _estimate_options(cfg))
        lambda_star = est.lambda_star
        click.echo(f"lambda_star estimate = {lambda_star:.12g}")
    opts = _solve_options(cfg, force, lambda_star)
    result = continuation_to_lambda_star(
        prob, lambda_star, k_max=cfg.continuation.k_max, opts=opts
    )
    out_dir = _prepare_out(cfg.output.directory, out)
    _write_csv(
        out_dir / "continuation.csv",
        ("step", "lambda", "J_value", "residual", "second_diag",
         "iterations", "branch", "converged"),
        [
            (k, rep.lam, rep.J_value, rep.residual, rep.second_diag,
             rep.iterations, rep.branch, rep.converged)
            for k, rep in enumerate(result.path, start=1)
        ],
        force,
    )
    _write_nodal(out_dir / "final_solution.csv",
                 dm.nodal_array(prob.mesh, result.final.u), force)
    final = result.final
    click.echo(
        f"final: lambda={final.lam:.12g} branch={final.branch} "
        f"J={final.J_value:.12g} residual={final.residual:.3g}"
    )
    if not all(rep.converged for rep in result.path):
        raise _NonConvergence("a continuation step did not converge")


@cli.command("sweep")
@click.argument("config_path", type=click.Path())
@click.option("--out", default=None, help="output directory override")
@click.option("--force", is_flag=True, help="overwrite existing outputs")
@click.option("--lambda-star", type=float, default=None,
              help="extremal estimate (skips the optimizer)")
@click.option("--lambda-lower", type=float, default=None,
              help="energy-sign estimate (skips the optimizer)")
def sweep_cmd(config_path, out, force, lambda_star, lambda_lower):
    """Solve both branches over a lambda grid; write sweep.csv."""
    cfg = cf.load_config(config_path)
    prob = cf.build_problem(cfg)
    star, lower = _get_extremal(cfg, prob, lambda_star, lambda_lower)
    click.echo(f"lambda_star = {star:.12g}  lambda_lower = {lower:.12g}")
    sw = cfg.sweep
    if sw.relative:
        grid = np.linspace(sw.lambda_min * star, sw.lambda_max * star, sw.count)
    else:
        grid = np.linspace(sw.lambda_min, sw.lambda_max, sw.count)
    threads = int(os.environ.get(THREADS_ENV, "1"))
    opts = _solve_options(cfg, force, star)
    rows = sweep(prob, grid, lower, star, opts, threads=threads)
    out_dir = _prepare_out(cfg.output.directory, out)
    _write_csv(
        out_dir / "sweep.csv",
        ("lambda", "J_plus", "J_minus", "norm_plus", "norm_minus",
         "sign_tag", "status_plus", "status_minus"),
        [
            (r.lam, r.J_plus, r.J_minus, r.norm_plus, r.norm_minus,
             r.sign_tag, r.status_plus, r.status_minus)
            for r in rows
        ],
        force,
    )


def run(argv) -> int:
    """Dispatch a CLI invocation, mapping failures to stable exit codes."""
    try:
        cli.main(args=list(argv), standalone_mode=False)
        return EXIT_OK
    except _ValidationFailure as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_VALIDATION
    except HypothesisError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_VALIDATION
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_CONFIG
    except _NonConvergence as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_NO_CONVERGENCE
    except NehariError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_NO_CONVERGENCE
    except click.ClickException as exc:
        exc.show()
        return EXIT_CONFIG
    except click.exceptions.Abort:
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
