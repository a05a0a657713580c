"""Projected descent on the Nehari constraint set, continuation and sweeps.

Both positive solution branches are computed by the same loop: take a
weak-form gradient step preconditioned by the factored Dirichlet
stiffness operator, replace the iterate by its nodal absolute value (the
energy is even, so this costs nothing and steers toward the positive
solutions), then rescale the iterate back onto the Nehari constraint set
by solving the ray equation, choosing the rising-branch root for the
local-minimum branch and the falling-branch root for the local-maximum
branch. Step lengths backtrack from 1.0 by halving under an Armijo test
with parameter 1e-4; on the constraint set the directional derivative of
the projected objective equals the unprojected one, so the test accepts
for moderate steps and the energy decreases monotonically along the
iteration. The residual is the stiffness-dual norm of the gradient
normalized by the field scale.

The continuation driver walks lambda_k = lambda_star (1 - 2^-k) up to the
estimated extremal value, warm-starting each solve from the previous
solution; the sweep driver repeats both solves over a lambda grid and
tags each row by its position relative to the two extremal estimates.
"""

from __future__ import annotations

import weakref
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import domain as dm
from .energy import (
    Problem,
    breakdown,
    energy,
    energy_of,
    gradient,
    h1_seminorm,
    phi_norm_proxy,
    second_along,
    with_lambda,
)
from .errors import ConfigError, ContinuationError, ProjectionError, SearchError
from .fibering import (
    N_MINUS,
    N_PLUS,
    N_ZERO,
    classify,
    nehari_roots_ray,
    ray_data,
)

BRANCH_PLUS = "plus"
BRANCH_MINUS = "minus"

# Refuse lambdas more than this factor above the provided extremal estimate.
LAMBDA_GUARD_FACTOR = 1.001
# Sweep grids may probe at most this factor above the extremal estimate.
SWEEP_LAMBDA_CAP = 1.2

ALPHA_MIN = 1e-14


@dataclass(frozen=True)
class SolveOptions:
    """Tolerances and budgets for the branch solvers."""

    tol: float = 1e-8
    max_iters: int = 200
    armijo: float = 1e-4
    lambda_star_hint: float | None = None
    force: bool = False
    starts: int = 1
    seed: int = 0


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one branch solve."""

    u: dm.Field
    branch: str
    J_value: float
    residual: float
    second_diag: float
    iterations: int
    lam: float
    converged: bool
    j_trace: tuple[float, ...]
    message: str = ""


_scaffold_cache: "weakref.WeakKeyDictionary[dm.Mesh, tuple]" = (
    weakref.WeakKeyDictionary()
)


def _assembly_scaffold(mesh: dm.Mesh):
    """Interior-node sparsity data for weighted stiffness assembly.

    Returns the unweighted local matrices (grad_k . grad_l times element
    measure) plus flattened interior row/col indices and the mask that
    drops entries touching boundary nodes. Cached per mesh.
    """
    cached = _scaffold_cache.get(mesh)
    if cached is not None:
        return cached
    npe = mesh.elements.shape[1]
    base_local = np.einsum(
        "eki,eli->ekl", mesh.basis_gradients, mesh.basis_gradients
    ) * mesh.element_measure[:, None, None]
    rows = np.repeat(mesh.elements, npe, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, npe)).ravel()
    to_interior = np.full(mesh.n_nodes, -1, dtype=int)
    to_interior[mesh.interior_indices] = np.arange(mesh.interior_count)
    ri, ci = to_interior[rows], to_interior[cols]
    keep = (ri >= 0) & (ci >= 0)
    scaffold = (base_local, ri[keep], ci[keep], keep, mesh.interior_count)
    _scaffold_cache[mesh] = scaffold
    return scaffold


def _metric_solve(prob: Problem, u: np.ndarray):
    """Factor the phi-weighted interior stiffness operator at the iterate.

    The weight phi(|grad u|) per element linearizes the principal part,
    so the preconditioned direction stays well scaled for operators far
    from the Laplacian; for phi = 1 this is the plain stiffness matrix.
    """
    mesh = prob.mesh
    base_local, ri, ci, keep, n_int = _assembly_scaffold(mesh)
    g = dm.element_gradients(mesh, u)
    w = np.asarray(prob.model.phi(np.maximum(g, prob.eps)), dtype=float)
    data = (base_local * w[:, None, None]).ravel()[keep]
    K = sp.coo_matrix((data, (ri, ci)), shape=(n_int, n_int)).tocsc()
    return splu(K).solve


def _project(prob: Problem, values: np.ndarray, branch: str, where: str):
    """Rescale a nonzero nonnegative field onto the requested branch root."""
    ray = ray_data(prob, dm.make_field(prob.mesh, values))
    roots = nehari_roots_ray(ray, prob.lam)
    if roots.kind == "no_roots":
        raise ProjectionError(
            f"{where}: lambda = {prob.lam:g} exceeds the ray peak "
            f"{roots.lambda_n:g}; no Nehari rescaling exists"
        )
    if roots.kind == "degenerate":
        t = roots.t_n
    else:
        t = roots.t_plus if branch == BRANCH_PLUS else roots.t_minus
    return t * values


def _check_guard(prob: Problem, opts: SolveOptions):
    hint = opts.lambda_star_hint
    if hint is not None and prob.lam > LAMBDA_GUARD_FACTOR * hint and not opts.force:
        raise ConfigError(
            f"lambda = {prob.lam:g} lies above {LAMBDA_GUARD_FACTOR:g} x the "
            f"extremal estimate {hint:g}; pass force to try anyway"
        )


def _solve_branch(prob: Problem, init, opts: SolveOptions, branch: str) -> SolveReport:
    if not prob.lam > 0.0:
        raise ValueError(f"branch solves need lambda > 0, got {prob.lam}")
    _check_guard(prob, opts)
    mesh = prob.mesh
    interior = mesh.interior_indices

    u = np.abs(dm.nodal_array(mesh, init).copy())
    u[mesh.boundary_mask] = 0.0
    if not np.any(u):
        raise ValueError("initial field is identically zero")
    u = _project(prob, u, branch, "initial projection")
    J = energy(prob, u)
    j_trace = [J]
    message = ""
    res = np.inf
    iters = 0

    for iters in range(1, opts.max_iters + 1):
        g = gradient(prob, u)
        d = _metric_solve(prob, u)(g)
        gd = float(np.dot(g, d))
        res = np.sqrt(max(gd, 0.0)) / max(1.0, h1_seminorm(mesh, u))
        if res <= opts.tol:
            iters -= 1
            break

        # rounding allowance: near convergence the certified decrease drops
        # below the evaluation noise of J, which must not stall the search
        noise = 1e-14 * max(1.0, abs(J))
        alpha = 1.0
        accepted = False
        while alpha >= ALPHA_MIN:
            v = u.copy()
            v[interior] -= alpha * d
            np.abs(v, out=v)
            if np.any(v[interior]):
                try:
                    w = _project(prob, v, branch, f"iteration {iters}")
                except (ProjectionError, SearchError):
                    alpha *= 0.5
                    continue
                Jw = energy(prob, w)
                if Jw <= J - opts.armijo * alpha * gd + noise:
                    u, J = w, Jw
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            message = f"line search stalled at iteration {iters}"
            break
        j_trace.append(J)
    else:
        iters = opts.max_iters

    g = gradient(prob, u)
    d = _metric_solve(prob, u)(g)
    res = np.sqrt(max(float(np.dot(g, d)), 0.0)) / max(1.0, h1_seminorm(mesh, u))
    converged = res <= opts.tol
    if not converged and not message:
        message = f"residual {res:.3g} above tolerance {opts.tol:g}"
    field = dm.make_field(mesh, u)
    return SolveReport(
        u=field,
        branch=classify(prob, field),
        J_value=energy(prob, field),
        residual=res,
        second_diag=second_along(prob, field),
        iterations=iters,
        lam=prob.lam,
        converged=converged,
        j_trace=tuple(j_trace),
        message=message,
    )


def solve_plus(prob: Problem, init=None, opts: SolveOptions | None = None) -> SolveReport:
    """Minimize J on the rising-branch (local-minimum) Nehari component."""
    opts = opts or SolveOptions()
    init = dm.bump_field(prob.mesh) if init is None else init
    return _solve_branch(prob, init, opts, BRANCH_PLUS)


def solve_minus(prob: Problem, init=None, opts: SolveOptions | None = None) -> SolveReport:
    """Minimize J on the falling-branch (local-maximum) Nehari component."""
    opts = opts or SolveOptions()
    init = dm.bump_field(prob.mesh) if init is None else init
    return _solve_branch(prob, init, opts, BRANCH_MINUS)


@dataclass(frozen=True)
class ContinuationResult:
    """Final report at the target lambda plus the whole warm-started path."""

    final: SolveReport
    path: tuple[SolveReport, ...]


def continuation_to_lambda_star(
    prob: Problem,
    lambda_star: float,
    k_max: int = 6,
    opts: SolveOptions | None = None,
    init=None,
) -> ContinuationResult:
    """Walk the rising branch along lambda_k = lambda_star (1 - 2^-k).

    Each step warm-starts from the previous solution; the last step solves
    at lambda_star itself, where the two ray roots can collapse and the
    returned branch label may be the degenerate one. A projection failure
    raises with the last lambda that still worked.
    """
    if not lambda_star > 0.0:
        raise ValueError(f"continuation needs lambda_star > 0, got {lambda_star}")
    opts = replace(opts or SolveOptions(), lambda_star_hint=lambda_star)
    lambdas = [lambda_star * (1.0 - 2.0**-k) for k in range(1, k_max + 1)]
    lambdas.append(lambda_star)
    u = dm.bump_field(prob.mesh) if init is None else init
    path: list[SolveReport] = []
    for lam in lambdas:
        step_prob = with_lambda(prob, lam)
        try:
            rep = solve_plus(step_prob, u, opts)
        except (ProjectionError, SearchError) as exc:
            last = f"{path[-1].lam:g}" if path else "none"
            raise ContinuationError(
                f"continuation failed at lambda = {lam:g} "
                f"(last successful lambda: {last}): {exc}"
            ) from exc
        path.append(rep)
        u = rep.u
    return ContinuationResult(final=path[-1], path=tuple(path))


@dataclass(frozen=True)
class SweepRow:
    """One lambda of a sweep: branch energies, size proxies and tags."""

    lam: float
    J_plus: float
    J_minus: float
    norm_plus: float
    norm_minus: float
    sign_tag: str
    status_plus: str
    status_minus: str


def _sign_tag(lam: float, lambda_lower: float, lambda_star: float) -> str:
    if abs(lam - lambda_lower) <= 1e-9 * lambda_lower:
        return "at_lambda_lower"
    if lam < lambda_lower:
        return "below_lambda_lower"
    if lam <= lambda_star:
        return "between"
    return "above_lambda_star"


def default_starts(mesh: dm.Mesh, starts: int, seed: int, index: int = 0):
    """Initial guesses: the sine bump, then seeded nonnegative random fields.

    ``index`` keys the random stream (sweep rows use their grid index) so
    concurrent callers never share draws.
    """
    fields = [dm.bump_field(mesh)]
    for k in range(1, starts):
        rng = np.random.default_rng([seed, index, k])
        fields.append(
            dm.interior_to_field(
                mesh, np.abs(rng.standard_normal(mesh.interior_count))
            )
        )
    return fields


def best_branch_attempt(prob: Problem, inits, opts: SolveOptions, branch: str):
    """Solve from every init; prefer converged on-branch reports, lowest J."""
    expected = N_PLUS if branch == BRANCH_PLUS else N_MINUS
    reports = []
    errors = []
    for init in inits:
        try:
            reports.append(_solve_branch(prob, init, opts, branch))
        except (ProjectionError, SearchError) as exc:
            errors.append(exc)
    on_branch = [r for r in reports if r.converged and r.branch == expected]
    if on_branch:
        best = min(on_branch, key=lambda r: r.J_value)
        return best, "ok"
    degenerate = [r for r in reports if r.converged and r.branch == N_ZERO]
    if degenerate:
        best = min(degenerate, key=lambda r: r.J_value)
        return best, "n_zero"
    converged = [r for r in reports if r.converged]
    if converged:
        best = min(converged, key=lambda r: r.J_value)
        return best, best.branch
    if reports:
        return min(reports, key=lambda r: r.residual), "not_converged"
    return None, "no_roots"


def sweep(
    prob: Problem,
    lambda_grid,
    lambda_lower: float,
    lambda_star: float,
    opts: SolveOptions | None = None,
    threads: int = 1,
) -> list[SweepRow]:
    """Solve both branches over a lambda grid and tag the rows.

    The grid must be strictly increasing, positive and stay below 1.2 x
    the extremal estimate; above the estimate, projection failures and
    degenerate-branch outcomes are recorded in the status columns rather
    than raised. Rows are computed independently (optionally by a thread
    pool) with per-row seeding, so the worker count cannot change any
    value.
    """
    opts = opts or SolveOptions()
    grid = [float(x) for x in lambda_grid]
    if not grid:
        raise ConfigError("sweep needs a non-empty lambda grid")
    if any(not x > 0.0 for x in grid):
        raise ConfigError("sweep lambdas must be positive")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("sweep lambdas must be strictly increasing")
    cap = SWEEP_LAMBDA_CAP * lambda_star * (1.0 + 1e-12)
    if grid[-1] > cap:
        raise ConfigError(
            f"sweep lambda {grid[-1]:g} above cap {cap:g} "
            f"(= {SWEEP_LAMBDA_CAP:g} x lambda_star estimate)"
        )
    row_opts = replace(opts, force=True, lambda_star_hint=lambda_star)
    mesh = prob.mesh

    def row(i: int) -> SweepRow:
        lam = grid[i]
        lam_prob = with_lambda(prob, lam)
        inits = default_starts(mesh, opts.starts, opts.seed, i)
        rep_p, status_p = best_branch_attempt(lam_prob, inits, row_opts, BRANCH_PLUS)
        rep_m, status_m = best_branch_attempt(lam_prob, inits, row_opts, BRANCH_MINUS)
        return SweepRow(
            lam=lam,
            J_plus=rep_p.J_value if rep_p else np.nan,
            J_minus=rep_m.J_value if rep_m else np.nan,
            norm_plus=phi_norm_proxy(lam_prob, rep_p.u) if rep_p else np.nan,
            norm_minus=phi_norm_proxy(lam_prob, rep_m.u) if rep_m else np.nan,
            sign_tag=_sign_tag(lam, lambda_lower, lambda_star),
            status_plus=status_p,
            status_minus=status_m,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(row, range(len(grid))))
    return [row(i) for i in range(len(grid))]
