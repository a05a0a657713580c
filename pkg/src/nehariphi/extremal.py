"""Extremal parameter estimation by direction search.

Each nonzero direction u carries two peak quotient values along its ray,

    Lambda_n(u) = rn at the rn peak,    Lambda_e(u) = re at the re peak,

both invariant under rescaling of u. The two extremal parameters of the
problem are the infima of these values over all directions: lambda_star
(the larger, from Lambda_n) bounds the range of lambda with a two-branch
Nehari splitting, and lambda_lower (from Lambda_e) marks where the
falling-branch energy changes sign.

The estimator is a seeded derivative-free coordinate search on the unit
sphere of interior vectors: from a sine-bump start plus seeded random
starts (alternating sign-definite and sign-changing), one coordinate at a
time is perturbed by +/- step, the vector renormalized, and the move kept
when the objective improves; the step halves after a full sweep without
improvement. The search stops when the step drops below 1e-6 or an
iteration budget is exhausted. Coordinates are taken in an orthonormal
basis of sine modes ordered by frequency rather than in the nodal basis:
the minimizing directions are smooth, so low-mode moves capture most of
the descent and the iteration count needed for a given accuracy stops
growing with mesh size. Results are deterministic given the seed.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from . import domain as dm
from .energy import Problem
from .errors import EstimationError, NehariError
from .fibering import (
    RayData,
    find_te_ray,
    find_tn_ray,
    ray_data,
    re_ray,
    rn_ray,
)

STEP_MIN = 1e-6

_basis_cache: "weakref.WeakKeyDictionary[dm.Mesh, np.ndarray]" = (
    weakref.WeakKeyDictionary()
)


def search_basis(mesh: dm.Mesh) -> np.ndarray:
    """Orthonormal sine-mode basis of the interior, columns by frequency.

    Discrete sine vectors are exactly orthogonal on a uniform grid, so the
    unit sphere of coefficient vectors maps onto the unit sphere of nodal
    vectors.
    """
    cached = _basis_cache.get(mesh)
    if cached is not None:
        return cached
    if mesh.dim == 1:
        n = mesh.subdivisions[0]
        i = np.arange(1, n)
        S = np.sin(np.pi * np.outer(i, np.arange(1, n)) / n)
        S /= np.linalg.norm(S, axis=0)
    else:
        nx, ny = mesh.subdivisions
        modes = sorted(
            ((kx / nx) ** 2 + (ky / ny) ** 2, kx, ky)
            for kx in range(1, nx)
            for ky in range(1, ny)
        )
        ix = np.arange(1, nx)
        iy = np.arange(1, ny)
        cols = []
        for _, kx, ky in modes:
            col = np.outer(
                np.sin(np.pi * kx * ix / nx), np.sin(np.pi * ky * iy / ny)
            ).ravel()
            cols.append(col / np.linalg.norm(col))
        S = np.column_stack(cols)
    S.flags.writeable = False
    _basis_cache[mesh] = S
    return S


@dataclass(frozen=True)
class EstimateOptions:
    """Budget and seeding of the direction search."""

    starts: int = 4
    max_iters: int = 2000
    step: float = 0.3
    seed: int = 0


@dataclass(frozen=True)
class ExtremalEstimate:
    """Estimated extremal parameters; each op fills its own side.

    ``trace`` is the running best objective value per iteration (non-
    increasing by construction) and ``scaled_norms`` the matching size
    proxies of the critically rescaled best direction, bounded away from
    zero for healthy runs.
    """

    lambda_star: float | None = None
    lambda_lower: float | None = None
    minimizer_n: dm.Field | None = None
    minimizer_e: dm.Field | None = None
    starts: int = 0
    iters: int = 0
    trace: tuple[float, ...] = ()
    scaled_norms: tuple[float, ...] = ()


def lambda_n_of(prob: Problem, u) -> float:
    """Peak Nehari-quotient value of one direction."""
    ray = ray_data(prob, u)
    return rn_ray(ray, find_tn_ray(ray))


def lambda_e_of(prob: Problem, u) -> float:
    """Peak zero-energy-quotient value of one direction."""
    ray = ray_data(prob, u)
    return re_ray(ray, find_te_ray(ray))


def _objective_n(ray: RayData, ell: float):
    t = find_tn_ray(ray)
    # size proxy of the rescaled direction: (int Phi(|grad t u|))^(1/ell)
    return rn_ray(ray, t), ray.B(t) ** (1.0 / ell)


def _objective_e(ray: RayData, ell: float):
    t = find_te_ray(ray)
    return re_ray(ray, t), ray.B(t) ** (1.0 / ell)


def _starts(prob: Problem, opts: EstimateOptions, rng: np.random.Generator,
            basis: np.ndarray):
    """Deterministic sequence of unit-norm coefficient start vectors."""
    mesh = prob.mesh
    bump = dm.bump_field(mesh).values[mesh.interior_indices]
    c = basis.T @ bump
    yield c / np.linalg.norm(c)
    for k in range(1, opts.starts):
        x = rng.standard_normal(mesh.interior_count)
        if k % 2 == 1:
            x = np.abs(x)  # sign-definite start field
        n = np.linalg.norm(x)
        while n == 0.0:  # essentially impossible, but keep determinism
            x = rng.standard_normal(mesh.interior_count)
            n = np.linalg.norm(x)
        yield basis.T @ (x / n)


def _coordinate_search(objective, x0, opts: EstimateOptions,
                       rng: np.random.Generator):
    """Greedy +/- coordinate moves on the unit sphere with shrinking step."""
    x = x0
    best, aux = objective(x)
    trace = [best]
    norms = [aux]
    sigma = opts.step
    dim = x.size
    order = rng.permutation(dim)
    pos = 0
    improved = False
    iters = 0
    while iters < opts.max_iters and sigma >= STEP_MIN:
        if pos == dim:
            if not improved:
                sigma *= 0.5
            order = rng.permutation(dim)
            pos = 0
            improved = False
        j = order[pos]
        pos += 1
        iters += 1
        candidate = None
        for s in (sigma, -sigma):
            xc = x.copy()
            xc[j] += s
            nrm = np.linalg.norm(xc)
            if nrm == 0.0:
                continue
            xc /= nrm
            try:
                v, a = objective(xc)
            except NehariError:
                continue
            if candidate is None or v < candidate[0]:
                candidate = (v, a, xc)
        if candidate is not None and candidate[0] < best:
            best, aux, x = candidate
            improved = True
        trace.append(best)
        norms.append(aux)
    return best, aux, x, trace, norms, iters


def _estimate(prob: Problem, opts: EstimateOptions | None, objective_of):
    opts = opts or EstimateOptions()
    rng = np.random.default_rng(opts.seed)
    mesh = prob.mesh
    ell = prob.ell
    basis = search_basis(mesh)

    def objective(c):
        field = dm.interior_to_field(mesh, basis @ c)
        return objective_of(ray_data(prob, field), ell)

    results = []
    failures = []
    for c0 in _starts(prob, opts, rng, basis):
        try:
            results.append(_coordinate_search(objective, c0, opts, rng))
        except NehariError as exc:
            failures.append(exc)
    if not results:
        raise EstimationError(
            f"all {opts.starts} starts failed ray analysis: {failures[:1]}"
        )
    # merge per-start traces into one running global best, in start order
    trace: list[float] = []
    norms: list[float] = []
    best = None
    best_aux = None
    for _, _, _, tr, nm, _ in results:
        for v, a in zip(tr, nm):
            if best is None or v < best:
                best, best_aux = v, a
            trace.append(best)
            norms.append(best_aux)
    winner = min(results, key=lambda r: r[0])
    total_iters = sum(r[5] for r in results)
    field = dm.interior_to_field(mesh, basis @ winner[2])
    return winner[0], field, opts.starts, total_iters, tuple(trace), tuple(norms)


def estimate_lambda_star(
    prob: Problem, opts: EstimateOptions | None = None
) -> ExtremalEstimate:
    """Minimize Lambda_n over directions; upper estimate of lambda_star."""
    val, field, starts, iters, trace, norms = _estimate(prob, opts, _objective_n)
    return ExtremalEstimate(
        lambda_star=val,
        minimizer_n=field,
        starts=starts,
        iters=iters,
        trace=trace,
        scaled_norms=norms,
    )


def estimate_lambda_lower(
    prob: Problem, opts: EstimateOptions | None = None
) -> ExtremalEstimate:
    """Minimize Lambda_e over directions; upper estimate of lambda_lower."""
    val, field, starts, iters, trace, norms = _estimate(prob, opts, _objective_e)
    return ExtremalEstimate(
        lambda_lower=val,
        minimizer_e=field,
        starts=starts,
        iters=iters,
        trace=trace,
        scaled_norms=norms,
    )


def estimate_extremal(
    prob: Problem, opts: EstimateOptions | None = None
) -> ExtremalEstimate:
    """Estimate both extremal parameters with the same options and seed."""
    star = estimate_lambda_star(prob, opts)
    lower = estimate_lambda_lower(prob, opts)
    return ExtremalEstimate(
        lambda_star=star.lambda_star,
        lambda_lower=lower.lambda_lower,
        minimizer_n=star.minimizer_n,
        minimizer_e=lower.minimizer_e,
        starts=star.starts,
        iters=star.iters + lower.iters,
        trace=star.trace,
        scaled_norms=star.scaled_norms,
    )
