"""Ray analysis: nonlinear Rayleigh quotients along scaled fields.

Fix a nonzero Dirichlet field u and look along its ray t -> t u. With the
directional scalars evaluated on the scaled field,

    A(t) = int phi(t g) t^2 g^2,   B(t) = int Phi(t g),
    D(t) = int phi'(t g) t^3 g^3,  P = int |u|^p,  Q = int a |u|^q,

two quotients of t govern the whole method:

    rn(t) = (A(t) - t^p P) / (t^q Q)
    re(t) = q (B(t) - t^p P / p) / (t^q Q).

The scaled field t u lies on the Nehari constraint set of the lambda
problem exactly when rn(t) = lambda, and its energy vanishes exactly when
re(t) = lambda. rn rises from 0 to a single interior maximum at t_n and
then falls to -infinity; re peaks later, at t_e > t_n, where the two
quotients cross. Both critical radii are found by bisection on strictly
decreasing residuals:

    t_n:  ((2-q) A(t) + D(t)) / t^p = (p - q) P
    t_e:  (A(t) - q B(t)) / t^p = (p - q) P / p.

For lambda below the peak value rn(t_n), the equation rn(t) = lambda has
exactly two roots t_plus < t_n < t_minus; these are the two candidate
rescalings of u onto the Nehari set, one on the rising branch (local
energy minimum along the ray) and one on the falling branch (local
maximum).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import domain as dm
from .energy import Problem
from .errors import EvaluationError, SearchError
from .nfunction import NFunctionModel

# Branch labels for classify().
N_PLUS = "N_plus"
N_MINUS = "N_minus"
N_ZERO = "N_zero"
OFF_MANIFOLD = "off_manifold"

# Relative width target of all bisections.
BISECT_RTOL = 1e-12
# Initial bracket and expansion cap for the critical-radius searches.
BRACKET_LO, BRACKET_HI = 1e-3, 1e3
BRACKET_LO_MIN, BRACKET_HI_MAX = 1e-9, 1e9
# Second-derivative dead band (relative to Q) separating N_zero.
SECOND_DEAD_BAND = 1e-8
# Relative tie band deciding when lambda sits on the quotient peak.
PEAK_TIE_BAND = 1e-9


@dataclass(frozen=True)
class RayData:
    """Everything the ray analysis needs about one direction.

    The element gradient magnitudes and measures determine A, B, D at any
    scale; P and Q are the direction's own norm integrals. Constructed
    from a problem and field via :func:`ray_data`, or directly in tests
    that want exact synthetic values of (g, P, Q).

    For pure-power densities the three scale functions are exact
    polynomials A(t) = sum_r t^r K_r with K_r = int g^r, so ray_data
    precomputes the K_r and the searches below run on scalars instead of
    element arrays. Other families evaluate the density on the scaled
    gradient magnitudes each time.
    """

    model: NFunctionModel
    q: float
    p: float
    eps: float
    g: np.ndarray
    meas: np.ndarray
    P: float
    Q: float
    power_terms: tuple[tuple[float, float], ...] | None = None

    def A(self, t: float) -> float:
        if self.power_terms is not None:
            return sum(K * t**r for r, K in self.power_terms)
        tg = t * self.g
        return float(
            np.dot(self.meas, np.asarray(self.model.phi(np.maximum(tg, self.eps)),
                                         dtype=float) * tg**2)
        )

    def B(self, t: float) -> float:
        if self.power_terms is not None:
            return sum(K * t**r / r for r, K in self.power_terms)
        tg = t * self.g
        return float(np.dot(self.meas, np.asarray(self.model.Phi(tg), dtype=float)))

    def D(self, t: float) -> float:
        if self.power_terms is not None:
            return sum((r - 2.0) * K * t**r for r, K in self.power_terms)
        tg = t * self.g
        return float(
            np.dot(self.meas, np.asarray(self.model.dphi(np.maximum(tg, self.eps)),
                                         dtype=float) * tg**3)
        )


def ray_data(prob: Problem, u) -> RayData:
    """Extract the ray profile of a nonzero field."""
    values = dm.nodal_array(prob.mesh, u)
    g = dm.element_gradients(prob.mesh, values)
    P = dm.lp_norm_pow(prob.mesh, values, prob.p)
    Q = dm.lp_norm_pow(prob.mesh, values, prob.q, prob.weight)
    if Q <= 0.0:
        raise EvaluationError("degenerate direction: weighted q-norm is zero")
    meas = prob.mesh.element_measure
    if prob.model.name in ("power", "double_power"):
        terms = tuple(
            (r, float(np.dot(meas, g**r))) for r in prob.model.params
        )
    else:
        terms = None
    return RayData(prob.model, prob.q, prob.p, prob.eps, g, meas, P, Q, terms)


def _check_t(t: float) -> float:
    t = float(t)
    if not (np.isfinite(t) and t > 0.0):
        raise ValueError(f"ray parameter t must be finite and positive, got {t}")
    return t


def rn_ray(ray: RayData, t: float) -> float:
    """Nehari-constraint quotient at scale t."""
    t = _check_t(t)
    return (ray.A(t) - t**ray.p * ray.P) / (t**ray.q * ray.Q)


def re_ray(ray: RayData, t: float) -> float:
    """Zero-energy quotient at scale t."""
    t = _check_t(t)
    return ray.q * (ray.B(t) - t**ray.p * ray.P / ray.p) / (t**ray.q * ray.Q)


def rn_prime_ray(ray: RayData, t: float) -> float:
    """Exact derivative of rn along the ray."""
    t = _check_t(t)
    return ((2.0 - ray.q) * ray.A(t) + ray.D(t) - (ray.p - ray.q) * t**ray.p * ray.P) / (
        t ** (ray.q + 1.0) * ray.Q
    )


def re_prime_ray(ray: RayData, t: float) -> float:
    """Exact derivative of re along the ray."""
    t = _check_t(t)
    return (
        ray.q
        * (ray.A(t) - ray.q * ray.B(t) - (ray.p - ray.q) * t**ray.p * ray.P / ray.p)
        / (t ** (ray.q + 1.0) * ray.Q)
    )


def gamma_ray(ray: RayData, t: float, lam: float) -> float:
    """Fibering map value J(t u) for the lambda problem."""
    t = _check_t(t)
    return ray.B(t) - (lam / ray.q) * t**ray.q * ray.Q - t**ray.p * ray.P / ray.p


def rn(prob: Problem, u, t: float) -> float:
    return rn_ray(ray_data(prob, u), t)


def re(prob: Problem, u, t: float) -> float:
    return re_ray(ray_data(prob, u), t)


def _bisect_root(f, lo: float, hi: float, f_lo: float) -> float:
    """Bisection for a sign change on [lo, hi]; f_lo fixes the orientation."""
    increasing_from_negative = f_lo < 0.0
    while hi - lo > BISECT_RTOL * hi:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        goes_low = (fm < 0.0) if increasing_from_negative else (fm > 0.0)
        if goes_low:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _solve_decreasing_residual(f, what: str) -> float:
    """Root of a strictly decreasing residual with geometric bracket expansion."""
    lo, hi = BRACKET_LO, BRACKET_HI
    f_lo, f_hi = f(lo), f(hi)
    while f_lo <= 0.0 and lo > BRACKET_LO_MIN:
        lo /= 10.0
        f_lo = f(lo)
    while f_hi >= 0.0 and hi < BRACKET_HI_MAX:
        hi *= 10.0
        f_hi = f(hi)
    if f_lo <= 0.0 or f_hi >= 0.0:
        raise SearchError(
            f"could not bracket {what}: residual is {f_lo:.3g} at t={lo:g} "
            f"and {f_hi:.3g} at t={hi:g}"
        )
    # residual decreases: positive at lo, negative at hi
    return _bisect_root(f, lo, hi, f_lo)


def find_tn(prob: Problem, u) -> float:
    """Scale of the rn peak along the ray of u."""
    return find_tn_ray(ray_data(prob, u))


def find_tn_ray(ray: RayData) -> float:
    target = (ray.p - ray.q) * ray.P

    def residual(t):
        return ((2.0 - ray.q) * ray.A(t) + ray.D(t)) / t**ray.p - target

    return _solve_decreasing_residual(residual, "the rn peak")


def find_te(prob: Problem, u) -> float:
    """Scale of the re peak along the ray of u."""
    return find_te_ray(ray_data(prob, u))


def find_te_ray(ray: RayData) -> float:
    target = (ray.p - ray.q) * ray.P / ray.p

    def residual(t):
        return (ray.A(t) - ray.q * ray.B(t)) / t**ray.p - target

    return _solve_decreasing_residual(residual, "the re peak")


@dataclass(frozen=True)
class NehariRoots:
    """Outcome of solving rn(t) = lambda along one ray.

    ``kind`` is "two_roots" (t_plus < t_n < t_minus), "degenerate"
    (lambda sits on the peak within the tie band; both roots collapse to
    t_n) or "no_roots" (lambda above the peak).
    """

    kind: str
    t_plus: float | None
    t_minus: float | None
    t_n: float
    lambda_n: float


def nehari_roots(
    prob: Problem, u, lam: float | None = None, tie_band: float = PEAK_TIE_BAND
) -> NehariRoots:
    return nehari_roots_ray(ray_data(prob, u),
                            prob.lam if lam is None else float(lam), tie_band)


def nehari_roots_ray(
    ray: RayData, lam: float, tie_band: float = PEAK_TIE_BAND
) -> NehariRoots:
    if not lam > 0.0:
        raise ValueError(f"root search needs lambda > 0, got {lam}")
    t_n = find_tn_ray(ray)
    peak = rn_ray(ray, t_n)
    if abs(lam - peak) <= tie_band * max(1.0, abs(peak)):
        return NehariRoots("degenerate", t_n, t_n, t_n, peak)
    if lam > peak:
        return NehariRoots("no_roots", None, None, t_n, peak)

    def shifted(t):
        return rn_ray(ray, t) - lam

    # rising branch: expand below t_n until the quotient drops under lambda
    lo = t_n / 10.0
    for _ in range(40):
        if shifted(lo) < 0.0:
            break
        lo /= 10.0
    else:
        raise SearchError(
            f"no bracket for the rising-branch root below t_n = {t_n:g}"
        )
    t_plus = _bisect_root(shifted, lo, t_n, shifted(lo))

    # falling branch: expand above t_n until the quotient drops under lambda
    hi = t_n * 10.0
    for _ in range(40):
        if shifted(hi) < 0.0:
            break
        hi *= 10.0
    else:
        raise SearchError(
            f"no bracket for the falling-branch root above t_n = {t_n:g}"
        )
    t_minus = _bisect_root(lambda t: -shifted(t), t_n, hi, -shifted(t_n))
    return NehariRoots("two_roots", t_plus, t_minus, t_n, peak)


def classify(prob: Problem, u, tol: float = 1e-8) -> str:
    """Branch label of a field relative to the Nehari set of prob.lam.

    A field is on the constraint set when A - lambda Q - P vanishes to a
    relative tolerance ``tol``; membership failures return "off_manifold".
    On the set, the sign of the second derivative along the ray splits
    N_plus from N_minus, with a dead band of 1e-8 Q around zero labeled
    N_zero.
    """
    from .energy import breakdown, second_along  # local import avoids a cycle

    b = breakdown(prob, u)
    if b.Q <= 0.0:
        raise EvaluationError("degenerate direction: weighted q-norm is zero")
    residual = b.A - prob.lam * b.Q - b.P
    scale = max(b.A, prob.lam * b.Q, b.P)
    if abs(residual) > tol * scale:
        return OFF_MANIFOLD
    second = (
        b.A + b.D - prob.lam * (prob.q - 1.0) * b.Q - (prob.p - 1.0) * b.P
    )
    if abs(second) <= SECOND_DEAD_BAND * b.Q:
        return N_ZERO
    return N_PLUS if second > 0.0 else N_MINUS


@dataclass(frozen=True)
class RayAnalysis:
    """Summary of one direction: critical radii, peak values, optional roots."""

    t_n: float
    t_e: float
    Lambda_n: float
    Lambda_e: float
    roots: NehariRoots | None
    lambda_used: float | None


def analyze_ray(prob: Problem, u, lam: float | None = None) -> RayAnalysis:
    """Critical radii and peak quotient values of a direction.

    When ``lam`` is given (or the problem carries a positive lambda), the
    Nehari rescaling roots for that lambda are included.
    """
    ray = ray_data(prob, u)
    t_n = find_tn_ray(ray)
    t_e = find_te_ray(ray)
    if lam is None and prob.lam > 0.0:
        lam = prob.lam
    roots = None if lam is None else nehari_roots_ray(ray, lam)
    return RayAnalysis(t_n, t_e, rn_ray(ray, t_n), re_ray(ray, t_e), roots, lam)


def trace(prob: Problem, u, ts, lam: float | None = None) -> np.ndarray:
    """Sample (t, rn, re, gamma) along the ray; rows follow ``ts``."""
    ray = ray_data(prob, u)
    lam = prob.lam if lam is None else float(lam)
    rows = np.empty((len(ts), 4))
    for i, t in enumerate(ts):
        rows[i] = (t, rn_ray(ray, t), re_ray(ray, t), gamma_ray(ray, t, lam))
    return rows
