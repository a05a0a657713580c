"""Generalized N-function models and structural hypothesis checks.

The diffusion law of the problems treated here is driven by a density
``phi : (0, inf) -> (0, inf)`` with primitive ``Phi(t) = int_0^t s phi(s) ds``.
This module bundles the three evaluations (Phi, phi, dphi) into a model
object, knows the growth indices

    ell - 2 = inf_t phi'(t) t / phi(t),    m - 2 = sup_t phi'(t) t / phi(t),

and validates the structural hypotheses that the variational machinery in
the rest of the package relies on: monotone coercivity of ``t phi(t)``,
finite index range, convexity of ``p Phi(t) - phi(t) t^2``, the exponent
window ``1 < q < ell <= m < p < ell*``, and the strict decrease of
``((2-q) phi(t) + phi'(t) t) / t^(p-2)``.

Built-in families:

* ``power(r)``: ``phi(t) = t^(r-2)``, the classical r-Laplacian density.
* ``double_power(r1, r2)``: ``phi(t) = t^(r1-2) + t^(r2-2)``.
* ``log_type()``: ``phi(t) = log(1 + t)``, with indices ell = 2, m = 3.
* ``custom(...)``: user-supplied callables; the primitive falls back to
  adaptive quadrature and the indices to grid sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import ConfigError, EvaluationError

# Verdict labels used by HypothesisReport.
PASS = "pass"
FAIL = "fail"
NOT_APPLICABLE = "not-applicable"

# Hypothesis identifiers, in report order.
HYPOTHESIS_IDS = ("phi1", "phi2", "phi3", "phi4", "phi5", "H1", "H2", "H3", "H4")

# Relative slack for strict-monotonicity grid checks.
MONOTONE_SLACK = 1e-12
# Relative slack for the convexity (second-difference) check.
CONVEXITY_SLACK = 1e-9
# Relative slack for sandwich-inequality checks.
SANDWICH_SLACK = 1e-9

_GRID_LO = 1e-6
_GRID_HI = 1e6
_GRID_POINTS = 200


def default_grid() -> np.ndarray:
    """The standard sampling grid: 200 log-spaced points on [1e-6, 1e6]."""
    return np.logspace(math.log10(_GRID_LO), math.log10(_GRID_HI), _GRID_POINTS)


@dataclass(frozen=True)
class NFunctionModel:
    """An N-function given by its density, density derivative and primitive.

    Attributes
    ----------
    name : str
        Family tag ("power", "double_power", "log_type", or a custom name).
    phi, dphi, Phi : callable
        Vectorized evaluations of the density, its derivative and the
        primitive. All accept positive floats or arrays of them; ``Phi``
        also accepts 0 and returns 0 there.
    ell, m_idx : float or None
        Exact growth indices when the family provides closed forms;
        ``None`` for custom models without declared indices (then
        :func:`compute_indices` samples them from a grid).
    params : tuple
        Family parameters, kept for reporting.
    """

    name: str
    phi: Callable[[np.ndarray], np.ndarray]
    dphi: Callable[[np.ndarray], np.ndarray]
    Phi: Callable[[np.ndarray], np.ndarray]
    ell: float | None = None
    m_idx: float | None = None
    params: tuple = ()

    def __repr__(self) -> str:  # params carry the family, callables do not print well
        ps = ", ".join(f"{p:g}" for p in self.params)
        return f"NFunctionModel({self.name}({ps}))"


class PhiValues(NamedTuple):
    """Point evaluation of a model; phi and dphi are None at t = 0."""

    Phi: float
    phi: float | None
    dphi: float | None


def power(r: float) -> NFunctionModel:
    """r-Laplacian density phi(t) = t^(r-2); requires r > 1."""
    if not (np.isfinite(r) and r > 1.0):
        raise ConfigError(f"power family needs exponent r > 1, got r = {r}")
    r = float(r)

    def phi(t):
        return np.asarray(t, dtype=float) ** (r - 2.0)

    def dphi(t):
        t = np.asarray(t, dtype=float)
        if r == 2.0:
            return np.zeros_like(t)
        return (r - 2.0) * t ** (r - 3.0)

    def Phi(t):
        return np.asarray(t, dtype=float) ** r / r

    return NFunctionModel("power", phi, dphi, Phi, ell=r, m_idx=r, params=(r,))


def double_power(r1: float, r2: float) -> NFunctionModel:
    """Two-exponent density phi(t) = t^(r1-2) + t^(r2-2) with r1 <= r2."""
    if not (np.isfinite(r1) and np.isfinite(r2) and 1.0 < r1 <= r2):
        raise ConfigError(
            f"double_power family needs 1 < r1 <= r2, got r1 = {r1}, r2 = {r2}"
        )
    r1, r2 = float(r1), float(r2)

    def phi(t):
        t = np.asarray(t, dtype=float)
        return t ** (r1 - 2.0) + t ** (r2 - 2.0)

    def dphi(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        if r1 != 2.0:
            out = out + (r1 - 2.0) * t ** (r1 - 3.0)
        if r2 != 2.0:
            out = out + (r2 - 2.0) * t ** (r2 - 3.0)
        return out

    def Phi(t):
        t = np.asarray(t, dtype=float)
        return t**r1 / r1 + t**r2 / r2

    return NFunctionModel(
        "double_power", phi, dphi, Phi, ell=r1, m_idx=r2, params=(r1, r2)
    )


# Below this threshold the closed form for the log-type primitive cancels
# catastrophically (the exact value is ~t^3/3 assembled from O(t) terms),
# so a power series is used instead.
_LOG_SERIES_CUTOFF = 0.5
_LOG_SERIES_TERMS = 60


def _log_Phi_series(t: np.ndarray) -> np.ndarray:
    # Phi(t) = sum_{k>=1} (-1)^(k+1) t^(k+2) / (k (k+2)), |t| < 1.
    acc = np.zeros_like(t)
    term = t**3
    for k in range(1, _LOG_SERIES_TERMS + 1):
        acc = acc + ((-1.0) ** (k + 1)) * term / (k * (k + 2))
        term = term * t
    return acc


def log_type() -> NFunctionModel:
    """Logarithmic density phi(t) = log(1 + t); indices ell = 2, m = 3."""

    def phi(t):
        return np.log1p(np.asarray(t, dtype=float))

    def dphi(t):
        return 1.0 / (1.0 + np.asarray(t, dtype=float))

    def Phi(t):
        t = np.asarray(t, dtype=float)
        small = t < _LOG_SERIES_CUTOFF
        out = np.empty_like(t)
        if np.any(small):
            out[small] = _log_Phi_series(t[small])
        if np.any(~small):
            tb = t[~small]
            lg = np.log1p(tb)
            out[~small] = 0.5 * tb**2 * lg - 0.25 * tb**2 + 0.5 * tb - 0.5 * lg
        return out

    return NFunctionModel("log_type", phi, dphi, Phi, ell=2.0, m_idx=3.0)


def custom(
    phi: Callable,
    dphi: Callable,
    Phi: Callable | None = None,
    ell: float | None = None,
    m_idx: float | None = None,
    name: str = "custom",
) -> NFunctionModel:
    """Wrap user-supplied density callables into a model.

    If ``Phi`` is omitted it is computed by adaptive quadrature of
    ``s phi(s)`` with relative tolerance 1e-10. If the indices are omitted
    they are sampled from a grid by :func:`compute_indices`.
    """
    if Phi is None:
        def _Phi_scalar(t: float) -> float:
            t = float(t)
            if t == 0.0:
                return 0.0
            val, _ = quad(
                lambda s: s * phi(s), 0.0, t, epsabs=0.0, epsrel=1e-10, limit=200
            )
            return val

        Phi = np.vectorize(_Phi_scalar, otypes=[float])
    return NFunctionModel(name, phi, dphi, Phi, ell=ell, m_idx=m_idx)


def evaluate(model: NFunctionModel, t: float) -> PhiValues:
    """Evaluate (Phi, phi, dphi) at a single t >= 0.

    At t = 0 only the primitive is defined; phi and dphi come back as None.
    Raises EvaluationError if any requested value is non-finite.
    """
    t = float(t)
    if t < 0.0:
        raise ValueError(f"N-function evaluation needs t >= 0, got t = {t}")
    if t == 0.0:
        return PhiValues(0.0, None, None)
    vals = PhiValues(
        float(model.Phi(t)), float(model.phi(t)), float(model.dphi(t))
    )
    if not all(np.isfinite(v) for v in vals):
        raise EvaluationError(f"non-finite N-function value at t = {t}: {vals}")
    return vals


def _check_sampling_grid(grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < _GRID_POINTS:
        raise ConfigError(
            f"index sampling grid needs at least {_GRID_POINTS} points, got {grid.size}"
        )
    if grid[0] > _GRID_LO or grid[-1] < _GRID_HI:
        raise ConfigError(
            f"index sampling grid must span [{_GRID_LO:g}, {_GRID_HI:g}], "
            f"got [{grid[0]:g}, {grid[-1]:g}]"
        )
    return grid


def compute_indices(
    model: NFunctionModel, grid: np.ndarray | None = None
) -> tuple[float, float]:
    """Growth indices (ell, m) of the model.

    Built-in families return their exact closed-form indices; sampling a
    finite grid would miss limits attained only at 0 or infinity (the
    log-type ratio spans (0, 1) without touching either end). Custom models
    without declared indices are sampled on ``grid``.
    """
    if model.ell is not None and model.m_idx is not None:
        return float(model.ell), float(model.m_idx)
    grid = default_grid() if grid is None else _check_sampling_grid(grid)
    ratio = _index_ratio(model, grid)
    return 2.0 + float(np.min(ratio)), 2.0 + float(np.max(ratio))


def _index_ratio(model: NFunctionModel, grid: np.ndarray) -> np.ndarray:
    phi_v = np.asarray(model.phi(grid), dtype=float)
    dphi_v = np.asarray(model.dphi(grid), dtype=float)
    bad = ~(np.isfinite(phi_v) & np.isfinite(dphi_v)) | (phi_v <= 0.0)
    if np.any(bad):
        t_bad = grid[bad][0]
        raise EvaluationError(
            f"density not finite and positive at t = {t_bad:g}; cannot form indices"
        )
    return dphi_v * grid / phi_v


@dataclass(frozen=True)
class HypothesisCheck:
    """Verdict for one structural hypothesis, with a witness on failure."""

    id: str
    verdict: str
    witness: str | None = None


@dataclass(frozen=True)
class HypothesisReport:
    """Fixed-order collection of the nine hypothesis verdicts."""

    checks: tuple[HypothesisCheck, ...]

    def __post_init__(self):
        ids = tuple(c.id for c in self.checks)
        if ids != HYPOTHESIS_IDS:
            raise ValueError(f"report must contain exactly {HYPOTHESIS_IDS}, got {ids}")

    def __getitem__(self, check_id: str) -> HypothesisCheck:
        for c in self.checks:
            if c.id == check_id:
                return c
        raise KeyError(check_id)

    def verdict(self, check_id: str) -> str:
        return self[check_id].verdict

    def failures(self) -> list[HypothesisCheck]:
        return [c for c in self.checks if c.verdict == FAIL]

    def all_pass(self) -> bool:
        """True when no hypothesis failed (not-applicable entries do not count)."""
        return not self.failures()

    def table(self) -> str:
        lines = [f"{'hypothesis':<12} {'verdict':<16} witness"]
        for c in self.checks:
            lines.append(f"{c.id:<12} {c.verdict:<16} {c.witness or ''}".rstrip())
        return "\n".join(lines)


def _strict_monotone_violation(
    t: np.ndarray, y: np.ndarray, direction: str, slack: float = MONOTONE_SLACK
) -> int | None:
    """Index of the first grid cell violating strict increase or decrease.

    Strictness is relative: the step must beat ``slack`` times the local
    magnitude, so tiny absolute wiggles near 0 do not flip the verdict.
    """
    d = np.diff(y)
    scale = np.maximum(np.abs(y[:-1]), np.abs(y[1:]))
    if direction == "increasing":
        bad = d <= slack * scale
    else:
        bad = d >= -slack * scale
    idx = np.flatnonzero(bad)
    return int(idx[0]) if idx.size else None


def validate_hypotheses(
    model: NFunctionModel,
    q: float,
    p: float,
    N: int,
    grid: np.ndarray | None = None,
) -> HypothesisReport:
    """Check the structural hypotheses for exponents (q, p) in dimension N.

    Returns one verdict per hypothesis in a fixed order. The compact
    embedding condition (phi3) is a continuum statement with no discrete
    counterpart here and reports not-applicable; positivity of the weight
    (H2) needs the weight itself and is enforced when a Problem is built.
    """
    q, p = float(q), float(p)
    if N not in (1, 2):
        raise ValueError(f"dimension N must be 1 or 2, got {N}")
    if not (np.isfinite(q) and np.isfinite(p) and q > 0 and p > 0):
        raise ValueError(f"exponents must be finite and positive, got q={q}, p={p}")
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)

    phi_v = np.asarray(model.phi(grid), dtype=float)
    dphi_v = np.asarray(model.dphi(grid), dtype=float)
    Phi_v = np.asarray(model.Phi(grid), dtype=float)
    checks: list[HypothesisCheck] = []

    finite = np.isfinite(phi_v) & np.isfinite(dphi_v) & np.isfinite(Phi_v)
    if not np.all(finite):
        t_bad = grid[~finite][0]
        raise EvaluationError(f"non-finite density values at t = {t_bad:g}")

    # phi1: t phi(t) vanishes at 0 and blows up at infinity. Compare the
    # endpoint samples against the mid-grid value with a factor of 1e3.
    y = grid * phi_v
    y_mid = y[len(y) // 2]
    if y[0] <= 1e-3 * y_mid and y[-1] >= 1e3 * y_mid:
        checks.append(HypothesisCheck("phi1", PASS))
    else:
        checks.append(
            HypothesisCheck(
                "phi1",
                FAIL,
                f"t*phi(t) endpoints {y[0]:.3g} at t={grid[0]:g}, "
                f"{y[-1]:.3g} at t={grid[-1]:g} (mid {y_mid:.3g})",
            )
        )

    # phi2: t phi(t) strictly increasing.
    i = _strict_monotone_violation(grid, y, "increasing")
    if i is None:
        checks.append(HypothesisCheck("phi2", PASS))
    else:
        checks.append(
            HypothesisCheck(
                "phi2",
                FAIL,
                f"t*phi(t) fails to increase between t={grid[i]:g} and t={grid[i+1]:g}",
            )
        )

    checks.append(
        HypothesisCheck(
            "phi3",
            NOT_APPLICABLE,
            "compact-embedding integral condition; no discrete counterpart",
        )
    )

    # phi4: finite index range with lower index above 1.
    try:
        ell, m_idx = compute_indices(model, None if model.ell is not None else grid)
        ratio = _index_ratio(model, grid)
    except EvaluationError as exc:
        checks.append(HypothesisCheck("phi4", FAIL, str(exc)))
        ell = m_idx = None
    else:
        if ell > 1.0 and np.isfinite(m_idx) and ell <= m_idx:
            checks.append(HypothesisCheck("phi4", PASS))
        else:
            checks.append(
                HypothesisCheck("phi4", FAIL, f"indices ell={ell:g}, m={m_idx:g}")
            )
        # consistency of sampled ratios with the declared index window
        lo, hi = float(np.min(ratio)), float(np.max(ratio))
        if lo < ell - 2.0 - 1e-9 * max(1.0, abs(ell)) or hi > m_idx - 2.0 + 1e-9 * max(
            1.0, abs(m_idx)
        ):
            checks[-1] = HypothesisCheck(
                "phi4",
                FAIL,
                f"sampled ratio range [{lo:g}, {hi:g}] escapes "
                f"[{ell - 2:g}, {m_idx - 2:g}]",
            )

    # phi5: convexity of S(t) = p Phi(t) - phi(t) t^2 via nondecreasing slopes.
    S = p * Phi_v - phi_v * grid**2
    slopes = np.diff(S) / np.diff(grid)
    ds = np.diff(slopes)
    scale = np.maximum(np.abs(slopes[:-1]), np.abs(slopes[1:]))
    bad = np.flatnonzero(ds < -CONVEXITY_SLACK * np.maximum(scale, 1e-300))
    if bad.size == 0:
        checks.append(HypothesisCheck("phi5", PASS))
    else:
        i = int(bad[0])
        checks.append(
            HypothesisCheck(
                "phi5",
                FAIL,
                f"slope of p*Phi - phi*t^2 drops near t={grid[i+1]:g}",
            )
        )

    # H1: exponent window 1 < q < ell <= m < p < ell*.
    if ell is None:
        checks.append(HypothesisCheck("H1", FAIL, "indices unavailable"))
        ell_star = math.inf
    else:
        ell_star = N * ell / (N - ell) if ell < N else math.inf
        reason = None
        if not q > 1.0:
            reason = f"q <= 1 (q={q:g})"
        elif not q < ell:
            reason = f"q >= ell (q={q:g}, ell={ell:g})"
        elif not m_idx < p:
            reason = f"p <= m (p={p:g}, m={m_idx:g})"
        elif not p < ell_star:
            reason = f"p >= ell* (p={p:g}, ell*={ell_star:g})"
        checks.append(
            HypothesisCheck("H1", PASS if reason is None else FAIL, reason)
        )

    checks.append(
        HypothesisCheck(
            "H2",
            NOT_APPLICABLE,
            "weight positivity; enforced at Problem construction",
        )
    )

    # H3: ((2-q) phi(t) + phi'(t) t) / t^(p-2) strictly decreasing.
    f = ((2.0 - q) * phi_v + dphi_v * grid) / grid ** (p - 2.0)
    i = _strict_monotone_violation(grid, f, "decreasing")
    if i is None:
        checks.append(HypothesisCheck("H3", PASS))
    else:
        checks.append(
            HypothesisCheck(
                "H3",
                FAIL,
                f"((2-q)phi + phi' t)/t^(p-2) fails to decrease "
                f"between t={grid[i]:g} and t={grid[i+1]:g}",
            )
        )

    # H4: ell (m - q)/(ell - q) < p < ell*.
    if ell is None or not q < ell:
        checks.append(
            HypothesisCheck("H4", FAIL, f"needs q < ell (q={q:g}, ell={ell})")
        )
    else:
        bound = ell * (m_idx - q) / (ell - q)
        if bound < p < ell_star:
            checks.append(HypothesisCheck("H4", PASS))
        else:
            checks.append(
                HypothesisCheck(
                    "H4",
                    FAIL,
                    f"needs ell(m-q)/(ell-q) = {bound:g} < p < ell* = {ell_star:g}, "
                    f"got p = {p:g}",
                )
            )

    return HypothesisReport(tuple(checks))


@dataclass(frozen=True)
class SandwichResult:
    """Outcome of the scaling-inequality sweep."""

    passed: bool
    worst_ratio: float
    witness: tuple[float, float] | None = None
    samples: int = 0


def default_sandwich_samples(n: int = 200) -> list[tuple[float, float]]:
    """n pairs (rho, t) pairing a rising with a falling log sweep of [1e-2, 1e2]."""
    rho = np.logspace(-2, 2, n)
    t = rho[::-1]
    return list(zip(rho.tolist(), t.tolist()))


def sandwich_check(
    model: NFunctionModel,
    samples: Iterable[tuple[float, float]] | None = None,
    slack: float = SANDWICH_SLACK,
) -> SandwichResult:
    """Verify the two-sided scaling control of the primitive.

    For every sampled pair (rho, t) the primitive must satisfy

        min(t^ell, t^m) Phi(rho) <= Phi(rho t) <= max(t^ell, t^m) Phi(rho)

    and for every sampled t the density must satisfy
    ``ell Phi(t) <= phi(t) t^2 <= m Phi(t)``. Each inequality is expressed
    as a ratio that must not exceed 1; the worst ratio over all samples is
    reported, and the check passes when it stays below 1 + slack. A pure
    power density saturates everything with ratio exactly 1.
    """
    pairs = default_sandwich_samples() if samples is None else list(samples)
    ell, m_idx = compute_indices(model)
    worst = 0.0
    witness: tuple[float, float] | None = None
    for rho, t in pairs:
        if rho <= 0.0 or t <= 0.0:
            raise ValueError(f"sandwich samples must be positive, got ({rho}, {t})")
        Phi_rho = float(model.Phi(rho))
        Phi_rt = float(model.Phi(rho * t))
        Phi_t = float(model.Phi(t))
        phi_t = float(model.phi(t))
        z0 = min(t**ell, t**m_idx)
        z1 = max(t**ell, t**m_idx)
        ratios = (
            z0 * Phi_rho / Phi_rt,
            Phi_rt / (z1 * Phi_rho),
            ell * Phi_t / (phi_t * t**2),
            phi_t * t**2 / (m_idx * Phi_t),
        )
        if not all(np.isfinite(r) for r in ratios):
            raise EvaluationError(f"non-finite sandwich ratio at (rho={rho}, t={t})")
        r = max(ratios)
        if r > worst:
            worst, witness = r, (rho, t)
    return SandwichResult(worst <= 1.0 + slack, worst, witness, len(pairs))
