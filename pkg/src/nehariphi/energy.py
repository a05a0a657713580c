"""Discrete energy functional for the concave-convex Dirichlet problem.

For a nodal field u on a mesh of the box Omega, the energy is

    J(u) = int Phi(|grad u|) - (lambda/q) int a |u|^q - (1/p) int |u|^p,

with the gradient term summed over elements (gradients are constant per
element) and the lower-order terms integrated by the fixed quadrature
rule of the mesh. The directional structure used throughout the package
comes from the five scalars

    B = int Phi(|grad u|)          A = int phi(|grad u|) |grad u|^2
    D = int phi'(|grad u|) |grad u|^3
    P = int |u|^p                  Q = int a |u|^q

in terms of which J(u) = B - (lambda/q) Q - (1/p) P, the derivative along
the ray satisfies J'(u)u = A - lambda Q - P, and the second derivative
along the ray is A + D - lambda (q-1) Q - (p-1) P.

Gradient magnitudes are clamped below by a small epsilon inside phi and
phi' only; the polynomial factors stay exact, so the zero field evaluates
to exactly zero in every slot even for densities singular at the origin.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import domain as dm
from .errors import EvaluationError, HypothesisError
from .nfunction import FAIL, NFunctionModel, PASS, HypothesisCheck, HypothesisReport, \
    compute_indices, validate_hypotheses

EPS_GRADIENT = 1e-12


@dataclass(frozen=True)
class Problem:
    """A fixed discretized problem instance.

    Construction validates the structural hypotheses for the model and
    exponents; a failing exponent window (H1) or a non-positive weight
    (H2) is an error, any other failing hypothesis is reported as a
    warning and recorded in ``hypotheses``.
    """

    mesh: dm.Mesh
    model: NFunctionModel
    weight: dm.Weight
    q: float
    p: float
    lam: float
    eps: float = EPS_GRADIENT

    def __post_init__(self):
        if self.weight.values.shape != (self.mesh.n_nodes,):
            raise ValueError("weight does not conform to the mesh")
        if not (np.isfinite(self.lam) and self.lam >= 0.0):
            raise ValueError(f"lambda must be finite and >= 0, got {self.lam}")
        report = validate_hypotheses(self.model, self.q, self.p, self.mesh.dim)
        if report.verdict("H1") == FAIL:
            raise HypothesisError(
                f"exponent window violated: {report['H1'].witness}"
            )
        # the weight exists and carries a positive floor, so H2 holds
        checks = tuple(
            HypothesisCheck("H2", PASS, f"weight floor = {self.weight.floor:g}")
            if c.id == "H2"
            else c
            for c in report.checks
        )
        report = HypothesisReport(checks)
        for c in report.failures():
            warnings.warn(
                f"hypothesis {c.id} fails for this problem: {c.witness}",
                stacklevel=2,
            )
        object.__setattr__(self, "hypotheses", report)

    @property
    def ell(self) -> float:
        return compute_indices(self.model)[0]

    @property
    def m_idx(self) -> float:
        return compute_indices(self.model)[1]


def with_lambda(prob: Problem, lam: float) -> Problem:
    """The same problem at a different lambda."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return replace(prob, lam=float(lam))


@dataclass(frozen=True)
class EnergyBreakdown:
    """The five directional scalars (B, A, D, P, Q) of a field."""

    B: float
    A: float
    D: float
    P: float
    Q: float


def _gradient_terms(prob: Problem, g: np.ndarray):
    """Per-element Phi, phi and phi' factors with the clamp inside phi, phi'."""
    gc = np.maximum(g, prob.eps)
    Phi_v = np.asarray(prob.model.Phi(g), dtype=float)
    phi_v = np.asarray(prob.model.phi(gc), dtype=float)
    dphi_v = np.asarray(prob.model.dphi(gc), dtype=float)
    for name, arr in (("Phi", Phi_v), ("phi", phi_v), ("dphi", dphi_v)):
        bad = ~np.isfinite(arr)
        if np.any(bad):
            e = int(np.flatnonzero(bad)[0])
            raise EvaluationError(
                f"non-finite {name} integrand on element {e} (|grad u| = {g[e]:g})"
            )
    return Phi_v, phi_v, dphi_v


def breakdown(prob: Problem, u) -> EnergyBreakdown:
    """Evaluate (B, A, D, P, Q) for a field; the zero field gives exact zeros."""
    values = dm.nodal_array(prob.mesh, u)
    g = dm.element_gradients(prob.mesh, values)
    Phi_v, phi_v, dphi_v = _gradient_terms(prob, g)
    B = dm.integrate(prob.mesh, Phi_v)
    A = dm.integrate(prob.mesh, phi_v * g**2)
    D = dm.integrate(prob.mesh, dphi_v * g**3)
    P = dm.lp_norm_pow(prob.mesh, values, prob.p)
    Q = dm.lp_norm_pow(prob.mesh, values, prob.q, prob.weight)
    return EnergyBreakdown(B, A, D, P, Q)


def energy(prob: Problem, u) -> float:
    """J(u) = B - (lambda/q) Q - (1/p) P."""
    b = breakdown(prob, u)
    return b.B - (prob.lam / prob.q) * b.Q - b.P / prob.p


def energy_of(prob: Problem, b: EnergyBreakdown) -> float:
    """J from an already computed breakdown."""
    return b.B - (prob.lam / prob.q) * b.Q - b.P / prob.p


def signed_power(x: np.ndarray, e: float) -> np.ndarray:
    """sign(x) |x|^e with the value 0 at x = 0 (no NaN for e < 1)."""
    out = np.zeros_like(x)
    nz = x != 0.0
    out[nz] = np.sign(x[nz]) * np.abs(x[nz]) ** e
    return out


def gradient(prob: Problem, u) -> np.ndarray:
    """Weak-form gradient of J at u, one entry per interior node.

    Entry i is J'(u) applied to the nodal basis function of interior node
    i, assembled with the same quadrature as the energy so that
    ``gradient(u) . u`` reproduces A - lambda Q - P to rounding.
    """
    mesh = prob.mesh
    values = dm.nodal_array(mesh, u)
    gvec = dm.element_gradient_vectors(mesh, values)
    g = np.sqrt(np.sum(gvec**2, axis=1)) if mesh.dim == 2 else np.abs(gvec[:, 0])
    _, phi_v, _ = _gradient_terms(prob, g)

    coef = phi_v * mesh.element_measure
    diff_part = np.einsum("e,ei,eki->ek", coef, gvec, mesh.basis_gradients)

    uq = dm.quad_values(mesh, values)
    aq = dm.quad_values(mesh, prob.weight.values)
    integrand = prob.lam * aq * signed_power(uq, prob.q - 1.0) + signed_power(
        uq, prob.p - 1.0
    )
    low_part = mesh.element_measure[:, None] * (
        (integrand * mesh.quad_weights[None, :]) @ mesh.quad_basis
    )

    out = np.zeros(mesh.n_nodes)
    np.add.at(out, mesh.elements, diff_part - low_part)
    return out[mesh.interior_indices]


def second_along(prob: Problem, u) -> float:
    """Second derivative of t -> J(t u) at t = 1: A + D - lambda(q-1)Q - (p-1)P."""
    b = breakdown(prob, u)
    return (
        b.A + b.D - prob.lam * (prob.q - 1.0) * b.Q - (prob.p - 1.0) * b.P
    )


def h1_seminorm(mesh: dm.Mesh, u) -> float:
    """Discrete H1 seminorm sqrt(int |grad u|^2)."""
    g = dm.element_gradients(mesh, u)
    return float(np.sqrt(dm.integrate(mesh, g**2)))


def phi_norm_proxy(prob: Problem, u) -> float:
    """Monotone size proxy (int Phi(|grad u|))^(1/ell)."""
    values = dm.nodal_array(prob.mesh, u)
    g = dm.element_gradients(prob.mesh, values)
    B = dm.integrate(prob.mesh, np.asarray(prob.model.Phi(g), dtype=float))
    return float(B ** (1.0 / prob.ell))
