"""Energy functional: breakdown scalars, gradient, curvature, identities."""

import warnings

import numpy as np
import pytest

from nehariphi import (
    HypothesisError,
    breakdown,
    bump_field,
    energy,
    gradient,
    h1_seminorm,
    interior_to_field,
    make_field,
    nodal_array,
    phi_norm_proxy,
    power,
    second_along,
    with_lambda,
)
from conftest import make_problem, random_field

FD_STEP = 1e-6


def _directional_fd(prob, u, v, h):
    un, vn = nodal_array(prob.mesh, u), nodal_array(prob.mesh, v)
    up = make_field(prob.mesh, un + h * vn)
    um = make_field(prob.mesh, un - h * vn)
    return (energy(prob, up) - energy(prob, um)) / (2.0 * h)


def test_breakdown_closed_relations_for_laplacian_density(prob_power):
    # phi = 1: A = int |grad u|^2, B = A/2, D = 0
    rng = np.random.default_rng(0)
    u = random_field(prob_power.mesh, rng)
    b = breakdown(prob_power, u)
    np.testing.assert_allclose(b.B, b.A / 2.0, rtol=1e-13)
    assert b.D == 0.0
    np.testing.assert_allclose(np.sqrt(b.A), h1_seminorm(prob_power.mesh, u), rtol=1e-13)
    assert b.P > 0.0 and b.Q > 0.0


def test_zero_field_gives_exact_zeros(any_problem):
    zero = make_field(any_problem.mesh, np.zeros(any_problem.mesh.n_nodes))
    b = breakdown(any_problem, zero)
    assert (b.B, b.A, b.D, b.P, b.Q) == (0.0, 0.0, 0.0, 0.0, 0.0)
    assert energy(any_problem, zero) == 0.0
    np.testing.assert_array_equal(gradient(any_problem, zero), 0.0)


def test_plateau_fields_stay_finite_for_singular_density():
    # phi(t) = t^(-0.5) diverges at 0; zero-gradient elements must not pollute
    with warnings.catch_warnings():
        # the finite growth-limit heuristic flags sqrt growth; irrelevant here
        warnings.simplefilter("ignore", UserWarning)
        prob = make_problem(power(1.5), 1.2, 3.0, n=16)
    values = np.zeros(prob.mesh.n_nodes)
    values[5:12] = 1.0  # flat top, zero gradient on interior elements
    u = make_field(prob.mesh, values)
    b = breakdown(prob, u)
    assert np.isfinite((b.B, b.A, b.D, b.P, b.Q)).all()
    assert np.isfinite(gradient(prob, u)).all()


def test_euler_identity(any_problem):
    # the gradient paired with u itself reproduces A - lambda Q - P
    prob = with_lambda(any_problem, 2.0)
    rng = np.random.default_rng(7)
    for _ in range(5):
        u = random_field(prob.mesh, rng)
        b = breakdown(prob, u)
        lhs = float(np.dot(gradient(prob, u), nodal_array(prob.mesh, u)[~prob.mesh.boundary_mask]))
        rhs = b.A - prob.lam * b.Q - b.P
        np.testing.assert_allclose(lhs, rhs, rtol=1e-11, atol=1e-12)


def test_gradient_matches_finite_differences(any_problem):
    prob = with_lambda(any_problem, 1.5)
    rng = np.random.default_rng(21)
    for _ in range(5):
        u = random_field(prob.mesh, rng)
        v = random_field(prob.mesh, rng)
        g = gradient(prob, u)
        pairing = float(np.dot(g, nodal_array(prob.mesh, v)[~prob.mesh.boundary_mask]))
        fd = _directional_fd(prob, u, v, FD_STEP)
        np.testing.assert_allclose(pairing, fd, rtol=1e-5, atol=1e-10)


def test_second_along_matches_fd_curvature(any_problem):
    prob = with_lambda(any_problem, 1.5)
    rng = np.random.default_rng(5)
    u = random_field(prob.mesh, rng, nonneg=True)
    h = 1e-4
    un = nodal_array(prob.mesh, u)
    j = lambda s: energy(prob, make_field(prob.mesh, s * un))
    fd = (j(1.0 + h) - 2.0 * j(1.0) + j(1.0 - h)) / h**2
    np.testing.assert_allclose(second_along(prob, u), fd, rtol=1e-4)


def test_energy_even_under_global_flip(any_problem):
    rng = np.random.default_rng(13)
    u = nodal_array(any_problem.mesh, random_field(any_problem.mesh, rng))
    assert energy(any_problem, make_field(any_problem.mesh, -u)) == energy(
        any_problem, make_field(any_problem.mesh, u)
    )


def test_with_lambda_replaces_only_lambda(prob_power):
    prob = with_lambda(prob_power, 4.0)
    assert prob.lam == 4.0
    assert prob.mesh is prob_power.mesh
    assert prob.model is prob_power.model
    assert prob.q == prob_power.q and prob.p == prob_power.p


def test_negative_lambda_rejected(prob_power):
    with pytest.raises(ValueError):
        with_lambda(prob_power, -1.0)


def test_exponent_window_violation_raises():
    with pytest.raises(HypothesisError):
        make_problem(power(2.0), 1.5, 1.8)


def test_soft_hypothesis_failure_warns_not_raises():
    # p = 6 sits exactly on the coupling bound: window holds, coupling fails
    from nehariphi import double_power

    with pytest.warns(UserWarning):
        prob = make_problem(double_power(2.0, 3.0), 1.5, 6.0, n=8)
    assert prob.hypotheses.verdict("H4") == "fail"


def test_norm_proxy_scales_with_growth(prob_power):
    u = bump_field(prob_power.mesh)
    un = nodal_array(prob_power.mesh, u)
    # ell = 2 for the Laplacian density: proxy is 1-homogeneous
    one = phi_norm_proxy(prob_power, u)
    two = phi_norm_proxy(prob_power, make_field(prob_power.mesh, 2.0 * un))
    np.testing.assert_allclose(two, 2.0 * one, rtol=1e-12)


def test_hypotheses_attached_with_weight_floor(prob_power):
    assert prob_power.hypotheses.all_pass()
    h2 = prob_power.hypotheses["H2"]
    assert h2.verdict == "pass"
    assert "floor" in (h2.witness or "")
