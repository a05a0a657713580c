"""Ray quotients: closed forms, identities, critical radii, rescaling roots."""

import numpy as np
import pytest
from scipy.optimize import brentq

from nehariphi import (
    EvaluationError,
    analyze_ray,
    breakdown,
    classify,
    find_te,
    find_tn,
    make_field,
    nehari_roots,
    nodal_array,
    power,
    re,
    rn,
    trace,
    with_lambda,
)
from nehariphi.fibering import (
    RayData,
    find_te_ray,
    find_tn_ray,
    gamma_ray,
    ray_data,
    re_prime_ray,
    re_ray,
    rn_prime_ray,
    rn_ray,
)
from conftest import make_problem, random_field

# Synthetic homogeneous ray with unit scalars (K = P = Q = 1), q = 3/2, p = 3:
# the critical radii and peak quotient values have closed forms.
SYNTH_TN = 1.0 / 3.0
SYNTH_TE = 0.5
SYNTH_LAMBDA_N = 2.0 / (3.0 * np.sqrt(3.0))  # 0.3849001794597505
SYNTH_LAMBDA_E = 1.0 / (2.0 * np.sqrt(2.0))  # 0.35355339059327373


def synthetic_ray():
    empty = np.zeros(0)
    return RayData(
        model=power(2.0), q=1.5, p=3.0, eps=1e-12,
        g=empty, meas=empty, P=1.0, Q=1.0, power_terms=((2.0, 1.0),),
    )


def test_synthetic_critical_radii_and_peaks():
    ray = synthetic_ray()
    np.testing.assert_allclose(find_tn_ray(ray), SYNTH_TN, rtol=1e-11)
    np.testing.assert_allclose(find_te_ray(ray), SYNTH_TE, rtol=1e-11)
    np.testing.assert_allclose(rn_ray(ray, SYNTH_TN), SYNTH_LAMBDA_N, rtol=1e-12)
    np.testing.assert_allclose(re_ray(ray, SYNTH_TE), SYNTH_LAMBDA_E, rtol=1e-12)


def test_synthetic_tangency_and_identity():
    # the two quotients touch at t_e, and rn - re = (t/q) d(re)/dt everywhere
    ray = synthetic_ray()
    np.testing.assert_allclose(rn_ray(ray, SYNTH_TE), re_ray(ray, SYNTH_TE), rtol=1e-12)
    for t in (0.1, SYNTH_TN, SYNTH_TE, 1.0, 4.0):
        lhs = rn_ray(ray, t) - re_ray(ray, t)
        rhs = (t / ray.q) * re_prime_ray(ray, t)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-15)
    # spot value: at t = 1 the difference is (1 - 1/3) - (3/2)(1/2 - 1/9)... = -1/4
    np.testing.assert_allclose(rn_ray(ray, 1.0) - re_ray(ray, 1.0), -0.25, rtol=1e-13)


def test_homogeneous_closed_forms_on_random_fields():
    # pure-power density: t_n and t_e solve one-term power equations exactly
    r, q, p = 2.0, 1.5, 3.0
    prob = make_problem(power(r), q, p, n=48)
    rng = np.random.default_rng(2)
    for _ in range(10):
        u = random_field(prob.mesh, rng)
        b = breakdown(prob, u)
        K = b.A  # A(1) = int |grad u|^r for the power density
        tn_ref = ((r - q) * K / ((p - q) * b.P)) ** (1.0 / (p - r))
        te_ref = (p * (r - q) * K / (r * (p - q) * b.P)) ** (1.0 / (p - r))
        np.testing.assert_allclose(find_tn(prob, u), tn_ref, rtol=1e-8)
        np.testing.assert_allclose(find_te(prob, u), te_ref, rtol=1e-8)


def test_quotient_identity_on_discretized_fixtures(any_problem):
    # exact-derivative version of the difference identity along real rays
    rng = np.random.default_rng(4)
    u = random_field(any_problem.mesh, rng)
    ray = ray_data(any_problem, u)
    for t in np.logspace(-1.5, 1.5, 25):
        lhs = rn_ray(ray, t) - re_ray(ray, t)
        rhs = (t / ray.q) * re_prime_ray(ray, t)
        scale = max(abs(lhs), abs(rhs), 1e-10)
        assert abs(lhs - rhs) / scale < 1e-10


def test_critical_radius_ordering_and_peak_ordering(any_problem):
    rng = np.random.default_rng(9)
    for _ in range(20):
        u = random_field(any_problem.mesh, rng)
        a = analyze_ray(any_problem, u)
        assert a.t_n < a.t_e
        assert a.Lambda_e < a.Lambda_n
        # peaks really sit at the critical radii
        assert rn_prime_ray(ray_data(any_problem, u), a.t_n) == pytest.approx(0.0, abs=1e-6 * a.Lambda_n / a.t_n)


def test_scaling_covariance(any_problem):
    rng = np.random.default_rng(14)
    u = nodal_array(any_problem.mesh, random_field(any_problem.mesh, rng))
    tn = find_tn(any_problem, make_field(any_problem.mesh, u))
    ln = analyze_ray(any_problem, make_field(any_problem.mesh, u)).Lambda_n
    for s in (0.1, 2.0, 10.0):
        su = make_field(any_problem.mesh, s * u)
        np.testing.assert_allclose(find_tn(any_problem, su), tn / s, rtol=1e-9)
        np.testing.assert_allclose(analyze_ray(any_problem, su).Lambda_n, ln, rtol=1e-9)


def test_nehari_roots_bracket_and_match_independent_solver(prob_power):
    rng = np.random.default_rng(6)
    u = random_field(prob_power.mesh, rng)
    a = analyze_ray(prob_power, u)
    lam = 0.6 * a.Lambda_n
    roots = nehari_roots(prob_power, u, lam)
    assert roots.kind == "two_roots"
    assert roots.t_plus < a.t_n < roots.t_minus
    ray = ray_data(prob_power, u)
    for t in (roots.t_plus, roots.t_minus):
        np.testing.assert_allclose(rn_ray(ray, t), lam, rtol=1e-10)
    # independent root finder on the same residual
    f = lambda t: rn_ray(ray, t) - lam
    left = brentq(f, 1e-8, a.t_n, xtol=1e-15, rtol=1e-14)
    right = brentq(f, a.t_n, 1e6, xtol=1e-15, rtol=1e-14)
    np.testing.assert_allclose(roots.t_plus, left, rtol=1e-9)
    np.testing.assert_allclose(roots.t_minus, right, rtol=1e-9)


def test_nehari_roots_degenerate_and_empty(prob_power):
    rng = np.random.default_rng(8)
    u = random_field(prob_power.mesh, rng)
    a = analyze_ray(prob_power, u)
    peak = nehari_roots(prob_power, u, a.Lambda_n * (1.0 - 1e-12))
    assert peak.kind == "degenerate"
    np.testing.assert_allclose(peak.t_plus, a.t_n, rtol=1e-9)
    none = nehari_roots(prob_power, u, a.Lambda_n * 1.01)
    assert none.kind == "no_roots"
    with pytest.raises(ValueError):
        nehari_roots(prob_power, u, 0.0)


def test_fibering_map_stationary_at_roots(prob_power):
    rng = np.random.default_rng(10)
    u = random_field(prob_power.mesh, rng)
    a = analyze_ray(prob_power, u)
    lam = 0.7 * a.Lambda_n
    roots = nehari_roots(prob_power, u, lam)
    ray = ray_data(prob_power, u)
    h = 1e-6
    for t in (roots.t_plus, roots.t_minus):
        slope = (gamma_ray(ray, t + h, lam) - gamma_ray(ray, t - h, lam)) / (2.0 * h)
        assert abs(slope) < 1e-6 * max(1.0, abs(gamma_ray(ray, t, lam)))


def test_classify_branches(prob_power):
    rng = np.random.default_rng(12)
    u = nodal_array(prob_power.mesh, random_field(prob_power.mesh, rng))
    field = make_field(prob_power.mesh, u)
    a = analyze_ray(prob_power, field)
    lam = 0.5 * a.Lambda_n
    prob = with_lambda(prob_power, lam)
    roots = nehari_roots(prob, field, lam)
    plus = make_field(prob.mesh, roots.t_plus * u)
    minus = make_field(prob.mesh, roots.t_minus * u)
    assert classify(prob, plus) == "N_plus"
    assert classify(prob, minus) == "N_minus"
    assert classify(prob, field) == "off_manifold"


def test_trace_rows(prob_power):
    u = random_field(prob_power.mesh, np.random.default_rng(1))
    ts = np.logspace(-1, 1, 7)
    rows = trace(prob_power, u, ts, lam=1.0)
    assert rows.shape == (7, 4)
    np.testing.assert_array_equal(rows[:, 0], ts)
    np.testing.assert_allclose(rows[3, 1], rn(prob_power, u, ts[3]), rtol=1e-13)
    np.testing.assert_allclose(rows[3, 2], re(prob_power, u, ts[3]), rtol=1e-13)


def test_zero_direction_rejected(prob_power):
    zero = make_field(prob_power.mesh, np.zeros(prob_power.mesh.n_nodes))
    with pytest.raises(EvaluationError):
        find_tn(prob_power, zero)
