"""Shared fixtures: small discretized problems on the unit interval and square."""

import numpy as np
import pytest

from nehariphi import (
    EstimateOptions,
    Problem,
    build_mesh,
    double_power,
    estimate_extremal,
    interior_to_field,
    log_type,
    power,
    weight_constant,
)


def make_problem(model, q, p, *, dim=1, n=64, lam=1.0, weight_value=1.0):
    if dim == 1:
        mesh = build_mesh(1, (0.0, 1.0), n)
    else:
        mesh = build_mesh(2, ((0.0, 1.0), (0.0, 1.0)), (n, n))
    weight = weight_constant(mesh, weight_value)
    return Problem(mesh=mesh, model=model, weight=weight, q=q, p=p, lam=lam)


def random_field(mesh, rng, nonneg=False):
    v = rng.standard_normal(mesh.interior_count)
    if nonneg:
        v = np.abs(v) + 0.05
    return interior_to_field(mesh, v)


@pytest.fixture(scope="session")
def prob_power():
    # Laplacian-type density, q = 1.5 < 2 = ell = m < p = 3
    return make_problem(power(2.0), 1.5, 3.0)


@pytest.fixture(scope="session")
def prob_double():
    # (2,3)-density; p = 7 clears the coupling bound ell(m-q)/(ell-q) = 6
    return make_problem(double_power(2.0, 3.0), 1.5, 7.0, n=65)


@pytest.fixture(scope="session")
def prob_log():
    return make_problem(log_type(), 1.5, 7.0)


@pytest.fixture(scope="session")
def prob_2d():
    return make_problem(power(2.0), 1.5, 3.0, dim=2, n=10)


@pytest.fixture(params=["prob_power", "prob_double", "prob_log"])
def any_problem(request):
    return request.getfixturevalue(request.param)


@pytest.fixture(scope="session")
def power_extremal(prob_power):
    return estimate_extremal(prob_power, EstimateOptions(starts=2, max_iters=800, seed=0))


@pytest.fixture(scope="session")
def double_extremal(prob_double):
    return estimate_extremal(prob_double, EstimateOptions(starts=2, max_iters=800, seed=0))
