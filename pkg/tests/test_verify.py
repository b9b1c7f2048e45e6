import math

import numpy as np
import pytest

from frechet_solve.errors import DomainError, RadiusError
from frechet_solve.problems import (
    broken_constants, get_problem, identity_problem, scalar_fold, scalar_linear,
    scalar_quadratic, scaled_right_inverse,
)
from frechet_solve.verify import (
    injectivity_constants, sample_pairs, verify_injectivity_conditions,
    verify_inverse_lipschitz, verify_lipschitz_path, verify_surjectivity,
)


@pytest.fixture(scope="module")
def quad():
    return scalar_quadratic()


# -- surjectivity ---------------------------------------------------------------------

def test_surjectivity_trivial_target(quad):
    rep = verify_surjectivity(quad, r=0.2, targets=[quad.f(quad.x_ref)])
    assert rep.verdict == "pass" and rep.rows[0]["lhs"] == 0.0


def test_surjectivity_scalar_quadratic(quad):
    rep = verify_surjectivity(quad, r=0.2, samples=100, seed=0)
    assert rep.verdict == "pass" and not rep.violations
    assert rep.summary == "no violation found in 100 samples"
    # the inverse contracts near 0: preimages are closer than the radius claims
    assert all(row["lhs"] <= row["rho_prime"] + 1e-9 for row in rep.rows)


def test_surjectivity_negative_controls(quad):
    for bad in (scaled_right_inverse(quad, 10.0), broken_constants(quad, 10.0)):
        rep = verify_surjectivity(bad, r=0.2, samples=10, seed=0)
        assert rep.verdict == "fail" and rep.violations
        slacks = [v["slack"] for v in rep.violations]
        assert slacks == sorted(slacks, reverse=True)


def test_surjectivity_radius_precondition(quad):
    with pytest.raises(RadiusError):
        verify_surjectivity(quad, r=0.5)
    with pytest.raises(RadiusError):
        verify_surjectivity(quad, r=0.0)


# -- inverse Lipschitz -------------------------------------------------------------------

def test_inverse_lipschitz_equal_pair(quad):
    u = quad.f(quad.X.point([0.1]))
    rep = verify_inverse_lipschitz(quad, pairs=[(u, u)])
    assert rep.verdict == "pass" and rep.rows[0]["lhs"] == 0.0


def test_inverse_lipschitz_linear_equality():
    prob = scalar_linear(2.0)
    rep = verify_inverse_lipschitz(prob, samples=30, seed=1)
    assert rep.verdict == "pass"
    for row in rep.rows:
        assert row["lhs"] == pytest.approx(row["rhs"], rel=2e-6)


def test_inverse_lipschitz_scalar_quadratic(quad):
    rep = verify_inverse_lipschitz(quad, samples=200, seed=0)
    assert rep.verdict == "pass" and rep.samples == 200


def test_inverse_lipschitz_wrong_constant_fails(quad):
    rep = verify_inverse_lipschitz(quad, samples=50, seed=0, constants=1.0)
    assert rep.verdict == "fail" and len(rep.violations) > 0


def test_inverse_lipschitz_loss_of_derivative_levels():
    prob = get_problem("fourier-antiderivative")
    rep = verify_inverse_lipschitz(prob, samples=10, seed=0)
    assert rep.extra["levels_checked"] == prob.Y.levels - prob.d + 1
    assert rep.verdict == "pass"


def test_sample_pairs_stay_in_neighbourhood(quad):
    from frechet_solve.spaces import rho
    rad = quad.domain.m_u(quad.x_ref) / 4
    for u, v in sample_pairs(quad, 50, seed=3):
        # u = f(a) with |a| inside the rho-ball of radius m_U/4
        a = (-2 + math.sqrt(4 + 4 * u.data[0]))
        assert rho(quad.X, quad.X.point([a]), quad.x_ref) < rad + 1e-12


# -- injectivity --------------------------------------------------------------------------

def test_injectivity_identity():
    rep = verify_injectivity_conditions(identity_problem(), samples=200, cprime=0.0)
    assert rep.verdict == "pass"
    assert rep.extra["delta_bound"] == 1.0
    assert max(rep.extra["c_est"]) == pytest.approx(1.0)
    assert rep.extra["cprime_est"] == 0.0


def test_injectivity_scalar_quadratic(quad):
    rep = verify_injectivity_conditions(quad, samples=1000, cprime=0.25)
    assert rep.verdict == "pass"
    assert rep.extra["delta_bound"] == 1.0
    assert rep.extra["delta"] == 0.5
    assert rep.extra["c_eqq4"] == 4.0
    assert rep.extra["cprime_est"] == pytest.approx(0.25, rel=1e-9)
    assert max(rep.extra["c_est"]) <= 2.0


def test_injectivity_constants_formula():
    assert injectivity_constants(2.0, 0.25) == (1.0, 0.5, 4.0)
    with pytest.raises(DomainError):
        injectivity_constants(0.0, 0.25)


def test_injectivity_fold_fails():
    rep = verify_injectivity_conditions(scalar_fold(), samples=200)
    assert rep.verdict == "fail"
    assert any(v["condition"] == "lower-bound" for v in rep.violations)


def test_injectivity_rejects_nonpositive_constants(quad):
    with pytest.raises(DomainError):
        verify_injectivity_conditions(quad, samples=10, c=-1.0, cprime=0.25)


# -- Lipschitz path --------------------------------------------------------------------

def test_lipschitz_path_trivial(quad):
    u = quad.f(quad.X.point([0.1]))
    rep = verify_lipschitz_path(quad, u, u, levels=[0])
    assert rep["verdict"] == "pass" and rep["max_g1"] == 0.0


def test_lipschitz_path_linear_boundary():
    prob = scalar_linear(2.0)
    rep = verify_lipschitz_path(prob, prob.X.point([0.1]), prob.X.point([0.5]), levels=[0, 3])
    assert rep["verdict"] == "pass"
    for lv in rep["levels"]:
        assert lv["g1"] == pytest.approx(1.0, abs=1e-9)
        assert lv["max_upper"] == pytest.approx(1.0, abs=1e-6)


def test_lipschitz_path_scalar_quadratic(quad):
    u, v = quad.f(quad.X.point([0.0])), quad.f(quad.X.point([0.3]))
    rep = verify_lipschitz_path(quad, u, v, levels=[0])
    lv = rep["levels"][0]
    assert rep["verdict"] == "pass" and lv["hypothesis_holds"]
    assert lv["max_upper"] <= 1.0 and lv["g1"] <= 1.0
    # closed form: g(1) = 0.3 / (2 |v - u|)
    assert lv["g1"] == pytest.approx(0.3 / (2 * (v.data[0] - u.data[0])), rel=1e-9)


def test_lipschitz_path_wrong_constant_rejected(quad):
    u, v = quad.f(quad.X.point([-0.3])), quad.f(quad.X.point([-0.1]))
    rep = verify_lipschitz_path(quad, u, v, levels=[0], constants=0.5)
    assert rep["verdict"] == "fail"
    assert rep["levels"][0]["hypothesis_holds"] is False


# -- reproducibility and concurrency ---------------------------------------------------

def test_reports_reproducible_and_thread_independent(quad, monkeypatch):
    a = verify_inverse_lipschitz(quad, samples=20, seed=5).as_dict()
    b = verify_inverse_lipschitz(quad, samples=20, seed=5).as_dict()
    monkeypatch.setenv("FRECHET_SOLVE_THREADS", "4")
    c = verify_inverse_lipschitz(quad, samples=20, seed=5).as_dict()
    assert a == b == c
    assert verify_inverse_lipschitz(quad, samples=20, seed=6).as_dict() != a
