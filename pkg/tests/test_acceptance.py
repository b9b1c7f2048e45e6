"""Acceptance suite: one test per criterion, each with its runtime budget.

A summary line per criterion is printed at the end of the pytest run.
"""
import math
import time

import numpy as np
import pytest

from frechet_solve import ode, solver
from frechet_solve.calculus import ScalarPath, dini_mvt_check
from frechet_solve.cli import main
from frechet_solve.implicit import scalar_quadratic_family, verify_ift_estimate
from frechet_solve.problems import broken_constants, get_problem, quadratic_collocation_oracle
from frechet_solve.spaces import (
    EuclideanSpace, FourierSpace, magnitude, rho, sample_in_pi_ball,
)
from frechet_solve.verify import (
    sample_rho_ball, verify_injectivity_conditions, verify_inverse_lipschitz,
    verify_lipschitz_segments, verify_surjectivity,
)

DEMO = ("scalar-quadratic", "fourier-quadratic", "fourier-antiderivative")


@pytest.fixture
def criterion(request):
    def mark(num, title):
        request.node.user_properties.append(("criterion", (num, title)))
        return time.perf_counter()
    return mark


def test_c01_metric_and_ball_suite(criterion):
    t0 = criterion(1, "metric axioms, translation invariance, Pi_s inclusion")
    rng = np.random.default_rng(2024)
    spaces = [EuclideanSpace(dim=3, levels=6), FourierSpace(modes=4, levels=5)]
    tol, violations, instances = 1e-12, 0, 0
    for i in range(1000):
        sp = spaces[i % 2]
        x, y, z = (sp.random(rng) * rng.uniform(0.1, 10.0) for _ in range(3))
        dxy, dyx = rho(sp, x, y), rho(sp, y, x)
        checks = [
            rho(sp, x, x) <= tol,
            dxy > 0 or np.array_equal(x.data, y.data),
            abs(dxy - dyx) <= tol,
            dxy <= rho(sp, x, z) + rho(sp, z, y) + tol,
            abs(rho(sp, x + z, y + z) - dxy) <= tol,
        ]
        s = rng.uniform(0.0, 2.0, sp.levels + 1)
        s[rng.integers(0, sp.levels + 1)] += 0.1
        c = rng.uniform(0.5, 20.0)
        w = c * sample_in_pi_ball(sp, s, rng)
        checks.append(rho(sp, w, sp.zero()) <= c * magnitude(s) + tol)
        violations += checks.count(False)
        instances += 1
    elapsed = time.perf_counter() - t0
    assert instances >= 1000 and violations == 0
    assert elapsed < 5.0


def test_c02_orbit_certificates(criterion, monkeypatch):
    t0 = criterion(2, "orbit certificates on every run_orbit call")
    original = solver.run_orbit
    calls = []

    def checked(x0, ybar, problem, params, s=None, **kw):
        xhat, trace = original(x0, ybar, problem, params, s=s, **kw)
        if trace.steps:
            calls.append((trace.residual < params.eps * (1.0 + trace.ybar_norm),
                          trace.length < params.mu,
                          trace.ball_norm <= params.sigma))
        return xhat, trace

    monkeypatch.setattr(solver, "run_orbit", checked)
    rng = np.random.default_rng(11)
    rounds = 0
    while len(calls) < 500:
        for name in DEMO:
            prob = get_problem(name)
            m = prob.domain.m_u(prob.x_ref)
            y = sample_rho_ball(prob.Y, prob.f(prob.x_ref), 0.5 * m, rng, family=prob.image_metric)
            assert solver.solve(prob, y, tol=1e-10).converged
        rounds += 1
    elapsed = time.perf_counter() - t0
    assert len(calls) >= 500
    assert all(all(c) for c in calls)
    assert elapsed < 30.0


def test_c03_closed_forms(criterion):
    t0 = criterion(3, "exact solves vs closed forms")
    prob = get_problem("scalar-quadratic")
    rep = solver.solve(prob, prob.Y.point([0.5]), tol=1e-12)
    assert abs(rep.solution.data[0] - (-2.0 + math.sqrt(6.0))) < 1e-10
    fq = get_problem("fourier-quadratic")
    for y in (fq.X.cosine(1, 0.1), fq.X.cosine(2, 0.01) + fq.X.cosine(1, 0.02)):
        rep = solver.solve(fq, y, tol=1e-12)
        coeffs, nodes = quadratic_collocation_oracle(fq.X, y)
        assert np.all(fq.X.profile(rep.solution - coeffs) < 1e-7)
        grid = fq.X.to_grid(rep.solution, 8 * fq.X.modes).real
        assert np.max(np.abs(grid - nodes)) < 1e-7
    assert time.perf_counter() - t0 < 60.0


def test_c04_local_surjectivity(criterion):
    t0 = criterion(4, "local surjectivity at r = m_U/2 with broken-constant control")
    for name in DEMO:
        prob = get_problem(name)
        r = prob.domain.m_u(prob.x_ref) / 2
        rep = verify_surjectivity(prob, r=r, samples=100, seed=0)
        assert rep.verdict == "pass", (name, rep.violations[:3])
        assert all(row["lhs"] <= r + 1e-6 for row in rep.rows)
        bad = verify_surjectivity(broken_constants(prob, 10.0), r=r, samples=20, seed=0)
        assert bad.verdict == "fail", name
    assert time.perf_counter() - t0 < 120.0


def test_c05_inverse_lipschitz(criterion):
    t0 = criterion(5, "inverse Lipschitz on 200 pairs per problem")
    for name in DEMO:
        prob = get_problem(name)
        rep = verify_inverse_lipschitz(prob, samples=200, seed=0, rel_tol=1e-6)
        assert rep.verdict == "pass", (name, rep.violations[:3])
        assert rep.samples == 200
        assert rep.extra["levels_checked"] == prob.Y.levels - prob.d + 1
    assert time.perf_counter() - t0 < 120.0


def test_c06_injectivity_constants(criterion):
    t0 = criterion(6, "injectivity constants on scalar-quadratic")
    prob = get_problem("scalar-quadratic")
    assert prob.c[0] == 2.0
    rep = verify_injectivity_conditions(prob, samples=1000, r=0, cprime=0.25)
    assert rep.verdict == "pass"
    assert rep.extra["delta_bound"] == 1.0
    assert rep.extra["delta"] == 0.5 and rep.extra["c_eqq4"] == 4.0
    assert not [v for v in rep.violations if v["condition"] == "injectivity"]
    assert time.perf_counter() - t0 < 10.0


def test_c07_dini_mean_value(criterion):
    t0 = criterion(7, "Dini mean-value checks and normalised path on 20 segments")
    assert dini_mvt_check(ScalarPath(lambda t: t)).verdict
    assert dini_mvt_check(ScalarPath(math.sin)).verdict
    slope2 = dini_mvt_check(ScalarPath(lambda t: 2 * t))
    assert not slope2.hypothesis_holds and slope2.verdict is None
    for name in DEMO:
        rep = verify_lipschitz_segments(get_problem(name), segments=20, seed=0)
        assert rep.verdict == "pass", name
        assert all(row["g1"] <= 1.0 + 1e-6 for row in rep.rows)
    assert time.perf_counter() - t0 < 60.0


def test_c08_implicit_map(criterion):
    t0 = criterion(8, "implicit-map distance estimate")
    rep = verify_ift_estimate(scalar_quadratic_family(), samples=100, seed=0, rel_tol=1e-6)
    assert rep.verdict == "pass" and rep.samples == 100
    assert time.perf_counter() - t0 < 60.0


def test_c09_ode_application(criterion, monkeypatch):
    t0 = criterion(9, "Cauchy problems: closed forms, Gronwall, RK4 oracle, order")
    original = ode.linear_right_inverse
    excess = []

    def checked(z, r, v, v0, problem, check=True):
        u = original(z, r, v, v0, problem, check=check)
        excess.append(float(np.max(ode.gronwall_excess(u, v, v0, problem))))
        return u

    monkeypatch.setattr(ode, "linear_right_inverse", checked)
    assert ode.gronwall_constant(0, ode.linear_scalar(a=1.0, r0=1.0)) == pytest.approx(
        1 + 2 * math.e, rel=1e-15)
    T = ode.grid_count(1e-3)
    for name in ("linear-scalar", "linear-fourier"):
        prob = ode.get_ode(name)
        z = ode.cauchy_solve(prob, 0.5, grid=T)
        assert np.max(np.abs(z.values - prob.closed_form(0.5, z.nodes))) < 1e-6
        ref = ode.rk4_reference(prob, 0.5, grid=T)
        assert np.all((z - ref).c1_profile() < 1e-5)
    prob = ode.get_ode("logistic-scalar")
    z = ode.cauchy_solve(prob, 0.5, grid=T)
    assert np.all((z - ode.rk4_reference(prob, 0.5, grid=T)).c1_profile() < 1e-5)
    assert excess and max(excess) <= 1e-6
    lin = ode.linear_scalar()
    errs = [np.max(np.abs(ode.cauchy_solve(lin, 0.9, grid=n, tol=1e-13).values
                          - lin.closed_form(0.9, ode.grid_nodes(n)))) for n in (8, 16, 32, 64)]
    assert np.all(np.array(errs[:-1]) / np.array(errs[1:]) >= 8)
    assert time.perf_counter() - t0 < 120.0


@pytest.mark.parametrize("argv", [
    ["solve", "--problem", "fourier-quadratic", "--target", "smoke"],
    ["verify", "surj", "--problem", "scalar-quadratic", "--samples", "20"],
    ["verify", "inverse", "--problem", "fourier-antiderivative", "--samples", "10"],
    ["verify", "inject", "--problem", "scalar-quadratic", "--samples", "100"],
    ["verify", "ift", "--samples", "10"],
    ["ode", "--ode", "linear-fourier", "--grid", "200"],
])
def test_c10_reproducibility(criterion, argv, tmp_path, capsys):
    criterion(10, "byte-identical reports on re-run: " + " ".join(argv[:2]))
    blobs = []
    for run_id in ("first", "second"):
        out = tmp_path / run_id
        assert main(argv + ["--seed", "13", "--out", str(out)]) == 0
        capsys.readouterr()
        blobs.append(tuple((out / f).read_bytes()
                           for f in ("summary.json", "detail.csv", "config.json")))
    assert blobs[0] == blobs[1]
