"""Sampled falsification harnesses for the quantitative conclusions.

Each harness draws its inputs from a seeded generator up front, evaluates the
samples (optionally on a thread pool) and aggregates them in input order, so a
report depends only on the seed.  A pass means "no violation found in N
samples", never a proof.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .calculus import DINI_STEPS, ScalarPath, dini_mvt_check
from .errors import DomainError, PreconditionError, RadiusError
from .solver import solve
from .spaces import rho, sample_in_pi_ball

REL_TOL = 1e-6


def worker_count():
    try:
        return max(1, int(os.environ.get("FRECHET_SOLVE_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    items = list(items)
    workers = min(worker_count(), len(items)) or 1
    if workers == 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class VerificationReport:
    claim: str
    samples: int
    violations: list
    max_slack: float
    tolerance: dict
    rows: list = field(default_factory=list)
    inconclusive: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.violations = sorted(self.violations, key=lambda v: (-v["slack"], v["index"]))

    @property
    def verdict(self):
        if self.violations:
            return "fail"
        return "inconclusive" if self.inconclusive else "pass"

    @property
    def passed(self):
        return self.verdict == "pass"

    @property
    def summary(self):
        if self.violations:
            return f"{len(self.violations)} violations in {self.samples} samples"
        done = self.samples - self.inconclusive
        return f"no violation found in {done} samples" + (
            f" ({self.inconclusive} inconclusive)" if self.inconclusive else "")

    def as_dict(self):
        return {
            "claim": self.claim, "samples": self.samples, "verdict": self.verdict,
            "summary": self.summary, "max_slack": self.max_slack,
            "inconclusive": self.inconclusive, "tolerance": self.tolerance,
            "violations": self.violations, **self.extra,
        }


def _finish(claim, rows, tolerance, extra=None):
    slacks = [r["slack"] for r in rows if r["status"] != "inconclusive"]
    return VerificationReport(
        claim=claim, samples=len(rows),
        violations=[r for r in rows if r["status"] == "violation"],
        max_slack=max(slacks) if slacks else -math.inf,
        tolerance=tolerance, rows=rows,
        inconclusive=sum(r["status"] == "inconclusive" for r in rows),
        extra=extra or {},
    )


def scale_to_metric(family, w, q):
    """lam >= 0 with rho_family(0, lam w) = q, in closed form.

    Each level contributes 2^-n a lam / (1 + a lam); solve for the level that
    reaches q first.
    """
    a = family.profile_array(np.asarray(w.data))
    best = math.inf
    for n, an in enumerate(a):
        if an <= 0:
            continue
        cap = q * 2.0 ** n
        if cap < 1.0:
            best = min(best, cap / (an * (1.0 - cap)))
    if not math.isfinite(best):
        raise ValueError("direction has no finite scaling to the requested radius")
    return best


def sample_rho_ball(space, center, radius, rng, family=None):
    """A point at rho-distance U(0,1) * radius from ``center`` in a random direction."""
    family = family or space
    w = space.random(rng)
    q = radius * rng.uniform(0.0, 1.0)
    if q == 0.0:
        return center
    return center + scale_to_metric(family, w, q) * w


# -- surjectivity -----------------------------------------------------------------

def verify_surjectivity(problem, x=None, r=None, samples=100, seed=0, tol=1e-10,
                        check_tol=REL_TOL, targets=None):
    """Check f(B(x, r)) contains B°(f(x), r) (image ball in the reindexed metric).

    For each sampled target y with rho'(f(x), y) < r the solver is started at x
    and its output must satisfy rho(x, x_hat) <= r + check_tol.
    """
    x = problem.x_ref if x is None else x
    m = problem.domain.m_u(x)
    r = m / 2.0 if r is None else float(r)
    if not 0.0 < r < m:
        raise RadiusError(f"need 0 < r < m_U(x) = {m}, got r = {r}")
    fx = problem.f(x)
    metric = problem.image_metric
    if targets is None:
        rng = np.random.default_rng(seed)
        targets = [sample_rho_ball(problem.Y, fx, r, rng, family=metric)
                   for _ in range(samples)]

    def run(item):
        i, y = item
        rp = rho(metric, fx, y)
        rep = solve(problem, y, x0=x, tol=tol)
        lhs = rho(problem.X, x, rep.solution)
        row = {"index": i, "rho_prime": rp, "lhs": lhs, "rhs": r,
               "slack": lhs - r - check_tol, "solver": rep.status,
               "residual": rep.residual_rho}
        if rp >= r:
            row["status"] = "skipped"
        elif not rep.converged:
            # the claim asserts a preimage exists; not finding one is a failure
            row["status"] = "violation"
            row["slack"] = max(row["slack"], rep.residual_rho)
        else:
            row["status"] = "violation" if row["slack"] > 0 else "ok"
        return row

    rows = _map(run, enumerate(targets))
    return _finish("surjectivity", rows, {"check_tol": check_tol, "solve_tol": tol},
                   {"r": r, "m_u": m, "problem": problem.name})


# -- inverse Lipschitz -------------------------------------------------------------

def neighbourhood_radius(problem):
    """Radius of the rho-ball V around x_ref used as the invertibility set."""
    return problem.domain.m_u(problem.x_ref) / 4.0


def sample_pairs(problem, samples, seed=0):
    """Pairs (u, v) = (f(a), f(b)) with a, b in V."""
    rng = np.random.default_rng(seed)
    rad = neighbourhood_radius(problem)
    if not math.isfinite(rad):
        rad = 0.25
    pairs = []
    for _ in range(samples):
        a = sample_rho_ball(problem.X, problem.x_ref, rad, rng)
        b = sample_rho_ball(problem.X, problem.x_ref, rad, rng)
        pairs.append((problem.f(a), problem.f(b)))
    return pairs


def verify_inverse_lipschitz(problem, pairs=None, samples=200, seed=0, rel_tol=REL_TOL,
                             tol=1e-12, constants=None):
    """Check ||f^-1 u - f^-1 v||_n <= c_n ||u - v||_{n+d} (1 + rel_tol), n <= N - d.

    ``constants`` overrides the claimed c_n (the solver still uses the
    problem's own).  Both inverses are computed by solving from x_ref; the
    solver residuals enter the right-hand side as c_n(||r_u|| + ||r_v||)_{n+d}.
    """
    X, Y, d = problem.X, problem.Y, problem.d
    c = np.asarray(problem.c if constants is None else
                   np.broadcast_to(constants, (X.levels + 1,)), dtype=float)
    pairs = sample_pairs(problem, samples, seed) if pairs is None else list(pairs)
    top = Y.levels - d
    cache = {}

    def inverse(y):
        key = (id(y.space), np.asarray(y.data).tobytes())
        if key not in cache:
            cache[key] = solve(problem, y, tol=tol)
        return cache[key]

    def run(item):
        i, (u, v) = item
        ru, rv = inverse(u), inverse(v)
        row = {"index": i, "level": -1, "lhs": 0.0, "rhs": 0.0, "slack": -math.inf}
        if not (ru.converged and rv.converged):
            row.update(status="inconclusive", slack=math.nan)
            return row
        dx = X.profile(ru.solution - rv.solution)
        dy = Y.profile(u - v)
        res = np.asarray(ru.residual_graded) + np.asarray(rv.residual_graded)
        worst = None
        for n in range(top + 1):
            assert n + d <= Y.levels, "read above the top seminorm level"
            rhs = c[n] * (dy[n + d] * (1.0 + rel_tol) + res[n + d])
            slack = dx[n] - rhs
            if worst is None or slack > worst[3]:
                worst = (n, dx[n], rhs, slack)
        row.update(level=worst[0], lhs=float(worst[1]), rhs=float(worst[2]),
                   slack=float(worst[3]))
        row["status"] = "violation" if row["slack"] > 0 else "ok"
        return row

    rows = _map(run, enumerate(pairs))
    return _finish("inverse-lipschitz", rows, {"rel_tol": rel_tol, "solve_tol": tol},
                   {"levels_checked": top + 1, "c": c.tolist(), "problem": problem.name,
                    "v_radius": neighbourhood_radius(problem)})


# -- injectivity conditions --------------------------------------------------------

LOWER, DERIV, INJECT = "lower-bound", "derivative-lipschitz", "injectivity"


def injectivity_constants(c_r, cprime_r):
    """(delta_bound, delta, c_eqq4) with delta = delta_bound / 2.

    c_eqq4 is the constant of the injectivity estimate on the delta-ball.
    """
    if c_r <= 0 or cprime_r < 0:
        raise DomainError("declared constants must be positive")
    delta_bound = math.inf if cprime_r == 0 else 1.0 / (2.0 * c_r * cprime_r)
    delta = delta_bound / 2.0
    c4 = c_r if cprime_r == 0 else 1.0 / (1.0 / c_r - 2.0 * delta * cprime_r)
    return delta_bound, delta, c4


def _sample_in_box(problem, rng, cap=None):
    X = problem.X
    radii = np.array(getattr(problem.domain, "radii", [math.inf] * (X.levels + 1)))
    if cap is not None:
        radii = np.minimum(radii, cap)
    radii = np.where(np.isfinite(radii), radii, 1.0) * (1.0 - 1e-9)
    return problem.x_ref + sample_in_pi_ball(X, radii, rng)


def verify_injectivity_conditions(problem, samples=1000, r=0, seed=0, c=None,
                                  cprime=None, delta=None, rel_tol=1e-9):
    """Check the derivative conditions for local injectivity on sampled x, z, h.

    Conditions, as they appear in the rows:

    ``lower-bound``: ||h||_n <= c_n ||f'(x)h||_n.
    ``derivative-lipschitz``: ||f'(x)h - f'(z)h||_n
    <= c'_n (||x-z||_r ||h||_n + ||x-z||_n ||h||_r).
    ``injectivity``: ||x0 - x1||_r <= c_eqq4 ||f(x0) - f(x1)||_r, sampled on the
    delta-ball around x_ref.
    """
    if problem.derivative is None:
        raise PreconditionError("problem declares no analytic derivative")
    X = problem.X
    L = X.levels + 1
    c = np.asarray(np.broadcast_to(problem.c if c is None else c, (L,)), dtype=float)
    cp = np.asarray(np.broadcast_to(0.0 if cprime is None else cprime, (L,)), dtype=float)
    if np.any(c <= 0) or np.any(cp < 0):
        raise DomainError("declared constants must be positive")
    X.check_level(r)
    raw_bound, _, _ = injectivity_constants(c[r], cp[r])
    # an infinite bound (c' = 0) is capped at the domain radius
    delta_bound = min(raw_bound, getattr(problem.domain, "radii", [math.inf] * L)[r])
    if delta is None:
        delta = delta_bound / 2.0 if math.isfinite(delta_bound) else 1.0
    if not delta < raw_bound:
        raise RadiusError(f"delta = {delta} must be below delta_bound = {raw_bound}")
    c4 = float(c[r] if cp[r] == 0 else 1.0 / (1.0 / c[r] - 2.0 * delta * cp[r]))
    delta_bound, delta = float(delta_bound), float(delta)
    rng = np.random.default_rng(seed)
    items = []
    for _ in range(samples):
        x, z = _sample_in_box(problem, rng), _sample_in_box(problem, rng)
        h = X.random(rng) * rng.uniform(0.1, 1.0)
        cap = np.full(L, math.inf)
        cap[r] = delta
        x0, x1 = _sample_in_box(problem, rng, cap), _sample_in_box(problem, rng, cap)
        items.append((x, z, h, x0, x1))
    fprime = problem.derivative
    c_est = np.zeros(L)
    cp_est = np.zeros(L)
    rows = []
    for i, (x, z, h, x0, x1) in enumerate(items):
        dxh, dzh = fprime(x, h), fprime(z, h)
        ph, pxh, pzh = X.profile(h), X.profile(dxh), X.profile(dzh)
        pd, pxz = X.profile(dxh - dzh), X.profile(x - z)
        with np.errstate(divide="ignore", invalid="ignore"):
            c_est = np.fmax(c_est, np.where(pxh > 0, ph / pxh, np.where(ph > 0, np.inf, 0)))
            bracket = pxz[r] * ph + pxz * ph[r]
            cp_est = np.fmax(cp_est, np.where(bracket > 0, pd / bracket, 0.0))
        s1 = ph - c * pxh * (1.0 + rel_tol)
        # rounding in f'(x)h - f'(z)h is absorbed relative to the terms themselves
        s2 = pd - (cp * bracket * (1.0 + rel_tol) + 1e-15 * (pxh + pzh))
        lhs4 = X.profile(x0 - x1)[r]
        rhs4 = c4 * X.profile(problem.f(x0) - problem.f(x1))[r] * (1.0 + rel_tol)
        s4 = lhs4 - rhs4
        for cond, slack in ((LOWER, s1), (DERIV, s2), (INJECT, np.array([s4]))):
            n = int(np.argmax(slack))
            val = float(slack[n])
            rows.append({"index": i, "condition": cond, "level": n if cond != INJECT else r,
                         "slack": val, "status": "violation" if val > 0 else "ok"})
    return _finish("injectivity", rows, {"rel_tol": rel_tol},
                   {"c_est": c_est.tolist(), "cprime_est": float(np.max(cp_est)),
                    "cprime_est_levels": cp_est.tolist(), "delta_bound": delta_bound,
                    "delta": delta, "c_eqq4": c4, "r": r, "problem": problem.name})


# -- Lipschitz path -------------------------------------------------------------------

def verify_lipschitz_path(problem, u, v, levels=None, tol=1e-12, dini_tol=REL_TOL,
                          points=24, t_grid=DINI_STEPS, constants=None):
    """Mean-value check of g(lam) = ||f^-1(u + lam(v-u)) - f^-1(u)||_n / (c_n ||v-u||_{n+d}).

    Every evaluation of g is a solve, started from x_ref at lam = 0 and from a
    tangent step off the nearest solved parameter below lam otherwise.  The normalised path must have
    sampled upper Dini derivatives <= 1 and g(1) <= 1, for each level in ``levels``.
    """
    X, Y, d = problem.X, problem.Y, problem.d
    c = np.asarray(problem.c if constants is None else
                   np.broadcast_to(constants, (X.levels + 1,)), dtype=float)
    levels = list(range(Y.levels - d + 1)) if levels is None else list(levels)
    dy = Y.profile(v - u)
    solved = {}
    failures = []

    def point(lam):
        if lam not in solved:
            # warm start from the nearest parameter already solved below lam,
            # moved along the tangent R(x, v - u)
            below = [m for m in solved if m < lam]
            start = problem.x_ref
            if below:
                lam0 = max(below)
                start = solved[lam0]
                guess = start + (lam - lam0) * problem.right_inverse(start, v - u)
                if problem.domain.contains(guess):
                    start = guess
            rep = solve(problem, u + lam * (v - u), x0=start, tol=tol)
            if not rep.converged:
                failures.append((lam, rep.status))
            solved[lam] = rep.solution
        return solved[lam]

    base = point(0.0)
    per_level = []
    for n in levels:
        scale = c[n] * dy[n + d]
        if scale == 0.0:
            per_level.append({"level": n, "trivial": True, "verdict": True,
                              "g1": 0.0, "max_upper": 0.0, "hypothesis_holds": True})
            continue
        g = ScalarPath(lambda lam, n=n, scale=scale:
                       X.profile(point(lam) - base)[n] / scale)
        rep = dini_mvt_check(g, points=points, t_grid=t_grid, tol=dini_tol)
        per_level.append({"level": n, "trivial": False, **rep.as_dict()})
    inconclusive = bool(failures)
    ok = all(p["verdict"] is True for p in per_level)
    return {
        "claim": "lipschitz-path", "levels": per_level,
        "verdict": "inconclusive" if inconclusive else ("pass" if ok else "fail"),
        "max_g1": max(p["g1"] for p in per_level),
        "max_upper": max(p["max_upper"] for p in per_level),
        "solves": len(solved), "failures": failures, "tolerance": dini_tol,
        "evidence": "sampled evidence",
    }


def verify_lipschitz_segments(problem, segments=20, seed=0, **kwargs):
    """verify_lipschitz_path on ``segments`` random pairs from f(V).

    The interior Dini grid defaults to 12 points here (24 for a single path).
    """
    kwargs.setdefault("points", 12)
    pairs = sample_pairs(problem, segments, seed)
    reports = _map(lambda uv: verify_lipschitz_path(problem, *uv, **kwargs), pairs)
    rows = []
    for i, rep in enumerate(reports):
        status = {"pass": "ok", "fail": "violation"}.get(rep["verdict"], "inconclusive")
        rows.append({"index": i, "g1": rep["max_g1"], "max_upper": rep["max_upper"],
                     "slack": rep["max_g1"] - 1.0 - rep["tolerance"], "status": status})
    return _finish("lipschitz-path", rows, {"dini_tol": kwargs.get("dini_tol", REL_TOL)},
                   {"problem": problem.name})


__all__ = [
    "VerificationReport", "verify_surjectivity", "verify_inverse_lipschitz",
    "verify_injectivity_conditions", "verify_lipschitz_path",
    "verify_lipschitz_segments", "injectivity_constants", "sample_pairs",
    "sample_rho_ball", "scale_to_metric", "neighbourhood_radius",
]
