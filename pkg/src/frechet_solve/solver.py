"""Orbit-based approximate surjectivity and exact-to-tolerance solves.

The inner iteration is the orbit x_{i+1} = x_i + t_i h_i of the variational
construction: h_i is a tame right-inverse direction (f'(x_i, h_i) = ybar), and
a step length t is accepted when

    t in (||x_{i+1} - x_i||_s / mu, eps)   and   |g(x_{i+1}) - g(x_i) - t ybar|_k < eps t,

with ||.||_s the norm of the Banach slice X_s whose unit ball is Pi_s.  The
orbit stops once the partial sum p = sum t_i enters (1 - eps, 1); the endpoint
then lies in x0 + sigma Pi_s and misses f(x0) + ybar by less than
eps (1 + |ybar|_k).

:func:`solve` restarts the orbit on the current residual.  Each restart works
in coordinates normalised by beta = |residual|_k, so that every pass removes a
fixed fraction of the residual regardless of its size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import PreconditionError, StepFailure
from .spaces import (
    LevelVector, Point, PredicateDomain, UnboundedDomain, graded_norm,
    pi_contains, reindex, rho, s_norm,
)

MAX_HALVINGS = 60


class CertificateViolation(AssertionError):
    """An orbit endpoint failed one of its a-posteriori certificates."""


@dataclass(frozen=True)
class TameProblem:
    """f : X -> Y with a right inverse h = R(x, v) of its directional derivative.

    The declared constants satisfy ||R(x, v)||_n <= c_n ||v||_{n+d} for
    n = 0..N_Y - d and x in ``domain``.  X carries exactly N_Y - d + 1 levels.
    """

    name: str
    X: object
    Y: object
    f: object
    right_inverse: object
    c: tuple
    d: int
    domain: object
    x_ref: Point
    derivative: object = None
    description: str = ""
    smoke_target: object = None

    def __post_init__(self):
        if self.X.levels != self.Y.levels - self.d:
            raise ValueError("domain space must carry N_Y - d levels")
        c = tuple(float(v) for v in np.broadcast_to(self.c, (self.X.levels + 1,)))
        object.__setattr__(self, "c", c)

    @property
    def image_metric(self):
        """Y with the reindexed seminorms c_n ||.||_{n+d}."""
        return reindex(self.Y, self.c, self.d)

    def rescaled(self, base, beta):
        """The map u -> (f(base + beta u) - f(base)) / beta with the same constants."""
        f, R, dom = self.f, self.right_inverse, self.domain
        fb = f(base)

        def f_scaled(u):
            return (f(base + beta * u) - fb) / beta

        def r_scaled(u, v):
            return R(base + beta * u, v)

        return replace(
            self, f=f_scaled, right_inverse=r_scaled, x_ref=self.X.zero(),
            domain=PredicateDomain(lambda u: dom.contains(base + beta * u), "rescaled"),
            derivative=None,
        )

    def describe(self):
        return {
            "name": self.name, "c": list(self.c), "d": self.d,
            "X": self.X.descriptor(), "Y": self.Y.descriptor(),
            "domain": self.domain.describe(), "description": self.description,
        }


@dataclass(frozen=True)
class StepParams:
    eps: float
    sigma: float = 1.0
    mu: float = None
    k: int = 0

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.mu is None:
            object.__setattr__(
                self, "mu", self.sigma * (2.0 - self.eps) / (2.0 * (1.0 - self.eps)))
        if not self.mu > self.sigma > (1.0 - self.eps) * self.mu:
            raise ValueError("need mu > sigma > (1 - eps) mu")


@dataclass(frozen=True)
class OrbitStep:
    t: float
    p: float
    step_snorm: float
    residual: float
    halvings: int


@dataclass(frozen=True)
class OrbitState:
    x0: Point     # base point of the orbit
    fx0: Point
    x: Point      # current iterate, relative to x0
    gx: Point     # g(x) = f(x0 + x) - f(x0)
    p: float = 0.0
    trace: tuple = ()

    @classmethod
    def start(cls, problem, x0):
        fx0 = problem.f(x0)
        return cls(x0, fx0, problem.X.zero(), fx0 - fx0)


@dataclass
class OrbitTrace:
    steps: list
    eps: float
    k: int
    mu: float
    sigma: float
    ybar_norm: float
    residual: float = 0.0
    ball_norm: float = 0.0
    length: float = 0.0

    @property
    def p(self):
        return self.steps[-1].p if self.steps else 0.0

    def as_dict(self, full=False):
        d = {
            "eps": self.eps, "k": self.k, "mu": self.mu, "sigma": self.sigma,
            "ybar_norm": self.ybar_norm, "steps": len(self.steps), "p": self.p,
            "residual": self.residual, "ball_norm": self.ball_norm,
            "length": self.length,
        }
        if full:
            d["trace"] = [
                {"t": s.t, "p": s.p, "step_snorm": s.step_snorm,
                 "residual": s.residual, "halvings": s.halvings}
                for s in self.steps
            ]
        return d


def tame_profile(problem, v):
    """s_n = c_n ||v||_{n+d}: the Pi-ball that contains R(x, v)."""
    return LevelVector(problem.image_metric.profile(v))


def _step_residual(Y, gu, gx, t, ybar, k):
    return graded_norm(Y, gu - gx - t * ybar, k)


def accept_step(g, x, u, t, ybar, params, s, domain=None, gx=None):
    """Membership u in S(x): t in (||u-x||_s / mu, eps), residual < eps t, u in U."""
    if t <= 0:
        raise ValueError("t must be positive")
    if not t < params.eps:
        return False
    X = x.space
    if not s_norm(X, u - x, s) / params.mu < t:
        return False
    if domain is not None and not domain.contains(u):
        return False
    gx = g(x) if gx is None else gx
    return _step_residual(ybar.space, g(u), gx, t, ybar, params.k) < params.eps * t


def orbit_step(state, ybar, problem, params, s=None):
    """One accepted orbit step, backtracking t from eps/2 by halving."""
    if s is None:
        s = tame_profile(problem, ybar)
    X, Y = problem.X, problem.Y
    x_amb = state.x0 + state.x
    h = problem.right_inverse(x_amb, ybar)
    h_snorm = s_norm(X, h, s)
    t = params.eps / 2.0
    for halvings in range(MAX_HALVINGS + 1):
        u = state.x + t * h
        u_amb = state.x0 + u
        if h_snorm * t / params.mu < t and problem.domain.contains(u_amb):
            gu = problem.f(u_amb) - state.fx0
            if _step_residual(Y, gu, state.gx, t, ybar, params.k) < params.eps * t:
                p = state.p + t
                residual = graded_norm(Y, gu - p * ybar, params.k)
                step = OrbitStep(t, p, h_snorm * t, residual, halvings)
                return replace(state, x=u, gx=gu, p=p, trace=state.trace + (step,))
        t *= 0.5
    raise StepFailure(
        f"no admissible step after {MAX_HALVINGS} halvings at p={state.p:.6g}",
        trace=state.trace)


def run_orbit(x0, ybar, problem, params, s=None, max_steps=100_000):
    """Run the orbit from x0 toward f(x0) + ybar until p enters (1 - eps, 1).

    Returns the endpoint (ambient coordinates) and its :class:`OrbitTrace`.
    Certificates checked on every run: residual < eps (1 + |ybar|_k), orbit
    length < mu p, and ||xhat - x0||_s <= sigma.
    """
    Y = problem.Y
    eps, k = params.eps, params.k
    Y.check_level(k)
    if ybar.is_zero():
        return x0, OrbitTrace([], eps, k, params.mu, params.sigma, 0.0)
    ynorm = graded_norm(Y, ybar, k)
    if not eps < ynorm:
        raise PreconditionError(f"eps={eps} must be below |ybar|_k={ynorm}")
    if s is None:
        s = tame_profile(problem, ybar)
    state = OrbitState.start(problem, x0)
    while state.p <= 1.0 - eps:
        if len(state.trace) >= max_steps:
            raise StepFailure("orbit exceeded max_steps", trace=state.trace)
        state = orbit_step(state, ybar, problem, params, s)
        if not state.trace[-1].residual < eps * state.p:
            raise CertificateViolation("partial residual exceeded eps * p")
    if not state.p < 1.0:
        raise CertificateViolation("partial sum overshot 1")
    steps = list(state.trace)
    trace = OrbitTrace(steps, eps, k, params.mu, params.sigma, ynorm)
    trace.residual = graded_norm(Y, state.gx - ybar, k)
    trace.length = float(sum(st.step_snorm for st in steps))
    trace.ball_norm = s_norm(problem.X, state.x, s)
    if not trace.residual < eps * (1.0 + ynorm):
        raise CertificateViolation(f"residual {trace.residual} >= eps (1 + |ybar|_k)")
    if not trace.length < params.mu * state.p:
        raise CertificateViolation(f"orbit length {trace.length} >= mu p")
    if not trace.ball_norm <= params.sigma:
        raise CertificateViolation(f"||xhat - x0||_s = {trace.ball_norm} > sigma")
    return state.x0 + state.x, trace


def pi_solve(problem, x0, y, s, eps1, k):
    """One orbit pass in the slice (X_s, ||.||_s) with sigma = 1.

    Returns xhat in x0 + Pi_s with |f(xhat) - y|_k < eps1, provided
    y - f(x0) lies in Pi_s of the reindexed image metric.
    """
    fx0 = problem.f(x0)
    ybar = y - fx0
    if ybar.is_zero():
        return x0
    if not pi_contains(problem.image_metric, ybar, s):
        raise PreconditionError("y - f(x0) is not in Pi_s")
    ynorm = graded_norm(problem.Y, ybar, k)
    if ynorm == 0:
        raise PreconditionError("|y - f(x0)|_k vanishes; raise k")
    eps = min(0.5, 0.5 * ynorm, 0.99 * eps1 / (1.0 + ynorm))
    xhat, _ = run_orbit(x0, ybar, problem, StepParams(eps, sigma=1.0, k=k), s=s)
    return xhat


STATUSES = ("converged", "step_failure", "max_iterations", "left_domain")


@dataclass
class SolveReport:
    solution: Point
    residual_rho: float
    residual_graded: list
    orbit_traces: list
    outer_iterations: int
    status: str
    rejected_passes: int = 0
    rho_prime_initial: float = 0.0
    m_u: float = math.nan
    radius_certified: bool = False
    displacement_rho: float = 0.0
    openness_ok: bool = True
    tol: float = 0.0
    message: str = ""
    history: list = field(default_factory=list)

    @property
    def converged(self):
        return self.status == "converged"

    def as_dict(self, trace=False):
        return {
            "status": self.status,
            "solution": _point_json(self.solution),
            "residual_rho": self.residual_rho,
            "residual_graded": list(map(float, self.residual_graded)),
            "outer_iterations": self.outer_iterations,
            "rejected_passes": self.rejected_passes,
            "rho_prime_initial": self.rho_prime_initial,
            "m_u": self.m_u if math.isfinite(self.m_u) else str(self.m_u),
            "radius_certified": self.radius_certified,
            "displacement_rho": self.displacement_rho,
            "openness_ok": self.openness_ok,
            "tol": self.tol,
            "message": self.message,
            "history": list(self.history),
            "orbits": [t.as_dict(full=trace) for t in self.orbit_traces],
        }


def _point_json(x):
    data = np.asarray(x.data)
    if np.iscomplexobj(data):
        return {"re": data.real.tolist(), "im": data.imag.tolist()}
    return data.tolist()


def solve(problem, y, x0=None, tol=1e-10, eps0=0.25, k0=None, max_outer=200,
          eps_min=1e-4):
    """Solve f(x) = y to rho(f(x), y) <= tol by restarted orbits.

    Each pass runs an orbit toward the current residual v = y - f(x) in
    coordinates scaled by beta = |v|_k.  A pass that increases the residual
    is rejected and eps halved.  The report records the radius condition
    rho'(f(x0), y) < m_U(x0) and the openness slack rho(x0, x) - rho'(f(x0), y).
    """
    X, Y = problem.X, problem.Y
    x0 = problem.x_ref if x0 is None else x0
    N = Y.levels
    k = N if k0 is None else int(k0)
    Y.check_level(k)
    fx = problem.f(x0)
    res = rho(Y, fx, y)
    rho_p = rho(problem.image_metric, fx, y)
    m_u = problem.domain.m_u(x0)
    report = SolveReport(x0, res, Y.profile(fx - y), [], 0, "converged",
                         rho_prime_initial=rho_p, m_u=m_u,
                         radius_certified=bool(rho_p < m_u), tol=tol, history=[res])
    x = x0
    eps = eps0
    while res > tol:
        if report.outer_iterations + report.rejected_passes >= max_outer:
            report.status = "max_iterations"
            break
        v = y - fx
        while graded_norm(Y, v, k) == 0.0 and k < N:
            k += 1
        beta = graded_norm(Y, v, k)
        scaled = problem.rescaled(x, beta)
        try:
            u, trace = run_orbit(X.zero(), v / beta, scaled, StepParams(eps, k=k))
        except StepFailure as exc:
            report.status, report.message = "step_failure", str(exc)
            break
        x_new = x + beta * u
        if not problem.domain.contains(x_new):
            report.status, report.message = "left_domain", "iterate left U"
            break
        f_new = problem.f(x_new)
        res_new = rho(Y, f_new, y)
        if res_new > res:
            report.rejected_passes += 1
            eps /= 2.0
            if eps < eps_min:
                report.status, report.message = "step_failure", "residual stopped decreasing"
                break
            continue
        report.orbit_traces.append(trace)
        report.outer_iterations += 1
        x, fx, res = x_new, f_new, res_new
        report.history.append(res)
        k = min(k + 1, N)
    report.solution = x
    report.residual_rho = res
    report.residual_graded = Y.profile(fx - y)
    report.displacement_rho = rho(X, x0, x)
    report.openness_ok = bool(report.displacement_rho <= rho_p + tol)
    return report
