"""Parameterised equations f(x, p) = 0 and the distance estimate to S(p).

The parameter space is a box in R^m.  Solving for a member of
S(p) = {x : f(x, p) = 0} is a plain :func:`solver.solve` on f(., p) with
target 0; one solved witness upper-bounds the distance from x to S(p).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError, StepFailure
from .solver import TameProblem, solve
from .spaces import BoxDomain, EuclideanSpace, Point, UnboundedDomain, rho
from .verify import REL_TOL, VerificationReport, _finish, _map, scale_to_metric

BASE_TOL = 1e-12


@dataclass(frozen=True)
class ParamProblem:
    """f : X x P -> Y with right inverses R(x, p, v) sharing tame constants (c, d)."""

    name: str
    X: object
    Y: object
    f: object
    right_inverse: object
    c: tuple
    d: int
    domain: object
    x_bar: Point
    p_bar: tuple
    p_box: tuple
    description: str = ""

    def __post_init__(self):
        p_bar = tuple(float(v) for v in np.atleast_1d(self.p_bar))
        box = tuple((float(lo), float(hi)) for lo, hi in self.p_box)
        if len(box) != len(p_bar):
            raise ValueError("p_box must have one interval per parameter")
        if any(not lo <= pb <= hi for (lo, hi), pb in zip(box, p_bar)):
            raise ValueError("base parameter outside p_box")
        object.__setattr__(self, "p_bar", p_bar)
        object.__setattr__(self, "p_box", box)
        base = rho(self.Y, self.f(self.x_bar, np.asarray(p_bar)), self.Y.zero())
        if base > BASE_TOL:
            raise PreconditionError(f"f(x_bar, p_bar) has rho-norm {base:.3g} > {BASE_TOL}")

    def at(self, p):
        """The map f(., p) as a :class:`TameProblem`."""
        p = np.asarray(p, dtype=float)
        f, R = self.f, self.right_inverse
        return TameProblem(
            name=f"{self.name}@{p.tolist()}", X=self.X, Y=self.Y,
            f=lambda x: f(x, p), right_inverse=lambda x, v: R(x, p, v),
            c=self.c, d=self.d, domain=self.domain, x_ref=self.x_bar,
        )

    @property
    def image_metric(self):
        return self.at(self.p_bar).image_metric


def implicit_solve(problem, p, x_init=None, tol=1e-10, full=False, **kwargs):
    """A point of S(p) up to ``tol``, by solving f(., p) = 0 from ``x_init``.

    Raises :class:`StepFailure` when the solver does not converge.  With
    ``full=True`` the whole :class:`SolveReport` is returned instead.
    """
    prob = problem.at(p)
    x_init = problem.x_bar if x_init is None else x_init
    rep = solve(prob, problem.Y.zero(), x0=x_init, tol=tol, **kwargs)
    if full:
        return rep
    if not rep.converged:
        raise StepFailure(f"implicit solve at p={list(np.atleast_1d(p))}: "
                          f"{rep.status} {rep.message}")
    return rep.solution


@dataclass(frozen=True)
class IFTNeighbourhood:
    eps: float
    delta: float
    p_lo: tuple
    p_hi: tuple
    checked: int
    shrinks: int

    def sample_p(self, rng):
        return rng.uniform(self.p_lo, self.p_hi)

    def as_dict(self):
        return {"eps": self.eps, "delta": self.delta, "p_lo": list(self.p_lo),
                "p_hi": list(self.p_hi), "checked": self.checked, "shrinks": self.shrinks}


def _sample_x(problem, radius, rng):
    """x with rho(x_bar, x) < radius, in a random direction."""
    w = problem.X.random(rng)
    q = radius * rng.uniform(0.0, 1.0)
    if q == 0.0:
        return problem.x_bar
    return problem.x_bar + scale_to_metric(problem.X, w, q) * w


def ift_neighbourhood(problem, eps=None, samples=200, seed=0, max_shrinks=40):
    """Reconstruct eps, delta and O from the existence proof by sampling.

    eps is chosen with B(x_bar, 2 eps) inside U.  Starting from delta = eps/2
    and O = p_box, the sampled inclusion f(B(x_bar, delta), O) in B°(0, eps)
    (image metric) is tested; a failure at p = p_bar halves delta, any other
    failure halves O about p_bar.
    """
    m = problem.domain.m_u(problem.x_bar)
    if eps is None:
        eps = 0.99 * m / 2.0 if math.isfinite(m) else 0.5
    if not 0 < 2 * eps <= m:
        raise PreconditionError(f"B(x_bar, 2 eps) must lie in U (m_U = {m})")
    metric = problem.image_metric
    zero = problem.Y.zero()
    pb = np.asarray(problem.p_bar)
    lo = np.array([b[0] for b in problem.p_box])
    hi = np.array([b[1] for b in problem.p_box])
    delta = eps / 2.0
    rng = np.random.default_rng(seed)
    for shrinks in range(max_shrinks + 1):
        base_bad = other_bad = False
        for _ in range(samples):
            x = _sample_x(problem, delta, rng)
            p = rng.uniform(lo, hi)
            if not rho(metric, problem.f(x, pb), zero) < eps:
                base_bad = True
                break
            if not rho(metric, problem.f(x, p), zero) < eps:
                other_bad = True
        if not (base_bad or other_bad):
            return IFTNeighbourhood(float(eps), float(delta), tuple(lo.tolist()),
                                    tuple(hi.tolist()), samples, shrinks)
        if base_bad:
            delta /= 2.0
        else:
            lo = pb - (pb - lo) / 2.0
            hi = pb + (hi - pb) / 2.0
    raise PreconditionError("could not find a neighbourhood O by bisection")


class ImplicitReport(VerificationReport):
    """Per-sample (x, p, witness, lhs, rhs) rows of the distance estimate."""


def verify_ift_estimate(problem, neighbourhood=None, samples=100, seed=0,
                        rel_tol=REL_TOL, tol=BASE_TOL, pairs=None, p_grid=None):
    """Check d(x, S(p)) <= rho'(0, f(x, p)) on samples of U' x O.

    The distance is bounded above by rho(x, x_hat) for the solved witness
    x_hat.  The witness is itself only a tol-solution; its own estimate
    rho'(0, f(x_hat, p)) is added to the right-hand side.  With ``p_grid``
    the parameters cycle through a uniform grid of O instead of being random.
    """
    nb = neighbourhood or ift_neighbourhood(problem, seed=seed)
    metric = problem.image_metric
    zero = problem.Y.zero()
    if pairs is None:
        rng = np.random.default_rng(seed)
        grid = None if not p_grid else _parameter_grid(nb, p_grid)
        pairs = []
        for i in range(samples):
            x = _sample_x(problem, nb.delta, rng)
            pairs.append((x, nb.sample_p(rng) if grid is None else grid[i % len(grid)]))

    def run(item):
        i, (x, p) = item
        rhs = rho(metric, problem.f(x, p), zero)
        rep = implicit_solve(problem, p, x_init=x, tol=tol, full=True)
        row = {"index": i, "x": _flat(x), "p": list(np.atleast_1d(p)),
               "solved": _flat(rep.solution), "rhs": rhs}
        if not rep.converged:
            row.update(lhs=math.nan, slack=math.nan, status="inconclusive")
            return row
        lhs = rho(problem.X, x, rep.solution)
        witness = rho(metric, problem.f(rep.solution, p), zero)
        row.update(lhs=lhs, witness=witness,
                   slack=lhs - rhs * (1.0 + rel_tol) - witness)
        row["status"] = "violation" if row["slack"] > 0 else "ok"
        return row

    rows = _map(run, enumerate(pairs))
    rep = _finish("ift-estimate", rows, {"rel_tol": rel_tol, "solve_tol": tol},
                  {"neighbourhood": nb.as_dict(), "problem": problem.name})
    return ImplicitReport(**{k: getattr(rep, k) for k in
                             ("claim", "samples", "violations", "max_slack",
                              "tolerance", "rows", "inconclusive", "extra")})


def _parameter_grid(nb, count):
    """Interior points of a uniform product grid over O."""
    axes = [lo + (hi - lo) * (np.arange(count) + 0.5) / count
            for lo, hi in zip(nb.p_lo, nb.p_hi)]
    return [np.array(p) for p in np.stack(np.meshgrid(*axes, indexing="ij"), -1)
            .reshape(-1, len(axes))]


def _flat(x):
    data = np.asarray(x.data)
    return data.real.tolist() if not np.iscomplexobj(data) or not np.any(data.imag) \
        else {"re": data.real.tolist(), "im": data.imag.tolist()}


# -- demo families ---------------------------------------------------------------------

def scalar_quadratic_family(levels=16, radius=1.0, p_box=((-0.5, 0.5),)):
    """f(x, p) = x + x^2/4 - p on U = (-radius, radius), base point (0, 0)."""
    X = EuclideanSpace(dim=1, levels=levels)
    c = 1.0 / (1.0 - radius / 2.0)
    return ParamProblem(
        name="scalar-quadratic-family", X=X, Y=X,
        f=lambda x, p: Point(X, x.data + x.data ** 2 / 4.0 - p[0]),
        right_inverse=lambda x, p, v: Point(X, v.data / (1.0 + x.data / 2.0)),
        c=c, d=0, domain=BoxDomain(X, X.zero(), (radius,) * (levels + 1)),
        x_bar=X.zero(), p_bar=(0.0,), p_box=p_box,
        description="x + x^2/4 - p",
    )


def scalar_shift_family(levels=16, p_box=((-0.5, 0.5),)):
    """f(x, p) = x - p with unit constants: the estimate holds with equality."""
    X = EuclideanSpace(dim=1, levels=levels)
    return ParamProblem(
        name="scalar-shift-family", X=X, Y=X,
        f=lambda x, p: Point(X, x.data - p[0]),
        right_inverse=lambda x, p, v: v,
        c=1.0, d=0, domain=UnboundedDomain(), x_bar=X.zero(), p_bar=(0.0,),
        p_box=p_box, description="x - p",
    )


FAMILIES = {
    "scalar-quadratic-family": scalar_quadratic_family,
    "scalar-shift-family": scalar_shift_family,
}
