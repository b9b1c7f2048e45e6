"""Finite-difference directional derivatives, Dini derivatives and quadrature."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PreconditionError

DINI_STEPS = (1e-2, 1e-3, 1e-4)


def dir_derivative_fd(f, x, h, t, domain=None):
    """Richardson-extrapolated forward quotient (f(x+th) - f(x))/t.

    One extrapolation level: ``2 D(t/2) - D(t)``.  Verification only.
    """
    if t <= 0:
        raise ValueError("step must be positive")
    if domain is not None:
        for p in (x, x + t * h, x + (t / 2) * h):
            if not domain.contains(p):
                raise DomainError("difference stencil leaves the domain")
    fx = f(x)
    d_full = (f(x + t * h) - fx) / t
    d_half = (f(x + (t / 2) * h) - fx) / (t / 2)
    return 2.0 * d_half - d_full


@dataclass(frozen=True)
class ScalarPath:
    """A real function on [0, 1] evaluated on demand, with memoisation."""

    g: object
    resolution: float = 1e-4
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __call__(self, lam):
        lam = float(lam)
        if lam not in self._cache:
            self._cache[lam] = float(self.g(lam))
        return self._cache[lam]


def dini_upper(g, lam, t_grid=DINI_STEPS):
    """Upper Dini derivative estimate max_t (g(lam+t) - g(lam))/t over the grid.

    This is an estimator over a finite step grid, not a limit.
    """
    t_grid = tuple(float(t) for t in t_grid)
    if min(t_grid) <= 0:
        raise ValueError("steps must be positive")
    if not 0.0 < lam < 1.0 or lam + max(t_grid) > 1.0:
        raise ValueError(f"lambda={lam} with step {max(t_grid)} leaves (0, 1]")
    g0 = g(lam)
    return max((g(lam + t) - g0) / t for t in t_grid)


@dataclass
class DiniReport:
    hypothesis_holds: bool
    g1: float
    verdict: object  # bool, or None when the hypothesis was not met
    max_upper: float
    grid: tuple
    steps: tuple
    tolerance: float
    evidence: str = "sampled evidence"

    def as_dict(self):
        return {
            "hypothesis_holds": self.hypothesis_holds, "g1": self.g1,
            "verdict": self.verdict, "max_upper": self.max_upper,
            "grid": list(self.grid), "steps": list(self.steps),
            "tolerance": self.tolerance, "evidence": self.evidence,
        }


def dini_mvt_check(g, points=24, t_grid=DINI_STEPS, tol=1e-6):
    """Sampled check of the mean-value inequality for upper Dini derivatives.

    If every sampled g+(lam) on an interior grid is <= 1 + tol, the report
    asserts g(1) <= 1 + tol.  A failing hypothesis yields ``verdict=None``.
    """
    g0 = g(0.0)
    if abs(g0) > 1e-12:
        raise PreconditionError(f"g(0) = {g0} != 0")
    hi = 1.0 - max(t_grid)
    grid = tuple(np.linspace(hi / points, hi, points))
    uppers = [dini_upper(g, lam, t_grid) for lam in grid]
    max_upper = max(uppers)
    holds = max_upper <= 1.0 + tol
    g1 = g(1.0)
    verdict = (g1 <= 1.0 + tol) if holds else None
    return DiniReport(holds, g1, verdict, max_upper, grid, tuple(t_grid), tol)


def taylor_integral_remainder(fprime, x0, x1, quad_nodes=8, order=2):
    """int_0^1 f'(x0 + t(x1-x0))(x1-x0) dt by composite Gauss-Legendre.

    ``quad_nodes`` panels, each with an ``order``-point rule.
    """
    if quad_nodes < 2:
        raise ValueError("need at least two panels")
    step = x1 - x0
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, quad_nodes + 1)
    total = None
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        for xi, w in zip(nodes, weights):
            t = a + half * (xi + 1.0)
            term = (w * half) * fprime(x0 + t * step, step)
            total = term if total is None else total + term
    return total


def richardson_ratio(errors):
    """Successive error ratios e_k / e_{k+1}, used for order evidence."""
    e = np.asarray(errors, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return e[:-1] / e[1:]


def observed_order(ratio, refinement=2.0):
    return math.log(ratio) / math.log(refinement)
