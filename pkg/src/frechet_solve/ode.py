"""Cauchy problems z'(s) = r f(rs, z(s)), z(0) = x0, solved as F(z, r) = 0.

Curves live on the uniform grid of T+1 nodes in [-1, 1] (T even, so s = 0
is a node).  A C^1 curve stores node values and node derivatives side by side;
as a point of the solver it is a :class:`GridSpace` with 2(T+1) rows.  The
image space C([-1, 1], X) x X is a :class:`GridSpace` with T+2 rows, the last
one holding the initial value.

The linearised equation u' = r D_x f(rs, z(s)) u + v, u(0) = v0 is integrated
by classical RK4 from s = 0 outwards in both directions.  The Jacobians at all
nodes and midpoints come from one batched call; the march itself is sequential.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalFailure, PreconditionError
from .implicit import ParamProblem, implicit_solve
from .spaces import (BoxDomain, EuclideanSpace, FourierSpace, GridSpace, Point,
                     PredicateDomain, UnboundedDomain)

GRONWALL_SLACK = 1e-6
INSTABILITY_FACTOR = 10.0

# midpoint weights of the cubic through four equispaced nodes
_MID_CENTRED = np.array([-1.0, 9.0, 9.0, -1.0]) / 16.0
_MID_LEFT = np.array([5.0, 15.0, -5.0, 1.0]) / 16.0


def grid_nodes(T):
    if T < 4 or T % 2:
        raise ValueError("grid count T must be even and >= 4")
    return np.linspace(-1.0, 1.0, T + 1)


def grid_count(step):
    """Even node count T for a target step on [-1, 1]."""
    T = int(round(2.0 / step))
    return T + (T % 2)


@dataclass(frozen=True)
class GridFunction:
    """Node values (and, for C^1 curves, node derivatives) on [-1, 1]."""

    space: object
    values: np.ndarray
    derivs: np.ndarray = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=self.space.dtype)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.derivs is not None:
            der = np.array(self.derivs, dtype=self.space.dtype)
            if der.shape != vals.shape:
                raise ValueError("values and derivatives must share a shape")
            der.setflags(write=False)
            object.__setattr__(self, "derivs", der)

    @property
    def T(self):
        return self.values.shape[0] - 1

    @property
    def nodes(self):
        return grid_nodes(self.T)

    @property
    def origin(self):
        return self.T // 2

    def at_origin(self):
        return Point(self.space, self.values[self.origin])

    def sup_profile(self):
        return np.max(self.space.profile_array(self.values), axis=0)

    def c1_profile(self):
        if self.derivs is None:
            raise ValueError("curve carries no derivative values")
        both = np.concatenate([self.values, self.derivs])
        return np.max(self.space.profile_array(both), axis=0)

    def sup_seminorm(self, n):
        self.space.check_level(n)
        return float(self.sup_profile()[n])

    def c1_seminorm(self, n):
        """max over nodes of max(||z(t)||_n, ||z'(t)||_n)."""
        self.space.check_level(n)
        return float(self.c1_profile()[n])

    def __sub__(self, other):
        der = None if self.derivs is None or other.derivs is None \
            else self.derivs - other.derivs
        return GridFunction(self.space, self.values - other.values, der)


def c1_space(space, T):
    return GridSpace(base=space, rows=2 * (T + 1))


def image_space(space, T):
    return GridSpace(base=space, rows=T + 2)


def to_c1_point(z):
    return Point(c1_space(z.space, z.T), np.concatenate([z.values, z.derivs]))


def from_c1_point(space, p):
    half = p.data.shape[0] // 2
    return GridFunction(space, p.data[:half], p.data[half:])


def to_image_point(curve, v0):
    return Point(image_space(curve.space, curve.T),
                 np.concatenate([curve.values, v0.data[None]]))


def from_image_point(space, p):
    return GridFunction(space, p.data[:-1]), Point(space, p.data[-1])


@dataclass(frozen=True)
class CauchyProblem:
    """x'(t) = f(t, x), x(0) = x0 with ||D_x f(t, x) h||_n <= c_n ||h||_n.

    ``f(t, x)`` and ``jac(t, x)`` act on batches: ``t`` of shape (K,), ``x``
    of shape (K, m); ``jac`` returns (K, m, m).
    """

    name: str
    space: object
    f: object
    jac: object
    c: tuple
    r0: float
    x0: Point
    domain: object = UnboundedDomain()
    closed_form: object = None
    description: str = ""

    def __post_init__(self):
        c = tuple(float(v) for v in np.broadcast_to(self.c, (self.space.levels + 1,)))
        if min(c) < 0 or not self.r0 > 0:
            raise ValueError("need c_n >= 0 and r0 > 0")
        object.__setattr__(self, "c", c)

    def f_point(self, t, x):
        return Point(self.space, self.f(np.array([t]), x.data[None])[0])

    def dfx(self, t, x, h):
        """D_x f(t, x)(h)."""
        J = self.jac(np.array([t]), x.data[None])[0]
        return Point(self.space, J @ h.data)

    def check_condition(self, samples=200, seed=0, rel_tol=1e-12):
        """Largest sampled ||D_x f h||_n / (c_n ||h||_n) minus one (<= 0 means held)."""
        rng = np.random.default_rng(seed)
        worst = -math.inf
        for _ in range(samples):
            t = rng.uniform(-self.r0, self.r0)
            x = self.x0 + 0.5 * self.space.random(rng) * _domain_scale(self)
            if not self.domain.contains(x):
                continue
            h = self.space.random(rng)
            lhs = self.space.profile(self.dfx(t, x, h))
            rhs = np.asarray(self.c) * self.space.profile(h)
            worst = max(worst, float(np.max(lhs - rhs * (1 + rel_tol))))
        return worst

    def describe(self):
        return {"name": self.name, "c": list(self.c), "r0": self.r0,
                "X": self.space.descriptor(), "domain": self.domain.describe(),
                "description": self.description}


def _domain_scale(problem):
    radii = getattr(problem.domain, "radii", None)
    return 1.0 if radii is None else min(radii)


def _check_inputs(z, r, problem):
    if not abs(r) < problem.r0:
        raise DomainError(f"|r| = {abs(r)} must be below r0 = {problem.r0}")
    dom = problem.domain
    if isinstance(dom, UnboundedDomain):
        return
    if isinstance(dom, BoxDomain):
        prof = problem.space.profile_array(z.values - dom.center.data)
        if np.all(prof < np.asarray(dom.radii)):
            return
    elif all(dom.contains(Point(problem.space, v)) for v in z.values):
        return
    raise DomainError("curve leaves the domain U")


def F_eval(z, r, problem):
    """(s -> z'(s) - r f(rs, z(s)), z(0))."""
    _check_inputs(z, r, problem)
    s = z.nodes
    res = z.derivs - r * problem.f(r * s, z.values)
    return GridFunction(problem.space, res), z.at_origin()


def DzF_apply(z, r, u, problem):
    """(u'(s) - r D_x f(rs, z(s)) u(s), u(0))."""
    _check_inputs(z, r, problem)
    J = problem.jac(r * z.nodes, z.values)
    res = u.derivs - r * np.einsum("kij,kj->ki", J, u.values)
    return GridFunction(problem.space, res), u.at_origin()


def gronwall_constant(n, problem):
    """1 + (1 + r0 c_n) e^{r0 c_n}."""
    problem.space.check_level(n)
    a = problem.r0 * problem.c[n]
    return 1.0 + (1.0 + a) * math.exp(a)


def _midpoints_hermite(values, derivs, h):
    return 0.5 * (values[:-1] + values[1:]) + h * (derivs[:-1] - derivs[1:]) / 8.0


def _midpoints_cubic(v):
    """Cubic interpolation of node data at the T interval midpoints."""
    T = v.shape[0] - 1
    out = np.empty((T,) + v.shape[1:], dtype=v.dtype)
    w = _MID_CENTRED.reshape((4,) + (1,) * (v.ndim - 1))
    if T >= 3:
        out[1:T - 1] = (w[0] * v[0:T - 2] + w[1] * v[1:T - 1]
                        + w[2] * v[2:T] + w[3] * v[3:T + 1])
    left = _MID_LEFT.reshape(w.shape)
    out[0] = np.sum(left * v[0:4], axis=0)
    out[T - 1] = np.sum(left[::-1] * v[T - 3:T + 1], axis=0)
    return out


def _rk4_march(A0, Am, A1, v0, vm, v1, dt, u_start):
    """Classical RK4 for u' = A(s) u + v(s) with node/midpoint data per step."""
    out = np.empty((A0.shape[0] + 1, u_start.size), dtype=np.result_type(A0, v0, u_start))
    out[0] = u = u_start
    half = dt / 2
    for k in range(A0.shape[0]):
        a, am, vk, vmk = A0[k], Am[k], v0[k], vm[k]
        k1 = a @ u + vk
        k2 = am @ (u + half * k1) + vmk
        k3 = am @ (u + half * k2) + vmk
        k4 = A1[k] @ (u + dt * k3) + v1[k]
        u = u + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k + 1] = u
    return out


def linear_right_inverse(z, r, v, v0, problem, check=True):
    """Solve u' = r D_x f(rs, z(s)) u + v(s), u(0) = v0 by RK4 from s = 0.

    Raises :class:`NumericalFailure` when the C^1 seminorm of u exceeds
    ten times the Gronwall bound at some level.
    """
    _check_inputs(z, r, problem)
    T, o = z.T, z.origin
    h = 2.0 / T
    s = z.nodes
    zm = _midpoints_hermite(z.values, z.derivs, h)
    J = r * problem.jac(r * np.concatenate([s, 0.5 * (s[:-1] + s[1:])]),
                        np.concatenate([z.values, zm]))
    An, Am = J[:T + 1], J[T + 1:]
    vn = np.asarray(v.values)
    vm = _midpoints_cubic(vn)
    values = np.empty(z.values.shape, dtype=np.result_type(J, vn, v0.data))
    # forward on [0, 1]
    u0 = np.asarray(v0.data)
    values[o:] = _rk4_march(An[o:T], Am[o:T], An[o + 1:], vn[o:T], vm[o:T], vn[o + 1:], h, u0)
    # backward on [-1, 0]
    values[:o + 1] = _rk4_march(An[o:0:-1], Am[o - 1::-1], An[o - 1::-1],
                                vn[o:0:-1], vm[o - 1::-1], vn[o - 1::-1], -h, u0)[::-1]
    derivs = np.einsum("kij,kj->ki", An, values) + vn
    u = GridFunction(problem.space, values.astype(problem.space.dtype, copy=False),
                     derivs.astype(problem.space.dtype, copy=False))
    if check:
        bound = np.maximum(v.sup_profile(), problem.space.profile(v0))
        gron = np.array([gronwall_constant(n, problem) for n in range(problem.space.levels + 1)])
        if not np.all(np.isfinite(u.c1_profile())) or np.any(
                u.c1_profile() > INSTABILITY_FACTOR * gron * bound + GRONWALL_SLACK):
            raise NumericalFailure("linearised march grew beyond 10x the Gronwall bound")
    return u


def gronwall_excess(u, v, v0, problem):
    """c1(u)_n - G_n max(sup ||v||_n, ||v0||_n) per level (<= slack means respected)."""
    bound = np.maximum(v.sup_profile(), problem.space.profile(v0))
    gron = np.array([gronwall_constant(n, problem) for n in range(problem.space.levels + 1)])
    return u.c1_profile() - gron * bound


def constant_curve(problem, T):
    vals = np.repeat(np.asarray(problem.x0.data)[None], T + 1, axis=0)
    return GridFunction(problem.space, vals, np.zeros_like(vals))


def as_param_problem(problem, T):
    """F(z, r) = (z' - r f(rs, z), z(0) - x0) as a :class:`ParamProblem` in r.

    The initial condition is shifted by x0 so that (constant x0, r = 0) is
    an exact zero.  Tame constants are the Gronwall constants, d = 0.
    """
    sp = problem.space
    Xg, Yg = c1_space(sp, T), image_space(sp, T)

    def F(zp, p):
        z = from_c1_point(sp, zp)
        curve, z0 = F_eval(z, float(p[0]), problem)
        return to_image_point(curve, z0 - problem.x0)

    def R(zp, p, vp):
        z = from_c1_point(sp, zp)
        v, v0 = from_image_point(sp, vp)
        return to_c1_point(linear_right_inverse(z, float(p[0]), v, v0, problem))

    def inside(zp):
        try:
            _check_inputs(from_c1_point(sp, zp), 0.0, problem)
        except DomainError:
            return False
        return True

    c = tuple(gronwall_constant(n, problem) for n in range(sp.levels + 1))
    return ParamProblem(
        name=f"cauchy-{problem.name}", X=Xg, Y=Yg, f=F, right_inverse=R, c=c, d=0,
        domain=PredicateDomain(inside, "curves in U"),
        x_bar=to_c1_point(constant_curve(problem, T)), p_bar=(0.0,),
        p_box=((-problem.r0, problem.r0),),
    )


def cauchy_solve(problem, r, grid=2000, tol=1e-10, full=False):
    """z with z'(s) = r f(rs, z(s)), z(0) = x0 on [-1, 1], via the implicit solver.

    ``tol`` bounds every seminorm of the residual F(z, r).  Returns a
    :class:`GridFunction`; ``full=True`` also returns the solve report.
    """
    if not 0.0 < r < problem.r0:
        raise PreconditionError(f"need 0 < r < r0 = {problem.r0}")
    pp = as_param_problem(problem, grid)
    # rho <= tau bounds every seminorm at level n by 2^n tau / (1 - 2^n tau)
    tau = tol * 2.0 ** -problem.space.levels / (1.0 + tol)
    rep = implicit_solve(pp, (r,), tol=tau, full=True)
    if not rep.converged:
        raise NumericalFailure(f"cauchy solve: {rep.status} {rep.message}")
    z = from_c1_point(problem.space, rep.solution)
    return (z, rep) if full else z


def to_time_curve(z, r):
    """x(t) = z(t/r) on t in [-r, r], with x'(t) = z'(s)/r."""
    return r * z.nodes, GridFunction(z.space, z.values, z.derivs / r)


def rk4_reference(problem, r, grid=2000):
    """Direct RK4 for z' = r f(rs, z), z(0) = x0, outward from s = 0."""
    T = grid
    s = grid_nodes(T)
    o = T // 2
    h = 2.0 / T
    f = problem.f
    x0 = np.asarray(problem.x0.data)
    vals = np.empty((T + 1,) + x0.shape, dtype=problem.space.dtype)
    vals[o] = x0
    scale = INSTABILITY_FACTOR * (1.0 + np.max(np.abs(x0))) * math.exp(problem.r0 * max(problem.c) + 1)

    def g(si, z):
        return r * f(np.array([r * si]), z[None])[0]

    for direction in (1, -1):
        dt = direction * h
        z = x0
        k = o
        while 0 < k < T or (k == o):
            si = s[k]
            k1 = g(si, z)
            k2 = g(si + dt / 2, z + dt / 2 * k1)
            k3 = g(si + dt / 2, z + dt / 2 * k2)
            k4 = g(si + dt, z + dt * k3)
            z = z + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            k += direction
            if not np.all(np.isfinite(z)) or np.max(np.abs(z)) > scale:
                raise NumericalFailure("reference RK4 became unstable")
            vals[k] = z
            if k in (0, T):
                break
    derivs = r * f(r * s, vals)
    return GridFunction(problem.space, vals, derivs)


# -- registry -----------------------------------------------------------------------

ODE_LEVELS = 3


def linear_scalar(a=1.0, x0=1.0, r0=1.0):
    X = EuclideanSpace(dim=1, levels=ODE_LEVELS)
    return CauchyProblem(
        name="linear-scalar", space=X,
        f=lambda t, x: a * x,
        jac=lambda t, x: np.broadcast_to(np.array([[a]]), (len(t), 1, 1)).copy(),
        c=abs(a), r0=r0, x0=X.point([x0]),
        closed_form=lambda r, s: x0 * np.exp(a * r * s)[:, None],
        description=f"x' = {a:g} x",
    )


def linear_fourier(a=0.5, modes=8, r0=1.0):
    X = FourierSpace(modes=modes, levels=ODE_LEVELS)
    x0 = X.cosine(1, 1.0)
    m = 2 * modes + 1
    return CauchyProblem(
        name="linear-fourier", space=X,
        f=lambda t, u: a * u,
        jac=lambda t, u: np.broadcast_to(a * np.eye(m), (len(t), m, m)).astype(complex),
        c=abs(a), r0=r0, x0=x0,
        closed_form=lambda r, s: np.exp(a * r * s)[:, None] * x0.data[None],
        description=f"u' = {a:g} u on trigonometric polynomials",
    )


def logistic_scalar(x0=0.5, r0=1.0):
    """x' = x(1 - x) on U = (0, 1), where |1 - 2x| <= 1."""
    X = EuclideanSpace(dim=1, levels=ODE_LEVELS)
    return CauchyProblem(
        name="logistic-scalar", space=X,
        f=lambda t, x: x * (1.0 - x),
        jac=lambda t, x: (1.0 - 2.0 * x)[:, :, None],
        c=1.0, r0=r0, x0=X.point([x0]),
        domain=BoxDomain(X, X.point([0.5]), (0.5,) * (ODE_LEVELS + 1)),
        closed_form=lambda r, s: (1.0 / (1.0 + (1.0 / x0 - 1.0) * np.exp(-r * s)))[:, None],
        description="x' = x (1 - x)",
    )


ODE_REGISTRY = {
    "linear-scalar": linear_scalar,
    "linear-fourier": linear_fourier,
    "logistic-scalar": logistic_scalar,
}


def get_ode(name, **params):
    if name not in ODE_REGISTRY:
        raise KeyError(f"unknown ODE {name!r}; known: {', '.join(ODE_REGISTRY)}")
    return ODE_REGISTRY[name](**params)
