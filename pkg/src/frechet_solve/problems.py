"""Built-in demo problems and negative controls.

Every registered problem declares tame constants that hold on its whole
domain.  For the Fourier problems they are computed, not guessed: if
|u_k| <= a_k coefficientwise then |(I + T_u)^{-1}| <= (I - T_a)^{-1}
entrywise (Neumann series with nonnegative terms), so the weighted operator
norm of (I - T_a)^{-1} bounds the right inverse uniformly on a box.
"""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from .solver import TameProblem
from .spaces import BoxDomain, EuclideanSpace, FourierSpace, Point, UnboundedDomain

SCALAR_LEVELS = 16
FOURIER_MODES = 24
FOURIER_LEVELS = 4


def box_limits(space, radii):
    """Largest |u_j| allowed by ||u||_n < r_n for every n."""
    j = np.abs(space.wavenumbers)
    n = np.arange(len(radii))
    return np.min(np.asarray(radii)[None, :] / (1.0 + j[:, None]) ** n[None, :], axis=1)


def weighted_opnorm(matrix, w_out, w_in):
    """Operator norm of ``matrix`` from sup_j w_in|.| to sup_j w_out|.|."""
    return float(np.max(np.sum(np.abs(w_out[:, None] * matrix / w_in[None, :]), axis=1)))


def _majorant_inverse(space, a, scale):
    T = np.abs(space.multiplication_matrix(Point(space, a.astype(complex))))
    A = scale * T
    if max(abs(np.linalg.eigvals(A))) >= 1.0:
        raise ValueError("box too large: Neumann majorant diverges")
    return np.linalg.inv(np.eye(A.shape[0]) - A)


# -- scalar ----------------------------------------------------------------------

def scalar_quadratic(levels=SCALAR_LEVELS, radius=1.0):
    """f(x) = x + x^2/4 on U = (-radius, radius); |f'(x)|^-1 <= 2 for radius <= 1."""
    X = EuclideanSpace(dim=1, levels=levels)
    c = 1.0 / (1.0 - radius / 2.0)

    def f(x):
        return Point(X, x.data + x.data ** 2 / 4.0)

    def right_inverse(x, v):
        return Point(X, v.data / (1.0 + x.data / 2.0))

    def derivative(x, h):
        return Point(X, (1.0 + x.data / 2.0) * h.data)

    return TameProblem(
        name="scalar-quadratic", X=X, Y=X, f=f, right_inverse=right_inverse,
        c=c, d=0, domain=BoxDomain(X, X.zero(), (radius,) * (levels + 1)),
        x_ref=X.zero(), derivative=derivative,
        description="x + x^2/4 on the real line",
        smoke_target=lambda: X.point([0.5]),
    )


def scalar_linear(a=2.0, levels=SCALAR_LEVELS):
    X = EuclideanSpace(dim=1, levels=levels)
    return TameProblem(
        name=f"scalar-linear-{a:g}", X=X, Y=X,
        f=lambda x: a * x, right_inverse=lambda x, v: v / a,
        c=1.0 / abs(a), d=0, domain=UnboundedDomain(), x_ref=X.zero(),
        derivative=lambda x, h: a * h, description=f"{a:g} x",
        smoke_target=lambda: X.point([a * 0.3]),
    )


def scalar_fold(levels=SCALAR_LEVELS):
    """f(x) = x^2: not injective near 0, derivative not onto at 0."""
    X = EuclideanSpace(dim=1, levels=levels)

    def right_inverse(x, v):
        with np.errstate(divide="ignore", invalid="ignore"):
            return Point(X, np.nan_to_num(v.data / (2.0 * x.data), posinf=0.0, neginf=0.0))

    return TameProblem(
        name="scalar-fold", X=X, Y=X, f=lambda x: Point(X, x.data ** 2),
        right_inverse=right_inverse, c=1.0, d=0,
        domain=BoxDomain(X, X.zero(), (1.0,) * (levels + 1)), x_ref=X.zero(),
        derivative=lambda x, h: Point(X, 2.0 * x.data * h.data),
        description="x^2 (negative control)",
    )


# -- Fourier -------------------------------------------------------------------------

def fourier_quadratic(modes=FOURIER_MODES, levels=FOURIER_LEVELS, scale=0.06):
    """f(u) = u + u^2 (truncated product) on the box ||u||_n < scale 2^n."""
    X = FourierSpace(modes=modes, levels=levels)
    radii = tuple(scale * 2.0 ** n for n in range(levels + 1))
    B = _majorant_inverse(X, box_limits(X, radii), 2.0)
    w = X._weights()
    c = tuple(weighted_opnorm(B, w[n], w[n]) for n in range(levels + 1))
    eye = np.eye(2 * modes + 1)

    def f(u):
        return u + X.pointwise_mul(u, u)

    def right_inverse(u, v):
        return Point(X, np.linalg.solve(eye + 2.0 * X.multiplication_matrix(u), v.data))

    def derivative(u, h):
        return h + 2.0 * X.pointwise_mul(u, h)

    return TameProblem(
        name="fourier-quadratic", X=X, Y=X, f=f, right_inverse=right_inverse,
        c=c, d=0, domain=BoxDomain(X, X.zero(), radii), x_ref=X.zero(),
        derivative=derivative, description="u + u^2 on trigonometric polynomials",
        smoke_target=lambda: X.cosine(1, 0.1),
    )


def fourier_antiderivative(modes=FOURIER_MODES, levels=FOURIER_LEVELS, scale=0.1):
    """f(u) = K u + (K u)^2 / 4 with K = mean + mean-zero antiderivative.

    The right inverse applies K^{-1} (mean + derivative) and therefore loses
    one derivative: d = 1.  X carries one level less than Y.
    """
    Y = FourierSpace(modes=modes, levels=levels)
    X = FourierSpace(modes=modes, levels=levels - 1)
    j = X.wavenumbers
    k_diag = np.where(j == 0, 1.0 + 0j, 1.0 / (1j * np.where(j == 0, 1, j)))
    kinv_diag = 1.0 / k_diag
    radii = tuple(scale * 2.0 ** n for n in range(levels))
    a = box_limits(X, radii) / np.maximum(1, np.abs(j)) / 2.0
    B = np.abs(kinv_diag)[:, None] * _majorant_inverse(Y, a, 1.0)
    w = Y._weights()
    c = tuple(weighted_opnorm(B, w[n], w[n + 1]) for n in range(levels))
    eye = np.eye(2 * modes + 1)

    def K(u):
        return Point(Y, k_diag * u.data)

    def f(u):
        ku = K(u)
        return ku + Y.pointwise_mul(ku, ku) / 4.0

    def right_inverse(u, v):
        ku = K(u)
        w_ = np.linalg.solve(eye + Y.multiplication_matrix(ku) / 2.0, v.data)
        return Point(X, kinv_diag * w_)

    def derivative(u, h):
        ku = K(u)
        return K(h) + Y.pointwise_mul(ku, K(h)) / 2.0

    return TameProblem(
        name="fourier-antiderivative", X=X, Y=Y, f=f, right_inverse=right_inverse,
        c=c, d=1, domain=BoxDomain(X, X.zero(), radii), x_ref=X.zero(),
        derivative=derivative,
        description="K u + (K u)^2/4, K = mean + antiderivative; loses one derivative",
        smoke_target=lambda: Y.cosine(1, 0.02),
    )


def broken_constants(problem, factor=10.0):
    """Negative control: declared constants divided by ``factor``."""
    return replace(problem, name=problem.name + "-broken",
                   c=tuple(v / factor for v in problem.c))


def scaled_right_inverse(problem, factor=10.0):
    """Negative control: R(x, v) multiplied by ``factor``, constants unchanged."""
    R = problem.right_inverse
    return replace(problem, name=problem.name + "-scaled",
                   right_inverse=lambda x, v: factor * R(x, v))


def identity_problem(levels=SCALAR_LEVELS, radius=1.0):
    X = EuclideanSpace(dim=1, levels=levels)
    return TameProblem(
        name="identity", X=X, Y=X, f=lambda x: x, right_inverse=lambda x, v: v,
        c=1.0, d=0, domain=BoxDomain(X, X.zero(), (radius,) * (levels + 1)),
        x_ref=X.zero(), derivative=lambda x, h: h, description="x",
    )


def with_constants(problem, c):
    return replace(problem, c=c)


REGISTRY = {
    "scalar-quadratic": scalar_quadratic,
    "fourier-quadratic": fourier_quadratic,
    "fourier-antiderivative": fourier_antiderivative,
}

_CACHE = {}


def get_problem(name):
    if name not in REGISTRY:
        raise KeyError(f"unknown problem {name!r}; known: {', '.join(REGISTRY)}")
    if name not in _CACHE:
        _CACHE[name] = REGISTRY[name]()
    return _CACHE[name]


def list_problems():
    return [get_problem(name).describe() for name in sorted(REGISTRY)]


def quadratic_collocation_oracle(space, y, samples=None):
    """Coefficients of the pointwise root u = (-1 + sqrt(1 + 4 y)) / 2.

    The root is taken node by node on an oversampled grid and transformed back.
    """
    samples = samples or 8 * space.modes
    yv = space.to_grid(y, samples).real
    u = (-1.0 + np.sqrt(1.0 + 4.0 * yv)) / 2.0
    return space.from_grid(u), u
