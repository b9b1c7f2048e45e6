"""Truncated seminorm scales, the translation-invariant metric and Pi-balls.

A graded Frechet space is represented here by a finite family of seminorms
``||.||_0, ..., ||.||_N`` acting on a fixed-size coefficient array.  Two
concrete models are provided:

* :class:`EuclideanSpace` -- R^dim with ``||x||_n = w_n |x|_2``;
* :class:`FourierSpace` -- trigonometric polynomials of degree <= M with the
  sup-type weighted seminorms ``||u||_n = max_j (1+|j|)^n |u_j|``.

:class:`GridSpace` stacks rows of a model space (curves sampled on a time
grid) and :class:`ReindexedFamily` realises ``|||v|||_n = c_n ||v||_{n+d}``.

All objects are immutable; points hold read-only arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import EmptySupportError, LevelRangeError, SpaceMismatchError

__all__ = [
    "LevelVector", "Point", "SeminormFamily", "ModelSpace", "EuclideanSpace",
    "FourierSpace", "GridSpace", "ReindexedFamily", "BoxDomain",
    "UnboundedDomain", "PredicateDomain", "magnitude", "seminorm", "profile",
    "rho", "rho_k", "graded_norm", "pi_contains", "s_norm", "reindex",
    "sample_in_pi_ball", "space_from_descriptor",
]


def _weights_to_metric(profile):
    """Per-level terms 2^-n p_n / (1 + p_n) of the metric; +inf maps to 2^-n."""
    p = np.asarray(profile, dtype=float)
    n = np.arange(p.shape[-1])
    with np.errstate(invalid="ignore"):
        frac = np.where(np.isinf(p), 1.0, p / (1.0 + p))
    return np.ldexp(frac, -n)


def magnitude(s):
    """|s| = max_n 2^-n s_n / (1 + s_n)."""
    entries = np.asarray(getattr(s, "entries", s), dtype=float)
    if entries.size == 0:
        return 0.0
    return float(np.max(_weights_to_metric(entries)))


@dataclass(frozen=True, eq=False)
class LevelVector:
    """Nonnegative profile (s_0, ..., s_N) indexing Pi-balls."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.array(self.entries, dtype=float).reshape(-1)
        if np.any(np.isnan(e)) or np.any(e < 0):
            raise ValueError("level vector entries must be nonnegative")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    def __len__(self):
        return self.entries.size

    def __getitem__(self, n):
        return float(self.entries[n])

    def __eq__(self, other):
        return isinstance(other, LevelVector) and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())

    @property
    def support(self):
        return tuple(int(n) for n in np.flatnonzero(self.entries > 0))

    @property
    def magnitude(self):
        return magnitude(self.entries)

    def scaled(self, c):
        return LevelVector(self.entries * float(c))


def _entries(s):
    return np.asarray(getattr(s, "entries", s), dtype=float)


class Point:
    """An element of a model space: a read-only coefficient array plus its space."""

    __slots__ = ("space", "data")

    def __init__(self, space, data):
        arr = np.array(data, dtype=space.dtype)
        if arr.shape != space.shape:
            raise ValueError(f"expected shape {space.shape}, got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Point is immutable")

    def _other(self, other):
        if not isinstance(other, Point):
            return NotImplemented
        if other.space is not self.space and other.space != self.space:
            raise SpaceMismatchError(f"{self.space!r} vs {other.space!r}")
        return other.data

    def __add__(self, other):
        o = self._other(other)
        if o is NotImplemented:
            return o
        return Point(self.space, self.data + o)

    def __sub__(self, other):
        o = self._other(other)
        if o is NotImplemented:
            return o
        return Point(self.space, self.data - o)

    def __mul__(self, a):
        if isinstance(a, Point):
            return NotImplemented
        return Point(self.space, self.data * a)

    __rmul__ = __mul__

    def __truediv__(self, a):
        return Point(self.space, self.data / a)

    def __neg__(self):
        return Point(self.space, -self.data)

    def __eq__(self, other):
        return (isinstance(other, Point) and other.space == self.space
                and np.array_equal(self.data, other.data))

    def __hash__(self):
        return hash((self.space, self.data.tobytes()))

    def __repr__(self):
        return f"Point({self.space!r}, {self.data!r})"

    def is_zero(self):
        return not np.any(self.data)


class SeminormFamily:
    """Finite family ||.||_0..||.||_N acting on points of ``carrier``."""

    levels: int

    @property
    def carrier(self):
        return self

    def profile_array(self, data):
        """Seminorm profile of raw coefficient data; leading axes are batched."""
        raise NotImplementedError

    def extremal_profiles(self, n):
        """Profiles (one per row) of the extreme unit vectors at level n.

        Every w with ||w||_n = 1 has a profile dominating one of these rows
        entrywise, and each row is attained.  Used to compute exact distances
        to the faces of box domains.
        """
        raise NotImplementedError

    def descriptor(self):
        raise NotImplementedError

    def check_level(self, n):
        if not 0 <= n <= self.levels:
            raise LevelRangeError(f"level {n} outside 0..{self.levels}")

    def check(self, x):
        if not isinstance(x, Point) or x.space != self.carrier:
            raise SpaceMismatchError(f"point does not belong to {self.carrier!r}")

    def profile(self, x):
        self.check(x)
        return self.profile_array(x.data)


class ModelSpace(SeminormFamily):
    """A seminorm family that also owns the coefficient representation."""

    shape: tuple
    dtype = float

    def zero(self):
        return Point(self, np.zeros(self.shape, dtype=self.dtype))

    def point(self, data):
        return Point(self, data)

    def random_data(self, rng):
        raise NotImplementedError

    def random(self, rng):
        return Point(self, self.random_data(rng))


@dataclass(frozen=True)
class EuclideanSpace(ModelSpace):
    """R^dim with every seminorm a positive multiple of the Euclidean norm."""

    dim: int = 1
    levels: int = 16
    weights: tuple = None

    def __post_init__(self):
        w = self.weights
        if w is None:
            w = (1.0,) * (self.levels + 1)
        w = tuple(float(v) for v in w)
        if len(w) != self.levels + 1 or min(w) <= 0:
            raise ValueError("need levels+1 positive weights")
        object.__setattr__(self, "weights", w)

    @property
    def shape(self):
        return (self.dim,)

    def profile_array(self, data):
        mag = np.abs(np.asarray(data))
        # scale by the largest entry so tiny coordinates do not underflow when squared
        top = np.max(mag, axis=-1, keepdims=True)
        safe = np.where(top > 0, top, 1.0)
        nrm = top[..., 0] * np.sqrt(np.sum((mag / safe) ** 2, axis=-1))
        return nrm[..., None] * np.asarray(self.weights)

    def extremal_profiles(self, n):
        w = np.asarray(self.weights)
        return (w / w[n])[None, :]

    def random_data(self, rng):
        return rng.uniform(-1.0, 1.0, self.dim)

    def descriptor(self):
        d = {"model": "euclidean", "dim": self.dim, "levels": self.levels}
        if any(v != 1.0 for v in self.weights):
            d["weights"] = list(self.weights)
        return d


@dataclass(frozen=True)
class FourierSpace(ModelSpace):
    """Trigonometric polynomials sum_{|j|<=M} u_j e^{ij theta}.

    Coefficients are stored at index ``j + M``.  Products are computed by
    direct coefficient convolution and modes beyond |j| <= M are discarded.
    """

    modes: int = 64
    levels: int = 16
    dtype = complex

    @property
    def shape(self):
        return (2 * self.modes + 1,)

    @property
    def wavenumbers(self):
        return np.arange(-self.modes, self.modes + 1)

    def _weights(self):
        return _fourier_weights(self.modes, self.levels)

    def profile_array(self, data):
        mag = np.abs(np.asarray(data))
        return np.max(mag[..., None, :] * self._weights(), axis=-1)

    def extremal_profiles(self, n):
        base = 1.0 + np.arange(self.modes + 1, dtype=float)
        return base[:, None] ** (np.arange(self.levels + 1)[None, :] - n)

    def random_data(self, rng, decay=None, real=True):
        """Random coefficients with |u_j| ~ U(0,1) (1+|j|)^-decay."""
        if decay is None:
            decay = self.levels
        j = np.abs(self.wavenumbers)
        mag = rng.uniform(0.0, 1.0, j.size) * (1.0 + j) ** (-float(decay))
        phase = np.exp(2j * np.pi * rng.uniform(0.0, 1.0, j.size))
        c = mag * phase
        if real:
            c = _hermitian(c, self.modes)
        return c

    def descriptor(self):
        return {"model": "fourier", "modes": self.modes, "levels": self.levels}

    # -- model arithmetic -------------------------------------------------
    def constant(self, a):
        c = np.zeros(self.shape, dtype=complex)
        c[self.modes] = a
        return Point(self, c)

    def mode(self, j, value=1.0):
        c = np.zeros(self.shape, dtype=complex)
        c[j + self.modes] = value
        return Point(self, c)

    def cosine(self, j=1, amplitude=1.0):
        """amplitude * cos(j theta)."""
        c = np.zeros(self.shape, dtype=complex)
        c[self.modes + j] += amplitude / 2
        c[self.modes - j] += amplitude / 2
        return Point(self, c)

    def pointwise_mul(self, u, v):
        self.check(u)
        self.check(v)
        full = np.convolve(u.data, v.data)
        return Point(self, full[self.modes:3 * self.modes + 1])

    def multiplication_matrix(self, a):
        """Matrix T with T @ v.data == pointwise_mul(a, v).data."""
        self.check(a)
        m = self.modes
        j = self.wavenumbers
        diff = j[:, None] - j[None, :]
        mask = np.abs(diff) <= m
        idx = np.clip(diff + m, 0, 2 * m)
        return np.where(mask, a.data[idx], 0.0)

    def derivative(self, u):
        self.check(u)
        return Point(self, 1j * self.wavenumbers * u.data)

    def antiderivative_meanzero(self, u):
        self.check(u)
        j = self.wavenumbers
        out = np.zeros(self.shape, dtype=complex)
        nz = j != 0
        out[nz] = u.data[nz] / (1j * j[nz])
        return Point(self, out)

    def grid_nodes(self, count=None):
        count = count or 2 * self.modes + 1
        return 2 * np.pi * np.arange(count) / count

    def to_grid(self, u, count=None):
        """Values of u at theta_k = 2 pi k / count."""
        self.check(u)
        theta = self.grid_nodes(count)
        return np.exp(1j * np.outer(theta, self.wavenumbers)) @ u.data

    def from_grid(self, values):
        """Interpolating coefficients from equispaced samples (count >= 2M+1).

        Modes above M are discarded, so oversampled smooth data gives the
        truncated Fourier series up to aliasing of the discarded tail.
        """
        values = np.asarray(values)
        count = values.shape[-1]
        if count < 2 * self.modes + 1:
            raise ValueError("need at least 2M+1 samples")
        spec = np.fft.fft(values) / count
        return Point(self, spec[self.wavenumbers % count])


@lru_cache(maxsize=64)
def _fourier_weights(modes, levels):
    base = 1.0 + np.abs(np.arange(-modes, modes + 1))
    w = base[None, :] ** np.arange(levels + 1)[:, None]
    w.setflags(write=False)
    return w


def _hermitian(c, m):
    c = np.array(c, dtype=complex)
    c[:m] = np.conj(c[m + 1:][::-1])
    c[m] = c[m].real
    return c


@dataclass(frozen=True)
class GridSpace(ModelSpace):
    """Rows of a base model space with ||z||_n = max over rows of ||z_row||_n.

    Used for curves sampled on a time grid: C([-1,1], X) is one row per node
    (plus an extra row for an initial value), and the C^1 space stores node
    values and node derivatives as separate rows.
    """

    base: ModelSpace = None
    rows: int = 1

    @property
    def levels(self):
        return self.base.levels

    @property
    def shape(self):
        return (self.rows,) + tuple(self.base.shape)

    @property
    def dtype(self):
        return self.base.dtype

    def profile_array(self, data):
        prof = self.base.profile_array(data)
        return np.max(prof, axis=-2)

    def extremal_profiles(self, n):
        return self.base.extremal_profiles(n)

    def random_data(self, rng):
        return np.stack([self.base.random_data(rng) for _ in range(self.rows)])

    def descriptor(self):
        return {"model": "grid", "rows": self.rows, "base": self.base.descriptor()}


@dataclass(frozen=True)
class ReindexedFamily(SeminormFamily):
    """|||v|||_n = c_n ||v||_{n+d}, n = 0..N-d, on the points of ``base``."""

    base: SeminormFamily = None
    c: tuple = ()
    d: int = 0

    @property
    def levels(self):
        return self.base.levels - self.d

    @property
    def carrier(self):
        return self.base.carrier

    def profile_array(self, data):
        prof = self.base.profile_array(data)
        return np.asarray(self.c) * prof[..., self.d:]

    def extremal_profiles(self, n):
        ext = self.base.extremal_profiles(n + self.d)[:, self.d:] * np.asarray(self.c)
        return ext / ext[:, n:n + 1]

    def descriptor(self):
        d = dict(self.base.descriptor())
        d["reindex"] = {"c": list(self.c), "d": self.d}
        return d


def reindex(space, c, d):
    """Family c_n ||.||_{n+d} with truncation N - d.

    ``c`` may be a scalar or a sequence with at least N - d + 1 entries;
    extra entries are ignored.
    """
    d = int(d)
    if d < 0 or d > space.levels:
        raise LevelRangeError(f"loss d={d} incompatible with N={space.levels}")
    length = space.levels - d + 1
    c = np.broadcast_to(np.asarray(c, dtype=float), (length,)) if np.ndim(c) == 0 \
        else np.asarray(c, dtype=float)[:length]
    if c.size != length:
        raise ValueError(f"need {length} constants, got {c.size}")
    if np.any(c <= 0):
        raise ValueError("reindexing constants must be positive")
    return ReindexedFamily(base=space, c=tuple(float(v) for v in c), d=d)


# -- free-function API --------------------------------------------------------

def profile(space, x):
    return space.profile(x)


def seminorm(space, x, n):
    space.check_level(n)
    return float(space.profile(x)[n])


def rho(space, x, y):
    """max_{n<=N} 2^-n ||x-y||_n / (1 + ||x-y||_n)."""
    space.check(x)
    space.check(y)
    return magnitude(space.profile_array(x.data - y.data))


def rho_k(space, x, y, k):
    space.check_level(k)
    space.check(x)
    space.check(y)
    return magnitude(space.profile_array(x.data - y.data)[:k + 1])


def graded_norm(space, x, k):
    """|x|_k = max_{i<=k} ||x||_i."""
    space.check_level(k)
    return float(np.max(space.profile(x)[:k + 1]))


def _check_profile_length(space, s):
    if s.size != space.levels + 1:
        raise ValueError(f"level vector has {s.size} entries, family has {space.levels + 1}")


def pi_contains(space, x, s):
    """x in Pi_s, i.e. ||x||_n <= s_n for every n (boundary included)."""
    s = _entries(s)
    _check_profile_length(space, s)
    return bool(np.all(space.profile(x) <= s))


def s_norm(space, x, s):
    """sup_{n in supp s} ||x||_n / s_n; +inf when x has mass off the support."""
    s = _entries(s)
    _check_profile_length(space, s)
    supp = s > 0
    if not np.any(supp):
        raise EmptySupportError("supp s is empty")
    p = space.profile(x)
    if np.any(p[~supp] > 0):
        return math.inf
    return float(np.max(p[supp] / s[supp]))


def sample_in_pi_ball(space, s, rng, max_tries=1000):
    """Random point of Pi_s(space), drawn by rescaling a random direction."""
    s = _entries(s)
    _check_profile_length(space, s)
    carrier = space.carrier
    for _ in range(max_tries):
        data = carrier.random_data(rng)
        p = space.profile_array(data)
        pos = p > 0
        if not np.any(pos):
            continue
        scale = np.min(s[pos] / p[pos]) if np.any(pos) else 0.0
        x = Point(carrier, data * scale * rng.uniform(0.0, 1.0))
        while not pi_contains(space, x, s):
            x = x * (1.0 - 1e-12)
        return x
    raise RuntimeError("could not sample a point of the Pi-ball")


# -- domains ----------------------------------------------------------------------

@dataclass(frozen=True)
class BoxDomain:
    """U = {x : ||x - center||_n < r_n for all n} (r_n may be +inf)."""

    space: SeminormFamily
    center: Point
    radii: tuple

    def __post_init__(self):
        r = tuple(float(v) for v in self.radii)
        if len(r) != self.space.levels + 1 or min(r) <= 0:
            raise ValueError("need levels+1 positive radii")
        object.__setattr__(self, "radii", r)

    def contains(self, x):
        p = self.space.profile(x - self.center)
        return bool(np.all(p < np.asarray(self.radii)))

    def m_u(self, x):
        """rho-distance from x to the complement of U.

        Exact at the centre; for other points the per-face gaps
        r_n - ||x - center||_n give a lower bound.
        """
        p = self.space.profile(x - self.center)
        r = np.asarray(self.radii)
        if np.any(p >= r):
            return 0.0
        best = math.inf
        for n in np.flatnonzero(np.isfinite(r)):
            gap = r[n] - p[n]
            ext = gap * self.space.extremal_profiles(int(n))
            best = min(best, float(np.min(np.max(_weights_to_metric(ext), axis=-1))))
        return best

    def describe(self):
        return {"type": "box", "radii": [r if math.isfinite(r) else "inf" for r in self.radii]}


@dataclass(frozen=True)
class UnboundedDomain:
    def contains(self, x):
        return True

    def m_u(self, x):
        return math.inf

    def describe(self):
        return {"type": "whole-space"}


@dataclass(frozen=True)
class PredicateDomain:
    predicate: object
    label: str = "predicate"
    radius: object = None

    def contains(self, x):
        return bool(self.predicate(x))

    def m_u(self, x):
        if self.radius is None:
            return math.nan
        return float(self.radius(x))

    def describe(self):
        return {"type": self.label}


def space_from_descriptor(desc):
    """Inverse of ``descriptor()`` for the serialisable models."""
    model = desc["model"]
    if model == "euclidean":
        sp = EuclideanSpace(dim=int(desc.get("dim", 1)), levels=int(desc.get("levels", 16)),
                            weights=tuple(desc["weights"]) if "weights" in desc else None)
    elif model == "fourier":
        sp = FourierSpace(modes=int(desc.get("modes", 64)), levels=int(desc.get("levels", 16)))
    elif model == "grid":
        sp = GridSpace(base=space_from_descriptor(desc["base"]), rows=int(desc["rows"]))
    else:
        raise ValueError(f"unknown model {model!r}")
    if "reindex" in desc:
        return reindex(sp, desc["reindex"]["c"], desc["reindex"]["d"])
    return sp
