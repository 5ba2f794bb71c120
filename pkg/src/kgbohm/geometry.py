"""Flat-spacetime primitives: four-vectors, planar hypersurfaces, foliations.

Units are natural (hbar = c = 1) and the metric signature is (+, -, -, -).
Every function that takes a "four-vector" also accepts an array whose last
axis has length 4, so evaluations vectorize over point clouds.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

METRIC = np.diag([1.0, -1.0, -1.0, -1.0])
SPACELIKE_TOL = 1e-12


@dataclass(frozen=True)
class FourVector:
    t: float = 0.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def __array__(self, dtype=None, copy=None):
        return np.array([self.t, self.x, self.y, self.z], dtype=dtype or float)

    def as_array(self) -> np.ndarray:
        return np.array([self.t, self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, a) -> "FourVector":
        a = np.asarray(a, dtype=float)
        if a.shape != (4,):
            raise ValueError(f"expected shape (4,), got {a.shape}")
        return cls(*map(float, a))

    def square(self) -> float:
        return float(minkowski_dot(self, self))


def as_points(x) -> np.ndarray:
    """Coerce a FourVector, a length-4 sequence, or an (..., 4) array."""
    if isinstance(x, FourVector):
        return x.as_array()
    a = np.asarray(x, dtype=float)
    if a.shape[-1:] != (4,):
        raise ValueError(f"last axis must have length 4, got shape {a.shape}")
    return a


def minkowski_dot(a, b):
    """a^0 b^0 - a^1 b^1 - a^2 b^2 - a^3 b^3, broadcast over leading axes."""
    a = as_points(a)
    b = as_points(b)
    return a[..., 0] * b[..., 0] - a[..., 1] * b[..., 1] - a[..., 2] * b[..., 2] - a[..., 3] * b[..., 3]


def lower(v) -> np.ndarray:
    """Lower (or raise) the index of a four-vector; the metric is its own inverse."""
    v = np.asarray(v)
    out = v.copy()
    out[..., 1:] = -out[..., 1:]
    return out


def boost_normal(rapidity: float, axis: int = 1) -> np.ndarray:
    """Unit future-oriented normal of a plane boosted along spatial ``axis``."""
    n = np.zeros(4)
    n[0] = np.cosh(rapidity)
    n[axis] = np.sinh(rapidity)
    return n


def _surface_basis(normal: np.ndarray, dim: int) -> np.ndarray:
    """Minkowski-orthonormal tangent vectors to the plane with this normal.

    Gram-Schmidt over the spatial axes (then the time axis, for timelike
    planes), keeping the first ``dim`` candidates with a non-null residual.
    """
    nn = minkowski_dot(normal, normal)
    basis = []
    candidates = [np.eye(4)[i] for i in range(1, dim + 1)] + [np.eye(4)[0]]
    for c in candidates:
        v = c - minkowski_dot(c, normal) / nn * normal
        for e in basis:
            v = v - minkowski_dot(v, e) / minkowski_dot(e, e) * e
        q = minkowski_dot(v, v)
        if abs(q) < 1e-10:
            continue
        basis.append(v / np.sqrt(abs(q)))
        if len(basis) == dim:
            break
    return np.array(basis)


@dataclass(frozen=True, eq=False)
class Patch:
    """A planar piece of a hypersurface.

    ``bounds`` are (lo, hi) intervals in the patch's orthonormal surface
    coordinates; ``None`` entries are unbounded. ``metric_factor`` is the
    |g3|^(1/2) multiplying d^3u in the surface measure.
    """

    normal: np.ndarray
    base: np.ndarray
    bounds: tuple
    metric_factor: float = 1.0
    spacelike: bool = field(init=False)
    basis: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        base = np.asarray(self.base, dtype=float)
        if n.shape != (4,) or base.shape != (4,):
            raise ValueError("normal and base must be four-vectors")
        nn = minkowski_dot(n, n)
        if abs(nn) < SPACELIKE_TOL:
            raise ValueError("patch normal is null; the plane has no unit normal")
        n = n / np.sqrt(abs(nn))
        spacelike = nn > 0
        if spacelike and n[0] < 0:
            n = -n
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "bounds", tuple(tuple(b) if b is not None else None for b in self.bounds))
        object.__setattr__(self, "spacelike", bool(spacelike))
        object.__setattr__(self, "basis", _surface_basis(n, len(self.bounds)))

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def signed_distance(self, x) -> np.ndarray:
        """Minkowski projection n . (x - base); zero on the plane."""
        return minkowski_dot(self.normal, as_points(x) - self.base)

    def coordinates(self, x) -> np.ndarray:
        """Orthonormal surface coordinates of (the projection of) ``x``."""
        d = as_points(x) - self.base
        sq = np.array([minkowski_dot(e, e) for e in self.basis])
        return np.stack([minkowski_dot(d, e) / sq[i] for i, e in enumerate(self.basis)], axis=-1)

    def embed(self, u) -> np.ndarray:
        """Spacetime point at surface coordinates ``u`` (shape (..., dim))."""
        u = np.asarray(u, dtype=float)
        return self.base + u @ self.basis

    def area(self) -> float:
        a = 1.0
        for b in self.bounds:
            if b is None:
                return np.inf
            a *= b[1] - b[0]
        return a


@dataclass(frozen=True, eq=False)
class Hypersurface:
    """A piecewise-planar 3-surface (or 1- or 2-surface in lower dimension).

    ``period`` gives spatial box lengths under which the wave function is
    periodic; surface coordinates are folded into the patch bounds before
    membership tests, so a plane bounded by the box represents the whole
    periodic plane.
    """

    kind: str
    patches: tuple
    period: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("constant-time", "piecewise-planar"):
            raise ValueError(f"unknown hypersurface kind {self.kind!r}")
        if not self.patches:
            raise ValueError("a hypersurface needs at least one patch")
        object.__setattr__(self, "patches", tuple(self.patches))

    @classmethod
    def constant_time(cls, t0: float, box: Sequence[float], origin=None, periodic: bool = True) -> "Hypersurface":
        box = tuple(float(b) for b in box)
        lo = np.zeros(len(box)) if origin is None else np.asarray(origin, dtype=float)
        base = np.zeros(4)
        base[0] = t0
        patch = Patch(
            normal=np.array([1.0, 0.0, 0.0, 0.0]),
            base=base,
            bounds=tuple((lo[i], lo[i] + box[i]) for i in range(len(box))),
        )
        return cls("constant-time", (patch,), period=box if periodic else None)

    @classmethod
    def boosted_plane(cls, rapidity: float, base, bounds, axis: int = 1) -> "Hypersurface":
        return cls("piecewise-planar", (Patch(boost_normal(rapidity, axis), np.asarray(base, float), tuple(bounds)),))

    @property
    def spacelike(self) -> bool:
        return all(p.spacelike for p in self.patches)

    @property
    def t0(self) -> float:
        if self.kind != "constant-time":
            raise AttributeError("only constant-time surfaces have a single time")
        return float(self.patches[0].base[0])

    def contains(self, patch_index: int, x) -> np.ndarray:
        """Whether points (assumed on the patch plane) lie inside its bounds."""
        p = self.patches[patch_index]
        u = p.coordinates(x)
        inside = np.ones(u.shape[:-1], dtype=bool)
        for i, b in enumerate(p.bounds):
            if b is None:
                continue
            ui = u[..., i]
            if self.period is not None and p.spacelike and i < len(self.period):
                ui = b[0] + np.mod(ui - b[0], self.period[i])
            inside &= (ui >= b[0]) & (ui < b[1])
        return inside

    def fold(self, patch_index: int, x) -> np.ndarray:
        """Surface coordinates folded into the bounds of a periodic surface."""
        p = self.patches[patch_index]
        u = p.coordinates(x)
        if self.period is None:
            return u
        u = u.copy()
        for i, b in enumerate(p.bounds):
            if b is not None and i < len(self.period):
                u[..., i] = b[0] + np.mod(u[..., i] - b[0], self.period[i])
        return u

    def midpoint_grid(self, patch_index: int, resolution):
        """Midpoint-rule nodes on a bounded patch.

        Returns (points (N, 4), cell area in surface coordinates).
        """
        p = self.patches[patch_index]
        if not np.isfinite(p.area()):
            raise ValueError("quadrature needs a bounded patch")
        res = np.broadcast_to(np.asarray(resolution, dtype=int), (p.dim,))
        axes = []
        cell = 1.0
        for (lo, hi), n in zip(p.bounds, res):
            h = (hi - lo) / n
            axes.append(lo + (np.arange(n) + 0.5) * h)
            cell *= h
        mesh = np.meshgrid(*axes, indexing="ij")
        u = np.stack([m.ravel() for m in mesh], axis=-1)
        return p.embed(u), cell


def surface_measure(h: Hypersurface, patch_index: int, area_element: float) -> np.ndarray:
    """dS^mu = n^mu |g3|^(1/2) d^3u for one patch."""
    if not 0 <= patch_index < len(h.patches):
        raise IndexError(f"patch index {patch_index} out of range for {len(h.patches)} patches")
    p = h.patches[patch_index]
    return p.normal * p.metric_factor * area_element


@dataclass(frozen=True, eq=False)
class FoliationField:
    """A preferred foliation given by its unit normal field N^mu(x).

    ``time_function`` labels the leaves; for the constant default it is the
    Minkowski projection N . x. User-supplied fields must provide both.
    """

    normal_fn: Optional[Callable] = None
    time_function: Optional[Callable] = None
    constant: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        if (self.normal_fn is None) != (self.time_function is None):
            raise ValueError("a custom foliation needs both normal_fn and time_function")
        c = np.asarray(self.constant, dtype=float)
        object.__setattr__(self, "constant", c)
        if self.normal_fn is None:
            _check_unit_future(c)

    @classmethod
    def boosted(cls, rapidity: float, axis: int = 1) -> "FoliationField":
        return cls(constant=boost_normal(rapidity, axis))

    @property
    def is_constant(self) -> bool:
        return self.normal_fn is None

    def normal(self, x) -> np.ndarray:
        x = as_points(x)
        if self.normal_fn is None:
            return np.broadcast_to(self.constant, x.shape).copy()
        n = np.asarray(self.normal_fn(x), dtype=float)
        _check_unit_future(n)
        return n

    def leaf_time(self, x) -> np.ndarray:
        x = as_points(x)
        if self.time_function is None:
            return minkowski_dot(self.constant, x)
        return np.asarray(self.time_function(x), dtype=float)

    def divergence(self, x, h: float = 1e-5) -> np.ndarray:
        """Central-difference d_mu N^mu at ``x``."""
        x = as_points(x)
        div = np.zeros(x.shape[:-1])
        for mu in range(4):
            dx = np.zeros(4)
            dx[mu] = h
            div += (self.normal(x + dx)[..., mu] - self.normal(x - dx)[..., mu]) / (2 * h)
        return div


def _check_unit_future(n, tol: float = 1e-9):
    n = np.asarray(n, dtype=float)
    nn = minkowski_dot(n, n)
    if np.any(np.abs(nn - 1.0) > tol) or np.any(n[..., 0] <= 0):
        raise ValueError("foliation normal must be a unit, timelike, future-oriented vector")


def check_timelike_future_unit(n, tol: float = 1e-9) -> np.ndarray:
    n = as_points(n)
    _check_unit_future(n, tol)
    return n
