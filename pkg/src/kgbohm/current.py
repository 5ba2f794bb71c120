"""The conserved Klein-Gordon current and its foliation-contracted n-particle form.

Conventions: ``current`` returns the contravariant j^mu; everything with
``_lower`` in its name returns covariant components. The current of a mode
sum is ``j_mu = i (psi* d_mu psi - psi d_mu psi*) = -2 Im(psi* d_mu psi)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from .geometry import FoliationField, as_points, check_timelike_future_unit, lower, minkowski_dot
from .wavefunction import WaveFunction, default_resolution

LEAF_TOL = 1e-9


def _current_lower(psi: np.ndarray, dpsi: np.ndarray) -> np.ndarray:
    return -2.0 * np.imag(np.conj(psi)[..., None] * dpsi)


@dataclass(frozen=True, eq=False)
class CurrentField:
    """Evaluator of j^mu(x) for a Klein-Gordon-normalized wave function.

    ``scale`` multiplies the whole field; trajectories (as point sets) do not
    depend on it, which the integrator tests exploit.
    """

    source: WaveFunction
    scale: float = 1.0

    def __post_init__(self):
        if self.source.kind != "klein-gordon":
            raise ValueError("the Klein-Gordon current needs a psi-type (klein-gordon) wave function")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    def current_lower(self, x) -> np.ndarray:
        psi, dpsi = self.source.value_and_gradient(x)
        j = _current_lower(psi, dpsi)
        return j if self.scale == 1.0 else self.scale * j

    def current(self, x) -> np.ndarray:
        return lower(self.current_lower(x))

    __call__ = current

    def signed_time_component(self, x) -> np.ndarray:
        """j^0 with its sign; negative where the particle runs backwards in time."""
        return self.current_lower(x)[..., 0]

    def density(self, x, surface_normal, metric_factor: float = 1.0) -> np.ndarray:
        """|metric_factor * n^mu j_mu(x)|, the non-negative density on a surface with normal n."""
        n = check_timelike_future_unit(surface_normal)
        return np.abs(metric_factor * np.sum(n * self.current_lower(x), axis=-1))

    def divergence(self, x) -> np.ndarray:
        """Analytic d_mu j^mu from the second derivatives of psi."""
        psi, dpsi = self.source.value_and_gradient(x)
        hess = self.source.hessian(x)
        eta = np.array([1.0, -1.0, -1.0, -1.0])
        quad = np.einsum("...m,...m,m->...", np.conj(dpsi), dpsi, eta)
        box = np.einsum("...mm,m->...", hess, eta)
        return self.scale * -2.0 * np.imag(quad + np.conj(psi) * box)

    def bound(self) -> np.ndarray:
        """Upper bound on |j^mu| over all of spacetime, per component."""
        a = np.abs(self.source.amplitudes)
        ks = np.abs(self.source.k_up[:, None, :] + self.source.k_up[None, :, :])
        return self.scale * np.einsum("i,j,ijm->m", a, a, ks)

    def time_component_range(self, t: float = 0.0, resolution=None):
        """(min, max) of j^0 over the box at time t: grid scan, then local refinement."""
        w = self.source
        res = resolution or default_resolution(w.dim)
        axes = [(np.arange(res) + 0.5) * L / res for L in w.box]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.zeros(mesh[0].shape + (4,))
        pts[..., 0] = t
        for i, m in enumerate(mesh):
            pts[..., i + 1] = m
        j0 = self.signed_time_component(pts)
        h = np.array([L / res for L in w.box])
        out = []
        for sign in (1.0, -1.0):
            idx = np.unravel_index(np.argmin(sign * j0), j0.shape)
            x0 = np.array([axes[i][idx[i]] for i in range(w.dim)])

            def f(u):
                p = np.zeros(4)
                p[0] = t
                p[1:1 + w.dim] = u
                return sign * float(self.signed_time_component(p))

            if w.dim == 1:
                r = optimize.minimize_scalar(lambda u: f([u]), bounds=(x0[0] - h[0], x0[0] + h[0]),
                                             method="bounded", options={"xatol": 1e-12})
                val = min(r.fun, sign * j0[idx])
            else:
                r = optimize.minimize(f, x0, method="Nelder-Mead",
                                      options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 4000})
                val = min(r.fun, sign * j0[idx])
            out.append(sign * val)
        return out[0], out[1]


def two_mode_current(k1, k2, m: float, V: float, x) -> np.ndarray:
    """Closed-form j^mu of the equal-weight two-mode state, for cross-checks."""
    x = as_points(x)
    k1 = np.pad(np.asarray(k1, float), (0, 3 - len(k1)))
    k2 = np.pad(np.asarray(k2, float), (0, 3 - len(k2)))
    w1 = np.sqrt(k1 @ k1 + m * m)
    w2 = np.sqrt(k2 @ k2 + m * m)
    K1 = np.concatenate([[w1], k1])
    K2 = np.concatenate([[w2], k2])
    phase = minkowski_dot(K1 - K2, x)
    return (K1 / w1 + K2 / w2 + np.multiply.outer(np.cos(phase), (K1 + K2) / np.sqrt(w1 * w2))) / (2 * V)


# -- n particles ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NParticleWaveFunction:
    """psi(x_1..x_n) = sum_T c_T prod_a f_{T,a}(x_a) over Klein-Gordon-normalized factors."""

    terms: tuple  # ((coefficient, (WaveFunction, ...)), ...)

    def __post_init__(self):
        terms = tuple((complex(c), tuple(fs)) for c, fs in self.terms)
        if not terms:
            raise ValueError("need at least one product term")
        n = len(terms[0][1])
        if n < 1 or any(len(fs) != n for _, fs in terms):
            raise ValueError("every product term needs one factor per particle")
        for _, fs in terms:
            for f in fs:
                if f.kind != "klein-gordon":
                    raise ValueError("factors must be klein-gordon normalized")
        object.__setattr__(self, "terms", terms)

    @property
    def n(self) -> int:
        return len(self.terms[0][1])

    @classmethod
    def product(cls, factors: Sequence[WaveFunction]) -> "NParticleWaveFunction":
        return cls(((1.0, tuple(factors)),))

    @classmethod
    def symmetrized(cls, factors: Sequence[WaveFunction]) -> "NParticleWaveFunction":
        """Bosonic symmetrization over all permutations of the factors."""
        perms = list(itertools.permutations(factors))
        c = 1 / math.sqrt(len(perms))
        return cls(tuple((c, p) for p in perms))

    def evaluate(self, points) -> np.ndarray:
        points = as_points(points)
        out = 0.0
        for c, fs in self.terms:
            prod = c
            for a, f in enumerate(fs):
                prod = prod * f.evaluate(points[..., a, :])
            out = out + prod
        return out


@dataclass(frozen=True, eq=False)
class NParticleCurrent:
    wavefunction: NParticleWaveFunction
    foliation: FoliationField = field(default_factory=FoliationField)

    @property
    def n(self) -> int:
        return self.wavefunction.n

    def check_leaf(self, points) -> None:
        points = as_points(points)
        tau = self.foliation.leaf_time(points)
        spread = np.max(tau, axis=-1) - np.min(tau, axis=-1)
        if np.any(spread > LEAF_TOL):
            raise ValueError(f"points do not lie on one leaf of the foliation (spread {np.max(spread):.3g})")

    def _pair_blocks(self, points):
        """Yield (c*_{T'} c_T, [i B_a(T',T) lower], [f*_{T'a} f_{Ta}]) for every term pair.

        Diagonal pairs reuse the single-particle current formula exactly.
        """
        points = as_points(points)
        n = self.n
        cache = []
        for _, fs in self.wavefunction.terms:
            cache.append([f.value_and_gradient(points[..., a, :]) for a, f in enumerate(fs)])
        terms = self.wavefunction.terms
        for p, (cp, _) in enumerate(terms):
            for q, (cq, _) in enumerate(terms):
                weight = np.conj(cp) * cq
                iB, overlap = [], []
                for a in range(n):
                    fp, gp = cache[p][a]
                    fq, gq = cache[q][a]
                    if p == q:
                        iB.append(_current_lower(fq, gq))
                        overlap.append(np.abs(fq) ** 2)
                    else:
                        iB.append(1j * (np.conj(fp)[..., None] * gq - np.conj(gp) * fq[..., None]))
                        overlap.append(np.conj(fp) * fq)
                yield weight, iB, overlap

    def n_vector_current(self, points, check: bool = True) -> np.ndarray:
        """Fully contravariant rank-n tensor j^{mu_1...mu_n}, shape (..., 4, ..., 4)."""
        points = as_points(points)
        if check:
            self.check_leaf(points)
        total = 0.0
        for weight, iB, _ in self._pair_blocks(points):
            t = iB[0]
            for b in iB[1:]:
                t = t[..., None] * b.reshape(b.shape[:-1] + (1,) * (t.ndim - b.ndim + 1) + (4,))
            total = total + weight * t
        total = np.real(total)
        for axis in range(self.n):
            sl = [slice(None)] * total.ndim
            sl[total.ndim - self.n + axis] = slice(1, 4)
            total[tuple(sl)] *= -1.0
        return total

    def contracted_current_lower(self, a: int, points, check: bool = True) -> np.ndarray:
        """j_{mu_a} with every other slot contracted against N^mu at its own point."""
        if not 0 <= a < self.n:
            raise IndexError(f"particle index {a} out of range for n={self.n}")
        points = as_points(points)
        if check:
            self.check_leaf(points)
        N = [self.foliation.normal(points[..., b, :]) for b in range(self.n)]
        total = 0.0
        for weight, iB, _ in self._pair_blocks(points):
            term = iB[a]
            for b in range(self.n):
                if b != a:
                    term = term * np.sum(N[b] * iB[b], axis=-1)[..., None]
            total = total + weight * term
        return np.real(total)

    def contracted_particle_current(self, a: int, points, check: bool = True) -> np.ndarray:
        return lower(self.contracted_current_lower(a, points, check))

    def all_contracted_currents(self, points, check: bool = True) -> np.ndarray:
        """Contravariant contracted currents of all particles, shape (..., n, 4)."""
        points = as_points(points)
        if check:
            self.check_leaf(points)
        N = [self.foliation.normal(points[..., b, :]) for b in range(self.n)]
        total = 0.0
        for weight, iB, _ in self._pair_blocks(points):
            proj = [np.sum(N[b] * iB[b], axis=-1) for b in range(self.n)]
            slots = []
            for a in range(self.n):
                term = iB[a]
                for b in range(self.n):
                    if b != a:
                        term = term * proj[b][..., None]
                slots.append(term)
            total = total + weight * np.stack(slots, axis=-2)
        return lower(np.real(total))

    def particle_currents(self, points) -> np.ndarray:
        """Uncontracted per-particle currents i psi* <->d_a psi, contravariant, shape (..., n, 4)."""
        points = as_points(points)
        total = 0.0
        for weight, iB, overlap in self._pair_blocks(points):
            slots = []
            for a in range(self.n):
                term = iB[a]
                for b in range(self.n):
                    if b != a:
                        term = term * overlap[b][..., None]
                slots.append(term)
            total = total + weight * np.stack(slots, axis=-2)
        return lower(np.real(total))

    def n_particle_density(self, points, metric_factors=None, check: bool = True) -> np.ndarray:
        """|N~^{mu_1}(x_1) ... N~^{mu_n}(x_n) j_{mu_1...mu_n}| with N~ = |g3|^(1/2) N."""
        points = as_points(points)
        if check:
            self.check_leaf(points)
        g = np.ones(self.n) if metric_factors is None else np.asarray(metric_factors, float)
        N = [g[b] * self.foliation.normal(points[..., b, :]) for b in range(self.n)]
        total = 0.0
        for weight, iB, _ in self._pair_blocks(points):
            prod = 1.0
            for b in range(self.n):
                prod = prod * np.sum(N[b] * iB[b], axis=-1)
            total = total + weight * prod
        return np.abs(np.real(total))
