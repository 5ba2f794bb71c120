"""Positive-frequency solutions of the free Klein-Gordon equation as finite mode sums.

A wave function is a box-normalized superposition of plane waves
``exp(-i k.x)`` with ``k^0 = +omega``. Two normalizations are supported:

* ``klein-gordon``: each mode carries ``c / sqrt(2 omega V)``, so the
  Klein-Gordon scalar product of the state with itself is ``sum |c|^2``;
* ``conventional``: each mode carries ``c / sqrt(V)``, so the plain L2 norm
  over the box is ``sum |c|^2``.

All evaluations are analytic and vectorize over (..., 4) point arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import Hypersurface, as_points

KINDS = ("klein-gordon", "conventional")


def default_resolution(dim: int) -> int:
    """Midpoint nodes per spatial dimension used when none is given."""
    return {1: 1024, 2: 128, 3: 32}[dim]


@dataclass(frozen=True)
class PlaneWaveMode:
    k: tuple
    m: float = 0.0
    c: complex = 1.0
    negative_frequency: bool = False

    @property
    def omega(self) -> float:
        return float(np.sqrt(np.dot(self.k, self.k) + self.m**2))


@dataclass(frozen=True, eq=False)
class WaveFunction:
    k: np.ndarray  # (M, 3) spatial momenta
    mass: float
    coeffs: np.ndarray  # (M,) complex
    box: tuple  # spatial box lengths, one per active dimension
    kind: str = "klein-gordon"
    freq_sign: Optional[np.ndarray] = None  # (M,) +1 / -1; -1 only in test fixtures

    def __post_init__(self):
        k = np.atleast_2d(np.asarray(self.k, dtype=float))
        if k.shape[1] != 3:
            raise ValueError("mode momenta must be 3-vectors")
        c = np.asarray(self.coeffs, dtype=complex).reshape(-1)
        if len(c) != len(k):
            raise ValueError("one coefficient per mode is required")
        if len(k) == 0:
            raise ValueError("a wave function needs at least one mode")
        if self.kind not in KINDS:
            raise ValueError(f"normalization kind must be one of {KINDS}")
        box = tuple(float(b) for b in self.box)
        if not 1 <= len(box) <= 3 or any(b <= 0 for b in box):
            raise ValueError("box must list 1 to 3 positive lengths")
        if np.any(k[:, len(box):] != 0):
            raise ValueError("momentum components beyond the box dimension must vanish")
        if self.mass < 0:
            raise ValueError("mass must be non-negative")
        omega = np.sqrt(np.sum(k**2, axis=1) + self.mass**2)
        if np.any(omega == 0):
            raise ValueError("zero-frequency mode (k = 0, m = 0) is degenerate")
        sign = np.ones(len(k)) if self.freq_sign is None else np.asarray(self.freq_sign, dtype=float)
        if not np.all(np.isin(sign, (-1.0, 1.0))):
            raise ValueError("frequency signs must be +1 or -1")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "freq_sign", sign)
        object.__setattr__(self, "mass", float(self.mass))

        norm = np.sqrt(2 * omega * self.volume) if self.kind == "klein-gordon" else np.sqrt(self.volume)
        k_up = np.column_stack([sign * omega, k])
        # k_mu with the lower index: (k^0, -k)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "amplitudes", c / norm)
        object.__setattr__(self, "k_up", k_up)
        object.__setattr__(self, "k_low", k_up * np.array([1.0, -1.0, -1.0, -1.0]))

    @classmethod
    def from_modes(cls, modes: Sequence[PlaneWaveMode], box, kind: str = "klein-gordon",
                   allow_negative_frequency: bool = False) -> "WaveFunction":
        if not modes:
            raise ValueError("a wave function needs at least one mode")
        masses = {float(m.m) for m in modes}
        if len(masses) != 1:
            raise ValueError("all modes of a free field share one mass")
        if any(m.negative_frequency for m in modes) and not allow_negative_frequency:
            raise ValueError("negative-frequency modes are only allowed as explicit test fixtures")
        return cls(
            k=np.array([np.pad(np.asarray(m.k, float), (0, 3 - len(m.k))) for m in modes]),
            mass=masses.pop(),
            coeffs=np.array([m.c for m in modes]),
            box=box,
            kind=kind,
            freq_sign=np.array([-1.0 if m.negative_frequency else 1.0 for m in modes]),
        )

    @property
    def dim(self) -> int:
        return len(self.box)

    @property
    def volume(self) -> float:
        return float(np.prod(self.box))

    @property
    def positive_frequency(self) -> bool:
        return bool(np.all(self.freq_sign > 0))

    def is_box_periodic(self, tol: float = 1e-9) -> bool:
        n = self.k[:, : self.dim] * np.asarray(self.box) / (2 * np.pi)
        return bool(np.all(np.abs(n - np.round(n)) < tol))

    def with_kind(self, kind: str) -> "WaveFunction":
        return WaveFunction(self.k, self.mass, self.coeffs, self.box, kind, self.freq_sign)

    # -- evaluation -------------------------------------------------------

    def _terms(self, x) -> np.ndarray:
        # elementwise phase, not matmul: results must not depend on batch layout
        x = as_points(x)
        kl = self.k_low
        phase = (x[..., 0, None] * kl[:, 0] + x[..., 1, None] * kl[:, 1]
                 + x[..., 2, None] * kl[:, 2] + x[..., 3, None] * kl[:, 3])
        return self.amplitudes * np.exp(-1j * phase)

    def _grad(self, e) -> np.ndarray:
        return np.sum(e[..., :, None] * (-1j * self.k_low), axis=-2)

    def evaluate(self, x) -> np.ndarray:
        return self._terms(x).sum(axis=-1)

    def gradient(self, x) -> np.ndarray:
        """Covariant derivative components d_mu psi, shape (..., 4)."""
        return self._grad(self._terms(x))

    def value_and_gradient(self, x):
        e = self._terms(x)
        return e.sum(axis=-1), self._grad(e)

    def hessian(self, x) -> np.ndarray:
        """d_mu d_nu psi, shape (..., 4, 4)."""
        e = self._terms(x)
        return -np.einsum("...m,mi,mj->...ij", e, self.k_low, self.k_low)

    def kg_residual(self) -> np.ndarray:
        """(d^mu d_mu + m^2) applied to each mode, divided by the mode itself."""
        return -(self.k_up[:, 0] ** 2 - np.sum(self.k**2, axis=1)) + self.mass**2

    def __call__(self, x):
        return self.evaluate(x)


def make_two_mode(k1, k2, m: float, V: float, box: Optional[Sequence[float]] = None) -> WaveFunction:
    """The equal-weight two-frequency state (|k1> + |k2>)/sqrt(2), Klein-Gordon normalized.

    Equal momenta collapse to the single normalized mode |k1>.
    """
    if V <= 0:
        raise ValueError("volume must be positive")
    k1 = np.pad(np.asarray(k1, dtype=float), (0, 3 - len(k1)))
    k2 = np.pad(np.asarray(k2, dtype=float), (0, 3 - len(k2)))
    if box is None:
        nz = np.flatnonzero((k1 != 0) | (k2 != 0))
        dim = int(nz.max()) + 1 if len(nz) else 1
        box = (V ** (1.0 / dim),) * dim
    elif not np.isclose(np.prod(box), V, rtol=1e-12):
        raise ValueError("box lengths must multiply to V")
    if np.array_equal(k1, k2):
        return WaveFunction(k1[None, :], m, np.array([1.0]), box)
    return WaveFunction(np.array([k1, k2]), m, np.full(2, 1 / np.sqrt(2)), box)


def random_box_state(rng: np.random.Generator, n_modes: int, dim: int = 1, nmax: int = 3,
                     mass: Optional[float] = None, L: float = 2 * np.pi,
                     kind: str = "klein-gordon") -> WaveFunction:
    """Random normalized state on distinct box-periodic modes k = 2 pi n / L."""
    lattice = np.array(np.meshgrid(*[np.arange(-nmax, nmax + 1)] * dim, indexing="ij")).reshape(dim, -1).T
    if mass is None:
        mass = float(rng.uniform(0.0, 2.0))
    if mass == 0:
        lattice = lattice[np.any(lattice != 0, axis=1)]
    idx = rng.choice(len(lattice), size=n_modes, replace=False)
    k = np.zeros((n_modes, 3))
    k[:, :dim] = lattice[idx] * 2 * np.pi / L
    c = rng.normal(size=n_modes) + 1j * rng.normal(size=n_modes)
    c /= np.linalg.norm(c)
    return WaveFunction(k, mass, c, (L,) * dim, kind)


def box_surface(w: WaveFunction, t: float) -> Hypersurface:
    """The periodic constant-time plane covering the wave function's box."""
    return Hypersurface.constant_time(t, w.box)


def kg_inner_product(a: WaveFunction, b: WaveFunction, surface: Hypersurface, resolution=None) -> complex:
    """i * integral dS^mu (a* d_mu b - b d_mu a*) by midpoint quadrature."""
    if not surface.spacelike:
        raise ValueError("the Klein-Gordon scalar product needs a spacelike surface")
    total = 0.0 + 0.0j
    for i, patch in enumerate(surface.patches):
        res = resolution or default_resolution(patch.dim)
        pts, cell = surface.midpoint_grid(i, res)
        va, ga = a.value_and_gradient(pts)
        vb, gb = b.value_and_gradient(pts)
        integrand = 1j * (np.conj(va)[:, None] * gb - vb[:, None] * np.conj(ga))
        # dS^mu X_mu with X carrying a lower index
        dS = patch.normal * patch.metric_factor * cell
        total += np.sum(integrand @ dS)
    return complex(total)


def conventional_norm(w: WaveFunction, t: float, resolution=None) -> float:
    """Integral of |phi|^2 over the box at time t."""
    if w.kind != "conventional":
        raise ValueError("conventional_norm needs a conventionally normalized wave function")
    surf = box_surface(w, t)
    pts, cell = surf.midpoint_grid(0, resolution or default_resolution(w.dim))
    return float(np.sum(np.abs(w.evaluate(pts)) ** 2) * cell)
