"""Two-frequency interference: conventional density vs the Klein-Gordon time component.

Two beams with frequencies w1, w2 and unit-normalized spatial profiles
phi_1, phi_2 give

    rho = |phi|^2 = C + I,      j_0 = C + alpha I,
    C = (|phi_1|^2 + |phi_2|^2) / 2,
    I = Re[phi_1 phi_2^* exp(-i (w1 - w2) t)],
    alpha = (w1 + w2) / (2 sqrt(w1 w2)).

Each profile is monochromatic: a sum of plane waves that all lie on the
mass shell at its beam's frequency (a Gaussian spread of directions around
the carrier, or a single plane wave). Every branch of the wave function
then carries a single time factor and the decomposition is exact, with no
narrow-band approximation.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .wavefunction import WaveFunction, default_resolution

TRUNCATION = 1e-12
SAMPLES_PER_PERIOD = 256
MIN_TIME_SAMPLES = 256
GRID_FACTOR = 8
ENVELOPES = ("gaussian", "plane")
DENSITY_KINDS = ("conventional", "kg", "abs-kg")


def alpha(omega1: float, omega2: float) -> float:
    """(w1 + w2) / (2 sqrt(w1 w2)); equals 1 exactly when w1 == w2."""
    if omega1 <= 0 or omega2 <= 0:
        raise ValueError("frequencies must be positive")
    if omega1 == omega2:
        return 1.0
    return (omega1 + omega2) / (2.0 * np.sqrt(omega1 * omega2))


@dataclass(frozen=True)
class BeamProfile:
    """Spatial profile of one beam.

    ``direction`` is the carrier angle in the x-y plane (2D) or +1 / -1 (1D).
    ``gaussian`` spreads the carrier over directions with weights
    exp(-(kappa width delta)^2 / 4), truncated below 1e-12 of the peak, which
    focuses the beam to transverse width ~ ``width`` around ``center``.
    """

    direction: float = 0.0
    center: tuple = (0.0, 0.0)
    width: float = 1.0
    envelope: str = "gaussian"

    def __post_init__(self):
        if self.envelope not in ENVELOPES:
            raise ValueError(f"envelope must be one of {ENVELOPES}")
        if self.width <= 0:
            raise ValueError("width must be positive")


@dataclass(frozen=True, eq=False)
class _Profile:
    k: np.ndarray  # (M, dim) wave vectors
    amp: np.ndarray  # (M,) complex amplitudes, including the normalization

    def evaluate(self, x) -> np.ndarray:
        phase = 0.0
        for i in range(self.k.shape[1]):
            phase = phase + x[..., i, None] * self.k[:, i]
        return np.sum(self.amp * np.exp(1j * phase), axis=-1)


def _synthesize(beam: BeamProfile, kappa: float, box: tuple, dim: int) -> tuple:
    """Unnormalized wave vectors and amplitudes of a beam profile."""
    if dim == 1:
        if beam.envelope != "plane":
            raise ValueError("in one dimension only plane-wave profiles lie on the mass shell")
        if beam.direction not in (1, -1, 1.0, -1.0):
            raise ValueError("1D direction must be +1 or -1")
        return np.array([[beam.direction * kappa]]), np.array([1.0 + 0j])
    if dim != 2:
        raise ValueError("interference scenarios support one or two spatial dimensions")
    center = np.asarray(beam.center, dtype=float)
    if beam.envelope == "plane" or kappa == 0:
        if beam.envelope == "gaussian":
            raise ValueError("a Gaussian envelope needs a non-zero carrier momentum")
        k = kappa * np.array([[np.cos(beam.direction), np.sin(beam.direction)]])
        return k, np.exp(-1j * k @ center)
    dmax = min(np.pi, 2.0 * np.sqrt(np.log(1.0 / TRUNCATION)) / (kappa * beam.width))
    # angular step keeps the spatial aliasing period beyond twice the box diagonal
    reach = 2.0 * (np.hypot(*box) + np.linalg.norm(center))
    step = min(np.pi / (kappa * reach), dmax / 16)
    n = int(np.ceil(dmax / step))
    delta = np.linspace(-dmax, dmax, 2 * n + 1)
    if dmax == np.pi:
        delta = delta[:-1]  # -pi and pi are the same direction
    theta = beam.direction + delta
    k = kappa * np.column_stack([np.cos(theta), np.sin(theta)])
    w = np.exp(-((kappa * beam.width * delta) ** 2) / 4)
    keep = w >= TRUNCATION * w.max()
    return k[keep], (w * np.exp(-1j * k @ center))[keep]


@dataclass(frozen=True, eq=False)
class TwoFrequencyScenario:
    omega1: float
    omega2: float
    beam1: BeamProfile
    beam2: BeamProfile
    box: tuple = (10.0, 10.0)
    mass: float = 0.0
    resolution: Optional[int] = None  # quadrature nodes per axis for normalization
    profiles: tuple = field(init=False, repr=False)

    def __post_init__(self):
        box = tuple(float(b) for b in self.box)
        if self.omega1 <= 0 or self.omega2 <= 0:
            raise ValueError("frequencies must be positive")
        if self.mass < 0 or self.omega1 < self.mass or self.omega2 < self.mass:
            raise ValueError("frequencies must lie on or above the mass shell, w >= m >= 0")
        if any(b <= 0 for b in box):
            raise ValueError("box lengths must be positive")
        object.__setattr__(self, "box", box)
        res = self.resolution or default_resolution(len(box))
        axes = [(np.arange(res) + 0.5) * L / res for L in box]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        cell = float(np.prod([L / res for L in box]))
        profiles = []
        for beam, omega in ((self.beam1, self.omega1), (self.beam2, self.omega2)):
            kappa = float(np.sqrt(omega**2 - self.mass**2))
            k, amp = _synthesize(beam, kappa, box, len(box))
            p = _Profile(k, amp)
            norm = np.sqrt(np.sum(np.abs(p.evaluate(mesh)) ** 2) * cell)
            profiles.append(_Profile(k, amp / norm))
        object.__setattr__(self, "profiles", tuple(profiles))

    @property
    def dim(self) -> int:
        return len(self.box)

    @property
    def alpha(self) -> float:
        return alpha(self.omega1, self.omega2)

    @property
    def eta(self) -> float:
        return self.omega2 / self.omega1

    @property
    def beat(self) -> float:
        return self.omega1 - self.omega2

    def profile_values(self, x):
        """(phi_1(x), phi_2(x)); ``x`` has spatial coordinates on its last axis."""
        x = np.asarray(x, dtype=float)[..., : self.dim]
        return self.profiles[0].evaluate(x), self.profiles[1].evaluate(x)

    def norms(self, resolution=None):
        """Quadrature of the integral of |phi_a|^2 over the box, per profile."""
        res = resolution or default_resolution(self.dim)
        axes = [(np.arange(res) + 0.5) * L / res for L in self.box]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        cell = float(np.prod([L / res for L in self.box]))
        p1, p2 = self.profile_values(mesh)
        return float(np.sum(np.abs(p1) ** 2) * cell), float(np.sum(np.abs(p2) ** 2) * cell)

    def to_wavefunction(self) -> WaveFunction:
        """The same psi as a Klein-Gordon-normalized mode sum for the current module."""
        V = float(np.prod(self.box))
        ks, cs = [], []
        for prof, omega in zip(self.profiles, (self.omega1, self.omega2)):
            k3 = np.zeros((len(prof.k), 3))
            k3[:, : self.dim] = prof.k
            ks.append(k3)
            # psi amplitude amp / (2 sqrt(w)) equals c / sqrt(2 w V)
            cs.append(prof.amp * np.sqrt(V / 2.0))
        return WaveFunction(np.concatenate(ks), self.mass, np.concatenate(cs), self.box)


@dataclass(frozen=True)
class Decomposition:
    C: np.ndarray
    I: np.ndarray  # noqa: E741
    rho: np.ndarray
    j0: np.ndarray


def _rho(p1, p2, w1, w2, t):
    phi = (np.exp(-1j * w1 * t) * p1 + np.exp(-1j * w2 * t) * p2) / np.sqrt(2.0)
    return np.abs(phi) ** 2


def _j0(p1, p2, w1, w2, t):
    # psi = sum_a e^{-i w_a t} phi_a / (2 sqrt(w_a)); j_0 = -2 Im(psi* d_t psi)
    e1 = np.exp(-1j * w1 * t) * p1 / (2.0 * np.sqrt(w1))
    e2 = np.exp(-1j * w2 * t) * p2 / (2.0 * np.sqrt(w2))
    psi = e1 + e2
    dpsi = -1j * (w1 * e1 + w2 * e2)
    return -2.0 * np.imag(np.conj(psi) * dpsi)


def _c_and_i(p1, p2, w1, w2, t):
    C = 0.5 * (np.abs(p1) ** 2 + np.abs(p2) ** 2)
    I = np.real(p1 * np.conj(p2) * np.exp(-1j * (w1 - w2) * t))  # noqa: E741
    return C, I


def conventional_density(sc: TwoFrequencyScenario, x, t: float) -> np.ndarray:
    """rho = |phi(x, t)|^2 of the conventionally normalized state."""
    p1, p2 = sc.profile_values(x)
    return _rho(p1, p2, sc.omega1, sc.omega2, t)


def kg_density(sc: TwoFrequencyScenario, x, t: float) -> np.ndarray:
    """j_0(x, t) evaluated from psi and its time derivative."""
    p1, p2 = sc.profile_values(x)
    return _j0(p1, p2, sc.omega1, sc.omega2, t)


def classical_density(sc: TwoFrequencyScenario, x) -> np.ndarray:
    p1, p2 = sc.profile_values(x)
    return 0.5 * (np.abs(p1) ** 2 + np.abs(p2) ** 2)


def interference_term(sc: TwoFrequencyScenario, x, t: float) -> np.ndarray:
    p1, p2 = sc.profile_values(x)
    return _c_and_i(p1, p2, sc.omega1, sc.omega2, t)[1]


def decomposition(sc: TwoFrequencyScenario, x, t: float) -> Decomposition:
    p1, p2 = sc.profile_values(x)
    C, I = _c_and_i(p1, p2, sc.omega1, sc.omega2, t)  # noqa: E741
    return Decomposition(C, I, _rho(p1, p2, sc.omega1, sc.omega2, t), _j0(p1, p2, sc.omega1, sc.omega2, t))


def time_samples(sc: TwoFrequencyScenario, T: float, t0: float = 0.0,
                 samples_per_period: int = SAMPLES_PER_PERIOD) -> np.ndarray:
    """Midpoint nodes on [t0, t0 + T], at least ``samples_per_period`` per beat period."""
    if T <= 0:
        raise ValueError("averaging window must be positive")
    n = MIN_TIME_SAMPLES
    if sc.beat != 0:
        n = max(n, int(np.ceil(samples_per_period * T * abs(sc.beat) / (2 * np.pi))))
    return t0 + (np.arange(n) + 0.5) * (T / n)


def _averages(sc, x, T, t0, samples_per_period, kinds):
    p1, p2 = sc.profile_values(x)
    ts = time_samples(sc, T, t0, samples_per_period)
    acc = {k: np.zeros(np.shape(p1)) for k in kinds}
    for t in ts:
        if "conventional" in kinds:
            acc["conventional"] += _rho(p1, p2, sc.omega1, sc.omega2, t)
        if "kg" in kinds or "abs-kg" in kinds:
            j = _j0(p1, p2, sc.omega1, sc.omega2, t)
            if "kg" in kinds:
                acc["kg"] += j
            if "abs-kg" in kinds:
                acc["abs-kg"] += np.abs(j)
    return {k: v / len(ts) for k, v in acc.items()}


def time_average(kind: str, sc: TwoFrequencyScenario, x, T: float, t0: float = 0.0,
                 samples_per_period: int = SAMPLES_PER_PERIOD) -> np.ndarray:
    """Midpoint-rule average over [t0, t0 + T] of rho, j_0 or |j_0|."""
    if kind not in DENSITY_KINDS:
        raise ValueError(f"density kind must be one of {DENSITY_KINDS}")
    return _averages(sc, x, T, t0, samples_per_period, (kind,))[kind]


def sign_flip_set(sc: TwoFrequencyScenario, x) -> np.ndarray:
    """Points where j_0 turns negative at some time: C < alpha |phi_1 phi_2|."""
    p1, p2 = sc.profile_values(x)
    C = 0.5 * (np.abs(p1) ** 2 + np.abs(p2) ** 2)
    return C < sc.alpha * np.abs(p1 * p2)


# -- deviation maps --------------------------------------------------------------


def grid_points(axes: Sequence[np.ndarray]) -> np.ndarray:
    mesh = np.meshgrid(*[np.asarray(a, float) for a in axes], indexing="ij")
    return np.stack(mesh, axis=-1)


def correlation_length(field_: np.ndarray, spacing: Sequence[float]) -> float:
    """Smallest lag (over axes) at which the normalized autocorrelation drops below 1/e."""
    f = np.asarray(field_, dtype=float)
    f = f - f.mean()
    if not np.any(f):
        return float("nan")
    lengths = []
    for axis, h in enumerate(spacing):
        n = f.shape[axis]
        c0 = np.sum(f * f)
        prev = 1.0
        for lag in range(1, n):
            a = np.take(f, np.arange(n - lag), axis=axis)
            b = np.take(f, np.arange(lag, n), axis=axis)
            # unbiased per-lag normalization so long lags are not damped by overlap
            r = np.sum(a * b) / (c0 * (n - lag) / n)
            if r < np.exp(-1):
                # linear interpolation between the bracketing lags
                lengths.append(h * (lag - 1 + (prev - np.exp(-1)) / (prev - r)))
                break
            prev = r
    return float(min(lengths)) if lengths else float("inf")


@dataclass(frozen=True, eq=False)
class DeviationMap:
    axes: tuple
    values: np.ndarray  # <|j_0|>_T - <rho>_T
    abs_j0_avg: np.ndarray
    rho_avg: np.ndarray
    C: np.ndarray
    correlation_length: float
    beat_length: float  # 1 / |w1 - w2|

    @property
    def ratio(self) -> float:
        return self.correlation_length / self.beat_length


def deviation_map(sc: TwoFrequencyScenario, axes: Sequence[np.ndarray], T: float, t0: float = 0.0,
                  samples_per_period: int = SAMPLES_PER_PERIOD) -> DeviationMap:
    """Map of <|j_0|>_T - <rho>_T on a grid given by one coordinate array per axis.

    Where j_0 never turns negative, or where the profiles do not overlap, both
    averages agree and the map vanishes; for long windows it tends to <|j_0|> - C.
    """
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    if len(axes) != sc.dim:
        raise ValueError("one coordinate array per spatial dimension is required")
    spacing = [float(np.max(np.diff(a))) if len(a) > 1 else 0.0 for a in axes]
    beat_length = 1.0 / abs(sc.beat) if sc.beat != 0 else float("inf")
    if any(h > beat_length / GRID_FACTOR * (1 + 1e-9) for h in spacing):
        raise ValueError(f"grid spacing must be at most 1/(8 |w1 - w2|) = {beat_length / GRID_FACTOR:.6g}")
    pts = grid_points(axes)
    av = _averages(sc, pts, T, t0, samples_per_period, ("conventional", "abs-kg"))
    values = av["abs-kg"] - av["conventional"]
    if sc.beat == 0:
        values = np.zeros_like(values)  # j_0 = rho >= 0 pointwise
    corr = correlation_length(values, spacing) if np.any(values) else float("nan")
    return DeviationMap(axes, values, av["abs-kg"], av["conventional"], classical_density(sc, pts), corr,
                        beat_length)


GRID_COLUMNS = ("x", "y", "C", "I", "rho", "j0", "abs_j0_avg")


def grid_rows(sc: TwoFrequencyScenario, axes: Sequence[np.ndarray], t: float, T: float):
    """Rows of the grid CSV: instantaneous fields at t and <|j_0|> over [0, T]."""
    pts = grid_points(axes)
    d = decomposition(sc, pts, t)
    avg = time_average("abs-kg", sc, pts, T)
    flat = pts.reshape(-1, sc.dim)
    for i in range(len(flat)):
        x = float(flat[i, 0])
        y = float(flat[i, 1]) if sc.dim > 1 else 0.0
        yield (x, y, *(float(v.reshape(-1)[i]) for v in (d.C, d.I, d.rho, d.j0, avg)))


def write_grid_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GRID_COLUMNS)
        for row in rows:
            w.writerow([f"{v:.17g}" for v in row])
