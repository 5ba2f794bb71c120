"""Trajectory congruences: sampling, crossing bookkeeping, complete surfaces.

A congruence is launched from points on a spacelike surface, sampled with
density |j~| (or on a weighted grid). Because a trajectory may cross the
launch surface several times, it is hit in proportion to its number of
launch crossings m0; its own probability mass is therefore estimated as
``tau = w / m0``. Every flux estimate below is a tau-weighted sum:

* unsigned flux through Q: sum tau * m_Q        (integral of |j~| over Q)
* signed flux through Q:   sum tau * sigma_Q    (net future-ward crossings)
* first-crossing mass:     sum tau * [m_Q > 0]  (mass of trajectories reaching Q)

Standard errors come from batch means over contiguous blocks of samples.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from .current import CurrentField
from .geometry import Hypersurface, Patch
from .trajectories import (
    DEFAULT_CHUNK,
    CrossingSet,
    IntegratorConfig,
    TrajectoryBatch,
    batch_crossings,
    integrate_many,
)
from .wavefunction import default_resolution

SAMPLERS = ("weighted-grid", "rejection-monte-carlo")
STRATEGIES = ("first-crossing-selection", "connected-constant-sign-patches")
N_BATCHES = 32


def batch_means(values: np.ndarray, n_batches: int = N_BATCHES):
    """(sum of values, standard error of that sum) from contiguous batch sums."""
    values = np.asarray(values, dtype=float)
    total = float(np.sum(values))
    if len(values) < 2 * n_batches:
        return total, float("nan")
    sums = np.array([b.sum() for b in np.array_split(values, n_batches)])
    return total, float(np.sqrt(n_batches * np.var(sums, ddof=1)))


def surface_density(cf: CurrentField, surface: Hypersurface, patch_index: int, points) -> np.ndarray:
    p = surface.patches[patch_index]
    return cf.density(points, p.normal, p.metric_factor)


def density_bound(cf: CurrentField, patch: Patch) -> float:
    """Upper bound of |j~| on a patch from the per-component current bound."""
    return float(patch.metric_factor * np.sum(np.abs(patch.normal) * cf.bound()))


def unsigned_quadrature(cf: CurrentField, surface: Hypersurface, resolution=None) -> float:
    """Midpoint quadrature of the integral of |j~| over a bounded surface."""
    total = 0.0
    for i, p in enumerate(surface.patches):
        pts, cell = surface.midpoint_grid(i, resolution or default_resolution(p.dim))
        total += float(np.sum(surface_density(cf, surface, i, pts)) * cell)
    return total


@dataclass(eq=False)
class Congruence:
    batch: TrajectoryBatch
    surface: Hypersurface
    launch_points: np.ndarray  # (n, 4)
    launch_density: np.ndarray  # p~ at each launch point
    weights: np.ndarray  # launch weights w
    launch_multiplicity: np.ndarray  # m0: crossings of the launch surface
    sampler: str
    seed: Optional[int]
    cf: CurrentField = field(repr=False)

    def __len__(self):
        return len(self.weights)

    @property
    def trajectory_mass(self) -> np.ndarray:
        """tau = w / m0, the estimated probability mass carried by each trajectory."""
        return self.weights / self.launch_multiplicity

    def trajectory(self, i: int):
        return self.batch.trajectory(i)


def _grid_launch(cf, surface, n_samples):
    pts, dens, w = [], [], []
    for i, p in enumerate(surface.patches):
        res = max(1, int(round((n_samples / len(surface.patches)) ** (1.0 / p.dim))))
        x, cell = surface.midpoint_grid(i, res)
        d = surface_density(cf, surface, i, x)
        pts.append(x), dens.append(d), w.append(d * cell)
    pts, dens, w = np.concatenate(pts), np.concatenate(dens), np.concatenate(w)
    keep = w > 0
    return pts[keep], dens[keep], w[keep]


def _rejection_launch(cf, surface, n_samples, rng):
    patches = surface.patches
    bounds = np.array([density_bound(cf, p) for p in patches])
    areas = np.array([p.area() for p in patches])
    if not np.all(np.isfinite(areas)):
        raise ValueError("rejection sampling needs bounded patches")
    envelope = bounds * areas
    probs = envelope / envelope.sum()
    pts, dens = [], []
    got = 0
    block = max(1024, 2 * n_samples)
    while got < n_samples:
        which = rng.choice(len(patches), size=block, p=probs)
        u = rng.random((block, max(p.dim for p in patches)))
        acc_u = rng.random(block)
        for i, p in enumerate(patches):
            sel = which == i
            lo = np.array([b[0] for b in p.bounds])
            hi = np.array([b[1] for b in p.bounds])
            x = p.embed(lo + u[sel, : p.dim] * (hi - lo))
            d = surface_density(cf, surface, i, x)
            ok = acc_u[sel] * bounds[i] < d
            pts.append(x[ok]), dens.append(d[ok])
            got += int(ok.sum())
    # keep proposal order within blocks: points are taken patch-grouped per block, deterministically
    pts, dens = np.concatenate(pts)[:n_samples], np.concatenate(dens)[:n_samples]
    return pts, dens


def launch(cf: CurrentField, surface: Hypersurface, n_samples: int, sampler: str = "rejection-monte-carlo",
           seed: Optional[int] = 0, cfg: IntegratorConfig = IntegratorConfig(), workers: int = 1,
           resolution=None, chunk: int = DEFAULT_CHUNK) -> Congruence:
    """Sample launch points with density p~ = |j~| on ``surface`` and integrate their trajectories.

    The integrator config should bound the run (``t_min``/``t_max``) so that
    every crossing of the launch and query surfaces lies inside it.
    """
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    if sampler not in SAMPLERS:
        raise ValueError(f"sampler must be one of {SAMPLERS}")
    if not surface.spacelike:
        raise ValueError("launch surface must be spacelike")
    total = unsigned_quadrature(cf, surface, resolution)
    if total <= 0:
        raise ValueError("p~ vanishes identically on the launch surface")
    if sampler == "weighted-grid":
        pts, dens, w = _grid_launch(cf, surface, n_samples)
    else:
        pts, dens = _rejection_launch(cf, surface, n_samples, np.random.default_rng(seed))
        w = np.full(len(pts), total / len(pts))
    batch = integrate_many(cf, pts, cfg, workers=workers, chunk=chunk)
    cs = batch_crossings(batch, surface)
    m0 = np.maximum(np.bincount(cs.traj, minlength=len(batch)), 1)
    return Congruence(batch, surface, pts, dens, w, m0.astype(float), sampler, seed, cf)


# -- crossing reports ------------------------------------------------------------


@dataclass(eq=False)
class CrossingReport:
    crossings: CrossingSet
    multiplicity: np.ndarray  # per trajectory
    histogram: dict  # multiplicity -> number of trajectories
    signed_flux: float
    signed_flux_se: float
    unsigned_flux: float
    unsigned_flux_se: float
    first_crossing_mass: float
    first_crossing_se: float
    never_crossing: int
    never_crossing_mass: float
    never_crossing_left_domain: int
    quadrature_unsigned: Optional[float] = None

    def for_trajectory(self, i: int) -> list:
        return self.crossings.for_trajectory(i)

    def to_dict(self) -> dict:
        return {
            "n_trajectories": int(len(self.multiplicity)),
            "multiplicity_histogram": {str(k): int(v) for k, v in sorted(self.histogram.items())},
            "signed_flux": self.signed_flux,
            "signed_flux_se": self.signed_flux_se,
            "unsigned_flux": self.unsigned_flux,
            "unsigned_flux_se": self.unsigned_flux_se,
            "first_crossing_mass": self.first_crossing_mass,
            "first_crossing_se": self.first_crossing_se,
            "never_crossing": self.never_crossing,
            "never_crossing_mass": self.never_crossing_mass,
            "never_crossing_left_domain": self.never_crossing_left_domain,
            "quadrature_unsigned": self.quadrature_unsigned,
        }


def crossing_report(c: Congruence, query: Hypersurface, quadrature: bool = True, resolution=None) -> CrossingReport:
    """Multiplicities and flux estimates of the congruence through ``query``."""
    cs = batch_crossings(c.batch, query)
    n = len(c)
    tau = c.trajectory_mass
    mult = np.bincount(cs.traj, minlength=n)
    sigma = np.bincount(cs.traj, weights=cs.orientation.astype(float), minlength=n)
    unsigned, unsigned_se = batch_means(tau * mult)
    signed, signed_se = batch_means(tau * sigma)
    first, first_se = batch_means(tau * (mult > 0))
    never = mult == 0
    values, counts = np.unique(mult, return_counts=True)
    quad = None
    if quadrature and all(np.isfinite(p.area()) for p in query.patches) and query.spacelike:
        quad = unsigned_quadrature(c.cf, query, resolution)
    return CrossingReport(
        crossings=cs,
        multiplicity=mult,
        histogram={int(v): int(k) for v, k in zip(values, counts)},
        signed_flux=signed,
        signed_flux_se=signed_se,
        unsigned_flux=unsigned,
        unsigned_flux_se=unsigned_se,
        first_crossing_mass=first,
        first_crossing_se=first_se,
        never_crossing=int(never.sum()),
        never_crossing_mass=float(np.sum(tau[never])),
        never_crossing_left_domain=int(np.sum(never & (c.batch.status != 0))),
        quadrature_unsigned=quad,
    )


# -- complete surfaces -----------------------------------------------------------


@dataclass(eq=False)
class CompleteSurface:
    """A surface Sigma' selected from the congruence, with its probability accounting.

    ``patch_masses`` are tau-weighted crossing counts per patch; ``recrossings``
    counts trajectories crossing a patch more than once (zero certifies the
    patch as crossed at most once by every sampled trajectory).
    """

    strategy: str
    surface: Hypersurface
    coverage_mass: float
    coverage_se: float
    patch_masses: np.ndarray
    patch_signs: np.ndarray
    recrossings: np.ndarray

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "coverage_mass": self.coverage_mass,
            "coverage_se": self.coverage_se,
            "patches": [
                {"bounds": [list(map(float, b)) for b in p.bounds], "mass": float(m), "sign": int(s),
                 "recrossings": int(r)}
                for p, m, s, r in zip(self.surface.patches, self.patch_masses, self.patch_signs, self.recrossings)
            ],
        }


def _plane_cells(reference: Hypersurface, resolution):
    p = reference.patches[0]
    res = np.broadcast_to(np.asarray(resolution, dtype=int), (p.dim,))
    lo = np.array([b[0] for b in p.bounds])
    hi = np.array([b[1] for b in p.bounds])
    return p, res, lo, hi, (hi - lo) / res


def _cell_index(reference, x, lo, width, res):
    u = reference.fold(0, x)
    idx = np.floor((u - lo) / width).astype(int)
    return np.clip(idx, 0, res - 1)


def _sub_patch(p: Patch, lo, hi) -> Patch:
    return Patch(p.normal, p.base, tuple((float(a), float(b)) for a, b in zip(lo, hi)), p.metric_factor)


def _periodic_label(mask: np.ndarray, periodic: bool):
    labels, n = ndimage.label(mask)
    if not periodic or n == 0:
        return labels, n
    # merge labels that touch across each periodic face
    parent = np.arange(n + 1)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for axis in range(mask.ndim):
        first = np.take(labels, 0, axis=axis)
        last = np.take(labels, -1, axis=axis)
        for a, b in zip(first.ravel(), last.ravel()):
            if a and b:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(n + 1)])
    uniq, relabel = np.unique(roots, return_inverse=True)
    return relabel.reshape(-1)[labels], len(uniq) - 1


def complete_surface(c: Congruence, strategy: str = "first-crossing-selection",
                     reference: Optional[Hypersurface] = None, resolution=None) -> CompleteSurface:
    """Assemble a surface crossed at most once by every sampled trajectory.

    ``first-crossing-selection`` keeps, for each trajectory, its crossing of
    the reference plane with smallest s; the cells of the plane that hold kept
    crossings form the patches, and the coverage mass is their total.

    ``connected-constant-sign-patches`` splits the reference plane into
    maximal connected regions of constant sign of j~ and reports the mass
    through each with a re-crossing count; the coverage mass is the largest
    single-region mass, each certified region being a complete-surface
    candidate on its own.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}")
    reference = c.surface if reference is None else reference
    if len(reference.patches) != 1 or not reference.spacelike:
        raise ValueError("the reference must be a single spacelike plane")
    p, res, lo, hi, width = _plane_cells(reference, resolution or default_resolution(reference.patches[0].dim))
    cs = batch_crossings(c.batch, reference)
    if len(cs.traj) == 0:
        raise ValueError("no trajectory crosses the reference surface")
    tau = c.trajectory_mass
    cell = _cell_index(reference, cs.x, lo, width, res)
    flat = np.ravel_multi_index(tuple(cell.T), tuple(res))

    if strategy == "first-crossing-selection":
        # crossings are sorted by (trajectory, s); the first of each trajectory is kept
        first = np.r_[True, cs.traj[1:] != cs.traj[:-1]]
        kept_cells = flat[first]
        kept_tau = tau[cs.traj[first]]
        cells = np.unique(kept_cells)
        masses = np.array([kept_tau[kept_cells == k].sum() for k in cells])
        per_traj = np.zeros(len(c))
        per_traj[cs.traj[first]] = tau[cs.traj[first]]
        coverage, se = batch_means(per_traj)
        patches, signs, recross = [], [], []
        for k in cells:
            idx = np.array(np.unravel_index(k, tuple(res)))
            patches.append(_sub_patch(p, lo + idx * width, lo + (idx + 1) * width))
            signs.append(1)
            recross.append(0)
        return CompleteSurface(strategy, Hypersurface("piecewise-planar", tuple(patches)), coverage, se,
                               masses, np.array(signs), np.array(recross))

    # connected constant-sign regions of j~ on the reference grid
    pts, _ = reference.midpoint_grid(0, res)
    jt = np.sum(p.normal * c.cf.current_lower(pts), axis=-1).reshape(tuple(res))
    labels = np.zeros(tuple(res), dtype=int)
    n_regions = 0
    region_sign = []
    for sgn in (1, -1):
        lab, n = _periodic_label(sgn * jt > 0, reference.period is not None)
        labels[lab > 0] = lab[lab > 0] + n_regions
        n_regions += n
        region_sign += [sgn] * n
    # a crossing's orientation is the exact local sign of j~; crossings binned into
    # a cell of the other sign (next to a j~ = 0 line) move to a neighbouring cell
    sign_grid = np.sign(jt)
    bad = np.flatnonzero(sign_grid.reshape(-1)[flat] != cs.orientation)
    for k in bad:
        for axis in range(p.dim):
            for step in (-1, 1):
                nb = cell[k].copy()
                nb[axis] += step
                if reference.period is not None:
                    nb[axis] %= res[axis]
                elif not 0 <= nb[axis] < res[axis]:
                    continue
                if sign_grid[tuple(nb)] == cs.orientation[k]:
                    cell[k] = nb
                    break
            else:
                continue
            break
    flat = np.ravel_multi_index(tuple(cell.T), tuple(res))
    region_of = labels.reshape(-1)[flat]
    masses = np.zeros(n_regions)
    recross = np.zeros(n_regions, dtype=int)
    per_region_values = np.zeros((n_regions, len(c)))
    for r in range(1, n_regions + 1):
        sel = region_of == r
        counts = np.bincount(cs.traj[sel], minlength=len(c))
        per_region_values[r - 1] = tau * counts
        masses[r - 1] = per_region_values[r - 1].sum()
        recross[r - 1] = int(np.sum(counts > 1))
    best = int(np.argmax(masses)) if n_regions else 0
    coverage, se = batch_means(per_region_values[best]) if n_regions else (0.0, float("nan"))
    patches = []
    for r in range(1, n_regions + 1):
        idx = np.argwhere(labels == r)
        # bounding box of the region's cells; the label map keeps the exact shape
        patches.append(_sub_patch(p, lo + idx.min(axis=0) * width, lo + (idx.max(axis=0) + 1) * width))
    surf = Hypersurface("piecewise-planar", tuple(patches)) if patches else reference
    return CompleteSurface(strategy, surf, coverage, se, masses, np.array(region_sign), recross)


# -- export ------------------------------------------------------------------------

CROSSING_COLUMNS = ("trajectory_id", "s", "t", "x", "y", "z", "orientation", "patch", "grazing")


def crossing_rows(report: CrossingReport):
    cs = report.crossings
    for k in range(len(cs.traj)):
        yield (int(cs.traj[k]), float(cs.s[k]), *map(float, cs.x[k]),
               "future-ward" if cs.orientation[k] > 0 else "past-ward", int(cs.patch[k]), int(cs.grazing[k]))


def write_crossings_csv(report: CrossingReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CROSSING_COLUMNS)
        for row in crossing_rows(report):
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])


def write_report_json(path, report: CrossingReport, complete: Optional[CompleteSurface] = None, extra=None) -> None:
    doc = {"crossings": report.to_dict()}
    if complete is not None:
        doc["complete_surface"] = complete.to_dict()
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
