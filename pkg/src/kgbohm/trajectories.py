"""Bohmian trajectories: integral curves dx^mu/ds = j^mu(x) of the conserved current.

Curves are integrated in the affine parameter s, never in coordinate time,
because dt/ds = j^0 changes sign wherever the particle runs backwards in
time. Integration proceeds in both directions from the launch point.

Storage is batch-first: a :class:`TrajectoryBatch` keeps all samples of many
curves in flat arrays, and :class:`Trajectory` is a view of one curve (one
particle of one curve, for n-particle systems).
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _dopri
from .current import CurrentField, NParticleCurrent
from .geometry import Hypersurface, as_points, minkowski_dot

EVENT_KINDS = ("j0-sign-flip", "time-reversal", "surface-crossing", "stagnation-halt")
EVENT_TOL = 1e-10
DEFAULT_CHUNK = 4096


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-10
    atol: float = 1e-10
    max_step: float = np.inf
    max_s: float = 100.0  # per direction
    stagnation: Optional[float] = None  # absolute threshold on |j|; None -> stagnation_rel * max|j|
    stagnation_rel: float = 1e-12
    t_min: float = -np.inf
    t_max: float = np.inf
    spatial_bounds: Optional[tuple] = None  # ((lo, hi), ...) per spatial axis
    directions: tuple = (-1, 1)
    surfaces: tuple = ()  # crossings of these are recorded as events

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")
        if self.stagnation is not None and self.stagnation <= 0:
            raise ValueError("stagnation threshold must be positive")
        if self.stagnation_rel <= 0 or self.max_s <= 0 or self.max_step <= 0:
            raise ValueError("stagnation_rel, max_s and max_step must be positive")
        if not set(self.directions) <= {-1, 1} or not self.directions:
            raise ValueError("directions must be a subset of (-1, 1)")


@dataclass(frozen=True)
class Event:
    kind: str
    s: float
    x: np.ndarray


@dataclass(frozen=True)
class Crossing:
    s: float
    x: np.ndarray
    orientation: str  # "future-ward" or "past-ward"
    patch: int = 0
    grazing: bool = False


# -- batch storage --------------------------------------------------------------


@dataclass(eq=False)
class TrajectoryBatch:
    s: np.ndarray  # (N,)
    y: np.ndarray  # (N, 4 n)
    f: np.ndarray  # (N, 4 n), dy/ds at the samples
    offsets: np.ndarray  # (B + 1,)
    status: np.ndarray  # (B,) status codes
    underflow: np.ndarray  # (B,)
    rhs: Callable = field(repr=False)
    n_particles: int = 1
    stagnation: float = 0.0
    events: dict = field(default_factory=dict)  # kind -> (traj, particle, s, x)

    def __len__(self):
        return len(self.offsets) - 1

    @property
    def traj_index(self) -> np.ndarray:
        return np.repeat(np.arange(len(self)), np.diff(self.offsets))

    def slot(self, a: int) -> slice:
        return slice(4 * a, 4 * a + 4)

    def trajectory(self, i: int, particle: int = 0) -> "Trajectory":
        lo, hi = self.offsets[i], self.offsets[i + 1]
        events = []
        for kind, (tr, pa, s, x) in self.events.items():
            sel = np.flatnonzero((tr == i) & (pa == particle))
            events.extend(Event(kind, float(s[k]), x[k]) for k in sel)
        if self.status[i] == _dopri.STAGNATED:
            end = lo if self.underflow[i] else _stagnation_end(self.f[lo:hi], self.stagnation, lo)
            events.append(Event("stagnation-halt", float(self.s[end]), self.y[end, self.slot(particle)]))
        events.sort(key=lambda e: (e.s, EVENT_KINDS.index(e.kind)))
        return Trajectory(
            s=self.s[lo:hi],
            state=self.y[lo:hi],
            tangent=self.f[lo:hi],
            events=events,
            status=_dopri.STATUS_NAMES[int(self.status[i])],
            underflow=bool(self.underflow[i]),
            rhs=self.rhs,
            particle=particle,
        )

    def trajectories(self, particle: int = 0):
        return [self.trajectory(i, particle) for i in range(len(self))]


def _stagnation_end(f, eps, lo):
    small = np.flatnonzero(np.sqrt(np.sum(f * f, axis=1)) < eps)
    return lo + (int(small[-1]) if len(small) else len(f) - 1)


@dataclass(eq=False)
class Trajectory:
    s: np.ndarray
    state: np.ndarray
    tangent: np.ndarray
    events: list
    status: str
    underflow: bool = False
    rhs: Optional[Callable] = field(default=None, repr=False)
    particle: int = 0

    @property
    def x(self) -> np.ndarray:
        return self.state[:, 4 * self.particle: 4 * self.particle + 4]

    @property
    def j(self) -> np.ndarray:
        """dx^mu/ds at the samples."""
        return self.tangent[:, 4 * self.particle: 4 * self.particle + 4]

    def events_of(self, kind: str) -> list:
        return [e for e in self.events if e.kind == kind]

    def coordinate_velocity(self) -> np.ndarray:
        """Secant dx^i/dt between consecutive samples, shape (N - 1, 3)."""
        d = np.diff(self.x, axis=0)
        return d[:, 1:] / d[:, :1]

    def _as_batch(self) -> TrajectoryBatch:
        return TrajectoryBatch(self.s, self.state, self.tangent, np.array([0, len(self.s)]),
                               np.zeros(1, int), np.zeros(1, bool), self.rhs,
                               n_particles=self.state.shape[1] // 4)


# -- root location inside integrator steps ---------------------------------------


def _g_at(rhs, y0, f0, h, theta, g_fn):
    y, _ = _dopri.rk_step(rhs, y0, f0, theta * h)
    return g_fn(y)


def _bracket_root(rhs, y0, f0, h, lo, hi, g_fn, tol=EVENT_TOL, max_iter=200):
    """Find theta in [lo, hi] where g(y(theta h)) changes sign, all brackets at once.

    y(theta h) is a genuine RK step of size theta h from the step start, so the
    root is accurate to the integrator tolerance, not to an interpolant. The
    bracket is shrunk by Illinois false position; a trial point falling outside
    the open bracket is replaced by the midpoint. Each row stops on its own
    width criterion, so its root does not depend on the rest of the batch.
    """
    glo = _g_at(rhs, y0, f0, h, lo, g_fn)
    ghi = _g_at(rhs, y0, f0, h, hi, g_fn)
    side = np.zeros(len(h), dtype=int)
    for _ in range(max_iter):
        open_ = (np.abs(h) * (hi - lo) > tol) & (glo != 0) & (ghi != 0)
        if not open_.any():
            break
        k = np.flatnonzero(open_)
        a, b, ga, gb = lo[k], hi[k], glo[k], ghi[k]
        with np.errstate(divide="ignore", invalid="ignore"):
            m = (a * gb - b * ga) / (gb - ga)
        m = np.where((m > a) & (m < b), m, 0.5 * (a + b))
        gm = _g_at(rhs, y0[k], f0[k], h[k], m, g_fn)
        left = np.sign(gm) == np.sign(ga)  # root lies in [m, b]
        lo[k] = np.where(left, m, a)
        hi[k] = np.where(left, b, m)
        glo[k] = np.where(left, gm, np.where(side[k] == 1, 0.5 * ga, ga))
        ghi[k] = np.where(left, np.where(side[k] == -1, 0.5 * gb, gb), gm)
        side[k] = np.where(left, -1, 1)
    theta = np.where(glo == 0, lo, np.where(ghi == 0, hi, 0.5 * (lo + hi)))
    y, _ = _dopri.rk_step(rhs, y0, f0, theta * h)
    return theta, y


def _find_roots(batch: TrajectoryBatch, g_samples, g_fn, dg_samples=None):
    """Locate zeros of a scalar function along every curve of the batch.

    ``g_samples`` holds g at the samples; ``dg_samples`` (dg/ds) enables a
    cubic-Hermite check for double roots hidden inside a single step.
    Returns (traj, s, y) of every root, ordered by trajectory then s.
    """
    s, y, f, off = batch.s, batch.y, batch.f, batch.offsets
    tr = batch.traj_index
    n = len(s)
    if n < 2:
        return np.zeros(0, int), np.zeros(0), np.zeros((0, y.shape[1]))
    same = tr[:-1] == tr[1:]
    i0 = np.arange(n - 1)
    g0, g1 = g_samples[:-1], g_samples[1:]
    strict = same & (g0 * g1 < 0)

    br_i = [i0[strict]]
    br_lo = [np.zeros(strict.sum())]
    br_hi = [np.ones(strict.sum())]

    if dg_samples is not None:
        h = s[1:] - s[:-1]
        m0, m1 = dg_samples[:-1] * h, dg_samples[1:] * h
        cand = same & (g0 * g1 > 0)
        # cubic Hermite p(th) = g0 + m0 th + (3(g1-g0) - 2m0 - m1) th^2 + (2(g0-g1) + m0 + m1) th^3
        a2 = 3 * (g1 - g0) - 2 * m0 - m1
        a3 = 2 * (g0 - g1) + m0 + m1
        qa, qb, qc = 3 * a3, 2 * a2, m0
        disc = qb * qb - 4 * qa * qc
        ok = cand & (disc >= 0)
        sq = np.sqrt(np.where(ok, disc, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            roots = [np.where(np.abs(qa) > 1e-300, (-qb + sgn * sq) / (2 * qa),
                              np.where(np.abs(qb) > 0, -qc / qb, np.nan)) for sgn in (1.0, -1.0)]
        for th in roots:
            inside = ok & (th > 0) & (th < 1)
            th = np.where(inside, th, 0.5)
            p = g0 + m0 * th + a2 * th**2 + a3 * th**3
            split = inside & (p * g0 < 0)
            k = np.flatnonzero(split)
            br_i += [k, k]
            br_lo += [np.zeros(len(k)), th[k]]
            br_hi += [th[k], np.ones(len(k))]

    bi = np.concatenate(br_i)
    lo = np.concatenate(br_lo)
    hi = np.concatenate(br_hi)
    h = s[bi + 1] - s[bi]
    theta, yr = _bracket_root(batch.rhs, y[bi], f[bi], h, lo, hi, g_fn)
    sr = s[bi] + theta * h
    traj = tr[bi]

    # roots that sit exactly on a sample (e.g. the launch point on the launch surface)
    zero = np.flatnonzero(g_samples == 0)
    zt, zs, zy = [], [], []
    for k in zero:
        lo_k, hi_k = off[tr[k]], off[tr[k] + 1]
        prev = next((g_samples[j] for j in range(k - 1, lo_k - 1, -1) if g_samples[j] != 0), 0.0)
        nxt = next((g_samples[j] for j in range(k + 1, hi_k) if g_samples[j] != 0), 0.0)
        if prev * nxt < 0 and (k == lo_k or g_samples[k - 1] != 0):
            zt.append(tr[k]), zs.append(s[k]), zy.append(y[k])
    if zt:
        traj = np.concatenate([traj, zt])
        sr = np.concatenate([sr, zs])
        yr = np.concatenate([yr, np.array(zy)])
    order = np.lexsort((sr, traj))
    return traj[order], sr[order], yr[order]


def _sign_flip_events(batch: TrajectoryBatch):
    for a in range(batch.n_particles):
        col = 4 * a
        tr, s, y = _find_roots(batch, batch.f[:, col], lambda yy: batch.rhs(yy)[:, col])
        x = y[:, col:col + 4]
        pa = np.full(len(tr), a)
        for kind in ("j0-sign-flip", "time-reversal"):
            _append_events(batch, kind, tr, pa, s, x)


def _append_events(batch, kind, tr, pa, s, x):
    if kind in batch.events:
        t0, p0, s0, x0 = batch.events[kind]
        tr, pa, s, x = (np.concatenate([t0, tr]), np.concatenate([p0, pa]),
                        np.concatenate([s0, s]), np.concatenate([x0, x]))
    batch.events[kind] = (tr, pa, s, x)


@dataclass(frozen=True)
class CrossingSet:
    """All crossings of one surface by the curves of a batch, flat arrays."""

    traj: np.ndarray
    s: np.ndarray
    x: np.ndarray
    orientation: np.ndarray  # +1 future-ward, -1 past-ward
    patch: np.ndarray
    grazing: np.ndarray

    def for_trajectory(self, i: int) -> list:
        sel = np.flatnonzero(self.traj == i)
        return [Crossing(float(self.s[k]), self.x[k], "future-ward" if self.orientation[k] > 0 else "past-ward",
                         int(self.patch[k]), bool(self.grazing[k])) for k in sel]


def batch_crossings(batch: TrajectoryBatch, surface: Hypersurface, particle: int = 0) -> CrossingSet:
    col = slice(4 * particle, 4 * particle + 4)
    parts = []
    for pi, patch in enumerate(surface.patches):
        g = patch.signed_distance(batch.y[:, col])
        dg = minkowski_dot(patch.normal, batch.f[:, col])
        tr, s, y = _find_roots(batch, g, lambda yy: patch.signed_distance(yy[:, col]), dg)
        x = y[:, col]
        keep = surface.contains(pi, x) if len(x) else np.zeros(0, bool)
        tr, s, y, x = tr[keep], s[keep], y[keep], x[keep]
        jn = minkowski_dot(patch.normal, batch.rhs(y)[:, col]) if len(y) else np.zeros(0)
        parts.append((tr, s, x, np.where(jn >= 0, 1, -1), np.full(len(tr), pi), np.abs(jn) < batch.stagnation))
    tr, s, x, o, p, gz = (np.concatenate([q[i] for q in parts]) for i in range(6))
    order = np.lexsort((s, tr))
    return CrossingSet(tr[order], s[order], x[order].reshape(-1, 4), o[order], p[order], gz[order])


def crossings(tr: Trajectory, h: Hypersurface) -> list:
    """Transversal intersections of a trajectory with a hypersurface, ordered by s."""
    if tr.rhs is None or len(tr.s) < 2:
        return []
    return batch_crossings(tr._as_batch(), h, tr.particle).for_trajectory(0)


# -- drivers ---------------------------------------------------------------------


def _exit_fn(cfg: IntegratorConfig, n_particles: int):
    def out(y):
        bad = np.zeros(len(y), dtype=bool)
        for a in range(n_particles):
            t = y[:, 4 * a]
            bad |= (t < cfg.t_min) | (t > cfg.t_max)
            if cfg.spatial_bounds is not None:
                for i, (lo, hi) in enumerate(cfg.spatial_bounds):
                    xi = y[:, 4 * a + 1 + i]
                    bad |= (xi < lo) | (xi > hi)
        return bad
    return out


def _merge_directions(results: dict, nrow: int):
    """Join the backward and forward halves of each curve into one s-ordered record."""
    s_parts, y_parts, f_parts, counts = [], [], [], np.zeros(nrow, int)
    status = np.full(nrow, _dopri.COMPLETED)
    underflow = np.zeros(nrow, bool)
    per_row = [[] for _ in range(nrow)]
    for direction in (-1, 1):
        if direction not in results:
            continue
        r = results[direction]
        for i in range(nrow):
            lo, hi = r["offsets"][i], r["offsets"][i + 1]
            sl = slice(lo, hi) if direction > 0 else slice(hi - 1, lo - 1 if lo > 0 else None, -1)
            if direction > 0 and -1 in results:
                sl = slice(lo + 1, hi)  # the launch sample is already in the backward half
            per_row[i].append(sl)
        # worst status wins: left-domain over stagnation over completed
        status = np.maximum(status, r["status"])
        underflow |= r["underflow"]
    for i in range(nrow):
        for direction, sl in zip([d for d in (-1, 1) if d in results], per_row[i]):
            r = results[direction]
            s_parts.append(r["s"][sl])
            y_parts.append(r["y"][sl])
            f_parts.append(r["f"][sl])
            counts[i] += len(r["s"][sl])
    offsets = np.concatenate([[0], np.cumsum(counts)])
    return np.concatenate(s_parts), np.concatenate(y_parts), np.concatenate(f_parts), offsets, status, underflow


def _integrate_rows(rhs, y0, cfg: IntegratorConfig, stagnation: float, n_particles: int) -> TrajectoryBatch:
    y0 = np.atleast_2d(np.asarray(y0, dtype=float))
    exit_fn = _exit_fn(cfg, n_particles)
    results = {}
    for d in cfg.directions:
        results[d] = _dopri.solve(rhs, y0, float(d), rtol=cfg.rtol, atol=cfg.atol, max_step=cfg.max_step,
                                  max_s=cfg.max_s, stagnation=stagnation, exit_fn=exit_fn)
    s, y, f, offsets, status, underflow = _merge_directions(results, len(y0))
    batch = TrajectoryBatch(s, y, f, offsets, status, underflow, rhs, n_particles, stagnation)
    _sign_flip_events(batch)
    for surf in cfg.surfaces:
        for a in range(n_particles):
            cs = batch_crossings(batch, surf, a)
            _append_events(batch, "surface-crossing", cs.traj, np.full(len(cs.traj), a), cs.s, cs.x)
    return batch


def concat_batches(batches: Sequence[TrajectoryBatch]) -> TrajectoryBatch:
    first = batches[0]
    shift = np.cumsum([0] + [len(b.s) for b in batches[:-1]])
    tshift = np.cumsum([0] + [len(b) for b in batches[:-1]])
    offsets = np.concatenate([[0]] + [b.offsets[1:] + sh for b, sh in zip(batches, shift)])
    events = {}
    for kind in EVENT_KINDS:
        parts = [(b.events[kind], ts) for b, ts in zip(batches, tshift) if kind in b.events]
        if parts:
            events[kind] = tuple(np.concatenate([p[i] + (ts if i == 0 else 0) for p, ts in parts])
                                 for i in range(4))
    return TrajectoryBatch(
        np.concatenate([b.s for b in batches]), np.concatenate([b.y for b in batches]),
        np.concatenate([b.f for b in batches]), offsets,
        np.concatenate([b.status for b in batches]), np.concatenate([b.underflow for b in batches]),
        first.rhs, first.n_particles, first.stagnation, events)


def _single_rhs(cf: CurrentField):
    return lambda y: cf.current(y)


def stagnation_threshold(cf: CurrentField, cfg: IntegratorConfig) -> float:
    if cfg.stagnation is not None:
        return cfg.stagnation
    return cfg.stagnation_rel * float(np.linalg.norm(cf.bound()))


def integrate(cf: CurrentField, x0, cfg: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    """Integral curve of j^mu through x0, in both directions of s."""
    x0 = as_points(x0).reshape(1, 4)
    batch = _integrate_rows(_single_rhs(cf), x0, cfg, stagnation_threshold(cf, cfg), 1)
    return batch.trajectory(0)


def integrate_many(cf: CurrentField, x0s, cfg: IntegratorConfig = IntegratorConfig(), workers: int = 1,
                   chunk: int = DEFAULT_CHUNK) -> TrajectoryBatch:
    """Integrate a family of curves; chunks are fixed so results ignore ``workers``."""
    x0s = np.atleast_2d(as_points(x0s))
    rhs = _single_rhs(cf)
    eps = stagnation_threshold(cf, cfg)
    chunks = [x0s[i:i + chunk] for i in range(0, len(x0s), chunk)]
    job = lambda c: _integrate_rows(rhs, c, cfg, eps, 1)  # noqa: E731
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(job, chunks))
    else:
        batches = [job(c) for c in chunks]
    return concat_batches(batches)


def integrate_n_particle(npc: NParticleCurrent, x0s, mode: str = "foliated",
                         cfg: IntegratorConfig = IntegratorConfig()) -> list:
    """Jointly integrate the n coupled worldlines; returns one Trajectory per particle.

    ``foliated`` follows the foliation-contracted currents; ``covariant``
    follows the uncontracted per-particle currents, whose predictions depend
    on how the particles' initial points are synchronized.
    """
    x0s = as_points(x0s)
    if x0s.shape != (npc.n, 4):
        raise ValueError(f"expected {npc.n} initial points")
    n = npc.n
    if mode == "foliated":
        npc.check_leaf(x0s)

        def rhs(y):
            return npc.all_contracted_currents(y.reshape(len(y), n, 4), check=False).reshape(len(y), 4 * n)
    elif mode == "covariant":
        def rhs(y):
            return npc.particle_currents(y.reshape(len(y), n, 4)).reshape(len(y), 4 * n)
    else:
        raise ValueError("mode must be 'foliated' or 'covariant'")
    if cfg.stagnation is not None:
        eps = cfg.stagnation
    else:
        f0 = rhs(x0s.reshape(1, 4 * n))
        eps = cfg.stagnation_rel * max(float(np.linalg.norm(f0)), 1e-300)
    batch = _integrate_rows(rhs, x0s.reshape(1, 4 * n), cfg, eps, n)
    return [batch.trajectory(0, a) for a in range(n)]


# -- export ------------------------------------------------------------------------

CSV_COLUMNS = ("trajectory_id", "s", "t", "x", "y", "z", "j0", "event_flag")


def trajectory_rows(trajectories, ids=None):
    """CSV rows: one per sample (event_flag empty) plus one per event, ordered by s."""
    ids = range(len(trajectories)) if ids is None else ids
    for tid, tr in zip(ids, trajectories):
        rows = [(float(s), 1, x, float(j[0]), "") for s, x, j in zip(tr.s, tr.x, tr.j)]
        rows += [(e.s, 0, e.x, float("nan"), e.kind) for e in tr.events]
        rows.sort(key=lambda r: (r[0], r[1]))
        for s, _, x, j0, flag in rows:
            yield (tid, s, *map(float, x), j0, flag)
