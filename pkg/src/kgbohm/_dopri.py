"""Vectorized Dormand-Prince 5(4) integration of many independent ODEs at once.

Every row of the state array is its own initial value problem with its own
step size and error control; rows only share the numpy calls. Per-row
arithmetic is therefore independent of which other rows are in the batch.
"""
from __future__ import annotations

import numpy as np

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0

COMPLETED, STAGNATED, LEFT_DOMAIN = 0, 1, 2
STATUS_NAMES = {COMPLETED: "completed", STAGNATED: "halted-at-stagnation", LEFT_DOMAIN: "left-domain"}


def rk_step(rhs, y, f, h):
    """One 5th-order step of size h (per row) from (y, f = rhs(y)); returns (y_new, stages)."""
    h = h[:, None]
    K = [f]
    for i in range(1, 6):
        dy = sum(a * K[j] for j, a in enumerate(A[i]))
        K.append(rhs(y + h * dy))
    y_new = y + h * sum(b * K[i] for i, b in enumerate(B) if b != 0.0)
    return y_new, K


def _rms(a):
    return np.sqrt(np.mean(a * a, axis=-1))


def initial_step(rhs, y, f, direction, rtol, atol):
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _initial_step(rhs, y, f, direction, rtol, atol)


def _initial_step(rhs, y, f, direction, rtol, atol):
    scale = atol + np.abs(y) * rtol
    d0 = _rms(y / scale)
    d1 = _rms(f / scale)
    h0 = np.where((d0 < 1e-5) | (d1 < 1e-5), 1e-6, 0.01 * d0 / np.maximum(d1, 1e-300))
    y1 = y + (direction * h0)[:, None] * f
    f1 = rhs(y1)
    d2 = _rms((f1 - f) / scale) / h0
    dmax = np.maximum(d1, d2)
    h1 = np.where(dmax <= 1e-15, np.maximum(1e-6, h0 * 1e-3), (0.01 / np.maximum(dmax, 1e-300)) ** 0.2)
    h = np.minimum(100 * h0, h1)
    return np.where(np.isfinite(h) & (h > 0), h, 1e-6)


def solve(rhs, y0, direction, *, rtol, atol, max_step, max_s, stagnation, exit_fn, max_iter=200000):
    """Integrate dy/ds = rhs(y) from s = 0 to s = direction * max_s, row by row.

    Rows stop early on domain exit (``exit_fn``), stagnation (|f| < stagnation)
    or step-size underflow. Returns a dict with concatenated samples grouped
    by row in order of increasing |s|, per-row ``offsets``, ``status`` and
    ``underflow`` flags.
    """
    y0 = np.asarray(y0, dtype=float)
    nrow = len(y0)
    y = y0.copy()
    f = rhs(y)
    s = np.zeros(nrow)
    status = np.full(nrow, COMPLETED)
    underflow = np.zeros(nrow, dtype=bool)

    fnorm = np.sqrt(np.sum(f * f, axis=1))
    active = fnorm >= stagnation
    status[~active] = STAGNATED
    h = np.zeros(nrow)
    if active.any():
        h[active] = initial_step(rhs, y[active], f[active], direction, rtol, atol)
    h = np.minimum(h, max_step)

    rec_idx = [np.arange(nrow)]
    rec_s, rec_y, rec_f = [s.copy()], [y.copy()], [f.copy()]

    it = 0
    while active.any():
        it += 1
        if it > max_iter:
            raise RuntimeError("integrator exceeded its iteration budget")
        idx = np.flatnonzero(active)
        remaining = max_s - np.abs(s[idx])
        hh = np.minimum(np.minimum(h[idx], max_step), remaining)
        yi, fi = y[idx], f[idx]
        y_new, K = rk_step(rhs, yi, fi, direction * hh)
        f_new = rhs(y_new)
        K.append(f_new)
        err = (direction * hh)[:, None] * sum(e * K[i] for i, e in enumerate(E) if e != 0.0)
        scale = atol + np.maximum(np.abs(yi), np.abs(y_new)) * rtol
        with np.errstate(over="ignore", invalid="ignore"):
            en = _rms(err / scale)
        en = np.where(np.isfinite(en), en, np.inf)  # unusable estimate: reject and shrink
        accept = en <= 1.0
        with np.errstate(divide="ignore"):
            factor = np.where(en == 0, MAX_FACTOR, np.clip(SAFETY * en ** -0.2, MIN_FACTOR, MAX_FACTOR))
        factor = np.where(accept, factor, np.minimum(factor, 1.0))

        tiny = hh < 10 * np.finfo(float).eps * np.maximum(1.0, np.abs(s[idx]))
        bad = tiny & ~accept
        if bad.any():
            underflow[idx[bad]] = True
            status[idx[bad]] = STAGNATED
            active[idx[bad]] = False

        acc = idx[accept]
        if len(acc):
            s[acc] = s[acc] + direction * hh[accept]
            y[acc] = y_new[accept]
            f[acc] = f_new[accept]
            rec_idx.append(acc)
            rec_s.append(s[acc].copy())
            rec_y.append(y[acc].copy())
            rec_f.append(f[acc].copy())

            out = exit_fn(y[acc])
            done = np.abs(s[acc]) >= max_s * (1 - 1e-15)
            stag = np.sqrt(np.sum(f[acc] ** 2, axis=1)) < stagnation
            status[acc[done]] = COMPLETED
            status[acc[stag]] = STAGNATED
            status[acc[out]] = LEFT_DOMAIN
            active[acc[out | done | stag]] = False
        h[idx] = hh * factor

    ridx = np.concatenate(rec_idx)
    order = np.argsort(ridx, kind="stable")
    counts = np.bincount(ridx, minlength=nrow)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    return {
        "s": np.concatenate(rec_s)[order],
        "y": np.concatenate(rec_y)[order],
        "f": np.concatenate(rec_f)[order],
        "offsets": offsets,
        "status": status,
        "underflow": underflow,
    }
