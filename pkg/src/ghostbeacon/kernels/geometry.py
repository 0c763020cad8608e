"""Segment-vs-rectangle shadowing losses for batches of TX-RX paths.

For every path the loss is

    n_wall_crossings * wall_db + interior_path_length_m * interior_db_per_m

summed over all obstacle rectangles, using Liang-Barsky clipping with an
open-interval rule: a path that only touches a rectangle boundary
(tangent or corner graze) contributes nothing.

Two implementations exist: an explicit-loop version compiled with numba
and a broadcast numpy version used as the fallback.  Both evaluate the
same clip arithmetic; results agree to float rounding (summation order
over rectangles differs).
"""

from __future__ import annotations

import math

import numpy as np

from . import NUMBA, get_backend


def _pair_losses_loops(px, py, qx, qy, rects, wall_db, beta):
    n = px.shape[0]
    m = rects.shape[0]
    out = np.zeros(n)
    for i in range(n):
        ax = px[i]
        ay = py[i]
        bx = qx[i]
        by = qy[i]
        dx = bx - ax
        dy = by - ay
        sxmin = min(ax, bx)
        sxmax = max(ax, bx)
        symin = min(ay, by)
        symax = max(ay, by)
        seg_len = math.hypot(dx, dy)
        total = 0.0
        for r in range(m):
            x0 = rects[r, 0]
            y0 = rects[r, 1]
            x1 = rects[r, 2]
            y1 = rects[r, 3]
            if sxmax <= x0 or sxmin >= x1 or symax <= y0 or symin >= y1:
                continue
            t0 = 0.0
            t1 = 1.0
            ok = True
            # Liang-Barsky slabs: p == 0 with q <= 0 means parallel and
            # outside or on the boundary, which the open rule rejects.
            p = -dx
            q = ax - x0
            if p == 0.0:
                if q <= 0.0:
                    ok = False
            else:
                rr = q / p
                if p < 0.0:
                    if rr > t0:
                        t0 = rr
                else:
                    if rr < t1:
                        t1 = rr
            if ok:
                p = dx
                q = x1 - ax
                if p == 0.0:
                    if q <= 0.0:
                        ok = False
                else:
                    rr = q / p
                    if p < 0.0:
                        if rr > t0:
                            t0 = rr
                    else:
                        if rr < t1:
                            t1 = rr
            if ok:
                p = -dy
                q = ay - y0
                if p == 0.0:
                    if q <= 0.0:
                        ok = False
                else:
                    rr = q / p
                    if p < 0.0:
                        if rr > t0:
                            t0 = rr
                    else:
                        if rr < t1:
                            t1 = rr
            if ok:
                p = dy
                q = y1 - ay
                if p == 0.0:
                    if q <= 0.0:
                        ok = False
                else:
                    rr = q / p
                    if p < 0.0:
                        if rr > t0:
                            t0 = rr
                    else:
                        if rr < t1:
                            t1 = rr
            if ok and t0 < t1:
                cross = 0.0
                if t0 > 0.0:
                    cross += 1.0
                if t1 < 1.0:
                    cross += 1.0
                total += cross * wall_db[r] + (t1 - t0) * seg_len * beta[r]
        out[i] = total
    return out


def _pair_losses_vec(px, py, qx, qy, rects, wall_db, beta):
    n = px.shape[0]
    if rects.shape[0] == 0:
        return np.zeros(n)
    pxc = px[:, None]
    pyc = py[:, None]
    dx = (qx - px)[:, None]
    dy = (qy - py)[:, None]
    x0 = rects[None, :, 0]
    y0 = rects[None, :, 1]
    x1 = rects[None, :, 2]
    y1 = rects[None, :, 3]
    t0 = np.zeros((n, rects.shape[0]))
    t1 = np.ones_like(t0)
    ok = np.ones(t0.shape, dtype=bool)
    for p, q in ((-dx, pxc - x0), (dx, x1 - pxc), (-dy, pyc - y0), (dy, y1 - pyc)):
        pz = p == 0.0
        ok &= ~(pz & (q <= 0.0))
        rr = np.divide(q, np.broadcast_to(p, q.shape), out=np.zeros_like(q), where=~pz)
        lower = np.broadcast_to(p < 0.0, q.shape) & ~pz
        upper = np.broadcast_to(p > 0.0, q.shape) & ~pz
        t0 = np.where(lower, np.maximum(t0, rr), t0)
        t1 = np.where(upper, np.minimum(t1, rr), t1)
    hit = ok & (t0 < t1)
    seg_len = np.hypot(qx - px, qy - py)[:, None]
    crossings = (hit & (t0 > 0.0)).astype(np.float64) + (hit & (t1 < 1.0)).astype(np.float64)
    interior = np.where(hit, (t1 - t0) * seg_len, 0.0)
    return crossings @ wall_db + interior @ beta


def _pair_losses_excluding_loops(px, py, qx, qy, i_idx, j_idx, rects, wall_db, beta):
    """Like _pair_losses_loops, but rectangle k is skipped for the pair
    whose endpoints it belongs to (k == i or k == j): vehicle bodies must
    not shadow their own links."""
    n = px.shape[0]
    m = rects.shape[0]
    out = np.zeros(n)
    for i in range(n):
        ax = px[i]
        ay = py[i]
        bx = qx[i]
        by = qy[i]
        own_a = i_idx[i]
        own_b = j_idx[i]
        dx = bx - ax
        dy = by - ay
        sxmin = min(ax, bx)
        sxmax = max(ax, bx)
        symin = min(ay, by)
        symax = max(ay, by)
        seg_len = math.hypot(dx, dy)
        total = 0.0
        for r in range(m):
            if r == own_a or r == own_b:
                continue
            x0 = rects[r, 0]
            y0 = rects[r, 1]
            x1 = rects[r, 2]
            y1 = rects[r, 3]
            if sxmax <= x0 or sxmin >= x1 or symax <= y0 or symin >= y1:
                continue
            t0 = 0.0
            t1 = 1.0
            ok = True
            p = -dx
            q = ax - x0
            if p == 0.0:
                if q <= 0.0:
                    ok = False
            else:
                rr = q / p
                if p < 0.0:
                    if rr > t0:
                        t0 = rr
                else:
                    if rr < t1:
                        t1 = rr
            if ok:
                p = dx
                q = x1 - ax
                if p == 0.0:
                    if q <= 0.0:
                        ok = False
                else:
                    rr = q / p
                    if p < 0.0:
                        if rr > t0:
                            t0 = rr
                    else:
                        if rr < t1:
                            t1 = rr
            if ok:
                p = -dy
                q = ay - y0
                if p == 0.0:
                    if q <= 0.0:
                        ok = False
                else:
                    rr = q / p
                    if p < 0.0:
                        if rr > t0:
                            t0 = rr
                    else:
                        if rr < t1:
                            t1 = rr
            if ok:
                p = dy
                q = y1 - ay
                if p == 0.0:
                    if q <= 0.0:
                        ok = False
                else:
                    rr = q / p
                    if p < 0.0:
                        if rr > t0:
                            t0 = rr
                    else:
                        if rr < t1:
                            t1 = rr
            if ok and t0 < t1:
                cross = 0.0
                if t0 > 0.0:
                    cross += 1.0
                if t1 < 1.0:
                    cross += 1.0
                total += cross * wall_db[r] + (t1 - t0) * seg_len * beta[r]
        out[i] = total
    return out


def _pair_losses_excluding_vec(px, py, qx, qy, i_idx, j_idx, rects, wall_db, beta):
    n = px.shape[0]
    if rects.shape[0] == 0:
        return np.zeros(n)
    out = np.empty(n)
    rows = np.arange(n)
    chunk = max(1, 2_000_000 // max(rects.shape[0], 1))
    for s in range(0, n, chunk):
        e = min(s + chunk, n)
        pxc = px[s:e, None]
        pyc = py[s:e, None]
        dx = (qx[s:e] - px[s:e])[:, None]
        dy = (qy[s:e] - py[s:e])[:, None]
        x0 = rects[None, :, 0]
        y0 = rects[None, :, 1]
        x1 = rects[None, :, 2]
        y1 = rects[None, :, 3]
        t0 = np.zeros((e - s, rects.shape[0]))
        t1 = np.ones_like(t0)
        ok = np.ones(t0.shape, dtype=bool)
        for p, q in ((-dx, pxc - x0), (dx, x1 - pxc), (-dy, pyc - y0), (dy, y1 - pyc)):
            pz = p == 0.0
            ok &= ~(pz & (q <= 0.0))
            rr = np.divide(q, np.broadcast_to(p, q.shape), out=np.zeros_like(q), where=~pz)
            lower = np.broadcast_to(p < 0.0, q.shape) & ~pz
            upper = np.broadcast_to(p > 0.0, q.shape) & ~pz
            t0 = np.where(lower, np.maximum(t0, rr), t0)
            t1 = np.where(upper, np.minimum(t1, rr), t1)
        local = rows[: e - s]
        ok[local, i_idx[s:e]] = False
        ok[local, j_idx[s:e]] = False
        hit = ok & (t0 < t1)
        seg_len = np.hypot(qx[s:e] - px[s:e], qy[s:e] - py[s:e])[:, None]
        crossings = (hit & (t0 > 0.0)).astype(np.float64) + (hit & (t1 < 1.0)).astype(np.float64)
        interior = np.where(hit, (t1 - t0) * seg_len, 0.0)
        out[s:e] = crossings @ wall_db + interior @ beta
    return out


_jitted = None
_jitted_excl = None


def _loops_impl():
    global _jitted
    if _jitted is None:
        import numba

        _jitted = numba.njit(cache=True)(_pair_losses_loops)
    return _jitted


def _loops_excl_impl():
    global _jitted_excl
    if _jitted_excl is None:
        import numba

        _jitted_excl = numba.njit(cache=True)(_pair_losses_excluding_loops)
    return _jitted_excl


def pair_obstacle_losses(p, q, rects, wall_db, beta):
    """Shadowing loss in dB for each path p[i] -> q[i].

    p, q: (n, 2) endpoints in meters; rects: (m, 4) as x0, y0, x1, y1 with
    x0 < x1, y0 < y1; wall_db, beta: (m,)per-rectangle attenuation.
    """
    p = np.ascontiguousarray(p, dtype=np.float64)
    q = np.ascontiguousarray(q, dtype=np.float64)
    rects = np.ascontiguousarray(rects, dtype=np.float64).reshape(-1, 4)
    wall_db = np.ascontiguousarray(wall_db, dtype=np.float64)
    beta = np.ascontiguousarray(beta, dtype=np.float64)
    args = (
        np.ascontiguousarray(p[:, 0]),
        np.ascontiguousarray(p[:, 1]),
        np.ascontiguousarray(q[:, 0]),
        np.ascontiguousarray(q[:, 1]),
        rects,
        wall_db,
        beta,
    )
    if get_backend() == NUMBA:
        return _loops_impl()(*args)
    return _pair_losses_vec(*args)


def pair_obstacle_losses_excluding(p, q, i_idx, j_idx, rects, wall_db, beta):
    """Shadowing loss per path p[i] -> q[i] against indexed rectangles,
    skipping rectangles i_idx[i] and j_idx[i] (the endpoints' own bodies)."""
    p = np.ascontiguousarray(p, dtype=np.float64)
    q = np.ascontiguousarray(q, dtype=np.float64)
    rects = np.ascontiguousarray(rects, dtype=np.float64).reshape(-1, 4)
    args = (
        np.ascontiguousarray(p[:, 0]),
        np.ascontiguousarray(p[:, 1]),
        np.ascontiguousarray(q[:, 0]),
        np.ascontiguousarray(q[:, 1]),
        np.ascontiguousarray(i_idx, dtype=np.int64),
        np.ascontiguousarray(j_idx, dtype=np.int64),
        rects,
        np.ascontiguousarray(wall_db, dtype=np.float64),
        np.ascontiguousarray(beta, dtype=np.float64),
    )
    if get_backend() == NUMBA:
        return _loops_excl_impl()(*args)
    return _pair_losses_excluding_vec(*args)
