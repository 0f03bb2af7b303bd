"""Low-level kernels: counter-based random numbers, 2-D nearest-primitive
queries over a bounding volume hierarchy, point-in-polygon, and the dyadic
cover dynamic program used by the content estimator.

Everything here is a pure function of its arguments, so results never depend
on how work is split between threads.
"""
from __future__ import annotations

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def mix_seed(*parts: int) -> int:
    """Hash an arbitrary tuple of integers into one 64-bit seed."""
    acc = np.uint64(0x243F6A8885A308D3)
    for p in parts:
        acc = _mix(np.asarray(acc ^ np.uint64(int(p) & _MASK64)))
    return int(acc)


def uniforms(seed: int, ids: np.ndarray, step: int, count: int) -> np.ndarray:
    """Uniform variates in (0, 1) of shape ``(len(ids), count)``.

    The value for (walker id, step, slot) depends on nothing else, which is
    what makes Monte Carlo runs reproducible under any batching.
    """
    ids = np.asarray(ids, dtype=np.uint64)
    with np.errstate(over="ignore"):
        # hash the seed first: a raw XOR would only permute nearby walker ids
        base = _mix(ids ^ _mix(np.uint64(seed & _MASK64)))
        base = _mix(base + np.uint64(step & _MASK64) * np.uint64(0xD1B54A32D192ED03))
        slots = np.arange(count, dtype=np.uint64) * np.uint64(0x8CB92BA72F3D8DD7)
        z = _mix(base[:, None] + slots[None, :])
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def unit_directions(seed: int, ids: np.ndarray, step: int, dim: int) -> np.ndarray:
    """Uniform unit vectors in R^dim, one row per walker id."""
    if dim == 1:
        u = uniforms(seed, ids, step, 1)[:, 0]
        return np.where(u < 0.5, -1.0, 1.0)[:, None]
    if dim == 2:
        theta = 2.0 * np.pi * uniforms(seed, ids, step, 1)[:, 0]
        return np.column_stack([np.cos(theta), np.sin(theta)])
    pairs = (dim + 1) // 2
    u = uniforms(seed, ids, step, 2 * pairs)
    r = np.sqrt(-2.0 * np.log(u[:, :pairs]))
    ang = 2.0 * np.pi * u[:, pairs:]
    g = np.concatenate([r * np.cos(ang), r * np.sin(ang)], axis=1)[:, :dim]
    return g / np.linalg.norm(g, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# BVH over 2-D primitives. kind 0: segments (x0, y0, x1, y1);
# kind 1: filled axis-aligned boxes (xmin, ymin, xmax, ymax); kind 2: the same
# boxes seen as hollow outlines (interior points measure to the nearest edge).


def build_bvh(prims: np.ndarray, kind: int, leaf_size: int = 4):
    """Median-split BVH. Returns flat arrays consumed by :func:`bvh_nearest`."""
    prims = np.ascontiguousarray(prims, dtype=np.float64)
    lo = np.minimum(prims[:, :2], prims[:, 2:])
    hi = np.maximum(prims[:, :2], prims[:, 2:])
    cen = 0.5 * (lo + hi)
    order = np.arange(len(prims))
    node_lo, node_hi, left, right, start, count = [], [], [], [], [], []

    def rec(idx: np.ndarray) -> int:
        nid = len(node_lo)
        node_lo.append(lo[idx].min(axis=0))
        node_hi.append(hi[idx].max(axis=0))
        left.append(-1)
        right.append(-1)
        start.append(0)
        count.append(0)
        if len(idx) <= leaf_size:
            start[nid] = rec.pos
            count[nid] = len(idx)
            order[rec.pos:rec.pos + len(idx)] = idx
            rec.pos += len(idx)
            return nid
        span = cen[idx].max(axis=0) - cen[idx].min(axis=0)
        axis = int(np.argmax(span))
        srt = idx[np.argsort(cen[idx, axis], kind="stable")]
        half = len(srt) // 2
        left[nid] = rec(srt[:half])
        right[nid] = rec(srt[half:])
        return nid

    rec.pos = 0
    rec(np.arange(len(prims)))
    return (
        np.array(node_lo),
        np.array(node_hi),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(start, dtype=np.int64),
        np.array(count, dtype=np.int64),
        prims[order],
        kind,
    )


@njit(cache=True, nogil=True)
def _box_dist2(px, py, x0, y0, x1, y1):
    dx = max(x0 - px, 0.0, px - x1)
    dy = max(y0 - py, 0.0, py - y1)
    return dx * dx + dy * dy


@njit(cache=True, nogil=True)
def _prim_nearest(px, py, p, kind):
    if kind == 0:
        ax, ay, bx, by = p[0], p[1], p[2], p[3]
        vx, vy = bx - ax, by - ay
        L2 = vx * vx + vy * vy
        t = 0.0
        if L2 > 0.0:
            t = ((px - ax) * vx + (py - ay) * vy) / L2
            t = min(1.0, max(0.0, t))
        cx, cy = ax + t * vx, ay + t * vy
    else:
        # boundary point of a filled box; interior points map to the nearest edge
        x0, y0, x1, y1 = p[0], p[1], p[2], p[3]
        inside = x0 <= px <= x1 and y0 <= py <= y1
        if inside:
            dl, dr, db, dt = px - x0, x1 - px, py - y0, y1 - py
            m = min(dl, dr, db, dt)
            d2 = m * m if kind == 2 else 0.0
            cx, cy = px, py
            if m == dl:
                cx = x0
            elif m == dr:
                cx = x1
            elif m == db:
                cy = y0
            else:
                cy = y1
            return d2, cx, cy
        cx = min(max(px, x0), x1)
        cy = min(max(py, y0), y1)
    dx, dy = px - cx, py - cy
    return dx * dx + dy * dy, cx, cy


@njit(cache=True, nogil=True)
def bvh_nearest(pts, node_lo, node_hi, left, right, start, count, prims, kind):
    """Exact distance and nearest point on the union of primitives.

    For filled boxes a point inside a box has distance 0.
    """
    m = pts.shape[0]
    dist = np.empty(m)
    near = np.empty((m, 2))
    stack = np.empty(128, dtype=np.int64)
    for i in range(m):
        px, py = pts[i, 0], pts[i, 1]
        best = np.inf
        bx, by = px, py
        top = 0
        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            nd = stack[top]
            if _box_dist2(px, py, node_lo[nd, 0], node_lo[nd, 1], node_hi[nd, 0], node_hi[nd, 1]) >= best:
                continue
            if left[nd] < 0:
                for j in range(start[nd], start[nd] + count[nd]):
                    d2, cx, cy = _prim_nearest(px, py, prims[j], kind)
                    if d2 < best:
                        best = d2
                        bx, by = cx, cy
            else:
                l, r = left[nd], right[nd]
                dl = _box_dist2(px, py, node_lo[l, 0], node_lo[l, 1], node_hi[l, 0], node_hi[l, 1])
                dr = _box_dist2(px, py, node_lo[r, 0], node_lo[r, 1], node_hi[r, 0], node_hi[r, 1])
                # push the farther child first so the nearer one is popped next
                if dl < dr:
                    stack[top] = r
                    stack[top + 1] = l
                else:
                    stack[top] = l
                    stack[top + 1] = r
                top += 2
        dist[i] = np.sqrt(best)
        near[i, 0] = bx
        near[i, 1] = by
    return dist, near


@njit(cache=True, nogil=True)
def points_in_polygon(pts, verts):
    """Even-odd rule; ``verts`` is an open ring."""
    m = pts.shape[0]
    nv = verts.shape[0]
    out = np.zeros(m, dtype=np.bool_)
    for i in range(m):
        px, py = pts[i, 0], pts[i, 1]
        c = False
        j = nv - 1
        for k in range(nv):
            xk, yk = verts[k, 0], verts[k, 1]
            xj, yj = verts[j, 0], verts[j, 1]
            if (yk > py) != (yj > py):
                xc = xk + (py - yk) * (xj - xk) / (yj - yk)
                if px < xc:
                    c = not c
            j = k
        out[i] = c
    return out


# ---------------------------------------------------------------------------
# Dyadic cover dynamic program.


@njit(cache=True, nogil=True)
def dyadic_cover_profile(alo, ahi, cell_ids, child_ptr, child_idx, ncells, vals, thresholds, d,
                         top_cap, pad):
    """Optimal dyadic cover cost for each active subset ``vals > threshold``.

    Atoms are small boxes ``[alo[i], ahi[i]]`` (sample points snapped to a
    sub-cell grid). ``cell_ids[k, i]`` is the level-k cell of atom i (level 0
    is the root); the children of level-k cell c are
    ``child_idx[k, child_ptr[k, c]:child_ptr[k, c + 1]]``.
    A cell's own cost is the bounding-box diagonal of its active atoms, padded
    by ``pad`` (the sampling gap) unless it is zero, raised to ``d``; it is
    replaced by the sum over its children when that is smaller. ``top_cap``
    bounds the root cost (the ball itself is an admissible set).

    Thresholds are swept from high to low so atoms only ever join; each sweep
    step re-solves just the cells whose active set changed.
    """
    nlev = cell_ids.shape[0]
    m, n = alo.shape
    nt = thresholds.shape[0]
    out = np.zeros(nt)
    if m == 0:
        return out
    maxc = 0
    for k in range(nlev):
        maxc = max(maxc, ncells[k])
    lo = np.full((nlev, maxc, n), np.inf)
    hi = np.full((nlev, maxc, n), -np.inf)
    cost = np.zeros((nlev, maxc))
    dirty = np.zeros((nlev, maxc), dtype=np.bool_)
    dlist = np.empty((nlev, maxc), dtype=np.int64)
    dcount = np.zeros(nlev, dtype=np.int64)
    aorder = np.argsort(-vals, kind="mergesort")
    torder = np.argsort(-thresholds, kind="mergesort")
    ptr = 0
    for tj in range(nt):
        ti = torder[tj]
        thr = thresholds[ti]
        changed = False
        while ptr < m and vals[aorder[ptr]] > thr:
            a = aorder[ptr]
            ptr += 1
            changed = True
            for k in range(nlev):
                c = cell_ids[k, a]
                for ax in range(n):
                    if alo[a, ax] < lo[k, c, ax]:
                        lo[k, c, ax] = alo[a, ax]
                    if ahi[a, ax] > hi[k, c, ax]:
                        hi[k, c, ax] = ahi[a, ax]
                if not dirty[k, c]:
                    dirty[k, c] = True
                    dlist[k, dcount[k]] = c
                    dcount[k] += 1
        if changed:
            for k in range(nlev - 1, -1, -1):
                for r in range(dcount[k]):
                    c = dlist[k, r]
                    dirty[k, c] = False
                    s = 0.0
                    for ax in range(n):
                        w = hi[k, c, ax] - lo[k, c, ax]
                        s += w * w
                    own = 0.0
                    if s > 0.0:
                        own = (np.sqrt(s) + pad) ** d
                    if k < nlev - 1:
                        sub = 0.0
                        for q in range(child_ptr[k, c], child_ptr[k, c + 1]):
                            sub += cost[k + 1, child_idx[k, q]]
                        own = min(own, sub)
                    if k == 0:
                        own = min(own, top_cap)
                    cost[k, c] = own
                dcount[k] = 0
        out[ti] = cost[0, 0] if ptr > 0 else 0.0
    return out
