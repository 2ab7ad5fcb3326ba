"""Hot geometric loops, each as a numba kernel and a vectorized numpy twin.

The two variants of every kernel use the same floating-point formulas so
their outputs agree to the last bit in generic position; the public
wrappers in :mod:`mstrack.bulk` and :mod:`mstrack.coupling` pick one via
:data:`mstrack._accel.USE_NUMBA`.

Conventions: triangles are anticlockwise vertex triples; a background grid
is ``(x0, cell, nx)`` over the square ``[x0, x0 + nx*cell]^2`` with a CSR
list ``cell_ptr``/``cell_tris`` of triangle ids per cell, sorted ascending.
"""

import numpy as np

from ._accel import njit

# absolute slack for inside tests, relative to the domain size
INSIDE_EPS = 1e-14
# barycentric slack for point location
BARY_EPS = 1e-12
# parameter resolution below which clipped pieces are dropped / starts tie
T_EPS = 1e-12


# --------------------------------------------------------------------------
# grid construction (numpy only; not a hot loop)


def build_grid(verts, tris, x0, cell, nx):
    p = verts[tris]
    lo = np.floor((p.min(axis=1) - x0) / cell).astype(np.int64)
    hi = np.floor((p.max(axis=1) - x0) / cell).astype(np.int64)
    lo = np.clip(lo, 0, nx - 1)
    hi = np.clip(hi, 0, nx - 1)
    wi = hi[:, 0] - lo[:, 0] + 1
    wj = hi[:, 1] - lo[:, 1] + 1
    count = wi * wj
    tri_id = np.repeat(np.arange(len(tris), dtype=np.int64), count)
    start = np.repeat(np.cumsum(count) - count, count)
    local = np.arange(count.sum(), dtype=np.int64) - start
    ci = lo[tri_id, 0] + local % wi[tri_id]
    cj = lo[tri_id, 1] + local // wi[tri_id]
    cell_id = ci * nx + cj
    order = np.lexsort((tri_id, cell_id))
    cell_tris = tri_id[order]
    cell_ptr = np.zeros(nx * nx + 1, dtype=np.int64)
    np.add.at(cell_ptr, cell_id + 1, 1)
    return np.cumsum(cell_ptr), cell_tris


# --------------------------------------------------------------------------
# segment / triangle distance


@njit
def _point_seg_dist2(px, py, ax, ay, bx, by):
    dx = bx - ax
    dy = by - ay
    L2 = dx * dx + dy * dy
    t = 0.0
    if L2 > 0.0:
        t = ((px - ax) * dx + (py - ay) * dy) / L2
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
    qx = ax + t * dx - px
    qy = ay + t * dy - py
    return qx * qx + qy * qy


@njit
def _seg_hits_tri(p0x, p0y, p1x, p1y, v, eps):
    # Cyrus-Beck against the three inward half-planes
    dx = p1x - p0x
    dy = p1y - p0y
    lo = 0.0
    hi = 1.0
    for i in range(3):
        ax = v[i, 0]
        ay = v[i, 1]
        ex = v[(i + 1) % 3, 0] - ax
        ey = v[(i + 1) % 3, 1] - ay
        alpha = ex * (p0y - ay) - ey * (p0x - ax)
        beta = ex * dy - ey * dx
        tol = eps * np.sqrt(ex * ex + ey * ey)
        if beta == 0.0:
            if alpha < -tol:
                return False
        elif beta > 0.0:
            t = (-tol - alpha) / beta
            if t > lo:
                lo = t
        else:
            t = (-tol - alpha) / beta
            if t < hi:
                hi = t
    return hi >= lo


@njit
def near_curve_nb(tri_ids, verts, tris, seg_ptr, seg_idx, seg_p0, seg_p1, radius, eps):
    """For each listed triangle: is any of its candidate segments within ``radius``?"""
    out = np.zeros(len(tri_ids), dtype=np.bool_)
    r2 = radius * radius
    v = np.empty((3, 2))
    for n in range(len(tri_ids)):
        t = tri_ids[n]
        for i in range(3):
            v[i, 0] = verts[tris[t, i], 0]
            v[i, 1] = verts[tris[t, i], 1]
        for s in range(seg_ptr[n], seg_ptr[n + 1]):
            j = seg_idx[s]
            ax = seg_p0[j, 0]
            ay = seg_p0[j, 1]
            bx = seg_p1[j, 0]
            by = seg_p1[j, 1]
            if _seg_hits_tri(ax, ay, bx, by, v, eps):
                out[n] = True
                break
            d2 = _point_seg_dist2(v[0, 0], v[0, 1], ax, ay, bx, by)
            d2 = min(d2, _point_seg_dist2(v[1, 0], v[1, 1], ax, ay, bx, by))
            d2 = min(d2, _point_seg_dist2(v[2, 0], v[2, 1], ax, ay, bx, by))
            for i in range(3):
                cx = v[i, 0]
                cy = v[i, 1]
                ex = v[(i + 1) % 3, 0]
                ey = v[(i + 1) % 3, 1]
                d2 = min(d2, _point_seg_dist2(ax, ay, cx, cy, ex, ey))
                d2 = min(d2, _point_seg_dist2(bx, by, cx, cy, ex, ey))
            if d2 <= r2:
                out[n] = True
                break
    return out


def _point_seg_dist2_np(px, py, ax, ay, bx, by):
    dx = bx - ax
    dy = by - ay
    L2 = dx * dx + dy * dy
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(L2 > 0.0, ((px - ax) * dx + (py - ay) * dy) / L2, 0.0)
    t = np.clip(t, 0.0, 1.0)
    qx = ax + t * dx - px
    qy = ay + t * dy - py
    return qx * qx + qy * qy


def _clip_params_np(p0, p1, v, eps):
    """Vectorized Cyrus-Beck: parameter window ``[lo, hi]`` of each segment in its triangle.

    ``p0``, ``p1`` have shape (n, 2) and ``v`` (n, 3, 2); empty windows come
    back with ``hi < lo``.
    """
    n = len(p0)
    dx = p1[:, 0] - p0[:, 0]
    dy = p1[:, 1] - p0[:, 1]
    lo = np.zeros(n)
    hi = np.ones(n)
    dead = np.zeros(n, dtype=bool)
    for i in range(3):
        ax = v[:, i, 0]
        ay = v[:, i, 1]
        ex = v[:, (i + 1) % 3, 0] - ax
        ey = v[:, (i + 1) % 3, 1] - ay
        alpha = ex * (p0[:, 1] - ay) - ey * (p0[:, 0] - ax)
        beta = ex * dy - ey * dx
        tol = eps * np.sqrt(ex * ex + ey * ey)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (-tol - alpha) / beta
        dead |= (beta == 0.0) & (alpha < -tol)
        pos = beta > 0.0
        neg = beta < 0.0
        lo = np.where(pos & (t > lo), t, lo)
        hi = np.where(neg & (t < hi), t, hi)
    hi = np.where(dead, -1.0, hi)
    return lo, hi


def near_curve_np(tri_ids, verts, tris, seg_ptr, seg_idx, seg_p0, seg_p1, radius, eps):
    counts = np.diff(seg_ptr)
    owner = np.repeat(np.arange(len(tri_ids)), counts)
    if owner.size == 0:
        return np.zeros(len(tri_ids), dtype=bool)
    v = verts[tris[tri_ids[owner]]]
    a = seg_p0[seg_idx]
    b = seg_p1[seg_idx]
    lo, hi = _clip_params_np(a, b, v, eps)
    hit = hi >= lo
    ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
    d2 = _point_seg_dist2_np(v[:, 0, 0], v[:, 0, 1], ax, ay, bx, by)
    d2 = np.minimum(d2, _point_seg_dist2_np(v[:, 1, 0], v[:, 1, 1], ax, ay, bx, by))
    d2 = np.minimum(d2, _point_seg_dist2_np(v[:, 2, 0], v[:, 2, 1], ax, ay, bx, by))
    for i in range(3):
        c = v[:, i]
        e = v[:, (i + 1) % 3]
        d2 = np.minimum(d2, _point_seg_dist2_np(ax, ay, c[:, 0], c[:, 1], e[:, 0], e[:, 1]))
        d2 = np.minimum(d2, _point_seg_dist2_np(bx, by, c[:, 0], c[:, 1], e[:, 0], e[:, 1]))
    near = hit | (d2 <= radius * radius)
    return np.bincount(owner[near], minlength=len(tri_ids)) > 0


# --------------------------------------------------------------------------
# point location


@njit
def _bary(px, py, v0x, v0y, v1x, v1y, v2x, v2y):
    area2 = (v1x - v0x) * (v2y - v0y) - (v1y - v0y) * (v2x - v0x)
    l0 = ((v1x - px) * (v2y - py) - (v1y - py) * (v2x - px)) / area2
    l1 = ((v2x - px) * (v0y - py) - (v2y - py) * (v0x - px)) / area2
    l2 = ((v0x - px) * (v1y - py) - (v0y - py) * (v1x - px)) / area2
    return l0, l1, l2


@njit
def locate_nb(points, verts, tris, x0, cell, nx, cell_ptr, cell_tris, eps):
    n = len(points)
    tri_out = np.full(n, -1, dtype=np.int64)
    lam = np.zeros((n, 3))
    for p in range(n):
        px = points[p, 0]
        py = points[p, 1]
        ci = int(np.floor((px - x0) / cell))
        cj = int(np.floor((py - x0) / cell))
        ci = min(max(ci, 0), nx - 1)
        cj = min(max(cj, 0), nx - 1)
        c = ci * nx + cj
        for s in range(cell_ptr[c], cell_ptr[c + 1]):
            t = cell_tris[s]
            a = tris[t, 0]
            b = tris[t, 1]
            d = tris[t, 2]
            l0, l1, l2 = _bary(px, py, verts[a, 0], verts[a, 1], verts[b, 0], verts[b, 1],
                               verts[d, 0], verts[d, 1])
            if l0 >= -eps and l1 >= -eps and l2 >= -eps:
                tri_out[p] = t
                lam[p, 0] = l0
                lam[p, 1] = l1
                lam[p, 2] = l2
                break
    return tri_out, lam


def _bary_np(p, v):
    px, py = p[:, 0], p[:, 1]
    v0x, v0y = v[:, 0, 0], v[:, 0, 1]
    v1x, v1y = v[:, 1, 0], v[:, 1, 1]
    v2x, v2y = v[:, 2, 0], v[:, 2, 1]
    area2 = (v1x - v0x) * (v2y - v0y) - (v1y - v0y) * (v2x - v0x)
    l0 = ((v1x - px) * (v2y - py) - (v1y - py) * (v2x - px)) / area2
    l1 = ((v2x - px) * (v0y - py) - (v2y - py) * (v0x - px)) / area2
    l2 = ((v0x - px) * (v1y - py) - (v0y - py) * (v1x - px)) / area2
    return np.stack([l0, l1, l2], axis=1)


def locate_np(points, verts, tris, x0, cell, nx, cell_ptr, cell_tris, eps):
    n = len(points)
    ci = np.clip(np.floor((points[:, 0] - x0) / cell).astype(np.int64), 0, nx - 1)
    cj = np.clip(np.floor((points[:, 1] - x0) / cell).astype(np.int64), 0, nx - 1)
    c = ci * nx + cj
    counts = cell_ptr[c + 1] - cell_ptr[c]
    owner = np.repeat(np.arange(n), counts)
    start = np.repeat(cell_ptr[c] - (np.cumsum(counts) - counts), counts)
    cand = cell_tris[start + np.arange(counts.sum())]
    lam = _bary_np(points[owner], verts[tris[cand]])
    ok = np.all(lam >= -eps, axis=1)
    tri_out = np.full(n, -1, dtype=np.int64)
    lam_out = np.zeros((n, 3))
    # candidates are sorted by id within a cell; keep the first hit per point
    hit_rows = np.flatnonzero(ok)
    first = np.unique(owner[hit_rows], return_index=True)
    rows = hit_rows[first[1]]
    tri_out[first[0]] = cand[rows]
    lam_out[first[0]] = lam[rows]
    return tri_out, lam_out


# --------------------------------------------------------------------------
# clipping curve elements against the triangulation


@njit
def clip_nb(p0, p1, verts, tris, x0, cell, nx, cell_ptr, cell_tris, eps, t_eps):
    nseg = len(p0)
    # upper bound on pieces: candidates over all overlapped cells
    cap = 0
    for j in range(nseg):
        i0 = min(max(int(np.floor((min(p0[j, 0], p1[j, 0]) - x0) / cell)), 0), nx - 1)
        i1 = min(max(int(np.floor((max(p0[j, 0], p1[j, 0]) - x0) / cell)), 0), nx - 1)
        j0 = min(max(int(np.floor((min(p0[j, 1], p1[j, 1]) - x0) / cell)), 0), nx - 1)
        j1 = min(max(int(np.floor((max(p0[j, 1], p1[j, 1]) - x0) / cell)), 0), nx - 1)
        for ci in range(i0, i1 + 1):
            for cj in range(j0, j1 + 1):
                c = ci * nx + cj
                cap += cell_ptr[c + 1] - cell_ptr[c]
    out_seg = np.empty(cap, dtype=np.int64)
    out_tri = np.empty(cap, dtype=np.int64)
    out_t0 = np.empty(cap)
    out_t1 = np.empty(cap)
    gap = 0.0
    n_out = 0
    v = np.empty((3, 2))
    cand = np.empty(cap if cap > 0 else 1, dtype=np.int64)
    lo_buf = np.empty(cap if cap > 0 else 1)
    hi_buf = np.empty(cap if cap > 0 else 1)
    for j in range(nseg):
        i0 = min(max(int(np.floor((min(p0[j, 0], p1[j, 0]) - x0) / cell)), 0), nx - 1)
        i1 = min(max(int(np.floor((max(p0[j, 0], p1[j, 0]) - x0) / cell)), 0), nx - 1)
        j0 = min(max(int(np.floor((min(p0[j, 1], p1[j, 1]) - x0) / cell)), 0), nx - 1)
        j1 = min(max(int(np.floor((max(p0[j, 1], p1[j, 1]) - x0) / cell)), 0), nx - 1)
        nc = 0
        for ci in range(i0, i1 + 1):
            for cj in range(j0, j1 + 1):
                c = ci * nx + cj
                for s in range(cell_ptr[c], cell_ptr[c + 1]):
                    cand[nc] = cell_tris[s]
                    nc += 1
        cs = np.unique(cand[:nc])
        nk = 0
        for t in cs:
            for i in range(3):
                v[i, 0] = verts[tris[t, i], 0]
                v[i, 1] = verts[tris[t, i], 1]
            dx = p1[j, 0] - p0[j, 0]
            dy = p1[j, 1] - p0[j, 1]
            lo = 0.0
            hi = 1.0
            dead = False
            for i in range(3):
                ax = v[i, 0]
                ay = v[i, 1]
                ex = v[(i + 1) % 3, 0] - ax
                ey = v[(i + 1) % 3, 1] - ay
                alpha = ex * (p0[j, 1] - ay) - ey * (p0[j, 0] - ax)
                beta = ex * dy - ey * dx
                tol = eps * np.sqrt(ex * ex + ey * ey)
                tt = (-tol - alpha) / beta if beta != 0.0 else 0.0
                if beta == 0.0:
                    if alpha < -tol:
                        dead = True
                elif beta > 0.0:
                    if tt > lo:
                        lo = tt
                else:
                    if tt < hi:
                        hi = tt
            if dead or hi - lo <= t_eps:
                continue
            cand[nk] = t
            lo_buf[nk] = lo
            hi_buf[nk] = hi
            nk += 1
        # order by (start bucket, triangle id); cs is ascending so a stable
        # sort on the bucket alone keeps id order within ties
        keys = np.floor(lo_buf[:nk] / t_eps)
        order = np.argsort(keys, kind="mergesort")
        end = 0.0
        first = n_out
        for r in order:
            a = max(lo_buf[r], end)
            b = hi_buf[r]
            if b - a <= t_eps:
                continue
            if a - end > gap:
                gap = a - end
            out_seg[n_out] = j
            out_tri[n_out] = cand[r]
            out_t0[n_out] = end
            out_t1[n_out] = b
            end = b
            n_out += 1
        if n_out > first:
            out_t0[first] = 0.0
            if 1.0 - out_t1[n_out - 1] > gap:
                gap = 1.0 - out_t1[n_out - 1]
            out_t1[n_out - 1] = 1.0
        else:
            gap = 1.0
    return out_seg[:n_out], out_tri[:n_out], out_t0[:n_out], out_t1[:n_out], gap


def clip_np(p0, p1, verts, tris, x0, cell, nx, cell_ptr, cell_tris, eps, t_eps):
    nseg = len(p0)
    lo_xy = np.minimum(p0, p1)
    hi_xy = np.maximum(p0, p1)
    i0 = np.clip(np.floor((lo_xy - x0) / cell).astype(np.int64), 0, nx - 1)
    i1 = np.clip(np.floor((hi_xy - x0) / cell).astype(np.int64), 0, nx - 1)
    wi = i1[:, 0] - i0[:, 0] + 1
    wj = i1[:, 1] - i0[:, 1] + 1
    ncell = wi * wj
    seg_of_cell = np.repeat(np.arange(nseg), ncell)
    local = np.arange(ncell.sum()) - np.repeat(np.cumsum(ncell) - ncell, ncell)
    cells = (i0[seg_of_cell, 0] + local % wi[seg_of_cell]) * nx + i0[seg_of_cell, 1] + local // wi[seg_of_cell]
    counts = cell_ptr[cells + 1] - cell_ptr[cells]
    seg = np.repeat(seg_of_cell, counts)
    start = np.repeat(cell_ptr[cells] - (np.cumsum(counts) - counts), counts)
    tri = cell_tris[start + np.arange(counts.sum())]
    key = np.unique(seg * len(tris) + tri)
    seg = key // len(tris)
    tri = key % len(tris)
    lo, hi = _clip_params_np(p0[seg], p1[seg], verts[tris[tri]], eps)
    keep = hi - lo > t_eps
    seg, tri, lo, hi = seg[keep], tri[keep], lo[keep], hi[keep]
    order = np.lexsort((tri, np.floor(lo / t_eps), seg))
    seg, tri, lo, hi = seg[order], tri[order], lo[order], hi[order]
    # running max of the end parameter inside each segment, shifted by one
    shifted = hi + 2.0 * seg
    run = np.maximum.accumulate(shifted) - 2.0 * seg
    prev_end = np.empty_like(run)
    prev_end[1:] = run[:-1]
    new_seg = np.ones(len(seg), dtype=bool)
    new_seg[1:] = seg[1:] != seg[:-1]
    prev_end[new_seg] = 0.0
    a = np.maximum(lo, prev_end)
    keep = hi - a > t_eps
    seg, tri, a, hi, prev_end = seg[keep], tri[keep], a[keep], hi[keep], prev_end[keep]
    gaps = a - prev_end
    gap = float(gaps.max()) if len(gaps) else 1.0
    first = np.ones(len(seg), dtype=bool)
    first[1:] = seg[1:] != seg[:-1]
    last = np.ones(len(seg), dtype=bool)
    last[:-1] = seg[1:] != seg[:-1]
    t0 = np.empty_like(hi)
    t0[1:] = hi[:-1]
    t0[first] = 0.0
    if last.any():
        gap = max(gap, float((1.0 - hi[last]).max()))
    hi = hi.copy()
    hi[last] = 1.0
    if len(np.unique(seg)) != nseg:
        gap = 1.0
    return seg, tri, t0, hi, gap
