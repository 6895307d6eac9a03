"""Compiled inner loops (8-connected, row-major rasters).

All kernels release the GIL so callers can run many of them from a thread
pool. Nothing here validates its inputs; the public wrappers do.
"""

import numpy as np
from numba import njit

_DI = np.array([-1, -1, -1, 0, 0, 1, 1, 1], dtype=np.int64)
_DJ = np.array([-1, 0, 1, -1, 1, -1, 0, 1], dtype=np.int64)

# forward-scan causal neighbours (already visited in raster order)
_FWD_DI = np.array([-1, -1, -1, 0], dtype=np.int64)
_FWD_DJ = np.array([-1, 0, 1, -1], dtype=np.int64)


# --------------------------------------------------------------------------
# binary heap keyed on (level, sequence)


@njit(cache=True, nogil=True)
def _heap_push(lev, seq, idx, n, level, s, p):
    k = n
    lev[k] = level
    seq[k] = s
    idx[k] = p
    while k > 0:
        parent = (k - 1) >> 1
        if lev[parent] < lev[k] or (lev[parent] == lev[k] and seq[parent] < seq[k]):
            break
        lev[parent], lev[k] = lev[k], lev[parent]
        seq[parent], seq[k] = seq[k], seq[parent]
        idx[parent], idx[k] = idx[k], idx[parent]
        k = parent
    return n + 1


@njit(cache=True, nogil=True)
def _heap_pop(lev, seq, idx, n):
    level = lev[0]
    p = idx[0]
    n -= 1
    lev[0] = lev[n]
    seq[0] = seq[n]
    idx[0] = idx[n]
    k = 0
    while True:
        left = 2 * k + 1
        if left >= n:
            break
        c = left
        right = left + 1
        if right < n and (lev[right] < lev[left] or (lev[right] == lev[left] and seq[right] < seq[left])):
            c = right
        if lev[k] < lev[c] or (lev[k] == lev[c] and seq[k] < seq[c]):
            break
        lev[c], lev[k] = lev[k], lev[c]
        seq[c], seq[k] = seq[k], seq[c]
        idx[c], idx[k] = idx[k], idx[c]
        k = c
    return level, p, n


# --------------------------------------------------------------------------
# marker-controlled flooding


@njit(cache=True, nogil=True)
def _propagate(relief, out, state, lev, seq, idx, n, s):
    h, w = relief.shape
    while n > 0:
        level, p, n = _heap_pop(lev, seq, idx, n)
        i = p // w
        j = p - i * w
        lab = 0
        conflict = False
        for k in range(8):
            ii = i + _DI[k]
            jj = j + _DJ[k]
            if 0 <= ii < h and 0 <= jj < w and state[ii, jj] == 2:
                other = out[ii, jj]
                if other > 0:
                    if lab == 0:
                        lab = other
                    elif other != lab:
                        conflict = True
        state[i, j] = 2
        if conflict or lab == 0:
            out[i, j] = 0
            continue
        out[i, j] = lab
        n, s = _push_free(relief, state, lev, seq, idx, n, s, i, j, level)
    return n, s


@njit(cache=True, nogil=True)
def _push_free(relief, state, lev, seq, idx, n, s, i, j, level):
    h, w = relief.shape
    for k in range(8):
        ii = i + _DI[k]
        jj = j + _DJ[k]
        if 0 <= ii < h and 0 <= jj < w and state[ii, jj] == 0:
            state[ii, jj] = 1
            v = relief[ii, jj]
            if v < level:
                v = level
            n = _heap_push(lev, seq, idx, n, v, s, ii * w + jj)
            s += 1
    return n, s


@njit(cache=True, nogil=True)
def flood(relief, markers):
    """Priority flood from labelled markers; returns labels with 0 on lines.

    Lines can close off pixels that no label reaches (e.g. between adjacent
    markers). Each such pocket is opened by giving the first line pixel next
    to it the lowest label it touches and resuming the flood from there.
    """
    h, w = relief.shape
    size = h * w
    out = markers.copy()
    state = np.zeros((h, w), np.uint8)  # 0 free, 1 queued, 2 settled
    lev = np.empty(size, np.float64)
    seq = np.empty(size, np.int64)
    idx = np.empty(size, np.int64)
    n = 0
    s = 0
    for i in range(h):
        for j in range(w):
            if markers[i, j] > 0:
                state[i, j] = 2
    for i in range(h):
        for j in range(w):
            if markers[i, j] > 0:
                n, s = _push_free(relief, state, lev, seq, idx, n, s, i, j, -np.inf)
    n, s = _propagate(relief, out, state, lev, seq, idx, n, s)
    while True:
        found = -1
        for p in range(size):
            i = p // w
            j = p - i * w
            if out[i, j] != 0 or state[i, j] != 2:
                continue
            for k in range(8):
                ii = i + _DI[k]
                jj = j + _DJ[k]
                if 0 <= ii < h and 0 <= jj < w and state[ii, jj] == 0:
                    found = p
                    break
            if found >= 0:
                break
        if found < 0:
            break
        i = found // w
        j = found - i * w
        lab = 0
        for k in range(8):
            ii = i + _DI[k]
            jj = j + _DJ[k]
            if 0 <= ii < h and 0 <= jj < w and out[ii, jj] > 0:
                if lab == 0 or out[ii, jj] < lab:
                    lab = out[ii, jj]
        out[i, j] = lab
        n, s = _push_free(relief, state, lev, seq, idx, n, s, i, j, relief[i, j])
        n, s = _propagate(relief, out, state, lev, seq, idx, n, s)
    return out


# --------------------------------------------------------------------------
# geodesic reconstruction by dilation (hybrid raster scans + FIFO)


@njit(cache=True, nogil=True)
def reconstruct_dilation(marker, mask):
    h, w = mask.shape
    out = np.minimum(marker, mask)
    for i in range(h):
        for j in range(w):
            v = out[i, j]
            for k in range(4):
                ii = i + _FWD_DI[k]
                jj = j + _FWD_DJ[k]
                if 0 <= ii < h and 0 <= jj < w and out[ii, jj] > v:
                    v = out[ii, jj]
            out[i, j] = min(v, mask[i, j])
    fifo = np.empty(h * w, np.int64)
    queued = np.zeros((h, w), np.bool_)
    head = 0
    tail = 0
    for i in range(h - 1, -1, -1):
        for j in range(w - 1, -1, -1):
            v = out[i, j]
            for k in range(4):
                ii = i - _FWD_DI[k]
                jj = j - _FWD_DJ[k]
                if 0 <= ii < h and 0 <= jj < w and out[ii, jj] > v:
                    v = out[ii, jj]
            v = min(v, mask[i, j])
            out[i, j] = v
            for k in range(4):
                ii = i - _FWD_DI[k]
                jj = j - _FWD_DJ[k]
                if 0 <= ii < h and 0 <= jj < w and out[ii, jj] < v and out[ii, jj] < mask[ii, jj]:
                    if not queued[i, j]:
                        queued[i, j] = True
                        fifo[tail % (h * w)] = i * w + j
                        tail += 1
                    break
    while head < tail:
        p = fifo[head % (h * w)]
        head += 1
        i = p // w
        j = p - i * w
        queued[i, j] = False
        v = out[i, j]
        for k in range(8):
            ii = i + _DI[k]
            jj = j + _DJ[k]
            if 0 <= ii < h and 0 <= jj < w:
                q = out[ii, jj]
                m = mask[ii, jj]
                if q < v and q != m:
                    out[ii, jj] = min(v, m)
                    if not queued[ii, jj]:
                        queued[ii, jj] = True
                        fifo[tail % (h * w)] = ii * w + jj
                        tail += 1
    return out


# --------------------------------------------------------------------------
# plateaus and regional minima


@njit(cache=True, nogil=True)
def regional_minima(relief):
    """Label 8-connected plateaus without a lower neighbour, 1..n in raster order."""
    h, w = relief.shape
    plateau = np.zeros((h, w), np.int64)
    stack = np.empty(h * w, np.int64)
    out = np.zeros((h, w), np.int64)
    members = np.empty(h * w, np.int64)
    n_min = 0
    n_plateau = 0
    for i0 in range(h):
        for j0 in range(w):
            if plateau[i0, j0] != 0:
                continue
            n_plateau += 1
            v = relief[i0, j0]
            plateau[i0, j0] = n_plateau
            top = 0
            stack[top] = i0 * w + j0
            top += 1
            count = 0
            is_min = True
            while top > 0:
                top -= 1
                p = stack[top]
                members[count] = p
                count += 1
                i = p // w
                j = p - i * w
                for k in range(8):
                    ii = i + _DI[k]
                    jj = j + _DJ[k]
                    if 0 <= ii < h and 0 <= jj < w:
                        u = relief[ii, jj]
                        if u < v:
                            is_min = False
                        elif u == v and plateau[ii, jj] == 0:
                            plateau[ii, jj] = n_plateau
                            stack[top] = ii * w + jj
                            top += 1
            if is_min:
                n_min += 1
                for c in range(count):
                    p = members[c]
                    out[p // w, p % w] = n_min
    return out, n_min


# --------------------------------------------------------------------------
# volume extinction values (union-find over pixels sorted by level)


@njit(cache=True, nogil=True)
def _find(parent, p):
    root = p
    while parent[root] != root:
        root = parent[root]
    while parent[p] != root:
        nxt = parent[p]
        parent[p] = root
        p = nxt
    return root


@njit(cache=True, nogil=True)
def volume_extinction(relief, minima, n_min):
    """Return (extinction, level, absorber) per minimum label (index 0 unused).

    The survivor gets ``inf`` extinction and absorber 0.
    """
    h, w = relief.shape
    size = h * w
    flat = relief.ravel()
    lab = minima.ravel()
    order = np.argsort(flat, kind="mergesort")
    parent = np.arange(size)
    count = np.zeros(size, np.float64)
    total = np.zeros(size, np.float64)
    owner = np.zeros(size, np.int64)
    done = np.zeros(size, np.bool_)
    ext = np.full(n_min + 1, np.inf)
    ext_level = np.full(n_min + 1, np.nan)
    absorber = np.zeros(n_min + 1, np.int64)
    roots = np.empty(9, np.int64)
    for t in range(size):
        p = order[t]
        v = flat[p]
        done[p] = True
        count[p] = 1.0
        total[p] = v
        owner[p] = lab[p]
        i = p // w
        j = p - i * w
        nr = 0
        roots[nr] = p
        nr += 1
        for k in range(8):
            ii = i + _DI[k]
            jj = j + _DJ[k]
            if 0 <= ii < h and 0 <= jj < w:
                q = ii * w + jj
                if done[q]:
                    r = _find(parent, q)
                    seen = False
                    for c in range(nr):
                        if roots[c] == r:
                            seen = True
                            break
                    if not seen:
                        roots[nr] = r
                        nr += 1
        # winner: largest volume at level v, ties to the lower minimum label
        win = 0
        best = -1.0
        for c in range(nr):
            m = owner[roots[c]]
            if m > 0:
                vol = count[roots[c]] * v - total[roots[c]]
                if win == 0 or vol > best or (vol == best and m < win):
                    win = m
                    best = vol
        for c in range(nr):
            m = owner[roots[c]]
            if m > 0 and m != win and ext[m] == np.inf:
                ext[m] = count[roots[c]] * v - total[roots[c]]
                ext_level[m] = v
                absorber[m] = win
        root = roots[0]
        for c in range(1, nr):
            r = roots[c]
            parent[r] = root
            count[root] += count[r]
            total[root] += total[r]
        owner[root] = win
    return ext, ext_level, absorber


@njit(cache=True, nogil=True)
def equal_components(markers):
    """Relabel 8-connected runs of equal positive labels 1..n in raster order."""
    h, w = markers.shape
    out = np.zeros((h, w), np.int64)
    stack = np.empty(h * w, np.int64)
    n = 0
    for i0 in range(h):
        for j0 in range(w):
            v = markers[i0, j0]
            if v <= 0 or out[i0, j0] != 0:
                continue
            n += 1
            out[i0, j0] = n
            top = 1
            stack[0] = i0 * w + j0
            while top > 0:
                top -= 1
                p = stack[top]
                i = p // w
                j = p - i * w
                for k in range(8):
                    ii = i + _DI[k]
                    jj = j + _DJ[k]
                    if 0 <= ii < h and 0 <= jj < w and out[ii, jj] == 0 and markers[ii, jj] == v:
                        out[ii, jj] = n
                        stack[top] = ii * w + jj
                        top += 1
    return out, n
