"""Compiled batch versions of the connectivity kernels.

Each call enumerates every edge subset of one piece against every
combination of child partitions (mixed radix, slot 0 most significant) and
returns integer codes.  A partition code packs the restricted-growth string
in base 16, position 0 least significant; a color code is
``(partition_code << 4) | (marked + 1)`` with 0 meaning white.
"""

from __future__ import annotations

import numpy as np
from numba import njit

CODE_BASE = 16


@njit(cache=True, nogil=True)
def _find(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


@njit(cache=True, nogil=True)
def _union(parent, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra < rb:
        parent[rb] = ra
    elif rb < ra:
        parent[ra] = rb


@njit(cache=True, nogil=True)
def _read_code(parent, verts, n, labels, roots):
    # canonical relabelling of verts[:n] by first occurrence
    code = 0
    scale = 1
    used = 0
    for i in range(n):
        r = _find(parent, verts[i])
        lab = -1
        for j in range(used):
            if roots[j] == r:
                lab = j
                break
        if lab < 0:
            roots[used] = r
            lab = used
            used += 1
        labels[i] = lab
        code += lab * scale
        scale *= CODE_BASE
    return code


@njit(cache=True, nogil=True)
def _apply_slots(parent, k, attach, attach_len, part_tab, radix):
    # decode k (slot 0 most significant) and glue every slot's blocks
    n_slots = attach.shape[0]
    for s in range(n_slots - 1, -1, -1):
        choice = k % radix[s]
        k //= radix[s]
        first_len = attach_len[s]
        for i in range(first_len):
            lab_i = part_tab[s, choice, i]
            for j in range(i):
                if part_tab[s, choice, j] == lab_i:
                    _union(parent, attach[s, j], attach[s, i])
                    break


@njit(cache=True, nogil=True)
def induced_codes(nv, edges, border, attach, attach_len, part_tab, radix):
    n_edges = edges.shape[0]
    n_sub = 1 << n_edges
    total = 1
    for r in radix:
        total *= r
    out = np.empty((n_sub, total), dtype=np.int64)
    base = np.empty(nv, dtype=np.int64)
    work = np.empty(nv, dtype=np.int64)
    nb = border.shape[0]
    labels = np.empty(nb, dtype=np.int64)
    roots = np.empty(nb, dtype=np.int64)
    for g in range(n_sub):
        for v in range(nv):
            base[v] = v
        for e in range(n_edges):
            if (g >> e) & 1:
                _union(base, edges[e, 0], edges[e, 1])
        for k in range(total):
            work[:] = base
            _apply_slots(work, k, attach, attach_len, part_tab, radix)
            out[g, k] = _read_code(work, border, nb, labels, roots)
    return out


@njit(cache=True, nogil=True)
def color_codes(nv, edges, border, parent_rgs, marked, attach, attach_len, part_tab, radix, target):
    """Child color codes for one target slot; ``attach``/``part_tab`` hold the siblings."""
    n_edges = edges.shape[0]
    n_sub = 1 << n_edges
    total = 1
    for r in radix:
        total *= r
    out = np.empty((n_sub, total), dtype=np.int64)
    size = nv + 1
    origin = nv
    base = np.empty(size, dtype=np.int64)
    work = np.empty(size, dtype=np.int64)
    nb = border.shape[0]
    nt = target.shape[0]
    labels = np.empty(nt, dtype=np.int64)
    roots = np.empty(nt, dtype=np.int64)
    for g in range(n_sub):
        for v in range(size):
            base[v] = v
        for i in range(nb):
            for j in range(i):
                if parent_rgs[j] == parent_rgs[i]:
                    _union(base, border[j], border[i])
                    break
            if parent_rgs[i] == marked:
                _union(base, origin, border[i])
        for e in range(n_edges):
            if (g >> e) & 1:
                _union(base, edges[e, 0], edges[e, 1])
        for k in range(total):
            work[:] = base
            _apply_slots(work, k, attach, attach_len, part_tab, radix)
            code = _read_code(work, target, nt, labels, roots)
            o = _find(work, origin)
            m = 0
            for i in range(nt):
                if _find(work, target[i]) == o:
                    m = labels[i] + 1
                    break
            out[g, k] = (code << 4) | m
    return out


def partition_code(rgs) -> int:
    code = 0
    scale = 1
    for lab in rgs:
        code += lab * scale
        scale *= CODE_BASE
    return code


def decode_partition(code: int, n: int) -> tuple:
    out = []
    for _ in range(n):
        out.append(code % CODE_BASE)
        code //= CODE_BASE
    return tuple(out)


def pack_slots(slots_attach, slot_tables):
    """Pad per-slot attach lists and supported-partition tables into arrays."""
    n = len(slots_attach)
    width = max((len(a) for a in slots_attach), default=1)
    depth = max((len(t) for t in slot_tables), default=1)
    attach = np.zeros((n, width), dtype=np.int64)
    attach_len = np.zeros(n, dtype=np.int64)
    part_tab = np.zeros((n, depth, width), dtype=np.int64)
    radix = np.ones(n, dtype=np.int64)
    for s, (att, tab) in enumerate(zip(slots_attach, slot_tables)):
        attach[s, : len(att)] = att
        attach_len[s] = len(att)
        radix[s] = len(tab)
        for c, rgs in enumerate(tab):
            part_tab[s, c, : len(rgs)] = rgs
    return attach, attach_len, part_tab, radix
