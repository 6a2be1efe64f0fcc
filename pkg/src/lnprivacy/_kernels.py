"""Compiled label-setting search used by :mod:`lnprivacy.pathfind`.

Mirrors the pure-Python search exactly; labels live in one int64 table with
columns ``W, H, NODE, A, PARENT, EDGE, RANK, TERM``.  A label's cid sequence
(sender first) is recovered by walking parents toward the recipient.
"""

from __future__ import annotations

import numpy as np
from numba import njit

W, H, NODE, A, PARENT, EDGE, RANK, TERM = range(8)
INT64_MAX = np.iinfo(np.int64).max


@njit(cache=True)
def _less(L, i, j):
    if L[i, W] != L[j, W]:
        return L[i, W] < L[j, W]
    if L[i, H] != L[j, H]:
        return L[i, H] < L[j, H]
    a, b = i, j
    while a >= 0 and b >= 0:
        if L[a, RANK] != L[b, RANK]:
            return L[a, RANK] < L[b, RANK]
        a = L[a, PARENT]
        b = L[b, PARENT]
    return i < j


@njit(cache=True)
def _push(heap, size, L, idx):
    if size == heap.shape[0]:
        grown = np.empty(heap.shape[0] * 2, dtype=np.int64)
        grown[:size] = heap[:size]
        heap = grown
    pos = size
    heap[pos] = idx
    while pos > 0:
        parent = (pos - 1) >> 1
        if _less(L, heap[pos], heap[parent]):
            heap[pos], heap[parent] = heap[parent], heap[pos]
            pos = parent
        else:
            break
    return heap, size + 1


@njit(cache=True)
def _pop(heap, size, L):
    top = heap[0]
    size -= 1
    heap[0] = heap[size]
    pos = 0
    while True:
        left = 2 * pos + 1
        if left >= size:
            break
        child = left
        if left + 1 < size and _less(L, heap[left + 1], heap[left]):
            child = left + 1
        if _less(L, heap[child], heap[pos]):
            heap[pos], heap[child] = heap[child], heap[pos]
            pos = child
        else:
            break
    return top, size


@njit(cache=True)
def _on_path(L, idx, node):
    while idx >= 0:
        if L[idx, NODE] == node:
            return True
        idx = L[idx, PARENT]
    return False


@njit(cache=True)
def label_search(indptr, tail, eid, cap, base, rate, mult, coef, const, public, rank,
                 e_cap, e_base, e_rate, e_mult, e_coef, e_const,
                 recipient, amt, target, sender, max_hops,
                 banned_node, banned_eid, root_rev, full):
    """Backward Pareto-label search from ``recipient``.

    ``full``: first label popped at every node (the all-senders table).
    Otherwise: best label at ``target``, closed over the fixed ``root_rev``
    hops; returns its index and total weight.
    """
    n_nodes = indptr.shape[0] - 1
    L = np.empty((1024, 8), dtype=np.int64)
    n_lab = 1
    L[0, W] = 0
    L[0, H] = 0
    L[0, NODE] = recipient
    L[0, A] = amt
    L[0, PARENT] = -1
    L[0, EDGE] = -1
    L[0, RANK] = -1
    L[0, TERM] = 0
    heap = np.empty(1024, dtype=np.int64)
    size = 0
    heap, size = _push(heap, size, L, 0)
    min_a = np.full((n_nodes, max_hops + 1), INT64_MAX, dtype=np.int64)
    best = np.full(n_nodes, -1, dtype=np.int64)
    best_idx = -1
    best_total = INT64_MAX
    while size > 0:
        idx, size = _pop(heap, size, L)
        w = L[idx, W]
        if best_idx >= 0 and w > best_total:
            break
        u = L[idx, NODE]
        a = L[idx, A]
        h = L[idx, H]
        if L[idx, TERM] == 1:
            if best[u] < 0:
                best[u] = idx
            continue
        if min_a[u, h] <= a:
            continue
        for hh in range(h, max_hops + 1):
            if a < min_a[u, hh]:
                min_a[u, hh] = a
        if full:
            if best[u] < 0 and u != recipient:
                best[u] = idx
        elif u == target:
            total = w
            ok = True
            aa = a
            for r in range(root_rev.shape[0]):
                e = root_rev[r]
                if e_cap[e] < aa:
                    ok = False
                    break
                fee = e_base[e] + aa * e_rate[e] // 1_000_000
                total += fee * e_mult[e] + aa * e_coef[e] + e_const[e]
                aa += fee
            if ok and (best_idx < 0 or total < best_total
                       or (total == best_total and _less(L, idx, best_idx))):
                best_idx = idx
                best_total = total
            if root_rev.shape[0] == 0:
                break
            continue
        if h >= max_hops:
            continue
        nh = h + 1
        for k in range(indptr[u], indptr[u + 1]):
            t = tail[k]
            if cap[k] < a or banned_node[t] or _on_path(L, idx, t):
                continue
            terminal = 0
            if public[k] == 0:
                if full:
                    if u != recipient and t != recipient:
                        terminal = 1
                        if best[t] >= 0:
                            continue
                elif u != recipient and t != recipient and u != sender and t != sender:
                    continue
            if t == target and banned_eid[eid[k]]:
                continue
            fee = base[k] + a * rate[k] // 1_000_000
            na = a + fee
            if terminal == 0 and min_a[t, nh] <= na:
                continue
            if n_lab == L.shape[0]:
                grown = np.empty((L.shape[0] * 2, 8), dtype=np.int64)
                grown[:n_lab] = L[:n_lab]
                L = grown
            L[n_lab, W] = w + fee * mult[k] + a * coef[k] + const[k]
            L[n_lab, H] = nh
            L[n_lab, NODE] = t
            L[n_lab, A] = na
            L[n_lab, PARENT] = idx
            L[n_lab, EDGE] = eid[k]
            L[n_lab, RANK] = rank[k]
            L[n_lab, TERM] = terminal
            heap, size = _push(heap, size, L, n_lab)
            n_lab += 1
    return L[:n_lab], best, best_idx, best_total
