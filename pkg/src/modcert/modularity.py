"""Modularity, relative modularity and constructive partitions."""

from __future__ import annotations

import math

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, depth_first_order

from .graph import MultiGraph, component_labels
from .partition import VertexPartition, check_covers


def block_stats(g, block):
    """Return (e(A), vol(A)); a loop inside A counts as one edge, volume 2."""
    idx = np.asarray(list(block), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= g.n or not g.retained[idx].all()):
        raise ValueError("block contains a vertex outside the graph")
    mask = np.zeros(g.n, dtype=bool)
    mask[idx] = True
    e = g.edges
    inside = int(np.count_nonzero(mask[e[:, 0]] & mask[e[:, 1]]))
    return inside, int(g.degree[idx].sum())


def _block_arrays(g, partition):
    check_covers(partition, g.vertices)
    lab = partition.labels(g.n)
    k = len(partition)
    e = g.edges
    same = lab[e[:, 0]] == lab[e[:, 1]]
    inner = np.bincount(lab[e[same, 0]], minlength=k)
    vs = g.vertices
    vol = np.bincount(lab[vs], weights=g.degree[vs], minlength=k)
    size = np.bincount(lab[vs], minlength=k)
    return inner, vol, size


def modularity(g, partition):
    """q = sum e(A)/m - sum vol(A)^2 / 4m^2; 0 for an edgeless graph."""
    inner, vol, _ = _block_arrays(g, partition)
    m = g.m
    if m == 0:
        return 0.0
    return float(inner.sum() / m - np.sum(vol.astype(float) ** 2) / (4.0 * m * m))


def relative_modularity(g, block):
    """(n/|A|)(e(A)/m - vol(A)^2/4m^2), n counting the graph's vertices."""
    block = list(block)
    if not block:
        raise ValueError("empty block")
    if g.m == 0:
        raise ValueError("relative modularity needs at least one edge")
    e, vol = block_stats(g, block)
    m = g.m
    return g.order / len(block) * (e / m - vol * vol / (4.0 * m * m))


def report(g, partition):
    """Modularity with the per-block breakdown."""
    inner, vol, size = _block_arrays(g, partition)
    m, n = g.m, g.order
    blocks = []
    for i in range(len(partition)):
        if m:
            qr = n / size[i] * (inner[i] / m - vol[i] ** 2 / (4.0 * m * m))
        else:
            qr = 0.0
        blocks.append({"size": int(size[i]), "e": int(inner[i]), "vol": int(vol[i]), "qr": float(qr)})
    q = 0.0 if m == 0 else float(inner.sum() / m - np.sum(vol.astype(float) ** 2) / (4.0 * m * m))
    return {"n": n, "m": m, "q": q, "blocks": blocks}


def edges_between(g, a, b):
    ma = np.zeros(g.n, dtype=bool)
    mb = np.zeros(g.n, dtype=bool)
    ma[list(a)] = True
    mb[list(b)] = True
    e = g.edges
    return int(np.count_nonzero((ma[e[:, 0]] & mb[e[:, 1]]) | (mb[e[:, 0]] & ma[e[:, 1]])))


def merge_delta(g, a, b):
    """Change in q from merging disjoint blocks a and b."""
    m = g.m
    _, va = block_stats(g, a)
    _, vb = block_stats(g, b)
    return edges_between(g, a, b) / m - va * vb / (2.0 * m * m)


# ---------------------------------------------------------------- brute force


def restricted_growth_strings(n):
    """All set partitions of n items as restricted-growth strings, in lex order."""
    if n == 0:
        return np.zeros((1, 0), dtype=np.int8)
    rows = np.zeros((1, 1), dtype=np.int8)
    top = np.zeros(1, dtype=np.int8)
    for _ in range(1, n):
        reps = top.astype(np.int64) + 2
        parent = np.repeat(np.arange(rows.shape[0]), reps)
        start = np.cumsum(reps) - reps
        child = (np.arange(parent.size) - np.repeat(start, reps)).astype(np.int8)
        rows = np.concatenate([rows[parent], child[:, None]], axis=1)
        top = np.maximum(top[parent], child)
    return rows


def brute_force_qstar(g, n_limit=10):
    """Exact optimum over all partitions of the retained vertices.

    Ties (within 1e-12) go to the partition with the fewest blocks, then to the
    lexicographically first restricted-growth string.
    """
    vs = g.vertices
    n = vs.size
    if n > n_limit:
        raise ValueError(f"graph has {n} vertices, over the brute-force limit {n_limit}")
    if n == 0:
        return 0.0, VertexPartition([])
    pos = np.full(g.n, -1, dtype=np.int64)
    pos[vs] = np.arange(n)
    rgs = restricted_growth_strings(n)
    m = g.m
    if m == 0:
        q = np.zeros(rgs.shape[0])
    else:
        e = pos[g.edges]
        inner = (rgs[:, e[:, 0]] == rgs[:, e[:, 1]]).sum(axis=1)
        deg = g.degree[vs].astype(float)
        sq = np.zeros(rgs.shape[0])
        for k in range(n):
            sq += ((rgs == k) @ deg) ** 2
        q = inner / m - sq / (4.0 * m * m)
    nblocks = rgs.max(axis=1).astype(np.int64) + 1
    best = q.max()
    cand = np.flatnonzero(q >= best - 1e-12)
    pick = cand[np.argmin(nblocks[cand])]
    labels = rgs[pick]
    part = VertexPartition.from_labels(np.asarray(labels), None)
    part = VertexPartition([[int(vs[i]) for i in b] for b in part])
    return float(q[pick]), part


# ---------------------------------------------------------------- trees


def size_window(size_ref_n, max_degree):
    r = math.isqrt(size_ref_n)
    up = r if r * r == size_ref_n else r + 1
    return r, max_degree * up


def tree_partition(g, size_ref_n):
    """Split a tree into subtrees of order between floor(sqrt n) and D*ceil(sqrt n).

    While a piece has more than D*ceil(sqrt n) vertices, cut the edge whose
    smaller side is largest (ties to the smallest edge index) and recurse on
    both sides. Side sizes do not depend on the root, so the tree is rooted
    once and subtree sizes are patched along the path above each cut.
    """
    vs = g.vertices
    k = int(vs.size)
    if k == 0:
        raise ValueError("empty tree")
    if g.m != k - 1:
        raise ValueError("input is not a tree (edge count != order - 1)")
    lo, _ = size_window(size_ref_n, 1)
    if k < lo:
        raise ValueError(f"tree of order {k} is smaller than floor(sqrt({size_ref_n})) = {lo}")
    delta = int(g.degree.max()) if g.m else 0
    lo, hi = size_window(size_ref_n, max(delta, 1))
    if k <= hi:
        return VertexPartition([vs.tolist()])
    e = g.edges
    a = csr_matrix((np.ones(2 * g.m), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(g.n, g.n))
    order, pred = depth_first_order(a, int(vs[0]), directed=False, return_predecessors=True)
    if order.size != k:
        raise ValueError("input is not a tree (disconnected)")
    pos = np.full(g.n, -1, dtype=np.int64)
    pos[order] = np.arange(k)
    parent = np.full(k, -1, dtype=np.int64)
    parent[1:] = pos[pred[order[1:]]]
    # index of the edge joining each vertex to its parent
    indptr, nbr, eid = g.csr
    src = np.repeat(np.arange(g.n), np.diff(indptr))
    hit = (pred[src] == nbr) & (pred[src] >= 0)
    pedge = np.full(g.n, -1, dtype=np.int64)
    pedge[src[hit]] = eid[hit]
    pedge = pedge[order]
    sub = np.ones(k, dtype=np.int64)
    par_list = parent.tolist()
    sub_list = sub.tolist()
    for i in range(k - 1, 0, -1):
        sub_list[par_list[i]] += sub_list[i]
    sub = np.asarray(sub_list, dtype=np.int64)
    end = np.arange(k) + sub  # preorder range of each global subtree
    piece = np.zeros(k, dtype=np.int64)
    stack = [(0, 0)]
    next_id = 1
    blocks = []
    while stack:
        pid, top = stack.pop()
        rng_ = np.arange(top, end[top])
        idx = rng_[piece[top:end[top]] == pid]
        size = int(idx.size)
        if size <= hi:
            blocks.append(order[idx].tolist())
            continue
        cand = idx[1:]
        side = np.minimum(sub[cand], size - sub[cand])
        best = side.max()
        ties = cand[side == best]
        c = int(ties[np.argmin(pedge[ties])])
        if best < lo:
            raise RuntimeError("tree split produced a piece below the size window")
        seg = piece[c:end[c]]
        seg[seg == pid] = next_id
        cut = int(sub[c])
        u = par_list[c]
        while True:
            sub[u] -= cut
            if u == top:
                break
            u = par_list[u]
        stack.append((next_id, c))
        stack.append((pid, top))
        next_id += 1
    return VertexPartition(blocks)


def spanning_tree(g, vertices):
    """BFS spanning tree (rooted at the smallest id) of the component on ``vertices``."""
    vertices = np.unique(np.asarray(list(vertices) if not isinstance(vertices, np.ndarray) else vertices,
                                    dtype=np.int64))
    allowed = np.zeros(g.n, dtype=bool)
    allowed[vertices] = True
    e = g.edges
    keep = allowed[e[:, 0]] & allowed[e[:, 1]] & (e[:, 0] != e[:, 1])
    e = e[keep]
    a = csr_matrix((np.ones(2 * e.shape[0]), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(g.n, g.n))
    order, pred = breadth_first_order(a, int(vertices[0]), directed=False, return_predecessors=True)
    if order.size != vertices.size:
        raise ValueError("vertex set is not connected")
    child = order[1:]
    edges = np.stack([pred[child], child], axis=1)
    return MultiGraph(g.n, edges, allowed)


def split_components(g, comps, size_ref_n, max_degree):
    """Components of order > max_degree*ceil(sqrt n) are tree-partitioned; the rest kept."""
    _, hi = size_window(size_ref_n, max_degree)
    blocks = []
    for comp in comps:
        if len(comp) > hi:
            blocks.extend(tree_partition(spanning_tree(g, comp), size_ref_n).blocks)
        else:
            blocks.append(comp)
    return blocks


def baseline_guarantee(g, n_components):
    n = g.order
    d = 2.0 * g.m / n
    delta = int(g.degree.max())
    up = math.isqrt(n)
    if up * up != n:
        up += 1
    return 2 * (n - n_components) / (d * n) - delta ** 3 * up / (n * d * d) - 2 * (2 / d) / math.sqrt(n)


def component_baseline(g):
    """Components, with the large ones tree-partitioned; returns (partition, q)."""
    vs = g.vertices
    if vs.size == 0 or np.any(g.degree[vs] == 0):
        raise ValueError("isolated vertex present")
    lab = component_labels(g)
    comps = VertexPartition.from_labels(lab, vs).blocks
    delta = int(g.degree.max())
    part = VertexPartition(split_components(g, comps, g.order, delta))
    q = modularity(g, part)
    bound = baseline_guarantee(g, len(comps))
    if q < bound - 1e-12:
        raise RuntimeError(f"baseline guarantee violated: q={q} < {bound}")
    return part, q


# ---------------------------------------------------------------- text io


def write_partition(partition, path):
    with open(path, "w", newline="\n") as fh:
        for b in partition:
            fh.write(" ".join(map(str, b)) + "\n")


def read_partition(path):
    blocks = []
    with open(path) as fh:
        for line in fh:
            s = line.split("#", 1)[0].split()
            if s:
                blocks.append([int(x) for x in s])
    return VertexPartition(blocks)
