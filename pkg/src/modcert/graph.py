"""Degree sequences, configuration-model sampling and basic multigraph structure.

Vertex ids are dense integers ``0..n-1``. Loops count once as an edge and add
two to the degree of their vertex. All randomness goes through numpy's
``default_rng`` (PCG64); every sampler accepts either an integer seed or an
existing ``numpy.random.Generator``.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc

from .partition import VertexPartition


def make_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------- sequences


@dataclass(frozen=True)
class DegreeSequence:
    """Exact vertex counts per degree."""

    counts: dict

    def __post_init__(self):
        clean = {}
        for d, c in self.counts.items():
            d, c = int(d), int(c)
            if d < 1:
                raise ValueError(f"degree must be >= 1, got {d}")
            if c < 0:
                raise ValueError(f"negative count for degree {d}")
            if c:
                clean[d] = clean.get(d, 0) + c
        if not clean:
            raise ValueError("empty degree sequence")
        if sum(d * c for d, c in clean.items()) % 2:
            raise ValueError("odd degree sum")
        object.__setattr__(self, "counts", dict(sorted(clean.items())))

    @property
    def n(self):
        return sum(self.counts.values())

    @property
    def max_degree(self):
        return max(self.counts)

    @property
    def total(self):
        """D = number of half-edges."""
        return sum(d * c for d, c in self.counts.items())

    def degrees(self):
        """Per-vertex degrees, highest degree on the lowest ids."""
        out = [d for d, c in sorted(self.counts.items(), reverse=True) for _ in range(c)]
        return np.asarray(out, dtype=np.int64)

    def __str__(self):
        return ",".join(f"{d}:{c}" for d, c in self.counts.items())


_TOKEN = re.compile(r"^\s*(-?\d+)\s*:\s*(\S+)\s*$")


def _parse_pairs(text):
    pairs = []
    for tok in text.split(","):
        if not tok.strip():
            continue
        mt = _TOKEN.match(tok)
        if not mt:
            raise ValueError(f"malformed token {tok!r}; expected 'degree:value'")
        pairs.append((int(mt.group(1)), mt.group(2)))
    if not pairs:
        raise ValueError("empty degree specification")
    return pairs


def parse_degree_sequence(text):
    """Parse ``"3:12"`` or ``"1:4,2:2"`` into a DegreeSequence."""
    counts = {}
    for d, v in _parse_pairs(text):
        if d < 1:
            raise ValueError(f"degree must be >= 1, got {d}")
        try:
            c = int(v)
        except ValueError:
            raise ValueError(f"count {v!r} is not an integer") from None
        if c < 0:
            raise ValueError(f"negative count for degree {d}")
        counts[d] = counts.get(d, 0) + c
    return DegreeSequence(counts)


def parse_probabilities(text):
    """Parse ``"1:0.3,3:0.7"`` into a degree -> probability dict."""
    probs = {}
    for d, v in _parse_pairs(text):
        if d < 1:
            raise ValueError(f"degree must be >= 1, got {d}")
        try:
            p = float(v)
        except ValueError:
            raise ValueError(f"probability {v!r} is not a number") from None
        if not p >= 0:
            raise ValueError(f"probability for degree {d} must be >= 0")
        probs[d] = probs.get(d, 0.0) + p
    return probs


def sequence_from_probabilities(probs, n):
    """Round ``n * p_i`` to integer counts summing to n with an even degree sum.

    Largest-remainder rounding: floors first, then the leftover vertices go to
    the degrees with the largest fractional parts (ties to the smaller degree).
    If the degree sum comes out odd, one vertex moves between an odd and an
    even degree class (both with p > 0), choosing the move that least increases
    the total rounding error.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be positive")
    items = sorted((int(d), float(p)) for d, p in probs.items() if p > 0)
    if not items:
        raise ValueError("no positive probabilities")
    total = sum(p for _, p in items)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {total}, expected 1")
    raw = {d: p * n for d, p in items}
    counts = {d: int(np.floor(r)) for d, r in raw.items()}
    left = n - sum(counts.values())
    order = sorted(raw, key=lambda d: (-(raw[d] - counts[d]), d))
    for d in order[:left]:
        counts[d] += 1
    if sum(d * c for d, c in counts.items()) % 2:
        best = None
        for a in counts:
            if counts[a] == 0:
                continue
            for b in counts:
                if (a - b) % 2 == 0:
                    continue
                cost = abs(counts[a] - 1 - raw[a]) - abs(counts[a] - raw[a])
                cost += abs(counts[b] + 1 - raw[b]) - abs(counts[b] - raw[b])
                key = (cost, a, b)
                if best is None or key < best:
                    best = key
        if best is None:
            raise ValueError("odd degree sum")
        _, a, b = best
        counts[a] -= 1
        counts[b] += 1
    return DegreeSequence(counts)


# ---------------------------------------------------------------- multigraph


def _frozen(a, dtype=np.int64):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MultiGraph:
    """Immutable multigraph on ids ``0..n-1``.

    ``retained`` marks the vertices that belong to the graph; views such as the
    2-core keep host ids and simply mark the deleted vertices as not retained.
    """

    n: int
    edges: np.ndarray
    retained: np.ndarray = field(default=None)

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= self.n):
            raise ValueError("edge endpoint out of range")
        object.__setattr__(self, "edges", _frozen(e))
        if self.retained is None:
            r = np.ones(self.n, dtype=bool)
        else:
            r = np.asarray(self.retained, dtype=bool)
            if r.shape != (self.n,):
                raise ValueError("retained mask has wrong length")
            if e.size and not (r[e[:, 0]].all() and r[e[:, 1]].all()):
                raise ValueError("edge touches a vertex that is not retained")
        object.__setattr__(self, "retained", _frozen(r, bool))

    @property
    def m(self):
        return int(self.edges.shape[0])

    @cached_property
    def degree(self):
        deg = np.bincount(self.edges.ravel(), minlength=self.n)
        return _frozen(deg)

    @cached_property
    def vertices(self):
        return _frozen(np.flatnonzero(self.retained))

    @property
    def order(self):
        """Number of retained vertices."""
        return int(self.vertices.size)

    @cached_property
    def csr(self):
        """(indptr, neighbour, edge id) with one entry per half-edge."""
        e = self.edges
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        eid = np.concatenate([np.arange(self.m), np.arange(self.m)])
        order = np.lexsort((eid, src))
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=self.n), out=indptr[1:])
        return _frozen(indptr), _frozen(dst[order]), _frozen(eid[order])

    @cached_property
    def adjacency(self):
        """Neighbour lists (python lists, with multiplicity; a loop appears twice)."""
        indptr, nbr, _ = self.csr
        nbr = nbr.tolist()
        ip = indptr.tolist()
        return [nbr[ip[v]:ip[v + 1]] for v in range(self.n)]

    def neighbors(self, v):
        indptr, nbr, _ = self.csr
        return nbr[indptr[v]:indptr[v + 1]]

    def edge_multiset(self):
        """Sorted list of (min, max) endpoint pairs."""
        e = np.sort(self.edges, axis=1)
        return sorted(map(tuple, e.tolist()))

    def induced(self, vertices):
        """Subgraph induced by ``vertices``, keeping host ids."""
        mask = np.zeros(self.n, dtype=bool)
        mask[np.asarray(list(vertices) if not isinstance(vertices, np.ndarray) else vertices, dtype=np.int64)] = True
        mask &= self.retained
        e = self.edges
        keep = mask[e[:, 0]] & mask[e[:, 1]]
        return MultiGraph(self.n, e[keep], mask)

    def __repr__(self):
        return f"MultiGraph(n={self.n}, order={self.order}, m={self.m})"


def from_edges(n, edges, retained=None):
    return MultiGraph(int(n), np.asarray(list(edges), dtype=np.int64).reshape(-1, 2), retained)


# ---------------------------------------------------------------- sampling


def uniform_matching(total, rng):
    """Uniform perfect matching on ``total`` half-edges.

    Repeatedly pairs the lowest unmatched id with a uniformly chosen other
    unmatched id. Returns ``partner`` with ``partner[partner[h]] == h``.
    """
    if total % 2:
        raise ValueError("odd number of half-edges")
    rng = make_rng(rng)
    partner = [-1] * total
    pool = list(range(total))
    pos = list(range(total))
    size = total
    draws = rng.random(total // 2).tolist()
    k = 0
    for h in range(total):
        if partner[h] >= 0:
            continue
        # drop h from the pool
        size -= 1
        i, last = pos[h], pool[size]
        pool[i], pos[last] = last, i
        r = int(draws[k] * size)
        k += 1
        p = pool[r]
        size -= 1
        last = pool[size]
        pool[r], pos[last] = last, r
        partner[h], partner[p] = p, h
    return np.asarray(partner, dtype=np.int64)


def _owners(degrees):
    return np.repeat(np.arange(degrees.size, dtype=np.int64), degrees)


def _graph_from_matching(degrees, partner):
    owner = _owners(degrees)
    h = np.flatnonzero(np.arange(partner.size) < partner)
    return MultiGraph(int(degrees.size), np.stack([owner[h], owner[partner[h]]], axis=1))


def sample_configuration(seq, seed):
    """Configuration-model multigraph with degree sequence ``seq``."""
    degrees = seq.degrees()
    partner = uniform_matching(int(degrees.sum()), make_rng(seed))
    return _graph_from_matching(degrees, partner)


def is_simple(g):
    e = g.edges
    if np.any(e[:, 0] == e[:, 1]):
        return False
    s = np.sort(e, axis=1)
    return np.unique(s, axis=0).shape[0] == s.shape[0]


def sample_simple(seq, seed, max_retries=1000):
    """Uniform simple graph with degree sequence ``seq`` by rejection."""
    rng = make_rng(seed)
    for _ in range(max(1, int(max_retries))):
        g = sample_configuration(seq, rng)
        if is_simple(g):
            return g
    raise RuntimeError(f"rejection budget exceeded after {max_retries} attempts")


# ---------------------------------------------------------------- structure


def component_labels(g):
    """Component index per vertex (lowest vertex id first); -1 if not retained."""
    e = g.edges
    a = coo_matrix((np.ones(g.m), (e[:, 0], e[:, 1])), shape=(g.n, g.n))
    _, raw = _cc(a, directed=False)
    raw = np.where(g.retained, raw, -1)
    vs = g.vertices
    # relabel so that components are numbered by their smallest vertex
    _, first = np.unique(raw[vs], return_index=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first)] = np.arange(first.size)
    out = np.full(g.n, -1, dtype=np.int64)
    uniq = np.unique(raw[vs])
    out[vs] = rank[np.searchsorted(uniq, raw[vs])]
    return out


def connected_components(g):
    lab = component_labels(g)
    return VertexPartition.from_labels(lab, g.vertices)


def two_core(g):
    """Maximal subgraph of minimum degree >= 2, as a view on the host ids."""
    deg = g.degree.tolist()
    alive = g.retained.copy()
    adj = g.adjacency
    queue = deque(v for v in g.vertices.tolist() if deg[v] < 2)
    queued = np.zeros(g.n, dtype=bool)
    queued[list(queue)] = True
    while queue:
        v = queue.popleft()
        alive[v] = False
        for w in adj[v]:
            if w == v or not alive[w]:
                continue
            deg[w] -= 1
            if deg[w] < 2 and not queued[w]:
                queued[w] = True
                queue.append(w)
    e = g.edges
    keep = alive[e[:, 0]] & alive[e[:, 1]]
    return MultiGraph(g.n, e[keep], alive)


def smooth_degree_two(g):
    """Suppress every degree-2 vertex of a graph with minimum degree >= 2.

    A degree-2 vertex with neighbours a, b is replaced by an edge ab (which may
    be a loop or a parallel edge). A vertex left with a single loop and nothing
    else is deleted.
    """
    deg = g.degree
    vs = g.vertices
    if vs.size and deg[vs].min() < 2:
        raise ValueError("smoothing requires minimum degree >= 2")
    ends = {i: (int(u), int(v)) for i, (u, v) in enumerate(g.edges.tolist())}
    inc = {int(v): set() for v in vs}
    for i, (u, v) in ends.items():
        inc[u].add(i)
        inc[v].add(i)
    alive = g.retained.copy()
    next_id = len(ends)
    work = [int(v) for v in vs if deg[v] == 2]
    for v in work:
        es = inc[v]
        if len(es) == 1:
            # a lone loop: the whole component has shrunk to this vertex
            (i,) = es
            del ends[i]
            del inc[v]
            alive[v] = False
            continue
        i, j = sorted(es)
        a = ends[i][0] if ends[i][1] == v else ends[i][1]
        b = ends[j][0] if ends[j][1] == v else ends[j][1]
        for k in (i, j):
            u, w = ends.pop(k)
            inc[u].discard(k)
            inc[w].discard(k)
        del inc[v]
        alive[v] = False
        ends[next_id] = (a, b)
        inc[a].add(next_id)
        inc[b].add(next_id)
        next_id += 1
    edges = [ends[k] for k in sorted(ends)]
    return MultiGraph(g.n, np.asarray(edges, dtype=np.int64).reshape(-1, 2), alive)


def bfs_tree_edges(g, root, allowed=None):
    """BFS spanning tree of the component of ``root``.

    Returns (order, parent) where ``order`` lists the reached vertices in BFS
    order and ``parent[v]`` is the BFS parent (-1 for the root). Neighbours are
    scanned in increasing id order. ``allowed`` optionally restricts the search
    to a boolean vertex mask.
    """
    adj = g.adjacency
    parent = {root: -1}
    order = [root]
    i = 0
    while i < len(order):
        u = order[i]
        i += 1
        for w in sorted(set(adj[u])):
            if w in parent or (allowed is not None and not allowed[w]):
                continue
            parent[w] = u
            order.append(w)
    return order, parent


# ---------------------------------------------------------------- text io


def write_edge_list(g, path):
    with open(path, "w", newline="\n") as fh:
        fh.write(f"#n {g.n}\n")
        for u, v in g.edges.tolist():
            fh.write(f"{u} {v}\n")


def read_edge_list(path):
    n = None
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                parts = s[1:].split()
                if len(parts) == 2 and parts[0] == "n":
                    n = int(parts[1])
                continue
            parts = s.split()
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected 'u v'")
            edges.append((int(parts[0]), int(parts[1])))
    if n is None:
        n = 1 + max((max(e) for e in edges), default=-1)
    return from_edges(n, edges)
