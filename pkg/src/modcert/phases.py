"""Phased exploration of a random cubic configuration graph, revealed lazily.

Half-edge ``3v + j`` (j = 0, 1, 2) belongs to vertex v. A half-edge is paired
only when it is tested, with a partner drawn uniformly from all unpaired
half-edges, so the final pairing is a uniform perfect matching. Counters are
recorded along the way and compared with the fluid limits in ``lower``.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np

from . import lower
from .graph import MultiGraph, component_labels, make_rng
from .modularity import modularity, relative_modularity, split_components
from .partition import VertexPartition

FRESH, C0, CHERRY, DEG1, CHAIN, WCENTRE, PICKED, CLOSED = range(8)
C1_LABELS = (C0, CHERRY)
C2_LABELS = (C0, CHERRY, CHAIN)
C3_LABELS = (C0, CHERRY, CHAIN, WCENTRE, PICKED)
COUNTERS = ("X0", "X1", "X23", "A", "H", "Z0", "Z1", "W0", "W1", "W2", "W3")
TRAJECTORY_COLUMNS = ("step",) + COUNTERS


class _Pool:
    """Set of half-edge ids with O(1) insert, delete and uniform pick."""

    __slots__ = ("items", "pos")

    def __init__(self, size, items=()):
        self.items = []
        self.pos = [-1] * size
        for h in items:
            self.add(h)

    def __len__(self):
        return len(self.items)

    def add(self, h):
        self.pos[h] = len(self.items)
        self.items.append(h)

    def remove(self, h):
        i = self.pos[h]
        if i < 0:
            raise KeyError(h)
        last = self.items.pop()
        if last != h:
            self.items[i] = last
            self.pos[last] = i
        self.pos[h] = -1

    def pop_at(self, i):
        h = self.items[i]
        self.remove(h)
        return h

    def pop_last(self):
        h = self.items.pop()
        self.pos[h] = -1
        return h

    def __contains__(self, h):
        return self.pos[h] >= 0


class ExplorationState:
    """Mutable state of one exploration run on n cubic vertices."""

    def __init__(self, n, eps, seed):
        if n < 2 or (3 * n) % 2:
            raise ValueError("n must be even and at least 2")
        if not 0 < eps < 0.9:
            raise ValueError("eps must lie in (0, 0.9)")
        self.n = n
        self.eps = eps
        self.rng = make_rng(seed)
        self.partner = [-1] * (3 * n)
        self.label = bytearray(n)
        self.pool = _Pool(3 * n, range(3 * n))
        self.stride = max(1, math.ceil(n / 1000))
        self.counts = dict.fromkeys(COUNTERS, 0)
        self.counts["X0"] = n
        self.records = []
        self.terminal = {}
        self.step = 0
        self.phase = -1
        self._buf = []
        self._bi = 0
        self.reserved = []
        self.flags = {}

    # -------------------------------------------------------------- helpers

    def uniform(self):
        if self._bi >= len(self._buf):
            self._buf = self.rng.random(4096).tolist()
            self._bi = 0
        u = self._buf[self._bi]
        self._bi += 1
        return u

    def pick(self, pool):
        return pool.items[int(self.uniform() * len(pool.items))]

    def pair(self, h, p):
        self.partner[h] = p
        self.partner[p] = h

    def snapshot(self, local):
        row = {"step": self.step, "phase": self.phase, "t": local / self.n}
        for k in COUNTERS:
            row[k] = self.counts[k]
        self.records.append(row)

    def members(self, labels):
        lab = np.frombuffer(bytes(self.label), dtype=np.uint8)
        return np.flatnonzero(np.isin(lab, labels))

    def free_halves(self, v):
        return [h for h in range(3 * v, 3 * v + 3) if self.partner[h] < 0 and h in self.pool]

    # -------------------------------------------------------------- phase 0

    def run_phase0(self):
        n, c = self.n, self.counts
        self.phase = 0
        target = max(1, math.ceil(self.eps * n - 1e-9))
        pool, label = self.pool, self.label
        h_pool = _Pool(3 * n)
        self.h_pool = h_pool
        explored = 0
        local = 0
        edges = 0

        def add_vertex(v, skip=-1):
            label[v] = C0
            for h in range(3 * v, 3 * v + 3):
                if h != skip:
                    h_pool.add(h)

        add_vertex(int(self.uniform() * n))
        explored = 1
        c["X0"] = n - 1
        c["H"] = 3
        self.snapshot(0)
        while explored < target:
            if not h_pool.items:
                # the component is exhausted: restart from a fresh vertex
                while True:
                    v = int(self.uniform() * n)
                    if label[v] == FRESH:
                        break
                add_vertex(v)
                explored += 1
                c["X0"] -= 1
                c["H"] = len(h_pool)
                continue
            h = h_pool.pop_last()
            pool.remove(h)
            p = self.pick(pool)
            pool.remove(p)
            self.pair(h, p)
            edges += 1
            local += 1
            self.step += 1
            v = p // 3
            if label[v] == FRESH:
                add_vertex(v, skip=p)
                explored += 1
                c["X0"] -= 1
            else:
                h_pool.remove(p)
            c["H"] = len(h_pool)
            if local % self.stride == 0:
                self.snapshot(local)
        self.snapshot(local)
        self.terminal.update(c0_vertices=explored, c0_edges=edges, t0=edges / n)
        return self.records

    # -------------------------------------------------------------- phase 1

    def run_phase1(self):
        n, c = self.n, self.counts
        self.phase = 1
        pool, label, h_pool = self.pool, self.label, self.h_pool
        partner = self.partner
        local = 0
        self.snapshot(0)
        while h_pool.items:
            h = h_pool.pop_last()
            pool.remove(h)
            p = self.pick(pool)
            pool.remove(p)
            self.pair(h, p)
            v = p // 3
            lab = label[v]
            if lab == FRESH:
                label[v] = DEG1
                c["X0"] -= 1
                c["X1"] += 1
            elif lab == DEG1:
                label[v] = CHERRY
                c["X1"] -= 1
                c["X23"] += 1
                for f in range(3 * v, 3 * v + 3):
                    if partner[f] < 0:
                        h_pool.add(f)
            else:
                h_pool.remove(p)
                c["A"] += 1
            c["H"] = len(h_pool)
            local += 1
            self.step += 1
            if local % self.stride == 0:
                self.snapshot(local)
        self.snapshot(local)
        self.terminal.update(t1=local / n, X0=c["X0"], X1=c["X1"], X23=c["X23"], A=c["A"], H=c["H"])
        return self.records

    # -------------------------------------------------------------- phase 2

    def run_phase2(self):
        n, c = self.n, self.counts
        self.phase = 2
        pool, label, partner = self.pool, self.label, self.partner
        deg1 = self.members([DEG1]).tolist()
        x1_pool = _Pool(3 * n)
        for v in deg1:
            for h in range(3 * v, 3 * v + 3):
                if partner[h] < 0:
                    x1_pool.add(h)
        if len(x1_pool) != 2 * len(deg1):
            raise RuntimeError("degree-one vertices must carry two free half-edges")
        outside = 3 * c["X0"]
        touched = set()
        local = 0
        self.snapshot(0)
        while x1_pool.items:
            h = x1_pool.pop_last()
            pool.remove(h)
            total = outside + len(x1_pool)
            r = int(self.uniform() * total)
            if r < outside:
                # partner lies at a fresh vertex; which one is decided later
                outside -= 1
                self.reserved.append(h)
                c["Z0"] += 1
            else:
                p = x1_pool.items[r - outside]
                x1_pool.remove(p)
                pool.remove(p)
                self.pair(h, p)
                touched.add(h // 3)
                touched.add(p // 3)
                c["Z1"] += 1
            local += 1
            self.step += 1
            if local % self.stride == 0:
                self.snapshot(local)
        self.snapshot(local)
        for v in touched:
            label[v] = CHAIN
        self.terminal.update(t2=local / n, Z0=c["Z0"], Z1=c["Z1"], chain_vertices=len(touched))
        return self.records

    # -------------------------------------------------------------- phase 3

    def run_phase3(self):
        n, c = self.n, self.counts
        self.phase = 3
        pool, label, partner = self.pool, self.label, self.partner
        free_out = [h for h in self.reserved if label[h // 3] == DEG1]
        fresh = self.members([FRESH])
        c["W0"] = int(fresh.size)
        self.terminal["fresh_at_phase3"] = int(fresh.size)
        hits = {}
        picked = []
        local = 0
        self.snapshot(0)
        for _ in range(len(free_out)):
            q = self.pick(pool)
            pool.remove(q)
            picked.append(q)
            v = q // 3
            k = hits.get(v, 0)
            hits[v] = k + 1
            c[f"W{k}"] -= 1
            c[f"W{k + 1}"] += 1
            local += 1
            self.step += 1
            if local % self.stride == 0:
                self.snapshot(local)
        self.snapshot(local)
        # second stage: match the chosen half-edges back to the degree-one vertices
        perm = self.rng.permutation(len(picked)).tolist()
        for h, j in zip(free_out, perm):
            self.pair(h, picked[j])
        centres = [v for v, k in hits.items() if k >= 2]
        added = set()
        for v in centres:
            label[v] = WCENTRE
        for v in centres:
            for f in range(3 * v, 3 * v + 3):
                p = partner[f]
                if p >= 0 and label[p // 3] == DEG1:
                    label[p // 3] = PICKED
                    added.add(p // 3)
        self.reserved = [h for h in self.reserved if label[h // 3] == CHAIN]
        c3 = self.members(C3_LABELS)
        in3 = np.zeros(n, dtype=bool)
        in3[c3] = True
        e3 = 0
        for h in range(3 * n):
            p = partner[h]
            if h < p and in3[h // 3] and in3[p // 3]:
                e3 += 1
        self.terminal.update(t3=local / n, W0=c["W0"], W1=c["W1"], W2=c["W2"], W3=c["W3"],
                             phase3_vertices=len(added), v3=int(c3.size), e3_revealed=e3)
        return self.records

    # -------------------------------------------------------------- completion

    def complete(self):
        """Pair every remaining half-edge uniformly; return the full graph."""
        pool = self.pool
        for h in self.reserved:
            q = self.pick(pool)
            pool.remove(q)
            self.pair(h, q)
        self.reserved = []
        rest = np.asarray(pool.items, dtype=np.int64)
        rest = rest[self.rng.permutation(rest.size)]
        for a, b in zip(rest[0::2].tolist(), rest[1::2].tolist()):
            self.pair(a, b)
        for h in list(pool.items):
            pool.remove(h)
        return self.graph()

    def graph(self):
        partner = np.asarray(self.partner, dtype=np.int64)
        if np.any(partner < 0):
            raise RuntimeError("pairing is incomplete")
        h = np.flatnonzero(np.arange(partner.size) < partner)
        return MultiGraph(self.n, np.stack([h // 3, partner[h] // 3], axis=1))

    # -------------------------------------------------------------- closure

    def close_cherries(self):
        """Absorb outside vertices with two or more edges into the component.

        Works on the completed graph. Absorption stops once the component has
        more than n/3 - 1 vertices (flagged if candidates remain).
        """
        n, label, partner = self.n, self.label, self.partner
        lab = np.frombuffer(bytes(label), dtype=np.uint8)
        inside = np.isin(lab, C3_LABELS).tolist()
        size = sum(inside)
        base = size
        cnt = [0] * n
        for h in range(3 * n):
            v, w = h // 3, partner[h] // 3
            if not inside[v] and inside[w]:
                cnt[v] += 1
        cut = sum(cnt)
        queue = deque(v for v in range(n) if not inside[v] and cnt[v] >= 2)
        steps = []
        hit_guard = False
        while queue:
            v = queue.popleft()
            if inside[v] or cnt[v] < 2:
                continue
            if size > n / 3 - 1:
                hit_guard = True
                break
            inside[v] = True
            label[v] = CLOSED
            size += 1
            out = 0
            for h in range(3 * v, 3 * v + 3):
                w = partner[h] // 3
                if not inside[w]:
                    out += 1
                    cnt[w] += 1
                    if cnt[w] >= 2:
                        queue.append(w)
            new_cut = cut - cnt[v] + out
            if new_cut >= cut:
                raise RuntimeError("absorbing a cherry did not reduce the cut")
            steps.append(cut - new_cut)
            cut = new_cut
        self.flags["closure_guard_hit"] = hit_guard
        self.terminal.update(cbar3=size, closure_steps=len(steps), closure_cut=cut,
                             closure_cut_drops=steps, cbar3_within_4x=size <= 4 * base)
        return self.members(C3_LABELS + (CLOSED,))


# ---------------------------------------------------------------- scoring


def assemble_and_score(g, cbar3):
    """Partition {cbar3} + tree-partitioned components of the rest; returns (partition, q)."""
    n = g.n
    inside = np.zeros(n, dtype=bool)
    inside[np.asarray(cbar3, dtype=np.int64)] = True
    rest = g.induced(np.flatnonzero(~inside))
    blocks = [np.flatnonzero(inside).tolist()]
    if rest.order:
        lab = component_labels(rest)
        comps = VertexPartition.from_labels(lab, rest.vertices).blocks
        blocks.extend(split_components(g, comps, n, 3))
    part = VertexPartition(blocks)
    return part, modularity(g, part)


# ---------------------------------------------------------------- predictions


def predicted(sched, phase, t):
    """Fluid-limit counters (fractions of n) for a phase at local time t."""
    if phase == 0:
        x = float(lower.x_phase0(t))
        return {"X0": 1.0 - x, "H": 3.0 * x - 2.0 * t}
    if phase == 1:
        x0, x1, x2, a, h = (float(v) for v in lower.phase1_at(sched.eps, t))
        return {"X0": x0, "X1": x1, "X23": x2, "A": a, "H": h}
    if phase == 2:
        z0 = float(lower.z0_at(sched.eps, t))
        return {"Z0": z0, "Z1": t - z0}
    if phase == 3:
        w = lower.w_at(sched.x0_t1, t)
        return {f"W{i}": float(w[i]) for i in range(4)}
    raise ValueError(phase)


def _ode_defined(sched, phase, t):
    if phase == 0:
        return t < 1.5
    if phase == 1:
        return 1.0 - 2.0 * t / (3.0 - 2.0 * sched.t0) >= 0
    if phase == 2:
        return 1.0 - 2.0 * t / (3.0 - 2.0 * sched.t0 - 2.0 * sched.t1) >= 0
    return 3.0 * sched.x0_t1 - t >= 0


def trajectory_deviation(records, n, sched):
    """Max over records of |Y/n - y(t)| per counter (phase-tagged)."""
    dev = {}
    for r in records:
        ph, t = r["phase"], r["t"]
        if not _ode_defined(sched, ph, t):
            continue
        for k, y in predicted(sched, ph, t).items():
            key = f"phase{ph}.{k}"
            dev[key] = max(dev.get(key, 0.0), abs(r[k] / n - y))
    return dev


def terminal_comparison(state, sched):
    """(measured, predicted) pairs of terminal fractions."""
    n = state.n
    t = state.terminal
    pairs = {
        "t0": (t["t0"], sched.t0),
        "t1": (t["t1"], sched.t1),
        "X0": (t["X0"] / n, sched.x0_t1),
        "X1": (t["X1"] / n, sched.x1_t1),
        "X23": (t["X23"] / n, sched.x2_t1),
        "A": (t["A"] / n, sched.a_t1),
        "t2": (t["t2"], sched.t2),
        "Z0": (t["Z0"] / n, sched.z0_t2),
        "Z1": (t["Z1"] / n, sched.z1_t2),
        "chain_vertices": (t["chain_vertices"] / n, sched.chain_vertices),
        "t3": (t["t3"], sched.t3),
        "W0": (t["W0"] / n, sched.w0_t3),
        "W1": (t["W1"] / n, sched.w1_t3),
        "W2": (t["W2"] / n, sched.w2_t3),
        "W3": (t["W3"] / n, sched.w3_t3),
        "phase3_vertices": (t["phase3_vertices"] / n, sched.phase3_vertices),
        "v3": (t["v3"] / n, sched.v3),
        "e3": (t["e3_revealed"] / n, sched.e3),
    }
    return {k: (float(a), float(b)) for k, (a, b) in pairs.items()}


def explore(n, eps, seed):
    """Phases 0-3 followed by uniform completion; returns (state, graph)."""
    st = ExplorationState(n, eps, seed)
    st.run_phase0()
    st.run_phase1()
    st.run_phase2()
    st.run_phase3()
    g = st.complete()
    return st, g


def run_trial(n, eps, seed, keep_records=True):
    """One full run: phases, completion, closure, assembly. Returns a summary dict."""
    st, g = explore(n, eps, seed)
    sched = lower.schedule_of(eps)
    c3 = st.members(C3_LABELS)
    qr_c3 = relative_modularity(g, c3)
    cbar3 = st.close_cherries()
    qr_cbar3 = relative_modularity(g, cbar3)
    part, q = assemble_and_score(g, cbar3)
    lo, hi = int(math.isqrt(n)), 3 * math.ceil(math.sqrt(n))
    sizes = part.sizes
    big = [s for s in sizes if s != len(cbar3)]
    out_of_window = sum(1 for s in big if not lo <= s <= hi)
    summary = {
        "n": n,
        "eps": eps,
        "seed": int(seed) if not isinstance(seed, np.random.Generator) else None,
        "terminal": terminal_comparison(st, sched),
        "deviation": trajectory_deviation(st.records, n, sched),
        "c3_size": int(c3.size),
        "cbar3_size": int(len(cbar3)),
        "qr_c3": float(qr_c3),
        "qr_cbar3": float(qr_cbar3),
        "q": float(q),
        "blocks": len(part),
        "blocks_out_of_window": out_of_window,
        "closure_guard_hit": st.flags.get("closure_guard_hit", False),
        "cbar3_within_4x": st.terminal["cbar3_within_4x"],
    }
    if keep_records:
        summary["records"] = st.records
    return summary


def trajectory_rows(records, n, eps=None):
    """Records as CSV rows (fractions of n), with fluid-limit columns when eps is given."""
    sched = lower.schedule_of(eps) if eps is not None else None
    rows = []
    for r in records:
        row = {"step": r["step"]}
        for k in COUNTERS:
            row[k] = r[k] / n
        if sched is not None:
            pred = predicted(sched, r["phase"], r["t"]) if _ode_defined(sched, r["phase"], r["t"]) else {}
            for k in COUNTERS:
                row[f"{k}_ode"] = pred.get(k, float("nan"))
        rows.append(row)
    return rows


# ---------------------------------------------------------------- urns


def simulate_urns(a_count, b_count, seed):
    """Throw 2*b_count balls into a_count two-slot urns, each throw uniform over free slots.

    Uniform choice among free slots, repeated, picks a uniformly random set of
    slots, which is how it is sampled. Returns the number of occupied urns.
    """
    a_count, balls = int(a_count), int(2 * b_count)
    if a_count < 0 or balls < 0:
        raise ValueError("counts must be nonnegative")
    if balls > 2 * a_count:
        raise ValueError("more balls than slots")
    rng = make_rng(seed)
    slots = rng.choice(2 * a_count, size=balls, replace=False)
    return int(np.unique(slots // 2).size)
