"""General degree sequences: regime criterion, subcritical constant, supercritical construction."""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .graph import (component_labels, make_rng, sample_configuration, sequence_from_probabilities,
                    two_core)
from .modularity import modularity, split_components
from .partition import VertexPartition

CRITICAL_TOL = 1e-12


@dataclass(frozen=True)
class DegreeProfile:
    """Limiting degree distribution p_i (no degree-0 vertices)."""

    probs: dict

    def __post_init__(self):
        clean = {}
        for d, p in self.probs.items():
            d, p = int(d), float(p)
            if d < 1:
                raise ValueError(f"degree must be >= 1, got {d}")
            if not p >= 0:
                raise ValueError(f"negative probability for degree {d}")
            if p > 0:
                clean[d] = clean.get(d, 0.0) + p
        total = sum(clean.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total}, expected 1")
        object.__setattr__(self, "probs", dict(sorted(clean.items())))

    @property
    def max_degree(self):
        return max(self.probs)

    @property
    def M(self):
        return sum(i * p for i, p in self.probs.items())

    @property
    def Q(self):
        return sum(i * (i - 2) * p for i, p in self.probs.items())

    def sequence(self, n):
        return sequence_from_probabilities(self.probs, n)

    def __str__(self):
        return ",".join(f"{d}:{p:g}" for d, p in self.probs.items())


def criterion(profile):
    """(Q, M, regime) with regime in {'sub', 'critical', 'super'}."""
    q, m = profile.Q, profile.M
    if abs(q) <= CRITICAL_TOL:
        regime = "critical"
    else:
        regime = "sub" if q < 0 else "super"
    return q, m, regime


# ---------------------------------------------------------------- subcritical


def _high_degree_counts(budget, degrees):
    """Tuples (t_i for i in degrees) with sum (i-1) t_i <= budget, in colex order."""
    if not degrees:
        yield ()
        return
    i = degrees[-1]
    for ti in range(budget // (i - 1) + 1):
        for rest in _high_degree_counts(budget - (i - 1) * ti, degrees[:-1]):
            yield rest + (ti,)


def tree_sequences(t, max_degree):
    """All (t_1, ..., t_max_degree) with t_1 = 2 + sum (i-2) t_i and sum t_i = t."""
    if t < 2:
        return
    high = list(range(3, max_degree + 1))
    for hc in _high_degree_counts(t - 2, high):
        used = sum((i - 1) * c for i, c in zip(high, hc))
        t2 = t - 2 - used
        t1 = 2 + sum((i - 2) * c for i, c in zip(high, hc))
        seq = (t1, t2) + hc
        yield seq[:max_degree] if max_degree >= 2 else (t1,)


def _level_sum(t, weights, log_w, exact):
    """Sum over tree sequences of size t of multinomial * prod w_i^t_i."""
    delta = len(weights)
    terms = []
    for seq in tree_sequences(t, delta):
        if delta == 1 and t != 2:
            continue
        if any(c and weights[i] == 0 for i, c in enumerate(seq)):
            continue
        if exact:
            coef = math.factorial(t)
            for c in seq:
                coef //= math.factorial(c)
            val = float(coef)
            for c, w in zip(seq, weights):
                if c:
                    val *= w ** c
        else:
            lg = math.lgamma(t + 1) - sum(math.lgamma(c + 1) for c in seq)
            lg += sum(c * lw for c, lw in zip(seq, log_w) if c)
            val = math.exp(lg)
        terms.append(val)
    return math.fsum(terms)


def subcritical_rate(profile):
    m = profile.M
    rates = [i * p / (24.0 * m) for i, p in profile.probs.items() if i != 2 and p > 0]
    return min(rates)


def subcritical_constant(profile, t_max=400):
    """(c, tail_bound) with c = 4 sum_{t>=2} sum_seq ((t-1)/t) multinomial prod (i p_i / M)^t_i."""
    q, m, regime = criterion(profile)
    if regime != "sub":
        raise ValueError(f"profile is not subcritical (Q = {q})")
    if t_max < 2:
        raise ValueError("t_max must be >= 2")
    delta = profile.max_degree
    weights = [i * profile.probs.get(i, 0.0) / m for i in range(1, delta + 1)]
    log_w = [math.log(w) if w > 0 else -math.inf for w in weights]
    levels = [(t - 1) / t * _level_sum(t, weights, log_w, exact=t <= 30) for t in range(2, t_max + 1)]
    c = 4.0 * math.fsum(levels)
    r = subcritical_rate(profile)
    tail = 4.0 * delta * math.exp(-r * (t_max + 1)) / -math.expm1(-r)
    return c, tail


def delta2_closed_form(p1):
    """c for profiles supported on degrees 1 and 2."""
    return 2.0 * (4.0 - 3.0 * p1) / p1


def component_volume_squares(g):
    """Sum over components of vol(C)^2, as an exact integer."""
    lab = component_labels(g)
    vs = g.vertices
    vol = np.bincount(lab[vs], weights=g.degree[vs]).astype(np.int64)
    return int(np.sum(vol * vol))


def component_modularity(g):
    """Modularity of the partition into connected components."""
    m = g.m
    return 1.0 - component_volume_squares(g) / (4.0 * m * m)


def _empirical_trial(args):
    probs, n, seed = args
    profile = DegreeProfile(probs)
    g = sample_configuration(profile.sequence(n), np.random.default_rng(seed))
    # 1 - q = sum vol^2 / 4m^2; evaluated directly to avoid cancellation
    m = g.m
    return profile.M * n * component_volume_squares(g) / (4 * m * m)


def trial_seeds(seed, trials):
    return [int(s.generate_state(1, np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(trials)]


def subcritical_empirical(profile, n, trials, seed, jobs=1, return_trials=False):
    """Mean of M n (1 - q(components)) over independent samples."""
    q = profile.Q
    if q >= 0:
        raise ValueError(f"profile is not subcritical (Q = {q})")
    work = [(profile.probs, n, s) for s in trial_seeds(seed, trials)]
    if jobs > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            vals = list(ex.map(_empirical_trial, work))
    else:
        vals = [_empirical_trial(w) for w in work]
    mean = float(np.mean(vals))
    return (mean, vals) if return_trials else mean


# ---------------------------------------------------------------- supercritical


def _twins(g):
    """Position of the other half of each adjacency entry."""
    _, _, eid = g.csr
    order = np.argsort(eid, kind="stable")
    twin = np.empty(eid.size, dtype=np.int64)
    twin[order[0::2]] = order[1::2]
    twin[order[1::2]] = order[0::2]
    return twin


@dataclass
class SSet:
    vertices: list
    boundary: list

    def __len__(self):
        return len(self.vertices)


def build_s_set(core, eps_prime, seed, n=None):
    """Grow S from a degree-biased start by testing open half-edges of S.

    Stops when ceil(eps_prime * n) vertices are explored (n defaults to the
    host size). ``boundary`` lists, in exploration order, the S vertices that
    still have an untested half-edge.
    """
    n = core.n if n is None else n
    target = max(1, int(math.ceil(eps_prime * n - 1e-9)))
    vs = core.vertices
    if vs.size and core.degree[vs].min() < 2:
        raise ValueError("build_s_set needs a graph of minimum degree 2")
    if target > vs.size:
        raise ValueError(f"core has {vs.size} vertices, fewer than eps' n = {target}")
    rng = make_rng(seed)
    deg = core.degree[vs].astype(float)
    start = int(rng.choice(vs, p=deg / deg.sum()))
    indptr, nbr, _ = core.csr
    ip = indptr.tolist()
    nb = nbr.tolist()
    twin = _twins(core).tolist()
    in_s = np.zeros(core.n, dtype=bool)
    order = []
    open_list = []
    pos = {}

    def add_open(j):
        pos[j] = len(open_list)
        open_list.append(j)

    def drop_open(j):
        i = pos.pop(j)
        last = open_list.pop()
        if last != j:
            open_list[i] = last
            pos[last] = i

    def explore(v, skip=-1):
        in_s[v] = True
        order.append(v)
        for j in range(ip[v], ip[v + 1]):
            if j != skip:
                add_open(j)

    explore(start)
    while len(order) < target:
        if not open_list:
            raise ValueError("exploration ran out of half-edges before reaching eps' n")
        j = open_list[int(rng.integers(len(open_list)))]
        drop_open(j)
        w = nb[j]
        tj = twin[j]
        if in_s[w]:
            drop_open(tj)
        else:
            explore(w, skip=tj)
    owners = {}
    for j in open_list:
        v = int(np.searchsorted(indptr, j, side="right") - 1)
        owners[v] = True
    boundary = [v for v in order if v in owners]
    return SSet(order, boundary)


@dataclass
class ChainAbsorption:
    vertices: list
    chains: list

    def __len__(self):
        return len(self.vertices)


def absorb_chains(core, s_set, ell):
    """Absorb S-chains found inside the ell/2-neighbourhoods of the S boundary.

    Edges revealed while scanning are remembered; whenever the revealed part
    outside S contains a path between two S vertices (an S-chain), its
    interior joins S and the scan continues with the enlarged S.
    """
    if ell < 2 or ell % 2:
        raise ValueError("ell must be even and >= 2")
    if isinstance(s_set, SSet):
        start, boundary = list(s_set.vertices), list(s_set.boundary)
    else:
        start = sorted(int(v) for v in s_set)
        boundary = start
    in_s = np.zeros(core.n, dtype=bool)
    in_s[start] = True
    adj = core.adjacency
    _, _, eid = core.csr
    indptr = core.csr[0].tolist()
    eid = eid.tolist()
    revealed = set()
    radj = {}
    att = {}
    chains = []
    members = list(start)

    def component(x):
        seen = {x}
        q = [x]
        i = 0
        while i < len(q):
            u = q[i]
            i += 1
            for w in radj.get(u, ()):
                if not in_s[w] and w not in seen:
                    seen.add(w)
                    q.append(w)
        return q

    def path_between(a, b):
        if a == b:
            return [a]
        par = {a: None}
        q = deque([a])
        while q:
            u = q.popleft()
            for w in radj.get(u, ()):
                if in_s[w] or w in par:
                    continue
                par[w] = u
                if w == b:
                    out = [b]
                    while par[out[-1]] is not None:
                        out.append(par[out[-1]])
                    return out[::-1]
                q.append(w)
        raise RuntimeError("attachment points are not connected")

    def settle(x):
        work = [x]
        while work:
            y = work.pop()
            if in_s[y]:
                continue
            comp = component(y)
            hooks = [(v, a) for v in comp for a in att.get(v, ()) if in_s[a]]
            if len(hooks) < 2:
                continue
            (v1, a1), (v2, a2) = hooks[0], hooks[1]
            inner = path_between(v1, v2)
            for p in inner:
                in_s[p] = True
                members.append(p)
            chains.append((a1, *inner, a2))
            for p in inner:
                for w in radj.get(p, ()):
                    if not in_s[w]:
                        att.setdefault(w, []).append(p)
                        work.append(w)

    def reveal(u, w, e):
        if e in revealed:
            return
        revealed.add(e)
        if in_s[u] and in_s[w]:
            return
        if in_s[u] or in_s[w]:
            x, a = (w, u) if in_s[u] else (u, w)
            att.setdefault(x, []).append(a)
            settle(x)
            return
        radj.setdefault(u, []).append(w)
        if u != w:
            radj.setdefault(w, []).append(u)
        settle(u)

    half = ell // 2
    for s in boundary:
        seen = {s}
        frontier = [s]
        for _ in range(half):
            nxt = []
            for u in frontier:
                if u != s and in_s[u]:
                    continue
                base = indptr[u]
                for k, w in enumerate(adj[u]):
                    reveal(u, w, eid[base + k])
                    if not in_s[w] and w not in seen:
                        seen.add(w)
                        nxt.append(w)
            frontier = nxt
    return ChainAbsorption(sorted(members), chains)


def pull_back_trees(host, core_mask, aprime):
    """Add the pendant trees that the 2-core removed from vertices of ``aprime``."""
    core_mask = np.asarray(core_mask, dtype=bool)
    seeds = sorted(int(v) for v in aprime)
    inside = np.zeros(host.n, dtype=bool)
    inside[seeds] = True
    adj = host.adjacency
    q = deque(seeds)
    while q:
        u = q.popleft()
        for w in adj[u]:
            if not inside[w] and not core_mask[w] and host.retained[w]:
                inside[w] = True
                q.append(w)
    return np.flatnonzero(inside).tolist()


@dataclass
class SupercriticalRun:
    eps_prime: float
    ell: int
    n: int
    seed: int
    s_size: int
    aprime_size: int
    amax_size: int
    amax_edges: int
    chains_absorbed: int
    density_margin: float
    giant_size: int
    core_size: int
    components: int
    complement_components: int
    blocks: int
    q_achieved: float
    baseline: float
    aprime_cap: float

    def as_dict(self):
        return asdict(self)

    @property
    def margin(self):
        return self.q_achieved - self.baseline


def supercritical_pipeline(profile, n, eps_prime, ell, seed, return_partition=False):
    q, _, regime = criterion(profile)
    if regime != "super":
        raise ValueError(f"profile is not supercritical (Q = {q})")
    rng = make_rng(seed)
    g = sample_configuration(profile.sequence(n), rng)
    lab = component_labels(g)
    sizes = np.bincount(lab[g.vertices])
    giant_id = int(np.argmax(sizes))
    giant = np.flatnonzero(lab == giant_id)
    target = int(math.ceil(eps_prime * n - 1e-9))
    if giant.size < target:
        raise ValueError("eps' too large: giant component has fewer than eps' n vertices")
    core_all = two_core(g)
    core = core_all.induced(giant)
    if core.order < target:
        raise ValueError("eps' too large: 2-core of the giant has fewer than eps' n vertices")
    s_set = build_s_set(core, eps_prime, rng, n)
    absorbed = absorb_chains(core, s_set, ell)
    amax = pull_back_trees(g, core.retained, absorbed.vertices)
    in_a = np.zeros(g.n, dtype=bool)
    in_a[amax] = True
    rest = g.induced(np.flatnonzero((lab == giant_id) & ~in_a))
    rest_lab = component_labels(rest)
    rest_comps = VertexPartition.from_labels(rest_lab, rest.vertices).blocks if rest.order else ()
    delta = int(g.degree.max())
    blocks = [amax]
    blocks.extend(split_components(g, rest_comps, n, delta))
    others = np.flatnonzero(lab != giant_id)
    if others.size:
        blocks.extend(VertexPartition.from_labels(lab, others).blocks)
    part = VertexPartition(blocks)
    qa = modularity(g, part)
    e_a = int(np.count_nonzero(in_a[g.edges[:, 0]] & in_a[g.edges[:, 1]]))
    n_cc = int(sizes.size)
    mu = n_cc / n
    m_hat = 2.0 * g.m / n
    dmax = profile.max_degree
    cap = ((dmax ** (ell // 2 + 1) - 1) / (dmax - 1)) * target if dmax > 1 else float(target)
    run = SupercriticalRun(
        eps_prime=float(eps_prime), ell=int(ell), n=int(n), seed=int(seed) if not isinstance(seed, np.random.Generator) else -1,
        s_size=len(s_set), aprime_size=len(absorbed), amax_size=len(amax), amax_edges=e_a,
        chains_absorbed=len(absorbed.chains),
        density_margin=(e_a - len(amax)) * n / len(amax) ** 2,
        giant_size=int(giant.size), core_size=int(core.order), components=n_cc,
        complement_components=len(rest_comps), blocks=len(part), q_achieved=qa,
        baseline=2.0 * (1.0 - mu) / m_hat, aprime_cap=float(cap),
    )
    if return_partition:
        return run, g, part
    return run
