"""Closed-form fluid limits of the phased exploration of a random cubic graph.

Every quantity is a fraction of n. The exploration grows a component C0 to
``eps * n`` vertices (phase 0), tests all its open half-edges and adds cherry
centres (phase 1), absorbs chains of length three (phase 2) and finally adds
cherries whose two ends hang off the remaining degree-one vertices (phase 3).
The relative modularity of the resulting set C3 gives the lower bound
``2/3 + (qr - 2/3) * v3`` on the modularity of the whole graph.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize_scalar

EPS_MAX = 7.0 / 8.0
TWO_THIRDS = 2.0 / 3.0


def _check_eps(eps, lo_open=False, hi=EPS_MAX):
    if not np.isfinite(eps) or eps < 0 or eps >= hi or (lo_open and eps == 0):
        raise ValueError(f"eps={eps} outside the admissible range")


# ---------------------------------------------------------------- phase 0


def x_phase0(t):
    """Explored-vertex fraction after t*n phase-0 steps."""
    return 1.0 - (1.0 - 2.0 * np.asarray(t, dtype=float) / 3.0) ** 1.5


def t0_of(eps):
    if not 0 <= eps < 1:
        raise ValueError(f"eps={eps} outside [0, 1)")
    return 1.5 * (1.0 - (1.0 - eps) ** (2.0 / 3.0))


# ---------------------------------------------------------------- phase 1


def phase1_at(eps, t):
    """(x0, x1, x2, a, h) at phase-1 time t (arrays broadcast)."""
    t = np.asarray(t, dtype=float)
    t0 = t0_of(eps)
    d = 3.0 - 2.0 * t0
    u = 1.0 - 2.0 * t / d
    s = u ** 1.5
    x0 = (1.0 - eps) * s
    x1 = 3.0 * (1.0 - eps) * (u - s)
    x2 = 6.0 * (1.0 - eps) * t / d + 2.0 * (1.0 - eps) * (s - 1.0)
    a = (2.0 * eps - 0.5 - t0) - (3.0 * eps - 1.5 - t0) * u - (1.0 - eps) * s
    h = (6.0 * eps - 3.0 - 2.0 * t0) * u + 3.0 * (1.0 - eps) * s
    return x0, x1, x2, a, h


def t1_of(eps):
    _check_eps(eps)
    c = (1.0 - eps) ** (1.0 / 3.0)
    return 1.5 * (4.0 * c - 3.0 * c * c - 1.0)


def phase1_of(eps):
    """(t1, x0, x1, x2, a) at the end of phase 1, where h first returns to 0."""
    t1 = t1_of(eps)
    x0, x1, x2, a, h = (float(v) for v in phase1_at(eps, t1))
    scale = max(1.0, abs(3.0 * eps))
    if abs(h) > 1e-12 * scale:
        raise ArithmeticError(f"h(t1) = {h} is not zero")
    return t1, x0, x1, x2, a


# ---------------------------------------------------------------- phase 2


def _phase2_consts(eps):
    t0 = t0_of(eps)
    t1, x0, x1, _, _ = phase1_of(eps)
    p = 3.0 * x0 + 2.0 * x1
    q_den = 3.0 - 2.0 * t0 - 2.0 * t1
    return x0, x1, p, q_den


def z0_at(eps, t):
    x0, _, _, q_den = _phase2_consts(eps)
    return 3.0 * x0 * (1.0 - np.sqrt(1.0 - 2.0 * np.asarray(t, dtype=float) / q_den))


def t2_roots(eps):
    """Both roots (t-, t+) of the phase-2 stopping condition."""
    _check_eps(eps, lo_open=True)
    x0, _, p, q_den = _phase2_consts(eps)
    disc = 81 * x0 ** 4 - 36 * x0 ** 2 * p * q_den + 36 * x0 ** 2 * q_den ** 2
    if disc < 0:
        raise ArithmeticError(f"negative discriminant {disc} at eps={eps}")
    r = math.sqrt(disc)
    return p / 2 - (9 * x0 ** 2 + r) / (4 * q_den), p / 2 - (9 * x0 ** 2 - r) / (4 * q_den)


def t2_of(eps):
    """(t2, z0, z1): phase 2 ends when z0(t) = 2t - 2 x1(t1)."""
    t2 = t2_roots(eps)[0]
    z0 = float(z0_at(eps, t2))
    return t2, z0, t2 - z0


# ---------------------------------------------------------------- phase 3


def urn_fraction(a, b):
    """Occupied urns after 2b balls land in a two-slot urns (fill-weighted)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if b < 0 or b > a:
        raise ValueError(f"need 0 <= b <= a, got a={a}, b={b}")
    return b * (2.0 * a - b) / a


def urn_empty(a, t):
    """Empty urns after t balls."""
    return a * (1.0 - t / (2.0 * a)) ** 2


def w_at(x0_t1, t):
    """(w0, w1, w2, w3) when t half-edges have been attached to X = x0_t1 fresh vertices."""
    t = np.asarray(t, dtype=float)
    xx = x0_t1
    r = 3.0 * xx - t
    w0 = r ** 3 / (27.0 * xx * xx)
    w1 = t * r ** 2 / (9.0 * xx * xx)
    w2 = t * t * r / (9.0 * xx * xx)
    w3 = t ** 3 / (27.0 * xx * xx)
    return w0, w1, w2, w3


def phase3_of(eps):
    """(t3, w0, w1, w2, w3) at the end of phase 3."""
    _check_eps(eps, lo_open=True)
    _, x0, x1, _, _ = phase1_of(eps)
    if x1 <= 0:
        raise ValueError("no degree-one vertices after phase 1")
    _, _, z1 = t2_of(eps)
    t3 = 2.0 * (x1 - urn_fraction(x1, z1))
    return (t3,) + tuple(float(w) for w in w_at(x0, t3))


# ---------------------------------------------------------------- schedule


@dataclass(frozen=True)
class PhaseSchedule:
    eps: float
    t0: float
    t1: float
    t2: float
    t3: float
    x0_t1: float
    x1_t1: float
    x2_t1: float
    a_t1: float
    z0_t2: float
    z1_t2: float
    w0_t3: float
    w1_t3: float
    w2_t3: float
    w3_t3: float
    chain_vertices: float
    phase3_vertices: float
    v3: float
    e3: float
    qr: float

    def as_dict(self):
        return asdict(self)

    @property
    def bound(self):
        return TWO_THIRDS + (self.qr - TWO_THIRDS) * self.v3


def schedule_of(eps):
    _check_eps(eps, lo_open=True)
    t0 = t0_of(eps)
    t1, x0, x1, x2, a = phase1_of(eps)
    t2, z0, z1 = t2_of(eps)
    chain = urn_fraction(x1, z1)
    rest = x1 - chain
    t3 = 2.0 * rest
    w0, w1, w2, w3 = (float(w) for w in w_at(x0, t3))
    # degree-one vertices picked up by the phase-3 cherries
    balls = w2 + 1.5 * w3
    picked = urn_fraction(rest, balls) if rest > 0 else 0.0
    v3 = eps + x2 + chain + w2 + w3 + picked
    e3 = t0 + a + 2 * x2 + chain + z1 + 2 * w2 + 3 * w3 + picked
    qr = 2 * e3 / (3 * v3) - v3
    return PhaseSchedule(eps, t0, t1, t2, t3, x0, x1, x2, a, z0, z1, w0, w1, w2, w3,
                         chain, picked, v3, e3, qr)


# ---------------------------------------------------------------- optimizer


def gain_objective(eps):
    s = schedule_of(eps)
    return (s.qr - TWO_THIRDS) * s.v3


def qr_objective(eps):
    return schedule_of(eps).qr


OBJECTIVES = {"bound": gain_objective, "qr": qr_objective}


def optimize_eps(lo=1e-4, hi=0.8745, tol=1e-7, objective="bound", step=1e-3):
    """Maximize the objective over eps: coarse grid, then a bounded scalar search.

    ``objective="bound"`` maximizes the certified gain (qr - 2/3) * v3, which
    is what the final bound depends on; ``"qr"`` maximizes qr alone.
    """
    if not (0 < lo <= hi < EPS_MAX):
        raise ValueError(f"bracket ({lo}, {hi}) must lie in (0, 7/8)")
    if hi == lo:
        return lo
    f = OBJECTIVES[objective]
    grid = np.linspace(lo, hi, max(3, int(math.ceil((hi - lo) / step)) + 1))
    vals = np.array([f(e) for e in grid])
    if not np.all(np.isfinite(vals)):
        raise ArithmeticError("non-finite objective inside the bracket")
    i = int(np.argmax(vals))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(lambda e: -f(e), bounds=(float(a), float(b)), method="bounded",
                          options={"xatol": tol})
    return float(res.x)


# ---------------------------------------------------------------- certificate


PRINTED_CHERRY_BUDGET = 0.179136


@dataclass(frozen=True)
class LowerBoundCertificate:
    eps_star: float
    qr_star: float
    v3_star: float
    bound: float
    guards: dict
    valid: bool

    def as_dict(self):
        return asdict(self)


def lower_certificate(lo=1e-4, hi=0.8745, tol=1e-7, objective="bound"):
    eps = optimize_eps(lo, hi, tol, objective)
    s = schedule_of(eps)
    bound = TWO_THIRDS + (s.qr - TWO_THIRDS) * s.v3
    guards = {
        "eps_below_7_8": bool(eps < EPS_MAX),
        "cherry_budget": bool(4 * s.v3 < 1.0 / 3.0),
        "four_v3": 4 * s.v3,
        "printed_four_v3_mismatch": bool(abs(4 * s.v3 - PRINTED_CHERRY_BUDGET) > 1e-4),
        "bound_at_least_two_thirds": bool(bound >= TWO_THIRDS),
    }
    valid = guards["eps_below_7_8"] and guards["cherry_budget"] and guards["bound_at_least_two_thirds"]
    return LowerBoundCertificate(eps, s.qr, s.v3, bound, guards, valid)


def trace_phase1(eps, step=1e-3):
    """Rows (t, x0, x1, x2, a, h) on [0, t1] for plotting."""
    t1 = phase1_of(eps)[0]
    ts = np.arange(0.0, t1, step)
    ts = np.append(ts, t1)
    cols = phase1_at(eps, ts)
    return [dict(t=float(t), x0=float(c[0]), x1=float(c[1]), x2=float(c[2]), a=float(c[3]), h=float(c[4]))
            for t, c in zip(ts, zip(*cols))]
