"""First-moment certificate for the upper bound on the modularity of random cubic graphs.

A partition beating the target density must contain a set B with
``eps * n`` vertices whose cut is small. ``f(beta, eps)`` is the exponential
growth rate of the expected number of such cuts when ``beta * n`` vertices on
each side carry the cut edges; ``g(eps) = f(beta*(eps), eps)`` is its worst
case. The certificate checks ``g < 0`` on ``[eps0, 1/2]``, with small sets
(below ``eps0 * n``) handled by a separate counting bound.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import xlogy

TARGET = 0.789998
TREE_C = 2.483253
LN3 = math.log(3.0)

# constants as printed alongside the target; used only for consistency checks
PRINTED = {
    "density_slack": 0.123331,
    "extra_edge_rate": 0.184997,
    "beta_zero": 0.210002,
    "beta_zero_coefficient": 0.63007,
}


def density_slack(target=TARGET):
    return target - 2.0 / 3.0


def extra_edge_rate(target=TARGET):
    return 1.5 * target - 1.0


def constant_checks(target=TARGET):
    """Compare constants derived from the target with the printed ones."""
    slack = density_slack(target)
    derived = {
        "density_slack": slack,
        "extra_edge_rate": extra_edge_rate(target),
        "beta_zero": (1.0 - 3.0 * slack) / 3.0,
        "beta_zero_coefficient": 1.0 - 3.0 * slack,
    }
    out = {}
    for k, v in derived.items():
        diff = abs(v - PRINTED[k])
        out[k] = {"derived": v, "printed": PRINTED[k], "mismatch": bool(diff > 1e-6)}
    return out


# ---------------------------------------------------------------- exponent


def _check_simplex(beta, eps):
    beta = np.asarray(beta, dtype=float)
    eps = np.asarray(eps, dtype=float)
    bad = ~((eps > 0) & (eps <= 0.5) & (beta >= 0) & (beta <= np.minimum(eps, 1.0 - eps)))
    if np.any(bad):
        raise ValueError("(beta, eps) outside 0 <= beta <= min(eps, 1-eps), 0 < eps <= 1/2")
    return beta, eps


def f_exponent(beta, eps):
    """Growth rate of the expected number of cuts; beta -> 0 uses x log x -> 0."""
    beta, eps = _check_simplex(beta, eps)
    a = 3.0 * eps - beta
    b = 3.0 - 3.0 * eps - beta
    val = (2.0 * beta * LN3 + 0.5 * xlogy(a, a) + 0.5 * xlogy(b, b) - xlogy(beta, beta)
           - xlogy(eps - beta, eps - beta) - xlogy(1.0 - eps - beta, 1.0 - eps - beta) - 1.5 * LN3)
    return val[()] if val.ndim == 0 else val


def df_dbeta(beta, eps):
    beta, eps = _check_simplex(beta, eps)
    if np.any((beta <= 0) | (beta >= np.minimum(eps, 1.0 - eps))):
        raise ValueError("derivative needs an interior point")
    val = (2.0 * LN3 - 0.5 * np.log(3.0 * eps - beta) - 0.5 * np.log(3.0 - 3.0 * eps - beta)
           - np.log(beta) + np.log(eps - beta) + np.log(1.0 - eps - beta))
    return val[()] if val.ndim == 0 else val


def df_deps(beta, eps):
    beta, eps = _check_simplex(beta, eps)
    val = (1.5 * np.log(3.0 * eps - beta) - 1.5 * np.log(3.0 - 3.0 * eps - beta)
           - np.log(eps - beta) + np.log(1.0 - eps - beta))
    return val[()] if val.ndim == 0 else val


def inequality_margin(beta, eps):
    """81(eps-b)^2(1-eps-b)^2 - (3eps-b)(3-3eps-b)b^2; nonnegative iff df/dbeta >= 0."""
    return (81.0 * (eps - beta) ** 2 * (1.0 - eps - beta) ** 2
            - (3.0 * eps - beta) * (3.0 - 3.0 * eps - beta) * beta ** 2)


def inequality_holds(beta, eps):
    _check_simplex(beta, eps)
    return bool(np.all(inequality_margin(beta, eps) >= 0))


# ---------------------------------------------------------------- g


def beta_star(eps, target=TARGET):
    """Largest admissible cut fraction (1 - 3(slack + eps)) eps, clamped at 0."""
    eps = np.asarray(eps, dtype=float)
    val = np.maximum(0.0, (1.0 - 3.0 * (density_slack(target) + eps)) * eps)
    return val[()] if val.ndim == 0 else val


def g_of(eps, target=TARGET):
    return f_exponent(beta_star(eps, target), eps)


def g_prime(eps, target=TARGET):
    """Analytic derivative of g by the chain rule."""
    eps = np.asarray(eps, dtype=float)
    b = beta_star(eps, target)
    slope = 1.0 - 3.0 * density_slack(target) - 6.0 * eps
    out = np.empty(eps.shape)
    inner = b > 0
    if np.any(inner):
        e, bb = eps[inner], b[inner]
        out[inner] = df_dbeta(bb, e) * slope[inner] + df_deps(bb, e)
    if np.any(~inner):
        out[~inner] = df_deps(0.0, eps[~inner])
    return out[()] if out.ndim == 0 else out


def gprime_signs(grid, target=TARGET):
    """Locations where g' changes sign, refined by root bracketing."""
    grid = np.asarray(grid, dtype=float)
    d = g_prime(grid, target)
    s = np.sign(d)
    out = []
    for i in np.flatnonzero(s[:-1] * s[1:] < 0):
        out.append(brentq(lambda e: float(g_prime(e, target)), grid[i], grid[i + 1], xtol=1e-14))
    return out


# ---------------------------------------------------------------- small sets


def tree_factor(c=TREE_C, target=TARGET):
    return c ** (1.0 / extra_edge_rate(target))


def eps0(c=TREE_C, target=TARGET):
    """Root of 2 C^(1/rate) eps = 3 - 2 eps."""
    k = tree_factor(c, target)
    return brentq(lambda e: 2.0 * k * e - (3.0 - 2.0 * e), 0.0, 1.5, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def per_s_bound(s, n, c=TREE_C, target=TARGET):
    """Bound on the expected number of bad sets of size s."""
    k = tree_factor(c, target)
    r = extra_edge_rate(target)
    return 2.0 * k * (k * (s + 1) / (3.0 * n - 2.0 * s - 1.0)) ** (r * s - 1.0)


def per_s_chain(s, n, c=TREE_C, target=TARGET):
    """The step before the final simplification: (2 C^s / s^1.5) ((s+1)/(3n-2s-1))^(rate s - 1)."""
    r = extra_edge_rate(target)
    return 2.0 * c ** s / s ** 1.5 * ((s + 1) / (3.0 * n - 2.0 * s - 1.0)) ** (r * s - 1.0)


def small_set_tail(n, c=TREE_C, target=TARGET):
    """(sum over 11 <= s <= log n of the per-s bound, geometric bound over log n <= s <= eps0 n)."""
    if n < 100:
        raise ValueError("n must be at least 100")
    k = tree_factor(c, target)
    r = extra_edge_rate(target)
    ln = math.log(n)
    low = sum(per_s_bound(s, n, c, target) for s in range(11, int(math.floor(ln)) + 1))
    high = 2.0 * k / ((1.0 - 2.0 ** (-r)) * 2.0 ** (r * ln))
    return low, high


# ---------------------------------------------------------------- certificate


REFERENCE_N = (10 ** 6, 10 ** 9, 10 ** 12)


@dataclass(frozen=True)
class UpperBoundCertificate:
    target: float
    density_slack: float
    extra_edge_rate: float
    tree_growth_C: float
    eps0: float
    grid_step: float
    max_g: float
    argmax_g: float
    padded_max_g: float
    g_at_eps0: float
    gprime_sign_changes: list
    small_set_sums: list
    small_set_reference: dict
    constant_checks: dict
    valid: bool
    reason: str = ""
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        return asdict(self)


def padded_interval_max(grid, g, gp):
    """Upper bound on g over each grid interval from a local Lipschitz estimate.

    On [a, b] the slope bound is max(|g'(a)|, |g'(b)|) + |g'(b) - g'(a)|, which
    allows g' to overshoot its endpoint values by their difference.
    """
    h = np.diff(grid)
    lip = np.maximum(np.abs(gp[:-1]), np.abs(gp[1:])) + np.abs(np.diff(gp))
    return 0.5 * (g[:-1] + g[1:]) + 0.5 * lip * h


def certify_upper(grid_step=1e-4, target=TARGET, c=TREE_C):
    e0 = eps0(c, target)
    checks = constant_checks(target)
    ref = {}
    for n in REFERENCE_N:
        ref[str(n)] = list(small_set_tail(n, c, target))
    lows = [ref[str(n)][0] for n in REFERENCE_N]
    highs = [ref[str(n)][1] for n in REFERENCE_N]
    tails_vanish = all(x > y for x, y in zip(lows, lows[1:])) and all(x > y for x, y in zip(highs, highs[1:]))
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    npts = int(math.ceil((0.5 - e0) / grid_step)) + 1
    grid = np.linspace(e0, 0.5, npts)
    g = g_of(grid, target)
    gp = g_prime(grid, target)
    padded = padded_interval_max(grid, g, gp)
    i = int(np.argmax(g))
    signs = gprime_signs(np.linspace(1e-6, 0.5, 50001), target)
    reason = ""
    if grid_step > 1e-4:
        reason = "grid too coarse for the Lipschitz padding (need step <= 1e-4)"
    elif g.max() >= 0:
        reason = f"g is nonnegative on the grid (max {g.max():.3e} at eps={grid[i]:.6f})"
    elif padded.max() >= 0:
        reason = "grid too coarse for the Lipschitz padding (padded maximum is nonnegative)"
    elif not tails_vanish:
        reason = "small-set sums do not decrease with n"
    return UpperBoundCertificate(
        target=target,
        density_slack=density_slack(target),
        extra_edge_rate=extra_edge_rate(target),
        tree_growth_C=c,
        eps0=e0,
        grid_step=float(grid[1] - grid[0]),
        max_g=float(g.max()),
        argmax_g=float(grid[i]),
        padded_max_g=float(padded.max()),
        g_at_eps0=float(g[0]),
        gprime_sign_changes=[float(x) for x in signs],
        small_set_sums=ref[str(REFERENCE_N[0])],
        small_set_reference=ref,
        constant_checks=checks,
        valid=not reason,
        reason=reason,
    )


def g_table(step=1e-3, target=TARGET):
    grid = np.arange(step, 0.5 + step / 2, step)
    return [{"eps": float(e), "g": float(v)} for e, v in zip(grid, g_of(grid, target))]
