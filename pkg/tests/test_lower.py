import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modcert import lower
from modcert.lower import (
    EPS_MAX,
    TWO_THIRDS,
    lower_certificate,
    optimize_eps,
    phase1_at,
    phase1_of,
    phase3_of,
    schedule_of,
    t0_of,
    t1_of,
    t2_of,
    t2_roots,
    urn_empty,
    urn_fraction,
    w_at,
    z0_at,
)

from oracles import bisect, oracle_schedule, phase0_rhs, rk4

EPS_STAR = 0.037562
admissible = st.floats(1e-3, 0.8)

FIELD = {"t0": "t0", "t1": "t1", "x0": "x0_t1", "x1": "x1_t1", "x2": "x2_t1", "a": "a_t1",
         "t2": "t2", "z0": "z0_t2", "z1": "z1_t2", "t3": "t3",
         "w0": "w0_t3", "w1": "w1_t3", "w2": "w2_t3", "w3": "w3_t3"}


def horizons(eps_values):
    sch = [schedule_of(e) for e in eps_values]
    return {k: np.array([getattr(s, k) for s in sch]) * 1.02 + 1e-4 for k in ("t0", "t1", "t2")}


# ---------------------------------------------------------------- phase 0


def test_t0_examples():
    assert t0_of(0.0) == 0.0
    assert t0_of(7 / 8) == pytest.approx(9 / 8, abs=1e-15)
    with pytest.raises(ValueError):
        t0_of(1.0)


def test_t0_matches_rk4():
    t0 = t0_of(EPS_STAR)
    x = rk4(phase0_rhs, np.zeros(1), np.array([t0]), 1e-5)[0]
    # error in t0 is the error in x divided by x'(t0) ~ 1
    assert abs(x - EPS_STAR) / phase0_rhs(t0, x) < 1e-8


# ---------------------------------------------------------------- phase 1


def test_phase1_at_zero():
    t1, x0, x1, x2, a = phase1_of(0.0)
    assert t1 == pytest.approx(0.0, abs=1e-15)
    assert (x0, x1, x2, a) == pytest.approx((1.0, 0.0, 0.0, 0.0), abs=1e-15)


def test_t1_at_seven_eighths():
    assert 1.5 * (4 * 0.5 - 3 * 0.25 - 1) == pytest.approx(3 / 8)
    assert t1_of(7 / 8 - 1e-12) == pytest.approx(3 / 8, abs=1e-9)
    with pytest.raises(ValueError):
        t1_of(7 / 8)


def test_eps_star_schedule_against_rk4():
    o = oracle_schedule(np.array([EPS_STAR]), horizons([EPS_STAR]), step=1e-4)
    s = schedule_of(EPS_STAR)
    for k, f in FIELD.items():
        assert o[k][0] == pytest.approx(getattr(s, f), abs=1e-6), k
    assert abs(o["h"][0]) < 1e-6


@settings(max_examples=50)
@given(admissible)
def test_phase1_shape(eps):
    t1 = t1_of(eps)
    ts = np.linspace(0, t1, 400)
    x0, x1, x2, a, h = phase1_at(eps, ts)
    assert np.all(h[:-1] >= -1e-12)
    assert abs(h[-1]) < 1e-12
    assert np.all(np.diff(x0) <= 1e-15)
    assert np.all(np.diff(x2) >= -1e-15)
    assert np.all(np.diff(a) >= -1e-15)


# ---------------------------------------------------------------- phase 2


@settings(max_examples=100)
@given(admissible)
def test_t2_defining_equation_and_vieta(eps):
    _, x0, x1, _, _ = phase1_of(eps)
    t2, z0, z1 = t2_of(eps)
    assert abs(z0 - (2 * t2 - 2 * x1)) < 1e-12
    assert z0 + z1 == pytest.approx(t2, abs=1e-12)
    tm, tp = t2_roots(eps)
    p = 3 * x0 + 2 * x1
    assert tm * tp == pytest.approx((p * p - 9 * x0 * x0) / 4, abs=1e-10)
    assert 0 < tm < tp


def test_t2_matches_bisection():
    _, x0, x1, _, _ = phase1_of(EPS_STAR)
    t2 = t2_of(EPS_STAR)[0]
    q_den = 3 - 2 * t0_of(EPS_STAR) - 2 * t1_of(EPS_STAR)

    def stop(t):
        return 3 * x0 * (1 - math.sqrt(1 - 2 * t / q_den)) - 2 * t + 2 * x1

    # stop() is positive at 0 and first turns negative at the smaller root
    root = bisect(stop, 0.0, 0.5 * (t2 + t2_roots(EPS_STAR)[1]))
    assert root == pytest.approx(t2, abs=1e-10)


def test_t2_rejects_zero():
    with pytest.raises(ValueError):
        t2_roots(0.0)


# ---------------------------------------------------------------- phase 3


@settings(max_examples=100)
@given(admissible)
def test_phase3_mass_and_half_edges(eps):
    _, x0, _, _, _ = phase1_of(eps)
    t3, w0, w1, w2, w3 = phase3_of(eps)
    assert w0 + w1 + w2 + w3 == pytest.approx(x0, abs=1e-12)
    assert 3 * w0 + 2 * w1 + w2 == pytest.approx(3 * x0 - t3, abs=1e-12)


def test_phase3_rejects_zero():
    with pytest.raises(ValueError):
        phase3_of(0.0)


def test_w_at_start():
    assert w_at(0.7, 0.0) == (pytest.approx(0.7), 0.0, 0.0, 0.0)


# ---------------------------------------------------------------- schedule


def test_schedule_reference_values():
    s = schedule_of(EPS_STAR)
    assert s.v3 == pytest.approx(0.044783, abs=1e-5)
    assert s.qr == pytest.approx(0.674701, abs=1e-5)


def test_schedule_small_eps_tends_to_two_thirds():
    assert schedule_of(1e-6).qr == pytest.approx(TWO_THIRDS, abs=1e-4)


@settings(max_examples=100)
@given(admissible)
def test_schedule_invariants(eps):
    s = schedule_of(eps)
    for k, v in s.as_dict().items():
        if k == "qr":
            continue
        assert 0 <= v <= 3, k
    assert s.t0 == pytest.approx(1.5 * (1 - (1 - eps) ** (2 / 3)), abs=1e-15)
    assert s.z0_t2 + s.z1_t2 == pytest.approx(s.t2, abs=1e-12)
    assert s.w0_t3 + s.w1_t3 + s.w2_t3 + s.w3_t3 == pytest.approx(s.x0_t1, abs=1e-12)
    assert s.qr == pytest.approx(2 * s.e3 / (3 * s.v3) - s.v3, abs=1e-15)


def test_schedule_continuous():
    grid = np.linspace(0.001, 0.8, 4000)
    qr = np.array([schedule_of(e).qr for e in grid])
    assert np.max(np.abs(np.diff(qr))) < 1e-3


# ---------------------------------------------------------------- optimizer


def test_optimizer_default():
    assert optimize_eps() == pytest.approx(EPS_STAR, abs=1e-5)


def test_optimizer_local_bracket():
    assert optimize_eps(0.03, 0.05) == pytest.approx(optimize_eps(), abs=1e-6)


def test_optimizer_degenerate_bracket():
    assert optimize_eps(0.2, 0.2) == 0.2


@pytest.mark.parametrize("shift", [-0.01, 0.01])
def test_optimizer_stable_under_bracket_shift(shift):
    assert optimize_eps(0.02 + shift, 0.06 + shift) == pytest.approx(optimize_eps(), abs=1e-6)


def test_optimizer_bad_bracket():
    with pytest.raises(ValueError):
        optimize_eps(0.1, 0.9)


def test_qr_objective_has_its_own_maximizer():
    e = optimize_eps(objective="qr")
    assert schedule_of(e).qr >= schedule_of(optimize_eps()).qr
    assert abs(e - EPS_STAR) > 5e-3


# ---------------------------------------------------------------- certificate


def test_certificate():
    c = lower_certificate()
    assert c.valid
    assert c.bound == pytest.approx(0.667026, abs=1e-5)
    assert c.bound - TWO_THIRDS == pytest.approx((c.qr_star - TWO_THIRDS) * c.v3_star, abs=1e-12)
    assert c.guards["cherry_budget"] and 4 * c.v3_star < 1 / 3
    assert c.guards["four_v3"] == pytest.approx(0.179132, abs=1e-5)
    assert not c.guards["printed_four_v3_mismatch"]
    assert c.eps_star < EPS_MAX


# ---------------------------------------------------------------- urns


def test_urn_examples():
    assert urn_fraction(2.0, 0.0) == 0.0
    assert urn_fraction(2.0, 2.0) == 2.0
    assert urn_fraction(1.0, 0.5) == 0.75
    with pytest.raises(ValueError):
        urn_fraction(1.0, 1.5)


@given(st.floats(0.1, 10), st.floats(0, 1))
def test_urn_empty_consistent(a, frac):
    b = frac * a
    # 2b balls leave a - occupied urns empty
    assert urn_empty(a, 2 * b) == pytest.approx(a - urn_fraction(a, b), abs=1e-12)


def test_trace_rows():
    rows = lower.trace_phase1(0.1, 0.01)
    assert rows[0]["t"] == 0.0 and rows[-1]["t"] == pytest.approx(t1_of(0.1))
    assert abs(rows[-1]["h"]) < 1e-12


def test_z0_at_zero():
    assert z0_at(0.2, 0.0) == 0.0
