"""Command-line front end: ``modcert <subcommand> [options]``.

Every subcommand writes one JSON document (to stdout or ``--out``) that
carries its full configuration, so a run can be repeated from its own
output. Exit codes: 0 success, 2 invalid input, 3 failed certificate.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__, general, lower, phases, upper
from .graph import (
    parse_degree_sequence,
    parse_probabilities,
    read_edge_list,
    sample_configuration,
    sample_simple,
    sequence_from_probabilities,
    write_edge_list,
)
from .modularity import brute_force_qstar, read_partition, report, write_partition

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CERT = 3


class CertificateFailed(Exception):
    pass


# ---------------------------------------------------------------- output helpers


def _clean(obj):
    """Make an object JSON-safe: numpy scalars to python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def emit_csv(records, path, columns=None):
    """Write homogeneous records as CSV (header, LF endings, 12 significant digits)."""
    records = list(records)
    if columns is None:
        if not records:
            raise ValueError("columns are required for an empty record list")
        columns = list(records[0].keys())
    columns = list(columns)
    for r in records:
        if list(r.keys()) != columns:
            raise ValueError("records are not homogeneous")
    fh = sys.stdout if path in (None, "-") else open(path, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in records:
            w.writerow([_fmt(r[c]) for c in columns])
    finally:
        if fh is not sys.stdout:
            fh.close()


def _parse_cell(s):
    for conv in (int, float):
        try:
            return conv(s)
        except ValueError:
            pass
    if s in ("True", "False"):
        return s == "True"
    return s


def parse_csv(path):
    """Inverse of emit_csv: returns (columns, records) with numbers converted."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return [], []
    cols = rows[0]
    return cols, [dict(zip(cols, (_parse_cell(x) for x in r))) for r in rows[1:]]


def _write_json(doc, out):
    text = json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)


def _config(args):
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _resolve_seed(args):
    if getattr(args, "seed", None) is None:
        return
    if args.seed == "auto":
        args.seed = int(np.random.SeedSequence().generate_state(1, np.uint64)[0])
        print(f"seed: {args.seed}", file=sys.stderr)
    else:
        try:
            args.seed = int(args.seed)
        except ValueError:
            raise ValueError(f"seed must be an integer or 'auto', got {args.seed!r}") from None
        if not 0 <= args.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")


def _default_jobs():
    v = os.environ.get("MODCERT_JOBS")
    if not v:
        return 1
    try:
        j = int(v)
    except ValueError:
        raise ValueError(f"MODCERT_JOBS must be an integer, got {v!r}") from None
    return max(1, j)


def _fan_out(fn, work, jobs):
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, work))
    return [fn(w) for w in work]


def _parse_floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _parse_ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


# ---------------------------------------------------------------- subcommands


def cmd_sample(args):
    if (args.sequence is None) == (args.profile is None):
        raise ValueError("give exactly one of --sequence or --profile")
    if args.profile is not None:
        if args.n is None:
            raise ValueError("--profile needs --n")
        seq = sequence_from_probabilities(parse_probabilities(args.profile), args.n)
    else:
        seq = parse_degree_sequence(args.sequence)
    if args.simple:
        g = sample_simple(seq, args.seed, max_retries=args.max_retries)
    else:
        g = sample_configuration(seq, args.seed)
    if args.graph_out:
        write_edge_list(g, args.graph_out)
    loops = int(np.count_nonzero(g.edges[:, 0] == g.edges[:, 1]))
    expected = np.asarray(seq.degrees())
    return {
        "sequence": str(seq),
        "n": g.order,
        "m": g.m,
        "loops": loops,
        "degrees_conserved": bool(np.array_equal(np.sort(g.degree)[::-1], expected)),
        "edges": None if args.graph_out else g.edges.tolist(),
    }


def cmd_score(args):
    g = read_edge_list(args.graph)
    part = read_partition(args.partition)
    return report(g, part)


def cmd_brute(args):
    g = read_edge_list(args.graph)
    q, part = brute_force_qstar(g, n_limit=args.n_limit)
    if args.partition_out:
        write_partition(part, args.partition_out)
    return {"q_star": q, "partition": [list(b) for b in part]}


def cmd_certify_lower(args):
    if args.trace is not None:
        rows = lower.trace_phase1(args.trace, args.step)
        emit_csv(rows, args.csv, columns=["t", "x0", "x1", "x2", "a", "h"])
    cert = lower.lower_certificate(args.lo, args.hi, args.tol, args.objective)
    doc = cert.as_dict()
    doc["schedule"] = lower.schedule_of(cert.eps_star).as_dict()
    if not cert.valid:
        raise CertificateFailed(doc)
    return doc


def cmd_certify_upper(args):
    cert = upper.certify_upper(args.grid_step, args.target, args.c)
    doc = cert.as_dict()
    if args.csv:
        emit_csv(upper.g_table(args.table_step, args.target), args.csv, columns=["eps", "g"])
    if not cert.valid:
        raise CertificateFailed(doc)
    return doc


def _phase_trial(work):
    n, eps, seed = work
    return phases.run_trial(n, eps, seed, keep_records=False)


def cmd_simulate_phases(args):
    eps = args.eps if args.eps is not None else lower.optimize_eps()
    if args.trials == 1:
        res = phases.run_trial(args.n, eps, args.seed, keep_records=bool(args.trajectory))
        if args.trajectory:
            rows = phases.trajectory_rows(res.pop("records"), args.n, eps)
            cols = list(phases.TRAJECTORY_COLUMNS) + [f"{k}_ode" for k in phases.COUNTERS]
            emit_csv(rows, args.trajectory, columns=cols)
        res["certificate_bound"] = lower.schedule_of(eps).bound
        return {"eps": eps, "runs": [res]}
    seeds = general.trial_seeds(args.seed, args.trials)
    runs = _fan_out(_phase_trial, [(args.n, eps, s) for s in seeds], args.jobs)
    qs = [r["q"] for r in runs]
    return {
        "eps": eps,
        "seeds": seeds,
        "runs": runs,
        "mean_q": float(np.mean(qs)),
        "min_qr_cbar3": float(min(r["qr_cbar3"] for r in runs)),
        "certificate_bound": lower.schedule_of(eps).bound,
    }


def cmd_subcritical_c(args):
    profile = general.DegreeProfile(parse_probabilities(args.profile))
    q, m, regime = general.criterion(profile)
    c, tail = general.subcritical_constant(profile, args.t_max)
    doc = {"profile": str(profile), "Q": q, "M": m, "regime": regime, "c": c, "tail_bound": tail}
    if args.trials > 0:
        mean, vals = general.subcritical_empirical(profile, args.n, args.trials, args.seed, args.jobs,
                                                   return_trials=True)
        doc.update({"c_hat": mean, "trials": vals, "relative_gap": abs(mean - c) / c})
        if args.csv:
            emit_csv([{"trial": i, "c_hat": v} for i, v in enumerate(vals)], args.csv, columns=["trial", "c_hat"])
    return doc


def _super_trial(work):
    probs, n, eps_prime, ell, seed = work
    try:
        run = general.supercritical_pipeline(general.DegreeProfile(probs), n, eps_prime, ell, seed)
    except ValueError as exc:
        return {"eps_prime": eps_prime, "ell": ell, "seed": seed, "error": str(exc)}
    d = run.as_dict()
    d["margin"] = run.margin
    return d


def cmd_supercritical(args):
    probs = parse_probabilities(args.profile)
    profile = general.DegreeProfile(probs)
    grid = [(e, l) for e in _parse_floats(args.eps_prime) for l in _parse_ints(args.ell)]
    seeds = general.trial_seeds(args.seed, len(grid))
    work = [(probs, args.n, e, l, s) for (e, l), s in zip(grid, seeds)]
    runs = _fan_out(_super_trial, work, args.jobs)
    ok = [r for r in runs if "error" not in r]
    good = [r for r in ok if r["q_achieved"] > r["baseline"] and r["density_margin"] > 0]
    if args.csv:
        cols = ["eps_prime", "ell", "seed", "q_achieved", "baseline", "density_margin"]
        emit_csv([{k: r[k] for k in cols} for r in ok], args.csv, columns=cols)
    return {"profile": str(profile), "Q": profile.Q, "runs": runs, "beats_baseline": len(good) > 0}


def cmd_urns(args):
    if args.a_frac is not None:
        a = int(round(args.a_frac * args.n))
        b = int(round(args.b_frac * args.n))
    else:
        a, b = args.a, args.b
    if a is None or b is None:
        raise ValueError("give --a and --b, or --n with --a-frac and --b-frac")
    occupied = phases.simulate_urns(a, b, args.seed)
    pred = lower.urn_fraction(a, b) if a > 0 else 0.0
    return {"a": a, "b": b, "occupied": occupied, "predicted": pred,
            "relative_error": abs(occupied - pred) / pred if pred else 0.0}


# ---------------------------------------------------------------- parser


def build_parser():
    p = argparse.ArgumentParser(prog="modcert", description="Modularity bounds for sparse random graphs.")
    p.add_argument("--version", action="version", version=f"modcert {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True)

    def add(name, func, helptext, seed=False, jobs=False):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--out", help="write JSON here instead of stdout")
        if seed:
            sp.add_argument("--seed", default="0", help="integer seed or 'auto'")
        if jobs:
            sp.add_argument("--jobs", type=int, default=None, help="worker processes (default $MODCERT_JOBS or 1)")
        sp.set_defaults(func=func)
        return sp

    sp = add("sample", cmd_sample, "sample a configuration-model multigraph", seed=True)
    sp.add_argument("--sequence", help='degree counts, e.g. "3:100"')
    sp.add_argument("--profile", help='degree probabilities, e.g. "1:0.3,3:0.7" (needs --n)')
    sp.add_argument("--n", type=int)
    sp.add_argument("--simple", action="store_true", help="reject until simple")
    sp.add_argument("--max-retries", type=int, default=1000)
    sp.add_argument("--graph-out", help="edge-list output path")

    sp = add("score", cmd_score, "score a partition")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--partition", required=True)

    sp = add("brute", cmd_brute, "exact optimum by enumeration (n <= 10)")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--n-limit", type=int, default=10)
    sp.add_argument("--partition-out")

    sp = add("certify-lower", cmd_certify_lower, "lower-bound certificate for cubic graphs")
    sp.add_argument("--lo", type=float, default=1e-4)
    sp.add_argument("--hi", type=float, default=0.8745)
    sp.add_argument("--tol", type=float, default=1e-7)
    sp.add_argument("--objective", choices=sorted(lower.OBJECTIVES), default="bound")
    sp.add_argument("--trace", type=float, metavar="EPS", help="emit the phase-1 curves at EPS as CSV")
    sp.add_argument("--step", type=float, default=1e-3)
    sp.add_argument("--csv", help="CSV path for --trace (default stdout)")

    sp = add("certify-upper", cmd_certify_upper, "upper-bound certificate for cubic graphs")
    sp.add_argument("--grid-step", type=float, default=1e-4)
    sp.add_argument("--target", type=float, default=upper.TARGET)
    sp.add_argument("--c", type=float, default=upper.TREE_C)
    sp.add_argument("--csv", help="also write (eps, g) rows here")
    sp.add_argument("--table-step", type=float, default=1e-3)

    sp = add("simulate-phases", cmd_simulate_phases, "run the phased exploration on a random cubic graph",
             seed=True, jobs=True)
    sp.add_argument("--n", type=int, default=200000)
    sp.add_argument("--eps", type=float, help="default: the optimized value")
    sp.add_argument("--trials", type=int, default=1)
    sp.add_argument("--trajectory", help="CSV of counter trajectories (single trial only)")

    sp = add("subcritical-c", cmd_subcritical_c, "series and empirical constant for subcritical profiles",
             seed=True, jobs=True)
    sp.add_argument("--profile", required=True)
    sp.add_argument("--t-max", type=int, default=400)
    sp.add_argument("--n", type=int, default=100000)
    sp.add_argument("--trials", type=int, default=0)
    sp.add_argument("--csv", help="per-trial values")

    sp = add("supercritical", cmd_supercritical, "dense-set pipeline for supercritical profiles",
             seed=True, jobs=True)
    sp.add_argument("--profile", required=True)
    sp.add_argument("--n", type=int, default=100000)
    sp.add_argument("--eps-prime", default="0.001,0.005,0.02")
    sp.add_argument("--ell", default="4,8,16")
    sp.add_argument("--csv", help="per-run q values")

    sp = add("urns", cmd_urns, "two-slot urn occupancy", seed=True)
    sp.add_argument("--a", type=int)
    sp.add_argument("--b", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--a-frac", type=float)
    sp.add_argument("--b-frac", type=float)
    return p


def dispatch(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _resolve_seed(args)
        if hasattr(args, "jobs") and args.jobs is None:
            args.jobs = _default_jobs()
        doc = args.func(args)
        code = EXIT_OK
    except CertificateFailed as exc:
        doc, code = exc.args[0], EXIT_CERT
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"modcert {args.subcommand}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out = {"config": _config(args), "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
           "version": __version__}
    out.update(doc)
    _write_json(out, args.out)
    return code


def main():
    sys.exit(dispatch())
