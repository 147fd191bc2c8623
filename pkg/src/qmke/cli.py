"""Command-line front end.

Each subcommand writes one table (CSV or JSON) preceded by run metadata.
Exit status: 0 on success, 1 on solver failure (single solve) or a failed
oracle check, 2 on invalid parameters.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .algebra import HermitianOp, StateParams, as_bloch, state_from_angles
from .errors import MKEError
from .experiments import (
    REFINE_THETAS,
    SweepGrid,
    fidelity_ratio_surface,
    fidelity_surface,
    hamiltonian_distance_surface,
    min_fidelity_curve,
    oracle_check,
    purity_scatter,
)
from .solvers import MeasurementRecord, SolverConfig, mke_estimate, mke_pair

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

SOLVE_KEYS = ("theta", "phi", "mu", "s", "alpha", "bloch", "observable", "mean")
CONFIG_KEYS = ("constraint_tol", "max_iter", "purity_clamp", "mean_clamp")


class UsageError(Exception):
    pass


def default_seed():
    env = os.environ.get("MKE_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"MKE_SEED must be an integer, got {env!r}")


def _clean(value):
    """JSON-safe copy: NaN becomes null, numpy scalars become Python scalars."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return None if math.isnan(v) else v
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def render_csv(result):
    buf = io.StringIO()
    meta = dict(result.meta)
    timestamp = meta.pop("timestamp", None)
    for key, value in meta.items():
        buf.write(f"# {key}: {json.dumps(_clean(value), sort_keys=True)}\n")
    if timestamp is not None:
        buf.write(f"# timestamp: {timestamp}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(result.columns)
    for row in result.rows:
        writer.writerow([_fmt(row[c]) for c in result.columns])
    return buf.getvalue()


def render_json(result):
    doc = {"meta": _clean(result.meta), "rows": [_clean(r) for r in result.rows]}
    return json.dumps(doc, indent=2) + "\n"


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _format_for(args):
    if args.format:
        return args.format
    if args.out and args.out.endswith(".json"):
        return "json"
    return "csv"


def _write_result(result, args):
    fmt = _format_for(args)
    _emit(render_json(result) if fmt == "json" else render_csv(result), args.out)


def _solver_config(args):
    try:
        return SolverConfig(
            constraint_tol=args.constraint_tol,
            max_iter=args.max_iter,
            purity_clamp=args.purity_clamp,
            mean_clamp=args.mean_clamp,
        )
    except MKEError as exc:
        raise UsageError(str(exc))


def _angle(args, value):
    return math.radians(value) if args.degrees else value


def _check(cond, message):
    if not cond:
        raise UsageError(message)


def _check_mu(mu):
    _check(0.5 <= mu <= 1.0, f"mu must lie in [0.5, 1], got {mu!r}")


def _grid(args, mu=None):
    _check(args.n_theta >= 2 and args.n_s >= 2, "grids need at least two points per axis")
    _check(0 < args.s_max < 1, "s-max must lie in (0, 1)")
    phi = _angle(args, args.phi)
    _check(0 <= phi < 2 * math.pi, "phi must lie in [0, 2pi)")
    mu = args.mu if mu is None else mu
    _check_mu(mu)
    try:
        return SweepGrid.regular(mu, args.n_theta, args.n_s, args.s_max, phi, args.seed)
    except MKEError as exc:
        raise UsageError(str(exc))


def _meta_extras(result, args, cfg):
    result.meta["solver_config"] = {k: getattr(cfg, k) for k in CONFIG_KEYS}
    return result


# --- solve -----------------------------------------------------------------

def _solve_inputs(args):
    """Validated prior Bloch vector and observable."""
    if args.bloch is not None:
        try:
            tau = as_bloch(args.bloch, "bloch")
        except MKEError as exc:
            raise UsageError(str(exc))
    else:
        _check(args.theta is not None and args.mu is not None, "solve needs --theta and --mu (or --bloch)")
        _check(0 <= args.theta <= math.pi, "theta must lie in [0, pi]")
        _check(0 <= args.phi < 2 * math.pi, "phi must lie in [0, 2pi)")
        _check_mu(args.mu)
        tau = state_from_angles(StateParams(args.theta, args.phi, args.mu))
    if args.observable is not None:
        _check(args.mean is not None, "--observable requires --mean")
        a = HermitianOp(args.observable[0], args.observable[1:])
        _check(a.norm > 1e-14, "observable must not be proportional to the identity")
        lo, hi = a.c0 - a.norm, a.c0 + a.norm
        _check(lo <= args.mean <= hi, f"mean must lie in the spectrum range [{lo!r}, {hi!r}]")
        return tau, a, args.mean
    _check(args.s is not None, "solve needs --s (or --observable with --mean)")
    _check(-1 <= args.s <= 1, "s must lie in [-1, 1]")
    return tau, None, args.s


def _solve(args):
    if args.from_json:
        with open(args.from_json, encoding="utf-8") as fh:
            doc = json.load(fh)
        config = doc.get("meta", {}).get("config", doc)
        for key in SOLVE_KEYS + CONFIG_KEYS:
            if key in config:
                setattr(args, key, config[key])
        args.degrees = False
    elif args.degrees:
        if args.theta is not None:
            args.theta = math.radians(args.theta)
        args.phi = math.radians(args.phi)
    cfg = _solver_config(args)
    tau, a, mean = _solve_inputs(args)
    config = {k: getattr(args, k) for k in SOLVE_KEYS}
    config.update({k: getattr(cfg, k) for k in CONFIG_KEYS})
    meta = {"tool": "qmke", "version": __version__, "command": "solve", "config": _clean(config)}
    try:
        if a is None:
            m = MeasurementRecord.normal_form(mean, args.alpha)
            pair = mke_pair(tau, m, cfg)
        else:
            m, pair = mke_estimate(tau, a, mean, cfg)
    except MKEError as exc:
        rec = exc.to_record()
        rec["meta"] = meta
        sys.stdout.write(json.dumps(_clean(rec)) + "\n")
        return EXIT_FAILURE
    doc = {
        "meta": meta,
        "prior": _clean(tau),
        "normal_form": {"alpha": m.alpha, "mean_s": m.mean_s, "scale": m.scale},
        "exact": {"state": _clean(pair.exact.state), "lambda1": pair.exact.lambda1,
                  "lambda2": pair.exact.lambda2, "residual": pair.exact.residual,
                  "iterations": pair.exact.iterations},
        "approx": {"state": _clean(pair.approx.state), "lambda": pair.approx.lam},
        "fidelity": pair.fidelity,
        "purity_exact": pair.purity_exact,
        "purity_approx": pair.purity_approx,
        "K_exact": pair.k_exact,
        "K_approx": pair.k_approx,
    }
    _emit(json.dumps(_clean(doc), indent=2) + "\n", args.out)
    return EXIT_OK


# --- sweeps ------------------------------------------------------------------

def _sweep_fidelity(args):
    cfg = _solver_config(args)
    result = fidelity_surface(_grid(args), cfg, args.workers)
    _write_result(_meta_extras(result, args, cfg), args)
    return EXIT_OK


def _ratio_surface(args):
    cfg = _solver_config(args)
    result = fidelity_ratio_surface(_grid(args), cfg, args.workers)
    _write_result(_meta_extras(result, args, cfg), args)
    return EXIT_OK


def _ham_distance(args):
    cfg = _solver_config(args)
    _check(args.mu > 0.5, "ham-distance needs mu > 0.5")
    result = hamiltonian_distance_surface(_grid(args), cfg, args.workers)
    _write_result(_meta_extras(result, args, cfg), args)
    return EXIT_OK


def _min_fid_curve(args):
    cfg = _solver_config(args)
    if args.mu_values:
        mus = list(args.mu_values)
    else:
        _check(args.mu_step > 0, "mu-step must be positive")
        n = int(round((args.mu_max - args.mu_min) / args.mu_step)) + 1
        mus = [round(args.mu_min + i * args.mu_step, 12) for i in range(n)]
    for mu in mus:
        _check_mu(mu)
    grid = _grid(args, mu=mus[0])
    thetas = [_angle(args, t) for t in args.refine_thetas] if args.refine_thetas is not None else REFINE_THETAS
    result = min_fidelity_curve(mus, grid, cfg, thetas, args.workers)
    _write_result(_meta_extras(result, args, cfg), args)
    return EXIT_OK


def _purity_scatter(args):
    cfg = _solver_config(args)
    _check(args.samples >= 1, "samples must be at least 1")
    theta_range = tuple(_angle(args, t) for t in args.theta_range)
    try:
        result = purity_scatter(args.samples, tuple(args.mu_range), theta_range, tuple(args.s_range),
                                args.seed, cfg, args.mirror_theta, args.mirror_s, workers=args.workers)
    except MKEError as exc:
        raise UsageError(str(exc))
    _write_result(_meta_extras(result, args, cfg), args)
    return EXIT_OK


def _oracle_check(args):
    cfg = _solver_config(args)
    _check(args.instances >= 1, "instances must be at least 1")
    _check(args.resolution >= 8, "resolution must be at least 8")
    result = oracle_check(args.instances, args.resolution, args.seed, cfg, workers=args.workers)
    _write_result(_meta_extras(result, args, cfg), args)
    ok = result.meta["all_dominated"] and result.meta["all_exact_beats_approx"]
    return EXIT_OK if ok else EXIT_FAILURE


# --- parser ------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--out", "-o", default=None, help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=None,
                   help="output format (default: json for *.json paths, else csv)")
    p.add_argument("--degrees", action="store_true", help="angles on the command line are in degrees")
    p.add_argument("--workers", type=int, default=1, help="worker processes for sweeps")
    p.add_argument("--constraint-tol", type=float, default=SolverConfig.constraint_tol)
    p.add_argument("--max-iter", type=int, default=SolverConfig.max_iter)
    p.add_argument("--purity-clamp", type=float, default=SolverConfig.purity_clamp)
    p.add_argument("--mean-clamp", type=float, default=SolverConfig.mean_clamp)


def _add_grid(p, mu_required=True):
    if mu_required:
        p.add_argument("--mu", type=float, required=True, help="purity of the prior")
    p.add_argument("--phi", type=float, default=0.0, help="azimuth of the prior")
    p.add_argument("--n-theta", type=int, default=101)
    p.add_argument("--n-s", type=int, default=101)
    p.add_argument("--s-max", type=float, default=0.999, help="outermost |s| grid value")


def build_parser():
    parser = argparse.ArgumentParser(prog="qmke", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qmke {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="exact and approximate estimates for one prior and datum")
    _add_common(p)
    p.add_argument("--theta", type=float)
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--mu", type=float)
    p.add_argument("--bloch", type=float, nargs=3, metavar=("T1", "T2", "T3"),
                   help="prior Bloch vector (instead of --theta/--phi/--mu)")
    p.add_argument("--s", type=float, help="measured <sigma_3>")
    p.add_argument("--alpha", type=float, default=0.0, help="identity offset of the observable")
    p.add_argument("--observable", type=float, nargs=4, metavar=("A0", "A1", "A2", "A3"),
                   help="general observable a0 I + a.sigma (use with --mean)")
    p.add_argument("--mean", type=float, help="measured mean value of --observable")
    p.add_argument("--from-json", help="rerun the configuration recorded in a previous solve output")
    p.set_defaults(func=_solve)

    for name, func, helptext in (
        ("sweep-fidelity", _sweep_fidelity, "fidelity surface over (theta, s)"),
        ("ratio-surface", _ratio_surface, "fidelity-to-prior ratio surface over (theta, s)"),
        ("ham-distance", _ham_distance, "Hamiltonian trace-distance surface over (theta, s)"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        _add_grid(p)
        p.add_argument("--seed", type=int, default=None)
        p.set_defaults(func=func)

    p = sub.add_parser("min-fid-curve", help="minimum fidelity as a function of purity")
    _add_common(p)
    _add_grid(p, mu_required=False)
    p.add_argument("--mu-values", type=float, nargs="+")
    p.add_argument("--mu-min", type=float, default=0.5)
    p.add_argument("--mu-max", type=float, default=0.9)
    p.add_argument("--mu-step", type=float, default=0.05)
    p.add_argument("--refine-thetas", type=float, nargs="*", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_min_fid_curve)

    p = sub.add_parser("purity-scatter", help="purities of both estimates on random samples")
    _add_common(p)
    p.add_argument("--samples", type=int, default=5000)
    p.add_argument("--mu-range", type=float, nargs=2, default=(0.5, 0.6))
    p.add_argument("--theta-range", type=float, nargs=2, default=(0.0, math.pi))
    p.add_argument("--s-range", type=float, nargs=2, default=(-0.999, 0.999))
    p.add_argument("--mirror-theta", action="store_true", help="reflect theta -> pi - theta with probability 1/2")
    p.add_argument("--mirror-s", action="store_true", help="reflect s -> -s with probability 1/2")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_purity_scatter)

    p = sub.add_parser("oracle-check", help="brute-force check that the exact solver minimises K")
    _add_common(p)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--resolution", type=int, default=400)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_oracle_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "seed", 0) is None:
            args.seed = default_seed()
        return args.func(args)
    except UsageError as exc:
        sys.stdout.write(json.dumps({"error": "usage", "message": str(exc)}) + "\n")
        sys.stderr.write(f"qmke {args.command}: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
