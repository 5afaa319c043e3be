"""Command-line front end: experiments in, CSV + JSON manifests out.

Every subcommand writes one or more CSV files (comma separated, header
row, LF endings, floats at 17 significant digits so they round-trip) and
a JSON run manifest recording inputs, seeds, tolerances, package version
and wall time.  Numeric parameters may come from a flat key=value config
file; command-line flags override file values.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .kernels import (KernelSpec, NumericsError, complete_monotonicity_report,
                      coupling_tilde, sliced_kernel)
from .geometry import set_from_json, set_to_json

SCHEMA_VERSION = 1


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _write_manifest(outdir, command, params, t0, extra=None):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "package_version": __version__,
        "parameters": params,
        "wall_time_s": time.time() - t0,
    }
    if extra:
        doc.update(extra)
    path = Path(outdir) / f"{command.replace('-', '_')}_manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _floats(text):
    return [float(v) for v in str(text).split(",") if v != ""]


def _ints(text):
    return [int(v) for v in str(text).split(",") if v != ""]


class ConfigError(Exception):
    pass


def _load_config(path):
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        k, v = line.split("=", 1)
        values[k.strip().replace("-", "_")] = v.strip()
    return values


def _params_for(args, d=None):
    from .stripes1d import rescale_params_for
    return rescale_params_for(args.M, d=d or args.d)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_kernel(args, outdir):
    spec = KernelSpec(args.d, args.mu)
    ts = np.geomspace(args.t_min, args.t_max, args.num)
    rows = [(t, sliced_kernel(spec, t)) for t in ts]
    _write_csv(outdir / "kernel_sliced.csv", ["t", "khat"], rows)
    rep = complete_monotonicity_report(spec, ts[ts >= 0.05], args.n_max,
                                       tol=args.tolerance)
    _write_csv(outdir / "kernel_monotonicity.csv",
               ["t", "n", "derivative", "signed", "passes"],
               [(r.t, r.n, r.value, r.signed, r.passes) for r in rep.rows])
    return {"all_pass": rep.all_pass}


def cmd_stripes(args, outdir):
    from .stripes1d import (periodic_stripe_energy_rescaled,
                            periodic_stripe_energy_unrescaled)
    params = _params_for(args)
    hs = np.linspace(args.h_min, args.h_max, args.num)
    rows = [(h, periodic_stripe_energy_unrescaled(h * args.M, args.M, d=args.d),
             periodic_stripe_energy_rescaled(h, params)) for h in hs]
    _write_csv(outdir / "stripes_energy.csv",
               ["h_over_M", "e_unrescaled", "e_rescaled"], rows)
    return {"M": args.M}


def cmd_optimal_width(args, outdir):
    from .stripes1d import optimal_width
    rows = []
    for M in _floats(args.M_list):
        h, e = optimal_width(M, d=args.d)
        rows.append((M, h, h / M, e, math.log(-e) / M))
    _write_csv(outdir / "optimal_width.csv",
               ["M", "h_star", "h_star_over_M", "e_star", "log_e_over_M"], rows)
    return {"M_list": _floats(args.M_list)}


def cmd_energy(args, outdir):
    from .energy_nd import functional_rescaled, functional_unrescaled
    st = set_from_json(Path(args.set).read_text())
    if args.unrescaled:
        J = args.J if args.J is not None else coupling_tilde(
            KernelSpec(args.d, 1.0), args.M)
        bd = functional_unrescaled(st, J, model_d=args.d, window=args.M)
    else:
        bd = functional_rescaled(st, _params_for(args),
                                 directions=args.directions)
    (outdir / "energy.json").write_text(bd.to_json() + "\n")
    rows = [("perimeter_term", bd.perimeter_term),
            ("nonlocal_term", bd.nonlocal_term), ("total", bd.total)]
    if bd.per_direction:
        for i, (g, ii) in enumerate(bd.per_direction):
            rows += [(f"g_{i}", g), (f"i_{i}", ii)]
    _write_csv(outdir / "energy.csv", ["quantity", "value"], rows)
    return {"total": bd.total}


def cmd_decompose(args, outdir):
    from .energy_nd import local_energy_total
    from .geometry import GridSet
    st = set_from_json(Path(args.set).read_text())
    params = _params_for(args)
    rset = st.to_rect_union() if isinstance(st, GridSet) else st
    L = rset.L
    nz = args.field_grid
    rows = []
    centers = (np.arange(nz) + 0.5) * (L / nz)
    for z0 in centers:
        for z1 in centers:
            f = local_energy_total(rset, ([z0, z1], args.l), params)
            rows.append((z0, z1, f))
    _write_csv(outdir / "local_energy_field.csv", ["z_1", "z_2", "f_bar"], rows)
    return {"cube_side": args.l, "grid": nz}


def cmd_average_check(args, outdir):
    from .energy_nd import averaging_identity_check
    st = set_from_json(Path(args.set).read_text())
    params = _params_for(args)
    chk = averaging_identity_check(st, params, args.l, n_samples=args.samples,
                                   seed=args.seed, method=args.method)
    _write_csv(outdir / "average_check.csv",
               ["lhs", "rhs", "gap", "functional_total", "lower_bound_ok"],
               [(chk.lhs, chk.rhs, chk.gap, chk.functional_total,
                 chk.lower_bound_ok)])
    return {"gap": chk.gap}


def cmd_compare(args, outdir):
    from .search import compare_candidates
    params = _params_for(args)
    L = 2 * args.k * params.h_tilde
    ranked = compare_candidates(params, L, n=args.n)
    _write_csv(outdir / "compare.csv", ["rank", "name", "energy", "kind"],
               [(i, r.name, r.energy, r.kind) for i, r in enumerate(ranked)])
    return {"winner": ranked[0].name}


def cmd_anneal(args, outdir):
    from .search import (AnnealSchedule, anneal, stripe_formation_run,
                         stripiness)
    params = _params_for(args)
    L = 2 * args.k * params.h_tilde
    summary = []
    for seed in _ints(args.seeds):
        if args.protocol == "stripe-formation":
            res = stripe_formation_run(params, L, args.n, seed,
                                       engine=args.engine or None,
                                       check_every=args.check_every)
        else:
            sched = AnnealSchedule(t_initial=args.t0, cooling=args.cooling,
                                   sweeps=args.sweeps,
                                   block_prob=args.block_prob, seed=seed)
            res = anneal(params, L, args.n, sched, engine=args.engine or None,
                         check_every=args.check_every)
        d = stripiness(res, params)
        _write_csv(outdir / f"anneal_trace_seed{seed}.csv",
                   ["move_index", "energy", "best_energy", "temperature"],
                   list(zip(res.move_indices, res.sweep_energies,
                            res.best_energies, res.temperatures)))
        (outdir / f"anneal_final_seed{seed}.json").write_text(
            set_to_json(res.grid) + "\n")
        summary.append((seed, res.energy, d.value, d.axis, res.engine,
                        res.consistency_max_err))
    _write_csv(outdir / "anneal_summary.csv",
               ["seed", "energy", "stripe_distance", "axis", "engine",
                "consistency_max_err"], summary)
    return {"seeds": _ints(args.seeds)}


def cmd_scan_period(args, outdir):
    from .search import width_vs_period_scan
    params = _params_for(args)
    L_list = [f * params.h_tilde for f in _floats(args.L_factors)]
    rows = width_vs_period_scan(params, L_list)
    _write_csv(outdir / "scan_period.csv",
               ["L", "k", "h_opt", "gap", "fitted_C"],
               [(r.L, r.k, r.h_opt, r.gap, r.fitted_C) for r in rows])
    return {"gaps": [r.gap for r in rows]}


def cmd_gamma(args, outdir):
    from .gamma_limit import (normalization_constant, nonlocal_perimeter,
                              slab_convergence, tilted_interface_report)
    betas = _floats(args.beta)
    rows = []
    for b in betas:
        for L in _floats(args.L):
            c = normalization_constant(args.d, b, L)
            rows.append((b, L, c, c / b ** 3))
    _write_csv(outdir / "gamma_constant.csv",
               ["beta", "L", "C_beta_L", "C_over_beta3"], rows)
    if args.set:
        st = set_from_json(Path(args.set).read_text())
        from .geometry import per1
        target = per1(st)
        rows = []
        for b in betas:
            p = nonlocal_perimeter(st, b)
            rows.append((b, st.L, normalization_constant(st.d, b, st.L), p,
                         target, abs(p - target)))
        _write_csv(outdir / "gamma_perimeter.csv",
                   ["beta", "L", "C_beta_L", "P_beta", "per1", "abs_error"],
                   rows)
    else:
        lad = slab_convergence(betas, _floats(args.L)[0], d=args.d)
        _write_csv(outdir / "gamma_perimeter.csv",
                   ["beta", "L", "C_beta_L", "P_beta", "per1", "abs_error"],
                   [(r.beta, _floats(args.L)[0], math.nan, r.p_beta, r.per1,
                     r.abs_error) for r in lad])
    if args.tilted:
        rows = []
        for th in _floats(args.theta_deg):
            for b in betas:
                rep = tilted_interface_report(math.radians(th), b, args.epsilon)
                rows.append((th, b, rep.term_axis0, rep.term_axis1,
                             rep.cross_term, rep.total, rep.per_unit_length,
                             rep.expected_limit, rep.cross_ratio,
                             rep.cross_ratio_raw))
        _write_csv(outdir / "gamma_tilted.csv",
                   ["theta_deg", "beta", "term_axis0", "term_axis1",
                    "cross_term", "total", "per_unit_length", "expected_limit",
                    "cross_ratio", "cross_ratio_raw"], rows)
    return {"betas": betas}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _build_parser():
    ap = argparse.ArgumentParser(
        prog="yukstripe",
        description="Stripe-phase numerics for the perimeter + screened-Coulomb "
                    "pattern functional.")
    ap.add_argument("--config", help="flat key=value parameter file; flags override")
    ap.add_argument("--out", default=".", help="output directory")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, M=True):
        p.add_argument("--d", type=int, default=3, help="model dimension")
        if M:
            p.add_argument("--M", type=float, default=12.0,
                           help="coupling window of the rescaled model")

    p = sub.add_parser("kernel", help="tabulate the sliced kernel and its "
                                      "monotonicity report")
    common(p, M=False)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--t-min", type=float, default=1e-3)
    p.add_argument("--t-max", type=float, default=20.0)
    p.add_argument("--num", type=int, default=50)
    p.add_argument("--n-max", type=int, default=6)
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("stripes", help="stripe energy sweep over widths")
    common(p)
    p.add_argument("--h-min", type=float, default=0.5)
    p.add_argument("--h-max", type=float, default=1.5)
    p.add_argument("--num", type=int, default=101)
    p.set_defaults(func=cmd_stripes)

    p = sub.add_parser("optimal-width", help="optimal stripe width trend table")
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--M", dest="M_list", default="6,8,10,12,14",
                   help="comma-separated window values")
    p.set_defaults(func=cmd_optimal_width)

    p = sub.add_parser("energy", help="evaluate a serialized set")
    common(p)
    p.add_argument("--set", required=True)
    p.add_argument("--unrescaled", action="store_true")
    p.add_argument("--J", type=float, default=None)
    p.add_argument("--directions", action="store_true")
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("decompose", help="local energy field on a z-grid")
    common(p)
    p.add_argument("--set", required=True)
    p.add_argument("--l", type=float, default=0.8, help="cube side")
    p.add_argument("--field-grid", type=int, default=6)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("average-check", help="averaging identity check")
    common(p)
    p.add_argument("--set", required=True)
    p.add_argument("--l", type=float, default=0.8)
    p.add_argument("--method", default="cells", choices=["cells", "grid", "mc"])
    p.add_argument("--samples", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_average_check)

    p = sub.add_parser("compare", help="rank candidate patterns")
    common(p)
    p.add_argument("--k", type=int, default=2, help="period = 2k optimal widths")
    p.add_argument("--n", type=int, default=48, help="grid resolution for "
                                                     "rasterized candidates")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("anneal", help="simulated annealing over torus grids")
    common(p)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--n", type=int, default=48)
    p.add_argument("--protocol", default="single",
                   choices=["single", "stripe-formation"],
                   help="one cooling pass, or the tuned reheat-cycle "
                        "protocol that reaches lamellae")
    p.add_argument("--t0", type=float, default=260.0)
    p.add_argument("--cooling", type=float, default=0.988)
    p.add_argument("--sweeps", type=int, default=170)
    p.add_argument("--block-prob", type=float, default=0.15)
    p.add_argument("--seeds", default="1,2,3")
    p.add_argument("--engine", default="", choices=["", "cython", "numpy"])
    p.add_argument("--check-every", type=int, default=1000)
    p.set_defaults(func=cmd_anneal)

    p = sub.add_parser("scan-period", help="optimal width vs period table")
    common(p)
    p.add_argument("--L-factors", default="2,4,8",
                   help="periods in units of the optimal width")
    p.set_defaults(func=cmd_scan_period)

    p = sub.add_parser("gamma", help="double-kernel limit battery")
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--beta", default="4,8,16,32,64")
    p.add_argument("--L", default="1,2,4")
    p.add_argument("--set", default=None)
    p.add_argument("--tilted", action="store_true")
    p.add_argument("--theta-deg", default="0,22.5,45")
    p.add_argument("--epsilon", type=float, default=0.25)
    p.set_defaults(func=cmd_gamma)

    return ap


def main(argv=None):
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        if exc.code not in (0, None):
            raise SystemExit(2)
        raise
    try:
        if args.config:
            values = _load_config(args.config)
            # flags explicitly given on the command line win; config fills
            # the rest
            given = {a.lstrip("-").replace("-", "_").split("=")[0]
                     for a in (argv if argv is not None else sys.argv[1:])
                     if a.startswith("--")}
            for key, raw in values.items():
                if not hasattr(args, key) and hasattr(args, key + "_list"):
                    key = key + "_list"
                if key in given or key.removesuffix("_list") in given \
                        or not hasattr(args, key):
                    continue
                cur = getattr(args, key)
                if isinstance(cur, bool):
                    setattr(args, key, raw.lower() in ("1", "true", "yes"))
                elif isinstance(cur, int):
                    setattr(args, key, int(raw))
                elif isinstance(cur, float):
                    setattr(args, key, float(raw))
                else:
                    setattr(args, key, raw)
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
    except (ConfigError, OSError, ValueError) as exc:
        print(json.dumps({"error": "config", "message": str(exc)}))
        return 2
    t0 = time.time()
    try:
        extra = args.func(args, outdir)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(json.dumps({"error": "config", "message": str(exc)}))
        return 2
    except (NumericsError, ArithmeticError, RuntimeError) as exc:
        print(json.dumps({"error": "numerical", "message": str(exc)}))
        return 3
    params = {k: v for k, v in vars(args).items()
              if k not in ("func", "config") and not k.startswith("_")}
    params = {k: (v if isinstance(v, (int, float, str, bool, type(None)))
                  else str(v)) for k, v in params.items()}
    _write_manifest(args.out, args.command, params, t0, extra=extra)
    return 0


if __name__ == "__main__":
    sys.exit(main())
