"""Command-line entry point.

    vpfp equilibrium CONFIG --out DIR
    vpfp run         CONFIG --out DIR [--plot-script] [--save-state]
    vpfp sweep       CONFIG --out DIR
    vpfp asymptotics CONFIG --out DIR
    vpfp diagnose    CONFIG --out DIR

Exit codes: 0 success, 1 configuration error, 2 numerical abort,
3 diagnose found a failing identity.  The sweep worker count is read from
VPFP_WORKERS (default 1).
"""
import argparse
import csv
import json
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__, kernels
from .asymptotics import diffusion_limit_study, regime_study
from .config import (ConfigError, build_discretization, build_equilibrium, build_initial,
                     build_solver_config, config_hash, jsonable, load_config, parse_config, sweep_cells)
from .diagnostics import (energy_identity_residuals, fit_decay_rate, lyapunov_violations,
                          residual_orders, write_plot_script, write_samples_csv)
from .equilibrium import (ConvergenceError, DensityField, evaluate_J, save_density,
                          verify_equilibrium_bounds)
from .field import write_macro_csv
from .phase_space import (Discretization, InitialDataSpec, apply_A, apply_Astar, apply_B,
                          apply_C, apply_FP, inner_product, make_initial_data, norms_bundle, save_state)
from .solver import NumericalAbort, SolverConfig, run

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_DIAGNOSE = 0, 1, 2, 3

DIAGNOSE_DEFAULT = """
tau = 0.5
delta = 10.0
n_x = 16
n_v = 10
rho_star.kind = "cosine"
rho_star.eps = 0.3
diagnose.states = 5
"""


def _dump(obj, path):
    with open(path, "w") as fh:
        json.dump(jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest(out, cfg, outputs, wall):
    _dump({"config_hash": config_hash(cfg), "seed": cfg["seed"], "version": __version__,
           "kernel_backend": kernels.BACKEND, "outputs": sorted(outputs), "wall_time_s": wall},
          os.path.join(out, "manifest.json"))


# subcommands ---------------------------------------------------------------

def cmd_equilibrium(cfg, out, args):
    eq = build_equilibrium(cfg)
    save_density(DensityField(eq.rho), os.path.join(out, "rho_inf.txt"))
    with open(os.path.join(out, "phi_inf.txt"), "w") as fh:
        fh.write(f"{eq.n} {eq.n}\n")
        np.savetxt(fh, eq.phi, fmt="%.17g")
    rep = verify_equilibrium_bounds(eq)
    summary = {"iterations": eq.iterations, "residual": eq.residual,
               "J": evaluate_J(eq.phi, eq.rho_star, eq.delta),
               "mass": float(np.mean(eq.rho)),
               "bounds": [{"p": str(p), "lhs": a, "rhs": b} for p, a, b in rep.rows()],
               "bounds_hold": rep.holds}
    _dump(summary, os.path.join(out, "equilibrium.json"))
    return ["rho_inf.txt", "phi_inf.txt", "equilibrium.json"]


def _run_one(cfg, out, plot_script=False, save_final=False):
    eq = build_equilibrium(cfg)
    disc = build_discretization(cfg)
    h0 = build_initial(cfg, disc, eq)
    scfg = build_solver_config(cfg)
    last = {}

    def keep_last(t, hhat, prop):
        last["hhat"], last["prop"] = hhat, prop

    traj = run(h0, scfg, eq, callback=keep_last if save_final else None)
    outputs = ["functionals.csv", "macros_final.csv", "summary.json"]
    write_samples_csv(traj.samples, os.path.join(out, "functionals.csv"))
    write_macro_csv(traj.macros[-1], os.path.join(out, "macros_final.csv"))
    if plot_script:
        write_plot_script("functionals.csv", os.path.join(out, "functionals.gp"))
        outputs.append("functionals.gp")
    if save_final:
        save_state(last["prop"].to_state(last["hhat"]), os.path.join(out, "final_state.txt"))
        outputs.append("final_state.txt")
    nh = np.sqrt(traj.series("norm_h2"))
    rate = None
    # runs shorter than tau fall back to fitting the whole record
    for window in (None, (traj.times[0], traj.times[-1])):
        try:
            rate = fit_decay_rate(traj.times, nh, tau=scfg.tau, window=window).rate
            break
        except ValueError:
            continue
    summary = {
        "config_hash": config_hash(cfg), "seed": cfg["seed"], "tau": scfg.tau,
        "delta": scfg.delta, "mode": scfg.mode, "dt": traj.dt, "n_steps": traj.n_steps,
        "n_records": len(traj.times), "final_time": traj.times[-1],
        "final_norm": float(nh[-1]), "initial_norm": float(nh[0]), "fitted_rate": rate,
        "mass_drift": float(np.max(np.abs(np.array(traj.mass) - traj.mass[0]))),
        "max_tail_mass": float(np.max(traj.tail)),
        "lyapunov_violations": len(lyapunov_violations(traj.samples, scfg.tau)),
        "hypo": {"beta": list(scfg.hypo.beta), "gamma": list(scfg.hypo.gamma),
                 "c0": scfg.hypo.c0, "regime": scfg.hypo.regime},
        "kernel_backend": kernels.BACKEND,
    }
    _dump(summary, os.path.join(out, "summary.json"))
    return outputs, summary


def cmd_run(cfg, out, args):
    outputs, _ = _run_one(cfg, out, args.plot_script, args.save_state)
    return outputs


def _sweep_cell(arg):
    idx, cell, out = arg
    name = f"cell_{idx:03d}"
    d = os.path.join(out, name)
    os.makedirs(d, exist_ok=True)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            _, summary = _run_one(cell, d)
        return {"cell": name, "tau": cell["tau"], "delta": cell["delta"], "seed": cell["seed"],
                "status": "ok", "fitted_rate": summary["fitted_rate"],
                "final_norm": summary["final_norm"]}
    except (NumericalAbort, ConvergenceError, ValueError) as exc:
        return {"cell": name, "tau": cell["tau"], "delta": cell["delta"], "seed": cell["seed"],
                "status": "failed", "error": str(exc)}


def cmd_sweep(cfg, out, args):
    cells = sweep_cells(cfg)
    workers = max(1, int(os.environ.get("VPFP_WORKERS", "1")))
    jobs = [(i, c, out) for i, c in enumerate(cells)]
    if workers == 1:
        results = [_sweep_cell(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_cell, jobs))
    _dump({"cells": results, "n_failed": sum(r["status"] != "ok" for r in results)},
          os.path.join(out, "sweep_summary.json"))
    cols = ("cell", "tau", "delta", "seed", "status", "fitted_rate", "final_norm")
    with open(os.path.join(out, "sweep_table.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(cols)
        for r in results:
            wr.writerow(["" if r.get(c) is None else r[c] for c in cols])
    return ["sweep_summary.json", "sweep_table.csv"] + [r["cell"] for r in results]


def cmd_asymptotics(cfg, out, args):
    eq = build_equilibrium(cfg)
    disc = build_discretization(cfg)
    h0 = build_initial(cfg, disc, eq)
    regime = cfg["asymptotics.regime"]
    taus = [float(t) for t in cfg["asymptotics.tau_list"]]
    if regime == "ii":
        rep = diffusion_limit_study(taus, h0, eq, horizon=cfg["asymptotics.horizon"] or 0.3,
                                    record_ds=min(cfg["asymptotics.record_ds"], 0.005),
                                    cfl=cfg["cfl"])
    elif regime in ("iii", "iv", "v"):
        win = cfg["asymptotics.window"]
        rep = regime_study(regime, taus, h0, eq, horizon=cfg["asymptotics.horizon"],
                           record_ds=cfg["asymptotics.record_ds"],
                           window=tuple(win) if win else None, cfl=cfg["cfl"])
    else:
        raise ConfigError(f"asymptotics.regime must be ii, iii, iv or v (got {regime!r})")
    rep.to_json(os.path.join(out, "regime_report.json"))
    return ["regime_report.json"]


def run_diagnose(cfg):
    """Operator identities on random states and energy-identity residual orders."""
    eq = build_equilibrium(cfg)
    n_x, n_v = cfg["n_x"], cfg["n_v"]
    tol = cfg["diagnose.tol"]
    disc = Discretization(n_x, n_v, cfg["dealias"])
    worst = {"commutator_A_Astar": 0.0, "commutator_A_B": 0.0, "commutator_B_C": 0.0,
             "B_skew": 0.0, "number_operator_norm": 0.0}
    for s in range(cfg["diagnose.states"]):
        spec = InitialDataSpec(seed=cfg["seed"] + s, spatial_band=max(1, n_x // 4 - 1),
                               hermite_band=n_v - 2)
        h = make_initial_data(spec, disc, eq)
        # keep the top Hermite index empty so that truncation does not enter
        c = h.coeffs.copy()
        c[-1, :] = 0
        c[:, -1] = 0
        h = h.like(c)
        A, C = apply_A(h), apply_C(h)
        scale = np.sqrt(sum(np.sum(x.coeffs ** 2) for x in A + C))
        for i in range(2):
            for j in range(2):
                lhs = apply_A(apply_Astar(h)[j])[i].coeffs - apply_Astar(apply_A(h)[i])[j].coeffs
                ref = h.coeffs if i == j else 0.0
                err = np.linalg.norm(lhs - ref) / np.linalg.norm(h.coeffs)
                worst["commutator_A_Astar"] = max(worst["commutator_A_Astar"], err)
        Bh = apply_B(h, eq)
        for i in range(2):
            lhs = apply_A(Bh)[i].coeffs - apply_B(A[i], eq).coeffs
            err = np.linalg.norm(lhs - C[i].coeffs) / scale
            worst["commutator_A_B"] = max(worst["commutator_A_B"], err)
            lhs = apply_B(C[i], eq).coeffs - apply_C(Bh)[i].coeffs
            rhs = sum(disc.grid.product(eq.hess_phi[i, j], A[j].coeffs) for j in range(2))
            err = np.linalg.norm(lhs - rhs) / scale
            worst["commutator_B_C"] = max(worst["commutator_B_C"], err)
        skew = abs(inner_product(Bh, h, eq)) / np.sqrt(inner_product(Bh, Bh, eq)
                                                       * inner_product(h, h, eq))
        worst["B_skew"] = max(worst["B_skew"], skew)
        nb = norms_bundle(h, eq)
        direct = inner_product(apply_FP(h), apply_FP(h), eq)
        worst["number_operator_norm"] = max(worst["number_operator_norm"],
                                            abs(direct - nb.norm_AsAh2) / nb.norm_AsAh2)
    checks = [{"check": k, "max_error": v, "tol": tol, "pass": bool(v <= tol)}
              for k, v in worst.items()]

    # energy identities: residuals must shrink at second order under step halving
    small = dict(cfg, **{"n_x": 16})
    eq_t = build_equilibrium(small)
    disc_t = Discretization(16, n_v, True)
    h0 = make_initial_data(InitialDataSpec(seed=cfg["seed"], spatial_band=1, hermite_band=2),
                           disc_t, eq_t)
    reports = []
    for lev in range(3):
        scfg = SolverConfig(tau=float(cfg["tau"]), delta=float(cfg["delta"]),
                            dt=0.004 / 2 ** lev, t_end=0.2, record_every=4, mode="nonlinear")
        reports.append(energy_identity_residuals(run(h0, scfg, eq_t)))
    orders = residual_orders(reports)[-1]
    for k, o in enumerate(orders):
        checks.append({"check": f"energy_identity_{k + 1}_order", "value": float(o),
                       "tol": 0.3, "pass": bool(abs(o - 2.0) <= 0.3)})
    return checks


def cmd_diagnose(cfg, out, args):
    checks = run_diagnose(cfg)
    _dump({"checks": checks, "all_pass": all(c["pass"] for c in checks)},
          os.path.join(out, "diagnose.json"))
    for c in checks:
        print(f"{'PASS' if c['pass'] else 'FAIL'} {c['check']}")
    if not all(c["pass"] for c in checks):
        raise DiagnoseFailure()
    return ["diagnose.json"]


class DiagnoseFailure(Exception):
    pass


COMMANDS = {"equilibrium": cmd_equilibrium, "run": cmd_run, "sweep": cmd_sweep,
            "asymptotics": cmd_asymptotics, "diagnose": cmd_diagnose}


def build_parser():
    p = argparse.ArgumentParser(prog="vpfp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-q", "--quiet", action="store_true", help="do not echo the configuration")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", nargs="?" if name == "diagnose" else None,
                        help="TOML configuration file")
        sp.add_argument("--out", default=".", help="output directory")
        if name == "run":
            sp.add_argument("--plot-script", action="store_true",
                            help="also write a gnuplot script for the functionals")
            sp.add_argument("--save-state", action="store_true",
                            help="also write the final state grid file")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else parse_config(DIAGNOSE_DEFAULT)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.quiet:
        print("config: " + " ".join(f"{k}={cfg[k]!r}" for k in sorted(cfg) if cfg[k] is not None))
    os.makedirs(args.out, exist_ok=True)
    t0 = time.perf_counter()
    try:
        outputs = COMMANDS[args.command](cfg, args.out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalAbort, ConvergenceError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DiagnoseFailure:
        return EXIT_DIAGNOSE
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _manifest(args.out, cfg, outputs, time.perf_counter() - t0)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
