"""Command line entry points.

Subcommands:

    simulate <config.json>            run and persist a trajectory
    construct <config.json>           emit a constructed-data sequence table
    verify <run_dir> --battery NAME   run checks against a stored run
    sweep <config.json> --ks ...      concurrent runs over k or N
    constants <n> <kappa> <p>         print the derived exponents/windows
    plot <run_dir>                    emit plot scripts (no rendering)

Errors exit nonzero with a single `error: ...` line on stderr.  Output
directories resolve against KSLAB_OUT when set.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import (
    ExperimentConfig,
    build_initial_state,
    config_hash,
    lemma14_recipe_from,
    load_config,
    output_root,
)
from .functionals import param_window, theta_exponent
from .grid import build_grid
from .initial_data import lemma14_pair
from .io import load_run, persist_run, write_checks, write_snapshot
from .solver import run as run_solver
from .verifier import (
    StateCorpus,
    check_conservation,
    check_energy_inequality,
    check_lemma14_sequence,
    inequality_suite,
    trajectory_battery,
)

__all__ = ["main"]


def _resolve_out(cfg: ExperimentConfig, override: str | None) -> str:
    d = override or cfg.output.get("directory") or cfg.name
    if not os.path.isabs(d):
        d = os.path.join(output_root(), d)
    return d


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    grid = cfg.build_grid()
    state = build_initial_state(cfg, grid)
    traj = run_solver(state, cfg.solver)
    out = _resolve_out(cfg, args.out)
    persist_run(traj, cfg, out)
    v = traj.verdict
    print(f"{cfg.name}: {v.outcome} t_detect={v.t_detect} "
          f"t_extrapolated={v.t_extrapolated} dir={out}")
    return 0


def _cmd_construct(args) -> int:
    cfg = load_config(args.config)
    grid = cfg.build_grid()
    init = cfg.initial
    if init.get("kind") != "lemma14":
        raise ValueError("construct needs initial.kind = lemma14")
    ks = init.get("ks")
    if ks is None:
        ks = [int(init["k"])]
    ks = sorted({int(k) for k in ks})
    recipe = lemma14_recipe_from(init, grid)
    data = [lemma14_pair(recipe, k) for k in ks]
    out = _resolve_out(cfg, args.out)
    os.makedirs(out, exist_ok=True)
    h = config_hash(cfg)
    cols = ("k", "r_k", "log_eta", "margin", "a", "b", "scale", "mass",
            "F0", "uv_over_k", "du_lp", "dv_w12")
    with open(os.path.join(out, "sequence.csv"), "w", encoding="utf-8") as fh:
        fh.write(f"# config_hash={h}\n")
        fh.write(",".join(cols) + "\n")
        for d in data:
            fh.write(",".join(
                "%d" % d.k if c == "k" else "%.17g" % getattr(d, c)
                for c in cols) + "\n")
    for d in data:
        from .functionals import StatePair
        write_snapshot(StatePair(d.u0, d.v0),
                       os.path.join(out, f"datum_k{d.k:03d}.txt"), h)
    if len(data) >= 3:
        try:
            rep = check_lemma14_sequence(data, tail_start=int(
                cfg.checks.get("tail_start", 10)))
            print(rep)
        except ValueError as exc:
            print(f"sequence check skipped: {exc}")
    print(f"{cfg.name}: wrote {len(data)} data to {out}")
    return 0


_BATTERIES = ("trajectory", "conservation", "energy", "suite")


def _cmd_verify(args) -> int:
    run_data = load_run(args.run_dir)
    traj = run_data.as_trajectory()
    battery = args.battery
    kappa = float(run_data.config.checks.get("kappa", 2.0))
    if battery == "trajectory":
        reports = trajectory_battery(traj, kappa=kappa)
    elif battery == "conservation":
        reports = [check_conservation(traj)]
    elif battery == "energy":
        reports = [check_energy_inequality(traj)]
    elif battery == "suite":
        labeled = [
            (f"snap_t={s.t:.6g}", s) for s in traj.snapshots
        ]
        corpus = StateCorpus.from_states(labeled, kappa=kappa)
        reports = inequality_suite(corpus)
    else:
        raise ValueError(f"unknown battery {battery!r}; pick from {_BATTERIES}")
    write_checks(reports, args.run_dir, battery)
    for rep in reports:
        print(rep)
    return 0 if all(r.passed for r in reports) else 1


def _sweep_worker(payload: tuple) -> tuple:
    cfg_dict, directory = payload
    cfg = ExperimentConfig.from_dict(cfg_dict)
    grid = cfg.build_grid()
    state = build_initial_state(cfg, grid)
    traj = run_solver(state, cfg.solver)
    persist_run(traj, cfg, directory)
    return cfg.name, traj.verdict.outcome, traj.verdict.t_detect


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    out = _resolve_out(cfg, args.out)
    os.makedirs(out, exist_ok=True)
    jobs = []
    if args.ks:
        ks = [int(k) for k in args.ks.split(",")]
        for k in ks:
            d = cfg.to_dict()
            d["name"] = f"{cfg.name}_k{k:03d}"
            d["initial"]["k"] = k
            jobs.append((d, os.path.join(out, f"k_{k:03d}")))
    elif args.resolutions:
        for N in (int(x) for x in args.resolutions.split(",")):
            d = cfg.to_dict()
            d["name"] = f"{cfg.name}_N{N}"
            d["grid"]["N"] = N
            jobs.append((d, os.path.join(out, f"N_{N}")))
    else:
        raise ValueError("sweep needs --ks or --resolutions")
    results = []
    with ProcessPoolExecutor(max_workers=min(len(jobs), args.jobs)) as pool:
        for name, outcome, t_detect in pool.map(_sweep_worker, jobs):
            results.append({"name": name, "outcome": outcome,
                            "t_detect": t_detect})
            print(f"{name}: {outcome} t_detect={t_detect}")
    with open(os.path.join(out, "sweep.json"), "w", encoding="utf-8") as fh:
        json.dump({"config_hash": config_hash(cfg), "runs": results},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def _cmd_constants(args) -> int:
    n, kappa, p = args.n, args.kappa, args.p
    w = param_window(n=n, p=p, kappa=kappa)
    vol = w.n  # placeholder to keep linters quiet; recomputed below
    from .grid import ball_surface_coefficient
    omega = ball_surface_coefficient(n)
    R = args.R
    print(f"n = {n}, kappa = {kappa}, p = {p}, R = {R}")
    print(f"theta = {w.theta!r} (= {w.theta:.6f})")
    print(f"alpha window = ({w.alpha_window[0]:.6f}, {w.alpha_window[1]:.6f}),"
          f" midpoint = {w.alpha:.6f}")
    print(f"p window = (1, {2.0 * n / (n + 2.0):.6f})")
    print(f"omega_n = {omega!r} (= {omega:.6f})")
    print(f"|B_R| = {omega * R ** n / n!r}")
    return 0


_PLOT_SERIES = """\
# Plot F(t), D(t), sup_u(t) from a stored series.
import csv
import os
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
rows = []
with open(os.path.join(here, "series.csv")) as fh:
    rdr = csv.DictReader(ln for ln in fh if not ln.startswith("#"))
    rows = [{k: float(v) for k, v in row.items()} for row in rdr]

t = [r["t"] for r in rows]
fig, axes = plt.subplots(3, 1, sharex=True, figsize=(7, 9))
for ax, col, label in zip(
    axes, ("F", "D", "sup_u"), ("F(t)", "D(t)", "sup u(t)")
):
    ax.plot(t, [r[col] for r in rows])
    ax.set_ylabel(label)
    if col != "F":
        ax.set_yscale("log")
axes[-1].set_xlabel("t")
fig.tight_layout()
out = os.path.join(here, "series.png")
fig.savefig(out, dpi=150)
print(f"wrote {out}")
"""

_PLOT_PROFILES = """\
# Plot v(r) r^kappa across snapshots.
import glob
import os
import matplotlib.pyplot as plt

KAPPA = %(kappa)s
here = os.path.dirname(os.path.abspath(__file__))

fig, ax = plt.subplots(figsize=(7, 5))
for path in sorted(glob.glob(os.path.join(here, "snap_*.txt"))):
    fields = {}
    with open(path) as fh:
        for ln in fh:
            if ln.startswith("#") or not ln.strip():
                continue
            key, _, rest = ln.partition(" ")
            fields[key] = rest.split()
    r = [float(x) for x in fields["r"]]
    v = [float(x) for x in fields["v"]]
    t = float(fields["t"][0])
    ax.plot(r, [vi * ri ** KAPPA for ri, vi in zip(r, v)],
            label=f"t={t:.4g}")
ax.set_xscale("log")
ax.set_xlabel("r")
ax.set_ylabel(f"v(r) r^{KAPPA}")
ax.legend(fontsize=7)
fig.tight_layout()
out = os.path.join(here, "profiles.png")
fig.savefig(out, dpi=150)
print(f"wrote {out}")
"""


def _cmd_plot(args) -> int:
    run_data = load_run(args.run_dir)
    kappa = float(run_data.config.checks.get("kappa", 2.0))
    p1 = os.path.join(args.run_dir, "plot_series.py")
    p2 = os.path.join(args.run_dir, "plot_profiles.py")
    with open(p1, "w", encoding="utf-8") as fh:
        fh.write(_PLOT_SERIES)
    with open(p2, "w", encoding="utf-8") as fh:
        fh.write(_PLOT_PROFILES % {"kappa": repr(kappa)})
    print(f"wrote {p1} and {p2}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kslab")
    sub = ap.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("simulate", help="run a configured experiment")
    s.add_argument("config")
    s.add_argument("--out", default=None)
    s.set_defaults(fn=_cmd_simulate)

    s = sub.add_parser("construct", help="emit a constructed-data sequence")
    s.add_argument("config")
    s.add_argument("--out", default=None)
    s.set_defaults(fn=_cmd_construct)

    s = sub.add_parser("verify", help="run a check battery on a stored run")
    s.add_argument("run_dir")
    s.add_argument("--battery", default="trajectory", choices=_BATTERIES)
    s.set_defaults(fn=_cmd_verify)

    s = sub.add_parser("sweep", help="concurrent runs over k or N")
    s.add_argument("config")
    s.add_argument("--ks", default=None)
    s.add_argument("--resolutions", default=None)
    s.add_argument("--jobs", type=int, default=os.cpu_count() or 2)
    s.add_argument("--out", default=None)
    s.set_defaults(fn=_cmd_sweep)

    s = sub.add_parser("constants", help="print derived exponents and windows")
    s.add_argument("n", type=int)
    s.add_argument("kappa", type=float)
    s.add_argument("p", type=float)
    s.add_argument("--R", type=float, default=1.0)
    s.set_defaults(fn=_cmd_constants)

    s = sub.add_parser("plot", help="emit plot scripts for a stored run")
    s.add_argument("run_dir")
    s.set_defaults(fn=_cmd_plot)
    return ap


def main(argv=None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
