"""Acceptance suite: one test per numbered criterion, each printing a
single [PASS]/[FAIL] line with the measured quantities before asserting.

The fixtures are module-scoped because several criteria share the same
runs: the perturbed-constant reference run, the constructed spike family,
the four family-index runs, and the aggregation-driven collapse run.
"""
import dataclasses
import json
import math
import os

import numpy as np
import pytest

from kslab.config import ExperimentConfig, build_initial_state
from kslab.functionals import StatePair, energy_report, theta_exponent
from kslab.grid import RadialField, build_grid, laplacian_radial
from kslab.initial_data import baseline_profiles, constant_recipe, lemma14_pair
from kslab.io import load_run, persist_run
from kslab.solver import (BlowupVerdict, SolverConfig, Trajectory, run,
                          scheme_tolerance, step)
from kslab.verifier import (StateCorpus, check_conservation,
                            check_energy_inequality, check_gradv_lp,
                            check_lemma14_sequence, check_odi_blowup,
                            check_pointwise_bound, inequality_suite)

BALL3 = 4.0 * math.pi / 3.0


def _line(num: int, ok: bool, msg: str) -> bool:
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {msg}")
    return ok


# ---------------------------------------------------------------- fixtures

@pytest.fixture(scope="module")
def run4():
    """Perturbed-constant reference run (n=3, R=1, N=256)."""
    cfg = ExperimentConfig(
        name="acc_run4",
        grid={"n": 3, "R": 1.0, "N": 256},
        initial={"kind": "constant", "c": 1.0, "amplitude": 0.2, "mode": 1},
        solver=SolverConfig(t_end=0.5, dt_init=1e-5, dt_min=1e-8,
                            dt_max=5e-3, snapshot_every=2),
    )
    grid = cfg.build_grid()
    traj = run(build_initial_state(cfg, grid), cfg.solver)
    return cfg, traj


@pytest.fixture(scope="module")
def spike_table():
    """Constructed family k = 1..30 over the constant baseline."""
    grid = build_grid(3, 1.0, 1024, grading=1.035)
    recipe = constant_recipe(grid, c=1.0, p=1.1)
    return grid, [lemma14_pair(recipe, k) for k in range(1, 31)]


@pytest.fixture(scope="module")
def k_runs():
    """Family indices {1, 12, 16, 20} evolved on the graded N=1024 grid."""
    grid = build_grid(3, 1.0, 1024, grading=1.013)
    recipe = constant_recipe(grid, c=1.0, p=1.1)
    cfg = SolverConfig(t_end=1.0, dt_init=1e-16, dt_min=1e-18, dt_max=1e-2,
                       blowup_factor=1e4, snapshot_every=20, max_steps=20000)
    out = {}
    for k in (1, 12, 16, 20):
        d = lemma14_pair(recipe, k)
        out[k] = run(StatePair(d.u0, d.v0), cfg)
    return out


@pytest.fixture(scope="module")
def collapse_run():
    """Mass-50 bump over a weaker wide signal: detected finite-time collapse."""
    grid = build_grid(3, 1.0, 512)
    u = baseline_profiles("bump", grid, m=50.0, width=0.15, floor=1e-2).u
    wide = baseline_profiles("bump", grid, m=25.0, width=0.3, floor=1e-2).v
    s0 = StatePair(u, RadialField(grid, 0.5 * wide.values))
    cfg = SolverConfig(t_end=0.02, dt_init=1e-6, dt_min=2e-8, dt_max=1e-4,
                       snapshot_every=8)
    return run(s0, cfg)


# ---------------------------------------------------------------- criteria

def test_criterion_01_quadrature_and_operator_order():
    worst_vol = 0.0
    for n, R in ((3, 1.0), (4, 1.0), (3, 2.0)):
        exact = math.pi ** (n / 2.0) * R ** n / math.gamma(n / 2.0 + 1.0)
        for g in (build_grid(n, R, 200), build_grid(n, R, 128, grading=1.05)):
            ones = np.ones(g.ncells)
            err = abs(g.integrate_values(ones) - exact) / exact
            worst_vol = max(worst_vol, err)

    # observed Laplacian order on a fixed smooth geometric-grading family,
    # measured away from the two one-sided closure cells
    errs = []
    closure = []
    for N in (64, 128, 256):
        g = build_grid(3, 1.0, N, grading=20.0 ** (1.0 / N))
        lap = laplacian_radial(RadialField(g, g.centers ** 2)).values
        band = (g.centers > 0.1) & (g.centers < 0.9)
        errs.append(np.max(np.abs(lap[band] - 6.0)))
        closure.append(abs(lap[0] - 6.0))
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    closure_orders = [math.log2(a / b) for a, b in zip(closure, closure[1:])]

    # uniform grid: interior flux differences of r^2 are exact
    gu = build_grid(3, 1.0, 128)
    lap_u = laplacian_radial(RadialField(gu, gu.centers ** 2)).values
    uni = np.max(np.abs(lap_u[:-1] - 6.0))

    ok = (worst_vol <= 1e-10 and min(orders) >= 1.9
          and min(closure_orders) >= 0.9 and uni <= 1e-10)
    _line(1, ok,
          f"unit-mass error {worst_vol:.2e}; Laplacian(r^2)->6 orders "
          f"{[f'{p:.2f}' for p in orders]} (closure "
          f"{[f'{p:.2f}' for p in closure_orders]}), uniform interior "
          f"{uni:.2e}")
    assert worst_vol <= 1e-10
    assert min(orders) >= 1.9
    assert min(closure_orders) >= 0.9
    assert uni <= 1e-10


def test_criterion_02_constant_equilibria():
    g = build_grid(3, 1.0, 128)
    worst_drift = 0.0
    worst_f = 0.0
    for c in (0.25, 1.0, math.e, 10.0):
        s = baseline_profiles("constant", g, c=c)
        for _ in range(100):
            s = step(s, 1e-3)
        drift = max(np.max(np.abs(s.u.values - c)),
                    np.max(np.abs(s.v.values - c))) / c
        worst_drift = max(worst_drift, drift)
        F = energy_report(s).F
        exact = g.domain_volume * (c * math.log(c) - 0.5 * c * c)
        worst_f = max(worst_f, abs(F - exact) / abs(exact))
    ok = worst_drift <= 1e-12 and worst_f <= 1e-10
    _line(2, ok, f"fixed-point drift {worst_drift:.2e} over 100 steps; "
                 f"F closed-form error {worst_f:.2e}")
    assert worst_drift <= 1e-12
    assert worst_f <= 1e-10


def test_criterion_03_conservation_battery(run4, k_runs, collapse_run):
    runs = {"run4": run4[1], "collapse": collapse_run}
    runs.update({f"k{k}": tr for k, tr in k_runs.items()})
    reports = {name: check_conservation(tr) for name, tr in runs.items()}
    worst = max(rep.worst_ratio for rep in reports.values())
    ok = all(rep.passed for rep in reports.values())
    _line(3, ok, f"u-drift/v-mass checks on {len(reports)} runs "
                 f"({', '.join(reports)}); worst ratio {worst:.2e}")
    for name, rep in reports.items():
        assert rep.passed, f"{name}: {rep}"


def test_criterion_04_energy_inequality(run4):
    _, traj = run4
    s = traj.series
    F, D, dt = s["F"], s["D"], s["dt"]
    tol = np.array([scheme_tolerance(d, f) for d, f in zip(dt[1:], F[:-1])])
    defect = F[1:] - F[:-1] + D[:-1] * dt[1:]
    worst = float(np.max(defect / tol))
    rep = check_energy_inequality(traj)
    ok = worst <= 1.0 and rep.passed
    _line(4, ok, f"N=256 perturbed constant, {len(F) - 1} steps: "
                 f"max (dF + D dt)/tol = {worst:.3f}; verifier {rep.passed}")
    assert worst <= 1.0, "per-step energy decrease violated beyond tolerance"
    assert rep.passed, str(rep)


def test_criterion_05_construction_family(spike_table):
    grid, table = spike_table
    margins = np.array([d.margin for d in table])
    mass_q = max(abs(d.mass - BALL3) / BALL3 for d in table)
    mass_g = max(abs(grid.integrate_values(d.u0.values) - BALL3) / BALL3
                 for d in table)
    du = np.array([d.du_lp for d in table])
    dv = np.array([d.dv_w12 for d in table])
    f0 = np.array([d.F0 for d in table])
    uvk = np.array([d.uv_over_k for d in table])
    tail = slice(9, None)  # k >= 10
    mono = (np.all(np.diff(du[tail]) < 0) and np.all(np.diff(dv[tail]) < 0)
            and np.all(np.diff(f0[tail]) < 0))
    small = du[-1] < 1e-2 * du[0] and dv[-1] < 1e-2 * dv[0]
    floor = 0.8 * 4.0 * math.pi  # constant baseline: u(0) v(0) = 1
    rep = check_lemma14_sequence(table, tail_start=10)
    ok = (margins.min() >= 0 and mass_q <= 1e-10 and mass_g <= 1e-10
          and bool(mono) and bool(small) and uvk.min() >= floor and rep.passed)
    _line(5, ok,
          f"k=1..30: min margin {margins.min():.1e}, mass err {mass_q:.1e}/"
          f"{mass_g:.1e}, tail ratios du {du[-1] / du[0]:.1e} dv "
          f"{dv[-1] / dv[0]:.1e}, F0 {f0[0]:.1f} -> {f0[-1]:.1f}, "
          f"min uv/k {uvk.min():.2f} (floor {floor:.2f})")
    assert margins.min() >= 0
    assert mass_q <= 1e-10 and mass_g <= 1e-10
    assert mono, "tail norms / F0 not monotone"
    assert small, "tail norms did not drop below 1e-2 of k=1"
    assert uvk.min() >= floor
    assert rep.passed, str(rep)


def test_criterion_06_blowup_experiment(k_runs):
    for k in (1, 12, 16, 20):
        v = k_runs[k].verdict
        s = k_runs[k].series
        print(f"    k={k}: outcome={v.outcome} t_detect={v.t_detect} "
              f"sup_u {s['sup_u'][0]:.3e} -> {s['sup_u'].max():.3e} "
              f"({len(s['t']) - 1} steps)")
    v20, v1 = k_runs[20].verdict, k_runs[1].verdict
    det = {k: k_runs[k].verdict.t_detect for k in (12, 16, 20)}
    ok20 = v20.outcome == "blew_up" and (v20.t_detect or 2.0) < 1.0
    ok1 = v1.outcome == "reached_t_end"
    okmono = (all(d is not None for d in det.values())
              and det[12] > det[16] > det[20])
    _line(6, ok20 and ok1 and okmono,
          f"k=20 {v20.outcome}, k=1 {v1.outcome}, detection times {det}")
    assert ok20, f"k=20 should blow up before t_end=1, got {v20.outcome}"
    assert ok1, f"k=1 should reach t_end bounded, got {v1.outcome}"
    assert okmono, f"detection times not decreasing in k: {det}"


def test_criterion_07_uniform_bounds_along_k20(k_runs):
    traj = k_runs[20]
    t_stop = (traj.verdict.t_detect
              if traj.verdict.outcome == "blew_up" else None)
    rep_v = check_pointwise_bound(traj, 2.0, t_stop=t_stop)
    rep_g = check_gradv_lp(traj, 1.4, t_stop=t_stop)
    ok = rep_v.passed and rep_g.passed
    _line(7, ok, f"v r^2 trend {rep_v.worst_ratio:.3f}, grad-v L^1.4 trend "
                 f"{rep_g.worst_ratio:.3e} (limit 1.5)")
    assert rep_v.passed, str(rep_v)
    assert rep_g.passed, str(rep_g)


def test_criterion_08_inequality_suite(run4, spike_table, collapse_run,
                                       tmp_path):
    _, traj4 = run4
    _, table = spike_table
    gc = collapse_run.grid
    members = [(f"const_{c:g}", baseline_profiles("constant", gc, c=c))
               for c in (0.25, 1.0, math.e, 10.0)]
    members += [(f"run4_{i}", s) for i, s in enumerate(traj4.snapshots)]
    members += [(f"collapse_{i}", s)
                for i, s in enumerate(collapse_run.snapshots)]
    members += [(f"spike_{d.k}", StatePair(d.u0, d.v0)) for d in table]
    corpus = StateCorpus.from_states(members, kappa=2.0, p=1.1)
    reports = inequality_suite(corpus)
    finite = all(math.isfinite(rep.worst_ratio) for rep in reports)
    passed = all(rep.passed for rep in reports)

    theta = theta_exponent(3, 2.0)
    s = collapse_run.series
    bound = float(np.max(-s["F"] / (s["D"] ** theta + 1.0)))

    out = tmp_path / "empirical_constants.json"
    payload = {
        "corpus_size": corpus.size,
        "window": dataclasses.asdict(corpus.window),
        "constants": {rep.name: rep.worst_ratio for rep in reports},
        "blowup_energy_over_dissipation": bound,
    }
    out.write_text(json.dumps(payload, indent=1))
    reread = json.loads(out.read_text())

    ok = (corpus.size >= 200 and finite and passed
          and math.isfinite(bound) and abs(theta - 20.0 / 23.0) < 1e-15
          and len(reread["constants"]) == len(reports))
    _line(8, ok, f"{corpus.size} states, {len(reports)} ratio checks all "
                 f"finite={finite}; -F/(D^th+1) on collapse run <= "
                 f"{bound:.3e}; constants -> {out.name}")
    assert corpus.size >= 200
    assert finite and passed
    assert abs(theta - 20.0 / 23.0) < 1e-15
    assert math.isfinite(bound)
    assert all(math.isfinite(v) for v in reread["constants"].values())


def test_criterion_09_odi_fit(k_runs, collapse_run):
    theta = theta_exponent(3, 2.0)
    t = np.linspace(0.0, 0.49, 400)
    y = (1.0 - 2.0 * t) ** (-theta / (1.0 - theta))
    grid = build_grid(3, 1.0, 16)
    fake = Trajectory(
        grid=grid, config=SolverConfig(), snapshots=[],
        series={"t": t, "dt": np.full_like(t, t[1]), "F": -y,
                "D": np.zeros_like(t)},
        verdict=BlowupVerdict("reached_t_end", None, None, ""),
        u0_l1=1.0, v0_l1=1.0, gradv0_l2=0.0)
    rep = check_odi_blowup(fake, theta)
    C = rep.details["fitted_C"]
    resid = rep.details["fit_residual"]

    # informational reports on the real runs
    for name, traj in (("k=20", k_runs[20]), ("collapse", collapse_run)):
        r = check_odi_blowup(traj, theta)
        d = r.details
        print(f"    {name}: fitted C={d.get('fitted_C', float('nan')):.4g} "
              f"implied T={d.get('implied_T', float('nan')):.4g} "
              f"t_detect={traj.verdict.t_detect} "
              f"residual={d.get('fit_residual', float('nan')):.3g}")

    ok = abs(C - 2.0) <= 0.02 * 2.0 and resid <= 1e-8
    _line(9, ok, f"manufactured data: fitted C={C:.6f} (target 2 within 2%), "
                 f"residual {resid:.2e}")
    assert abs(C - 2.0) <= 0.02 * 2.0
    assert resid <= 1e-8


def test_criterion_10_determinism_and_restart(run4, tmp_path):
    cfg, traj = run4
    rerun = run(build_initial_state(cfg, cfg.build_grid()), cfg.solver)
    same_cols = all(np.array_equal(traj.series[k], rerun.series[k])
                    for k in traj.series)
    d_a, d_b = tmp_path / "a", tmp_path / "b"
    persist_run(traj, cfg, str(d_a))
    persist_run(rerun, cfg, str(d_b))
    same_bytes = ((d_a / "series.csv").read_bytes()
                  == (d_b / "series.csv").read_bytes())

    short = ExperimentConfig(
        name="acc_restart",
        grid={"n": 3, "R": 1.0, "N": 64},
        initial={"kind": "constant", "c": 1.0, "amplitude": 0.2, "mode": 1},
        solver=SolverConfig(t_end=3e-3, dt_init=1e-4, dt_min=1e-6,
                            dt_max=1e-4, snapshot_every=1),
    )
    straj = run(build_initial_state(short, short.build_grid()), short.solver)
    d_s = tmp_path / "short"
    persist_run(straj, short, str(d_s))
    rd = load_run(str(d_s))
    assert len(rd.snapshots) == len(rd.series["t"])
    j = 10
    resumed = step(rd.snapshots[j], float(rd.series["dt"][j + 1]))
    ref = rd.snapshots[j + 1]
    rel = max(
        np.max(np.abs(resumed.u.values - ref.u.values))
        / np.max(np.abs(ref.u.values)),
        np.max(np.abs(resumed.v.values - ref.v.values))
        / np.max(np.abs(ref.v.values)),
    )
    ok = same_cols and same_bytes and rel <= 1e-12
    _line(10, ok, f"re-run bitwise equal (columns {same_cols}, file bytes "
                  f"{same_bytes}); one-step restart deviation {rel:.2e}")
    assert same_cols and same_bytes
    assert rel <= 1e-12
