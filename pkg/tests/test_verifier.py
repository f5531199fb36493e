"""Checks must pass on healthy runs and catch injected defects."""

import dataclasses
import math

import numpy as np
import pytest

from kslab import (
    SolverConfig,
    StateCorpus,
    StatePair,
    baseline_profiles,
    build_grid,
    check_conservation,
    check_energy_inequality,
    check_gradv_lp,
    check_lemma14_sequence,
    check_odi_blowup,
    check_pointwise_bound,
    constant_recipe,
    fit_odi_constant,
    inequality_suite,
    lemma14_pair,
    perturbed_constant,
    run,
    trajectory_battery,
)
from kslab.verifier import GROWTH_LIMIT, _quartile_trend


@pytest.fixture(scope="module")
def decay_run():
    grid = build_grid(3, 1.0, 96)
    cfg = SolverConfig(t_end=0.5, dt_init=1e-5, dt_max=5e-3, snapshot_every=10)
    return run(perturbed_constant(grid, c=1.0, amplitude=0.2), cfg)


def tampered(traj, col, factor, row=-1):
    series = {k: v.copy() for k, v in traj.series.items()}
    series[col][row] *= factor
    return dataclasses.replace(traj, series=series)


def test_battery_passes_on_decay_run(decay_run):
    reports = trajectory_battery(decay_run, kappa=2.0)
    assert [r.name for r in reports] == [
        "conservation", "energy_inequality", "pointwise_bound_kappa=2",
        "gradv_lp_p=1.4", "odi_blowup",
    ]
    for r in reports:
        assert r.passed, str(r)


def test_conservation_catches_mass_leak(decay_run):
    bad = tampered(decay_run, "mass_u", 1.0 + 1e-8)
    rep = check_conservation(bad)
    assert not rep.passed
    assert rep.worst_ratio > 1e-10


def test_conservation_catches_v_mass_excess(decay_run):
    bad = tampered(decay_run, "mass_v", 3.0)
    assert not check_conservation(bad).passed


def test_energy_check_catches_increase(decay_run):
    # pumping energy back in partway through the run must be flagged
    mid = decay_run.series["F"].size // 2
    bad = tampered(decay_run, "F", 1.0, row=mid)
    bad.series["F"][mid] = bad.series["F"][0] + 1.0
    rep = check_energy_inequality(bad)
    assert not rep.passed
    assert rep.worst_ratio > 0


def test_energy_check_catches_time_reversal(decay_run):
    series = {k: v.copy() for k, v in decay_run.series.items()}
    keep_t, keep_dt = series["t"], series["dt"]
    for k in series:
        if k not in ("t", "dt"):
            series[k] = series[k][::-1].copy()
    series["t"], series["dt"] = keep_t, keep_dt
    rev = dataclasses.replace(decay_run, series=series)
    assert not check_energy_inequality(rev).passed


def test_pointwise_bound_flags_growth(decay_run):
    rep = check_pointwise_bound(decay_run, kappa=2.0)
    assert rep.passed
    # inflate v on the final snapshot beyond the growth rule
    last = decay_run.snapshots[-1]
    bigger = StatePair(last.u, type(last.v)(last.v.grid,
                                            last.v.values * (2 * GROWTH_LIMIT)),
                       t=last.t)
    bumped = dataclasses.replace(
        decay_run, snapshots=list(decay_run.snapshots[:-1]) + [bigger])
    assert not check_pointwise_bound(bumped, kappa=2.0).passed


def test_gradv_check_requires_recorded_p(decay_run):
    with pytest.raises(ValueError):
        check_gradv_lp(decay_run, p=1.3)
    with pytest.raises(ValueError):
        check_gradv_lp(decay_run, p=1.51)


def test_quartile_trend_logic():
    # trend is the ratio of quartile maxima, so a 20% ramp stays below 1.5
    ok, trend = _quartile_trend(np.linspace(1.0, 1.2, 40))
    assert ok and 1.0 < trend < GROWTH_LIMIT
    bad, trend = _quartile_trend(np.linspace(1.0, 2.0, 40))
    assert not bad and trend > GROWTH_LIMIT
    ok_flat, _ = _quartile_trend(np.zeros(40))
    assert ok_flat
    ok_short, _ = _quartile_trend(np.array([1.0, 9.0]))
    assert ok_short  # too short to split


# --- ODI ----------------------------------------------------------------


def test_fit_odi_constant_recovers_manufactured():
    theta = 20.0 / 23.0
    q = theta / (1.0 - theta)
    t = np.linspace(0.0, 0.45, 400)
    y = (1.0 - 2.0 * t) ** (-q)
    C, resid = fit_odi_constant(t, y, theta)
    assert C == pytest.approx(2.0, rel=1e-12)
    assert resid < 1e-12


def test_fit_odi_constant_scales_with_y0():
    theta = 0.75
    q = theta / (1.0 - theta)
    t = np.linspace(0.0, 0.2, 200)
    y = 7.0 * (1.0 - 3.0 * t) ** (-q)
    C, resid = fit_odi_constant(t, y, theta)
    assert C == pytest.approx(3.0, rel=1e-10)
    assert resid < 1e-10


def test_odi_check_inapplicable_on_positive_energy(decay_run):
    series = {k: v.copy() for k, v in decay_run.series.items()}
    series["F"] = np.abs(series["F"]) + 1.0
    pos = dataclasses.replace(decay_run, series=series)
    rep = check_odi_blowup(pos, theta=20.0 / 23.0)
    assert rep.passed
    assert rep.details["applicable"] is False


def test_odi_check_rejects_bad_theta(decay_run):
    with pytest.raises(ValueError):
        check_odi_blowup(decay_run, theta=0.4)


# --- sequence check -----------------------------------------------------


@pytest.fixture(scope="module")
def spike_sequence():
    grid = build_grid(3, 1.0, 512, grading=1.05)
    recipe = constant_recipe(grid, c=1.0, p=1.1)
    return [lemma14_pair(recipe, k) for k in range(1, 16)]


def test_lemma14_sequence_passes(spike_sequence):
    rep = check_lemma14_sequence(spike_sequence, tail_start=10)
    assert rep.passed, str(rep)


def test_lemma14_sequence_requires_ascending_k(spike_sequence):
    shuffled = [spike_sequence[3], spike_sequence[0], spike_sequence[8]]
    with pytest.raises(ValueError):
        check_lemma14_sequence(shuffled, tail_start=10)


def test_lemma14_sequence_flags_energy_plateau(spike_sequence):
    flat = [dataclasses.replace(d, F0=-1.0) for d in spike_sequence]
    assert not check_lemma14_sequence(flat, tail_start=10).passed


# --- corpus suite -------------------------------------------------------


@pytest.fixture(scope="module")
def corpus(decay_run, spike_sequence):
    grid = build_grid(3, 1.0, 96)
    labeled = [
        (f"const_c={c}", baseline_profiles("constant", grid, c=c))
        for c in (0.25, 1.0, math.e, 10.0)
    ]
    labeled += [(f"snap_{i}", s) for i, s in enumerate(decay_run.snapshots)]
    labeled += [(f"spike_k={d.k}", StatePair(d.u0, d.v0))
                for d in spike_sequence]
    return StateCorpus.from_states(labeled, kappa=2.0)


def test_corpus_envelope(corpus):
    assert corpus.window.theta == pytest.approx(20.0 / 23.0, rel=1e-15)
    assert len(corpus.members) >= 20
    # mass is a per-member quantity; the window carries the envelopes only
    assert corpus.window.m is None
    assert corpus.window.M > 0
    assert corpus.window.B > 0
    assert corpus.window.A > 0


def test_inequality_suite_all_finite(corpus):
    reports = inequality_suite(corpus)
    assert len(reports) == 8
    for rep in reports:
        assert math.isfinite(rep.worst_ratio), str(rep)
        assert rep.passed, str(rep)


def test_energy_vs_dissipation_constant_state_value(corpus):
    # at u = v = c with D = 0 the ratio is exactly -F = |Omega|(c^2/2 - c ln c);
    # c = 10 on the unit ball gives the corpus-wide worst case
    reports = {r.name: r for r in inequality_suite(corpus)}
    expected = 4 * math.pi / 3 * (50.0 - 10.0 * math.log(10.0))
    assert reports["energy_vs_dissipation"].worst_ratio == pytest.approx(
        expected, rel=1e-6)


def test_corpus_rejects_mixed_dimensions(decay_run):
    g4 = build_grid(4, 1.0, 32)
    labeled = [("a", baseline_profiles("constant", g4, c=1.0)),
               ("b", baseline_profiles("constant",
                                       build_grid(3, 1.0, 32), c=1.0))]
    with pytest.raises(ValueError):
        StateCorpus.from_states(labeled, kappa=2.5)
