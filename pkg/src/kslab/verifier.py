"""Executable checks for the identities and inequalities the solver relies on.

Two families:

  - trajectory checks: conservation identities, the per-step energy
    inequality, t-uniform bound diagnostics, and the ODI fit on y = -F;
  - a corpus suite: functional inequalities evaluated member by member on a
    set of admissible states, reporting the observed worst ratio and never
    asserting a specific constant (the underlying constants are
    non-constructive; only boundedness across the corpus is checkable).

"No growth trend" for t-uniform bounds is operationalized as: the
last-quartile supremum of the ratio series is at most 1.5 times the
first-quartile supremum.  A finite run cannot certify t-uniformity; this is
the concrete surrogate used throughout.

The energy check trusts the spatial discretization only while the solution
stays resolved: rows after sup_u first exceeds 100 x its initial value are
outside the trust horizon (a one-cell spike has unbounded truncation error,
and no dt-power tolerance can absorb that).  The horizon row is reported.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .functionals import (
    ParamWindow,
    StatePair,
    energy_report,
    param_window,
    theta_exponent,
    w12_norm,
)
from .grid import RadialField, _derivative_values
from .initial_data import BlowupDatum
from .solver import Trajectory, scheme_tolerance

__all__ = [
    "CheckReport",
    "StateCorpus",
    "check_conservation",
    "check_energy_inequality",
    "check_pointwise_bound",
    "check_gradv_lp",
    "check_odi_blowup",
    "check_lemma14_sequence",
    "inequality_suite",
    "fit_odi_constant",
    "trajectory_battery",
]

log = logging.getLogger(__name__)

MASS_DRIFT_TOL = 1e-10
V_MASS_TOL = 1e-8
GROWTH_LIMIT = 1.5
ENERGY_TRUST_FACTOR = 100.0


@dataclass(frozen=True)
class CheckReport:
    name: str
    passed: bool
    worst_ratio: float
    location: object = None       # t, r, k, or member label of the worst case
    details: dict = field(default_factory=dict)
    notes: str = ""

    def __str__(self):
        flag = "PASS" if self.passed else "FAIL"
        loc = f" @ {self.location}" if self.location is not None else ""
        return f"[{flag}] {self.name}: worst_ratio={self.worst_ratio:.6g}{loc} {self.notes}"


def _quartile_trend(values: np.ndarray) -> tuple[bool, float]:
    """Last-quartile sup vs first-quartile sup; trivially flat for short series."""
    if values.size < 4:
        return True, 1.0
    q = max(1, values.size // 4)
    lead = float(np.max(values[:q]))
    tail = float(np.max(values[-q:]))
    if lead == 0.0:
        return tail == 0.0, math.inf if tail > 0 else 1.0
    return tail <= GROWTH_LIMIT * lead, tail / lead


def check_conservation(traj: Trajectory) -> CheckReport:
    """Mass of u constant to 1e-10 relative; mass of v never above
    max of the two initial masses (up to 1e-8)."""
    s = traj.series
    mu = s["mass_u"]
    mv = s["mass_v"]
    if mu.size == 0:
        raise ValueError("empty trajectory")
    drift = np.abs(mu - mu[0]) / abs(mu[0])
    j_u = int(np.argmax(drift))
    cap = max(mu[0], mv[0])
    v_excess = mv / cap - 1.0
    j_v = int(np.argmax(v_excess))
    ok_u = bool(drift[j_u] <= MASS_DRIFT_TOL)
    ok_v = bool(v_excess[j_v] <= V_MASS_TOL)
    return CheckReport(
        name="conservation",
        passed=ok_u and ok_v,
        worst_ratio=float(drift[j_u]),
        location=float(s["t"][j_u]),
        details={
            "u_mass_drift": float(drift[j_u]),
            "u_mass_drift_t": float(s["t"][j_u]),
            "v_mass_excess": float(v_excess[j_v]),
            "v_mass_excess_t": float(s["t"][j_v]),
            "v_mass_cap": float(cap),
        },
    )


def check_energy_inequality(
    traj: Trajectory, trust_factor: float = ENERGY_TRUST_FACTOR
) -> CheckReport:
    """Per-step F(t_{j+1}) - F(t_j) <= -D_j dt_j + tol_j inside the trust
    horizon.

    tol_j is the solver's scheme tolerance plus dt_j (D_j - D_{j+1})_+ : an
    implicit step only pays the dissipation it sees on arrival, so charging
    the departure-state D overdraws by exactly that first-order difference.
    The tighter arrival-state form (no drop term) is enforced as well.
    """
    s = traj.series
    F, D, dt, sup = s["F"], s["D"], s["dt"], s["sup_u"]
    if F.size < 2:
        return CheckReport("energy_inequality", True, 0.0,
                           notes="fewer than two records")
    beyond = np.nonzero(sup >= trust_factor * sup[0])[0]
    hi = int(beyond[0]) if beyond.size else F.size
    worst = -math.inf
    worst_t = None
    passed = True
    for j in range(1, hi):
        drop = max(D[j - 1] - D[j], 0.0)
        tol_dep = scheme_tolerance(dt[j], F[j - 1]) + dt[j] * drop
        tol_arr = scheme_tolerance(dt[j], F[j - 1])
        m_dep = F[j] - F[j - 1] + D[j - 1] * dt[j] - tol_dep
        m_arr = F[j] - F[j - 1] + D[j] * dt[j] - tol_arr
        m = max(m_dep, m_arr)
        if m > worst:
            worst, worst_t = m, float(s["t"][j])
        if m > 0:
            passed = False
    return CheckReport(
        name="energy_inequality",
        passed=passed,
        worst_ratio=float(worst),
        location=worst_t,
        details={
            "rows_checked": hi - 1,
            "rows_total": int(F.size) - 1,
            "trust_factor": trust_factor,
            "trust_horizon_t": float(s["t"][hi - 1]) if hi < F.size else None,
        },
        notes="worst_ratio is the worst signed margin (<= 0 passes)",
    )


def _snapshot_sup_vrk(snap: StatePair, kappa: float) -> float:
    r = snap.grid.centers
    return float(np.max(snap.v.values * r ** kappa))


def check_pointwise_bound(
    traj: Trajectory, kappa: float, t_stop: Optional[float] = None
) -> CheckReport:
    """sup_r v(r,t) r^kappa, normalized by |u0|_1 + |v0|_1 + |grad v0|_2,
    finite with no growth trend in t."""
    n = traj.grid.n
    if not kappa > n - 2:
        raise ValueError(f"kappa must exceed n-2 = {n - 2}, got {kappa}")
    denom = traj.u0_l1 + traj.v0_l1 + traj.gradv0_l2
    snaps = [
        s for s in traj.snapshots
        if t_stop is None or s.t <= t_stop * (1 + 1e-12)
    ]
    sups = np.array([_snapshot_sup_vrk(s, kappa) for s in snaps]) / denom
    times = np.array([s.t for s in snaps])
    ok_trend, trend = _quartile_trend(sups)
    finite = bool(np.all(np.isfinite(sups)))
    j = int(np.argmax(sups))
    return CheckReport(
        name=f"pointwise_bound_kappa={kappa:g}",
        passed=finite and ok_trend,
        worst_ratio=float(sups[j]),
        location=float(times[j]),
        details={
            "empirical_C_kappa": float(sups[j]),
            "quartile_growth": float(trend),
            "n_snapshots": len(snaps),
            "denominator": denom,
        },
    )


def check_gradv_lp(
    traj: Trajectory, p: float, t_stop: Optional[float] = None
) -> CheckReport:
    """|grad v(t)|_p / (|u0|_1 + |grad v0|_2) bounded with no growth trend.

    Uses the per-step series column, so p must be the one the run recorded.
    """
    n = traj.grid.n
    if not (1.0 < p < n / (n - 1.0)):
        raise ValueError(f"p must lie in (1, {n / (n - 1.0):g}), got {p}")
    if abs(p - traj.config.gradv_p) > 1e-12:
        raise ValueError(
            f"run recorded |grad v|_p for p={traj.config.gradv_p}, not {p}")
    s = traj.series
    keep = np.ones(s["t"].size, bool)
    if t_stop is not None:
        keep = s["t"] <= t_stop * (1 + 1e-12)
    denom = traj.u0_l1 + traj.gradv0_l2
    ratios = s["gradv_lp"][keep] / denom
    times = s["t"][keep]
    ok_trend, trend = _quartile_trend(ratios)
    finite = bool(np.all(np.isfinite(ratios)))
    j = int(np.argmax(ratios))
    return CheckReport(
        name=f"gradv_lp_p={p:g}",
        passed=finite and ok_trend,
        worst_ratio=float(ratios[j]),
        location=float(times[j]),
        details={
            "empirical_C_p": float(ratios[j]),
            "quartile_growth": float(trend),
            "denominator": denom,
        },
    )


def fit_odi_constant(t: np.ndarray, y: np.ndarray, theta: float) -> tuple[float, float]:
    """Fit y(t) = y(0) (1 - C t)^{-theta/(1-theta)} by the exact linearizing
    transform z = (y/y(0))^{-(1-theta)/theta} = 1 - C t.

    Returns (C, max |z - (1 - C t)|).  Slope is least squares through the
    exact intercept z(0) = 1.
    """
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    if t.size < 3:
        raise ValueError("need at least 3 points to fit")
    if np.any(y <= 0):
        raise ValueError("y must be positive")
    z = (y / y[0]) ** (-(1.0 - theta) / theta)
    tt = np.sum(t * t)
    C = float(np.sum((1.0 - z) * t) / tt) if tt > 0 else 0.0
    resid = float(np.max(np.abs(z - (1.0 - C * t))))
    return C, resid


def check_odi_blowup(traj: Trajectory, theta: float) -> CheckReport:
    """y = -F along the run: monotone within tolerance, and the fitted
    (1 - C t)^{-theta/(1-theta)} lower envelope has bounded residual.

    Fits the terminal stretch where F < 0 (y = -F needs a positive base);
    inapplicable (reported, not failed) when that stretch is too short.
    """
    if not 0.5 < theta < 1.0:
        raise ValueError(f"theta must lie in (1/2, 1), got {theta}")
    s = traj.series
    F, t, dt = s["F"], s["t"], s["dt"]
    neg = F < 0
    start = int(np.argmax(neg)) if neg.any() else F.size
    if not neg[start:].all() or F.size - start < 16:
        return CheckReport(
            name="odi_blowup", passed=True, worst_ratio=math.nan,
            details={"applicable": False},
            notes="inapplicable: no terminal stretch with F < 0 to fit",
        )
    F, t, dt = F[start:], t[start:], dt[start:]
    D = s["D"][start:]
    y = -F
    # monotone within the per-step scheme tolerance
    slack = np.array([
        scheme_tolerance(dt[j], F[j - 1]) + dt[j] * max(D[j - 1] - D[j], 0.0)
        for j in range(1, y.size)
    ])
    dec = y[1:] - y[:-1] + slack
    monotone = bool(np.all(dec >= 0.0))
    C, resid = fit_odi_constant(t - t[0], y, theta)
    resid_ok = resid <= 0.1
    t_detect = traj.verdict.t_detect
    implied_T = t[0] + 1.0 / C if C > 0 else math.inf
    return CheckReport(
        name="odi_blowup",
        passed=monotone and resid_ok,
        worst_ratio=resid,
        location=float(t[int(np.argmax(np.abs(dec)))]) if y.size > 1 else None,
        details={
            "applicable": True,
            "fitted_C": C,
            "implied_T": implied_T,
            "t_detect": t_detect,
            "monotone": monotone,
            "fit_residual": resid,
        },
        notes=f"fitted C={C:.6g}, implied T={implied_T:.6g}",
    )


def check_lemma14_sequence(
    data: Sequence[BlowupDatum],
    tail_start: int = 10,
    f_threshold: Optional[float] = None,
    eps: float = 0.2,
) -> CheckReport:
    """Convergence/divergence pattern of a constructed data sequence.

    (a) both distance norms decrease monotonically over the tail
        (k >= tail_start) toward below 1e-2 of their first-k values;
    (b) F0 monotone decreasing over the tail and below f_threshold at the
        largest k (default threshold: F0 at the first k, i.e. strictly
        more negative than where it started);
    (c) the uv integral grows at least linearly: uv/k >= (1-eps) omega_n
        u(0) v(0) over the tail.
    """
    if len(data) < 3:
        raise ValueError("need at least 3 data")
    ks = [d.k for d in data]
    if any(k2 <= k1 for k1, k2 in zip(ks, ks[1:])):
        raise ValueError(f"k must be strictly ascending, got {ks}")
    tail = [d for d in data if d.k >= tail_start]
    if len(tail) < 2:
        raise ValueError(f"no tail: need at least 2 data with k >= {tail_start}")
    du = np.array([d.du_lp for d in tail])
    dv = np.array([d.dv_w12 for d in tail])
    f0 = np.array([d.F0 for d in tail])
    uvk = np.array([d.uv_over_k for d in tail])
    head = data[0]
    mono = bool(np.all(np.diff(du) < 0) and np.all(np.diff(dv) < 0))
    small = bool(du[-1] < 1e-2 * head.du_lp and dv[-1] < 1e-2 * head.dv_w12)
    thresh = head.F0 if f_threshold is None else f_threshold
    f0_ok = bool(np.all(np.diff(f0) < 0) and f0[-1] < thresh)
    floor = (1.0 - eps) * head.u0.grid.omega_n * head.center_uv
    uv_ok = bool(np.all(uvk >= floor))
    worst = float(np.min(uvk) / floor) if floor > 0 else math.inf
    return CheckReport(
        name="lemma14_sequence",
        passed=mono and small and f0_ok and uv_ok,
        worst_ratio=worst,
        location=int(tail[int(np.argmin(uvk))].k),
        details={
            "norms_monotone": mono,
            "norms_small": small,
            "du_last_over_first": float(du[-1] / head.du_lp),
            "dv_last_over_first": float(dv[-1] / head.dv_w12),
            "F0_monotone_below_threshold": f0_ok,
            "F0_last": float(f0[-1]),
            "uv_over_k_min": float(np.min(uvk)),
            "uv_floor": floor,
        },
    )


# -- corpus suite ------------------------------------------------------------

@dataclass(frozen=True)
class _MemberStats:
    label: str
    m: float
    v_mass: float
    uv: float
    grad_v_sq: float
    v_sq: float
    v_l1: float
    v_l2: float
    f_l2: float
    g_l2: float
    F: float
    D: float
    sup_vrk: float
    grad_v_sq_inner: float
    grad_v_sq_outer: float
    r0: float


@dataclass(frozen=True)
class StateCorpus:
    """Labeled admissible states plus the parameter window they target.

    Membership conditions are envelope-style: masses are recorded per
    member (the corpus may mix masses), while M and B bound every member's
    v-mass and v r^kappa sup.
    """
    members: tuple            # ((label, StatePair), ...)
    window: ParamWindow

    @staticmethod
    def from_states(labeled: Sequence[tuple[str, StatePair]],
                    kappa: float, p: float = 1.1) -> "StateCorpus":
        if not labeled:
            raise ValueError("corpus must be nonempty")
        n = labeled[0][1].grid.n
        M = 0.0
        B = 0.0
        A = 0.0
        for label, s in labeled:
            if s.grid.n != n:
                raise ValueError("corpus members must share the dimension n")
            _require_admissible(label, s)
            M = max(M, s.grid.integrate_values(s.v.values))
            B = max(B, _snapshot_sup_vrk(s, kappa))
            A = max(A, w12_norm(s.v))
        window = param_window(n=n, p=p, kappa=kappa, M=M, B=B, A=A)
        return StateCorpus(members=tuple(labeled), window=window)

    @property
    def size(self) -> int:
        return len(self.members)

    def validate(self) -> None:
        kappa = self.window.kappa
        for label, s in self.members:
            _require_admissible(label, s)
            vm = s.grid.integrate_values(s.v.values)
            if vm > self.window.M * (1 + 1e-12):
                raise ValueError(f"{label}: v-mass {vm} exceeds M={self.window.M}")
            if _snapshot_sup_vrk(s, kappa) > self.window.B * (1 + 1e-12):
                raise ValueError(f"{label}: v r^kappa exceeds B={self.window.B}")


def _require_admissible(label: str, s: StatePair) -> None:
    u, v = s.u.values, s.v.values
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise ValueError(f"{label}: non-finite values")
    if not (np.all(u > 0) and np.all(v > 0)):
        raise ValueError(f"{label}: states must be strictly positive")


def _member_stats(label: str, s: StatePair, kappa: float, beta: float) -> _MemberStats:
    g = s.grid
    rep = energy_report(s)
    v = s.v.values
    vr = _derivative_values(g, np.asarray(v, float), "neumann")
    m = g.integrate_values(s.u.values)
    v_l1 = g.integrate_values(np.abs(v))
    f_l2 = math.sqrt(rep.f_norm_sq)
    g_l2 = math.sqrt(rep.g_norm_sq)
    # the inner/outer split radius used by the interior/exterior estimates
    r0 = min(g.R / 2.0, f_l2 ** (-2.0 / (beta + 1.0))) if f_l2 > 0 else g.R / 2.0
    inner = g.centers < r0
    gv = vr * vr
    gv_in = g.omega_n * float(np.sum(g.weights[inner] * gv[inner]))
    gv_out = rep.grad_v_sq - gv_in
    return _MemberStats(
        label=label, m=m,
        v_mass=g.integrate_values(v),
        uv=rep.uv, grad_v_sq=rep.grad_v_sq, v_sq=rep.v_sq,
        v_l1=v_l1, v_l2=math.sqrt(rep.v_sq),
        f_l2=f_l2, g_l2=g_l2, F=rep.F, D=rep.D,
        sup_vrk=_snapshot_sup_vrk(s, kappa),
        grad_v_sq_inner=gv_in, grad_v_sq_outer=gv_out, r0=r0,
    )


def inequality_suite(corpus: StateCorpus, eps: float = 0.25) -> list[CheckReport]:
    """Ratio checks for the interpolation and coupling inequalities.

    For each inequality the reported worst_ratio strips the
    non-constructive constant: inequalities of the shape
    LHS <= eps X + C Y report max (LHS - eps X)/Y, pure-constant shapes
    report max LHS/RHS.  Pass means finite over the corpus; the empirical
    constant is the persisted ratio, never an asserted value.
    """
    corpus.validate()
    n = corpus.window.n
    kappa = corpus.window.kappa
    theta = corpus.window.theta
    beta = (2.0 * n + 4.0) * kappa / n
    q74 = (2.0 * n + 4.0) / (n + 4.0)
    stats = [
        _member_stats(label, s, kappa, beta) for label, s in corpus.members
    ]

    def report(name: str, vals: list[float], note: str = "") -> CheckReport:
        arr = np.array(vals)
        j = int(np.argmax(arr))
        return CheckReport(
            name=name,
            passed=bool(np.all(np.isfinite(arr))),
            worst_ratio=float(arr[j]),
            location=stats[j].label,
            details={"corpus_size": len(stats), "empirical_constant": float(arr[j])},
            notes=note,
        )

    out = []
    out.append(report(
        "gn_l2_interpolation",
        [st.v_l2 / (st.grad_v_sq ** (0.5 * n / (n + 2.0)) * st.v_l1 ** (2.0 / (n + 2.0))
                    + st.v_l1) for st in stats],
        note="|v|_2 vs |grad v|_2^{n/(n+2)} |v|_1^{2/(n+2)} + |v|_1",
    ))
    out.append(report(
        "gn_l2_squared",
        [(st.v_sq - eps * st.grad_v_sq) / (st.v_l1 ** 2) for st in stats],
        note=f"(|v|_2^2 - {eps} |grad v|_2^2) / |v|_1^2",
    ))
    out.append(report(
        "outer_gradient",
        [(st.grad_v_sq_outer - eps * st.uv - eps * st.grad_v_sq)
         / (st.r0 ** (-beta) + st.f_l2 ** q74) for st in stats],
        note="outer |grad v|^2 vs r0^{-beta} + |f|^{(2n+4)/(n+4)}",
    ))
    out.append(report(
        "inner_gradient",
        [st.grad_v_sq_inner / (st.r0 * st.f_l2 ** 2 + st.g_l2 + st.v_sq + 1.0)
         for st in stats],
        note="inner |grad v|^2 vs r0 |f|^2 + |g| + |v|_2^2 + 1",
    ))
    out.append(report(
        "gradient_vs_dissipation",
        [(st.grad_v_sq - eps * st.uv) / (st.f_l2 ** (2 * theta) + st.g_l2 + 1.0)
         for st in stats],
        note="|grad v|^2 - eps uv vs |f|^{2 theta} + |g| + 1",
    ))
    out.append(report(
        "uv_vs_gradient",
        [(st.uv - 2.0 * st.grad_v_sq) / (st.f_l2 ** q74 + 1.0) for st in stats],
        note="uv - 2 |grad v|^2 vs |f|^{(2n+4)/(n+4)} + 1",
    ))
    out.append(report(
        "uv_vs_dissipation",
        [st.uv / (st.f_l2 ** (2 * theta) + st.g_l2 + 1.0) for st in stats],
        note="uv vs |f|^{2 theta} + |g| + 1",
    ))
    out.append(report(
        "energy_vs_dissipation",
        [-st.F / (st.D ** theta + 1.0) for st in stats],
        note="-F vs D^theta + 1",
    ))
    for rep_ in out:
        log.info("%s", rep_)
    return out


def trajectory_battery(
    traj: Trajectory, kappa: float = 2.0, theta: Optional[float] = None
) -> list[CheckReport]:
    """The standard per-run battery: conservation, energy inequality,
    pointwise bound, grad-v ratio, ODI diagnostics."""
    n = traj.grid.n
    if theta is None:
        theta = theta_exponent(n, kappa)
    t_stop = traj.verdict.t_detect if traj.verdict.outcome == "blew_up" else None
    return [
        check_conservation(traj),
        check_energy_inequality(traj),
        check_pointwise_bound(traj, kappa, t_stop=t_stop),
        check_gradv_lp(traj, traj.config.gradv_p, t_stop=t_stop),
        check_odi_blowup(traj, theta),
    ]
