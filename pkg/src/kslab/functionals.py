"""Energy, dissipation, residuals, and admissible-parameter bookkeeping.

The chemotaxis system evolved here is

    u_t = Lap u - div(u grad v),      v_t = Lap v - v + u,

with Neumann boundaries on a ball in R^n.  Its Lyapunov functional is

    F(u, v) = 1/2 int |grad v|^2 + 1/2 int v^2 - int u v + int u ln u,

and along solutions dF/dt <= -D with

    D(u, v) = int v_t^2 + int u |grad(ln u) - grad v|^2
            = ||f||_2^2 + ||g||_2^2,
    f = -Lap v + v - u,   g = u_r / sqrt(u) - sqrt(u) v_r.

D is evaluated through f and g (the PDE identity), never by differencing F
in time, so it is well defined for a single state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import RadialField, _derivative_values, _laplacian_values

__all__ = [
    "StatePair",
    "EnergyReport",
    "ParamWindow",
    "energy",
    "energy_report",
    "residual_f",
    "residual_g",
    "dissipation",
    "theta_exponent",
    "lp_norm",
    "w12_norm",
    "sup_norm",
    "param_window",
]

# only guards log(0) underflow; positivity violations are rejected, not hidden
_ENTROPY_CLAMP = 1e-300


@dataclass(frozen=True)
class StatePair:
    """A (cell density, signal concentration) pair on a shared grid at time t."""

    u: RadialField
    v: RadialField
    t: float = 0.0

    def __post_init__(self):
        if self.u.grid is not self.v.grid and not _same_grid(self.u.grid, self.v.grid):
            raise ValueError("u and v must live on the same grid")

    @property
    def grid(self):
        return self.u.grid


def _same_grid(a, b) -> bool:
    return (
        a.n == b.n
        and a.R == b.R
        and a.centers.shape == b.centers.shape
        and np.array_equal(a.edges, b.edges)
    )


@dataclass(frozen=True)
class EnergyReport:
    """F and D with their pieces; F = 0.5*grad_v_sq + 0.5*v_sq - uv + entropy
    and D = f_norm_sq + g_norm_sq hold exactly as bookkeeping identities."""

    F: float
    grad_v_sq: float
    v_sq: float
    uv: float
    entropy: float
    D: float
    f_norm_sq: float
    g_norm_sq: float


def _require_positive(vals: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"{name} contains non-finite values")
    if np.any(vals <= 0.0):
        raise ValueError(f"{name} must be strictly positive everywhere")


def _energy_pieces(s: StatePair):
    g = s.grid
    u = np.asarray(s.u.values, float)
    v = np.asarray(s.v.values, float)
    _require_positive(u, "u")
    _require_positive(v, "v")
    vr = _derivative_values(g, v, "neumann")
    grad_v_sq = g.integrate_values(vr * vr)
    v_sq = g.integrate_values(v * v)
    uv = g.integrate_values(u * v)
    entropy = g.integrate_values(u * np.log(np.maximum(u, _ENTROPY_CLAMP)))
    return grad_v_sq, v_sq, uv, entropy, vr


def energy(s: StatePair) -> float:
    """The Lyapunov functional F(u, v)."""
    grad_v_sq, v_sq, uv, entropy, _ = _energy_pieces(s)
    return 0.5 * grad_v_sq + 0.5 * v_sq - uv + entropy


def residual_f(s: StatePair) -> RadialField:
    """f = -Lap v + v - u, the v-equation residual (equals -v_t along solutions)."""
    g = s.grid
    v = np.asarray(s.v.values, float)
    vals = -_laplacian_values(g, v) + v - np.asarray(s.u.values, float)
    return RadialField(g, vals)


def residual_g(s: StatePair) -> RadialField:
    """g = u_r / sqrt(u) - sqrt(u) v_r, the drift-diffusion imbalance."""
    gr = s.grid
    u = np.asarray(s.u.values, float)
    _require_positive(u, "u")
    ur = _derivative_values(gr, u, "neumann")
    vr = _derivative_values(gr, np.asarray(s.v.values, float), "neumann")
    su = np.sqrt(u)
    return RadialField(gr, ur / su - su * vr)


def dissipation(s: StatePair) -> float:
    """D = ||f||_2^2 + ||g||_2^2 >= 0, the energy dissipation rate."""
    rep = energy_report(s)
    return rep.D


def energy_report(s: StatePair) -> EnergyReport:
    grad_v_sq, v_sq, uv, entropy, _ = _energy_pieces(s)
    f = residual_f(s).values
    gg = residual_g(s).values
    g = s.grid
    f2 = g.integrate_values(f * f)
    g2 = g.integrate_values(gg * gg)
    return EnergyReport(
        F=0.5 * grad_v_sq + 0.5 * v_sq - uv + entropy,
        grad_v_sq=grad_v_sq,
        v_sq=v_sq,
        uv=uv,
        entropy=entropy,
        D=f2 + g2,
        f_norm_sq=f2,
        g_norm_sq=g2,
    )


def theta_exponent(n: int, kappa: float) -> float:
    """theta = 1 / (1 + n / ((2n+4) kappa)), the dissipation exponent.

    Defined for kappa > n - 2 (the decay exponent of the pointwise signal
    bound).  Always in (1/2, 1), and satisfies 2 theta > (2n+4)/(n+4), the
    strict inequality that makes the blow-up differential inequality close.
    """
    if n < 3:
        raise ValueError(f"dimension n must be >= 3, got {n}")
    if not kappa > n - 2:
        raise ValueError(f"kappa must exceed n - 2 = {n - 2}, got {kappa}")
    theta = 1.0 / (1.0 + n / ((2.0 * n + 4.0) * kappa))
    # sanity: the superlinearity condition is automatic in this window
    assert 0.5 < theta < 1.0
    assert 2.0 * theta > (2.0 * n + 4.0) / (n + 4.0)
    return theta


def lp_norm(f: RadialField, p: float) -> float:
    if not p >= 1:
        raise ValueError(f"Lp norm needs p >= 1, got {p}")
    g = f.grid
    return g.integrate_values(np.abs(f.values) ** p) ** (1.0 / p)


def sup_norm(f: RadialField) -> float:
    return float(np.max(np.abs(f.values)))


def w12_norm(f: RadialField) -> float:
    """(||f||_2^2 + ||f_r||_2^2)^{1/2} with a one-sided derivative at the ends."""
    g = f.grid
    fr = _derivative_values(g, np.asarray(f.values, float), "none")
    return math.sqrt(
        g.integrate_values(f.values * f.values) + g.integrate_values(fr * fr)
    )


@dataclass(frozen=True)
class ParamWindow:
    """Admissible exponents for the blow-up machinery in dimension n.

    p lives in (1, 2n/(n+2)) (construction integrability), alpha in
    (n - n/p, (n-2)/2) (spike steepness window), kappa > n - 2 (signal decay),
    theta the derived dissipation exponent.  The mass / signal-mass / decay
    caps (m, M, B) and the initial-data size A are carried when known.
    """

    n: int
    p: float
    kappa: float
    alpha: float
    alpha_window: tuple
    theta: float
    m: Optional[float] = None
    M: Optional[float] = None
    B: Optional[float] = None
    A: Optional[float] = None


def param_window(
    n: int,
    p: float,
    kappa: float,
    alpha: Optional[float] = None,
    m: Optional[float] = None,
    M: Optional[float] = None,
    B: Optional[float] = None,
    A: Optional[float] = None,
) -> ParamWindow:
    """Validate exponents and fill alpha with the window midpoint if absent."""
    if n < 3:
        raise ValueError(f"dimension n must be >= 3, got {n}")
    p_hi = 2.0 * n / (n + 2.0)
    if not 1.0 < p < p_hi:
        raise ValueError(f"p must lie in (1, {p_hi}), got {p}")
    lo = n - n / p
    hi = (n - 2.0) / 2.0
    if not lo < hi:
        raise ValueError(f"empty alpha window ({lo}, {hi}) for n={n}, p={p}")
    if alpha is None:
        alpha = 0.5 * (lo + hi)
    if not lo < alpha < hi:
        raise ValueError(f"alpha must lie in ({lo}, {hi}), got {alpha}")
    theta = theta_exponent(n, kappa)
    for name, val in (("m", m), ("M", M), ("B", B), ("A", A)):
        if val is not None and not val > 0:
            raise ValueError(f"{name} must be positive when given, got {val}")
    return ParamWindow(
        n=n, p=p, kappa=kappa, alpha=alpha, alpha_window=(lo, hi),
        theta=theta, m=m, M=M, B=B, A=A,
    )
