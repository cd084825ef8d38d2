"""Numerical evaluation of the closed-form handoff and coverage bounds.

Everything here is deterministic quadrature and special functions; the
Monte-Carlo counterparts live in ``montecarlo``.  The central objects:

* handoff lower bounds for the random-speed and shared-speed mobility
  models, built on the void probability of the region swept by the
  equivalent serving mover (its cell process has twice the UAV density);
* the interference-driven coverage upper bound, evaluated through the
  column sums of the exponential of a lower-triangular Toeplitz matrix
  whose entries come from derivatives of the interference Laplace
  transform (hypergeometric closed forms);
* their combination under a handoff tolerance factor.

Probability outputs are clipped to [0, 1]; clips beyond a 1e-12 slack are
counted so silent quadrature trouble cannot hide.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import gammainc, gammaincinv, gammaln, roots_genlaguerre

from .channel import (
    ChannelSpec,
    GammaParams,
    MOMENT,
    PRINTED,
    aggregate_signal_params,
    interferer_gamma_params,
    signal_gamma_params,
)
from .mobility import MobilityModel, SMS, sms_speed_support_mass

__all__ = [
    "NumericError",
    "QuadratureSpec",
    "ToeplitzExpProblem",
    "HandoffScenario",
    "CoverageScenario",
    "TOEPLITZ_DIM_CAP",
    "gauss_2f1",
    "interferer_intensity_dms",
    "handoff_lb_dms",
    "handoff_lb_sms",
    "handoff_constant_speed",
    "handoff_ref26",
    "joint_distance_pdf",
    "coverage_matrix_dim",
    "toeplitz_entries",
    "exp_toeplitz_norm1",
    "coverage_ub",
    "coverage_with_handoff",
    "clip_events",
    "reset_clip_events",
]

TOEPLITZ_DIM_CAP = 64


class NumericError(RuntimeError):
    """A quadrature or series evaluation failed to converge."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and truncation controls for the nested quadratures."""

    rel_tol: float = 1e-7
    abs_tol: float = 1e-12
    max_subdivisions: int = 6
    truncation_quantile: float = 1.0 - 1e-10

    def __post_init__(self):
        if self.rel_tol <= 0.0 or self.abs_tol <= 0.0:
            raise ValueError("tolerances must be positive")


# the deepest-nested bound gets a looser, absolute-dominated target
_BOUND_QUAD = QuadratureSpec(rel_tol=1e-3, abs_tol=2e-4, max_subdivisions=3)

_CLIP_EVENTS = {"count": 0, "worst": 0.0}


def clip_events() -> dict:
    """Counters of probability clips beyond the 1e-12 slack."""
    return dict(_CLIP_EVENTS)


def reset_clip_events() -> None:
    _CLIP_EVENTS["count"] = 0
    _CLIP_EVENTS["worst"] = 0.0


def _clip01(x: float, label: str) -> float:
    slack = 1e-12
    if x < -slack or x > 1.0 + slack:
        _CLIP_EVENTS["count"] += 1
        _CLIP_EVENTS["worst"] = max(
            _CLIP_EVENTS["worst"], max(-x, x - 1.0)
        )
        warnings.warn(f"{label}: clipped probability {x!r}", stacklevel=3)
    return min(max(x, 0.0), 1.0)


def _safe_arccos(x, guard: float = 1e-9):
    """arccos with arguments clamped to [-1, 1]; large excess is reported."""
    x = np.asarray(x, dtype=float)
    excess = float(np.max(np.abs(x), initial=0.0)) - 1.0
    if excess > guard:
        warnings.warn(f"arccos argument exceeds 1 by {excess:.3e}", stacklevel=3)
    return np.arccos(np.clip(x, -1.0, 1.0))


def _safe_arcsin(x, guard: float = 1e-9):
    x = np.asarray(x, dtype=float)
    excess = float(np.max(np.abs(x), initial=0.0)) - 1.0
    if excess > guard:
        warnings.warn(f"arcsin argument exceeds 1 by {excess:.3e}", stacklevel=3)
    return np.arcsin(np.clip(x, -1.0, 1.0))


_LEGGAUSS_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _LEGGAUSS_CACHE:
        _LEGGAUSS_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _LEGGAUSS_CACHE[n]


def _gl_nodes(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = _leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def _refine(evaluate: Callable[[int], float], quad: QuadratureSpec, label: str) -> float:
    """Double quadrature density until two levels agree."""
    prev = evaluate(1)
    level = 2
    for _ in range(quad.max_subdivisions):
        cur = evaluate(level)
        if abs(cur - prev) <= quad.rel_tol * abs(cur) + quad.abs_tol:
            return cur
        prev = cur
        level *= 2
    raise NumericError(f"{label}: no convergence after {quad.max_subdivisions} refinements "
                       f"(last delta {abs(cur - prev):.3e})")


# ---------------------------------------------------------------------------
# domain scenarios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HandoffScenario:
    """Inputs of a handoff-probability evaluation."""

    lambda0: float
    t: float
    model: MobilityModel
    zeta: float = 0.0

    def __post_init__(self):
        if not self.lambda0 > 0.0:
            raise ValueError(f"lambda0 must be positive, got {self.lambda0}")
        if self.t < 0.0:
            raise ValueError(f"t must be nonnegative, got {self.t}")
        if not 0.0 <= self.zeta <= 1.0:
            raise ValueError(f"zeta must lie in [0, 1], got {self.zeta}")


@dataclass(frozen=True)
class CoverageScenario:
    """Inputs of a coverage-probability evaluation."""

    gamma: float
    lambda0: float
    spec: ChannelSpec
    h: float

    def __post_init__(self):
        if self.gamma < 0.0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")
        if not self.lambda0 > 0.0:
            raise ValueError(f"lambda0 must be positive, got {self.lambda0}")
        if not self.h > 0.0:
            raise ValueError(f"h must be positive, got {self.h}")


@dataclass(frozen=True)
class ToeplitzExpProblem:
    """Lower-triangular Toeplitz exponential: dimension and first column."""

    dim: int
    entries: tuple

    def __post_init__(self):
        if not 1 <= self.dim <= TOEPLITZ_DIM_CAP:
            raise ValueError(f"dim must lie in [1, {TOEPLITZ_DIM_CAP}], got {self.dim}")
        ent = tuple(float(e) for e in self.entries)
        if len(ent) != self.dim:
            raise ValueError(f"need {self.dim} entries, got {len(ent)}")
        object.__setattr__(self, "entries", ent)


# ---------------------------------------------------------------------------
# Gauss hypergeometric function for nonpositive argument
# ---------------------------------------------------------------------------


def gauss_2f1(a: float, b: float, c: float, x: float) -> float:
    """2F1(a, b; c; x) for x <= 0.

    The argument is mapped to x/(x-1) in [0, 1) (which swaps b for c-b and
    scales by (1-x)^-a), where the Gauss series converges; the series is
    summed with term recurrences to ~1e-14.
    """
    if x > 0.0:
        raise ValueError(f"only nonpositive arguments are supported, got {x}")
    if c <= 0.0 and abs(c - round(c)) < 1e-12:
        raise ValueError(f"c must not be a nonpositive integer, got {c}")
    if x == 0.0:
        return 1.0
    z = x / (x - 1.0)
    b2 = c - b
    term = 1.0
    total = 1.0
    max_abs = 1.0
    for p in range(500_000):
        term *= (a + p) * (b2 + p) / ((c + p) * (1.0 + p)) * z
        total += term
        max_abs = max(max_abs, abs(total))
        if abs(term) <= 1e-15 * abs(total) + 1e-300:
            if max_abs > 1e8 * max(abs(total), 1e-300):
                raise NumericError(
                    f"2F1 series cancellation: max partial {max_abs:.3e}, sum {total:.3e}"
                )
            return (1.0 - x) ** (-a) * total
    raise NumericError(
        f"2F1 series did not converge: a={a}, b={b}, c={c}, x={x}, z={z}"
    )


def _hyp2f1_unit_b(a: float, c: float, z: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """2F1(a, 1; c; z) on z in [0, 1), vectorized positive-term series."""
    z = np.asarray(z, dtype=float)
    term = np.ones_like(z)
    total = np.ones_like(z)
    p = 0
    active = np.ones(z.shape, dtype=bool)
    while True:
        term = term * ((a + p) / (c + p)) * z
        total += term
        p += 1
        active = term > tol * total
        if not active.any():
            return total
        if p > 500_000:
            raise NumericError(f"2F1(a,1;c;z) stalled at z_max={z.max():.6f}")


# ---------------------------------------------------------------------------
# interferer intensity under random speeds
# ---------------------------------------------------------------------------


def _initially_inside_prob(
    r: np.ndarray,
    r_star: float,
    t: float,
    speed_pdf: Callable,
    speed_cdf: Callable,
    order: int = 48,
) -> np.ndarray:
    """P[a point now at radius r started inside the radius-r_star disk].

    A point that moved distance v t sits on a circle of that radius around
    its current position; the inside fraction is an arccos wedge averaged
    over the speed law.
    """
    r = np.asarray(r, dtype=float)
    out = np.asarray(speed_cdf((r_star - r) / t), dtype=float).copy()
    lo = np.abs(r_star - r) / t
    hi = (r_star + r) / t
    x, w = _leggauss(order)
    half = 0.5 * (hi - lo)
    u = lo[..., None] + half[..., None] * (x + 1.0)
    den = np.maximum(2.0 * r[..., None] * u * t, 1e-300)
    arg = (r[..., None] ** 2 + (u * t) ** 2 - r_star**2) / den
    wedge = np.arccos(np.clip(arg, -1.0, 1.0)) / math.pi
    out += np.sum(np.asarray(speed_pdf(u)) * wedge * w, axis=-1) * half
    return np.clip(out, 0.0, 1.0)


def interferer_intensity_dms(
    t: float,
    r_i: float,
    r_star: float,
    speed_pdf: Callable,
    speed_cdf: Callable,
    lambda0: float,
    quad: Optional[QuadratureSpec] = None,
) -> float:
    """Density of surviving interferers at radius ``r_i`` after time ``t``.

    Nearest association empties the disk of radius ``r_star`` at time zero;
    mobile points thin the far field accordingly.  ``speed_pdf``/``speed_cdf``
    describe the (equivalent) mover speed.
    """
    if not t > 0.0:
        raise ValueError(f"t must be positive, got {t}")
    if r_i < 0.0 or r_star < 0.0:
        raise ValueError("radii must be nonnegative")
    quad = quad or QuadratureSpec()
    if r_i == 0.0:
        return lambda0 * (1.0 - float(speed_cdf(r_star / t)))

    def evaluate(level: int) -> float:
        p_in = _initially_inside_prob(
            np.array([r_i]), r_star, t, speed_pdf, speed_cdf, order=32 * level
        )[0]
        return lambda0 * (1.0 - float(p_in))

    return _refine(evaluate, quad, "interferer_intensity_dms")


# ---------------------------------------------------------------------------
# handoff bounds
# ---------------------------------------------------------------------------


def _lens_area(r1, r2, dist):
    """Intersection area of two circles (radii r1, r2, centers dist apart)."""
    r1, r2, dist = np.broadcast_arrays(
        np.asarray(r1, float), np.asarray(r2, float), np.asarray(dist, float)
    )
    den1 = np.maximum(2.0 * dist * r1, 1e-300)
    den2 = np.maximum(2.0 * dist * r2, 1e-300)
    phi1 = np.arccos(np.clip((dist**2 + r1**2 - r2**2) / den1, -1.0, 1.0))
    phi2 = np.arccos(np.clip((dist**2 + r2**2 - r1**2) / den2, -1.0, 1.0))
    lens = r1**2 * (phi1 - 0.5 * np.sin(2.0 * phi1)) + r2**2 * (
        phi2 - 0.5 * np.sin(2.0 * phi2)
    )
    # concentric limit: the clamped formula is fine except at dist ~ 0
    concentric = dist <= 1e-12 * np.maximum(r1, r2)
    return np.where(concentric, math.pi * np.minimum(r1, r2) ** 2, lens)


def _union_area(r1, r2, dist):
    return math.pi * (np.asarray(r1) ** 2 + np.asarray(r2) ** 2) - _lens_area(r1, r2, dist)


def handoff_constant_speed(
    lambda0: float, v_bar: float, t: float, quad: Optional[QuadratureSpec] = None
) -> float:
    """Handoff probability when every equivalent mover has speed ``v_bar``.

    With a degenerate speed law the swept-region bound is exact: the event
    is the void probability, at cell density twice ``lambda0``, of the
    union of the before/after disks around the user.
    """
    if not lambda0 > 0.0:
        raise ValueError(f"lambda0 must be positive, got {lambda0}")
    if v_bar < 0.0 or t < 0.0:
        raise ValueError("v_bar and t must be nonnegative")
    if t == 0.0 or v_bar == 0.0:
        return 0.0
    quad = quad or QuadratureSpec(rel_tol=1e-9, abs_tol=1e-10)
    rho = v_bar * t
    r_hi = math.sqrt(math.log(1e12) / (2.0 * math.pi * lambda0)) + rho

    def evaluate(level: int) -> float:
        th, w_th = _gl_nodes(0.0, math.pi, 48 * level)
        r, w_r = _gl_nodes(0.0, r_hi, 64 * level)
        thg = th[:, None]
        rg = r[None, :]
        big_r = np.sqrt(rg**2 + rho**2 + 2.0 * rg * rho * np.cos(thg))
        # exponent: void probability of the union of the two user disks
        union = _union_area(rg, big_r, rho)
        integrand = 2.0 * lambda0 * rg * np.exp(-2.0 * lambda0 * union)
        inner = integrand @ w_r
        return 1.0 - 2.0 * float(inner @ w_th)

    val = _refine(evaluate, quad, "handoff_constant_speed")
    return _clip01(val, "handoff_constant_speed")


def _swept_terms(lam_cell: float, rho: np.ndarray, r_hi: float, n_th: int, n_r: int) -> np.ndarray:
    """Piecewise swept-area integrals per displacement, for the void bound.

    Returns T(rho) with P = 1 - 2 lam_cell sum(weights * T).  The angular
    domain splits where the far-disk inscribed angle passes pi/2; on each
    piece the integrand r exp(-lam_cell (R^2 u + r^2 th + r rho sin th))
    is smooth.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    out = np.zeros_like(rho)

    def q_term(u, rg, thg, rho_g, big_r):
        return rg * np.exp(
            -lam_cell * (big_r**2 * u + rg**2 * thg + rg * rho_g * np.sin(thg))
        )

    # piece 1: th in [0, pi/2], r in (0, r_hi)
    th1, w1 = _gl_nodes(0.0, 0.5 * math.pi, n_th)
    r1, wr1 = _gl_nodes(0.0, r_hi, n_r)
    thg = th1[None, :, None]
    rg = r1[None, None, :]
    rho_g = rho[:, None, None]
    big_r = np.sqrt(rg**2 + rho_g**2 + 2.0 * rg * rho_g * np.cos(thg))
    asin = _safe_arcsin(rho_g * np.sin(thg) / np.maximum(big_r, 1e-300))
    u1 = math.pi - thg + asin
    out += np.einsum("xtr,t,r->x", q_term(u1, rg, thg, rho_g, big_r), w1, wr1)

    # pieces 2 and 3: th in (pi/2, pi), split at r = rho cos(pi - th)
    th2, w2 = _gl_nodes(0.5 * math.pi, math.pi, n_th)
    delta = rho[:, None] * np.cos(math.pi - th2[None, :])  # (x, t)
    x01, wx01 = _leggauss(n_r)
    x01 = 0.5 * (x01 + 1.0)
    wx01 = 0.5 * wx01

    # near piece: r in (0, delta) uses the reflexive wedge
    rg = delta[:, :, None] * x01[None, None, :]
    wr = delta[:, :, None] * wx01[None, None, :]
    thg = th2[None, :, None]
    rho_g = rho[:, None, None]
    big_r = np.sqrt(rg**2 + rho_g**2 + 2.0 * rg * rho_g * np.cos(thg))
    asin = _safe_arcsin(rho_g * np.sin(thg) / np.maximum(big_r, 1e-300))
    u2 = 2.0 * math.pi - thg - asin
    out += np.einsum("xtr,t->x", q_term(u2, rg, thg, rho_g, big_r) * wr, w2)

    # far piece: r in (delta, r_hi)
    span = np.maximum(r_hi - delta, 0.0)
    rg = delta[:, :, None] + span[:, :, None] * x01[None, None, :]
    wr = span[:, :, None] * wx01[None, None, :]
    big_r = np.sqrt(rg**2 + rho_g**2 + 2.0 * rg * rho_g * np.cos(thg))
    asin = _safe_arcsin(rho_g * np.sin(thg) / np.maximum(big_r, 1e-300))
    u1 = math.pi - thg + asin
    out += np.einsum("xtr,t->x", q_term(u1, rg, thg, rho_g, big_r) * wr, w2)
    return out


def handoff_ref26(lam: float, v: float, t: float, quad: Optional[QuadratureSpec] = None) -> float:
    """Nearest-cell handoff probability for a single-tier network.

    Three-piece integral form for a static network of density ``lam``
    observed by a user displaced by ``v t``; used as the cross-check twin
    of ``handoff_constant_speed`` (which must agree at twice the UAV
    density).
    """
    if not lam > 0.0:
        raise ValueError(f"lam must be positive, got {lam}")
    if v < 0.0 or t < 0.0:
        raise ValueError("v and t must be nonnegative")
    if v == 0.0 or t == 0.0:
        return 0.0
    quad = quad or QuadratureSpec(rel_tol=1e-9, abs_tol=1e-10)
    rho = v * t
    r_hi = math.sqrt(math.log(1e12) / (math.pi * lam)) + rho

    def evaluate(level: int) -> float:
        total = _swept_terms(lam, np.array([rho]), r_hi, 48 * level, 48 * level)[0]
        return 1.0 - 2.0 * lam * total

    val = _refine(evaluate, quad, "handoff_ref26")
    return _clip01(val, "handoff_ref26")


def handoff_lb_sms(scenario: HandoffScenario, quad: Optional[QuadratureSpec] = None) -> float:
    """Lower bound on the handoff probability for the shared-speed model.

    The equivalent mover speed follows the Maxwell-type density on
    [0, 3 v0]; the density is renormalized on that support so the bound is
    exactly zero at t = 0.
    """
    if scenario.model.kind != SMS:
        raise ValueError("handoff_lb_sms requires the shared-speed model")
    if scenario.t == 0.0:
        return 0.0
    quad = quad or QuadratureSpec(rel_tol=1e-7, abs_tol=1e-9)
    lam0 = scenario.lambda0
    v0 = scenario.model.v0
    t = scenario.t
    mass = sms_speed_support_mass(v0)
    r_hi = math.sqrt(math.log(1e12) / (2.0 * math.pi * lam0)) + 3.0 * v0 * t

    def evaluate(level: int) -> float:
        x, w_x = _gl_nodes(0.0, 3.0 * v0, 32 * level)
        f = (
            math.sqrt(2.0 / math.pi)
            * x**2
            / v0**3
            * np.exp(-(x**2) / (2.0 * v0**2))
            / mass
        )
        terms = _swept_terms(2.0 * lam0, x * t, r_hi, 32 * level, 48 * level)
        return 1.0 - 4.0 * lam0 * float(np.sum(w_x * f * terms))

    val = _refine(evaluate, quad, "handoff_lb_sms")
    return _clip01(val, "handoff_lb_sms")


def _gamma_speed_law(model: MobilityModel) -> tuple[Callable, Callable, Callable, float]:
    """(pdf, cdf, quantile, mean) of the equivalent mover speed."""
    a, b = model.speed_moments().gamma_ab()
    log_norm = math.log(2.0) - gammaln(a) - a * math.log(b)

    def pdf(x):
        x = np.asarray(x, dtype=float)
        pos = x > 0.0
        safe = np.where(pos, x, 1.0)
        val = np.exp(log_norm + (2.0 * a - 1.0) * np.log(safe) - safe**2 / b)
        return np.where(pos, val, 0.0)

    def cdf(x):
        x = np.asarray(x, dtype=float)
        return gammainc(a, np.clip(x, 0.0, None) ** 2 / b)

    def quantile(q):
        return math.sqrt(b * float(gammaincinv(a, q)))

    return pdf, cdf, quantile, math.sqrt(b) * math.exp(
        float(gammaln(a + 0.5) - gammaln(a))
    )


def handoff_lb_dms(scenario: HandoffScenario, quad: Optional[QuadratureSpec] = None) -> float:
    """Lower bound on the handoff probability for the random-speed model.

    Triple quadrature over the mover speed, the initial nearest-cell
    distance, and the direction; the inner exponent integrates the
    thinned interferer intensity over the swept disk.  The cumulative
    inner integral is tabulated per nearest-distance node and looked up
    by monotone interpolation.
    """
    if scenario.model.kind == SMS:
        raise ValueError("handoff_lb_dms requires the random-speed model")
    if scenario.t == 0.0:
        return 0.0
    quad = quad or _BOUND_QUAD
    lam0 = scenario.lambda0
    t = scenario.t
    pdf, cdf, quantile, _ = _gamma_speed_law(scenario.model)
    x_hi = quantile(quad.truncation_quantile)
    r_hi = math.sqrt(math.log(1e12) / (2.0 * math.pi * lam0))

    def evaluate(level: int) -> float:
        n_x = 24 * level
        n_r = 28 * level
        n_th = 24 * level
        knots = 160 * level
        order = 12

        x, w_x = _gl_nodes(0.0, x_hi, n_x)
        f_x = pdf(x)
        rs, w_rs = _gl_nodes(0.0, r_hi, n_r)
        th, w_th = _gl_nodes(0.0, math.pi, n_th)
        cos_th = np.cos(th)

        total = 0.0
        gx, gw = _leggauss(order)
        gx01 = 0.5 * (gx + 1.0)
        gw01 = 0.5 * gw
        for r_star, w_r in zip(rs, w_rs):
            r_max = r_star + x_hi * t
            edges = np.linspace(0.0, r_max, knots + 1)
            width = edges[1] - edges[0]
            mids = edges[:-1, None] + width * gx01[None, :]
            p_in = _initially_inside_prob(mids.ravel(), r_star, t, pdf, cdf).reshape(
                mids.shape
            )
            seg = width * np.sum(mids * p_in * gw01[None, :], axis=1)
            cum = np.concatenate([[0.0], np.cumsum(seg)])
            c_of = PchipInterpolator(edges, cum)

            big_r = np.sqrt(
                r_star**2
                + (x[:, None] * t) ** 2
                + 2.0 * r_star * (x[:, None] * t) * cos_th[None, :]
            )
            w_void = 2.0 * lam0 * math.pi * big_r**2 - 4.0 * math.pi * lam0 * c_of(big_r)
            inner = np.einsum("xt,x,t->", np.exp(-w_void), w_x * f_x, w_th)
            total += (
                w_r * 2.0 * lam0 * r_star * math.exp(-2.0 * lam0 * math.pi * r_star**2) * inner
            )
        return 1.0 - 2.0 * total  # direction symmetry folds [-pi, pi) onto [0, pi)

    val = _refine(evaluate, quad, "handoff_lb_dms")
    return _clip01(val, "handoff_lb_dms")


# ---------------------------------------------------------------------------
# coverage bound
# ---------------------------------------------------------------------------


def joint_distance_pdf(x, y, z, lam: float):
    """Joint density of the three nearest-point distances of a plane process.

    Supported on 0 < x <= y <= z; equals (2 lam pi)^3 x y z exp(-lam pi z^2).
    """
    if not lam > 0.0:
        raise ValueError(f"lam must be positive, got {lam}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(x <= 0.0) or np.any(y < x) or np.any(z < y):
        raise ValueError("need 0 < x <= y <= z")
    val = (2.0 * lam * math.pi) ** 3 * x * y * z * np.exp(-lam * math.pi * z**2)
    return val if val.ndim else float(val)


def _ordered_triple_nodes(lam: float, h: float, n_z: int, n_ab: int):
    """Quadrature nodes over the ordered distance cone, plus slants.

    Substituting w = lam pi z^2 turns the outermost integral into a
    generalized Gauss-Laguerre rule with weight w^2 e^-w; the inner
    rectangle (a, b) in [0,1]^2 carries density 8 a b^3.
    """
    w_nodes, w_weights = roots_genlaguerre(n_z, 2.0)
    z = np.sqrt(w_nodes / (lam * math.pi))
    a, w_a = _gl_nodes(0.0, 1.0, n_ab)
    b, w_b = _gl_nodes(0.0, 1.0, n_ab)
    zg = z[:, None, None]
    ag = a[None, :, None]
    bg = b[None, None, :]
    r3 = np.broadcast_to(zg, (n_z, n_ab, n_ab))
    r2 = bg * zg
    r1 = ag * bg * zg
    weight = (
        0.5
        * w_weights[:, None, None]
        * (8.0 * ag * bg**3)
        * w_a[None, :, None]
        * w_b[None, None, :]
    )
    d = lambda r: np.sqrt(r**2 + h**2)
    return d(r1), d(r2), d(r3), weight


def coverage_matrix_dim(
    lambda0: float, spec: ChannelSpec, h: float, quad: Optional[QuadratureSpec] = None
) -> int:
    """Dimension of the coverage Toeplitz matrix.

    The rounded mean, over the three nearest distances, of the aggregate
    serving shape n1 (sum d^-a)^2 / sum d^-2a; capped at
    ``TOEPLITZ_DIM_CAP``.
    """
    quad = quad or QuadratureSpec()
    sig = signal_gamma_params(spec)
    alpha = spec.ple

    def evaluate(level: int) -> float:
        d1, d2, d3, wt = _ordered_triple_nodes(lambda0, h, 32 * level, 16 * level)
        s1 = d1**-alpha + d2**-alpha + d3**-alpha
        s2 = d1 ** (-2 * alpha) + d2 ** (-2 * alpha) + d3 ** (-2 * alpha)
        return float(np.sum(wt * sig.shape * s1**2 / s2))

    mean_shape = _refine(evaluate, quad, "coverage_matrix_dim")
    dim = int(round(mean_shape))
    if dim > TOEPLITZ_DIM_CAP:
        raise NumericError(
            f"matrix dimension {dim} exceeds the cap {TOEPLITZ_DIM_CAP}"
        )
    return max(dim, 1)


def _toeplitz_entries_arrays(
    k_max: int,
    d3: np.ndarray,
    gamma: float,
    alpha: float,
    n2: float,
    beta2: float,
    beta_prime: np.ndarray,
    lam: float,
) -> np.ndarray:
    """Entries e_0..e_k_max per node; d3 and beta_prime broadcast together."""
    d3 = np.asarray(d3, dtype=float)
    beta_prime = np.asarray(beta_prime, dtype=float)
    shape = np.broadcast_shapes(d3.shape, beta_prime.shape)
    out = np.zeros(shape + (k_max + 1,))
    if gamma == 0.0:
        return out
    for k in range(k_max + 1):
        if abs(2.0 - k * alpha) < 1e-9:
            warnings.warn(
                f"k*alpha == 2 at k={k}; alpha perturbed by 1e-9", stacklevel=3
            )
            alpha = alpha + 1e-9
    x = -beta2 * gamma * d3**-alpha / (3.0 * beta_prime)
    log_pref_base = math.log(2.0 * lam * math.pi)
    for k in range(k_max + 1):
        hyp = (1.0 - x) ** -(k + n2) * _hyp2f1_unit_b(
            k + n2, k + 1.0 - 2.0 / alpha, x / (x - 1.0)
        )
        log_coef = (
            log_pref_base
            + float(gammaln(k + n2) - gammaln(n2) - gammaln(k + 1.0))
            + (2.0 - k * alpha) * np.log(d3)
            + k * np.log(beta2 * gamma / (3.0 * beta_prime))
            - math.log(abs(2.0 - k * alpha))
        )
        term = np.sign(2.0 - k * alpha) * np.exp(log_coef) * hyp
        e_k = -term
        if k == 0:
            e_k = lam * math.pi * d3**2 - term
        out[..., k] = e_k
    return out


def toeplitz_entries(
    k_max: int,
    d3: float,
    gamma: float,
    alpha: float,
    n2: float,
    beta2: float,
    beta_prime: float,
    lam: float,
) -> np.ndarray:
    """First column of the coverage Toeplitz matrix.

    Entry k packs the k-th scaled derivative of the interference Laplace
    transform at the coverage threshold; entry 0 is its logarithm.  All
    inputs scalar; gamma = 0 yields all zeros.
    """
    if gamma < 0.0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    if k_max < 0:
        raise ValueError(f"k_max must be nonnegative, got {k_max}")
    return _toeplitz_entries_arrays(
        k_max, np.asarray(float(d3)), gamma, alpha, n2, beta2,
        np.asarray(float(beta_prime)), lam,
    )


def _exp_series_coefficients(entries: np.ndarray) -> tuple[np.ndarray, float]:
    """Taylor coefficients of exp(sum_k>=1 e_k x^k) mod x^dim, with scaling.

    Returns (coefficients, log_scale) where the true coefficients are
    coefficients * exp(log_scale); the recurrence rescales on overflow.
    """
    dim = entries.shape[-1]
    c = np.zeros(dim)
    c[0] = 1.0
    log_scale = 0.0
    for n in range(1, dim):
        j = np.arange(1, n + 1)
        c[n] = float(np.sum(j * entries[j] * c[n - j])) / n
        peak = abs(c[n])
        if peak > 1e250:
            c[: n + 1] *= math.exp(-500.0)
            log_scale += 500.0
    return c, log_scale


def _exp_toeplitz_lognorm(entries: np.ndarray) -> float:
    """log( || exp(E) ||_1 ) for the lower-triangular Toeplitz E."""
    c, log_scale = _exp_series_coefficients(entries)
    s = float(np.sum(np.abs(c)))
    return float(entries[0]) + math.log(s) + log_scale


def _exp_toeplitz_lognorm_batch(entries: np.ndarray) -> np.ndarray:
    """Batched log-norm over rows of an (n, dim) entry array.

    Only used with nonnegative off-diagonal entries, where the Taylor
    coefficients stay nonnegative and scaling by a common factor per
    iteration keeps them representable.
    """
    n, dim = entries.shape
    c = np.zeros((n, dim))
    c[:, 0] = 1.0
    log_scale = np.zeros(n)
    for k in range(1, dim):
        j = np.arange(1, k + 1)
        c[:, k] = np.einsum("j,nj,nj->n", j, entries[:, 1 : k + 1], c[:, k - j]) / k
        big = c[:, k] > 1e250
        if big.any():
            c[big, : k + 1] *= math.exp(-500.0)
            log_scale[big] += 500.0
    return entries[:, 0] + np.log(np.sum(np.abs(c), axis=1)) + log_scale


def exp_toeplitz_norm1(problem: ToeplitzExpProblem) -> float:
    """Induced 1-norm of exp(E) for lower-triangular Toeplitz E.

    E = e0 I + N with N strictly lower Toeplitz and nilpotent, so exp(E)
    is again lower-triangular Toeplitz; its first column holds the Taylor
    coefficients of exp of the entry series and dominates every other
    column's absolute sum.  The scalar factor exp(e0) is handled in the
    log domain.
    """
    entries = np.asarray(problem.entries, dtype=float)
    return float(np.exp(_exp_toeplitz_lognorm(entries)))


def coverage_ub(
    scn: CoverageScenario,
    quad: Optional[QuadratureSpec] = None,
    beta_prime_convention: str = MOMENT,
    dim: Optional[int] = None,
) -> float:
    """Upper bound on the coverage probability of the typical user.

    Averages the Toeplitz-exponential column norm over the joint law of
    the three nearest distances.  ``beta_prime_convention`` switches the
    aggregate scale between the moment-matched form (default, validated
    against simulation) and the printed alternative.
    """
    quad = quad or QuadratureSpec(rel_tol=1e-6, abs_tol=1e-9)
    if scn.gamma == 0.0:
        return 1.0
    spec = scn.spec
    sig = signal_gamma_params(spec)
    intf = interferer_gamma_params(spec)
    alpha = spec.ple
    eps = dim if dim is not None else coverage_matrix_dim(scn.lambda0, spec, scn.h, quad=quad)

    def evaluate(level: int) -> float:
        d1, d2, d3, wt = _ordered_triple_nodes(scn.lambda0, scn.h, 32 * level, 16 * level)
        s1 = d1**-alpha + d2**-alpha + d3**-alpha
        s2 = d1 ** (-2 * alpha) + d2 ** (-2 * alpha) + d3 ** (-2 * alpha)
        if beta_prime_convention == MOMENT:
            bprime = sig.scale * s2 / s1
        elif beta_prime_convention == PRINTED:
            bprime = s2 / (sig.scale * s1)
        else:
            raise ValueError(f"unknown convention {beta_prime_convention!r}")
        entries = _toeplitz_entries_arrays(
            eps - 1, d3, scn.gamma, alpha, intf.shape, intf.scale, bprime, scn.lambda0
        )
        lognorm = _exp_toeplitz_lognorm_batch(entries.reshape(-1, eps))
        # each node's value is a truncated exponential partial sum, <= 1
        vals = np.exp(np.minimum(lognorm, 0.0))
        return float(np.sum(wt.ravel() * vals))

    val = _refine(evaluate, quad, "coverage_ub")
    return _clip01(val, "coverage_ub")


def coverage_with_handoff(handoff_p: float, coverage_p: float, zeta: float) -> float:
    """Coverage probability discounted by the handoff tolerance ``zeta``."""
    for name, v in (("handoff_p", handoff_p), ("coverage_p", coverage_p), ("zeta", zeta)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    return ((1.0 - zeta) + zeta * (1.0 - handoff_p)) * coverage_p
