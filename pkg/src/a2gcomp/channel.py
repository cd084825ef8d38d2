"""Fading samplers, Gamma moment matching, and the received SIR.

Each UAV carries M antennas and inverts its own downlink channel, so the
useful amplitude from a serving UAV is the channel norm.  An interfering
UAV beamforms to its own user; relative to the tagged user's channel that
precoder is an independent isotropic unit vector.  Per-antenna envelopes
follow a Rician law with factor K (handled through its Nakagami shape
approximation in the analytics) or the two-parameter eta/mu power model.

The network is interference limited: noise never enters the SIR.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .point_process import UavField
from .triangulation import CompSet

__all__ = [
    "NAKAGAMI_RICIAN",
    "ETA_MU",
    "ChannelSpec",
    "GammaParams",
    "signal_gamma_params",
    "interferer_gamma_params",
    "calibrate_interferer_gamma_params",
    "aggregate_signal_params",
    "sample_fading",
    "sir",
    "mean_tail_interference",
]

NAKAGAMI_RICIAN = "nakagami_rician"
ETA_MU = "eta_mu"


@dataclass(frozen=True)
class ChannelSpec:
    """Antennas, fading family, path loss, and power control.

    ``ple`` is the path-loss exponent (> 2); ``pc_exponent`` the fractional
    power-control exponent in [0, 1] (0 means equal transmit power).
    """

    antennas: int = 2
    rician_k: float = 1.0
    ple: float = 2.4
    tx_power: float = 1.0
    pc_exponent: float = 0.0
    fading: str = NAKAGAMI_RICIAN
    eta: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        if int(self.antennas) != self.antennas or self.antennas < 1:
            raise ValueError(f"antennas must be a positive integer, got {self.antennas}")
        object.__setattr__(self, "antennas", int(self.antennas))
        if self.rician_k < 0.0:
            raise ValueError(f"rician_k must be nonnegative, got {self.rician_k}")
        if not self.ple > 2.0:
            raise ValueError(f"ple must exceed 2, got {self.ple}")
        if not self.tx_power > 0.0:
            raise ValueError(f"tx_power must be positive, got {self.tx_power}")
        if not 0.0 <= self.pc_exponent <= 1.0:
            raise ValueError(f"pc_exponent must lie in [0, 1], got {self.pc_exponent}")
        if self.fading not in (NAKAGAMI_RICIAN, ETA_MU):
            raise ValueError(f"unknown fading family {self.fading!r}")
        if self.fading == ETA_MU and not (self.eta > 0.0 and self.mu > 0.0):
            raise ValueError(f"eta and mu must be positive, got ({self.eta}, {self.mu})")


@dataclass(frozen=True)
class GammaParams:
    """Shape/scale pair of a Gamma power distribution."""

    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0.0 and self.scale > 0.0):
            raise ValueError(f"shape and scale must be positive, got {self}")

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    @property
    def variance(self) -> float:
        return self.shape * self.scale**2


def signal_gamma_params(spec: ChannelSpec) -> GammaParams:
    """Gamma fit of the maximum-ratio serving gain over M antennas.

    One antenna's power gain matches shape (K+1)^2 / (2K+1) and mean K+1;
    summing M independent antennas multiplies the shape by M.
    """
    if spec.fading != NAKAGAMI_RICIAN:
        raise ValueError("signal_gamma_params requires the Rician family")
    k = spec.rician_k
    n = (k + 1.0) ** 2 / (2.0 * k + 1.0)
    beta = k + 1.0
    return GammaParams(shape=n * spec.antennas, scale=beta / n)


def interferer_gamma_params(spec: ChannelSpec) -> GammaParams:
    """Gamma fit of one interferer's cross gain |g^H w|^2.

    With w an isotropic unit vector independent of g, the gain has mean
    K+1 (any M) and variance 1 + 2K + K^2 (M-1)/(M+1): conditioned on
    s = |1^H w|^2 the gain is noncentral with mean K s + 1 and variance
    1 + 2 K s, and M s follows Beta(1, M-1) scaled by M.
    """
    if spec.fading != NAKAGAMI_RICIAN:
        raise ValueError("interferer_gamma_params requires the Rician family")
    k = spec.rician_k
    m = spec.antennas
    mean = k + 1.0
    var = 1.0 + 2.0 * k + k**2 * (m - 1.0) / (m + 1.0)
    return GammaParams(shape=mean**2 / var, scale=var / mean)


def calibrate_interferer_gamma_params(
    spec: ChannelSpec, draws: int = 1_000_000, seed: int = 20_240_915
) -> GammaParams:
    """Moment-match the cross gain from a large sampled reference."""
    rng = np.random.default_rng(seed)
    h = sample_fading(spec, "interfering", rng, size=draws)
    mean = float(h.mean())
    var = float(h.var(ddof=1))
    return GammaParams(shape=mean**2 / var, scale=var / mean)


PRINTED = "printed"
MOMENT = "moment"


def aggregate_signal_params(
    d, sig: GammaParams, alpha: float, convention: str = MOMENT
) -> GammaParams:
    """Gamma fit of the summed distance-weighted serving power.

    Moment matching of sum_i h_i d_i^-alpha with h_i ~ Gamma(sig) gives
    shape n1 (sum d^-a)^2 / sum d^-2a and scale beta1 sum d^-2a / sum d^-a.
    ``convention="printed"`` keeps an alternative scale with beta1 moved
    to the denominator, retained for comparison.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0.0):
        raise ValueError("distances must be positive")
    s1 = float(np.sum(d**-alpha))
    s2 = float(np.sum(d ** (-2.0 * alpha)))
    shape = sig.shape * s1**2 / s2
    if convention == MOMENT:
        scale = sig.scale * s2 / s1
    elif convention == PRINTED:
        scale = s2 / (sig.scale * s1)
    else:
        raise ValueError(f"unknown convention {convention!r}")
    return GammaParams(shape=shape, scale=scale)


def _rician_vectors(k: float, m: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """(n, m) complex channel vectors with per-antenna CN(sqrt(K), 1) entries."""
    w = rng.standard_normal((n, m, 2))
    return math.sqrt(k) + (w[..., 0] + 1j * w[..., 1]) / math.sqrt(2.0)


def _eta_mu_powers(eta: float, mu: float, size, rng: np.random.Generator) -> np.ndarray:
    """Unit-mean power gains: scaled sum of two Gamma(mu, 2) cluster powers."""
    sig_x2 = eta / (2.0 * mu * (1.0 + eta))
    sig_y2 = 1.0 / (2.0 * mu * (1.0 + eta))
    a = rng.gamma(mu, 2.0, size)
    b = rng.gamma(mu, 2.0, size)
    return sig_x2 * a + sig_y2 * b


def sample_fading(
    spec: ChannelSpec, role: str, rng: np.random.Generator, size: int = 1
) -> np.ndarray:
    """Power gains for ``size`` links.

    ``role="serving"`` returns the maximum-ratio gain ||g||^2; with the
    eta/mu family that is a sum of M independent unit-mean cluster powers.
    ``role="interfering"`` returns |g^H w|^2 against an isotropic unit
    precoder (one unit-mean power draw for eta/mu).
    """
    if role not in ("serving", "interfering"):
        raise ValueError(f"role must be serving or interfering, got {role!r}")
    m = spec.antennas
    if spec.fading == ETA_MU:
        if role == "serving":
            return _eta_mu_powers(spec.eta, spec.mu, (size, m), rng).sum(axis=1)
        return _eta_mu_powers(spec.eta, spec.mu, size, rng)
    g = _rician_vectors(spec.rician_k, m, size, rng)
    if role == "serving":
        return np.sum(np.abs(g) ** 2, axis=1)
    w = rng.standard_normal((size, m, 2))
    w = w[..., 0] + 1j * w[..., 1]
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    return np.abs(np.sum(np.conj(g) * w, axis=1)) ** 2


def _sir_for_ids(
    ue,
    serving_ids,
    field: UavField,
    spec: ChannelSpec,
    rng: np.random.Generator,
    heights=None,
    extra_interference: float = 0.0,
) -> float:
    """SIR for an arbitrary serving subset (used by all association rules)."""
    ue = np.asarray(ue, dtype=float).reshape(2)
    serving_ids = np.asarray(serving_ids, dtype=int)
    if serving_ids.size == 0:
        return 0.0
    pos = field.positions
    g2 = np.sum((pos - ue) ** 2, axis=1)
    h2 = (
        np.asarray(heights, dtype=float) ** 2
        if heights is not None
        else field.height**2
    )
    d = np.sqrt(g2 + h2)
    alpha = spec.ple
    eps = spec.pc_exponent

    d_s = d[serving_ids]
    gains = sample_fading(spec, "serving", rng, size=serving_ids.size)
    # power-controlled amplitude: P_i^(1/2) d_i^(-a/2) ||g_i||
    amp = spec.tx_power**0.5 * d_s ** (alpha * eps / 2.0) * d_s ** (-alpha / 2.0)
    signal = float(np.abs(np.sum(amp * np.sqrt(gains))) ** 2)

    mask = np.ones(len(field), dtype=bool)
    mask[serving_ids] = False
    d_i = d[mask]
    interference = extra_interference
    if d_i.size:
        h_gain = sample_fading(spec, "interfering", rng, size=d_i.size)
        p_i = spec.tx_power * d_i ** (alpha * eps)
        interference += float(np.sum(p_i * d_i**-alpha * h_gain))
    if interference == 0.0:
        return math.inf
    return signal / interference


def sir(
    ue,
    comp: CompSet,
    field: UavField,
    spec: ChannelSpec,
    rng: np.random.Generator,
    heights=None,
    extra_interference: float = 0.0,
) -> float:
    """Instantaneous SIR of a user served by ``comp`` inside ``field``.

    The serving amplitudes add coherently (channel inversion), every other
    field member interferes through an isotropic cross gain, and an
    optional deterministic ``extra_interference`` stands in for the mean
    far-field contribution outside the sampled region.  No interference at
    all yields +inf.
    """
    return _sir_for_ids(
        ue, comp.uav_ids, field, spec, rng, heights=heights,
        extra_interference=extra_interference,
    )


def mean_tail_interference(
    spec: ChannelSpec, intensity: float, height: float, r_min: float
) -> float:
    """Mean interference from UAVs beyond ground radius ``r_min``.

    Closed form of the shot-noise mean with slant-distance path loss and
    fractional power control; infinite (raised) when the power-control
    exponent makes the far field divergent.
    """
    alpha = spec.ple
    p = alpha * (spec.pc_exponent - 1.0) / 2.0
    if p + 1.0 >= 0.0:
        raise ValueError(
            "far-field interference diverges for pc_exponent >= 1 - 2/ple"
        )
    mean_gain = spec.rician_k + 1.0 if spec.fading == NAKAGAMI_RICIAN else 1.0
    s_min = r_min**2 + height**2
    return (
        -math.pi
        * intensity
        * spec.tx_power
        * mean_gain
        * s_min ** (p + 1.0)
        / (p + 1.0)
    )
