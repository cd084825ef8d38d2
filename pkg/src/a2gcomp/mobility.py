"""UAV mobility models and the merged serving-set velocity.

Two straight-line waypoint models are supported: every UAV drawing an
independent random speed (Rayleigh-distributed), or all UAVs sharing one
constant speed.  Directions are always uniform.  A user served by three
UAVs sees their joint motion as a single equivalent mover whose velocity
is the vector sum of the member velocities; its speed and direction laws
are exposed here in closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, gammainc, gammaincinv, gammaln

__all__ = [
    "MobilityModel",
    "EquivalentVelocity",
    "SpeedMoments",
    "sample_trace",
    "equivalent_velocity",
    "sample_equivalent_velocity",
    "pdf_equiv_speed_dms",
    "cdf_equiv_speed_dms",
    "pdf_equiv_speed_sms",
    "sms_speed_support_mass",
    "equivalent_direction_pdf",
]

DMS = "dms"
SMS = "sms"


@dataclass(frozen=True)
class MobilityModel:
    """Waypoint mobility: random per-UAV speeds or one shared speed.

    ``sigma`` is the Rayleigh scale of individual speeds (random-speed
    model); ``v0`` the common speed (shared-speed model).  Both in m/s.
    """

    kind: str
    sigma: float = 0.0
    v0: float = 0.0
    waypoint_interval: float = 1.0

    def __post_init__(self):
        if self.kind not in (DMS, SMS):
            raise ValueError(f"unknown mobility kind {self.kind!r}")
        if self.kind == DMS and not self.sigma > 0.0:
            raise ValueError("random-speed model needs sigma > 0")
        if self.kind == SMS and not self.v0 > 0.0:
            raise ValueError("shared-speed model needs v0 > 0")
        if not self.waypoint_interval > 0.0:
            raise ValueError("waypoint_interval must be positive")

    @classmethod
    def random_speeds(cls, sigma: float, waypoint_interval: float = 1.0) -> "MobilityModel":
        return cls(kind=DMS, sigma=sigma, waypoint_interval=waypoint_interval)

    @classmethod
    def shared_speed(cls, v0: float, waypoint_interval: float = 1.0) -> "MobilityModel":
        return cls(kind=SMS, v0=v0, waypoint_interval=waypoint_interval)

    def draw_speeds(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == DMS:
            return rng.rayleigh(self.sigma, n)
        return np.full(n, self.v0)

    def mean_speed(self) -> float:
        if self.kind == DMS:
            return self.sigma * math.sqrt(math.pi / 2.0)
        return self.v0

    def speed_quantile(self, q: float) -> float:
        """Upper speed quantile, used for guard-ring sizing."""
        if self.kind == DMS:
            return self.sigma * math.sqrt(-2.0 * math.log1p(-q))
        return self.v0

    def speed_moments(self) -> "SpeedMoments":
        if self.kind == DMS:
            return SpeedMoments.rayleigh(self.sigma)
        return SpeedMoments.constant(self.v0)


@dataclass(frozen=True)
class SpeedMoments:
    """Second and fourth raw moments of the per-UAV speed law."""

    m2: float
    m4: float

    def __post_init__(self):
        if self.m2 <= 0.0 or self.m4 < self.m2**2:
            raise ValueError(
                f"need m2 > 0 and m4 >= m2^2, got m2={self.m2}, m4={self.m4}"
            )

    @classmethod
    def rayleigh(cls, sigma: float) -> "SpeedMoments":
        return cls(m2=2.0 * sigma**2, m4=8.0 * sigma**4)

    @classmethod
    def constant(cls, v0: float) -> "SpeedMoments":
        return cls(m2=v0**2, m4=v0**4)

    def gamma_ab(self) -> tuple[float, float]:
        """Shape/scale pair of the squared equivalent speed's Gamma law."""
        a = 3.0 * self.m2**2 / (self.m4 + self.m2**2)
        b = (self.m4 + self.m2**2) / self.m2
        return a, b


@dataclass(frozen=True)
class EquivalentVelocity:
    """Speed (m/s) and direction (rad, in [-pi, pi)) of the merged mover."""

    speed: float
    direction: float

    def __post_init__(self):
        if self.speed < 0.0:
            raise ValueError(f"speed must be nonnegative, got {self.speed}")
        d = math.remainder(self.direction, 2.0 * math.pi)
        if d == math.pi:  # remainder returns (-pi, pi]; fold to [-pi, pi)
            d = -math.pi
        object.__setattr__(self, "direction", d)


def sample_trace(
    start, model: MobilityModel, duration: float, rng
) -> tuple[np.ndarray, np.ndarray]:
    """Piecewise-linear trajectory over ``duration`` seconds.

    A fresh uniform direction (and, for the random-speed model, a fresh
    Rayleigh speed) is drawn at every waypoint.  ``rng`` is a Generator or
    an integer seed.  Returns (times, points) with the start position
    first.
    """
    if duration < 0.0:
        raise ValueError(f"duration must be nonnegative, got {duration}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    pos = np.asarray(start, dtype=float).reshape(2)
    times = [0.0]
    points = [pos.copy()]
    t = 0.0
    while t < duration:
        dt = min(model.waypoint_interval, duration - t)
        speed = model.draw_speeds(1, rng)[0]
        theta = rng.uniform(0.0, 2.0 * np.pi)
        pos = pos + speed * dt * np.array([math.cos(theta), math.sin(theta)])
        t += dt
        times.append(t)
        points.append(pos.copy())
    return np.asarray(times), np.asarray(points)


def equivalent_velocity(v, theta) -> EquivalentVelocity:
    """Vector-sum velocity of the serving set members.

    Speed is the norm of the summed velocity vectors and direction its
    angle; a zero vector sum maps to (0, 0) by convention.
    """
    v = np.asarray(v, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(v < 0.0):
        raise ValueError("speeds must be nonnegative")
    cx = float(np.sum(v * np.cos(theta)))
    sy = float(np.sum(v * np.sin(theta)))
    speed = math.hypot(cx, sy)
    # below the rounding floor of the summed magnitudes the direction is noise
    if speed <= 1e-12 * float(np.sum(v)):
        return EquivalentVelocity(speed=0.0, direction=0.0)
    return EquivalentVelocity(speed=speed, direction=math.atan2(sy, cx))


def sample_equivalent_velocity(
    model: MobilityModel, n: int, rng: np.random.Generator, members: int = 3
) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` equivalent velocities of a serving set (vectorized)."""
    speeds = model.draw_speeds(n * members, rng).reshape(n, members)
    theta = rng.uniform(0.0, 2.0 * np.pi, (n, members))
    cx = np.sum(speeds * np.cos(theta), axis=1)
    sy = np.sum(speeds * np.sin(theta), axis=1)
    return np.hypot(cx, sy), np.arctan2(sy, cx)


def pdf_equiv_speed_dms(x, moments: SpeedMoments):
    """Density of the equivalent speed under random per-UAV speeds.

    The squared speed is Gamma(a, b) with (a, b) moment-matched from the
    per-UAV law, giving f(x) = 2 x^(2a-1) exp(-x^2/b) / (Gamma(a) b^a).
    Rayleigh(sigma) inputs make this exactly Rayleigh(sqrt(3) sigma).
    """
    a, b = moments.gamma_ab()
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0):
        raise ValueError("speed must be nonnegative")
    logf = (
        math.log(2.0)
        - gammaln(a)
        - a * math.log(b)
        + (2.0 * a - 1.0) * np.log(np.where(x > 0.0, x, 1.0))
        - x**2 / b
    )
    if 2.0 * a - 1.0 > 0.0:
        at_zero = 0.0
    elif 2.0 * a - 1.0 == 0.0:
        at_zero = 2.0 / (math.gamma(a) * b**a)
    else:
        at_zero = math.inf
    out = np.where(x > 0.0, np.exp(logf), at_zero)
    return out if out.ndim else float(out)


def cdf_equiv_speed_dms(x, moments: SpeedMoments):
    """Distribution function matching ``pdf_equiv_speed_dms``."""
    a, b = moments.gamma_ab()
    x = np.asarray(x, dtype=float)
    out = gammainc(a, np.clip(x, 0.0, None) ** 2 / b)
    return out if out.ndim else float(out)


def quantile_equiv_speed_dms(q: float, moments: SpeedMoments) -> float:
    a, b = moments.gamma_ab()
    return math.sqrt(b * gammaincinv(a, q))


def pdf_equiv_speed_sms(x, v0: float):
    """Density of the equivalent speed under a shared per-UAV speed.

    Maxwell-type on the support [0, 3 v0]; the expression integrates to
    about 0.9707 there and is returned unnormalized, as specified.
    """
    if not v0 > 0.0:
        raise ValueError(f"v0 must be positive, got {v0}")
    x = np.asarray(x, dtype=float)
    f = np.sqrt(2.0 / np.pi) * x**2 / v0**3 * np.exp(-(x**2) / (2.0 * v0**2))
    out = np.where((x >= 0.0) & (x <= 3.0 * v0), f, 0.0)
    return out if out.ndim else float(out)


def sms_speed_support_mass(v0: float) -> float:
    """Mass of the Maxwell density on [0, 3 v0] (about 0.970710)."""
    if not v0 > 0.0:
        raise ValueError(f"v0 must be positive, got {v0}")
    z = 3.0 / math.sqrt(2.0)
    return float(erf(z) - math.sqrt(2.0 / math.pi) * 3.0 * math.exp(-4.5))


def equivalent_direction_pdf() -> float:
    """Uniform density of the equivalent direction on [0, 2 pi)."""
    return 1.0 / (2.0 * math.pi)
