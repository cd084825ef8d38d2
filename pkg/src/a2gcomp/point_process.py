"""Planar point processes used as UAV deployments.

All quantities are strictly SI: meters, seconds, points per square meter.
Unit conversions (km/h, per-km^2) happen at the CLI boundary only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "Disk",
    "Rectangle",
    "Region",
    "UavField",
    "sample_ppp",
    "displace",
    "trial_rng",
]


@dataclass(frozen=True)
class Disk:
    """Disk region with center (x, y) and radius, in meters."""

    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0.0:
            raise ValueError(f"disk radius must be positive, got {self.radius}")

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        d2 = (p[:, 0] - self.center[0]) ** 2 + (p[:, 1] - self.center[1]) ** 2
        return d2 <= self.radius**2

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        # inverse-CDF radius keeps the draw uniform in area
        r = self.radius * np.sqrt(rng.random(n))
        phi = rng.uniform(0.0, 2.0 * np.pi, n)
        return np.column_stack(
            [self.center[0] + r * np.cos(phi), self.center[1] + r * np.sin(phi)]
        )

    def boundary_polygon(self, segments: int = 128) -> np.ndarray:
        phi = np.linspace(0.0, 2.0 * np.pi, segments, endpoint=False)
        return np.column_stack(
            [
                self.center[0] + self.radius * np.cos(phi),
                self.center[1] + self.radius * np.sin(phi),
            ]
        )


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangle [xmin, xmax] x [ymin, ymax], in meters."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("rectangle max corner must strictly dominate min corner")

    @property
    def area(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return (
            (p[:, 0] >= self.xmin)
            & (p[:, 0] <= self.xmax)
            & (p[:, 1] >= self.ymin)
            & (p[:, 1] <= self.ymax)
        )

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        x = rng.uniform(self.xmin, self.xmax, n)
        y = rng.uniform(self.ymin, self.ymax, n)
        return np.column_stack([x, y])

    def boundary_polygon(self) -> np.ndarray:
        return np.array(
            [
                [self.xmin, self.ymin],
                [self.xmax, self.ymin],
                [self.xmax, self.ymax],
                [self.xmin, self.ymax],
            ]
        )


Region = Union[Disk, Rectangle]


@dataclass(frozen=True)
class UavField:
    """A sampled set of UAV ground projections hovering at a common height.

    ``positions`` is an immutable (n, 2) array of ground coordinates in
    meters; ``intensity`` is the generating density in points per m^2.
    """

    positions: np.ndarray
    height: float
    intensity: float
    seed: int

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 2)
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        if not self.height > 0.0:
            raise ValueError(f"height must be positive, got {self.height}")
        if self.intensity < 0.0:
            raise ValueError(f"intensity must be nonnegative, got {self.intensity}")

    def __len__(self) -> int:
        return self.positions.shape[0]


def sample_ppp(
    intensity: float, region: Region, seed: int, height: float = 150.0
) -> UavField:
    """Sample a homogeneous Poisson point process on ``region``.

    The count is Poisson(intensity * area) and locations are i.i.d. uniform.
    Reproducible bit-for-bit for a fixed seed.
    """
    if intensity < 0.0:
        raise ValueError(f"intensity must be nonnegative, got {intensity}")
    if not isinstance(region, (Disk, Rectangle)):
        raise ValueError(f"unsupported region {region!r}")
    rng = np.random.default_rng(seed)
    n = rng.poisson(intensity * region.area)
    pts = region.sample(int(n), rng) if n else np.empty((0, 2))
    return UavField(positions=pts, height=height, intensity=intensity, seed=int(seed))


def displace(field: UavField, velocities, t: float) -> UavField:
    """Move every point by its (speed, direction) velocity for duration ``t``.

    ``velocities`` holds one (speed m/s, direction rad) pair per point.
    Point order, and hence point identity, is preserved.
    """
    if t < 0.0:
        raise ValueError(f"t must be nonnegative, got {t}")
    vel = np.asarray(velocities, dtype=float).reshape(-1, 2)
    if vel.shape[0] != len(field):
        raise ValueError(
            f"need one velocity per point: {vel.shape[0]} velocities, {len(field)} points"
        )
    step = vel[:, 0, None] * t * np.column_stack([np.cos(vel[:, 1]), np.sin(vel[:, 1])])
    return UavField(
        positions=field.positions + step,
        height=field.height,
        intensity=field.intensity,
        seed=field.seed,
    )


def trial_rng(root_seed: int, trial: int) -> np.random.Generator:
    """Independent per-trial stream derived from (root seed, trial index).

    Streams are independent of any execution schedule, so parallel runs
    reproduce serial results exactly.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=root_seed, spawn_key=(trial,)))
