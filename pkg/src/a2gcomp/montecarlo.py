"""Trial harness for handoff, coverage, and spectral-efficiency estimates.

Per-trial randomness derives from (root seed, trial index), so estimates
are bit-identical for any thread count.  Association schemes:

* ``delaunay``: exhaustive strongest-triangle search in the minimal disk;
* ``voronoi``: nearest UAV only (the classical baseline);
* ``hexagonal``: up to three nearest UAVs inside the user's hexagon of a
  fixed grid (three UAVs per cell on average); an empty cell is a real
  outage, not a resample.

Mobility frames: ``moving_uavs`` displaces every UAV; the static frames
freeze the UAVs and move the user instead, either at the serving set's
merged equivalent speed or at the model's constant speed.
"""
from __future__ import annotations

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .analytic import CoverageScenario, HandoffScenario
from .channel import ChannelSpec, _sir_for_ids, mean_tail_interference
from .mobility import SMS, MobilityModel
from .point_process import Disk, UavField, displace, sample_ppp
from .triangulation import (
    CompSetSearchError,
    DegenerateInputError,
    min_search_radius,
    nearest_uav,
    subdivision_search,
    triangulate,
)

__all__ = [
    "Scheme",
    "Estimate",
    "MOVING_UAVS",
    "STATIC_EQUIVALENT",
    "STATIC_CONSTANT",
    "estimate_handoff",
    "estimate_handoff_curve",
    "estimate_coverage",
    "estimate_coverage_curve",
    "estimate_spectral_efficiency",
    "estimate_height_sensitivity",
    "resample_events",
    "reset_resample_events",
]

log = logging.getLogger(__name__)

MOVING_UAVS = "moving_uavs"
STATIC_EQUIVALENT = "static_equivalent"
STATIC_CONSTANT = "static_constant"
_FRAMES = (MOVING_UAVS, STATIC_EQUIVALENT, STATIC_CONSTANT)

DELAUNAY = "delaunay"
VORONOI = "voronoi"
HEXAGONAL = "hexagonal"

_GUARD_QUANTILE = 1.0 - 1e-6
_MAX_RESAMPLES = 8

_resample_lock = threading.Lock()
_RESAMPLES = {"count": 0}


def resample_events() -> int:
    return _RESAMPLES["count"]


def reset_resample_events() -> None:
    with _resample_lock:
        _RESAMPLES["count"] = 0


def _count_resample() -> None:
    with _resample_lock:
        _RESAMPLES["count"] += 1


@dataclass(frozen=True)
class Scheme:
    """Serving-set association rule."""

    kind: str
    cell_area: Optional[float] = None

    def __post_init__(self):
        if self.kind not in (DELAUNAY, VORONOI, HEXAGONAL):
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.kind == HEXAGONAL and not (self.cell_area and self.cell_area > 0.0):
            raise ValueError("hexagonal scheme needs a positive cell_area")

    @classmethod
    def delaunay_comp(cls) -> "Scheme":
        return cls(kind=DELAUNAY)

    @classmethod
    def voronoi_nearest(cls) -> "Scheme":
        return cls(kind=VORONOI)

    @classmethod
    def hexagonal_comp(cls, intensity: float) -> "Scheme":
        # three UAVs per cell on average
        return cls(kind=HEXAGONAL, cell_area=3.0 / intensity)

    def check_intensity(self, intensity: float) -> None:
        if self.kind == HEXAGONAL:
            if abs(self.cell_area * intensity - 3.0) > 1e-9:
                raise ValueError(
                    "hexagonal cell_area must equal 3 / intensity "
                    f"(got {self.cell_area} at intensity {intensity})"
                )


@dataclass(frozen=True)
class Estimate:
    """Monte-Carlo mean with a 95 % half-width."""

    mean: float
    ci95: float
    trials: int

    def __post_init__(self):
        if self.ci95 < 0.0 or self.trials < 1:
            raise ValueError(f"invalid estimate {self}")

    @classmethod
    def from_values(cls, values) -> "Estimate":
        values = np.asarray(values, dtype=float)
        n = values.size
        sd = float(values.std(ddof=1)) if n > 1 else 0.0
        return cls(mean=float(values.mean()), ci95=1.96 * sd / math.sqrt(n), trials=n)


def _trial_children(seed: int, trial: int, n: int) -> list[np.random.Generator]:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(trial,))
    return [np.random.default_rng(c) for c in ss.spawn(n)]


def _run_trials(trials: int, worker, threads: int) -> list:
    if threads <= 1:
        return [worker(i) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        chunk = max(1, trials // (threads * 8))
        return list(ex.map(worker, range(trials), chunksize=chunk))


def _sample_field(
    lambda0: float, radius: float, height: float, rng: np.random.Generator
) -> UavField:
    seed = int(rng.integers(0, 2**63 - 1))
    return sample_ppp(lambda0, Disk((0.0, 0.0), radius), seed, height=height)


# ---------------------------------------------------------------------------
# hexagonal grid helpers (flat-top hexagons)
# ---------------------------------------------------------------------------


def _hex_side(cell_area: float) -> float:
    return math.sqrt(2.0 * cell_area / (3.0 * math.sqrt(3.0)))


def _hex_cells(points: np.ndarray, side: float) -> np.ndarray:
    """Integer axial cell index of each point on a flat-top hexagon grid."""
    x = points[..., 0]
    y = points[..., 1]
    q = (2.0 / 3.0) * x / side
    r = (-x / 3.0 + y / math.sqrt(3.0)) / side
    # cube rounding
    s = -q - r
    rq, rr, rs = np.round(q), np.round(r), np.round(s)
    dq, dr, ds = np.abs(rq - q), np.abs(rr - r), np.abs(rs - s)
    fix_q = (dq > dr) & (dq > ds)
    fix_r = ~fix_q & (dr > ds)
    rq = np.where(fix_q, -rr - rs, rq)
    rr = np.where(fix_r, -rq - rs, rr)
    return np.stack([rq, rr], axis=-1).astype(np.int64)


def _uniform_point_in_hexagon(side: float, rng: np.random.Generator) -> np.ndarray:
    half_h = 0.5 * math.sqrt(3.0) * side
    while True:
        p = rng.uniform([-side, -half_h], [side, half_h])
        if math.sqrt(3.0) * abs(p[0]) + abs(p[1]) <= math.sqrt(3.0) * side:
            return p


def _hex_serving_ids(
    ue: np.ndarray, field: UavField, cell_area: float, offset: np.ndarray
) -> np.ndarray:
    """Up to three nearest UAVs sharing the user's hexagon."""
    side = _hex_side(cell_area)
    ue_cell = _hex_cells(ue - offset, side)
    cells = _hex_cells(field.positions - offset, side)
    same = np.flatnonzero(np.all(cells == ue_cell, axis=1))
    if same.size == 0:
        return same
    d2 = np.sum((field.positions[same] - ue) ** 2, axis=1)
    return same[np.argsort(d2, kind="stable")][:3]


# ---------------------------------------------------------------------------
# serving-set selection
# ---------------------------------------------------------------------------


def _serving_members(
    scheme: Scheme,
    field: UavField,
    ue,
    alpha: float,
    rng: Optional[np.random.Generator] = None,
    hex_offset: Optional[np.ndarray] = None,
    mesh=None,
    heights=None,
) -> frozenset:
    if scheme.kind == DELAUNAY:
        comp = subdivision_search(field, ue, alpha, mesh=mesh, heights=heights)
        return comp.members
    if scheme.kind == VORONOI:
        return frozenset([nearest_uav(field, ue)])
    ids = _hex_serving_ids(np.asarray(ue, float), field, scheme.cell_area, hex_offset)
    return frozenset(int(i) for i in ids)


def _ue_speed(
    model: MobilityModel, frame: str, rng: np.random.Generator, members: int = 3
) -> tuple[float, float]:
    """Speed and direction of the user in a static frame.

    The equivalent frame moves the user at the merged velocity of as many
    independent movers as the serving set has members (one for the
    nearest-UAV rule, three for the cooperative set).
    """
    if frame == STATIC_EQUIVALENT:
        speeds = model.draw_speeds(members, rng)
        theta = rng.uniform(0.0, 2.0 * math.pi, members)
        vx = float(np.sum(speeds * np.cos(theta)))
        vy = float(np.sum(speeds * np.sin(theta)))
        return math.hypot(vx, vy), math.atan2(vy, vx)
    speed = model.v0 if model.kind == SMS else model.mean_speed()
    return speed, rng.uniform(0.0, 2.0 * math.pi)


def _frame_speed_bound(model: MobilityModel, frame: str) -> float:
    per_uav = model.speed_quantile(_GUARD_QUANTILE)
    if frame == STATIC_EQUIVALENT:
        return 3.0 * per_uav
    return per_uav


# ---------------------------------------------------------------------------
# handoff estimation
# ---------------------------------------------------------------------------


def estimate_handoff_curve(
    scheme: Scheme,
    lambda0: float,
    model: MobilityModel,
    ts: Sequence[float],
    trials: int,
    seed: int,
    alpha: float = 2.4,
    h: float = 150.0,
    frame: str = MOVING_UAVS,
    threads: int = 1,
) -> list[Estimate]:
    """Handoff probability at each time in ``ts``, sharing trials.

    A handoff is a change of the serving membership: the strongest-triangle
    set for the cooperative scheme, the nearest UAV for the baseline.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if frame not in _FRAMES:
        raise ValueError(f"unknown frame {frame!r}")
    if frame == STATIC_CONSTANT and model.kind != SMS:
        raise ValueError("the constant-speed static frame needs the shared-speed model")
    scheme.check_intensity(lambda0)
    if scheme.kind == HEXAGONAL:
        raise ValueError("handoff estimation supports the delaunay and voronoi schemes")
    ts = [float(t) for t in ts]
    t_max = max(ts) if ts else 0.0
    r_s = min_search_radius(lambda0)
    guard = max(5.0 / math.sqrt(lambda0), _frame_speed_bound(model, frame) * t_max)
    if frame == MOVING_UAVS:
        radius = r_s + guard
    else:
        radius = r_s + _frame_speed_bound(model, frame) * t_max + guard

    def worker(trial: int) -> np.ndarray:
        rng_field, rng_move, rng_retry = _trial_children(seed, trial, 3)
        for _ in range(_MAX_RESAMPLES):
            field = _sample_field(lambda0, radius, h, rng_field)
            try:
                return _one_handoff_trial(field, rng_move)
            except (CompSetSearchError, DegenerateInputError, ValueError):
                _count_resample()
                rng_field = np.random.default_rng(rng_retry.integers(0, 2**63 - 1))
        raise CompSetSearchError("handoff trial kept failing after resampling")

    def _one_handoff_trial(field: UavField, rng_move: np.random.Generator) -> np.ndarray:
        flags = np.zeros(len(ts), dtype=bool)
        if frame == MOVING_UAVS:
            mesh0 = triangulate(field.positions) if scheme.kind == DELAUNAY else None
            before = _serving_members(scheme, field, (0.0, 0.0), alpha, mesh=mesh0)
            speeds = model.draw_speeds(len(field), rng_move)
            angles = rng_move.uniform(0.0, 2.0 * math.pi, len(field))
            vel = np.column_stack([speeds, angles])
            for i, t in enumerate(ts):
                if t == 0.0:
                    continue
                moved = displace(field, vel, t)
                after = _serving_members(scheme, moved, (0.0, 0.0), alpha)
                flags[i] = after != before
        else:
            mesh = triangulate(field.positions) if scheme.kind == DELAUNAY else None
            before = _serving_members(scheme, field, (0.0, 0.0), alpha, mesh=mesh)
            members = 1 if scheme.kind == VORONOI else 3
            speed, direction = _ue_speed(model, frame, rng_move, members)
            for i, t in enumerate(ts):
                if t == 0.0:
                    continue
                ue_t = speed * t * np.array([math.cos(direction), math.sin(direction)])
                after = _serving_members(scheme, field, ue_t, alpha, mesh=mesh)
                flags[i] = after != before
        return flags

    results = np.asarray(_run_trials(trials, worker, threads))
    return [Estimate.from_values(results[:, i]) for i in range(len(ts))]


def estimate_handoff(
    scheme: Scheme,
    lambda0: float,
    model: MobilityModel,
    t: float,
    trials: int,
    seed: int,
    alpha: float = 2.4,
    h: float = 150.0,
    frame: str = MOVING_UAVS,
    threads: int = 1,
) -> Estimate:
    """Handoff probability over one motion leg of duration ``t``."""
    return estimate_handoff_curve(
        scheme, lambda0, model, [t], trials, seed,
        alpha=alpha, h=h, frame=frame, threads=threads,
    )[0]


# ---------------------------------------------------------------------------
# coverage / spectral efficiency
# ---------------------------------------------------------------------------

TAIL_AUTO = "auto"
TAIL_OFF = "off"


def _tail_mean(spec: ChannelSpec, lambda0: float, h: float, r_tail: float, mode: str) -> float:
    if mode == TAIL_OFF:
        return 0.0
    if mode != TAIL_AUTO:
        raise ValueError(f"unknown tail mode {mode!r}")
    if spec.pc_exponent >= 1.0 - 2.0 / spec.ple:
        # power control overwhelms path loss: the far field diverges and
        # the experiment is region-limited by construction
        return 0.0
    return mean_tail_interference(spec, lambda0, h, r_tail)


def _coverage_sir_trial(
    scn: CoverageScenario,
    hand: Optional[HandoffScenario],
    scheme: Scheme,
    frame: str,
    radius: float,
    tail: float,
    rngs: list[np.random.Generator],
    heights_range: Optional[tuple[float, float]] = None,
) -> tuple[float, bool]:
    """One trial: SIR at the evaluation time and the handoff indicator."""
    rng_field, rng_move, rng_fade, rng_aux = rngs
    spec = scn.spec
    field = _sample_field(scn.lambda0, radius, scn.h, rng_field)
    heights = None
    if heights_range is not None:
        heights = rng_aux.uniform(heights_range[0], heights_range[1], len(field))

    hex_offset = None
    if scheme.kind == HEXAGONAL:
        side = _hex_side(scheme.cell_area)
        hex_offset = _uniform_point_in_hexagon(side, rng_aux)

    t = hand.t if hand is not None else 0.0
    model = hand.model if hand is not None else None
    need_handoff = hand is not None and hand.zeta > 0.0 and t > 0.0

    ue0 = np.zeros(2)
    if frame == MOVING_UAVS and t > 0.0 and model is not None:
        speeds = model.draw_speeds(len(field), rng_move)
        angles = rng_move.uniform(0.0, 2.0 * math.pi, len(field))
        field_t = displace(field, np.column_stack([speeds, angles]), t)
        ue_t = ue0
    elif frame in (STATIC_EQUIVALENT, STATIC_CONSTANT) and t > 0.0 and model is not None:
        members = 1 if scheme.kind == VORONOI else 3
        speed, direction = _ue_speed(model, frame, rng_move, members)
        field_t = field
        ue_t = speed * t * np.array([math.cos(direction), math.sin(direction)])
    else:
        field_t = field
        ue_t = ue0

    members_t = _serving_members(
        scheme, field_t, ue_t, spec.ple, hex_offset=hex_offset, heights=heights
    )
    hf = False
    if need_handoff:
        members_0 = _serving_members(
            scheme, field, ue0, spec.ple, hex_offset=hex_offset, heights=heights
        )
        hf = members_0 != members_t

    if not members_t:
        return 0.0, hf  # empty hexagon: outage
    val = _sir_for_ids(
        ue_t, sorted(members_t), field_t, spec, rng_fade,
        heights=heights, extra_interference=tail,
    )
    return val, hf


def _coverage_geometry(
    scn: CoverageScenario, hand: Optional[HandoffScenario], frame: str
) -> tuple[float, float]:
    """Sampling radius and the radius beyond which the mean tail applies."""
    r_s = min_search_radius(scn.lambda0)
    reach = 0.0
    if hand is not None and hand.t > 0.0:
        reach = _frame_speed_bound(hand.model, frame) * hand.t
    guard = max(5.0 / math.sqrt(scn.lambda0), reach)
    return r_s + reach + guard, r_s + guard


def estimate_coverage_curve(
    scheme: Scheme,
    scn: CoverageScenario,
    hand: Optional[HandoffScenario],
    gammas: Sequence[float],
    trials: int,
    seed: int,
    frame: str = MOVING_UAVS,
    threads: int = 1,
    tail_mode: str = TAIL_AUTO,
    region_radius: Optional[float] = None,
) -> list[Estimate]:
    """Coverage probability with handoffs on a shared-trial threshold grid.

    Each trial contributes (1 - zeta * handoff) * [SIR > gamma]; zeta = 0
    (or a missing handoff scenario) reduces to plain coverage.
    ``region_radius`` overrides the default guard-ring sizing; experiments
    whose far field diverges under power control are window-limited by
    construction and pass the window radius explicitly.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if frame not in _FRAMES:
        raise ValueError(f"unknown frame {frame!r}")
    scheme.check_intensity(scn.lambda0)
    if hand is not None and abs(hand.lambda0 - scn.lambda0) > 1e-15:
        raise ValueError("coverage and handoff scenarios disagree on the intensity")
    gammas = np.asarray([float(g) for g in gammas])
    radius, r_tail = _coverage_geometry(scn, hand, frame)
    if region_radius is not None:
        radius = r_tail = float(region_radius)
    tail = _tail_mean(scn.spec, scn.lambda0, scn.h, r_tail, tail_mode)
    zeta = hand.zeta if hand is not None else 0.0

    def worker(trial: int) -> tuple[float, bool]:
        rngs = _trial_children(seed, trial, 5)
        rng_retry = rngs.pop()
        for _ in range(_MAX_RESAMPLES):
            try:
                return _coverage_sir_trial(scn, hand, scheme, frame, radius, tail, rngs)
            except (CompSetSearchError, DegenerateInputError):
                _count_resample()
                rngs[0] = np.random.default_rng(rng_retry.integers(0, 2**63 - 1))
        raise CompSetSearchError("coverage trial kept failing after resampling")

    raw = _run_trials(trials, worker, threads)
    sirs = np.array([r[0] for r in raw])
    hfs = np.array([r[1] for r in raw])
    weight = 1.0 - zeta * hfs
    return [
        Estimate.from_values(weight * (sirs > g)) for g in gammas
    ]


def estimate_coverage(
    scheme: Scheme,
    scn: CoverageScenario,
    hand: Optional[HandoffScenario],
    trials: int,
    seed: int,
    frame: str = MOVING_UAVS,
    threads: int = 1,
    tail_mode: str = TAIL_AUTO,
    region_radius: Optional[float] = None,
) -> Estimate:
    """Coverage probability with handoffs at the scenario threshold."""
    return estimate_coverage_curve(
        scheme, scn, hand, [scn.gamma], trials, seed,
        frame=frame, threads=threads, tail_mode=tail_mode,
        region_radius=region_radius,
    )[0]


def estimate_spectral_efficiency(
    scheme: Scheme,
    scn: CoverageScenario,
    trials: int,
    seed: int,
    threads: int = 1,
    tail_mode: str = TAIL_AUTO,
) -> Estimate:
    """Mean log2(1 + SIR) of the typical user, bit/s/Hz."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    scheme.check_intensity(scn.lambda0)
    radius, r_tail = _coverage_geometry(scn, None, MOVING_UAVS)
    tail = _tail_mean(scn.spec, scn.lambda0, scn.h, r_tail, tail_mode)

    def worker(trial: int) -> float:
        rngs = _trial_children(seed, trial, 5)
        rng_retry = rngs.pop()
        for _ in range(_MAX_RESAMPLES):
            try:
                val, _ = _coverage_sir_trial(
                    scn, None, scheme, MOVING_UAVS, radius, tail, rngs
                )
                return math.log2(1.0 + val)
            except (CompSetSearchError, DegenerateInputError):
                _count_resample()
                rngs[0] = np.random.default_rng(rng_retry.integers(0, 2**63 - 1))
        raise CompSetSearchError("spectral-efficiency trial kept failing")

    return Estimate.from_values(_run_trials(trials, worker, threads))


def estimate_height_sensitivity(
    scn: CoverageScenario,
    h_range: tuple[float, float],
    trials: int,
    seed: int,
    scheme: Optional[Scheme] = None,
    threads: int = 1,
    tail_mode: str = TAIL_AUTO,
) -> tuple[Estimate, Estimate]:
    """Coverage with per-UAV heights in ``h_range`` vs the fixed mean height.

    Both estimates share every random stream, so a degenerate range yields
    bit-identical results and the difference isolates the height spread.
    """
    lo, hi = float(h_range[0]), float(h_range[1])
    if not 0.0 < lo <= hi:
        raise ValueError(f"invalid height range {h_range}")
    scheme = scheme or Scheme.delaunay_comp()
    h_bar = 0.5 * (lo + hi)
    scn_bar = CoverageScenario(gamma=scn.gamma, lambda0=scn.lambda0, spec=scn.spec, h=h_bar)
    radius, r_tail = _coverage_geometry(scn_bar, None, MOVING_UAVS)
    tail = _tail_mean(scn.spec, scn.lambda0, h_bar, r_tail, tail_mode)

    def worker(trial: int) -> tuple[float, float]:
        for attempt in range(_MAX_RESAMPLES):
            key = (trial,) if attempt == 0 else (trial, attempt)
            children = np.random.SeedSequence(entropy=seed, spawn_key=key).spawn(4)
            rngs_a = [np.random.default_rng(c) for c in children]
            rngs_b = [np.random.default_rng(c) for c in children]
            try:
                v_var, _ = _coverage_sir_trial(
                    scn_bar, None, scheme, MOVING_UAVS, radius, tail, rngs_a,
                    heights_range=(lo, hi),
                )
                v_fix, _ = _coverage_sir_trial(
                    scn_bar, None, scheme, MOVING_UAVS, radius, tail, rngs_b,
                    heights_range=(h_bar, h_bar),
                )
                return (
                    float(v_var > scn.gamma),
                    float(v_fix > scn.gamma),
                )
            except (CompSetSearchError, DegenerateInputError):
                _count_resample()
        raise CompSetSearchError("height-sensitivity trial kept failing")

    raw = _run_trials(trials, worker, threads)
    var_vals = np.array([r[0] for r in raw])
    fix_vals = np.array([r[1] for r in raw])
    return Estimate.from_values(var_vals), Estimate.from_values(fix_vals)
