"""Delaunay triangulation, Voronoi dual, and cooperating-set construction.

A ground user is jointly served by the three UAVs at the vertices of one
Delaunay triangle.  Two selection rules are implemented:

* ``comp_set_for_ue`` walks the mesh: take the two nearest UAVs (always a
  Delaunay edge), form the quadrilateral of the two triangles sharing that
  edge, and keep the nearer of the opposing pair as the third member.
* ``subdivision_search`` restricts attention to a disk sized so it holds,
  on average, enough UAVs for a complete triangle, then picks the triangle
  maximizing the summed distance-law amplitude over its feasible triangles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Optional

import numpy as np
from scipy.spatial import Delaunay as _Delaunay
from scipy.spatial import QhullError

from .point_process import Disk, Rectangle, Region, UavField

__all__ = [
    "DegenerateInputError",
    "CompSetSearchError",
    "MIN_COOPERATION_UAVS",
    "TriMesh",
    "CompSet",
    "SearchRegion",
    "triangulate",
    "dual_voronoi",
    "comp_set_for_ue",
    "min_search_radius",
    "subdivision_search",
    "nearest_uav",
]

# A planar Delaunay vertex touches six triangles on average and each
# cooperating set needs three vertices, so a disk holding 18 UAVs on
# average is the smallest search area expected to contain a full triangle.
MIN_COOPERATION_UAVS = 18


class DegenerateInputError(ValueError):
    """Raised for point sets with no two-dimensional triangulation."""


class CompSetSearchError(RuntimeError):
    """Raised when no complete triangle is found after radius expansion."""


@dataclass(frozen=True)
class TriMesh:
    """Immutable triangulation: vertex coordinates, triangles, adjacency.

    ``triangles`` is (T, 3) with counter-clockwise vertex order;
    ``neighbors`` is (T, 3) where entry k is the triangle id sharing the
    edge opposite vertex k, or -1 on the hull.
    """

    points: np.ndarray
    triangles: np.ndarray
    neighbors: np.ndarray

    def __post_init__(self):
        for name in ("points", "triangles", "neighbors"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    def dump(self, stream: IO[str]) -> None:
        """Write the mesh as text: one `v x y` and one `t i j k` line each."""
        for x, y in self.points:
            stream.write(f"v {x!r} {y!r}\n")
        for i, j, k in self.triangles:
            stream.write(f"t {i} {j} {k}\n")


@dataclass(frozen=True)
class CompSet:
    """Three cooperating UAVs serving one ground user.

    ``r`` are ground-projection distances and ``d`` slant distances from
    the user, ordered like ``uav_ids``.  ``hull_fallback`` marks the case
    where the nearest edge lay on the hull and only one adjacent triangle
    existed.
    """

    uav_ids: tuple[int, int, int]
    r: np.ndarray
    d: np.ndarray
    r_star: float
    hull_fallback: bool = False

    def __post_init__(self):
        ids = tuple(int(i) for i in self.uav_ids)
        if len(set(ids)) != 3:
            raise ValueError(f"need 3 distinct UAV ids, got {ids}")
        object.__setattr__(self, "uav_ids", ids)
        for name in ("r", "d"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def members(self) -> frozenset:
        return frozenset(self.uav_ids)


@dataclass(frozen=True)
class SearchRegion:
    """Disk in which a cooperating set is searched."""

    center: tuple[float, float]
    radius: float
    min_uav_count: int = MIN_COOPERATION_UAVS

    @classmethod
    def for_intensity(cls, center, intensity: float) -> "SearchRegion":
        return cls(center=tuple(center), radius=min_search_radius(intensity))


def triangulate(points) -> TriMesh:
    """Delaunay triangulation of a planar point set.

    Raises ``DegenerateInputError`` for fewer than three points or for
    collinear input.  Triangles are returned counter-clockwise and every
    circumcircle is empty of other vertices (points exactly on a
    circumcircle do not count as inside).
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] < 3:
        raise DegenerateInputError(f"need at least 3 points, got {pts.shape[0]}")
    try:
        dt = _Delaunay(pts)
    except QhullError as exc:
        raise DegenerateInputError(f"no 2-D triangulation: {exc}") from exc
    if dt.simplices.size == 0:
        raise DegenerateInputError("input is collinear")
    tri = np.array(dt.simplices, dtype=np.int64)
    nbr = np.array(dt.neighbors, dtype=np.int64)
    # enforce CCW orientation; swapping two vertices also swaps the
    # neighbors opposite to them
    a, b, c = pts[tri[:, 0]], pts[tri[:, 1]], pts[tri[:, 2]]
    signed = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (
        c[:, 0] - a[:, 0]
    )
    flip = signed < 0.0
    tri[flip, 1], tri[flip, 2] = tri[flip, 2], tri[flip, 1]
    nbr[flip, 1], nbr[flip, 2] = nbr[flip, 2], nbr[flip, 1]
    return TriMesh(points=pts, triangles=tri, neighbors=nbr)


def _clip_halfplane(poly: np.ndarray, anchor: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex polygon to (x-anchor).normal <= 0."""
    if poly.shape[0] == 0:
        return poly
    side = (poly - anchor) @ normal
    keep: list[np.ndarray] = []
    n = poly.shape[0]
    for i in range(n):
        j = (i + 1) % n
        si, sj = side[i], side[j]
        if si <= 0.0:
            keep.append(poly[i])
        if (si < 0.0 < sj) or (sj < 0.0 < si):
            frac = si / (si - sj)
            keep.append(poly[i] + frac * (poly[j] - poly[i]))
    if not keep:
        return np.empty((0, 2))
    return np.asarray(keep)


def dual_voronoi(mesh: TriMesh, region: Optional[Region] = None) -> dict[int, np.ndarray]:
    """Voronoi cell polygon for every mesh vertex.

    Each cell is the locus of points nearer to its generator than to any
    other; unbounded cells are clipped to ``region`` (default: the point
    bounding box padded by its diameter).
    """
    pts = mesh.points
    if region is None:
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        pad = max(float(np.max(hi - lo)), 1.0)
        frame = np.array(
            [
                [lo[0] - pad, lo[1] - pad],
                [hi[0] + pad, lo[1] - pad],
                [hi[0] + pad, hi[1] + pad],
                [lo[0] - pad, hi[1] + pad],
            ]
        )
    elif isinstance(region, Rectangle):
        frame = region.boundary_polygon()
    elif isinstance(region, Disk):
        frame = region.boundary_polygon()
    else:
        raise ValueError(f"unsupported region {region!r}")

    neighbor_sets: dict[int, set[int]] = {i: set() for i in range(pts.shape[0])}
    for i, j, k in mesh.triangles:
        neighbor_sets[i].update((j, k))
        neighbor_sets[j].update((i, k))
        neighbor_sets[k].update((i, j))

    cells: dict[int, np.ndarray] = {}
    for v, others in neighbor_sets.items():
        poly = frame
        for u in others:
            # perpendicular bisector half-plane toward v
            anchor = 0.5 * (pts[v] + pts[u])
            normal = pts[u] - pts[v]
            poly = _clip_halfplane(poly, anchor, normal)
            if poly.shape[0] == 0:
                break
        cells[v] = poly
    return cells


def comp_set_for_ue(mesh: TriMesh, field: UavField, ue) -> CompSet:
    """Cooperating set via the nearest-edge / quadrilateral rule.

    The two UAVs nearest the user always span a Delaunay edge; the two
    triangles sharing it form a quadrilateral, and the nearer of the two
    opposing vertices completes the set.  If the edge lies on the hull the
    lone adjacent triangle supplies the third member (flagged).
    """
    ue = np.asarray(ue, dtype=float).reshape(2)
    pts = mesh.points
    if pts.shape[0] < 3:
        raise DegenerateInputError("mesh has fewer than 3 vertices")
    g2 = np.sum((pts - ue) ** 2, axis=1)
    order = np.argsort(g2, kind="stable")
    i1, i2 = int(order[0]), int(order[1])

    tri = mesh.triangles
    has_edge = np.logical_and(
        np.any(tri == i1, axis=1), np.any(tri == i2, axis=1)
    )
    rows = np.flatnonzero(has_edge)
    if rows.size == 0:
        raise CompSetSearchError(
            f"nearest UAVs {i1} and {i2} share no triangle; degenerate mesh"
        )
    opposing: list[int] = []
    for row in rows[:2]:
        for v in tri[row]:
            if v != i1 and v != i2:
                opposing.append(int(v))
    if len(opposing) == 1:
        third = opposing[0]
        fallback = True
    else:
        third = opposing[0] if g2[opposing[0]] <= g2[opposing[1]] else opposing[1]
        fallback = False
    ids = (i1, i2, third)
    r = np.sqrt(g2[list(ids)])
    d = np.sqrt(r**2 + field.height**2)
    return CompSet(
        uav_ids=ids, r=r, d=d, r_star=float(r.min()), hull_fallback=fallback
    )


def min_search_radius(intensity: float) -> float:
    """Smallest disk radius whose mean UAV count supports a full triangle."""
    if not intensity > 0.0:
        raise ValueError(f"intensity must be positive, got {intensity}")
    return math.sqrt(MIN_COOPERATION_UAVS / (intensity * math.pi))


def _slant_powers(g2: np.ndarray, height, alpha: float, heights=None) -> np.ndarray:
    h2 = (np.asarray(heights, dtype=float) ** 2) if heights is not None else height**2
    return (g2 + h2) ** (-alpha / 4.0)  # amplitude term: slant**(-alpha/2)


def best_triangle(
    mesh: TriMesh,
    ue,
    alpha: float,
    radius: float,
    height: float,
    heights=None,
) -> Optional[tuple[int, int, int]]:
    """Strongest-sum triangle with all vertices inside the search disk.

    Returns sorted vertex ids, or None when no triangle qualifies.  Ties
    resolve to the lexicographically smallest sorted id triple.
    """
    ue = np.asarray(ue, dtype=float).reshape(2)
    g2 = np.sum((mesh.points - ue) ** 2, axis=1)
    inside = g2 <= radius**2
    tri = mesh.triangles
    ok = inside[tri].all(axis=1)
    if not np.any(ok):
        return None
    cand = tri[ok]
    amp = _slant_powers(g2, height, alpha, heights)
    score = amp[cand].sum(axis=1)
    best = score.max()
    at_best = np.flatnonzero(score == best)
    triples = sorted(tuple(sorted(cand[i])) for i in at_best)
    return tuple(int(v) for v in triples[0])


def subdivision_search(
    field: UavField,
    ue,
    alpha: float,
    t: float = 0.0,
    *,
    mesh: Optional[TriMesh] = None,
    heights=None,
    max_expansions: int = 6,
) -> CompSet:
    """Cooperating set by exhaustive scoring inside the minimal search disk.

    ``field`` holds the UAV positions at time ``t``; the disk is centered
    at the user's ground projection with the minimal radius for the field
    intensity.  If no triangle fits, the radius doubles a bounded number
    of times before ``CompSetSearchError``.
    """
    if t < 0.0:
        raise ValueError(f"t must be nonnegative, got {t}")
    ue = np.asarray(ue, dtype=float).reshape(2)
    if mesh is None:
        mesh = triangulate(field.positions)
    radius = min_search_radius(field.intensity)
    for _ in range(max_expansions + 1):
        ids = best_triangle(mesh, ue, alpha, radius, field.height, heights)
        if ids is not None:
            g = np.sqrt(np.sum((field.positions[list(ids)] - ue) ** 2, axis=1))
            if heights is not None:
                h2 = np.asarray(heights, dtype=float)[list(ids)] ** 2
            else:
                h2 = field.height**2
            d = np.sqrt(g**2 + h2)
            return CompSet(uav_ids=ids, r=g, d=d, r_star=float(g.min()))
        radius *= 2.0
    raise CompSetSearchError(
        f"no complete triangle within {max_expansions} radius doublings"
    )


def nearest_uav(field: UavField, ue) -> int:
    """Index of the UAV with smallest ground distance (ties: lowest index)."""
    if len(field) == 0:
        raise ValueError("empty field")
    ue = np.asarray(ue, dtype=float).reshape(2)
    g2 = np.sum((field.positions - ue) ** 2, axis=1)
    return int(np.argmin(g2))
