import io

import numpy as np
import pytest

from a2gcomp.point_process import Disk, Rectangle, UavField, sample_ppp
from a2gcomp.triangulation import (
    CompSet,
    CompSetSearchError,
    DegenerateInputError,
    MIN_COOPERATION_UAVS,
    best_triangle,
    comp_set_for_ue,
    dual_voronoi,
    min_search_radius,
    nearest_uav,
    subdivision_search,
    triangulate,
)


def circumcircle(a, b, c):
    """Center and squared radius of the circle through three points."""
    ax, ay = a
    bx, by = b
    cx, cy = c
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    ux = ((ax**2 + ay**2) * (by - cy) + (bx**2 + by**2) * (cy - ay) + (cx**2 + cy**2) * (ay - by)) / d
    uy = ((ax**2 + ay**2) * (cx - bx) + (bx**2 + by**2) * (ax - cx) + (cx**2 + cy**2) * (bx - ax)) / d
    r2 = (ax - ux) ** 2 + (ay - uy) ** 2
    return np.array([ux, uy]), r2


def assert_empty_circumcircles(mesh, rel_tol=1e-9):
    """Brute force: no vertex strictly inside any triangle circumcircle."""
    pts = mesh.points
    for t in mesh.triangles:
        center, r2 = circumcircle(pts[t[0]], pts[t[1]], pts[t[2]])
        d2 = np.sum((pts - center) ** 2, axis=1)
        inside = d2 < r2 * (1.0 - rel_tol)
        inside[t] = False
        assert not inside.any(), f"circumcircle of {t} not empty"


def make_field(points, height=150.0, intensity=1e-4, seed=0):
    return UavField(positions=np.asarray(points, float), height=height,
                    intensity=intensity, seed=seed)


class TestTriangulate:
    def test_three_points_one_triangle(self):
        mesh = triangulate([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        assert mesh.num_triangles == 1

    def test_unit_square_two_triangles_sharing_diagonal(self):
        mesh = triangulate([[0, 0], [1, 0], [1, 1], [0, 1]])
        assert mesh.num_triangles == 2
        shared = set(mesh.triangles[0]) & set(mesh.triangles[1])
        assert len(shared) == 2
        # the fourth point is exactly on each circumcircle: tie rule says outside
        assert_empty_circumcircles(mesh)

    def test_random_points_pass_brute_force_oracle(self):
        rng = np.random.default_rng(42)
        mesh = triangulate(rng.uniform(0, 1000, (200, 2)))
        assert_empty_circumcircles(mesh)

    def test_orientation_counter_clockwise(self):
        rng = np.random.default_rng(1)
        mesh = triangulate(rng.standard_normal((80, 2)))
        a = mesh.points[mesh.triangles[:, 0]]
        b = mesh.points[mesh.triangles[:, 1]]
        c = mesh.points[mesh.triangles[:, 2]]
        signed = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
        assert (signed > 0).all()

    def test_adjacency_symmetric_and_opposite_convention(self):
        rng = np.random.default_rng(2)
        mesh = triangulate(rng.uniform(0, 10, (60, 2)))
        for ti, nbrs in enumerate(mesh.neighbors):
            for k, tj in enumerate(nbrs):
                if tj == -1:
                    continue
                assert ti in mesh.neighbors[tj]
                edge = set(mesh.triangles[ti]) - {mesh.triangles[ti][k]}
                assert edge < set(mesh.triangles[tj])

    def test_degenerate_inputs_rejected(self):
        with pytest.raises(DegenerateInputError):
            triangulate([[0, 0], [1, 1]])
        with pytest.raises(DegenerateInputError):
            triangulate([[0, 0], [1, 1], [2, 2], [3, 3]])

    def test_dump_format(self):
        mesh = triangulate([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        buf = io.StringIO()
        mesh.dump(buf)
        lines = buf.getvalue().splitlines()
        assert len(lines) == 4
        assert sum(ln.startswith("v ") for ln in lines) == 3
        t_lines = [ln for ln in lines if ln.startswith("t ")]
        assert len(t_lines) == 1
        ids = [int(s) for s in t_lines[0].split()[1:]]
        assert sorted(ids) == [0, 1, 2]


class TestDualVoronoi:
    def test_symmetric_pair_bisector(self):
        # two generators plus a far dummy: their cell boundary is the bisector
        pts = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, 50.0]])
        cells = dual_voronoi(triangulate(pts))
        for v in (0, 1):
            poly = cells[v]
            d_self = np.sqrt(np.sum((poly - pts[v]) ** 2, axis=1))
            d_other = np.sqrt(np.sum((poly - pts[1 - v]) ** 2, axis=1))
            assert (d_self <= d_other + 1e-9).all()
        # boundary x = 0 between the symmetric pair
        shared_x = [x for x, _ in cells[0] if abs(x) < 1e-9]
        assert shared_x

    def test_cells_agree_with_nearest_generator(self):
        rng = np.random.default_rng(7)
        pts = rng.uniform(0, 1000, (40, 2))
        mesh = triangulate(pts)
        cells = dual_voronoi(mesh)
        probes = rng.uniform(100, 900, (1000, 2))
        owner = np.argmin(
            np.sum((probes[:, None, :] - pts[None, :, :]) ** 2, axis=2), axis=1
        )
        for p, v in zip(probes, owner):
            poly = cells[int(v)]
            # convex polygon membership via consistent cross-product sign
            nxt = np.roll(poly, -1, axis=0)
            cross = (nxt[:, 0] - poly[:, 0]) * (p[1] - poly[:, 1]) - (
                nxt[:, 1] - poly[:, 1]
            ) * (p[0] - poly[:, 0])
            assert (cross >= -1e-6).all() or (cross <= 1e-6).all()

    def test_cocircular_square_cells_meet_at_circumcenter(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        cells = dual_voronoi(triangulate(pts))
        center = np.array([0.5, 0.5])
        for poly in cells.values():
            d = np.sqrt(np.sum((poly - center) ** 2, axis=1))
            assert d.min() < 1e-9


class TestCompSetForUe:
    def test_single_triangle_mesh(self):
        field = make_field([[0.0, 0.0], [100.0, 0.0], [50.0, 80.0]])
        mesh = triangulate(field.positions)
        cs = comp_set_for_ue(mesh, field, [50.0, 30.0])
        assert cs.members == {0, 1, 2}
        assert cs.hull_fallback  # lone triangle: every edge is on the hull
        assert np.allclose(cs.d, np.sqrt(cs.r**2 + 150.0**2))
        assert cs.r_star == cs.r.min()

    def test_quadrilateral_keeps_nearer_opposing_vertex(self):
        # A and B are nearest, C is closer than D: the set is {A, B, C}
        pts = [[0.0, 0.0], [2.0, 0.0], [1.0, 1.2], [1.0, -1.5]]
        field = make_field(pts)
        mesh = triangulate(field.positions)
        cs = comp_set_for_ue(mesh, field, [1.0, 0.1])
        assert cs.members == {0, 1, 2}
        assert not cs.hull_fallback

    def test_members_subset_of_two_nearest_and_quad(self):
        rng = np.random.default_rng(3)
        for trial in range(1000):
            pts = rng.uniform(0, 1000, (25, 2))
            ue = rng.uniform(300, 700, 2)
            field = make_field(pts)
            mesh = triangulate(pts)
            cs = comp_set_for_ue(mesh, field, ue)
            g2 = np.sum((pts - ue) ** 2, axis=1)
            near2 = set(np.argsort(g2)[:2])
            assert near2 < cs.members
            tri = mesh.triangles
            rows = np.flatnonzero(
                np.any(tri == min(near2), axis=1) & np.any(tri == max(near2), axis=1)
            )
            quad = set(tri[rows].ravel())
            assert cs.members <= quad

    def test_distinct_ids_enforced(self):
        with pytest.raises(ValueError):
            CompSet(uav_ids=(1, 1, 2), r=np.ones(3), d=np.ones(3), r_star=1.0)


class TestSearchRadius:
    def test_cancellation_value(self):
        lam = MIN_COOPERATION_UAVS / np.pi * 1e-6  # chosen so the radius is 1 km
        assert min_search_radius(lam) == pytest.approx(1000.0)

    def test_direct_arithmetic(self):
        assert min_search_radius(1e-6) == pytest.approx(2393.654, abs=1e-3)
        assert min_search_radius(2e-5) == pytest.approx(535.2376, abs=1e-3)

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            min_search_radius(0.0)


class TestSubdivisionSearch:
    def test_exactly_three_uavs_in_disk(self):
        field = make_field(
            [[0.0, 0.0], [200.0, 0.0], [100.0, 160.0]], intensity=1e-4
        )
        cs = subdivision_search(field, [100.0, 60.0], alpha=2.4)
        assert cs.members == {0, 1, 2}

    def test_matches_exhaustive_argmax(self):
        alpha, lam, h = 2.4, 2e-5, 150.0
        radius = min_search_radius(lam)
        region = Disk((0.0, 0.0), radius + 400.0)
        hits = 0
        for seed in range(1000):
            field = sample_ppp(lam, region, seed=seed, height=h)
            if len(field) < 3:
                continue
            try:
                cs = subdivision_search(field, [0.0, 0.0], alpha=alpha)
            except (CompSetSearchError, DegenerateInputError):
                continue
            mesh = triangulate(field.positions)
            g2 = np.sum(field.positions**2, axis=1)
            inside = g2 <= radius**2
            ok = inside[mesh.triangles].all(axis=1)
            if not ok.any():
                continue  # search had to expand; oracle restricted to base disk
            amp = (g2 + h * h) ** (-alpha / 4.0)
            scores = amp[mesh.triangles[ok]].sum(axis=1)
            best = mesh.triangles[ok][np.argmax(scores)]
            assert cs.members == set(int(v) for v in best)
            hits += 1
        assert hits > 900

    def test_permutation_invariance(self):
        rng = np.random.default_rng(11)
        pts = rng.uniform(-800, 800, (60, 2))
        field = make_field(pts, intensity=60 / (1600.0**2))
        cs = subdivision_search(field, [0.0, 0.0], alpha=2.6)
        perm = rng.permutation(60)
        field_p = make_field(pts[perm], intensity=field.intensity)
        cs_p = subdivision_search(field_p, [0.0, 0.0], alpha=2.6)
        orig_ids = {int(perm[i]) for i in cs_p.uav_ids}
        assert orig_ids == cs.members

    def test_radius_expansion_and_failure(self):
        # three UAVs far outside the minimal disk: found only after doubling
        field = make_field(
            [[900.0, 0.0], [1100.0, 0.0], [1000.0, 160.0]], intensity=1e-4
        )
        cs = subdivision_search(field, [0.0, 0.0], alpha=2.4)
        assert cs.members == {0, 1, 2}
        with pytest.raises(CompSetSearchError):
            subdivision_search(field, [0.0, 0.0], alpha=2.4, max_expansions=0)

    def test_average_uav_count_in_minimal_disk(self):
        lam = 2e-5
        disk = Disk((0.0, 0.0), min_search_radius(lam))
        counts = [len(sample_ppp(lam, disk, seed=s)) for s in range(10_000)]
        assert abs(np.mean(counts) - MIN_COOPERATION_UAVS) <= 0.18

    def test_mesh_reuse_gives_same_answer(self):
        field = sample_ppp(2e-5, Disk((0.0, 0.0), 900.0), seed=4, height=150.0)
        mesh = triangulate(field.positions)
        a = subdivision_search(field, [0.0, 0.0], alpha=3.0)
        b = subdivision_search(field, [0.0, 0.0], alpha=3.0, mesh=mesh)
        assert a.uav_ids == b.uav_ids


class TestNearestUav:
    def test_single_uav(self):
        field = make_field([[10.0, 10.0], [500.0, 500.0], [-300.0, 200.0]])
        assert nearest_uav(field, [0.0, 0.0]) == 0

    def test_ue_at_generator(self):
        field = make_field([[10.0, 10.0], [500.0, 500.0], [-300.0, 200.0]])
        assert nearest_uav(field, [500.0, 500.0]) == 1

    def test_matches_linear_scan(self):
        rng = np.random.default_rng(9)
        pts = rng.uniform(0, 100, (50, 2))
        field = make_field(pts)
        for _ in range(1000):
            ue = rng.uniform(0, 100, 2)
            idx = nearest_uav(field, ue)
            d2 = np.sum((pts - ue) ** 2, axis=1)
            assert d2[idx] == d2.min()

    def test_empty_field_rejected(self):
        field = UavField(np.empty((0, 2)), height=1.0, intensity=0.0, seed=0)
        with pytest.raises(ValueError):
            nearest_uav(field, [0.0, 0.0])


def test_triangle_density_is_twice_point_density():
    # interior triangle count per unit area approaches twice the point
    # density, the basis for the equivalent-cell process
    lam = 2e-4
    region = Disk((0.0, 0.0), 1200.0)
    window = Disk((0.0, 0.0), 700.0)
    counts = []
    for seed in range(60):
        field = sample_ppp(lam, region, seed=seed)
        mesh = triangulate(field.positions)
        centroids = mesh.points[mesh.triangles].mean(axis=1)
        counts.append(window.contains(centroids).sum())
    mean = np.mean(counts)
    expected = 2.0 * lam * window.area
    assert mean == pytest.approx(expected, rel=0.03)


def test_edge_rule_vs_strongest_triangle_logged():
    """The two selection rules can legitimately differ; report how often."""
    rng = np.random.default_rng(17)
    lam, h, alpha = 2e-5, 150.0, 2.4
    region = Disk((0.0, 0.0), min_search_radius(lam) + 500.0)
    total = diff = 0
    for seed in range(300):
        field = sample_ppp(lam, region, seed=seed, height=h)
        if len(field) < 4:
            continue
        mesh = triangulate(field.positions)
        try:
            a = comp_set_for_ue(mesh, field, [0.0, 0.0])
            b = subdivision_search(field, [0.0, 0.0], alpha=alpha, mesh=mesh)
        except (CompSetSearchError, DegenerateInputError):
            continue
        total += 1
        if a.members != b.members:
            diff += 1
    print(f"\nedge-rule vs strongest-triangle mismatches: {diff}/{total}")
    assert total > 250
