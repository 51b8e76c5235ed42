import numpy as np
import pytest

from lightslab.mesh import (
    CharacterConfig,
    SkeletalPose,
    build_test_character,
    build_two_surface_frame,
)
from lightslab.raycast import (
    KIND_BACKGROUND,
    KIND_BOTH,
    KIND_PEELED,
    Camera,
    RaycastError,
    all_hits,
    build_bvh,
    build_frame_bvhs,
    generate_ray,
    intersect_two_surface,
    load_uv_maps,
    look_at_camera,
    nearest_hit,
    orbit_camera,
    point_outside_surface,
    render_uv_maps,
    save_uv_maps,
)

from helpers import brute_force_nearest_hit, icosphere, sphere_ray_classification


def two_sphere_scene(subdiv=4, r_inner=1.0, d=0.03):
    from lightslab.mesh import SkinnedMesh, TwoSurfaceFrame

    v, f = icosphere(subdiv, radius=r_inner)
    n = v / r_inner
    # lat-long style UVs; atlas injectivity is irrelevant for intersection tests
    uv = np.stack([
        (np.arctan2(v[:, 1], v[:, 0]) / (2 * np.pi)) % 1.0,
        np.clip(0.5 + np.arcsin(np.clip(v[:, 2] / r_inner, -1, 1)) / np.pi, 0, 1),
    ], axis=1)
    mesh = SkinnedMesh(v, f, uv, [], np.full((len(v), 4), -1, np.int32), np.zeros((len(v), 4)))
    return TwoSurfaceFrame(mesh, v, v + d * n, n, d)


def bent_character_frame(seed=0, amount=0.5):
    mesh = build_test_character(CharacterConfig(segments=8, radial=16, joints=3))
    rot = np.zeros((3, 3))
    rot[1] = [amount, 0.0, 0.0]
    rot[2] = [0.0, amount * 0.6, 0.0]
    return build_two_surface_frame(mesh, SkeletalPose(rot, np.zeros(3)), 0.03)


class TestGenerateRay:
    def make_camera(self):
        return Camera(200.0, 220.0, 32.5, 24.5, np.eye(3), np.zeros(3), 64, 48)

    def test_principal_point_gives_forward(self):
        cam = self.make_camera()
        origin, d = generate_ray(cam, (24, 32))  # pixel center (32.5, 24.5) == (cx, cy)
        np.testing.assert_allclose(d, [0, 0, 1], atol=1e-9)
        np.testing.assert_array_equal(origin, [0, 0, 0])

    def test_projection_round_trip(self):
        rng = np.random.default_rng(3)
        angles = rng.uniform(-1, 1, 3)
        from lightslab.mesh import euler_to_matrix

        cam = Camera(180.0, 190.0, 30.0, 25.0, euler_to_matrix(angles), rng.uniform(-1, 1, 3), 60, 50)
        for _ in range(200):
            row = rng.integers(0, cam.height)
            col = rng.integers(0, cam.width)
            o, d = generate_ray(cam, (row, col))
            t = rng.uniform(0.5, 10.0)
            u, v, z = cam.project(o + t * d)
            assert z > 0
            np.testing.assert_allclose([u, v], [col + 0.5, row + 0.5], atol=1e-6)

    def test_pixel_out_of_range(self):
        with pytest.raises(RaycastError):
            generate_ray(self.make_camera(), (48, 0))


class TestBVH:
    def test_single_triangle_leaf(self):
        v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=np.float64)
        f = np.array([[0, 1, 2]], dtype=np.int32)
        bvh = build_bvh(v, f)
        assert len(bvh.node_min) == 1
        np.testing.assert_array_equal(bvh.node_min[0], [0, 0, 0])
        np.testing.assert_array_equal(bvh.node_max[0], [1, 1, 0])
        assert sorted(bvh.order.tolist()) == [0]

    def test_leaf_face_multiset(self):
        frame = bent_character_frame()
        bvh = build_bvh(frame.inner_vertices, frame.faces)
        assert sorted(bvh.order.tolist()) == list(range(len(frame.faces)))

    def test_nodes_contain_children(self):
        frame = bent_character_frame()
        bvh = build_bvh(frame.inner_vertices, frame.faces)
        for node in range(len(bvh.node_min)):
            l, r = bvh.node_child[node]
            if l < 0:
                continue
            for ch in (l, r):
                assert np.all(bvh.node_min[node] <= bvh.node_min[ch] + 1e-15)
                assert np.all(bvh.node_max[node] >= bvh.node_max[ch] - 1e-15)

    def test_barycentric_association(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            tri = rng.normal(size=(3, 3))
            alpha = rng.dirichlet(np.ones(3))
            target = alpha @ tri
            origin = target + rng.normal(size=3) * 0 + np.array([0, 0, 5.0]) + rng.normal(size=3)
            d = target - origin
            d /= np.linalg.norm(d)
            bvh = build_bvh(tri, np.array([[0, 1, 2]], dtype=np.int32))
            hit = nearest_hit(bvh, origin, d)
            if hit is None:
                continue
            t, face, u, v = hit
            np.testing.assert_allclose([u, v, 1 - u - v], alpha, atol=1e-9)
            np.testing.assert_allclose(origin + t * d, target, atol=1e-9)

    def test_matches_brute_force(self):
        frame = bent_character_frame()
        bvh = build_bvh(frame.inner_vertices, frame.faces)
        rng = np.random.default_rng(17)
        center = frame.inner_vertices.mean(axis=0)
        hits = 0
        for _ in range(10000):
            o = center + 3.0 * _unit(rng)
            target = center + rng.uniform(-0.15, 0.15, 3)
            d = target - o
            d /= np.linalg.norm(d)
            got = nearest_hit(bvh, o, d)
            t_ref, f_ref = brute_force_nearest_hit(o, d, frame.inner_vertices, frame.faces)
            if got is None:
                assert f_ref == -1
            else:
                assert f_ref == got[1]
                assert abs(got[0] - t_ref) < 1e-9
                hits += 1
        assert hits > 2000  # scene framing sanity


def _unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


@pytest.fixture(scope="module")
def sphere_scene():
    frame = two_sphere_scene(subdiv=5)
    return frame, *build_frame_bvhs(frame)


class TestTwoSurfaceIntersection:

    def test_head_on_both(self, sphere_scene):
        frame, bvh_in, bvh_out = sphere_scene
        rec = intersect_two_surface((np.array([0.0, 0.0, 5.0]), np.array([0.0, 0.0, -1.0])),
                                    frame, bvh_in, bvh_out)
        assert rec.kind == "both"
        # analytic: t_out = 5 - 1.03, t_inner = 5 - 1 (mesh is inscribed, slightly larger t)
        assert abs(rec.t_out - 3.97) < 5e-3
        assert abs(rec.t_inner - 4.00) < 5e-3
        assert rec.t_out < rec.t_inner

    def test_grazing_peeled(self, sphere_scene):
        frame, bvh_in, bvh_out = sphere_scene
        b = 1.015  # between inner and outer radius
        origin = np.array([b, 0.0, 5.0])
        rec = intersect_two_surface((origin, np.array([0.0, 0.0, -1.0])), frame, bvh_in, bvh_out)
        assert rec.kind == "peeled_outer"
        half_chord = np.sqrt(1.03**2 - b**2)
        np.testing.assert_allclose(rec.t_out, 5 - half_chord, atol=2e-3)
        np.testing.assert_allclose(rec.t_inner, 5 + half_chord, atol=2e-3)
        assert rec.t_out < rec.t_inner

    def test_miss_background(self, sphere_scene):
        frame, bvh_in, bvh_out = sphere_scene
        rec = intersect_two_surface((np.array([0.0, 0.0, 5.0]), np.array([0.0, 0.0, 1.0])),
                                    frame, bvh_in, bvh_out)
        assert rec.kind == "background"
        assert rec.w_out is None and rec.w_inner is None

    def test_ordering_property_random_rays(self):
        rng = np.random.default_rng(23)
        frame = bent_character_frame()
        bvh_in, bvh_out = build_frame_bvhs(frame)
        center = frame.inner_vertices.mean(axis=0)
        n_both = n_peeled = 0
        for _ in range(5000):
            o = center + 2.5 * _unit(rng)
            d = (center + rng.uniform(-0.2, 0.2, 3)) - o
            d /= np.linalg.norm(d)
            rec = intersect_two_surface((o, d), frame, bvh_in, bvh_out)
            if rec.kind == "both":
                assert rec.t_out < rec.t_inner
                n_both += 1
            elif rec.kind == "peeled_outer":
                ts, _, _, _ = all_hits(bvh_out, o, d)
                assert len(ts) >= 2
                assert rec.t_out < rec.t_inner
                n_peeled += 1
        assert n_both > 500 and n_peeled > 20

    def test_uv_validity_reconstruction(self):
        frame = bent_character_frame()
        bvh_in, bvh_out = build_frame_bvhs(frame)
        rng = np.random.default_rng(29)
        center = frame.inner_vertices.mean(axis=0)
        checked = 0
        for _ in range(2000):
            o = center + 2.5 * _unit(rng)
            d = (center + rng.uniform(-0.4, 0.4, 3)) - o
            d /= np.linalg.norm(d)
            rec = intersect_two_surface((o, d), frame, bvh_in, bvh_out)
            if rec.kind == "background":
                continue
            for w in (rec.w_out, rec.w_inner):
                assert 0.0 <= w[0] <= 1.0 and 0.0 <= w[1] <= 1.0
            # barycentric reconstruction of the outer hit lands on the face plane
            tri = frame.outer_vertices[frame.faces[rec.face_out]]
            p = o + rec.t_out * d
            n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
            n /= np.linalg.norm(n)
            assert abs(np.dot(p - tri[0], n)) < 1e-6
            checked += 1
        assert checked > 300


class TestRenderUVMaps:
    def test_camera_facing_away_all_background(self):
        frame = bent_character_frame()
        cam = look_at_camera((0, 0, 5.0), (0, 0, 10.0), 0.8, 32, 32)
        maps = render_uv_maps(cam, frame)
        assert np.all(maps.kind == KIND_BACKGROUND)

    def test_analytic_two_sphere_classification(self):
        frame = two_sphere_scene(subdiv=6)
        bvh_in, bvh_out = build_frame_bvhs(frame)
        cam = look_at_camera((0, 0, 4.0), (0, 0, 0), 0.75, 256, 256)
        maps = render_uv_maps(cam, frame, bvh_in, bvh_out)
        dirs = cam.ray_directions()
        o = cam.center()
        mismatches = excluded = 0
        for r in range(256):
            for c in range(256):
                kind, b = sphere_ray_classification(o, dirs[r, c], (0, 0, 0), 1.0, 1.03)
                if abs(b - 1.0) <= 1e-4 or abs(b - 1.03) <= 1e-4:
                    excluded += 1
                    continue
                expect = {"background": KIND_BACKGROUND, "both": KIND_BOTH,
                          "peeled": KIND_PEELED}[kind]
                if maps.kind[r, c] != expect:
                    mismatches += 1
        assert mismatches == 0
        assert excluded < 2000

    def test_foreground_monotone_with_distance(self):
        frame = bent_character_frame()
        bvh_in, bvh_out = build_frame_bvhs(frame)
        target = frame.inner_vertices.mean(axis=0)
        counts = []
        for dist in (1.2, 1.6, 2.0, 2.6, 3.4):
            cam = look_at_camera(target + np.array([dist, 0.3, 0.2]), target, 0.8, 96, 96)
            maps = render_uv_maps(cam, frame, bvh_in, bvh_out)
            counts.append(maps.foreground_count())
        assert all(a >= b for a, b in zip(counts, counts[1:]))
        assert counts[0] > 0

    def test_camera_inside_rejected(self):
        frame = two_sphere_scene(subdiv=3)
        cam = look_at_camera((0, 0, 0.2), (0, 0, -1.0), 0.8, 16, 16)
        with pytest.raises(RaycastError, match="inside"):
            render_uv_maps(cam, frame)

    def test_one_evaluation_accounting(self):
        frame = bent_character_frame()
        cam = look_at_camera((1.8, 0.2, 0.5), frame.inner_vertices.mean(axis=0), 0.8, 64, 64)
        maps = render_uv_maps(cam, frame)
        n_pairs = np.sum(maps.kind != KIND_BACKGROUND)
        assert maps.foreground_count() == n_pairs
        # UV pairs are emitted exactly for non-background pixels
        fg = maps.kind != KIND_BACKGROUND
        assert np.all(np.isfinite(maps.w_out[fg]))
        assert np.all(maps.t_out[~fg] == np.inf)

    def test_orbit_camera_outside(self):
        frame = bent_character_frame()
        _, bvh_out = build_frame_bvhs(frame)
        cam = orbit_camera(0.7, 0.3, 2.0, frame.inner_vertices.mean(axis=0), 0.8, 32, 32)
        assert point_outside_surface(cam.center(), bvh_out)

    def test_suvm_roundtrip(self, tmp_path):
        frame = bent_character_frame()
        cam = look_at_camera((1.8, 0.2, 0.5), frame.inner_vertices.mean(axis=0), 0.8, 48, 40)
        maps = render_uv_maps(cam, frame)
        p = tmp_path / "cache.suvm"
        save_uv_maps(maps, p)
        back = load_uv_maps(p)
        np.testing.assert_array_equal(back.kind, maps.kind)
        np.testing.assert_allclose(back.w_out, maps.w_out, atol=1e-7)
        np.testing.assert_allclose(back.w_inner, maps.w_inner, atol=1e-7)
        assert p.stat().st_size == 4 + 8 + 48 * 40 * 17

    def test_render_deterministic(self):
        frame = bent_character_frame()
        cam = look_at_camera((1.8, 0.2, 0.5), frame.inner_vertices.mean(axis=0), 0.8, 32, 32)
        a = render_uv_maps(cam, frame)
        b = render_uv_maps(cam, frame)
        np.testing.assert_array_equal(a.kind, b.kind)
        np.testing.assert_array_equal(a.w_out, b.w_out)
        np.testing.assert_array_equal(a.w_inner, b.w_inner)
