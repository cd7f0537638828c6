import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tactile_servo import kernels, skin_sim
from tactile_servo.skin_sim import FingerPose, SensorConfig


def _random_rotation(rng):
    return kernels.so3_exp(rng.normal(0, 1.5, 3))


def test_electrodes_on_surface(surface):
    assert surface.electrodes.shape == (19, 3)
    assert np.max(np.abs(surface.implicit(surface.electrodes))) <= 1e-9


def test_mesh_connected(surface):
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components

    indptr, indices, w = surface.mesh_adjacency()
    n = len(indptr) - 1
    g = csr_matrix((w + 1.0, indices, indptr), shape=(n, n))
    assert connected_components(g, directed=False)[0] == 1


def test_too_few_electrodes_rejected():
    with pytest.raises(ValueError):
        skin_sim.SkinSurface(skin_sim.SurfaceParams(n_electrodes=2))


def test_surface_config_roundtrip(surface, tmp_path):
    surface.save_config(tmp_path / "surface.cfg")
    again = skin_sim.SkinSurface.from_config(tmp_path / "surface.cfg")
    np.testing.assert_array_equal(again.electrodes, surface.electrodes)


# -- sensing --------------------------------------------------------------


def test_no_contact_gives_zero(surface):
    pose = FingerPose(np.eye(3), np.array([0.0, 0.0, 0.05]))
    smp = skin_sim.sense(surface, pose, np.zeros(3))
    assert not smp.contact.in_contact
    assert smp.p == 0.0
    np.testing.assert_array_equal(smp.s, np.zeros(19))


@pytest.mark.parametrize("e", [0, 3, 9, 17])
def test_argmax_at_pressed_electrode(surface, e):
    sg, ph = surface.to_surface_coords(surface.electrodes[e][None])
    pose = skin_sim.pose_for_contact(surface, np.zeros(3), sg[0], ph[0], 0.001)
    smp = skin_sim.sense(surface, pose, np.zeros(3))
    assert smp.contact.in_contact
    assert np.argmax(np.abs(smp.s)) == e
    assert smp.p == pytest.approx(surface_pressure(0.001), rel=1e-6)


def surface_pressure(depth):
    return SensorConfig().pressure_gain * depth


def test_pressure_is_negated_mean(surface, rng):
    n = 100
    sig = rng.uniform(0, surface.profile_length - 0.004, n)
    phi = rng.uniform(-math.pi, math.pi, n)
    depth = rng.uniform(0, 0.002, n)
    for sensor in (SensorConfig(), SensorConfig(noise_std=4e-4)):
        for i in range(n):
            pose = skin_sim.pose_for_contact(surface, np.zeros(3), sig[i], phi[i], depth[i],
                                             _random_rotation(rng))
            smp = skin_sim.sense(surface, pose, np.zeros(3), sensor, rng)
            assert -np.mean(smp.s) == pytest.approx(smp.p, abs=1e-15)


def test_contact_point_on_surface(surface, rng):
    q = rng.normal(0, 0.01, (200, 3))
    pts, _, _, _ = surface.nearest(q)
    assert np.max(np.abs(surface.implicit(pts))) <= 1e-9


def test_sense_deterministic(surface):
    pose = skin_sim.pose_for_contact(surface, np.zeros(3), 0.01, 0.3, 0.001)
    sensor = SensorConfig(noise_std=4e-4)
    a = skin_sim.sense(surface, pose, np.zeros(3), sensor, np.random.default_rng(5))
    b = skin_sim.sense(surface, pose, np.zeros(3), sensor, np.random.default_rng(5))
    np.testing.assert_array_equal(a.s, b.s)


def test_contact_point_continuity(surface, rng):
    eps, dt = 0.01, 0.01
    for _ in range(20):
        pose = skin_sim.pose_for_contact(surface, np.zeros(3), rng.uniform(0.002, 0.025),
                                         rng.uniform(-1.5, 1.5), 0.001, _random_rotation(rng))
        c0 = skin_sim.sense(surface, pose, np.zeros(3)).contact.contact_point
        a = rng.normal(size=6)
        a *= eps / np.linalg.norm(a)
        nxt = skin_sim.step_pose(pose, a, dt)
        c1 = skin_sim.sense(surface, nxt, np.zeros(3)).contact.contact_point
        # rigid motion of eps*dt moves the anchor by at most eps*dt*(1 + lever arm)
        assert np.linalg.norm(c1 - c0) <= 5 * eps * dt * (1 + 0.04)


# -- pose integration -----------------------------------------------------


def test_zero_twist_keeps_pose():
    pose = FingerPose(kernels.so3_exp(np.array([0.1, 0.2, 0.3])), np.array([1.0, 2.0, 3.0]))
    nxt = skin_sim.step_pose(pose, np.zeros(6), 0.31)
    np.testing.assert_array_equal(nxt.rotation, pose.rotation)
    np.testing.assert_array_equal(nxt.translation, pose.translation)


@pytest.mark.parametrize("axis", [0, 1, 2])
def test_full_turn_returns(axis):
    dt = 0.31
    a = np.zeros(6)
    a[3 + axis] = 2 * math.pi / dt
    nxt = skin_sim.step_pose(FingerPose(), a, dt)
    np.testing.assert_allclose(nxt.rotation, np.eye(3), atol=1e-12)


def test_pure_translation():
    nxt = skin_sim.step_pose(FingerPose(), np.array([0.2, 0, 0, 0, 0, 0]), 0.5)
    np.testing.assert_allclose(nxt.translation, [0.1, 0.0, 0.0])


def test_orthonormal_after_many_steps(rng):
    twists = rng.normal(0, 1.0, (100_000, 6))
    rots, _ = kernels.integrate_base_twists(np.eye(3), np.zeros(3), twists, 0.01)
    R = rots[-1]
    assert np.max(np.abs(R.T @ R - np.eye(3))) <= 1e-9
    assert abs(np.linalg.det(R) - 1.0) <= 1e-9


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=6, max_size=6), st.floats(0.001, 1.0))
def test_step_pose_stays_valid(a, dt):
    nxt = skin_sim.step_pose(FingerPose(), np.array(a), dt)
    R = nxt.rotation
    assert np.max(np.abs(R.T @ R - np.eye(3))) <= 1e-10
    assert abs(np.linalg.det(R) - 1.0) <= 1e-10


def test_base_and_ee_steps_agree(rng):
    R = _random_rotation(rng)
    pose = FingerPose(R, rng.normal(size=3))
    a = rng.normal(size=6)
    ee = skin_sim.step_pose(pose, a, 0.05)
    base = skin_sim.step_pose_base(pose, np.concatenate([R @ a[:3], R @ a[3:]]), 0.05)
    np.testing.assert_allclose(ee.rotation, base.rotation, atol=1e-12)
    np.testing.assert_allclose(ee.translation, base.translation, atol=1e-12)


# -- geodesic oracle ------------------------------------------------------


def test_oracle_identity(surface):
    p = surface.point(0.01, 0.4)
    assert skin_sim.surface_geodesic_oracle(surface, p, p) == 0.0


def test_oracle_rejects_off_surface(surface):
    with pytest.raises(ValueError):
        skin_sim.surface_geodesic_oracle(surface, np.zeros(3), surface.point(0.01, 0.0))


def test_oracle_matches_great_circle_on_cap(surface, rng):
    r = surface.radius
    checked = 0
    while checked < 150:
        a, b = rng.uniform(0, math.pi / 2, 2)
        p1 = surface.point(a * r, rng.uniform(-math.pi, math.pi))
        p2 = surface.point(b * r, rng.uniform(-math.pi, math.pi))
        theta = math.acos(np.clip(p1 @ p2 / r**2, -1, 1))
        if r * theta < 0.004:
            continue
        g = skin_sim.surface_geodesic_oracle(surface, p1, p2)
        assert g == pytest.approx(r * theta, rel=0.02)
        checked += 1


def test_oracle_triangle_inequality(surface, rng):
    # 1000 random triples drawn from a pool of 80 surface points
    m = 80
    pts = surface.point(rng.uniform(0, surface.profile_length, m), rng.uniform(-math.pi, math.pi, m))
    fields = np.stack([surface.distance_field(p) for p in pts])
    g = surface.field_at(fields, pts)
    np.fill_diagonal(g, 0.0)
    assert g[3, 7] == pytest.approx(skin_sim.surface_geodesic_oracle(surface, pts[3], pts[7]), abs=1e-15)
    tri = rng.integers(0, m, (1000, 3))
    a, b, c = tri.T
    assert np.all(g[a, c] <= g[a, b] + g[b, c] + 1e-12)


# -- demonstrations -------------------------------------------------------


def _segments(p):
    on = p > 0.05 * p.max()
    return int(np.sum(on[1:] & ~on[:-1]) + on[0])


@pytest.mark.parametrize("kind,count", [("rotational", 2), ("translational", 4)])
@pytest.mark.parametrize("region", [0, 3, 6])
def test_demo_segment_count(surface, kind, count, region):
    demo = skin_sim.scripted_demo(surface, kind, skin_sim.DemoParams(region=region), seed=region)
    assert _segments(demo.p) == count
    assert demo.p[0] == 0.0 and demo.p[-1] == 0.0


def test_demo_rates(surface):
    demo = skin_sim.scripted_demo(surface, "rotational", seed=1)
    assert np.allclose(np.diff(demo.t), 1 / 300)
    assert np.allclose(np.diff(demo.t_tactile), 1 / 100)


def test_demo_deterministic(surface):
    a = skin_sim.scripted_demo(surface, "translational", skin_sim.DemoParams(region=2), seed=9)
    b = skin_sim.scripted_demo(surface, "translational", skin_sim.DemoParams(region=2), seed=9)
    np.testing.assert_array_equal(a.rotations, b.rotations)
    np.testing.assert_array_equal(a.translations, b.translations)
    np.testing.assert_array_equal(a.s, b.s)


def test_demo_rejects_bad_region(surface):
    with pytest.raises(ValueError):
        skin_sim.scripted_demo(surface, "rotational", skin_sim.DemoParams(region=7))
    with pytest.raises(ValueError):
        skin_sim.scripted_demo(surface, "rotational", skin_sim.DemoParams(rot_x_range=(-0.05, -0.04)))


def _sweep_direction_changes(demo, surface, lag):
    _, phi = surface.to_surface_coords(demo.contact)
    on = demo.p > 0.5 * demo.p.max()
    starts = np.flatnonzero(on[1:] & ~on[:-1]) + 1
    ends = np.flatnonzero(~on[1:] & on[:-1]) + 1
    bad = 0
    for s0, s1 in zip(starts, ends):
        u = np.unwrap(phi[s0:s1])
        dphi = u[lag:] - u[:-lag]
        moving = np.abs(dphi) > 1e-3 * lag
        bad += int(np.sum(np.sign(dphi[moving]) != np.sign(np.sum(dphi[moving]))))
    return bad, len(starts)


def test_rotational_sweep_monotone(surface):
    params = skin_sim.DemoParams(jitter_lin=0.0, jitter_ang=0.0)
    bad, n = _sweep_direction_changes(skin_sim.scripted_demo(surface, "rotational", params, seed=4), surface, 1)
    assert n > 0 and bad == 0


def test_demo_csv_roundtrip(surface, tmp_path):
    demos = skin_sim.generate_demos(surface, tmp_path, n_regions=2, rot_reps=1, trans_reps=2, seed=3)
    assert (tmp_path / "surface.cfg").exists()
    back = skin_sim.load_demos(tmp_path)
    assert len(back) == len(demos) == 6
    for d, e in zip(demos, back):
        np.testing.assert_array_equal(d.s, e.s)
        np.testing.assert_array_equal(d.twist_base, e.twist_base)
        assert e.kind == d.kind
