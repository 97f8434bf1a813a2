"""Swept-volume tests: excursion bounds, occupancy containment, refinement."""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from reachguard.kinematics import KinematicChain, SweepTooWide, forward_occupancy
from reachguard.sets import Zonotope
from reachguard.swept import (
    CellBounds,
    JointTrajectory,
    cell_member_witness,
    joint_bounds,
    point_sweep_cells,
    swept_occupancy,
)

RNG = np.random.default_rng(99)


def simple_chain(n=1, accel=0.01):
    axes = np.tile([0.0, 0.0, 1.0], (n, 1))
    offsets = np.zeros((n, 3))
    offsets[1:, 0] = 1.0
    links = tuple(Zonotope([0.5, 0.0, 0.0], np.array([[0.5], [0.0], [0.0]]))
                  for _ in range(n))
    return KinematicChain(axes=axes, offsets=offsets, link_volumes=links,
                          accel_max=np.full(n, accel), vel_limit=5.0,
                          pos_limits=np.tile([-10.0, 10.0], (n, 1)))


def seven_link_chain():
    axes = np.array([[0, 0, 1], [0, 1, 0], [0, 0, 1], [0, 1, 0],
                     [0, 0, 1], [0, 1, 0], [0, 1, 0]], dtype=float)
    offsets = np.array([[0, 0, 0.12], [0, 0, 0.08], [0, 0, 0.20], [0, 0, 0.06],
                        [0, 0, 0.20], [0, 0, 0.06], [0, 0, 0.12]])
    spans = np.vstack([offsets[1:], [[0, 0, 0.10]]])
    links = []
    for j in range(7):
        g = np.column_stack([spans[j] / 2, np.diag([0.03, 0.03, 0.03])])
        links.append(Zonotope(spans[j] / 2, g))
    return KinematicChain(axes=axes, offsets=offsets, link_volumes=tuple(links),
                          accel_max=np.full(7, 12.0), vel_limit=1.5,
                          pos_limits=np.tile([-2.9, 2.9], (7, 1)))


def integrate_pw_accel(q0, qd0, accel_steps, dt, substeps=1):
    """Exact integration of piecewise-constant acceleration; returns samples at
    dt / substeps resolution."""
    qs = [np.asarray(q0, dtype=float)]
    vs = [np.asarray(qd0, dtype=float)]
    ts = [0.0]
    h = dt / substeps
    for a in accel_steps:
        for _ in range(substeps):
            q, v = qs[-1], vs[-1]
            qs.append(q + v * h + 0.5 * a * h * h)
            vs.append(v + a * h)
            ts.append(ts[-1] + h)
    return np.array(ts), np.array(qs), np.array(vs)


def test_joint_bounds_stationary():
    chain = simple_chain(accel=0.01)
    traj = JointTrajectory(times=[0.0, 0.1], q=[[0.5], [0.5]], qd=[[0.0], [0.0]])
    b = joint_bounds(traj, 0.1, chain, accel_margin=0.0)
    assert b.n_cells == 1
    half = 0.5 * 0.01 * 0.1 ** 2
    np.testing.assert_allclose(b.pos_lo[0, 0], 0.5 - half, atol=1e-15)
    np.testing.assert_allclose(b.pos_hi[0, 0], 0.5 + half, atol=1e-15)


def test_joint_bounds_constant_velocity():
    chain = simple_chain(accel=0.01)
    traj = JointTrajectory(times=[0.0, 0.1], q=[[0.0], [0.1]], qd=[[1.0], [1.0]])
    b = joint_bounds(traj, 0.1, chain, accel_margin=0.0)
    assert b.pos_lo[0, 0] <= -0.10005 + 1e-12
    assert b.pos_hi[0, 0] >= 0.10005 - 1e-12


def test_joint_bounds_misaligned_samples_rejected():
    chain = simple_chain()
    traj = JointTrajectory(times=[0.0, 0.07], q=[[0.0], [0.1]], qd=[[1.0], [1.0]])
    with pytest.raises(ValueError):
        joint_bounds(traj, 0.1, chain)


def test_joint_bounds_dense_integration_oracle():
    # any trajectory with |qdd| <= accel bound stays inside the cell boxes
    chain = simple_chain(n=3, accel=4.0)
    dt = 0.05
    steps = 16
    for trial in range(8):
        accel = RNG.uniform(-4.0, 4.0, size=(steps, 3))
        q0 = RNG.uniform(-1.0, 1.0, 3)
        qd0 = RNG.uniform(-1.0, 1.0, 3)
        ts, qs, vs = integrate_pw_accel(q0, qd0, accel, dt)
        traj = JointTrajectory(ts, qs, vs)
        b = joint_bounds(traj, dt, chain, accel_margin=0.0)
        ts_d, qs_d, _ = integrate_pw_accel(q0, qd0, accel, dt, substeps=50)
        cell_idx = np.clip(np.floor(ts_d / dt).astype(int), 0, steps - 1)
        assert np.all(qs_d >= b.pos_lo[cell_idx] - 1e-12)
        assert np.all(qs_d <= b.pos_hi[cell_idx] + 1e-12)


def test_swept_degenerate_equals_forward_occupancy():
    chain = seven_link_chain()
    q = RNG.uniform(-1.0, 1.0, 7)
    bounds = CellBounds(cells=np.array([[0.0, 0.05]]),
                        pos_lo=q[None, :], pos_hi=q[None, :],
                        vel_lo=np.zeros((1, 7)), vel_hi=np.zeros((1, 7)))
    swept = swept_occupancy(bounds, chain)
    occ = forward_occupancy(q, chain)
    for j in range(7):
        enc = swept.enclosure(0, j)
        lo_a, hi_a = enc.interval_hull()
        lo_b, hi_b = occ[j].interval_hull()
        np.testing.assert_allclose(lo_a, lo_b, atol=1e-9)
        np.testing.assert_allclose(hi_a, hi_b, atol=1e-9)


def test_swept_single_link_quarter_sweep():
    chain = simple_chain(n=1)
    bounds = CellBounds(cells=np.array([[0.0, 1.0]]),
                        pos_lo=np.array([[0.0]]), pos_hi=np.array([[np.pi / 2]]),
                        vel_lo=np.zeros((1, 1)), vel_hi=np.zeros((1, 1)))
    swept = swept_occupancy(bounds, chain)
    enc = swept.enclosure(0, 0)
    for theta in np.linspace(0.0, np.pi / 2, 1000)[::53]:
        R = Rotation.from_rotvec([0, 0, theta]).as_matrix()
        for s in np.linspace(0.0, 1.0, 5):
            assert enc.contains(R @ np.array([s, 0.0, 0.0]), tol=1e-9)


def test_swept_seven_link_containment():
    chain = seven_link_chain()
    dt = 0.05
    steps = 16
    accel = RNG.uniform(-1, 1, size=(steps, 7)) * chain.accel_max
    q0 = RNG.uniform(-0.8, 0.8, 7)
    qd0 = RNG.uniform(-0.5, 0.5, 7)
    ts, qs, vs = integrate_pw_accel(q0, qd0, accel, dt)
    traj = JointTrajectory(ts, qs, vs)
    bounds = joint_bounds(traj, dt, chain, accel_margin=0.0)
    swept = swept_occupancy(bounds, chain)

    ts_d, qs_d, _ = integrate_pw_accel(q0, qd0, accel, dt, substeps=8)
    violations = 0
    for _ in range(400):
        s = RNG.integers(0, ts_d.size)
        cell = min(int(np.floor(ts_d[s] / dt)), steps - 1)
        link = int(RNG.integers(0, 7))
        coeffs = RNG.uniform(-1, 1, chain.link_volumes[link].n_generators)
        point, ok = cell_member_witness(swept, chain, cell, link, qs_d[s], coeffs)
        # independent FK for the same sample point
        R_acc = np.eye(3)
        t_acc = np.zeros(3)
        q = qs_d[s]
        for j in range(link + 1):
            t_acc = t_acc + R_acc @ chain.offsets[j]
            R_acc = R_acc @ Rotation.from_rotvec(q[j] * chain.axes[j]).as_matrix()
        vol = chain.link_volumes[link]
        expected = t_acc + R_acc @ (vol.center + vol.generators @ coeffs)
        if not ok or np.linalg.norm(point - expected) > 1e-9:
            violations += 1
    assert violations == 0


def test_swept_refinement_still_sound():
    chain = simple_chain(n=2, accel=3.0)
    dt = 0.05
    steps = 8
    accel = RNG.uniform(-3, 3, size=(steps, 2))
    q0 = np.zeros(2)
    qd0 = np.array([0.5, -0.25])
    ts, qs, vs = integrate_pw_accel(q0, qd0, accel, dt)
    traj = JointTrajectory(ts, qs, vs)
    ts_d, qs_d, _ = integrate_pw_accel(q0, qd0, accel, dt, substeps=20)
    for delta in (2 * dt, dt):
        bounds = joint_bounds(traj, delta, chain, accel_margin=0.0)
        swept = swept_occupancy(bounds, chain)
        m = bounds.n_cells
        for s in range(0, ts_d.size, 13):
            cell = min(int(np.floor(ts_d[s] / delta)), m - 1)
            for link in range(2):
                point, ok = cell_member_witness(
                    swept, chain, cell, link, qs_d[s],
                    np.zeros(chain.link_volumes[link].n_generators))
                assert ok


def test_swept_span_guard():
    chain = simple_chain()
    bounds = CellBounds(cells=np.array([[0.0, 1.0]]),
                        pos_lo=np.array([[0.0]]), pos_hi=np.array([[np.pi]]),
                        vel_lo=np.zeros((1, 1)), vel_hi=np.zeros((1, 1)))
    with pytest.raises(SweepTooWide):
        swept_occupancy(bounds, chain)


def test_swept_occupancy_pz_matches_enclosure():
    chain = simple_chain(n=2)
    bounds = CellBounds(cells=np.array([[0.0, 1.0]]),
                        pos_lo=np.array([[0.1, -0.2]]), pos_hi=np.array([[0.4, 0.1]]),
                        vel_lo=np.zeros((1, 2)), vel_hi=np.zeros((1, 2)))
    swept = swept_occupancy(bounds, chain)
    pz = swept.occupancy(0, 1)
    pts = pz.sample(RNG, 200)
    enc = swept.enclosure(0, 1)
    lo, hi = enc.interval_hull()
    assert np.all(pts >= lo - 1e-10) and np.all(pts <= hi + 1e-10)


def test_point_sweep_cells_contains_true_path():
    dt = 0.05
    steps = 20
    accel = RNG.uniform(-6, 6, size=(steps, 2))
    p0 = np.zeros(2)
    v0 = np.array([1.0, -2.0])
    ts, ps, vs = integrate_pw_accel(p0, v0, accel, dt)
    states = np.hstack([ps, vs])
    centers, half, vel_lo, vel_hi = point_sweep_cells(states, dt, np.array([6.0, 6.0]))
    ts_d, ps_d, vs_d = integrate_pw_accel(p0, v0, accel, dt, substeps=40)
    cell = np.clip(np.floor(ts_d / dt).astype(int), 0, steps - 1)
    assert np.all(np.abs(ps_d - centers[cell]) <= half[cell] + 1e-12)
    assert np.all(vs_d >= vel_lo[cell] - 1e-12)
    assert np.all(vs_d <= vel_hi[cell] + 1e-12)


def test_point_sweep_cells_radius_inflation():
    states = np.array([[0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]])
    _, half0, _, _ = point_sweep_cells(states, 0.05, np.array([1.0, 1.0]), radius=0.0)
    _, half1, _, _ = point_sweep_cells(states, 0.05, np.array([1.0, 1.0]), radius=0.1)
    np.testing.assert_allclose(half1 - half0, 0.1, atol=1e-15)
