"""Serial-chain model, rotation-set overapproximation, and forward occupancy.

A joint sweeping an angle interval traces an arc on the unit circle; the arc
is enclosed by a rectangle built on its chord, translated outward by half the
sagitta so that chord, endpoints, and arc midpoint are all contained.  Pushing
that rectangle through Rodrigues' formula (affine in cos/sin) yields a matrix
polynomial zonotope containing every rotation of the sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sets import (
    FEAS_EPS,
    Interval,
    MatrixPolyZonotope,
    Zonotope,
    fresh_ids,
    skew,
)

# arc_box is valid only for sweeps strictly below pi: the arc then projects
# monotonically onto its chord, so the rectangle extent covers it
MAX_SWEEP = np.pi


class SweepTooWide(ValueError):
    """Joint interval spans >= pi within one partition; refine the partition."""


def rodrigues(p, w) -> np.ndarray:
    """Rotation matrix I + p2 [w]x + (1 - p1) [w]x^2 for p = (cos t, sin t)."""
    p = np.asarray(p, dtype=float)
    w = np.asarray(w, dtype=float)
    if abs(np.linalg.norm(w) - 1.0) > FEAS_EPS:
        raise ValueError("rotation axis must be a unit vector")
    W = skew(w)
    return np.eye(3) + p[1] * W + (1.0 - p[0]) * (W @ W)


def arc_box_frame(theta1, theta2):
    """Center and half-extent generators of the arc-enclosing rectangle.

    Vectorized over leading dimensions; returns (center, g_chord, g_out),
    each (..., 2).  g_chord spans half the chord, g_out half the sagitta
    along the outward normal; the center sits midway between chord midpoint
    and arc midpoint.
    """
    theta1 = np.asarray(theta1, dtype=float)
    theta2 = np.asarray(theta2, dtype=float)
    p1 = np.stack([np.cos(theta1), np.sin(theta1)], axis=-1)
    p2 = np.stack([np.cos(theta2), np.sin(theta2)], axis=-1)
    mid = 0.5 * (theta1 + theta2)
    p3 = 0.5 * (p1 + p2)
    p4 = np.stack([np.cos(mid), np.sin(mid)], axis=-1)
    p5 = 0.5 * (p3 + p4)
    return p5, 0.5 * (p2 - p1), 0.5 * (p4 - p3)


def arc_box(theta1: float, theta2: float) -> Zonotope:
    """Rectangle containing (cos t, sin t) for every t in [theta1, theta2]."""
    if theta2 < theta1:
        raise ValueError("arc_box requires theta2 >= theta1")
    if theta2 - theta1 >= MAX_SWEEP:
        raise SweepTooWide(f"sweep {theta2 - theta1:.4f} >= pi; subdivide")
    center, g_chord, g_out = arc_box_frame(theta1, theta2)
    gens = np.stack([g_chord, g_out], axis=-1)
    keep = np.linalg.norm(gens, axis=0) > 0.0
    return Zonotope(center, gens[:, keep])


def rotation_terms(center, g_chord, g_out, w):
    """Matrix terms of the rotation set over an arc rectangle.

    Rodrigues' formula is affine in (p1, p2), so the rectangle maps to
    exactly three matrix terms: a constant and one per rectangle generator.
    Vectorized over leading dimensions of the rectangle frame; returns
    (..., 3, 3, 3) with term axis before the matrix axes.
    """
    w = np.asarray(w, dtype=float)
    W = skew(w)
    W2 = W @ W
    center = np.asarray(center, dtype=float)
    g_chord = np.asarray(g_chord, dtype=float)
    g_out = np.asarray(g_out, dtype=float)
    eye = np.broadcast_to(np.eye(3), center.shape[:-1] + (3, 3))
    const = (eye + center[..., 1, None, None] * W
             + (1.0 - center[..., 0, None, None]) * W2)
    t1 = g_chord[..., 1, None, None] * W - g_chord[..., 0, None, None] * W2
    t2 = g_out[..., 1, None, None] * W - g_out[..., 0, None, None] * W2
    return np.stack([const, t1, t2], axis=-3)


def rot_set(theta: Interval, w) -> MatrixPolyZonotope:
    """Matrix polynomial zonotope containing every rotation by an angle in
    `theta` about the unit axis `w`."""
    w = np.asarray(w, dtype=float)
    if abs(np.linalg.norm(w) - 1.0) > FEAS_EPS:
        raise ValueError("rotation axis must be a unit vector")
    if theta.width >= MAX_SWEEP:
        raise SweepTooWide(f"sweep {theta.width:.4f} >= pi; subdivide")
    center, g_chord, g_out = arc_box_frame(theta.lo, theta.hi)
    terms = rotation_terms(center, g_chord, g_out, w)
    keep = [0] + [k for k, g in ((1, g_chord), (2, g_out))
                  if np.linalg.norm(g) > 0.0]
    terms = terms[keep]
    n_gen = len(keep) - 1
    expo = np.zeros((len(keep), n_gen), dtype=np.int64)
    for row in range(1, len(keep)):
        expo[row, row - 1] = 1
    return MatrixPolyZonotope(terms, expo, fresh_ids(n_gen))


@dataclass(frozen=True)
class KinematicChain:
    """Serial revolute chain.

    axes[j] is joint j's unit rotation axis in frame j-1; offsets[j] is the
    position of joint j's center in frame j-1; link_volumes[j] is link j's
    volume in frame j (meters).  accel_max is the per-joint acceleration
    bound used for trajectory bounding, vel_limit the per-joint speed limit,
    pos_limits the closed position interval per joint.
    """

    axes: np.ndarray
    offsets: np.ndarray
    link_volumes: tuple
    accel_max: np.ndarray
    vel_limit: np.ndarray
    pos_limits: np.ndarray
    name: str = field(default="chain")

    def __post_init__(self):
        axes = np.asarray(self.axes, dtype=float).reshape(-1, 3)
        offsets = np.asarray(self.offsets, dtype=float).reshape(-1, 3)
        accel = np.asarray(self.accel_max, dtype=float).reshape(-1)
        vel = np.asarray(self.vel_limit, dtype=float).reshape(-1)
        pos = np.asarray(self.pos_limits, dtype=float).reshape(-1, 2)
        n = axes.shape[0]
        if n < 1:
            raise ValueError("chain needs at least one joint")
        if offsets.shape[0] != n or len(self.link_volumes) != n:
            raise ValueError("axes, offsets and link volumes must agree in length")
        if vel.size == 1:
            vel = np.full(n, vel[0])
        if accel.size != n or vel.size != n or pos.shape[0] != n:
            raise ValueError("per-joint parameter lengths must match joint count")
        norms = np.linalg.norm(axes, axis=1)
        if np.any(np.abs(norms - 1.0) > FEAS_EPS):
            raise ValueError("joint axes must be unit vectors")
        if np.any(accel <= 0.0):
            raise ValueError("acceleration bounds must be positive")
        if np.any(pos[:, 0] > pos[:, 1]):
            raise ValueError("position limits must satisfy lo <= hi")
        for volume in self.link_volumes:
            if volume.dim != 3:
                raise ValueError("link volumes must be 3-dimensional zonotopes")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "accel_max", accel)
        object.__setattr__(self, "vel_limit", vel)
        object.__setattr__(self, "pos_limits", pos)
        object.__setattr__(self, "link_volumes", tuple(self.link_volumes))

    @property
    def n(self) -> int:
        return self.axes.shape[0]

    def within_limits(self, q, tol: float = FEAS_EPS) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(np.all(q >= self.pos_limits[:, 0] - tol)
                    and np.all(q <= self.pos_limits[:, 1] + tol))


def chain_frames(q, chain: KinematicChain):
    """Accumulated rotations and joint-center positions for configuration q.

    Returns (R, t) with R[j] the world rotation of frame j and t[j] the world
    position of joint j's center; offsets are taken in the parent frame.
    """
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.size != chain.n:
        raise ValueError("configuration length must match joint count")
    R = np.empty((chain.n, 3, 3))
    t = np.empty((chain.n, 3))
    R_acc = np.eye(3)
    t_acc = np.zeros(3)
    for j in range(chain.n):
        t_acc = t_acc + R_acc @ chain.offsets[j]
        R_acc = R_acc @ rodrigues((np.cos(q[j]), np.sin(q[j])), chain.axes[j])
        R[j] = R_acc
        t[j] = t_acc
    return R, t


def forward_occupancy(q, chain: KinematicChain) -> list[Zonotope]:
    """Workspace volume of each link at configuration q (rigidly transformed
    link zonotopes; exact, no conservatism at a point configuration)."""
    q = np.asarray(q, dtype=float).reshape(-1)
    if not chain.within_limits(q):
        raise ValueError("configuration outside joint position limits")
    R, t = chain_frames(q, chain)
    occupancy = []
    for j in range(chain.n):
        vol = chain.link_volumes[j]
        occupancy.append(Zonotope(t[j] + R[j] @ vol.center, R[j] @ vol.generators))
    return occupancy
