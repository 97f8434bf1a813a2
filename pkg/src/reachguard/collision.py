"""Continuous-time safety verification of plan segments.

A verdict of "safe" is conservative: the certified occupancy is a superset of
every trajectory consistent with the bounds, so an empty intersection with
all active obstacles plus in-limit joint boxes implies true continuous-time
safety.  Verdicts carry the first violating (cell, link, obstacle) triple in
canonical scan order (cells ascending; limits before collisions within a
cell) for diagnostics; early exit never changes the verdict.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kinematics import KinematicChain, SweepTooWide
from .sets import FEAS_EPS, Zonotope, zono_intersects
from .swept import (
    CellBounds,
    JointTrajectory,
    SweptOccupancy,
    joint_bounds,
    point_sweep_cells,
    swept_occupancy,
)


@dataclass(frozen=True)
class Obstacle:
    """Workspace obstacle; inactive obstacles are ignored by every check."""

    zonotope: Zonotope
    active: bool = True
    name: str = ""


@dataclass(frozen=True)
class Scene:
    """Obstacle set, state-constraint bounds, and goal region."""

    obstacles: tuple
    goal: Zonotope
    pos_limits: np.ndarray | None = None   # (n, 2) closed intervals
    vel_limit: np.ndarray | None = None    # per-axis speed bound

    def __post_init__(self):
        for obs in self.obstacles:
            if not np.all(np.isfinite(obs.zonotope.generators)):
                raise ValueError("obstacle generators must be finite")
        if self.goal is None:
            raise ValueError("scene requires a goal region")
        if self.pos_limits is not None:
            pl = np.asarray(self.pos_limits, dtype=float).reshape(-1, 2)
            object.__setattr__(self, "pos_limits", pl)
        if self.vel_limit is not None:
            vl = np.asarray(self.vel_limit, dtype=float).reshape(-1)
            object.__setattr__(self, "vel_limit", vl)
        object.__setattr__(self, "obstacles", tuple(self.obstacles))

    def active_obstacles(self) -> list[Obstacle]:
        return [o for o in self.obstacles if o.active]


@dataclass(frozen=True)
class SafetyVerdict:
    """Outcome of a plan-segment check.

    kind is "safe", "collision", "limit", or "uncertifiable"; collision
    verdicts carry the first violating (cell, link, obstacle) indices, limit
    verdicts the constraint kind ("position" or "velocity") and cell.
    """

    kind: str
    cell: int = -1
    link: int = -1
    obstacle: int = -1
    limit_kind: str = ""
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.kind == "safe"

    @classmethod
    def safe(cls) -> "SafetyVerdict":
        return cls(kind="safe")

    @classmethod
    def collision(cls, cell: int, link: int, obstacle: int) -> "SafetyVerdict":
        return cls(kind="collision", cell=cell, link=link, obstacle=obstacle)

    @classmethod
    def limit(cls, limit_kind: str, cell: int, link: int = -1) -> "SafetyVerdict":
        return cls(kind="limit", cell=cell, link=link, limit_kind=limit_kind)

    @classmethod
    def uncertifiable(cls, detail: str) -> "SafetyVerdict":
        return cls(kind="uncertifiable", detail=detail)

    def summary(self) -> str:
        if self.kind == "safe":
            return "safe"
        if self.kind == "collision":
            return f"collision(cell={self.cell},link={self.link},obstacle={self.obstacle})"
        if self.kind == "limit":
            return f"limit_violation({self.limit_kind},cell={self.cell})"
        return f"uncertifiable({self.detail})"


def _first_limit_violation(bounds: CellBounds, scene: Scene,
                           tol: float = FEAS_EPS):
    """(cell, kind, joint) of the first per-cell box leaving the limits."""
    hits = []
    if scene.pos_limits is not None:
        lo = scene.pos_limits[:, 0] - tol
        hi = scene.pos_limits[:, 1] + tol
        bad = (bounds.pos_lo < lo) | (bounds.pos_hi > hi)
        if bad.any():
            cell, joint = np.unravel_index(np.argmax(bad), bad.shape)
            hits.append((int(cell), 0, "position", int(joint)))
    if scene.vel_limit is not None:
        vl = scene.vel_limit + tol
        bad = (bounds.vel_lo < -vl) | (bounds.vel_hi > vl)
        if bad.any():
            cell, joint = np.unravel_index(np.argmax(bad), bad.shape)
            hits.append((int(cell), 1, "velocity", int(joint)))
    if not hits:
        return None
    hits.sort()
    cell, _, kind, joint = hits[0]
    return cell, kind, joint


def check_head(swept: SweptOccupancy, scene: Scene,
               tol: float = FEAS_EPS) -> SafetyVerdict:
    """Continuous-time verification of a swept occupancy against a scene.

    Safe iff every (cell, link, active obstacle) pair has an empty
    intersection and all per-cell joint boxes lie within the position and
    velocity limits.
    """
    limit_hit = _first_limit_violation(swept.bounds, scene)

    obstacles = [(idx, o) for idx, o in enumerate(scene.obstacles) if o.active]
    col_hit = None
    if obstacles:
        obs_lo = np.stack([o.zonotope.interval_hull()[0] for _, o in obstacles])
        obs_hi = np.stack([o.zonotope.interval_hull()[1] for _, o in obstacles])
        enc_lo = swept.centers - swept.radii   # (m, L, 3)
        enc_hi = swept.centers + swept.radii
        overlap = np.all(
            (enc_lo[:, :, None, :] <= obs_hi[None, None, :, :] + tol)
            & (obs_lo[None, None, :, :] <= enc_hi[:, :, None, :] + tol), axis=3)
        for cell, link, k in zip(*np.nonzero(overlap)):
            if limit_hit is not None and limit_hit[0] <= cell:
                break
            enc = swept.enclosure(int(cell), int(link))
            if zono_intersects(enc, obstacles[k][1].zonotope, tol=tol):
                col_hit = (int(cell), int(link), obstacles[k][0])
                break

    if limit_hit is not None and (col_hit is None or limit_hit[0] <= col_hit[0]):
        return SafetyVerdict.limit(limit_hit[1], limit_hit[0], limit_hit[2])
    if col_hit is not None:
        return SafetyVerdict.collision(*col_hit)
    return SafetyVerdict.safe()


@dataclass(frozen=True)
class PointRobot:
    """Point/disc robot parameters for the double-integrator analog."""

    radius: float
    accel_bound: np.ndarray
    dt: float

    def __post_init__(self):
        object.__setattr__(self, "accel_bound",
                           np.asarray(self.accel_bound, dtype=float).reshape(-1))


def check_state_traj(states: np.ndarray, scene: Scene, robot: PointRobot,
                     tol: float = FEAS_EPS) -> SafetyVerdict:
    """Safety check of a predicted state sequence for a point robot.

    Applies the swept-cell machinery with the robot as a disc zonotope swept
    along per-step cells bounded by the double-integrator excursion bound.
    """
    states = np.asarray(states, dtype=float)
    if states.shape[0] < 2:
        states = np.vstack([states, states])
    centers, half, vel_lo, vel_hi = point_sweep_cells(
        states, robot.dt, robot.accel_bound, robot.radius)
    m, d = centers.shape

    limit_hit = None
    hits = []
    if scene.pos_limits is not None:
        lo = scene.pos_limits[:, 0] - tol
        hi = scene.pos_limits[:, 1] + tol
        bad = ((centers - half) < lo) | ((centers + half) > hi)
        if bad.any():
            cell = int(np.unravel_index(np.argmax(bad), bad.shape)[0])
            hits.append((cell, 0, "position"))
    if scene.vel_limit is not None:
        vl = scene.vel_limit + tol
        bad = (vel_lo < -vl) | (vel_hi > vl)
        if bad.any():
            cell = int(np.unravel_index(np.argmax(bad), bad.shape)[0])
            hits.append((cell, 1, "velocity"))
    if hits:
        hits.sort()
        limit_hit = (hits[0][0], hits[0][2])

    obstacles = [(idx, o) for idx, o in enumerate(scene.obstacles) if o.active]
    col_hit = None
    if obstacles:
        obs_lo = np.stack([o.zonotope.interval_hull()[0] for _, o in obstacles])
        obs_hi = np.stack([o.zonotope.interval_hull()[1] for _, o in obstacles])
        overlap = np.all((centers[:, None, :] - half[:, None, :] <= obs_hi[None] + tol)
                         & (obs_lo[None] <= centers[:, None, :] + half[:, None, :] + tol),
                         axis=2)
        for cell, k in zip(*np.nonzero(overlap)):
            if limit_hit is not None and limit_hit[0] <= cell:
                break
            box = Zonotope.from_box(centers[cell], half[cell])
            if zono_intersects(box, obstacles[k][1].zonotope, tol=tol):
                col_hit = (int(cell), 0, obstacles[k][0])
                break

    if limit_hit is not None and (col_hit is None or limit_hit[0] <= col_hit[0]):
        return SafetyVerdict.limit(limit_hit[1], limit_hit[0])
    if col_hit is not None:
        return SafetyVerdict.collision(*col_hit)
    return SafetyVerdict.safe()


@dataclass
class Certificate:
    """Verified occupancy of a state sequence; kept with committed backups."""

    verdict: SafetyVerdict
    swept: SweptOccupancy | None = None
    cell_boxes: tuple | None = None


class ArmPlanChecker:
    """Plan checker for a serial arm: states are (q, qd) rows.

    Builds the joint trajectory, bounds it per cell of width `delta`, and
    verifies the swept occupancy.  A plan whose per-cell sweep exceeds the
    arc-box domain is uncertifiable and treated as unsafe.
    """

    def __init__(self, chain: KinematicChain, scene: Scene, dt: float,
                 delta_steps: int = 1, accel_margin: float = 0.05,
                 rot_trim: float | None = 2e-4):
        self.chain = chain
        self.scene = scene
        self.dt = dt
        self.delta_steps = delta_steps
        self.accel_margin = accel_margin
        self.rot_trim = rot_trim

    def check(self, states: np.ndarray, t0: float = 0.0) -> Certificate:
        states = np.asarray(states, dtype=float)
        n = self.chain.n
        times = t0 + self.dt * np.arange(states.shape[0])
        traj = JointTrajectory(times, states[:, :n], states[:, n:])
        try:
            bounds = joint_bounds(traj, self.delta_steps * self.dt, self.chain,
                                  accel_margin=self.accel_margin)
            swept = swept_occupancy(bounds, self.chain, rot_trim=self.rot_trim)
        except SweepTooWide as exc:
            return Certificate(SafetyVerdict.uncertifiable(str(exc)))
        return Certificate(check_head(swept, self.scene), swept=swept)


class PointPlanChecker:
    """Plan checker for the double-integrator point robot."""

    def __init__(self, scene: Scene, robot: PointRobot):
        self.scene = scene
        self.robot = robot

    def check(self, states: np.ndarray, t0: float = 0.0) -> Certificate:
        states = np.asarray(states, dtype=float)
        verdict = check_state_traj(states, self.scene, self.robot)
        centers, half, _, _ = point_sweep_cells(
            states if states.shape[0] > 1 else np.vstack([states, states]),
            self.robot.dt, self.robot.accel_bound, self.robot.radius)
        return Certificate(verdict, cell_boxes=(centers, half))
