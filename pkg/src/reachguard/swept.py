"""Continuous-time occupancy overapproximation of joint-space trajectories.

Time is partitioned into cells; per cell each joint's angle is bounded by an
interval derived from the sampled positions/velocities and the acceleration
bound, and the forward occupancy over the cell's interval box is computed by
composing rotation sets.  The union over cells and links contains the forward
occupancy of every trajectory consistent with the bounds.

Cells are independent, so the composition runs batched over cells with one
shared local monomial layout; indeterminates of different cells never meet,
and fresh global ids are assigned whenever a per-cell set is materialized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import MAX_SWEEP, KinematicChain, SweepTooWide, arc_box_frame, rotation_terms
from .sets import Interval, PolyZonotope, Zonotope, fresh_ids

# acceleration bounds from demonstration data are inflated by this fraction
DEFAULT_ACCEL_MARGIN = 0.05


@dataclass(frozen=True)
class JointTrajectory:
    """Sampled joint trajectory: times (N+1,), q and qd (N+1, n)."""

    times: np.ndarray
    q: np.ndarray
    qd: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        q = np.atleast_2d(np.asarray(self.q, dtype=float))
        qd = np.atleast_2d(np.asarray(self.qd, dtype=float))
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("trajectory times must be strictly increasing")
        if q.shape != qd.shape or q.shape[0] != times.size:
            raise ValueError("inconsistent trajectory dimensions")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qd", qd)

    @property
    def n_joints(self) -> int:
        return self.q.shape[1]

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])


@dataclass(frozen=True)
class CellBounds:
    """Per-cell joint boxes: cells (m, 2) in seconds, pos/vel bounds (m, n)."""

    cells: np.ndarray
    pos_lo: np.ndarray
    pos_hi: np.ndarray
    vel_lo: np.ndarray
    vel_hi: np.ndarray

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def n_joints(self) -> int:
        return self.pos_lo.shape[1]

    def interval(self, cell: int, joint: int) -> Interval:
        return Interval(float(self.pos_lo[cell, joint]), float(self.pos_hi[cell, joint]))


def joint_bounds(traj: JointTrajectory, delta: float, chain: KinematicChain,
                 accel_margin: float = DEFAULT_ACCEL_MARGIN) -> CellBounds:
    """Per-cell joint intervals from the kinematic excursion bound.

    Every sample inside a cell contributes q +- (delta |qd| + 0.5 qdd delta^2)
    to the cell's box, with qdd the margin-inflated acceleration bound; the
    velocity box is the sample hull inflated by qdd * delta.  Cell edges must
    coincide with sample times.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    duration = traj.duration
    m = int(round(duration / delta))
    if m < 1 or abs(m * delta - duration) > 1e-9:
        raise ValueError("delta must tile the trajectory duration")
    edges = traj.times[0] + delta * np.arange(m + 1)
    idx = np.searchsorted(traj.times, edges - 1e-9)
    if np.any(np.abs(traj.times[np.minimum(idx, traj.times.size - 1)] - edges) > 1e-9):
        raise ValueError("trajectory samples must align with cell endpoints")

    qdd = chain.accel_max * (1.0 + accel_margin)
    slack_v = delta * np.abs(traj.qd)
    slack_a = 0.5 * qdd * delta ** 2
    lo_cand = traj.q - slack_v - slack_a
    hi_cand = traj.q + slack_v + slack_a

    cells = np.column_stack([edges[:-1], edges[1:]])
    n = traj.n_joints
    pos_lo = np.empty((m, n))
    pos_hi = np.empty((m, n))
    vel_lo = np.empty((m, n))
    vel_hi = np.empty((m, n))
    for i in range(m):
        a, b = idx[i], idx[i + 1]
        sl = slice(a, b + 1)
        pos_lo[i] = lo_cand[sl].min(axis=0)
        pos_hi[i] = hi_cand[sl].max(axis=0)
        vel_lo[i] = traj.qd[sl].min(axis=0) - qdd * delta
        vel_hi[i] = traj.qd[sl].max(axis=0) + qdd * delta
    return CellBounds(cells=cells, pos_lo=pos_lo, pos_hi=pos_hi,
                      vel_lo=vel_lo, vel_hi=vel_hi)


class _LinkStore:
    """Per-link factored occupancy: joint-center terms plus rotation set and
    link volume; the full term list T ⊕ R L is expanded lazily per cell."""

    __slots__ = ("T_terms", "T_expo", "R_terms", "R_expo", "L", "link_col", "width")

    def __init__(self, T_terms, T_expo, R_terms, R_expo, L, link_col, width):
        self.T_terms = T_terms    # (m, K, 3)
        self.T_expo = T_expo      # (K, w)
        self.R_terms = R_terms    # (m, M, 3, 3)
        self.R_expo = R_expo      # (M, w)
        self.L = L                # (Lg+1, 3), row 0 the volume center
        self.link_col = link_col  # first exponent column of the link coeffs
        self.width = width        # total exponent columns incl. link coeffs

    def cell_terms(self, cell: int):
        """Full term and exponent arrays for one cell."""
        RL = (self.R_terms[cell] @ self.L.T).transpose(0, 2, 1).reshape(-1, 3)
        n_l = self.L.shape[0]
        L_expo = np.zeros((n_l, self.width), dtype=np.int64)
        for g in range(n_l - 1):
            L_expo[1 + g, self.link_col + g] = 1
        R_expo = np.zeros((self.R_expo.shape[0], self.width), dtype=np.int64)
        R_expo[:, :self.R_expo.shape[1]] = self.R_expo
        RL_expo = (R_expo[:, None, :] + L_expo[None, :, :]).reshape(-1, self.width)
        T_expo = np.zeros((self.T_expo.shape[0], self.width), dtype=np.int64)
        T_expo[:, :self.T_expo.shape[1]] = self.T_expo
        terms = np.vstack([self.T_terms[cell], RL])
        expo = np.vstack([T_expo, RL_expo])
        return terms, expo


class SweptOccupancy:
    """Per-cell, per-link occupancy sets with precomputed enclosure boxes.

    `occupancy` materializes the polynomial zonotope of one (cell, link) pair
    with fresh global ids; `enclosure` returns its enclosing zonotope.  When
    built with rotation-term trimming the sets are conservative supersets and
    the constructive membership witness is unavailable.
    """

    def __init__(self, bounds: CellBounds, stores, centers, radii, reduced: bool):
        self.bounds = bounds
        self._stores = stores
        self.centers = centers        # (m, L, 3)
        self.radii = radii            # (m, L, 3)
        self.reduced = reduced

    @property
    def n_cells(self) -> int:
        return self.bounds.n_cells

    @property
    def n_links(self) -> int:
        return len(self._stores)

    @property
    def cells(self) -> np.ndarray:
        return self.bounds.cells

    def occupancy(self, cell: int, link: int) -> PolyZonotope:
        terms, expo = self._stores[link].cell_terms(cell)
        used = expo.any(axis=0)
        pz = PolyZonotope(terms, expo[:, used], fresh_ids(int(used.sum())))
        return pz.compact()

    def enclosure(self, cell: int, link: int) -> Zonotope:
        terms, expo = self._stores[link].cell_terms(cell)
        const = ~expo.any(axis=1)
        gens = terms[~const]
        keep = np.abs(gens).max(axis=1) > 0.0
        return Zonotope(terms[const].sum(axis=0), gens[keep].T)

    def dump(self, fh, tag: str = "") -> None:
        """Line-oriented enclosure-box records: cell, link, center, box generators."""
        for i in range(self.n_cells):
            for j in range(self.n_links):
                c = self.centers[i, j]
                r = self.radii[i, j]
                fields = [tag, str(i), str(j)] + [f"{v:.9g}" for v in c]
                for k in range(3):
                    g = np.zeros(3)
                    g[k] = r[k]
                    fields += [f"{v:.9g}" for v in g]
                fh.write(" ".join(f for f in fields if f != "") + "\n")


def swept_occupancy(bounds: CellBounds, chain: KinematicChain,
                    rot_trim: float | None = None) -> SweptOccupancy:
    """Forward occupancy overapproximation over all cells and links.

    Per cell, joint j's interval box maps through Rodrigues' formula to three
    matrix terms; accumulated products (fresh indeterminates per joint, so all
    monomials are multilinear and distinct) give the rotation set, and the
    joint-center set plus rotated link volume give the occupancy.

    `rot_trim` caps generator growth: rotation terms whose worst-case norm
    falls below the threshold are absorbed into per-entry independent error
    generators.  The result remains a superset (sound, slightly conservative).
    """
    spans = bounds.pos_hi - bounds.pos_lo
    if np.any(spans >= MAX_SWEEP):
        raise SweepTooWide("a joint interval spans >= pi; refine the partition")

    m = bounds.n_cells
    n = chain.n
    n_cols = 2 * n

    center, g_chord, g_out = arc_box_frame(bounds.pos_lo, bounds.pos_hi)
    # (m, n, 3, 3, 3): per cell and joint, three matrix terms
    rot = np.empty((m, n, 3, 3, 3))
    for j in range(n):
        rot[:, j] = rotation_terms(center[:, j], g_chord[:, j], g_out[:, j],
                                   chain.axes[j])

    R_terms = np.broadcast_to(np.eye(3), (m, 1, 3, 3)).copy()
    R_expo = np.zeros((1, n_cols), dtype=np.int64)
    T_terms = np.zeros((m, 1, 3))
    T_expo = np.zeros((1, n_cols), dtype=np.int64)

    stores = []
    centers = np.empty((m, n, 3))
    radii = np.empty((m, n, 3))
    reduced = False
    for j in range(n):
        # joint-center set: T_j = T_{j-1} + R_{j-1} t_j
        shift = R_terms @ chain.offsets[j]
        T_terms = np.concatenate([T_terms, shift], axis=1)
        T_expo = np.vstack([T_expo, R_expo])

        # rotation accumulation: R_j = R_{j-1} * rot_j (disjoint fresh ids);
        # row 0 stays the constant term throughout
        rot_expo = np.zeros((3, n_cols), dtype=np.int64)
        rot_expo[1, 2 * j] = 1
        rot_expo[2, 2 * j + 1] = 1
        R_new = np.matmul(R_terms[:, :, None], rot[:, j][:, None])
        R_terms = R_new.reshape(m, -1, 3, 3)
        R_expo = (R_expo[:, None, :] + rot_expo[None, :, :]).reshape(-1, n_cols)

        if rot_trim is not None and R_terms.shape[1] > 2 * n + 1:
            R_terms, R_expo, T_expo, n_cols, trimmed = _trim_rotation(
                R_terms, R_expo, T_expo, n_cols, rot_trim)
            reduced = reduced or trimmed

        # occupancy enclosure: T_j ⊕ R_j L_j without expanding all cells
        vol = chain.link_volumes[j]
        L = np.vstack([vol.center[None, :], vol.generators.T])  # (Lg+1, 3)
        stores.append(_LinkStore(T_terms, T_expo, R_terms, R_expo, L,
                                 link_col=n_cols, width=n_cols + vol.n_generators))

        T_const = ~T_expo.any(axis=1)
        RL = np.matmul(R_terms, L.T)  # (m, M, 3, Lg+1)
        centers[:, j] = T_terms[:, T_const].sum(axis=1) + RL[:, 0, :, 0]
        radii[:, j] = (np.abs(T_terms[:, ~T_const]).sum(axis=1)
                       + np.abs(RL).sum(axis=(1, 3)) - np.abs(RL[:, 0, :, 0]))

    return SweptOccupancy(bounds, stores, centers, radii, reduced)


def _trim_rotation(R_terms, R_expo, T_expo, n_cols, threshold):
    """Absorb rotation terms below `threshold` (worst-case Frobenius norm over
    cells) into per-entry independent error generators; conservative."""
    norms = np.sqrt((R_terms ** 2).sum(axis=(2, 3))).max(axis=0)
    small = norms < threshold
    small[0] = False
    if not small.any():
        return R_terms, R_expo, T_expo, n_cols, False
    rad = np.abs(R_terms[:, small]).sum(axis=1)  # (m, 3, 3)
    R_terms = R_terms[:, ~small]
    R_expo = R_expo[~small]
    entries = [(r, c) for r in range(3) for c in range(3)
               if rad[:, r, c].max() > 0.0]
    k = len(entries)
    if k:
        err = np.zeros((R_terms.shape[0], k, 3, 3))
        for idx, (r, c) in enumerate(entries):
            err[:, idx, r, c] = rad[:, r, c]
        R_terms = np.concatenate([R_terms, err], axis=1)
        R_expo = np.hstack([R_expo, np.zeros((R_expo.shape[0], k), dtype=np.int64)])
        err_expo = np.zeros((k, n_cols + k), dtype=np.int64)
        err_expo[:, n_cols:] = np.eye(k, dtype=np.int64)
        R_expo = np.vstack([R_expo, err_expo])
        T_expo = np.hstack([T_expo, np.zeros((T_expo.shape[0], k), dtype=np.int64)])
        n_cols += k
    return R_terms, R_expo, T_expo, n_cols, True


def cell_member_witness(swept: SweptOccupancy, chain: KinematicChain,
                        cell: int, link: int, q: np.ndarray,
                        link_coeffs: np.ndarray, tol: float = 1e-9):
    """Constructive membership evidence for a configuration inside a cell.

    Solves the rectangle coefficients of each joint's (cos q_j, sin q_j),
    evaluates the stored occupancy terms at those coefficients together with
    the given link-volume coefficients, and reports whether all coefficients
    lie in [-1, 1].  When they do, the returned point is a member of the
    occupancy set by construction.  Unavailable for trimmed sets.
    """
    if swept.reduced:
        raise ValueError("membership witness requires an untrimmed swept set")
    bounds = swept.bounds
    center, g_chord, g_out = arc_box_frame(bounds.pos_lo[cell], bounds.pos_hi[cell])
    q = np.asarray(q, dtype=float)
    p = np.stack([np.cos(q), np.sin(q)], axis=-1)
    beta = np.zeros(2 * chain.n)
    in_box = True
    for j in range(chain.n):
        diff = p[j] - center[j]
        for k, g in enumerate((g_chord[j], g_out[j])):
            nrm2 = float(g @ g)
            if nrm2 > 1e-24:
                beta[2 * j + k] = float(diff @ g) / nrm2
            elif abs(float(diff @ g)) > tol:
                in_box = False
        if np.abs(beta[2 * j:2 * j + 2]).max() > 1.0 + 1e-9:
            in_box = False
    store = swept._stores[link]
    coeffs = np.zeros(store.width)
    coeffs[:2 * chain.n] = beta
    link_coeffs = np.asarray(link_coeffs, dtype=float)
    coeffs[store.link_col:store.link_col + link_coeffs.size] = link_coeffs
    terms, expo = store.cell_terms(cell)
    weights = np.prod(coeffs[None, :] ** expo, axis=1)
    point = weights @ terms
    return point, in_box


def point_sweep_cells(states: np.ndarray, dt: float, accel_bound: np.ndarray,
                      radius: float = 0.0):
    """Double-integrator analog of the joint excursion bound for a point robot.

    states rows are (position, velocity) pairs; each control step is one cell.
    Returns (centers (T, d), half_widths (T, d), vel_lo (T, d), vel_hi (T, d)).
    """
    states = np.asarray(states, dtype=float)
    d = states.shape[1] // 2
    p = states[:, :d]
    v = states[:, d:]
    accel = np.asarray(accel_bound, dtype=float).reshape(-1)
    slack = dt * np.abs(v) + 0.5 * accel * dt ** 2
    lo = np.minimum((p - slack)[:-1], (p - slack)[1:])
    hi = np.maximum((p + slack)[:-1], (p + slack)[1:])
    centers = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo) + radius
    vel_lo = np.minimum(v[:-1], v[1:]) - accel * dt
    vel_hi = np.maximum(v[:-1], v[1:]) + accel * dt
    return centers, half, vel_lo, vel_hi
