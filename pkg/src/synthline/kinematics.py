"""Serial-chain kinematics and collision primitives.

Forward kinematics over revolute chains, damped-least-squares inverse
kinematics on the 6-D pose error twist (orientation-weighted, adaptive
damping seeded at 0.05, deterministic re-seeds), synchronized
constant-velocity joint interpolation, and sphere-vs-AABB/sphere collision
checks. FK internals run on cached rotation matrices; the Pose-level API
wraps them.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field

import numpy as np

from .assets import KinematicChain
from .errors import DimensionMismatch, IkNotConverged, Unreachable
from .geometry import Pose, matrix_to_quat, point_box_distance, quat_to_matrix

ORIENTATION_WEIGHT = 0.5  # m per rad in the DLS objective
INITIAL_DAMPING = 0.05
# Many short descents beat few long ones: limit-clipped DLS stalls are
# cheap to detect and a fresh seed usually clears them.
DEFAULT_MAX_ITERS = 30
RESTARTS = 60


class _ChainCache:
    """Precomputed per-chain arrays for the fast FK path."""

    def __init__(self, chain: KinematicChain):
        n = chain.joint_count
        self.n = n
        self.axes = np.array([j.axis for j in chain.joints])
        self.origins = np.array([j.origin for j in chain.joints])
        self.K = np.zeros((n, 3, 3))
        for i, axis in enumerate(self.axes):
            x, y, z = axis
            self.K[i] = [[0, -z, y], [z, 0, -x], [-y, x, 0]]
        self.K2 = np.einsum("nij,njk->nik", self.K, self.K)
        self.base_R = quat_to_matrix(chain.base_offset.rotation)
        self.base_t = chain.base_offset.translation
        self.ee_R = quat_to_matrix(chain.ee_offset.rotation)
        self.ee_t = chain.ee_offset.translation
        self.lo = np.array([j.lo for j in chain.joints])
        self.hi = np.array([j.hi for j in chain.joints])
        self.spheres = [
            (np.array([c for c, _ in j.spheres]).reshape(-1, 3), np.array([r for _, r in j.spheres]))
            for j in chain.joints
        ]
        self.reach = float(
            sum(np.linalg.norm(o) for o in self.origins) + np.linalg.norm(self.ee_t)
        )


_CACHE: "weakref.WeakKeyDictionary[KinematicChain, _ChainCache]" = weakref.WeakKeyDictionary()


def _cache(chain: KinematicChain) -> _ChainCache:
    cached = _CACHE.get(chain)
    if cached is None:
        cached = _ChainCache(chain)
        _CACHE[chain] = cached
    return cached


def _fk_mats(cache: _ChainCache, q: np.ndarray):
    """Link frames after each joint plus the EE frame, as (R, t) lists."""
    Rs = np.empty((cache.n + 1, 3, 3))
    ts = np.empty((cache.n + 1, 3))
    R, t = cache.base_R, cache.base_t
    sin_q, cos_q = np.sin(q), np.cos(q)
    eye = np.eye(3)
    for i in range(cache.n):
        t = t + R @ cache.origins[i]
        rot = eye + sin_q[i] * cache.K[i] + (1.0 - cos_q[i]) * cache.K2[i]
        R = R @ rot
        Rs[i], ts[i] = R, t
    ts[cache.n] = t + R @ cache.ee_t
    Rs[cache.n] = R @ cache.ee_R
    return Rs, ts


def _check_dim(cache: _ChainCache, q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (cache.n,):
        raise DimensionMismatch(f"expected {cache.n} joints, got shape {q.shape}")
    return q


def chain_frames(chain: KinematicChain, q) -> list[Pose]:
    """Pose of every link frame (after each joint), then the EE frame."""
    cache = _cache(chain)
    q = _check_dim(cache, q)
    Rs, ts = _fk_mats(cache, q)
    return [Pose(ts[i], matrix_to_quat(Rs[i])) for i in range(cache.n + 1)]


def forward_kinematics(chain: KinematicChain, q) -> Pose:
    """End-effector pose for joint vector q (chain-base coordinates)."""
    cache = _cache(chain)
    q = _check_dim(cache, q)
    Rs, ts = _fk_mats(cache, q)
    return Pose(ts[-1], matrix_to_quat(Rs[-1]))


def jacobian(chain: KinematicChain, q) -> np.ndarray:
    """Geometric Jacobian at the EE, shape (6, n): linear rows then angular."""
    cache = _cache(chain)
    q = _check_dim(cache, q)
    Rs, ts = _fk_mats(cache, q)
    return _jacobian_from(cache, Rs, ts)


def _jacobian_from(cache: _ChainCache, Rs, ts) -> np.ndarray:
    p_ee = ts[-1]
    # A joint's axis is invariant under its own rotation, so the post-joint
    # link frame carries it.
    axes_w = np.einsum("nij,nj->ni", Rs[: cache.n], cache.axes)
    lin = np.cross(axes_w, p_ee - ts[: cache.n])
    return np.concatenate([lin.T, axes_w.T])


def chain_reach(chain: KinematicChain) -> float:
    """Upper bound on EE distance from the chain mount point."""
    return _cache(chain).reach


def _rot_error_vec(R_cur: np.ndarray, R_target: np.ndarray) -> np.ndarray:
    """World-frame rotation vector carrying R_cur onto R_target."""
    dR = R_target @ R_cur.T
    cos_angle = np.clip((np.trace(dR) - 1.0) / 2.0, -1.0, 1.0)
    angle = float(np.arccos(cos_angle))
    if angle < 1e-12:
        return np.zeros(3)
    axis = np.array([dR[2, 1] - dR[1, 2], dR[0, 2] - dR[2, 0], dR[1, 0] - dR[0, 1]])
    norm = float(np.linalg.norm(axis))
    if norm < 1e-12:
        # angle ~ pi: extract axis from the symmetric part.
        diag = np.clip((np.diag(dR) + 1.0) / 2.0, 0.0, None)
        axis = np.sqrt(diag)
        axis[np.argmax(np.abs(axis))] *= np.sign(
            axis[np.argmax(np.abs(axis))]
        ) or 1.0
        norm = float(np.linalg.norm(axis))
        if norm < 1e-12:
            return np.zeros(3)
    return axis / norm * angle


def inverse_kinematics(
    chain: KinematicChain,
    target: Pose,
    seed,
    pos_tol: float = 1e-3,
    ori_tol: float = np.deg2rad(0.5),
    max_iters: int = DEFAULT_MAX_ITERS,
) -> np.ndarray:
    """Damped least-squares IK; returns the first iterate meeting tolerance.

    Iterates are projected to joint limits; damping adapts from 0.05 by
    step acceptance. Stalled descents restart from deterministic pseudo-
    random seeds, so planning stays reproducible. Raises Unreachable for
    targets beyond chain reach, IkNotConverged (with final residuals)
    otherwise.
    """
    cache = _cache(chain)
    seed = _check_dim(cache, seed)
    if float(np.linalg.norm(target.translation - cache.base_t)) > cache.reach + 1e-9:
        raise Unreachable(
            f"target {np.round(target.translation, 3)} beyond reach {cache.reach:.3f} m"
        )
    R_target = quat_to_matrix(target.rotation)
    p_target = target.translation
    lo, hi = cache.lo, cache.hi

    def residuals(q):
        Rs, ts = _fk_mats(cache, q)
        dp_vec = p_target - ts[-1]
        rot_vec = _rot_error_vec(Rs[-1], R_target)
        err = np.concatenate([dp_vec, ORIENTATION_WEIGHT * rot_vec])
        return Rs, ts, err, float(np.linalg.norm(dp_vec)), float(np.linalg.norm(rot_vec))

    key = np.abs(np.concatenate([p_target, target.rotation])).sum()
    restart_rng = np.random.default_rng(np.uint64(abs(key) * 1e9) % np.uint64(2**63))

    best = (np.inf, np.inf)
    best_q = np.clip(seed, lo, hi)
    start = np.clip(seed, lo, hi)
    eye6 = np.eye(6)
    for attempt in range(RESTARTS + 1):
        q = start.copy()
        Rs, ts, err, dp, dth = residuals(q)
        cost = float(err @ err)
        lam = INITIAL_DAMPING
        jitters_left = 2
        for _ in range(max_iters):
            if dp <= pos_tol and dth <= ori_tol:
                return q
            jac = _jacobian_from(cache, Rs, ts)
            jac_w = jac.copy()
            jac_w[3:, :] *= ORIENTATION_WEIGHT
            jjt = jac_w @ jac_w.T
            improved = False
            for _ in range(8):
                dq = jac_w.T @ np.linalg.solve(jjt + (lam**2) * eye6, err)
                q_new = np.clip(q + dq, lo, hi)
                Rs2, ts2, err2, dp2, dth2 = residuals(q_new)
                cost2 = float(err2 @ err2)
                if cost2 < cost:
                    q, Rs, ts, err, dp, dth, cost = q_new, Rs2, ts2, err2, dp2, dth2, cost2
                    lam = max(lam / 2.0, 1e-4)
                    improved = True
                    break
                lam = min(lam * 4.0, 1e3)
            if not improved:
                # Stuck (usually against a joint limit): jitter in place a
                # couple of times before abandoning this attempt.
                if jitters_left > 0:
                    jitters_left -= 1
                    q = np.clip(q + restart_rng.uniform(-0.3, 0.3, size=cache.n), lo, hi)
                    Rs, ts, err, dp, dth = residuals(q)
                    cost = float(err @ err)
                    lam = INITIAL_DAMPING
                    continue
                break
        if dp <= pos_tol and dth <= ori_tol:
            return q
        if (dp, dth) < best:
            best = (dp, dth)
            best_q = q.copy()
        if attempt < RESTARTS:
            if attempt == 0:
                span = hi - lo
                start = np.clip(seed + restart_rng.uniform(-0.2, 0.2, size=cache.n) * span, lo, hi)
            elif attempt % 2 == 1:
                start = restart_rng.uniform(lo, hi)
            else:
                start = np.clip(best_q + restart_rng.uniform(-0.6, 0.6, size=cache.n), lo, hi)
    raise IkNotConverged(best[0], best[1])


def interpolate_trajectory(q_waypoints, vmax, dt: float) -> np.ndarray:
    """Dense joint samples through waypoints, shape (T, n).

    Each segment is a straight joint-space line at synchronized constant
    velocity with duration max_j(|dq_j| / vmax_j), sampled on a uniform
    grid no coarser than dt including both endpoints. Junction samples are
    not duplicated.
    """
    waypoints = [np.asarray(w, dtype=float) for w in q_waypoints]
    if not waypoints:
        raise ValueError("need at least one waypoint")
    vmax = np.broadcast_to(np.asarray(vmax, dtype=float), waypoints[0].shape)
    if np.any(vmax <= 0) or dt <= 0:
        raise ValueError("vmax and dt must be > 0")
    samples = [waypoints[0]]
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        delta = b - a
        duration = float(np.max(np.abs(delta) / vmax))
        if duration <= 1e-12:
            continue
        n = max(1, int(np.ceil(duration / dt - 1e-9)))
        for k in range(1, n + 1):
            samples.append(a + delta * (k / n))
    return np.array(samples)


@dataclass
class CollisionWorld:
    """Static obstacles plus named exclusion support.

    Obstacle names let the planner exempt the object currently being
    grasped or pushed from checks, and let attached-object proxies skip
    their own gripper links.
    """

    aabbs: list = field(default_factory=list)  # (name, lo, hi)
    spheres: list = field(default_factory=list)  # (name, center, radius)

    def add_aabb(self, name: str, lo, hi):
        self.aabbs.append((name, np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)))

    def add_sphere(self, name: str, center, radius: float):
        if radius <= 0:
            raise ValueError("obstacle sphere radius must be > 0")
        self.spheres.append((name, np.asarray(center, dtype=float), float(radius)))

    def without(self, names: set) -> "CollisionWorld":
        return CollisionWorld(
            aabbs=[o for o in self.aabbs if o[0] not in names],
            spheres=[s for s in self.spheres if s[0] not in names],
        )


@dataclass(frozen=True)
class CollisionPair:
    link: str
    obstacle: str
    signed_distance: float


@dataclass(frozen=True)
class CollisionReport:
    pairs: tuple

    @property
    def collided(self) -> bool:
        return bool(self.pairs)


def link_spheres(chain: KinematicChain, q) -> list:
    """Chain-frame collision spheres (name, center, radius) for config q."""
    cache = _cache(chain)
    q = _check_dim(cache, q)
    Rs, ts = _fk_mats(cache, q)
    out = []
    for i, (centers, radii) in enumerate(cache.spheres):
        if len(radii) == 0:
            continue
        world = ts[i] + centers @ Rs[i].T
        for k in range(len(radii)):
            out.append((f"{chain.arm_id}/link{i}/s{k}", world[k], float(radii[k])))
    return out


def check_collision(world: CollisionWorld, spheres: list, exclude_obstacles: set | None = None) -> CollisionReport:
    """All (sphere, obstacle) pairs with signed distance < 0.

    An obstacle is skipped when its full name or its group (the part before
    '#') is in the exclusion set, so for example every proxy sphere
    'object:plate#s3' of the group 'object:plate' can be excluded at once.
    """
    exclude = exclude_obstacles or set()
    if not spheres:
        return CollisionReport(())
    names = [s[0] for s in spheres]
    centers = np.array([s[1] for s in spheres])
    radii = np.array([s[2] for s in spheres])
    pairs = []

    def skipped(oname: str) -> bool:
        return oname in exclude or oname.partition("#")[0] in exclude

    for oname, lo, hi in world.aabbs:
        if skipped(oname):
            continue
        closest = np.clip(centers, lo, hi)
        sd = np.linalg.norm(centers - closest, axis=1) - radii
        for idx in np.nonzero(sd < 0)[0]:
            pairs.append(CollisionPair(names[idx], oname, float(sd[idx])))
    for oname, ocenter, oradius in world.spheres:
        if skipped(oname):
            continue
        sd = np.linalg.norm(centers - ocenter, axis=1) - radii - oradius
        for idx in np.nonzero(sd < 0)[0]:
            pairs.append(CollisionPair(names[idx], oname, float(sd[idx])))
    return CollisionReport(tuple(pairs))


def sphere_decomposition(bbox_min, bbox_max, max_per_axis: int = 4) -> list:
    """Approximate a box by a grid of equal spheres (proxy for attached
    objects). Sphere radius is half the smallest extent; centers tile the
    larger extents so the proxy stays inside the box envelope."""
    lo = np.asarray(bbox_min, dtype=float)
    hi = np.asarray(bbox_max, dtype=float)
    extents = hi - lo
    radius = float(extents.min()) / 2.0
    centers = []
    axes = []
    for d in range(3):
        if extents[d] <= 2 * radius * 1.001:
            axes.append(np.array([(lo[d] + hi[d]) / 2.0]))
        else:
            n = min(max_per_axis, max(1, int(extents[d] / (2 * radius))))
            axes.append(np.linspace(lo[d] + radius, hi[d] - radius, n))
    for x in axes[0]:
        for y in axes[1]:
            for z in axes[2]:
                centers.append(np.array([x, y, z]))
    return [(c, radius) for c in centers]


def transform_spheres(spheres: list, pose: Pose, prefix: str) -> list:
    return [
        (f"{prefix}/s{i}", pose.transform_point(center), radius)
        for i, (center, radius) in enumerate(spheres)
    ]


def point_box_signed(p, lo, hi) -> float:
    return point_box_distance(np.asarray(p, dtype=float), np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
