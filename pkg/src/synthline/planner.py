"""Episode planning and kinematic validation.

Turns a compiled skill plan into dense, time-aligned joint trajectories:
IK at every waypoint (seeded by the previous solution), synchronized
constant-velocity interpolation, per-sample collision checks, and
kinematic attachment bookkeeping. Arms inside a parallel step are planned
sequentially, each treating the earlier arm's already-planned samples as
moving obstacles at matching timestamps. Plan failures are status-encoded,
never raised.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, IkNotConverged, Unreachable
from .geometry import Pose, aabb_of_box, point_box_distance, pose_error
from .kinematics import (
    CollisionWorld,
    check_collision,
    interpolate_trajectory,
    inverse_kinematics,
    link_spheres,
    sphere_decomposition,
    transform_spheres,
)
from .skills import SceneState, SkillPlan, Waypoint

# An arm's spheres are not tested against an object while the EE is within
# this distance of it: grasp, release, and push necessarily operate in
# contact range.
CONTACT_EXCLUSION_RADIUS = 0.12

GRIPPER_VALUE = {"open": 0.0, "close": 1.0}


@dataclass
class PlanParams:
    dt: float = 1.0 / 30.0
    vmax: float = 1.5  # rad/s per joint
    ik_max_iters: int = 150
    max_episode_length: int = 100000


@dataclass(frozen=True)
class JointTrajectory:
    arm_id: str
    dt: float
    samples: np.ndarray  # (T, n) radians
    gripper: np.ndarray  # (T,) 0.0 open / 1.0 closed
    attachment: tuple  # (T,) object name or None


@dataclass(frozen=True)
class WaypointResidual:
    step: int
    arm: str
    phase: str
    position: float
    orientation: float


@dataclass
class PlanResult:
    status: str  # success | ik_failure | collision | limit_violation
    trajectories: dict = field(default_factory=dict)  # arm -> JointTrajectory
    ee_tracks: dict = field(default_factory=dict)  # arm -> list[Pose]
    object_tracks: dict = field(default_factory=dict)  # object -> list[Pose]
    articulation_tracks: dict = field(default_factory=dict)  # (obj, joint) -> list[float]
    residuals: list = field(default_factory=list)
    failed_step: tuple | None = None  # (step index, arm)
    failure_detail: str = ""
    placements: tuple = ()
    waypoint_log: tuple = ()  # (step, arm, phase) in execution order
    frame_count: int = 0

    @property
    def success(self) -> bool:
        return self.status == "success"


@dataclass(frozen=True)
class ValidationOutcome:
    valid: bool
    failure: str | None = None  # grip | support | collision | predicate
    detail: str = ""


def _gripper_event(state: SceneState, robot: str, wp: Waypoint):
    """Gripper transition at a waypoint arrival (EE already moved)."""
    arm = state.arm(robot, wp.arm_id)
    if wp.gripper == "close":
        if arm.gripper != "close" or wp.attach:
            target = wp.attach
            if target is None and wp.proximity_attach:
                target = state.nearest_object(robot, wp.arm_id)
            if target is not None:
                state.request_attach(target, robot, wp.arm_id)
        arm.gripper = "close"
    elif wp.gripper == "open":
        if arm.gripper != "open":
            state.release(robot, wp.arm_id)
        arm.gripper = "open"


@dataclass
class _ArmSegment:
    """Per-sample plan for one arm within one step."""

    qs: list = field(default_factory=list)  # np arrays
    events: list = field(default_factory=list)  # sample index -> Waypoint | None
    articulation: list = field(default_factory=list)  # per-sample (obj, joint, value) | None


def _build_arm_segment(state, robot, arm, waypoints, params, residuals, step_index):
    """IK every waypoint and lay out this arm's samples for the step."""
    robot_state = state.robots[robot]
    arm_state = robot_state.arms[arm]
    chain = arm_state.chain
    base = robot_state.base_pose
    lo, hi = chain.limits()
    seg = _ArmSegment()
    q_prev = np.asarray(arm_state.q, dtype=float)
    for wp in waypoints:
        if wp.joint_target is not None:
            q_target = np.clip(np.asarray(wp.joint_target, dtype=float), lo, hi)
        else:
            local_target = base.inverse().compose(wp.pose)
            q_target = inverse_kinematics(
                chain,
                local_target,
                q_prev,
                pos_tol=wp.pos_tol,
                ori_tol=np.deg2rad(wp.ori_tol_deg),
                max_iters=params.ik_max_iters,
            )
        reached = base.compose(_fk(chain, q_target))
        dp, dth = pose_error(reached, wp.pose)
        residuals.append(WaypointResidual(step_index, arm, wp.phase, dp, dth))
        if wp.joint_target is None and (dp > wp.pos_tol + 1e-12 or dth > np.deg2rad(wp.ori_tol_deg) + 1e-12):
            raise IkNotConverged(dp, dth)

        path = interpolate_trajectory([q_prev, q_target], params.vmax, params.dt)
        n_new = len(path) - 1
        arrival_updates = []
        if wp.articulation_goal is not None and n_new > 0:
            obj, joint_id, target_value = wp.articulation_goal
            start_value = state.articulation.get(obj, {}).get(joint_id, 0.0)
            arrival_updates = [
                (obj, joint_id, start_value + (target_value - start_value) * (k / n_new))
                for k in range(1, n_new + 1)
            ]
        for i in range(1, len(path)):
            seg.qs.append(path[i])
            seg.events.append(None)
            seg.articulation.append(arrival_updates[i - 1] if arrival_updates else None)
        if n_new == 0 and wp.articulation_goal is not None:
            obj, joint_id, target_value = wp.articulation_goal
            seg.qs.append(q_target)
            seg.events.append(None)
            seg.articulation.append((obj, joint_id, target_value))
        if not seg.qs:
            # Zero-length motion still needs a sample to carry the event.
            seg.qs.append(q_target)
            seg.events.append(wp)
            seg.articulation.append(None)
        else:
            seg.events[-1] = wp
        for _ in range(wp.dwell):
            seg.qs.append(q_target)
            seg.events.append(None)
            seg.articulation.append(None)
        q_prev = q_target
    return seg


def _fk(chain, q):
    from .kinematics import forward_kinematics

    return forward_kinematics(chain, q)


def _static_object_obstacles(state: SceneState):
    """AABB per scene object that is not attached to any arm."""
    obstacles = []
    for name in sorted(state.objects):
        if name in state.attachments:
            continue
        obj = state.objects[name]
        lo, hi = aabb_of_box(obj.bbox_min, obj.bbox_max, state.object_poses[name])
        obstacles.append((f"object:{name}", lo, hi))
    return obstacles


def _attached_proxies(state: SceneState, robot: str, arm: str):
    """World-posed proxy spheres for objects held by (robot, arm); named
    under the 'object:<name>' group so object exclusions apply to them."""
    out = []
    for obj_name, holder in state.attachments.items():
        if holder != (robot, arm):
            continue
        obj = state.objects[obj_name]
        spheres = sphere_decomposition(obj.bbox_min, obj.bbox_max)
        pose = state.object_poses[obj_name]
        out.extend(
            (f"object:{obj_name}#s{i}", pose.transform_point(center), radius)
            for i, (center, radius) in enumerate(spheres)
        )
    return out


def _near_objects(state: SceneState, ee_point: np.ndarray):
    """Objects within contact-exclusion range of an EE point."""
    near = set()
    for name in sorted(state.objects):
        obj = state.objects[name]
        local = state.object_poses[name].inverse().transform_point(ee_point)
        if point_box_distance(local, obj.bbox_min, obj.bbox_max) <= CONTACT_EXCLUSION_RADIUS:
            near.add(f"object:{name}")
    return near


def plan_episode(plan: SkillPlan, state: SceneState, world: CollisionWorld, params: PlanParams) -> PlanResult:
    """Plan a full episode; returns a status-encoded result, never raises
    for plan failures."""
    work = state.copy()
    robot_names = sorted(work.robots)
    arm_ids = {r: sorted(work.robots[r].arms) for r in robot_names}

    # Timeline accumulators, one entry per global sample.
    qs: dict = {(r, a): [np.asarray(work.arm(r, a).q, dtype=float)] for r in robot_names for a in arm_ids[r]}
    grip_track: dict = {k: [GRIPPER_VALUE[work.arm(*k).gripper]] for k in qs}
    attach_track: dict = {k: [work.held_by(*k)] for k in qs}
    ee_track: dict = {k: [work.arm(*k).ee_pose] for k in qs}
    obj_track: dict = {name: [work.object_poses[name]] for name in sorted(work.objects)}
    art_track: dict = {}
    for obj, joints in work.articulation.items():
        for joint_id, value in joints.items():
            art_track[(obj, joint_id)] = [value]
    residuals: list[WaypointResidual] = []
    waypoint_log = []

    def fail(status, step_index, arm, detail):
        return PlanResult(
            status=status,
            residuals=residuals,
            failed_step=(step_index, arm),
            failure_detail=detail,
            placements=plan.placements,
            waypoint_log=tuple(waypoint_log),
        )

    for step_index, step in enumerate(plan.steps):
        robot = step.robot
        for arm in sorted(step.arms):
            for wp in step.arms[arm]:
                waypoint_log.append((step_index, arm, wp.phase))

        # Phase 1: IK + layout, arm by arm.
        segments: dict[str, _ArmSegment] = {}
        try:
            for arm in sorted(step.arms):
                segments[arm] = _build_arm_segment(
                    work, robot, arm, step.arms[arm], params, residuals, step_index
                )
        except (IkNotConverged, Unreachable, DimensionMismatch) as exc:
            return fail("ik_failure", step_index, arm, str(exc))

        length = max(len(seg.qs) for seg in segments.values()) if segments else 0
        obstacles_static = _static_object_obstacles(work)
        step_world = CollisionWorld(
            aabbs=list(world.aabbs) + obstacles_static, spheres=list(world.spheres)
        )
        # Arms not moving this step are static obstacles (including their
        # attached objects' proxies).
        for other_robot in robot_names:
            for other_arm in arm_ids[other_robot]:
                if other_robot == robot and other_arm in segments:
                    continue
                chain = work.arm(other_robot, other_arm).chain
                base = work.robots[other_robot].base_pose
                for name, center, radius in link_spheres(chain, work.arm(other_robot, other_arm).q):
                    step_world.add_sphere(f"{other_robot}/{name}", base.transform_point(center), radius)
                for name, center, radius in _attached_proxies(work, other_robot, other_arm):
                    step_world.add_sphere(name, center, radius)

        # Phase 2: execute the step sample by sample (sorted arm order), all
        # arms not in the step hold their configuration.
        step_spheres: dict[str, list] = {arm: [] for arm in segments}
        for k in range(length):
            for arm in sorted(segments):
                seg = segments[arm]
                idx = min(k, len(seg.qs) - 1)
                q = seg.qs[idx]
                pose = work.world_fk(robot, arm, q)
                work.move_ee(robot, arm, pose, q=q)
                if idx == k:
                    if seg.articulation[k] is not None:
                        obj, joint_id, value = seg.articulation[k]
                        work.articulation.setdefault(obj, {})[joint_id] = value
                        art_track.setdefault((obj, joint_id), [work.articulation[obj][joint_id]])
                    if seg.events[k] is not None:
                        _gripper_event(work, robot, seg.events[k])

            # Collision pass for this sample.
            arm_sphere_sets = {}
            for arm in sorted(segments):
                chain = work.arm(robot, arm).chain
                base = work.robots[robot].base_pose
                local = link_spheres(chain, work.arm(robot, arm).q)
                world_spheres = [
                    (f"{robot}/{name}", base.transform_point(center), radius)
                    for name, center, radius in local
                ]
                arm_sphere_sets[arm] = world_spheres
                step_spheres[arm].append(world_spheres)

            for arm in sorted(segments):
                ee_point = work.arm(robot, arm).ee_pose.translation
                exclude = _near_objects(work, ee_point)
                held = work.held_by(robot, arm)
                if held is not None:
                    exclude.add(f"object:{held}")
                report = check_collision(step_world, arm_sphere_sets[arm], exclude)
                if report.collided:
                    pair = report.pairs[0]
                    return fail(
                        "collision", step_index, arm,
                        f"{pair.link} vs {pair.obstacle} (sd {pair.signed_distance:.4f})",
                    )
                # Other arms already planned this step are moving obstacles.
                for other in sorted(segments):
                    if other >= arm:
                        continue
                    other_spheres = arm_sphere_sets[other]
                    other_world = CollisionWorld(spheres=[(n, c, r) for n, c, r in other_spheres])
                    report = check_collision(other_world, arm_sphere_sets[arm], set())
                    if report.collided:
                        pair = report.pairs[0]
                        return fail(
                            "collision", step_index, arm,
                            f"arm-arm: {pair.link} vs {pair.obstacle}",
                        )
                # Attached objects vs everything except their own gripper arm.
                proxies = _attached_proxies(work, robot, arm)
                if proxies:
                    exclude_p = set()
                    ee_point = work.arm(robot, arm).ee_pose.translation
                    exclude_p |= _near_objects(work, ee_point)
                    report = check_collision(step_world, proxies, exclude_p)
                    if report.collided:
                        pair = report.pairs[0]
                        return fail(
                            "collision", step_index, arm,
                            f"attached: {pair.link} vs {pair.obstacle} (sd {pair.signed_distance:.4f})",
                        )

            # Record the global sample.
            for r in robot_names:
                for a in arm_ids[r]:
                    key = (r, a)
                    if r == robot and a in segments:
                        qs[key].append(np.asarray(work.arm(r, a).q, dtype=float))
                    else:
                        qs[key].append(qs[key][-1])
                    grip_track[key].append(GRIPPER_VALUE[work.arm(r, a).gripper])
                    attach_track[key].append(work.held_by(r, a))
                    ee_track[key].append(work.arm(r, a).ee_pose)
            for name in obj_track:
                obj_track[name].append(work.object_poses[name])
            for (obj, joint_id), values in art_track.items():
                values.append(work.articulation.get(obj, {}).get(joint_id, values[-1]))

    frame_count = len(next(iter(qs.values()))) if qs else 0
    if frame_count > params.max_episode_length:
        return PlanResult(
            status="limit_violation",
            residuals=residuals,
            failed_step=None,
            failure_detail=f"{frame_count} frames exceeds max_episode_length {params.max_episode_length}",
            placements=plan.placements,
            waypoint_log=tuple(waypoint_log),
        )

    trajectories = {}
    ee_out = {}
    for (r, a), samples in qs.items():
        arm_key = a if len(robot_names) == 1 else f"{r}/{a}"
        trajectories[arm_key] = JointTrajectory(
            arm_id=arm_key,
            dt=params.dt,
            samples=np.array(samples),
            gripper=np.array(grip_track[(r, a)]),
            attachment=tuple(attach_track[(r, a)]),
        )
        ee_out[arm_key] = ee_track[(r, a)]
    return PlanResult(
        status="success",
        trajectories=trajectories,
        ee_tracks=ee_out,
        object_tracks={k: v for k, v in obj_track.items()},
        articulation_tracks=art_track,
        residuals=residuals,
        placements=plan.placements,
        waypoint_log=tuple(waypoint_log),
        frame_count=frame_count,
    )


def simulate_validation(
    result: PlanResult,
    world: CollisionWorld,
    state: SceneState,
    predicate=None,
) -> ValidationOutcome:
    """Kinematic replay checks: constant grasp transform while attached,
    final placement support, and collision-free samples."""
    if not result.success:
        return ValidationOutcome(False, "predicate", "plan was not successful")

    # (a) Grip: the EE->object transform must stay constant over each
    # contiguous holding interval.
    for arm_key, traj in result.trajectories.items():
        ee = result.ee_tracks[arm_key]
        held_since = None
        reference = None
        for t, obj in enumerate(traj.attachment):
            if obj is None:
                held_since, reference = None, None
                continue
            rel = ee[t].inverse().compose(result.object_tracks[obj][t])
            if held_since != obj:
                held_since, reference = obj, rel
                continue
            dp, dth = pose_error(rel, reference)
            if dp > 1e-6 or dth > 1e-6:
                return ValidationOutcome(
                    False, "grip",
                    f"object '{obj}' slipped at frame {t} (dp {dp:.2e}, dth {dth:.2e})",
                )

    # (b) Final placement support.
    for check in result.placements:
        track = result.object_tracks.get(check.object)
        if track is None:
            return ValidationOutcome(False, "support", f"no pose track for '{check.object}'")
        final = track[-1]
        obj = state.objects[check.object]
        lo, hi = aabb_of_box(obj.bbox_min, obj.bbox_max, final)
        center = 0.5 * (lo[:2] + hi[:2])
        if not np.all((center >= check.footprint_min - 1e-9) & (center <= check.footprint_max + 1e-9)):
            return ValidationOutcome(
                False, "support",
                f"'{check.object}' footprint center {np.round(center, 3)} outside support",
            )
        gap = float(lo[2]) - check.support_z
        if gap < -1e-6 or gap > check.place_z_offset + 0.005:
            return ValidationOutcome(
                False, "support", f"'{check.object}' bottom gap {gap:.4f} m out of range"
            )

    # (c) No recorded object may intersect the static world while free.
    for name, track in result.object_tracks.items():
        obj = state.objects[name]
        for t, pose in enumerate(track):
            attached = any(
                traj.attachment[t] == name for traj in result.trajectories.values()
            )
            if attached:
                continue
            # Free objects should not move between samples.
            if t > 0:
                prev_attached = any(
                    traj.attachment[t - 1] == name for traj in result.trajectories.values()
                )
                if not prev_attached:
                    dp, dth = pose_error(track[t - 1], pose)
                    if dp > 1e-9 or dth > 1e-9:
                        return ValidationOutcome(
                            False, "grip", f"free object '{name}' moved at frame {t}"
                        )

    if predicate is not None and not predicate(result):
        return ValidationOutcome(False, "predicate", "task predicate rejected the episode")
    return ValidationOutcome(True)
