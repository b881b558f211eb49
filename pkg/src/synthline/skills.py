"""Skill-to-waypoint compilation.

Each atomic skill maps the predicted scene/robot state to a short sequence
of end-effector waypoints. Attachment is kinematic: a closed gripper pins
the object to the arm with the grasp transform captured at close time. A
second arm closing on an already-held object registers a co-grasp; when
the holder opens, the object transfers to the co-grasping arm, so exactly
one arm holds an object at every step boundary during handovers.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace

import numpy as np

from .assets import AssetRecord, AssetRegistry, KinematicChain, grasp_candidates, select_grasp
from .config_dsl import TaskConfig
from .errors import (
    JointLimitExceeded,
    NoContactRegion,
    NoFeasibleGrasp,
    NotHeld,
    RatioOutOfRange,
    SkillError,
    UnknownFrame,
)
from .geometry import (
    Pose,
    aabb_of_box,
    matrix_to_quat,
    normalize,
    point_box_distance,
    quat_from_axis_angle,
    quat_mul,
    quat_rotate,
    rotation_between,
)
from .kinematics import forward_kinematics
from .rng import EpisodeRng
from .skill_specs import (
    GotoPoseSpec,
    GripperSpec,
    HomeSpec,
    PickSpec,
    PlaceSpec,
    PushSpec,
    SkillSpec,
)
from .assets import WORLD_DIRECTIONS

PRE_GRASP_STANDOFF = 0.10  # m along the grasp approach axis
ATTACH_RADIUS = 0.02  # m, proximity attach for bare gripper closes

PHASES = (
    "pre_grasp", "grasp", "post_grasp",
    "pre_contact", "contact", "post_contact",
    "pre_place", "place", "free",
)


@dataclass(frozen=True)
class PlacementCheck:
    """Recorded at compile time; verified by trajectory validation."""

    object: str
    container: str
    support_z: float
    place_z_offset: float
    footprint_min: np.ndarray
    footprint_max: np.ndarray


@dataclass(frozen=True)
class Waypoint:
    arm_id: str
    pose: Pose
    gripper: str = "hold"  # open | close | hold
    dwell: int = 0
    attach: str | None = None
    proximity_attach: bool = False
    phase: str = "free"
    joint_target: np.ndarray | None = None
    pos_tol: float = 0.01
    ori_tol_deg: float = 1.0
    articulation_goal: tuple[str, str, float] | None = None
    placement: PlacementCheck | None = None

    def __post_init__(self):
        if self.gripper not in ("open", "close", "hold"):
            raise ValueError(f"bad gripper command: {self.gripper}")
        if self.dwell < 0:
            raise ValueError("dwell must be >= 0")
        if self.phase not in PHASES:
            raise ValueError(f"bad phase tag: {self.phase}")


@dataclass(frozen=True)
class PlanStep:
    robot: str
    arms: dict  # arm id -> tuple[Waypoint, ...]; >1 key means parallel

    @property
    def parallel(self) -> bool:
        return len(self.arms) > 1


@dataclass(frozen=True)
class SkillPlan:
    steps: tuple[PlanStep, ...]
    placements: tuple[PlacementCheck, ...] = ()

    def waypoint_count(self) -> int:
        return sum(len(wps) for step in self.steps for wps in step.arms.values())


# ---------------------------------------------------------------------------
# Scene state
# ---------------------------------------------------------------------------


@dataclass
class SceneObject:
    name: str
    record: AssetRecord
    bbox_min: np.ndarray
    bbox_max: np.ndarray


@dataclass
class ArmState:
    chain: KinematicChain
    q: np.ndarray
    ee_pose: Pose  # world
    gripper: str = "open"
    home_q: np.ndarray | None = None


@dataclass
class RobotState:
    name: str
    embodiment: str
    base_pose: Pose
    arms: dict  # arm id -> ArmState


@dataclass
class SceneState:
    objects: dict = field(default_factory=dict)  # name -> SceneObject
    object_poses: dict = field(default_factory=dict)  # name -> Pose
    articulation: dict = field(default_factory=dict)  # obj -> {joint_id: value}
    robots: dict = field(default_factory=dict)  # name -> RobotState
    attachments: dict = field(default_factory=dict)  # obj -> (robot, arm)
    grasp_transforms: dict = field(default_factory=dict)  # obj -> Pose (ee = obj ∘ G)
    co_grasps: dict = field(default_factory=dict)  # obj -> {(robot, arm): Pose}

    def copy(self) -> "SceneState":
        return copy.deepcopy(self)

    def arm(self, robot: str, arm: str) -> ArmState:
        return self.robots[robot].arms[arm]

    def held_by(self, robot: str, arm: str) -> str | None:
        for obj, holder in self.attachments.items():
            if holder == (robot, arm):
                return obj
        return None

    def world_fk(self, robot: str, arm: str, q: np.ndarray) -> Pose:
        state = self.robots[robot]
        return state.base_pose.compose(forward_kinematics(state.arms[arm].chain, q))

    # -- attachment machinery --

    def request_attach(self, obj: str, robot: str, arm: str):
        ee = self.arm(robot, arm).ee_pose
        grip = self.object_poses[obj].inverse().compose(ee)
        holder = self.attachments.get(obj)
        if holder is None:
            self.attachments[obj] = (robot, arm)
            self.grasp_transforms[obj] = grip
        elif holder != (robot, arm):
            self.co_grasps.setdefault(obj, {})[(robot, arm)] = grip

    def release(self, robot: str, arm: str):
        key = (robot, arm)
        for obj, holder in list(self.attachments.items()):
            if holder == key:
                co = self.co_grasps.get(obj, {})
                if co:
                    new_key = sorted(co)[0]
                    self.attachments[obj] = new_key
                    self.grasp_transforms[obj] = co.pop(new_key)
                else:
                    del self.attachments[obj]
                    del self.grasp_transforms[obj]
                return
        for obj, co in self.co_grasps.items():
            co.pop(key, None)

    def move_ee(self, robot: str, arm: str, pose: Pose, q: np.ndarray | None = None):
        state = self.arm(robot, arm)
        state.ee_pose = pose
        if q is not None:
            state.q = np.asarray(q, dtype=float)
        for obj, holder in self.attachments.items():
            if holder == (robot, arm):
                self.object_poses[obj] = pose.compose(self.grasp_transforms[obj].inverse())

    def nearest_object(self, robot: str, arm: str, radius: float = ATTACH_RADIUS) -> str | None:
        """Closest graspable rigid object whose box the EE point touches."""
        point = self.arm(robot, arm).ee_pose.translation
        best, best_d = None, radius
        for name, obj in sorted(self.objects.items()):
            if obj.record.kind != "rigid":
                continue
            local = self.object_poses[name].inverse().transform_point(point)
            d = point_box_distance(local, obj.bbox_min, obj.bbox_max)
            if d <= best_d:
                best, best_d = name, d
        return best


def apply_waypoint(state: SceneState, robot: str, wp: Waypoint):
    """Advance the predicted scene state through one waypoint."""
    state.move_ee(robot, wp.arm_id, wp.pose)
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
    if wp.articulation_goal is not None:
        obj, joint_id, value = wp.articulation_goal
        state.articulation.setdefault(obj, {})[joint_id] = value


# ---------------------------------------------------------------------------
# Skill expansions
# ---------------------------------------------------------------------------


def _side_biased(cands, obj_pose: Pose, keyword: str | None):
    """Stable-sort candidates so approaches travelling from the named side
    come first; score order is preserved within each group."""
    if keyword is None or keyword not in WORLD_DIRECTIONS:
        return cands
    side = WORLD_DIRECTIONS[keyword]
    return sorted(
        cands,
        key=lambda g: 0 if float(np.dot(obj_pose.transform_direction(g.approach_axis), side)) <= 0 else 1,
    )


def pick_waypoints(state: SceneState, robot: str, arm: str, spec: PickSpec, rng) -> list[Waypoint]:
    obj = state.objects.get(spec.target)
    if obj is None or obj.record.kind != "rigid":
        raise SkillError(f"pick target '{spec.target}' is not a rigid scene object")
    if state.attachments.get(spec.target) == (robot, arm):
        raise SkillError(f"'{spec.target}' is already held by this arm")
    obj_pose = state.object_poses[spec.target]
    cands = grasp_candidates(obj.record, spec.filters, obj_pose)
    if not cands:
        raise NoFeasibleGrasp(f"all grasp candidates for '{spec.target}' filtered out")
    cands = _side_biased(cands, obj_pose, spec.direction_to_obj)
    grasp = select_grasp(cands, rng)

    grasp_w = obj_pose.compose(grasp.pose)
    approach_w = obj_pose.transform_direction(grasp.approach_axis)
    pre = Pose(grasp_w.translation - PRE_GRASP_STANDOFF * approach_w, grasp_w.rotation)
    lift = spec.post_grasp_offset_min + float(rng.uniform(0.0, 1.0)) * (
        spec.post_grasp_offset_max - spec.post_grasp_offset_min
    )
    post = Pose(grasp_w.translation + np.array([0.0, 0.0, lift]), grasp_w.rotation)
    tol = dict(pos_tol=spec.t_eps, ori_tol_deg=spec.o_eps_deg)
    return [
        Waypoint(arm, pre, gripper="open", phase="pre_grasp", **tol),
        Waypoint(arm, grasp_w, gripper="close", dwell=spec.close_wait_steps,
                 attach=spec.target, phase="grasp", **tol),
        Waypoint(arm, post, gripper="hold", phase="post_grasp", **tol),
    ]


def place_waypoints(state: SceneState, robot: str, arm: str, spec: PlaceSpec, rng) -> list[Waypoint]:
    if state.attachments.get(spec.target) != (robot, arm):
        raise NotHeld(f"'{spec.target}' is not held by this arm")
    container = state.objects.get(spec.container)
    if container is None:
        raise SkillError(f"place container '{spec.container}' is not in the scene")
    for lo, hi in (spec.x_ratio_range, spec.y_ratio_range):
        if not (0.0 <= lo <= hi <= 1.0):
            raise RatioOutOfRange(f"ratio range [{lo}, {hi}] outside [0, 1]")

    cont_pose = state.object_poses[spec.container]
    cmin, cmax = aabb_of_box(container.bbox_min, container.bbox_max, cont_pose)
    ux = spec.x_ratio_range[0] + float(rng.uniform(0.0, 1.0)) * (spec.x_ratio_range[1] - spec.x_ratio_range[0])
    uy = spec.y_ratio_range[0] + float(rng.uniform(0.0, 1.0)) * (spec.y_ratio_range[1] - spec.y_ratio_range[0])
    fx = cmin[0] + ux * (cmax[0] - cmin[0])
    fy = cmin[1] + uy * (cmax[1] - cmin[1])
    support_z = float(cmax[2])

    obj_pose = state.object_poses[spec.target]
    a_world = obj_pose.transform_direction(normalize(np.array(spec.align_pick_obj_axis)))
    b_world = cont_pose.transform_direction(normalize(np.array(spec.align_place_obj_axis)))
    rot = quat_mul(rotation_between(a_world, b_world), obj_pose.rotation)
    if spec.align_obj_tol_deg > 0:
        v = rng.normal(size=3)
        while np.linalg.norm(v) < 1e-12:
            v = rng.normal(size=3)
        angle = np.deg2rad(spec.align_obj_tol_deg) * float(rng.uniform(0.0, 1.0))
        rot = quat_mul(quat_from_axis_angle(v, angle), rot)

    obj = state.objects[spec.target]
    omin, omax = aabb_of_box(obj.bbox_min, obj.bbox_max, Pose(np.zeros(3), rot))
    center0 = 0.5 * (omin + omax)
    translation = np.array([
        fx - center0[0],
        fy - center0[1],
        support_z + spec.place_z_offset - omin[2],
    ])
    target_pose = Pose(translation, rot)

    grip = state.grasp_transforms[spec.target]
    ee_place = target_pose.compose(grip)
    ee_pre = Pose(target_pose.translation + np.array([0.0, 0.0, spec.pre_place_z_offset]), rot).compose(grip)
    check = PlacementCheck(
        object=spec.target,
        container=spec.container,
        support_z=support_z,
        place_z_offset=spec.place_z_offset,
        footprint_min=cmin[:2].copy(),
        footprint_max=cmax[:2].copy(),
    )
    tol = dict(pos_tol=spec.t_eps, ori_tol_deg=spec.o_eps_deg)
    return [
        Waypoint(arm, ee_pre, gripper="hold", phase="pre_place", **tol),
        Waypoint(arm, ee_place, gripper="open", phase="place", placement=check, **tol),
    ]


def _contact_frame(motion_dir: np.ndarray) -> np.ndarray:
    z = normalize(motion_dir)
    up = np.array([0.0, 0.0, 1.0])
    if abs(float(np.dot(z, up))) > 0.99:
        up = np.array([1.0, 0.0, 0.0])
    x = normalize(np.cross(up, z))
    y = np.cross(z, x)
    return matrix_to_quat(np.column_stack([x, y, z]))


def _part_transform(joint, value: float) -> Pose:
    if joint.type == "prismatic":
        return Pose(joint.axis * value, np.array([1.0, 0, 0, 0]))
    rot = quat_from_axis_angle(joint.axis, value)
    # Rotation about an axis through joint.origin.
    return Pose(joint.origin - quat_rotate(rot, joint.origin), rot)


def push_waypoints(state: SceneState, robot: str, arm: str, spec: PushSpec, rng) -> list[Waypoint]:
    obj = state.objects.get(spec.target)
    if obj is None or obj.record.kind != "articulated":
        raise SkillError(f"push target '{spec.target}' is not an articulated scene object")
    try:
        joint = obj.record.joint(spec.joint_id)
    except KeyError:
        raise SkillError(f"'{spec.target}' has no joint '{spec.joint_id}'") from None
    regions = [r for r in obj.record.contact_regions if r.attached_joint == spec.joint_id]
    if not regions:
        raise NoContactRegion(f"joint '{spec.joint_id}' has no contact region")

    current = state.articulation.get(spec.target, {}).get(spec.joint_id, 0.0)
    target_value = current + spec.joint_delta
    if not (joint.limits[0] - 1e-9 <= target_value <= joint.limits[1] + 1e-9):
        raise JointLimitExceeded(
            f"joint '{spec.joint_id}' target {target_value:.3f} outside {joint.limits}"
        )

    region = regions[int(rng.integers(0, len(regions)))]
    direction = rng.normal(size=3)
    while np.linalg.norm(direction) < 1e-12:
        direction = rng.normal(size=3)
    radius = region.radius * spec.contact_expansion * float(rng.uniform(0.0, 1.0)) ** (1.0 / 3.0)
    p_part = region.center + normalize(direction) * radius

    obj_pose = state.object_poses[spec.target]
    p_now = _part_transform(joint, current).transform_point(p_part)
    p_world = obj_pose.transform_point(p_now)
    if joint.type == "prismatic":
        motion_local = joint.axis.copy()
    else:
        motion_local = np.cross(joint.axis, p_now - joint.origin)
        if np.linalg.norm(motion_local) < 1e-9:
            raise NoContactRegion("contact point lies on the joint axis")
    motion_world = normalize(obj_pose.transform_direction(motion_local)) * np.sign(spec.joint_delta)

    contact_rot = _contact_frame(motion_world)
    pre = Pose(p_world - spec.standoff * motion_world, contact_rot)
    p_post_part = _part_transform(joint, target_value).transform_point(p_part)
    p_post = obj_pose.transform_point(p_post_part)
    if joint.type == "prismatic":
        post_rot = contact_rot
    else:
        axis_world = obj_pose.transform_direction(joint.axis)
        post_rot = quat_mul(quat_from_axis_angle(axis_world, spec.joint_delta), contact_rot)
    tol = dict(pos_tol=spec.t_eps, ori_tol_deg=spec.o_eps_deg)
    return [
        Waypoint(arm, pre, gripper="close", phase="pre_contact", **tol),
        Waypoint(arm, Pose(p_world, contact_rot), gripper="hold", phase="contact", **tol),
        Waypoint(arm, Pose(p_post, post_rot), gripper="hold", phase="post_contact",
                 articulation_goal=(spec.target, spec.joint_id, target_value), **tol),
    ]


def goto_pose_waypoint(state: SceneState, robot: str, arm: str, spec: GotoPoseSpec) -> Waypoint:
    if spec.frame not in ("world", "robot"):
        raise UnknownFrame(f"unknown frame '{spec.frame}'")
    local = Pose(np.array(spec.translation), np.array(spec.quaternion))
    pose = state.robots[robot].base_pose.compose(local) if spec.frame == "robot" else local
    gripper = {"open_gripper": "open", "close_gripper": "close", None: "hold"}[spec.gripper_action]
    return Waypoint(arm, pose, gripper=gripper, proximity_attach=(gripper == "close"), phase="free")


def gripper_action_waypoint(state: SceneState, robot: str, arm: str, spec: GripperSpec) -> Waypoint:
    pose = state.arm(robot, arm).ee_pose
    gripper = "open" if spec.action_type == "open" else "close"
    return Waypoint(arm, pose, gripper=gripper, proximity_attach=(gripper == "close"), phase="free")


def home_waypoint(state: SceneState, robot: str, arm: str, _spec: HomeSpec | None = None) -> Waypoint:
    arm_state = state.arm(robot, arm)
    home_q = arm_state.home_q if arm_state.home_q is not None else np.zeros(arm_state.chain.joint_count)
    pose = state.world_fk(robot, arm, home_q)
    return Waypoint(arm, pose, gripper="hold", phase="free", joint_target=np.asarray(home_q, dtype=float))


def expand_skill(state: SceneState, robot: str, arm: str, spec: SkillSpec, rng) -> list[Waypoint]:
    if isinstance(spec, PickSpec):
        return pick_waypoints(state, robot, arm, spec, rng)
    if isinstance(spec, PlaceSpec):
        return place_waypoints(state, robot, arm, spec, rng)
    if isinstance(spec, PushSpec):
        return push_waypoints(state, robot, arm, spec, rng)
    if isinstance(spec, GotoPoseSpec):
        return [goto_pose_waypoint(state, robot, arm, spec)]
    if isinstance(spec, GripperSpec):
        return [gripper_action_waypoint(state, robot, arm, spec)]
    if isinstance(spec, HomeSpec):
        return [home_waypoint(state, robot, arm, spec)]
    raise SkillError(f"cannot expand skill spec {type(spec).__name__}")


def compile_skills(
    cfg: TaskConfig, state: SceneState, registry: AssetRegistry, rng: EpisodeRng
) -> SkillPlan:
    """Expand a config's skill blocks into a barrier-synchronized plan.

    Steps run in document order; within a parallel step arms are expanded
    in sorted arm order against the evolving predicted state. Skill errors
    are re-raised annotated with (step index, arm).
    """
    predicted = state.copy()
    steps: list[PlanStep] = []
    placements: list[PlacementCheck] = []
    step_index = 0
    for block in cfg.skills:
        if block.robot not in predicted.robots:
            raise SkillError(f"robot '{block.robot}' is not in the scene")
        for step in block.steps:
            arms_out: dict[str, tuple[Waypoint, ...]] = {}
            for arm in sorted(step.arms):
                waypoints: list[Waypoint] = []
                for ki, spec in enumerate(step.arms[arm]):
                    stream = rng.stream(f"skill:{block.robot}.{step_index}.{arm}.{ki}")
                    try:
                        expanded = expand_skill(predicted, block.robot, arm, spec, stream)
                    except SkillError as exc:
                        raise exc.at(step_index, arm) from exc
                    for wp in expanded:
                        apply_waypoint(predicted, block.robot, wp)
                        waypoints.append(wp)
                        if wp.placement is not None:
                            placements.append(wp.placement)
                arms_out[arm] = tuple(waypoints)
            steps.append(PlanStep(robot=block.robot, arms=arms_out))
            step_index += 1
    return SkillPlan(steps=tuple(steps), placements=tuple(placements))
