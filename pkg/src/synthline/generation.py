"""Per-episode generation: scene sampling, planning, rendering, assembly.

This is the work the pipeline stages execute. Everything an episode
contains is a pure function of (config, registry, root seed, episode
index): randomization draws come from per-purpose substreams, so worker
interleaving, retries, and batching cannot change any output byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assets import AssetRegistry, sample_category_replacement
from .config_dsl import CameraSpec, TaskConfig
from .errors import ConfigInvalid, SkillError, UnknownAsset
from .geometry import Pose, box_corners, quat_from_euler_xyz_deg
from .kinematics import CollisionWorld, link_spheres
from .planner import PlanParams, PlanResult, ValidationOutcome, plan_episode, simulate_validation
from .randomizer import Lighting, perturb_camera, sample_env_map, sample_home_config, sample_region_pose
from .render import Image, render_frame
from .rng import SeededRng
from .skills import ArmState, RobotState, SceneObject, SceneState, compile_skills
from .store import ArmTrackData, CameraTrack, EpisodeRecord, actions_from_states


@dataclass(frozen=True)
class CameraBinding:
    spec: CameraSpec
    offset: Pose  # perturbed mount offset
    mount: str  # "world" | "base" | "arm"
    robot: str | None = None
    arm: str | None = None


@dataclass
class PlannedEpisode:
    """Planner-stage output; the planner -> renderer hand-off payload."""

    episode_index: int
    status: str  # planned | plan_failed | validation_failed
    task: str
    embodiment: str
    language_instruction: str = ""
    detailed_language_instruction: str = ""
    fps: float = 30.0
    plan: PlanResult | None = None
    validation: ValidationOutcome | None = None
    scene: SceneState | None = None
    cameras: list = field(default_factory=list)
    lighting: Lighting | None = None
    draws: dict = field(default_factory=dict)
    failure_detail: str = ""

    @property
    def success(self) -> bool:
        return self.status == "planned"


def _resolve_object_record(registry: AssetRegistry, spec, rng_streams):
    record = None
    if spec.asset_path:
        record = registry.find(spec.asset_path)
    if record is None and spec.category:
        members = registry.category_members(spec.category)
        record = members[0] if members else None
    if record is None:
        raise UnknownAsset(spec.asset_path or spec.category or spec.name)
    if spec.apply_randomization and spec.category:
        record = sample_category_replacement(
            registry, spec.category, record.name, rng_streams(f"replace:{spec.name}")
        )
    return record


def _camera_binding(spec: CameraSpec, cfg: TaskConfig, offset: Pose) -> CameraBinding:
    tokens = spec.parent.split("/")
    head = tokens[0]
    robot_names = {r.name for r in cfg.robots}
    if head not in robot_names:
        return CameraBinding(spec=spec, offset=offset, mount="world")
    arm = None
    for token in tokens[1:]:
        low = token.lower()
        if low in ("fl", "left") or low.startswith("left"):
            arm = "left"
            break
        if low in ("fr", "right") or low.startswith("right"):
            arm = "right"
            break
    if arm is None:
        return CameraBinding(spec=spec, offset=offset, mount="base", robot=head)
    return CameraBinding(spec=spec, offset=offset, mount="arm", robot=head, arm=arm)


def build_scene(
    cfg: TaskConfig, registry: AssetRegistry, rng: SeededRng, episode_index: int
) -> tuple[SceneState, CollisionWorld, list, Lighting, dict]:
    """Sample one episode's scene: poses, homes, cameras, lighting."""
    ep = rng.episode(episode_index)
    draws: dict = {"episode_index": episode_index}

    state = SceneState()
    region_by_object = {r.object: (i, r) for i, r in enumerate(cfg.regions)}

    # Objects: registry resolution (with optional category replacement).
    for spec in cfg.objects:
        record = _resolve_object_record(registry, spec, ep.stream)
        scale = np.array(spec.scale)
        state.objects[spec.name] = SceneObject(
            name=spec.name,
            record=record,
            bbox_min=record.bounding_box[0] * scale,
            bbox_max=record.bounding_box[1] * scale,
        )
        draws.setdefault("assets", {})[spec.name] = record.name
        if record.kind == "articulated":
            state.articulation[spec.name] = {j.joint_id: 0.0 for j in record.joints}

    # Poses: region sample (relative to target frame) composed with the
    # spec's own euler orientation; objects without a region spawn at their
    # configured pose.
    def target_frame(target: str) -> Pose:
        if target == "table":
            return Pose.identity()
        if target in state.object_poses:
            return state.object_poses[target]
        return Pose.identity()

    for spec in cfg.objects:
        spawn = Pose(np.array(spec.translation), quat_from_euler_xyz_deg(spec.euler_deg))
        if spec.name in region_by_object:
            i, region = region_by_object[spec.name]
            rel = sample_region_pose(region, ep.stream(f"region:{i}"))
            pose = target_frame(region.target).compose(rel).compose(Pose(np.zeros(3), spawn.rotation))
            draws.setdefault("regions", {})[spec.name] = {
                "translation": [float(v) for v in rel.translation],
                "quaternion": [float(v) for v in rel.rotation],
            }
        else:
            pose = spawn
        state.object_poses[spec.name] = pose

    # Robots: base pose, chains, sampled home configurations.
    embodiment_name = ""
    for spec in cfg.robots:
        record = registry.find(spec.embodiment_id)
        if record is None or record.kind != "embodiment":
            raise ConfigInvalid(f"embodiment '{spec.embodiment_id}' not in registry")
        embodiment_name = record.name
        base_rot = quat_from_euler_xyz_deg(spec.base_euler_deg)
        if spec.name in region_by_object:
            i, region = region_by_object[spec.name]
            rel = sample_region_pose(region, ep.stream(f"region:{i}"))
            base = target_frame(region.target).compose(rel).compose(Pose(np.zeros(3), base_rot))
            draws.setdefault("regions", {})[spec.name] = {
                "translation": [float(v) for v in rel.translation],
                "quaternion": [float(v) for v in rel.rotation],
            }
        else:
            base = Pose(np.zeros(3), base_rot)
        arms = {}
        for chain in record.chains:
            mean = np.array(spec.joint_home.get(chain.arm_id, np.zeros(chain.joint_count)))
            std = np.array(spec.joint_home_std.get(chain.arm_id, np.zeros(chain.joint_count)))
            if len(mean) != chain.joint_count:
                raise ConfigInvalid(
                    f"{spec.name}.{chain.arm_id}: home vector has {len(mean)} joints, chain has {chain.joint_count}"
                )
            home = sample_home_config(mean, std, chain.limits(), ep.stream(f"home:{spec.name}.{chain.arm_id}"))
            ee = base.compose(_fk(chain, home))
            arms[chain.arm_id] = ArmState(chain=chain, q=home, ee_pose=ee, gripper="open", home_q=home)
            draws.setdefault("homes", {})[f"{spec.name}.{chain.arm_id}"] = [float(v) for v in home]
        state.robots[spec.name] = RobotState(
            name=spec.name, embodiment=record.name, base_pose=base, arms=arms
        )

    # Static collision world from the arena mount.
    world = CollisionWorld()
    arena = cfg.mounts.get("arena") or {}
    table = arena.get("table") if isinstance(arena, dict) else None
    if isinstance(table, dict) and "aabb" in table:
        lo, hi = table["aabb"]
        world.add_aabb("table", lo, hi)

    lighting = sample_env_map(cfg.env_map, ep.stream("env_map"))
    draws["lighting"] = {
        "env_map_id": lighting.env_map_id,
        "intensity": lighting.intensity,
        "rotation_deg": lighting.rotation_deg,
    }
    draws["embodiment"] = embodiment_name

    cameras = []
    for spec in cfg.cameras:
        nominal = Pose(np.array(spec.translation), np.array(spec.orientation))
        offset = perturb_camera(spec, nominal, ep.stream(f"camera:{spec.name}"))
        cameras.append(_camera_binding(spec, cfg, offset))
        draws.setdefault("cameras", {})[spec.name] = {
            "offset_translation": [float(v) for v in offset.translation],
            "offset_quaternion": [float(v) for v in offset.rotation],
        }
    return state, world, cameras, lighting, draws


def _fk(chain, q):
    from .kinematics import forward_kinematics

    return forward_kinematics(chain, q)


def plan_episode_job(
    cfg: TaskConfig,
    registry: AssetRegistry,
    rng: SeededRng,
    episode_index: int,
    params: PlanParams | None = None,
) -> PlannedEpisode:
    """Planner-stage work: build scene, compile skills, plan, validate."""
    params = params or PlanParams()
    params.max_episode_length = cfg.data.max_episode_length
    state, world, cameras, lighting, draws = build_scene(cfg, registry, rng, episode_index)
    base = PlannedEpisode(
        episode_index=episode_index,
        status="plan_failed",
        task=cfg.data.task_dir or cfg.name,
        embodiment=draws.get("embodiment", ""),
        language_instruction=cfg.data.language_instruction,
        detailed_language_instruction=cfg.data.detailed_language_instruction,
        fps=1.0 / params.dt,
        scene=state,
        cameras=cameras,
        lighting=lighting,
        draws=draws,
    )
    try:
        plan = compile_skills(cfg, state, registry, rng.episode(episode_index))
    except SkillError as exc:
        base.failure_detail = f"compile: {exc}"
        return base
    result = plan_episode(plan, state, world, params)
    base.plan = result
    if not result.success:
        base.failure_detail = f"{result.status}: {result.failure_detail}"
        return base
    outcome = simulate_validation(result, world, state)
    base.validation = outcome
    if not outcome.valid:
        base.status = "validation_failed"
        base.failure_detail = f"{outcome.failure}: {outcome.detail}"
        return base
    base.status = "planned"
    return base


def _camera_pose_at(binding: CameraBinding, ep: PlannedEpisode, t: int) -> Pose:
    if binding.mount == "world":
        return binding.offset
    robot = ep.scene.robots[binding.robot]
    if binding.mount == "base":
        return robot.base_pose.compose(binding.offset)
    ee = ep.plan.ee_tracks[binding.arm][t]
    flange = ee.compose(robot.arms[binding.arm].chain.ee_offset.inverse())
    return flange.compose(binding.offset)


def render_episode_job(ep: PlannedEpisode) -> EpisodeRecord:
    """Renderer-stage work: rasterize every camera frame, assemble the record."""
    if not ep.success or ep.plan is None:
        raise ValueError("cannot render an unplanned episode")
    plan = ep.plan
    frame_count = plan.frame_count
    robot = next(iter(ep.scene.robots.values()))

    arm_names = sorted(plan.trajectories)
    sphere_sets: list[list] = []
    box_sets: list[list] = []
    for t in range(frame_count):
        spheres = []
        for arm in arm_names:
            chain = robot.arms[arm].chain
            q = plan.trajectories[arm].samples[t]
            for name, center, radius in link_spheres(chain, q):
                spheres.append((f"{robot.name}/{name}", robot.base_pose.transform_point(center), radius))
        boxes = []
        for obj_name in sorted(ep.scene.objects):
            obj = ep.scene.objects[obj_name]
            pose = plan.object_tracks[obj_name][t]
            boxes.append((ep.draws.get("assets", {}).get(obj_name, obj_name),
                          box_corners(obj.bbox_min, obj.bbox_max, pose)))
        sphere_sets.append(spheres)
        box_sets.append(boxes)

    cameras = []
    for binding in sorted(ep.cameras, key=lambda b: b.spec.name):
        intr = binding.spec.intrinsics
        poses = [_camera_pose_at(binding, ep, t) for t in range(frame_count)]
        frames: list[Image] = [
            render_frame(box_sets[t], sphere_sets[t], poses[t],
                         intr.width, intr.height, intr.focal, ep.lighting)
            for t in range(frame_count)
        ]
        cameras.append(
            CameraTrack(
                name=binding.spec.name,
                width=intr.width,
                height=intr.height,
                focal=intr.focal,
                parent=binding.spec.parent,
                offset=binding.offset,
                poses=poses,
                frames=frames,
            )
        )

    arms = {}
    for arm in arm_names:
        traj = plan.trajectories[arm]
        arms[arm] = ArmTrackData(
            joints=traj.samples,
            actions=actions_from_states(traj.samples),
            gripper=traj.gripper,
            ee_poses=plan.ee_tracks[arm],
        )

    metadata = {
        "embodiment": ep.embodiment,
        "randomization": ep.draws,
        "assets_t0": {
            name: {
                "translation": [float(v) for v in plan.object_tracks[name][0].translation],
                "quaternion": [float(v) for v in plan.object_tracks[name][0].rotation],
            }
            for name in sorted(ep.scene.objects)
        },
        "lighting": {
            "env_map_id": ep.lighting.env_map_id,
            "intensity": ep.lighting.intensity,
            "rotation_deg": ep.lighting.rotation_deg,
        },
        "waypoint_log": [
            {"step": s, "arm": a, "phase": p} for s, a, p in plan.waypoint_log
        ],
    }
    return EpisodeRecord(
        episode_index=ep.episode_index,
        task=ep.task,
        language_instruction=ep.language_instruction,
        detailed_language_instruction=ep.detailed_language_instruction,
        fps=ep.fps,
        arms=arms,
        cameras=cameras,
        metadata=metadata,
        valid=True,
    )
