"""Desk-scale fixture assets and task configs.

Everything here is generated from code so geometry, grasp annotations, and
config values stay mutually consistent: a dual-arm tabletop robot, a
single-arm counterpart, a plate with an analytically authored grasp set
(antipodal rim pinches plus edge-on grasps at several rolls), a rack, and
a microwave with an annotated door joint. ``python -m synthline.fixtures
DIR`` materializes the tree used by the CLI and the test suite.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

from .assets import (
    AssetRecord,
    ChainJoint,
    ContactRegion,
    GraspPose,
    JointAnnotation,
    KinematicChain,
    manifest_from_record,
)
from .geometry import (
    Pose,
    matrix_to_quat,
    normalize,
    quat_from_axis_angle,
    quat_from_euler_xyz_deg,
    quat_mul,
    quat_to_matrix,
)

PLATE_RADIUS = 0.11
PLATE_THICKNESS = 0.03
TABLE_AABB = [[-0.45, -0.40, -0.04], [0.45, 0.40, 0.0]]


def _quat_cols(x, y, z) -> np.ndarray:
    return matrix_to_quat(np.column_stack([x, y, z]))


def look_at_quat(eye, target, up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Camera rotation: +Z toward target, +X right, +Y down."""
    forward = normalize(np.asarray(target, dtype=float) - np.asarray(eye, dtype=float))
    up = np.asarray(up, dtype=float)
    if abs(float(np.dot(forward, normalize(up)))) > 0.999:
        up = np.array([1.0, 0.0, 0.0])
    right = normalize(np.cross(forward, up))
    down = np.cross(forward, right)
    return _quat_cols(right, down, forward)


# ---------------------------------------------------------------------------
# Rigid assets
# ---------------------------------------------------------------------------


def _plate_grasps() -> tuple[GraspPose, ...]:
    grasps = []
    r = PLATE_RADIUS
    z_hat = np.array([0.0, 0.0, 1.0])
    for i in range(16):
        theta = 2.0 * np.pi * i / 16.0
        r_hat = np.array([np.cos(theta), np.sin(theta), 0.0])
        t_hat = np.array([-np.sin(theta), np.cos(theta), 0.0])

        # Rim pinch from above: fingers straddle the rim. Besides the
        # straight-down approach, variants tilted about the rim tangent
        # keep the wrist away from its pitch limit.
        pos_top = r_hat * (r - 0.005) + np.array([0.0, 0.0, PLATE_THICKNESS - 0.008])
        for k, tilt_deg in enumerate((25.0, -25.0, 0.0)):
            rot = quat_to_matrix(quat_from_axis_angle(t_hat, np.deg2rad(tilt_deg))) if tilt_deg else np.eye(3)
            z_axis = rot @ -z_hat
            for j, x_axis in enumerate((t_hat, -t_hat)):
                y_axis = np.cross(z_axis, x_axis)
                grasps.append(
                    GraspPose(
                        pose=Pose(pos_top, _quat_cols(x_axis, y_axis, z_axis)),
                        approach_axis=z_axis,
                        score=round(0.94 - 0.03 * k - 0.01 * ((i * 5 + j) % 6), 6),
                    )
                )

        # Edge-on pinch: approach toward the plate center, several rolls.
        pos_edge = r_hat * (r - 0.005) + np.array([0.0, 0.0, PLATE_THICKNESS / 2.0])
        z_axis = -r_hat
        rolls = (
            z_hat, -z_hat, t_hat, -t_hat,
            normalize(z_hat + t_hat), normalize(z_hat - t_hat),
            normalize(-z_hat + t_hat), normalize(-z_hat - t_hat),
        )
        for j, x_axis in enumerate(rolls):
            y_axis = np.cross(z_axis, x_axis)
            grasps.append(
                GraspPose(
                    pose=Pose(pos_edge, _quat_cols(x_axis, y_axis, z_axis)),
                    approach_axis=z_axis,
                    score=round(0.80 - 0.02 * ((i * 3 + j) % 10), 6),
                )
            )
    return tuple(grasps)


def plate_record(name: str = "plate_blue") -> AssetRecord:
    half = PLATE_RADIUS + 0.015
    return AssetRecord(
        name=name,
        category="plate",
        kind="rigid",
        bounding_box=(np.array([-half, -half, 0.0]), np.array([half, half, PLATE_THICKNESS])),
        mass=0.4,
        grasp_candidates=_plate_grasps(),
    )


def shelf_record(name: str = "shelf_0") -> AssetRecord:
    grasps = []
    for i in range(8):
        theta = 2.0 * np.pi * i / 8.0
        x_axis = np.array([-np.sin(theta), np.cos(theta), 0.0])
        z_axis = np.array([0.0, 0.0, -1.0])
        y_axis = np.cross(z_axis, x_axis)
        pos = np.array([0.09 * np.cos(theta), 0.05 * np.sin(theta), 0.03])
        grasps.append(
            GraspPose(pose=Pose(pos, _quat_cols(x_axis, y_axis, z_axis)),
                      approach_axis=z_axis, score=0.7)
        )
    return AssetRecord(
        name=name,
        category="plate_shelf",
        kind="rigid",
        bounding_box=(np.array([-0.11, -0.075, 0.0]), np.array([0.11, 0.075, 0.04])),
        mass=1.2,
        grasp_candidates=tuple(grasps),
    )


def microwave_record(name: str = "microwave_0") -> AssetRecord:
    return AssetRecord(
        name=name,
        category="microwave",
        kind="articulated",
        bounding_box=(np.array([-0.20, -0.15, 0.0]), np.array([0.20, 0.15, 0.30])),
        mass=9.0,
        joints=(
            JointAnnotation(
                joint_id="door",
                type="revolute",
                axis=np.array([0.0, 0.0, 1.0]),
                origin=np.array([0.20, -0.15, 0.0]),
                limits=(0.0, 1.6),
                damping=0.4,
                stiffness=0.0,
            ),
        ),
        contact_regions=(
            ContactRegion(center=np.array([-0.15, -0.16, 0.15]), radius=0.03, attached_joint="door"),
        ),
    )


# ---------------------------------------------------------------------------
# Embodiments
# ---------------------------------------------------------------------------


def _tabletop_arm(arm_id: str, lateral: float) -> KinematicChain:
    """6-DOF arm: shoulder yaw/pitch, elbow, wrist roll/pitch/roll."""
    x, y, z = np.eye(3)
    joints = (
        ChainJoint(axis=z, origin=np.array([0.0, 0.0, 0.04]), lo=-2.9, hi=2.9,
                   spheres=((np.array([0.0, 0.0, 0.02]), 0.040),)),
        ChainJoint(axis=y, origin=np.array([0.0, 0.0, 0.04]), lo=-1.9, hi=2.4,
                   spheres=((np.array([0.0, 0.0, 0.10]), 0.042), (np.array([0.0, 0.0, 0.22]), 0.042))),
        ChainJoint(axis=y, origin=np.array([0.0, 0.0, 0.30]), lo=-2.6, hi=2.6,
                   spheres=((np.array([0.08, 0.0, 0.0]), 0.038), (np.array([0.19, 0.0, 0.0]), 0.038))),
        ChainJoint(axis=x, origin=np.array([0.27, 0.0, 0.0]), lo=-2.9, hi=2.9,
                   spheres=((np.array([0.02, 0.0, 0.0]), 0.034),)),
        ChainJoint(axis=y, origin=np.array([0.06, 0.0, 0.0]), lo=-2.2, hi=2.2,
                   spheres=((np.array([0.02, 0.0, 0.0]), 0.032),)),
        ChainJoint(axis=x, origin=np.array([0.05, 0.0, 0.0]), lo=-2.9, hi=2.9,
                   spheres=((np.array([0.03, 0.0, 0.0]), 0.028), (np.array([0.07, 0.0, 0.0]), 0.022))),
    )
    # Tool +Z along the flange +X (gripper points forward at q = 0).
    ee_rot = quat_from_axis_angle(np.array([0.0, 1.0, 0.0]), np.pi / 2.0)
    return KinematicChain(
        arm_id=arm_id,
        base_offset=Pose(np.array([0.05, lateral, 0.64])),
        joints=joints,
        ee_offset=Pose(np.array([0.09, 0.0, 0.0]), ee_rot),
    )


def split_aloha_record(name: str = "split_aloha_mid_360") -> AssetRecord:
    return AssetRecord(
        name=name,
        category="robot",
        kind="embodiment",
        bounding_box=(np.array([-0.20, -0.30, 0.0]), np.array([0.20, 0.30, 0.80])),
        mass=24.0,
        chains=(_tabletop_arm("left", 0.22), _tabletop_arm("right", -0.22)),
    )


def franka_record(name: str = "franka_desk") -> AssetRecord:
    x, y, z = np.eye(3)
    joints = (
        ChainJoint(axis=z, origin=np.array([0.0, 0.0, 0.333]), lo=-2.8, hi=2.8,
                   spheres=((np.array([0.0, 0.0, -0.10]), 0.06),)),
        ChainJoint(axis=y, origin=np.array([0.0, 0.0, 0.0]), lo=-1.7, hi=1.7,
                   spheres=((np.array([0.0, 0.0, 0.12]), 0.055),)),
        ChainJoint(axis=z, origin=np.array([0.0, 0.0, 0.316]), lo=-2.8, hi=2.8,
                   spheres=((np.array([0.04, 0.0, 0.0]), 0.05),)),
        ChainJoint(axis=y, origin=np.array([0.0825, 0.0, 0.0]), lo=-3.0, hi=0.1,
                   spheres=((np.array([-0.04, 0.0, 0.10]), 0.05),)),
        ChainJoint(axis=z, origin=np.array([-0.0825, 0.0, 0.384]), lo=-2.8, hi=2.8,
                   spheres=((np.array([0.0, 0.0, -0.10]), 0.045),)),
        ChainJoint(axis=y, origin=np.array([0.0, 0.0, 0.0]), lo=-0.02, hi=3.7,
                   spheres=((np.array([0.05, 0.0, 0.0]), 0.04),)),
        ChainJoint(axis=x, origin=np.array([0.088, 0.0, 0.0]), lo=-2.9, hi=2.9,
                   spheres=((np.array([0.03, 0.0, 0.0]), 0.03),)),
    )
    ee_rot = quat_from_axis_angle(np.array([0.0, 1.0, 0.0]), np.pi / 2.0)
    return AssetRecord(
        name=name,
        category="robot",
        kind="embodiment",
        bounding_box=(np.array([-0.12, -0.12, 0.0]), np.array([0.12, 0.12, 0.35])),
        mass=18.0,
        chains=(
            KinematicChain(
                arm_id="right",
                base_offset=Pose(np.zeros(3)),
                joints=joints,
                ee_offset=Pose(np.array([0.107, 0.0, 0.0]), ee_rot),
            ),
        ),
    )


def fixture_records() -> list[AssetRecord]:
    return [
        plate_record(),
        shelf_record(),
        microwave_record(),
        split_aloha_record(),
        franka_record(),
    ]


def write_fixture_assets(root: str | Path) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for record in fixture_records():
        manifest = manifest_from_record(record)
        (root / f"{record.name}.asset.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=1) + "\n", encoding="utf-8"
        )
    return root


# ---------------------------------------------------------------------------
# Task config tree
# ---------------------------------------------------------------------------

HOME_Q = [0.00484993, 0.34198609, -0.14007858, 0.01680429, 0.14391101, -0.00252178]
HOME_STD = [0.02, 0.02, 0.02, 0.02, 0.02, 0.02]

ROBOT_BASE = [0.0, -0.55, -0.60]  # table frame
BASE_YAW_DEG = 90.0


def _fmt(values) -> str:
    return "[" + ", ".join(f"{float(v):.8g}" for v in values) + "]"


def handover_goto(robot_frame: bool = True) -> tuple[list[float], list[float]]:
    """Goto pose that turns a rim-pinched plate vertical between the arms.

    The target plate rotation is +90 deg about world X (plate +Y up, face
    toward the left gripper); the EE rotation follows from the theta=0 rim
    pinch. The returned pose is expressed in the robot frame.
    """
    r_plate = quat_from_euler_xyz_deg([90.0, 0.0, 0.0])
    g0 = _quat_cols(np.array([0.0, 1.0, 0.0]), np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, -1.0]))
    ee_world = quat_mul(r_plate, g0)
    pos_world = np.array([0.0, -0.25, 0.30])
    if not robot_frame:
        return [float(v) for v in pos_world], [float(v) for v in ee_world]
    base = Pose(np.array(ROBOT_BASE), quat_from_euler_xyz_deg([0.0, 0.0, BASE_YAW_DEG]))
    local = base.inverse().compose(Pose(pos_world, ee_world))
    return [float(v) for v in local.translation], [float(v) for v in local.rotation]


def _camera_block(name_expr: str, translation, orientation, params_ref: str, parent: str) -> str:
    return f"""  -
    name: {name_expr}
    translation: {_fmt(translation)}
    orientation: {_fmt(orientation)}
    camera_axes: usd
    params: ${{{params_ref}}}
    parent: "{parent}"
    apply_randomization: True
    max_translation_noise: 0.03
    max_orientation_noise: 5.0
"""


def sort_tray_task_yaml(small: bool = False) -> str:
    """The tray-on-rack task adapted to the fixture assets."""
    goto_t, goto_q = handover_goto()
    base = Pose(np.array(ROBOT_BASE), quat_from_euler_xyz_deg([0.0, 0.0, BASE_YAW_DEG]))

    # Wrist cameras sit behind the flange looking along the tool axis.
    wrist_t = [0.0, 0.0, 0.06]
    wrist_q = look_at_quat(np.zeros(3), np.array([0.4, 0.0, 0.0]), up=np.array([0.0, 0.0, 1.0]))
    # Head camera on the torso looking at the table center.
    head_local = np.array([0.25, 0.0, 1.45])
    table_center_local = base.inverse().transform_point(np.array([0.0, 0.0, 0.0]))
    head_q = look_at_quat(head_local, table_center_local)

    name = "sort_tray_small" if small else "sort_tray_on_rack"
    head_cam_ref = "cam_small" if small else "cam_head"
    wrist_cam_ref = "cam_small" if small else "cam_wrist"
    cameras = _camera_block(
        "${robots.0.name}_head", head_local, head_q, head_cam_ref,
        "${robots.0.name}/torso/top_camera_link",
    )
    if not small:
        cameras += "\n" + _camera_block(
            "${robots.0.name}_hand_left", wrist_t, wrist_q, wrist_cam_ref,
            "${robots.0.name}/arm/fl/link6",
        )
        cameras += "\n" + _camera_block(
            "${robots.0.name}_hand_right", wrist_t, wrist_q, wrist_cam_ref,
            "${robots.0.name}/arm/fr/link6",
        )

    return f"""defaults:
  - _self_
  - world
  - logger
  - ../arenas@arena: scene_arena
  - ../cameras@{head_cam_ref}: {head_cam_ref}
{"" if small else f"  - ../cameras@{wrist_cam_ref}: {wrist_cam_ref}"}

name: {name}
task_id: 0

env_map:
  envmap_lib: envmap_lib
  apply_randomization: True
  intensity_range: [4000, 7000]
  rotation_range: [0, 180]

robots:
  -
    name: "split_aloha"
    target_class: SplitAloha
    path: "split_aloha_mid_360/robot.usd"
    euler: [0.0, 0.0, {BASE_YAW_DEG}]
    left_joint_home: {_fmt(HOME_Q)}
    right_joint_home: {_fmt(HOME_Q)}
    left_joint_home_std: {_fmt(HOME_STD)}
    right_joint_home_std: {_fmt(HOME_STD)}

objects:
  -
    name: plate
    path: assets/plate/plate_blue/model.usd
    target_class: RigidObject
    category: plate
    translation: [0.0, 0.0, 0.0]
    euler: [0.0, 0.0, 0.0]
    scale: [1.0, 1.0, 1.0]
    apply_randomization: True
  -
    name: rack
    path: assets/plate_shelf/shelf_0/model.usd
    target_class: RigidObject
    category: plate_shelf
    translation: [0.0, 0.0, 0.0]
    euler: [0.0, 0.0, 0.0]
    scale: [1.0, 1.0, 1.0]
    apply_randomization: False

regions:
  -
    object: ${{robots.0.name}}
    target: table
    random_type: A_on_B_region_sampler
    random_config:
      pos_range: [
        {_fmt(ROBOT_BASE)},
        {_fmt(ROBOT_BASE)}
      ]
      yaw_rotation: [0.0, 0.0]
  -
    object: plate
    target: table
    random_type: A_on_B_region_sampler
    random_config:
      pos_range: [
        [0.125, -0.20, 0.005],
        [0.25, -0.10, 0.005]
      ]
      yaw_rotation: [0, 0]
  -
    object: rack
    target: table
    random_type: A_on_B_region_sampler
    random_config:
      pos_range: [
        [-0.25, -0.20, 0.005],
        [-0.15, -0.10, 0.005]
      ]
      yaw_rotation: [0, 0]

cameras:
{cameras}
data:
  save_root_path: "out"
  task_dir: "Sort Tray On Rack"
  language_instruction: "Pick the plate, make the handover and place it on the rack"
  detailed_language_instruction: "Pick the plate with the right arm, hand it over to the left arm, and place it vertically on the rack."
  version: "v1.0"
  max_episode_length: 4000

skills:
  -
    split_aloha:
      -
        right:
          -
            name: pick
            objects: [plate]
            filter_x_dir: ["upward", 90, 45]
            filter_y_dir: ["forward", 40]
            filter_z_dir: ["downward", 110, 140]
            t_eps: 0.01
            o_eps: 1
            close_wait_steps: 10
            post_grasp_offset_min: 0.1
            post_grasp_offset_max: 0.1
            direction_to_obj: right

          -
            name: goto__pose
            frame: robot
            gripper_action: close_gripper
            translation: {_fmt(goto_t)}
            quaternion: {_fmt(goto_q)}

      -
        left:
          -
            name: pick
            objects: [plate]
            filter_y_dir: ["upward", 40]
            filter_z_dir: ["forward", 90, 45]
            close_wait_steps: 10
            t_eps: 0.01
            o_eps: 1
            post_grasp_offset_min: 0.0
            post_grasp_offset_max: 0.0
            direction_to_obj: left

      -
        left:
          - name: gripper__action
            action_type: close
        right:
          - name: gripper__action
            action_type: open

      -
        right:
          - name: home

      -
        left:
          -
            name: place
            place_direction: vertical
            objects: [plate, rack]
            position_constraint: object
            x_ratio_range: [0.5, 0.5]
            y_ratio_range: [0.8, 0.8]
            align_pick_obj_axis: [0, 1, 0]
            align_place_obj_axis: [0, 0, 1]
            align_obj_tol: 10
            pre_place_z_offset: 0.15
            place_z_offset: 0.01
"""


def write_fixture_configs(root: str | Path) -> Path:
    root = Path(root)
    (root / "tasks").mkdir(parents=True, exist_ok=True)
    (root / "arenas").mkdir(exist_ok=True)
    (root / "cameras").mkdir(exist_ok=True)

    (root / "tasks" / "sort_tray_on_rack.yaml").write_text(sort_tray_task_yaml(), encoding="utf-8")
    (root / "tasks" / "sort_tray_small.yaml").write_text(sort_tray_task_yaml(small=True), encoding="utf-8")
    (root / "tasks" / "world.yaml").write_text("gravity: [0.0, 0.0, -9.81]\n", encoding="utf-8")
    (root / "tasks" / "logger.yaml").write_text("level: info\n", encoding="utf-8")
    (root / "arenas" / "scene_arena.yaml").write_text(
        "table:\n"
        f"  aabb: [{TABLE_AABB[0]}, {TABLE_AABB[1]}]\n"
        "  support: table\n",
        encoding="utf-8",
    )
    (root / "cameras" / "cam_head.yaml").write_text(
        "width: 96\nheight: 72\nfocal: 60.0\n", encoding="utf-8"
    )
    (root / "cameras" / "cam_wrist.yaml").write_text(
        "width: 64\nheight: 48\nfocal: 40.0\n", encoding="utf-8"
    )
    (root / "cameras" / "cam_small.yaml").write_text(
        "width: 48\nheight: 36\nfocal: 30.0\n", encoding="utf-8"
    )
    return root


def write_fixture_tree(root: str | Path) -> Path:
    root = Path(root)
    write_fixture_assets(root / "assets")
    write_fixture_configs(root / "configs")
    return root


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else "fixtures"
    write_fixture_tree(target)
    print(f"fixture tree written to {Path(target).resolve()}")
