"""Rigid-body geometry: quaternions, poses, boxes.

Quaternions are stored (w, x, y, z) and kept unit-norm. Euler angles in
configs are intrinsic X-Y-Z rotations in degrees.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def normalize(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ValueError("cannot normalize zero vector")
    return v / n


def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    return normalize(np.asarray(q, dtype=float))


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    u = np.array([x, y, z])
    return v + 2.0 * np.cross(u, np.cross(u, v) + w * v)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    # Shepperd's method, numerically safe for all branches.
    t = np.trace(m)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        return quat_normalize(
            np.array([0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s])
        )
    i = int(np.argmax(np.diag(m)))
    if i == 0:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        q = [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
    elif i == 1:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        q = [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        q = [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
    return quat_normalize(np.array(q))


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = normalize(np.asarray(axis, dtype=float))
    half = 0.5 * angle
    return np.concatenate([[np.cos(half)], np.sin(half) * axis])


def quat_to_axis_angle(q: np.ndarray) -> tuple[np.ndarray, float]:
    q = quat_normalize(q)
    if q[0] < 0:
        q = -q
    s = float(np.linalg.norm(q[1:]))
    if s < 1e-12:
        return np.array([1.0, 0.0, 0.0]), 0.0
    angle = 2.0 * np.arctan2(s, float(q[0]))
    return q[1:] / s, angle


def quat_angle(q: np.ndarray) -> float:
    """Rotation angle of q in radians, in [0, pi]."""
    return quat_to_axis_angle(q)[1]


def quat_from_euler_xyz_deg(euler_deg) -> np.ndarray:
    """Intrinsic X-Y-Z rotation, angles in degrees."""
    a, b, c = np.deg2rad(np.asarray(euler_deg, dtype=float))
    qx = quat_from_axis_angle(np.array([1.0, 0, 0]), a)
    qy = quat_from_axis_angle(np.array([0, 1.0, 0]), b)
    qz = quat_from_axis_angle(np.array([0, 0, 1.0]), c)
    return quat_mul(quat_mul(qx, qy), qz)


def rotation_between(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimal rotation carrying unit vector a onto unit vector b."""
    a = normalize(np.asarray(a, dtype=float))
    b = normalize(np.asarray(b, dtype=float))
    c = float(np.dot(a, b))
    if c > 1.0 - 1e-12:
        return quat_identity()
    if c < -1.0 + 1e-12:
        # Antiparallel: rotate pi about any axis orthogonal to a.
        helper = np.array([1.0, 0, 0]) if abs(a[0]) < 0.9 else np.array([0, 1.0, 0])
        return quat_from_axis_angle(np.cross(a, helper), np.pi)
    return quat_from_axis_angle(np.cross(a, b), float(np.arccos(np.clip(c, -1, 1))))


@dataclass(frozen=True)
class Pose:
    """Rigid transform: rotation (unit quaternion, wxyz) then translation."""

    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation: np.ndarray = field(default_factory=quat_identity)

    def __post_init__(self):
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))
        object.__setattr__(self, "rotation", quat_normalize(np.asarray(self.rotation, dtype=float).reshape(4)))

    @staticmethod
    def identity() -> "Pose":
        return Pose()

    def compose(self, other: "Pose") -> "Pose":
        """self ∘ other (apply other in self's frame)."""
        return Pose(
            self.translation + quat_rotate(self.rotation, other.translation),
            quat_mul(self.rotation, other.rotation),
        )

    def inverse(self) -> "Pose":
        qi = quat_conj(self.rotation)
        return Pose(-quat_rotate(qi, self.translation), qi)

    def transform_point(self, p: np.ndarray) -> np.ndarray:
        return self.translation + quat_rotate(self.rotation, np.asarray(p, dtype=float))

    def transform_direction(self, d: np.ndarray) -> np.ndarray:
        return quat_rotate(self.rotation, np.asarray(d, dtype=float))

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(self.rotation)
        m[:3, 3] = self.translation
        return m

    def almost_equal(self, other: "Pose", pos_tol: float = 1e-9, ang_tol: float = 1e-9) -> bool:
        dq = quat_mul(quat_conj(self.rotation), other.rotation)
        return (
            float(np.linalg.norm(self.translation - other.translation)) <= pos_tol
            and quat_angle(dq) <= ang_tol
        )


def pose_error(current: Pose, target: Pose) -> tuple[float, float]:
    """(position error m, orientation error rad) between two poses."""
    dp = float(np.linalg.norm(target.translation - current.translation))
    dq = quat_mul(target.rotation, quat_conj(current.rotation))
    return dp, quat_angle(dq)


def aabb_of_box(box_min: np.ndarray, box_max: np.ndarray, pose: Pose) -> tuple[np.ndarray, np.ndarray]:
    """World axis-aligned bounds of a posed axis-aligned box."""
    box_min = np.asarray(box_min, dtype=float)
    box_max = np.asarray(box_max, dtype=float)
    corners = np.array(
        [[x, y, z] for x in (box_min[0], box_max[0]) for y in (box_min[1], box_max[1]) for z in (box_min[2], box_max[2])]
    )
    world = np.array([pose.transform_point(c) for c in corners])
    return world.min(axis=0), world.max(axis=0)


def box_corners(box_min: np.ndarray, box_max: np.ndarray, pose: Pose) -> np.ndarray:
    """All 8 corners of a posed box, world frame, shape (8, 3)."""
    box_min = np.asarray(box_min, dtype=float)
    box_max = np.asarray(box_max, dtype=float)
    corners = np.array(
        [[x, y, z] for x in (box_min[0], box_max[0]) for y in (box_min[1], box_max[1]) for z in (box_min[2], box_max[2])]
    )
    return np.array([pose.transform_point(c) for c in corners])


def point_box_distance(p: np.ndarray, box_min: np.ndarray, box_max: np.ndarray) -> float:
    """Distance from a point to an axis-aligned box (0 inside)."""
    closest = np.minimum(np.maximum(p, box_min), box_max)
    return float(np.linalg.norm(p - closest))
