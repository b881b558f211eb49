"""Annotated asset registry.

One JSON manifest per asset (``<root>/<name>.asset.json``). Rigid assets
carry grasp candidates, articulated assets carry joint annotations and
contact regions, embodiments carry kinematic chains, scenes carry
manipulation areas. Lengths are meters and angles radians inside
manifests. The registry is immutable after load and safe to share across
workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DuplicateAsset, ManifestError, NoCandidates, UnknownCategory
from .geometry import Pose, normalize
from .skill_specs import DirectionFilter

KINDS = ("rigid", "articulated", "scene", "embodiment")

WORLD_DIRECTIONS = {
    "upward": np.array([0.0, 0.0, 1.0]),
    "downward": np.array([0.0, 0.0, -1.0]),
    "forward": np.array([1.0, 0.0, 0.0]),
    "backward": np.array([-1.0, 0.0, 0.0]),
    "left": np.array([0.0, 1.0, 0.0]),
    "right": np.array([0.0, -1.0, 0.0]),
}

_GRIPPER_AXES = {"x": np.array([1.0, 0, 0]), "y": np.array([0, 1.0, 0]), "z": np.array([0, 0, 1.0])}


@dataclass(frozen=True)
class GraspPose:
    """Gripper pose in the object frame; approach axis is the gripper +Z."""

    pose: Pose
    approach_axis: np.ndarray
    score: float

    def __post_init__(self):
        axis = np.asarray(self.approach_axis, dtype=float).reshape(3)
        if abs(np.linalg.norm(axis) - 1.0) > 1e-6:
            raise ValueError("approach_axis must be unit length")
        if not (0.0 <= self.score <= 1.0):
            raise ValueError("score must lie in [0, 1]")
        object.__setattr__(self, "approach_axis", axis)


@dataclass(frozen=True)
class JointAnnotation:
    joint_id: str
    type: str  # revolute | prismatic
    axis: np.ndarray
    origin: np.ndarray
    limits: tuple[float, float]
    damping: float = 0.0
    stiffness: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "axis", normalize(np.asarray(self.axis, dtype=float)))
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(3))
        if self.limits[0] > self.limits[1]:
            raise ValueError("joint limits lo > hi")


@dataclass(frozen=True)
class ContactRegion:
    center: np.ndarray
    radius: float
    attached_joint: str

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        if self.radius <= 0:
            raise ValueError("contact region radius must be > 0")


@dataclass(frozen=True)
class ChainJoint:
    axis: np.ndarray
    origin: np.ndarray
    lo: float
    hi: float
    spheres: tuple[tuple[np.ndarray, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "axis", normalize(np.asarray(self.axis, dtype=float)))
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(3))
        if self.lo >= self.hi:
            raise ValueError("chain joint limits require lo < hi")
        for _, r in self.spheres:
            if r <= 0:
                raise ValueError("collision sphere radius must be > 0")


@dataclass(frozen=True, eq=False)
class KinematicChain:
    """Immutable; shared (not copied) across scene-state snapshots, and
    hashed by identity so FK caches can key on instances."""

    arm_id: str
    base_offset: Pose
    joints: tuple[ChainJoint, ...]
    ee_offset: Pose

    def __post_init__(self):
        if not self.joints:
            raise ValueError("chain needs at least one joint")

    def __deepcopy__(self, memo):
        return self

    @property
    def joint_count(self) -> int:
        return len(self.joints)

    def limits(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.array([j.lo for j in self.joints]),
            np.array([j.hi for j in self.joints]),
        )


@dataclass(frozen=True)
class ManipulationArea:
    name: str
    aabb_min: np.ndarray
    aabb_max: np.ndarray


@dataclass(frozen=True)
class AssetRecord:
    name: str
    category: str
    kind: str
    canonical_pose: Pose = field(default_factory=Pose.identity)
    bounding_box: tuple[np.ndarray, np.ndarray] = (np.zeros(3), np.ones(3))
    mass: float = 1.0
    grasp_candidates: tuple[GraspPose, ...] = ()
    joints: tuple[JointAnnotation, ...] = ()
    contact_regions: tuple[ContactRegion, ...] = ()
    chains: tuple[KinematicChain, ...] = ()
    areas: tuple[ManipulationArea, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown asset kind: {self.kind}")
        lo, hi = self.bounding_box
        if np.any(np.asarray(hi) - np.asarray(lo) <= 0):
            raise ValueError("bounding box extents must be > 0")
        if self.mass <= 0:
            raise ValueError("mass must be > 0")

    def __deepcopy__(self, memo):
        return self  # records are immutable; share across snapshots

    def joint(self, joint_id: str) -> JointAnnotation:
        for j in self.joints:
            if j.joint_id == joint_id:
                return j
        raise KeyError(joint_id)

    def chain(self, arm_id: str) -> KinematicChain:
        for c in self.chains:
            if c.arm_id == arm_id:
                return c
        raise KeyError(arm_id)


class AssetRegistry:
    """Immutable name -> record map with path-key and category lookup."""

    def __init__(self, records: dict[str, AssetRecord]):
        self._records = dict(records)
        self._by_category: dict[str, list[str]] = {}
        for name in sorted(self._records):
            self._by_category.setdefault(self._records[name].category, []).append(name)

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, name: str) -> bool:
        return name in self._records

    def names(self) -> list[str]:
        return sorted(self._records)

    def get(self, name: str) -> AssetRecord:
        return self._records[name]

    def find(self, key: str) -> AssetRecord | None:
        """Resolve a registry name or an opaque asset path.

        Path components are tried right to left with extensions stripped, so
        ``assets/plate/plate_blue/model.usd`` finds the ``plate_blue`` record.
        """
        if key in self._records:
            return self._records[key]
        for part in reversed(str(key).replace("\\", "/").split("/")):
            stem = part.split(".", 1)[0]
            if stem in self._records:
                return self._records[stem]
        return None

    def category_members(self, category: str) -> list[AssetRecord]:
        return [self._records[n] for n in self._by_category.get(category, [])]


def _pose_from(obj: dict | None) -> Pose:
    if not obj:
        return Pose.identity()
    return Pose(np.array(obj.get("translation", [0, 0, 0]), dtype=float),
                np.array(obj.get("quaternion", [1, 0, 0, 0]), dtype=float))


def _pose_to(pose: Pose) -> dict:
    return {
        "translation": [float(v) for v in pose.translation],
        "quaternion": [float(v) for v in pose.rotation],
    }


def record_from_manifest(data: dict, path: str = "<memory>") -> AssetRecord:
    """Build an AssetRecord from manifest JSON; raises ManifestError."""
    try:
        kind = data["kind"]
        bbox = (np.array(data["bounding_box"][0], dtype=float), np.array(data["bounding_box"][1], dtype=float))
        grasps = tuple(
            GraspPose(
                pose=_pose_from(g["pose"]),
                approach_axis=np.array(g["approach_axis"], dtype=float),
                score=float(g["score"]),
            )
            for g in data.get("grasp_candidates", [])
        )
        joints = tuple(
            JointAnnotation(
                joint_id=str(j["joint_id"]),
                type=str(j["type"]),
                axis=np.array(j["axis"], dtype=float),
                origin=np.array(j["origin"], dtype=float),
                limits=(float(j["limits"][0]), float(j["limits"][1])),
                damping=float(j.get("damping", 0.0)),
                stiffness=float(j.get("stiffness", 0.0)),
            )
            for j in data.get("joints", [])
        )
        regions = tuple(
            ContactRegion(
                center=np.array(r["center"], dtype=float),
                radius=float(r["radius"]),
                attached_joint=str(r["attached_joint"]),
            )
            for r in data.get("contact_regions", [])
        )
        chains = tuple(
            KinematicChain(
                arm_id=str(c["arm_id"]),
                base_offset=_pose_from(c.get("base_offset")),
                joints=tuple(
                    ChainJoint(
                        axis=np.array(j["axis"], dtype=float),
                        origin=np.array(j["origin"], dtype=float),
                        lo=float(j["limits"][0]),
                        hi=float(j["limits"][1]),
                        spheres=tuple(
                            (np.array(s["center"], dtype=float), float(s["radius"]))
                            for s in j.get("spheres", [])
                        ),
                    )
                    for j in c["joints"]
                ),
                ee_offset=_pose_from(c.get("ee_offset")),
            )
            for c in data.get("chains", [])
        )
        areas = tuple(
            ManipulationArea(
                name=str(a["name"]),
                aabb_min=np.array(a["aabb_min"], dtype=float),
                aabb_max=np.array(a["aabb_max"], dtype=float),
            )
            for a in data.get("areas", [])
        )
        record = AssetRecord(
            name=str(data["name"]),
            category=str(data.get("category", "uncategorized")),
            kind=kind,
            canonical_pose=_pose_from(data.get("canonical_pose")),
            bounding_box=bbox,
            mass=float(data.get("mass", 1.0)),
            grasp_candidates=grasps,
            joints=joints,
            contact_regions=regions,
            chains=chains,
            areas=areas,
        )
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise ManifestError(path, f"{type(exc).__name__}: {exc}") from exc

    # Kind-specific extras must match the kind exactly.
    checks = {
        "rigid": (grasps or True, not joints and not chains and not areas),
        "articulated": (True, not grasps and not chains and not areas),
        "scene": (True, not grasps and not joints and not chains),
        "embodiment": (chains, not grasps and not joints and not areas),
    }
    present, absent = checks[kind]
    if not present or not absent:
        raise ManifestError(path, f"extras do not match kind '{kind}'")
    return record


def manifest_from_record(record: AssetRecord) -> dict:
    data: dict = {
        "name": record.name,
        "category": record.category,
        "kind": record.kind,
        "canonical_pose": _pose_to(record.canonical_pose),
        "bounding_box": [[float(v) for v in record.bounding_box[0]], [float(v) for v in record.bounding_box[1]]],
        "mass": record.mass,
    }
    if record.grasp_candidates:
        data["grasp_candidates"] = [
            {"pose": _pose_to(g.pose), "approach_axis": [float(v) for v in g.approach_axis], "score": g.score}
            for g in record.grasp_candidates
        ]
    if record.joints:
        data["joints"] = [
            {
                "joint_id": j.joint_id,
                "type": j.type,
                "axis": [float(v) for v in j.axis],
                "origin": [float(v) for v in j.origin],
                "limits": [j.limits[0], j.limits[1]],
                "damping": j.damping,
                "stiffness": j.stiffness,
            }
            for j in record.joints
        ]
    if record.contact_regions:
        data["contact_regions"] = [
            {"center": [float(v) for v in r.center], "radius": r.radius, "attached_joint": r.attached_joint}
            for r in record.contact_regions
        ]
    if record.chains:
        data["chains"] = [
            {
                "arm_id": c.arm_id,
                "base_offset": _pose_to(c.base_offset),
                "joints": [
                    {
                        "axis": [float(v) for v in j.axis],
                        "origin": [float(v) for v in j.origin],
                        "limits": [j.lo, j.hi],
                        "spheres": [
                            {"center": [float(v) for v in c_], "radius": r} for c_, r in j.spheres
                        ],
                    }
                    for j in c.joints
                ],
                "ee_offset": _pose_to(c.ee_offset),
            }
            for c in record.chains
        ]
    if record.areas:
        data["areas"] = [
            {"name": a.name, "aabb_min": [float(v) for v in a.aabb_min], "aabb_max": [float(v) for v in a.aabb_max]}
            for a in record.areas
        ]
    return data


def load_registry(root: str | Path) -> AssetRegistry:
    """Load every ``*.asset.json`` under root (sorted file order)."""
    root = Path(root)
    records: dict[str, AssetRecord] = {}
    for path in sorted(root.glob("*.asset.json")):
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ManifestError(str(path), f"invalid JSON: {exc}") from exc
        record = record_from_manifest(data, str(path))
        if record.name in records:
            raise DuplicateAsset(record.name)
        records[record.name] = record
    return AssetRegistry(records)


def grasp_candidates(
    asset: AssetRecord,
    filters: list[DirectionFilter] | tuple[DirectionFilter, ...] = (),
    object_pose: Pose | None = None,
) -> list[GraspPose]:
    """Filter an asset's grasp annotations by world-direction cones.

    A candidate survives when, for every filter, the angle between its
    gripper axis (expressed in world frame through the object's pose) and
    the filter's world direction lies inside the filter envelope. Result is
    sorted by descending score, stable for ties.
    """
    if asset.kind != "rigid":
        raise NoCandidates(f"asset '{asset.name}' is not a rigid object")
    if not asset.grasp_candidates:
        raise NoCandidates(f"asset '{asset.name}' has no grasp annotations")
    pose = object_pose if object_pose is not None else Pose.identity()

    kept = []
    for grasp in asset.grasp_candidates:
        ok = True
        for filt in filters:
            axis_obj = grasp.pose.transform_direction(_GRIPPER_AXES[filt.axis])
            axis_world = pose.transform_direction(axis_obj)
            target = WORLD_DIRECTIONS[filt.direction]
            angle = float(np.degrees(np.arccos(np.clip(np.dot(axis_world, target), -1.0, 1.0))))
            lo, hi = filt.envelope()
            if not (lo - 1e-9 <= angle <= hi + 1e-9):
                ok = False
                break
        if ok:
            kept.append(grasp)
    kept.sort(key=lambda g: -g.score)  # python sort is stable
    return kept


def select_grasp(candidates: list[GraspPose], rng: np.random.Generator, k: int = 40) -> GraspPose:
    """Uniform draw from the top min(k, len) highest-confidence candidates."""
    if not candidates:
        raise NoCandidates("no grasp candidates to select from")
    top = min(k, len(candidates))
    return candidates[int(rng.integers(0, top))]


def sample_category_replacement(
    registry: AssetRegistry, category: str, exclude: str, rng: np.random.Generator
) -> AssetRecord:
    """Uniform same-category rigid replacement; identity for singletons."""
    members = [r for r in registry.category_members(category) if r.kind == "rigid"]
    if not members:
        raise UnknownCategory(category)
    others = [r for r in members if r.name != exclude]
    if not others:
        return registry.get(exclude)
    return others[int(rng.integers(0, len(others)))]
