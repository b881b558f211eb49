"""Skill parameter schemas.

One dataclass per atomic skill, parsed from the skill entries of a task
config. Skills that would need deformable or fluid physics are recognized
by name and rejected with a clear error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import SchemaError, UnsupportedSkill

SKILL_NAMES = ("pick", "place", "push", "goto__pose", "gripper__action", "home")

# Present in the wider task taxonomy but requiring physics this build does
# not simulate.
REJECTED_SKILLS = {
    "fold": "deformable-object physics is not simulated",
    "pour": "fluid physics is not simulated",
    "water": "fluid physics is not simulated",
}


@dataclass(frozen=True)
class DirectionFilter:
    """Cone constraint on one gripper axis against a world direction.

    Two-argument form [dir, c]: angle(axis, dir) <= c degrees.
    Three-argument form [dir, c, t]: angle in [c - t, c + t], clamped
    to [0, 180].
    """

    axis: str  # "x" | "y" | "z" (gripper frame)
    direction: str  # upward|downward|forward|backward|left|right
    center_deg: float
    tol_deg: float | None = None

    def envelope(self) -> tuple[float, float]:
        if self.tol_deg is None:
            return 0.0, self.center_deg
        return max(0.0, self.center_deg - self.tol_deg), min(180.0, self.center_deg + self.tol_deg)


DIRECTION_KEYWORDS = ("upward", "downward", "forward", "backward", "left", "right")


def _parse_filter(axis: str, value, path: str) -> DirectionFilter:
    if not isinstance(value, list) or len(value) not in (2, 3):
        raise SchemaError(path, "[direction, center] or [direction, center, tol]", value)
    direction = value[0]
    if direction not in DIRECTION_KEYWORDS:
        raise SchemaError(f"{path}[0]", f"one of {DIRECTION_KEYWORDS}", direction)
    for i, item in enumerate(value[1:], start=1):
        if not isinstance(item, (int, float)) or isinstance(item, bool):
            raise SchemaError(f"{path}[{i}]", "angle in degrees", item)
    tol = float(value[2]) if len(value) == 3 else None
    return DirectionFilter(axis=axis, direction=direction, center_deg=float(value[1]), tol_deg=tol)


def _filters_from(entry: dict, path: str) -> tuple[DirectionFilter, ...]:
    filters = []
    for axis in ("x", "y", "z"):
        key = f"filter_{axis}_dir"
        if key in entry:
            filters.append(_parse_filter(axis, entry[key], f"{path}.{key}"))
    return tuple(filters)


def _require(entry: dict, key: str, path: str):
    if key not in entry:
        raise SchemaError(f"{path}.{key}", "value present", "missing")
    return entry[key]


def _number(value, path: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise SchemaError(path, "number", value)
    return float(value)


def _vec3(value, path: str) -> tuple[float, float, float]:
    if not isinstance(value, list) or len(value) != 3:
        raise SchemaError(path, "3-vector", value)
    return tuple(_number(v, f"{path}[{i}]") for i, v in enumerate(value))


@dataclass(frozen=True)
class PickSpec:
    target: str
    filters: tuple[DirectionFilter, ...] = ()
    t_eps: float = 0.01
    o_eps_deg: float = 1.0
    close_wait_steps: int = 10
    post_grasp_offset_min: float = 0.1
    post_grasp_offset_max: float = 0.1
    direction_to_obj: str | None = None
    extras: dict = field(default_factory=dict)

    skill = "pick"


@dataclass(frozen=True)
class PlaceSpec:
    target: str
    container: str
    x_ratio_range: tuple[float, float] = (0.5, 0.5)
    y_ratio_range: tuple[float, float] = (0.5, 0.5)
    align_pick_obj_axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    align_place_obj_axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    align_obj_tol_deg: float = 0.0
    pre_place_z_offset: float = 0.1
    place_z_offset: float = 0.01
    t_eps: float = 0.01
    o_eps_deg: float = 1.0
    extras: dict = field(default_factory=dict)

    skill = "place"


@dataclass(frozen=True)
class PushSpec:
    target: str
    joint_id: str
    joint_delta: float
    standoff: float = 0.08
    contact_expansion: float = 1.5
    t_eps: float = 0.01
    o_eps_deg: float = 2.0
    extras: dict = field(default_factory=dict)

    skill = "push"


@dataclass(frozen=True)
class GotoPoseSpec:
    frame: str  # "world" | "robot"
    translation: tuple[float, float, float]
    quaternion: tuple[float, float, float, float]
    gripper_action: str | None = None  # open_gripper | close_gripper | None
    extras: dict = field(default_factory=dict)

    skill = "goto__pose"


@dataclass(frozen=True)
class GripperSpec:
    action_type: str  # "open" | "close"
    extras: dict = field(default_factory=dict)

    skill = "gripper__action"


@dataclass(frozen=True)
class HomeSpec:
    extras: dict = field(default_factory=dict)

    skill = "home"


SkillSpec = PickSpec | PlaceSpec | PushSpec | GotoPoseSpec | GripperSpec | HomeSpec

_RANGE_KEYS = {"x_ratio_range", "y_ratio_range"}


def _ratio_range(entry: dict, key: str, path: str) -> tuple[float, float]:
    value = entry.get(key, [0.5, 0.5])
    if not isinstance(value, list) or len(value) != 2:
        raise SchemaError(f"{path}.{key}", "[lo, hi]", value)
    lo, hi = (_number(v, f"{path}.{key}[{i}]") for i, v in enumerate(value))
    if not (0.0 <= lo <= hi <= 1.0):
        raise SchemaError(f"{path}.{key}", "0 <= lo <= hi <= 1", value)
    return lo, hi


def _extras(entry: dict, known: set) -> dict:
    return {k: v for k, v in entry.items() if k not in known}


def parse_skill(entry: dict, path: str) -> SkillSpec:
    """Parse one skill entry from a config step; raises SchemaError."""
    if not isinstance(entry, dict):
        raise SchemaError(path, "mapping with a 'name' key", entry)
    name = entry.get("name")
    if name in REJECTED_SKILLS:
        raise UnsupportedSkill(name, REJECTED_SKILLS[name])
    if name not in SKILL_NAMES:
        raise SchemaError(f"{path}.name", f"one of {SKILL_NAMES}", name)

    if name == "pick":
        objects = _require(entry, "objects", path)
        if not isinstance(objects, list) or len(objects) != 1:
            raise SchemaError(f"{path}.objects", "list of one object name", objects)
        offset_min = _number(entry.get("post_grasp_offset_min", 0.1), f"{path}.post_grasp_offset_min")
        offset_max = _number(entry.get("post_grasp_offset_max", offset_min), f"{path}.post_grasp_offset_max")
        if offset_max < offset_min:
            raise SchemaError(f"{path}.post_grasp_offset_max", ">= post_grasp_offset_min", offset_max)
        known = {
            "name", "objects", "filter_x_dir", "filter_y_dir", "filter_z_dir", "t_eps", "o_eps",
            "close_wait_steps", "post_grasp_offset_min", "post_grasp_offset_max", "direction_to_obj",
        }
        return PickSpec(
            target=str(objects[0]),
            filters=_filters_from(entry, path),
            t_eps=_number(entry.get("t_eps", 0.01), f"{path}.t_eps"),
            o_eps_deg=_number(entry.get("o_eps", 1.0), f"{path}.o_eps"),
            close_wait_steps=int(_number(entry.get("close_wait_steps", 10), f"{path}.close_wait_steps")),
            post_grasp_offset_min=offset_min,
            post_grasp_offset_max=offset_max,
            direction_to_obj=entry.get("direction_to_obj"),
            extras=_extras(entry, known),
        )

    if name == "place":
        objects = _require(entry, "objects", path)
        if not isinstance(objects, list) or len(objects) != 2:
            raise SchemaError(f"{path}.objects", "[held object, container]", objects)
        known = {
            "name", "objects", "x_ratio_range", "y_ratio_range", "align_pick_obj_axis",
            "align_place_obj_axis", "align_obj_tol", "pre_place_z_offset", "place_z_offset",
            "t_eps", "o_eps",
        }
        return PlaceSpec(
            target=str(objects[0]),
            container=str(objects[1]),
            x_ratio_range=_ratio_range(entry, "x_ratio_range", path),
            y_ratio_range=_ratio_range(entry, "y_ratio_range", path),
            align_pick_obj_axis=_vec3(entry.get("align_pick_obj_axis", [0, 0, 1]), f"{path}.align_pick_obj_axis"),
            align_place_obj_axis=_vec3(entry.get("align_place_obj_axis", [0, 0, 1]), f"{path}.align_place_obj_axis"),
            align_obj_tol_deg=_number(entry.get("align_obj_tol", 0.0), f"{path}.align_obj_tol"),
            pre_place_z_offset=_number(entry.get("pre_place_z_offset", 0.1), f"{path}.pre_place_z_offset"),
            place_z_offset=_number(entry.get("place_z_offset", 0.01), f"{path}.place_z_offset"),
            t_eps=_number(entry.get("t_eps", 0.01), f"{path}.t_eps"),
            o_eps_deg=_number(entry.get("o_eps", 1.0), f"{path}.o_eps"),
            extras=_extras(entry, known),
        )

    if name == "push":
        objects = _require(entry, "objects", path)
        if not isinstance(objects, list) or len(objects) != 1:
            raise SchemaError(f"{path}.objects", "list of one object name", objects)
        known = {"name", "objects", "joint_id", "joint_delta", "standoff", "contact_expansion", "t_eps", "o_eps"}
        return PushSpec(
            target=str(objects[0]),
            joint_id=str(_require(entry, "joint_id", path)),
            joint_delta=_number(_require(entry, "joint_delta", path), f"{path}.joint_delta"),
            standoff=_number(entry.get("standoff", 0.08), f"{path}.standoff"),
            contact_expansion=_number(entry.get("contact_expansion", 1.5), f"{path}.contact_expansion"),
            t_eps=_number(entry.get("t_eps", 0.01), f"{path}.t_eps"),
            o_eps_deg=_number(entry.get("o_eps", 2.0), f"{path}.o_eps"),
            extras=_extras(entry, known),
        )

    if name == "goto__pose":
        frame = entry.get("frame", "robot")
        if frame not in ("world", "robot"):
            raise SchemaError(f"{path}.frame", "'world' or 'robot'", frame)
        quat = entry.get("quaternion", [1, 0, 0, 0])
        if not isinstance(quat, list) or len(quat) != 4:
            raise SchemaError(f"{path}.quaternion", "4-vector (w, x, y, z)", quat)
        action = entry.get("gripper_action")
        if action not in (None, "open_gripper", "close_gripper"):
            raise SchemaError(f"{path}.gripper_action", "open_gripper or close_gripper", action)
        known = {"name", "frame", "translation", "quaternion", "gripper_action"}
        return GotoPoseSpec(
            frame=frame,
            translation=_vec3(_require(entry, "translation", path), f"{path}.translation"),
            quaternion=tuple(_number(v, f"{path}.quaternion[{i}]") for i, v in enumerate(quat)),
            gripper_action=action,
            extras=_extras(entry, known),
        )

    if name == "gripper__action":
        action = _require(entry, "action_type", path)
        if action not in ("open", "close"):
            raise SchemaError(f"{path}.action_type", "'open' or 'close'", action)
        return GripperSpec(action_type=action, extras=_extras(entry, {"name", "action_type"}))

    return HomeSpec(extras=_extras(entry, {"name"}))
