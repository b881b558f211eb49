"""Task-configuration documents: parse, resolve, validate, serialize.

The external format is a strict subset of YAML 1.2 (maps, sequences,
scalars; anchors and tags are rejected). A `defaults:` list at the top of
a document mounts include files from sibling directories, one level deep.
Reference placeholders like ``${robots.0.name}`` are substituted by
:func:`resolve_references`. Unknown keys are preserved verbatim so that
serialization round-trips byte-compatible content.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigSyntaxError, IncludeError, SchemaError, UnresolvedReference
from .geometry import quat_normalize
from .skill_specs import SkillSpec, parse_skill

_PLACEHOLDER = re.compile(r"\$\{([^}]+)\}")

# Quaternions in hand-written configs are often rounded; accept within this
# of unit norm and renormalize.
_QUAT_NORM_SLACK = 2e-2


class _StrictLoader(yaml.SafeLoader):
    pass


def _reject_alias(loader, *args):
    mark = loader.get_mark()
    raise ConfigSyntaxError("anchors/aliases are not part of the config format", mark.line + 1, mark.column + 1)


_StrictLoader.fetch_alias = _reject_alias
_StrictLoader.fetch_anchor = _reject_alias


def _load_yaml(text: str):
    try:
        return yaml.load(text, Loader=_StrictLoader)
    except ConfigSyntaxError:
        raise
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise ConfigSyntaxError(
            exc.problem or "invalid document",
            mark.line + 1 if mark else None,
            mark.column + 1 if mark else None,
        ) from exc
    except yaml.YAMLError as exc:
        raise ConfigSyntaxError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Typed sections
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnvMapSpec:
    library_id: str = "envmap_lib"
    apply_randomization: bool = False
    intensity_range: tuple[float, float] = (1.0, 1.0)
    rotation_range: tuple[float, float] = (0.0, 0.0)
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RobotSpec:
    name: str
    embodiment_id: str
    base_euler_deg: tuple[float, float, float] = (0.0, 0.0, 0.0)
    joint_home: dict = field(default_factory=dict)  # arm -> tuple of radians
    joint_home_std: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ObjectSpec:
    name: str
    asset_path: str | None = None
    category: str | None = None
    target_class: str = "RigidObject"
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    euler_deg: tuple[float, float, float] = (0.0, 0.0, 0.0)
    scale: tuple[float, float, float] = (1.0, 1.0, 1.0)
    apply_randomization: bool = False
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RegionSpec:
    object: str
    target: str
    random_type: str = "A_on_B_region_sampler"
    pos_min: tuple[float, float, float] = (0.0, 0.0, 0.0)
    pos_max: tuple[float, float, float] = (0.0, 0.0, 0.0)
    yaw_range_deg: tuple[float, float] = (0.0, 0.0)
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CameraIntrinsics:
    width: int
    height: int
    focal: float


@dataclass(frozen=True)
class CameraSpec:
    name: str
    translation: tuple[float, float, float]
    orientation: tuple[float, float, float, float]  # normalized (w, x, y, z)
    parent: str = "table"
    intrinsics: CameraIntrinsics | None = None
    apply_randomization: bool = False
    max_translation_noise: float = 0.0
    max_orientation_noise_deg: float = 0.0
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DataSpec:
    save_root_path: str = ""
    task_dir: str = ""
    language_instruction: str = ""
    detailed_language_instruction: str = ""
    version: str = ""
    max_episode_length: int = 1000
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SkillStep:
    """One step of a skill block; multiple arm keys execute in parallel."""

    arms: dict  # arm id -> tuple[SkillSpec, ...]


@dataclass(frozen=True)
class SkillBlock:
    robot: str
    steps: tuple[SkillStep, ...]


@dataclass
class TaskConfig:
    """Typed view plus the raw document tree it was built from."""

    name: str
    task_id: int
    env_map: EnvMapSpec
    robots: list[RobotSpec]
    objects: list[ObjectSpec]
    regions: list[RegionSpec]
    cameras: list[CameraSpec]
    skills: list[SkillBlock]
    data: DataSpec
    extras: dict
    raw: dict = field(repr=False)
    mounts: dict = field(repr=False, default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, TaskConfig):
            return NotImplemented
        return self.raw == other.raw

    def robot(self, name: str) -> RobotSpec:
        for r in self.robots:
            if r.name == name:
                return r
        raise KeyError(name)

    def object(self, name: str) -> ObjectSpec:
        for o in self.objects:
            if o.name == name:
                return o
        raise KeyError(name)

    def has_placeholders(self) -> bool:
        return _tree_has_placeholder(self.raw)


# ---------------------------------------------------------------------------
# Includes
# ---------------------------------------------------------------------------


def _mount_includes(tree: dict, config_root: str | Path | None) -> dict:
    """Resolve the `defaults:` list into a mount map {key: subtree}.

    Entries are either plain names (file `<name>.yaml` next to the config,
    mounted at `<name>`) or `<relpath>@<key>: <stem>` pairs in the style of
    layered config systems. `_self_` is an ordering marker and is ignored.
    Include files may not themselves contain `defaults:` (one level only).
    """
    defaults = tree.get("defaults")
    if defaults is None:
        return {}
    if not isinstance(defaults, list):
        raise SchemaError("defaults", "list of include entries", defaults)
    if config_root is None:
        raise IncludeError("document has a defaults list but no --config-root was given")
    root = Path(config_root)
    mounts: dict = {}
    for i, entry in enumerate(defaults):
        if entry == "_self_":
            continue
        if isinstance(entry, str):
            rel, key, stem = ".", entry, entry
        elif isinstance(entry, dict) and len(entry) == 1:
            spec, stem = next(iter(entry.items()))
            if "@" in spec:
                rel, key = spec.rsplit("@", 1)
            else:
                rel, key = ".", spec
        else:
            raise SchemaError(f"defaults[{i}]", "include name or {group@key: name}", entry)
        path = (root / rel / f"{stem}.yaml").resolve()
        if not path.is_file():
            raise IncludeError(f"include not found: {path}")
        subtree = _load_yaml(path.read_text(encoding="utf-8"))
        if isinstance(subtree, dict) and "defaults" in subtree:
            raise IncludeError(f"{path}: nested defaults are not supported (includes are one level deep)")
        mounts[key] = subtree
    return mounts


# ---------------------------------------------------------------------------
# Reference resolution
# ---------------------------------------------------------------------------


def _lookup(path: str, scopes: list) -> object:
    for scope in scopes:
        node = scope
        ok = True
        for part in path.split("."):
            if isinstance(node, list):
                try:
                    node = node[int(part)]
                except (ValueError, IndexError):
                    ok = False
                    break
            elif isinstance(node, dict) and part in node:
                node = node[part]
            else:
                ok = False
                break
        if ok:
            return node
    raise UnresolvedReference(path)


def _substitute(value: str, scopes: list):
    full = _PLACEHOLDER.fullmatch(value.strip())
    if full:
        return _lookup(full.group(1), scopes)

    def repl(m: re.Match) -> str:
        target = _lookup(m.group(1), scopes)
        if isinstance(target, (dict, list)):
            raise UnresolvedReference(m.group(1))
        return str(target)

    return _PLACEHOLDER.sub(repl, value)


def _resolve_tree(node, scopes: list):
    if isinstance(node, dict):
        return {k: _resolve_tree(v, scopes) for k, v in node.items()}
    if isinstance(node, list):
        return [_resolve_tree(v, scopes) for v in node]
    if isinstance(node, str) and _PLACEHOLDER.search(node):
        return _substitute(node, scopes)
    return node


def _tree_has_placeholder(node) -> bool:
    if isinstance(node, dict):
        return any(_tree_has_placeholder(v) for v in node.values())
    if isinstance(node, list):
        return any(_tree_has_placeholder(v) for v in node)
    return isinstance(node, str) and bool(_PLACEHOLDER.search(node))


# ---------------------------------------------------------------------------
# Typed construction
# ---------------------------------------------------------------------------


def _is_ph(value) -> bool:
    return isinstance(value, str) and bool(_PLACEHOLDER.search(value))


def _num(value, path: str, default=None) -> float:
    if value is None and default is not None:
        return default
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, "number", value)
    return float(value)


def _vec(value, n: int, path: str) -> tuple:
    if not isinstance(value, list) or len(value) != n:
        raise SchemaError(path, f"{n}-vector", value)
    return tuple(_num(v, f"{path}[{i}]") for i, v in enumerate(value))


def _pair(value, path: str) -> tuple[float, float]:
    lo, hi = _vec(value, 2, path)
    if lo > hi:
        raise SchemaError(path, "lo <= hi", value)
    return lo, hi


def _str_of(value, path: str) -> str:
    if not isinstance(value, str):
        raise SchemaError(path, "string", value)
    return value


def _extras_of(entry: dict, known: set) -> dict:
    return {k: v for k, v in entry.items() if k not in known}


def _env_map_of(entry, path: str) -> EnvMapSpec:
    if entry is None:
        return EnvMapSpec()
    if not isinstance(entry, dict):
        raise SchemaError(path, "mapping", entry)
    known = {"envmap_lib", "apply_randomization", "intensity_range", "rotation_range"}
    return EnvMapSpec(
        library_id=str(entry.get("envmap_lib", "envmap_lib")),
        apply_randomization=bool(entry.get("apply_randomization", False)),
        intensity_range=_pair(entry.get("intensity_range", [1.0, 1.0]), f"{path}.intensity_range"),
        rotation_range=_pair(entry.get("rotation_range", [0.0, 0.0]), f"{path}.rotation_range"),
        extras=_extras_of(entry, known),
    )


def _embodiment_key(entry: dict) -> str:
    if "embodiment" in entry:
        return str(entry["embodiment"])
    return str(entry.get("path", entry.get("target_class", "")))


def _homes_of(entry: dict, path: str) -> tuple[dict, dict]:
    home, std = {}, {}
    for arm in ("left", "right"):
        hk, sk = f"{arm}_joint_home", f"{arm}_joint_home_std"
        if hk in entry:
            value = entry[hk]
            if not isinstance(value, list):
                raise SchemaError(f"{path}.{hk}", "joint vector", value)
            home[arm] = tuple(_num(v, f"{path}.{hk}[{i}]") for i, v in enumerate(value))
        if sk in entry:
            value = entry[sk]
            if not isinstance(value, list):
                raise SchemaError(f"{path}.{sk}", "joint vector", value)
            vec = tuple(_num(v, f"{path}.{sk}[{i}]") for i, v in enumerate(value))
            if any(v < 0 for v in vec):
                raise SchemaError(f"{path}.{sk}", "std entries >= 0", value)
            std[arm] = vec
    for arm, vec in std.items():
        if arm in home and len(home[arm]) != len(vec):
            raise SchemaError(f"{path}.{arm}_joint_home_std", f"length {len(home[arm])}", list(vec))
    return home, std


def _robot_of(entry, path: str) -> RobotSpec:
    if not isinstance(entry, dict):
        raise SchemaError(path, "mapping", entry)
    home, std = _homes_of(entry, path)
    known = {
        "name", "embodiment", "path", "target_class", "euler", "robot_file",
        "left_joint_home", "right_joint_home", "left_joint_home_std", "right_joint_home_std",
    }
    return RobotSpec(
        name=_str_of(entry.get("name"), f"{path}.name"),
        embodiment_id=_embodiment_key(entry),
        base_euler_deg=_vec(entry.get("euler", [0.0, 0.0, 0.0]), 3, f"{path}.euler"),
        joint_home=home,
        joint_home_std=std,
        extras=_extras_of(entry, known),
    )


def _object_of(entry, path: str) -> ObjectSpec:
    if not isinstance(entry, dict):
        raise SchemaError(path, "mapping", entry)
    scale = _vec(entry.get("scale", [1.0, 1.0, 1.0]), 3, f"{path}.scale")
    if any(s <= 0 for s in scale):
        raise SchemaError(f"{path}.scale", "components > 0", list(scale))
    target_class = str(entry.get("target_class", "RigidObject"))
    known = {
        "name", "path", "category", "target_class", "translation", "euler", "scale",
        "apply_randomization",
    }
    return ObjectSpec(
        name=_str_of(entry.get("name"), f"{path}.name"),
        asset_path=str(entry["path"]) if "path" in entry else None,
        category=str(entry["category"]) if "category" in entry else None,
        target_class=target_class,
        translation=_vec(entry.get("translation", [0.0, 0.0, 0.0]), 3, f"{path}.translation"),
        euler_deg=_vec(entry.get("euler", [0.0, 0.0, 0.0]), 3, f"{path}.euler"),
        scale=scale,
        apply_randomization=bool(entry.get("apply_randomization", False)),
        extras=_extras_of(entry, known),
    )


def _region_of(entry, path: str) -> RegionSpec:
    if not isinstance(entry, dict):
        raise SchemaError(path, "mapping", entry)
    cfg = entry.get("random_config", {})
    if not isinstance(cfg, dict):
        raise SchemaError(f"{path}.random_config", "mapping", cfg)
    pos_range = cfg.get("pos_range", [[0, 0, 0], [0, 0, 0]])
    if not isinstance(pos_range, list) or len(pos_range) != 2:
        raise SchemaError(f"{path}.random_config.pos_range", "[min 3-vector, max 3-vector]", pos_range)
    pos_min = _vec(pos_range[0], 3, f"{path}.random_config.pos_range[0]")
    pos_max = _vec(pos_range[1], 3, f"{path}.random_config.pos_range[1]")
    if any(lo > hi for lo, hi in zip(pos_min, pos_max)):
        raise SchemaError(f"{path}.random_config.pos_range", "min <= max componentwise", pos_range)
    yaw = _pair(cfg.get("yaw_rotation", [0.0, 0.0]), f"{path}.random_config.yaw_rotation")
    known = {"object", "target", "random_type", "random_config"}
    return RegionSpec(
        object=_str_of(entry.get("object"), f"{path}.object"),
        target=_str_of(entry.get("target"), f"{path}.target"),
        random_type=str(entry.get("random_type", "A_on_B_region_sampler")),
        pos_min=pos_min,
        pos_max=pos_max,
        yaw_range_deg=yaw,
        extras=_extras_of(entry, known),
    )


def _intrinsics_of(entry, path: str) -> CameraIntrinsics | None:
    if entry is None or _is_ph(entry):
        return None
    if not isinstance(entry, dict):
        raise SchemaError(path, "mapping with width/height/focal", entry)
    width = int(_num(entry.get("width"), f"{path}.width"))
    height = int(_num(entry.get("height"), f"{path}.height"))
    focal = _num(entry.get("focal"), f"{path}.focal")
    if width <= 0 or height <= 0 or focal <= 0:
        raise SchemaError(path, "width, height, focal > 0", entry)
    return CameraIntrinsics(width=width, height=height, focal=focal)


def _camera_of(entry, path: str) -> CameraSpec:
    if not isinstance(entry, dict):
        raise SchemaError(path, "mapping", entry)
    quat = _vec(entry.get("orientation", [1.0, 0.0, 0.0, 0.0]), 4, f"{path}.orientation")
    norm = float(np.linalg.norm(quat))
    if abs(norm - 1.0) > _QUAT_NORM_SLACK:
        raise SchemaError(f"{path}.orientation", "unit quaternion", list(quat))
    unit = tuple(float(v) for v in quat_normalize(np.array(quat)))
    t_noise = _num(entry.get("max_translation_noise", 0.0), f"{path}.max_translation_noise")
    o_noise = _num(entry.get("max_orientation_noise", 0.0), f"{path}.max_orientation_noise")
    if t_noise < 0 or o_noise < 0:
        raise SchemaError(f"{path}.max_translation_noise", "noise bounds >= 0", [t_noise, o_noise])
    parent = entry.get("parent", "table")
    known = {
        "name", "translation", "orientation", "parent", "params", "camera_axes",
        "apply_randomization", "max_translation_noise", "max_orientation_noise",
    }
    return CameraSpec(
        name=_str_of(entry.get("name"), f"{path}.name"),
        translation=_vec(entry.get("translation", [0.0, 0.0, 0.0]), 3, f"{path}.translation"),
        orientation=unit,
        parent=parent if isinstance(parent, str) else _str_of(parent, f"{path}.parent"),
        intrinsics=_intrinsics_of(entry.get("params"), f"{path}.params"),
        apply_randomization=bool(entry.get("apply_randomization", False)),
        max_translation_noise=t_noise,
        max_orientation_noise_deg=o_noise,
        extras=_extras_of(entry, known),
    )


def _data_of(entry, path: str) -> DataSpec:
    if entry is None:
        return DataSpec()
    if not isinstance(entry, dict):
        raise SchemaError(path, "mapping", entry)
    max_len = int(_num(entry.get("max_episode_length", 1000), f"{path}.max_episode_length"))
    if max_len <= 0:
        raise SchemaError(f"{path}.max_episode_length", "> 0", max_len)
    known = {
        "save_root_path", "task_dir", "language_instruction", "detailed_language_instruction",
        "version", "max_episode_length",
    }
    return DataSpec(
        save_root_path=str(entry.get("save_root_path", "")),
        task_dir=str(entry.get("task_dir", "")),
        language_instruction=str(entry.get("language_instruction", "")),
        detailed_language_instruction=str(entry.get("detailed_language_instruction", "")),
        version=str(entry.get("version", "")),
        max_episode_length=max_len,
        extras=_extras_of(entry, known),
    )


def _skills_of(entry, path: str) -> list[SkillBlock]:
    if entry is None:
        return []
    if not isinstance(entry, list):
        raise SchemaError(path, "list of per-robot skill blocks", entry)
    blocks: list[SkillBlock] = []
    seen = set()
    for i, block in enumerate(entry):
        if not isinstance(block, dict) or len(block) != 1:
            raise SchemaError(f"{path}[{i}]", "single-key mapping {robot: steps}", block)
        robot, steps_raw = next(iter(block.items()))
        if robot in seen:
            raise SchemaError(f"{path}[{i}]", "at most one skills entry per robot", robot)
        seen.add(robot)
        if not isinstance(steps_raw, list):
            raise SchemaError(f"{path}[{i}].{robot}", "list of steps", steps_raw)
        steps = []
        for j, step in enumerate(steps_raw):
            if not isinstance(step, dict) or not step:
                raise SchemaError(f"{path}[{i}].{robot}[{j}]", "mapping arm -> skill list", step)
            arms: dict[str, tuple[SkillSpec, ...]] = {}
            for arm, skills in step.items():
                if arm not in ("left", "right"):
                    raise SchemaError(f"{path}[{i}].{robot}[{j}]", "arm key 'left' or 'right'", arm)
                if not isinstance(skills, list):
                    raise SchemaError(f"{path}[{i}].{robot}[{j}].{arm}", "list of skills", skills)
                arms[arm] = tuple(
                    parse_skill(s, f"{path}[{i}].{robot}[{j}].{arm}[{k}]") for k, s in enumerate(skills)
                )
            steps.append(SkillStep(arms=arms))
        blocks.append(SkillBlock(robot=str(robot), steps=tuple(steps)))
    return blocks


_TOP_KNOWN = {
    "defaults", "name", "task_id", "env_map", "robots", "objects", "regions",
    "cameras", "skills", "data",
}


def _build(tree: dict, mounts: dict) -> TaskConfig:
    task_id = tree.get("task_id", 0)
    if isinstance(task_id, bool) or not isinstance(task_id, int) or task_id < 0:
        raise SchemaError("task_id", "nonnegative integer", task_id)

    def listing(key: str) -> list:
        value = tree.get(key, [])
        if value is None:
            return []
        if not isinstance(value, list):
            raise SchemaError(key, "sequence", value)
        return value

    return TaskConfig(
        name=str(tree.get("name", "")),
        task_id=task_id,
        env_map=_env_map_of(tree.get("env_map"), "env_map"),
        robots=[_robot_of(r, f"robots[{i}]") for i, r in enumerate(listing("robots"))],
        objects=[_object_of(o, f"objects[{i}]") for i, o in enumerate(listing("objects"))],
        regions=[_region_of(r, f"regions[{i}]") for i, r in enumerate(listing("regions"))],
        cameras=[_camera_of(c, f"cameras[{i}]") for i, c in enumerate(listing("cameras"))],
        skills=_skills_of(tree.get("skills"), "skills"),
        data=_data_of(tree.get("data"), "data"),
        extras={k: v for k, v in tree.items() if k not in _TOP_KNOWN},
        raw=tree,
        mounts=mounts,
    )


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def parse_task_config(text: str, config_root: str | Path | None = None) -> TaskConfig:
    """Parse a task-config document. Placeholders are left unresolved."""
    tree = _load_yaml(text)
    if not isinstance(tree, dict):
        raise SchemaError("<document>", "top-level mapping", tree)
    mounts = _mount_includes(tree, config_root)
    return _build(tree, mounts)


def load_task_config(path: str | Path, config_root: str | Path | None = None) -> TaskConfig:
    """Parse a config file; the file's directory is the default include root."""
    path = Path(path)
    root = Path(config_root) if config_root is not None else path.parent
    return parse_task_config(path.read_text(encoding="utf-8"), config_root=root)


def resolve_references(cfg: TaskConfig) -> TaskConfig:
    """Substitute every ``${path}`` placeholder. Idempotent on resolved configs."""
    scopes = [cfg.mounts, cfg.raw]
    tree = cfg.raw
    for _ in range(10):
        if not _tree_has_placeholder(tree):
            break
        tree = _resolve_tree(tree, [cfg.mounts, tree])
    else:
        raise UnresolvedReference("placeholder cycle detected")
    del scopes
    return _build(tree, cfg.mounts)


def serialize_config(cfg: TaskConfig) -> str:
    """Emit a document that re-parses to a structurally equal config."""
    return yaml.safe_dump(cfg.raw, sort_keys=False, default_flow_style=None, allow_unicode=True)


@dataclass(frozen=True)
class Finding:
    code: str
    path: str
    message: str


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def add(self, code: str, path: str, message: str):
        self.findings.append(Finding(code, path, message))


def _parent_head(parent: str) -> str:
    return parent.split("/", 1)[0]


def validate_config(cfg: TaskConfig, registry) -> ValidationReport:
    """Cross-check a resolved config against an asset registry.

    Findings are data, not exceptions; an empty report means the config can
    be built against this registry.
    """
    report = ValidationReport()
    if cfg.has_placeholders():
        report.add("UnresolvedPlaceholder", "<document>", "config contains unresolved ${...} placeholders")
        return report

    names = {"table"}
    names.update(r.name for r in cfg.robots)
    names.update(o.name for o in cfg.objects)

    embodiments = {}
    for i, robot in enumerate(cfg.robots):
        record = registry.find(robot.embodiment_id) if registry is not None else None
        if record is None or record.kind != "embodiment":
            report.add("MissingAsset", f"robots[{i}]", f"embodiment '{robot.embodiment_id}' not in registry")
            continue
        embodiments[robot.name] = record
        arms = {c.arm_id: c for c in record.chains}
        for arm, home in robot.joint_home.items():
            if arm not in arms:
                report.add("ArmUnavailable", f"robots[{i}].{arm}_joint_home", f"embodiment has no '{arm}' arm")
            elif len(home) != len(arms[arm].joints):
                report.add(
                    "HomeDimensionMismatch",
                    f"robots[{i}].{arm}_joint_home",
                    f"expected {len(arms[arm].joints)} joints, got {len(home)}",
                )

    for i, obj in enumerate(cfg.objects):
        found = None
        if registry is not None and obj.asset_path:
            found = registry.find(obj.asset_path)
        if found is None and registry is not None and obj.category:
            members = registry.category_members(obj.category)
            found = members[0] if members else None
        if found is None:
            key = obj.asset_path or obj.category or obj.name
            report.add("MissingAsset", f"objects[{i}]", f"'{key}' not in registry")

    for i, region in enumerate(cfg.regions):
        if region.object not in names:
            report.add("UnknownReference", f"regions[{i}].object", f"'{region.object}' is not declared")
        if region.target not in names:
            report.add("UnknownReference", f"regions[{i}].target", f"'{region.target}' is not declared")

    for i, cam in enumerate(cfg.cameras):
        if cam.intrinsics is None:
            report.add("MissingIntrinsics", f"cameras[{i}].params", "camera has no intrinsics")
        head = _parent_head(cam.parent)
        if head not in names:
            report.add("UnknownReference", f"cameras[{i}].parent", f"'{head}' is not declared")

    robot_names = {r.name for r in cfg.robots}
    for bi, block in enumerate(cfg.skills):
        if block.robot not in robot_names:
            report.add("UnknownReference", f"skills[{bi}]", f"robot '{block.robot}' is not declared")
            continue
        emb = embodiments.get(block.robot)
        arm_ids = {c.arm_id for c in emb.chains} if emb is not None else None
        for si, step in enumerate(block.steps):
            for arm, skills in step.arms.items():
                if arm_ids is not None and arm not in arm_ids:
                    report.add("ArmUnavailable", f"skills[{bi}].{block.robot}[{si}]", f"embodiment has no '{arm}' arm")
                for ki, spec in enumerate(skills):
                    for ref in _skill_object_refs(spec):
                        if ref not in names:
                            report.add(
                                "UnknownReference",
                                f"skills[{bi}].{block.robot}[{si}].{arm}[{ki}]",
                                f"object '{ref}' is not declared",
                            )
    return report


def _skill_object_refs(spec: SkillSpec):
    refs = []
    if hasattr(spec, "target"):
        refs.append(spec.target)
    if hasattr(spec, "container"):
        refs.append(spec.container)
    return refs
