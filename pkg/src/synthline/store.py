"""Episode store.

Layout (all formats open and byte-stable):

    <root>/meta/info.json                     fps, schema, counts
    <root>/episodes/ep_<index:06>/frames.csv  one row per step
    <root>/episodes/ep_<index:06>/meta.json   episode metadata
    <root>/episodes/ep_<index:06>/<camera>/frame_<t:06>.png

frames.csv columns, in order: timestamp, per-arm joint states, per-arm
actions (next-step joint targets), per-arm gripper, per-arm EE pose
(x y z qw qx qy qz), per-camera pose. Floats are printed with 9
significant digits and LF line endings; JSON is UTF-8 with sorted keys.
Episode writes are atomic (temp dir + rename) and an existing index is an
error, which gives the pipeline its exactly-once write contract.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AlreadyExists, CorruptEpisode, NotFound
from .geometry import Pose
from .render import Image, png_decode, png_encode

_FMT = "%.9g"

# Reserved channel names: accepted in schemas, never emitted.
RESERVED_CHANNELS = ("depth", "bbox")


@dataclass
class CameraTrack:
    name: str
    width: int
    height: int
    focal: float
    parent: str
    offset: Pose
    poses: list  # per-frame world Pose
    frames: list | None = None  # list[Image] when rendered/loaded


@dataclass
class ArmTrackData:
    joints: np.ndarray  # (T, n)
    actions: np.ndarray  # (T, n); actions[t] = joints[t+1], last row holds
    gripper: np.ndarray  # (T,)
    ee_poses: list  # per-frame world Pose


@dataclass
class EpisodeRecord:
    episode_index: int
    task: str
    language_instruction: str
    detailed_language_instruction: str
    fps: float
    arms: dict  # arm id -> ArmTrackData
    cameras: list  # list[CameraTrack]
    metadata: dict
    valid: bool = True

    @property
    def frame_count(self) -> int:
        return len(next(iter(self.arms.values())).joints)

    def timestamps(self) -> np.ndarray:
        return np.arange(self.frame_count) / self.fps


def actions_from_states(states: np.ndarray) -> np.ndarray:
    """Next-step joint targets; the final action holds the final state."""
    actions = np.empty_like(states)
    actions[:-1] = states[1:]
    actions[-1] = states[-1]
    return actions


def episode_dir(root: str | Path, index: int) -> Path:
    return Path(root) / "episodes" / f"ep_{index:06d}"


def _columns(ep: EpisodeRecord) -> list[str]:
    cols = ["timestamp"]
    for arm in sorted(ep.arms):
        n = ep.arms[arm].joints.shape[1]
        cols += [f"state_{arm}_{j}" for j in range(n)]
    for arm in sorted(ep.arms):
        n = ep.arms[arm].joints.shape[1]
        cols += [f"action_{arm}_{j}" for j in range(n)]
    for arm in sorted(ep.arms):
        cols.append(f"gripper_{arm}")
    for arm in sorted(ep.arms):
        cols += [f"ee_{arm}_{c}" for c in ("x", "y", "z", "qw", "qx", "qy", "qz")]
    for cam in sorted(ep.cameras, key=lambda c: c.name):
        cols += [f"cam_{cam.name}_{c}" for c in ("x", "y", "z", "qw", "qx", "qy", "qz")]
    return cols


def _row_values(ep: EpisodeRecord, t: int) -> list[float]:
    values = [t / ep.fps]
    for arm in sorted(ep.arms):
        values += list(ep.arms[arm].joints[t])
    for arm in sorted(ep.arms):
        values += list(ep.arms[arm].actions[t])
    for arm in sorted(ep.arms):
        values.append(float(ep.arms[arm].gripper[t]))
    for arm in sorted(ep.arms):
        pose = ep.arms[arm].ee_poses[t]
        values += list(pose.translation) + list(pose.rotation)
    for cam in sorted(ep.cameras, key=lambda c: c.name):
        pose = cam.poses[t]
        values += list(pose.translation) + list(pose.rotation)
    return values


def write_episode(ep: EpisodeRecord, root: str | Path) -> Path:
    """Write one episode; raises AlreadyExists for a repeated index."""
    if ep.frame_count < 1:
        raise ValueError("episode needs at least one frame")
    for arm, data in ep.arms.items():
        if not np.array_equal(data.actions[:-1], data.joints[1:]):
            raise ValueError(f"arm '{arm}': actions must equal next-step states")
    root = Path(root)
    final = episode_dir(root, ep.episode_index)
    if final.exists():
        raise AlreadyExists(str(final))
    final.parent.mkdir(parents=True, exist_ok=True)
    tmp = final.parent / f".tmp-{final.name}-{os.getpid()}"
    if tmp.exists():
        _rmtree(tmp)
    tmp.mkdir(parents=True)

    cols = _columns(ep)
    with open(tmp / "frames.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for t in range(ep.frame_count):
            fh.write(",".join(_FMT % v for v in _row_values(ep, t)) + "\n")

    meta = {
        "episode_index": ep.episode_index,
        "task": ep.task,
        "language_instruction": ep.language_instruction,
        "detailed_language_instruction": ep.detailed_language_instruction,
        "fps": ep.fps,
        "frame_count": ep.frame_count,
        "arms": {arm: int(ep.arms[arm].joints.shape[1]) for arm in sorted(ep.arms)},
        "cameras": [
            {
                "name": cam.name,
                "width": cam.width,
                "height": cam.height,
                "focal": cam.focal,
                "parent": cam.parent,
                "offset_translation": [float(v) for v in cam.offset.translation],
                "offset_quaternion": [float(v) for v in cam.offset.rotation],
            }
            for cam in sorted(ep.cameras, key=lambda c: c.name)
        ],
        "valid": ep.valid,
        "metadata": ep.metadata,
    }
    (tmp / "meta.json").write_text(
        json.dumps(meta, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )

    for cam in ep.cameras:
        cam_dir = tmp / cam.name
        cam_dir.mkdir()
        if cam.frames is None or len(cam.frames) != ep.frame_count:
            raise ValueError(f"camera '{cam.name}' is missing rendered frames")
        for t, image in enumerate(cam.frames):
            (cam_dir / f"frame_{t:06d}.png").write_bytes(png_encode(image))

    try:
        os.rename(tmp, final)
    except OSError as exc:
        _rmtree(tmp)
        raise AlreadyExists(str(final)) from exc
    return final


def _rmtree(path: Path):
    for child in sorted(path.rglob("*"), reverse=True):
        if child.is_file():
            child.unlink()
        else:
            child.rmdir()
    path.rmdir()


def _parse_pose(values: list[float]) -> Pose:
    return Pose(np.array(values[:3]), np.array(values[3:7]))


def read_episode(root: str | Path, index: int, strict_frames: bool = True) -> EpisodeRecord:
    """Inverse of write_episode.

    With strict_frames=False, missing frame images become None entries
    instead of raising (used by validate_store to classify them).
    """
    folder = episode_dir(root, index)
    if not folder.is_dir():
        raise NotFound(str(folder))
    try:
        meta = json.loads((folder / "meta.json").read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptEpisode(f"meta.json unreadable: {exc}") from exc
    try:
        lines = (folder / "frames.csv").read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CorruptEpisode(f"frames.csv unreadable: {exc}") from exc
    if not lines:
        raise CorruptEpisode("frames.csv is empty")
    header = lines[0].split(",")
    rows = []
    for i, line in enumerate(lines[1:]):
        parts = line.split(",")
        if len(parts) != len(header):
            raise CorruptEpisode(f"frames.csv row {i} has {len(parts)} fields, expected {len(header)}")
        rows.append([float(v) for v in parts])
    if len(rows) != meta.get("frame_count"):
        raise CorruptEpisode(
            f"frames.csv has {len(rows)} rows, meta says {meta.get('frame_count')}"
        )
    table = {name: np.array([r[i] for r in rows]) for i, name in enumerate(header)}

    arms = {}
    for arm, n in meta.get("arms", {}).items():
        joints = np.column_stack([table[f"state_{arm}_{j}"] for j in range(n)])
        actions = np.column_stack([table[f"action_{arm}_{j}"] for j in range(n)])
        ee = [
            _parse_pose([table[f"ee_{arm}_{c}"][t] for c in ("x", "y", "z", "qw", "qx", "qy", "qz")])
            for t in range(len(rows))
        ]
        arms[arm] = ArmTrackData(joints=joints, actions=actions, gripper=table[f"gripper_{arm}"], ee_poses=ee)

    cameras = []
    for cam in meta.get("cameras", []):
        name = cam["name"]
        poses = [
            _parse_pose([table[f"cam_{name}_{c}"][t] for c in ("x", "y", "z", "qw", "qx", "qy", "qz")])
            for t in range(len(rows))
        ]
        frames = []
        for t in range(len(rows)):
            frame_path = folder / name / f"frame_{t:06d}.png"
            if not frame_path.is_file():
                if strict_frames:
                    raise CorruptEpisode(f"missing frame image {frame_path.name} for camera {name}")
                frames.append(None)
            else:
                frames.append(png_decode(frame_path.read_bytes()))
        cameras.append(
            CameraTrack(
                name=name,
                width=int(cam["width"]),
                height=int(cam["height"]),
                focal=float(cam["focal"]),
                parent=cam["parent"],
                offset=Pose(np.array(cam["offset_translation"]), np.array(cam["offset_quaternion"])),
                poses=poses,
                frames=frames,
            )
        )

    return EpisodeRecord(
        episode_index=int(meta["episode_index"]),
        task=str(meta["task"]),
        language_instruction=str(meta["language_instruction"]),
        detailed_language_instruction=str(meta["detailed_language_instruction"]),
        fps=float(meta["fps"]),
        arms=arms,
        cameras=cameras,
        metadata=meta.get("metadata", {}),
        valid=bool(meta.get("valid", True)),
    )


def list_episode_indices(root: str | Path) -> list[int]:
    episodes = Path(root) / "episodes"
    if not episodes.is_dir():
        return []
    out = []
    for child in sorted(episodes.iterdir()):
        if child.is_dir() and child.name.startswith("ep_"):
            out.append(int(child.name[3:]))
    return out


def finalize_store(root: str | Path, fps: float):
    """Write meta/info.json from a full scan (call once per run)."""
    root = Path(root)
    indices = list_episode_indices(root)
    total_frames = 0
    camera_names: set[str] = set()
    columns: list[str] = []
    for index in indices:
        meta = json.loads((episode_dir(root, index) / "meta.json").read_text(encoding="utf-8"))
        total_frames += int(meta["frame_count"])
        camera_names.update(c["name"] for c in meta.get("cameras", []))
        if not columns:
            header = (episode_dir(root, index) / "frames.csv").read_text(encoding="utf-8").split("\n", 1)[0]
            columns = header.split(",")
    info = {
        "fps": fps,
        "total_episodes": len(indices),
        "total_frames": total_frames,
        "columns": columns,
        "camera_names": sorted(camera_names),
        "reserved_channels": list(RESERVED_CHANNELS),
    }
    meta_dir = root / "meta"
    meta_dir.mkdir(parents=True, exist_ok=True)
    (meta_dir / "info.json").write_text(json.dumps(info, sort_keys=True, indent=1) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TaskStats:
    task: str
    per_embodiment: dict  # embodiment -> trajectory count
    trajectories: int
    frames: int


@dataclass(frozen=True)
class DatasetStats:
    rows: tuple  # TaskStats sorted by task name
    embodiments: tuple
    total_trajectories: int
    total_frames: int
    fps: float
    total_hours: float


def compute_stats(root: str | Path) -> DatasetStats:
    """Full-scan dataset statistics (per task, per embodiment, totals)."""
    root = Path(root)
    per_task: dict[str, dict] = {}
    frames_per_task: dict[str, int] = {}
    embodiments: set[str] = set()
    total_frames = 0
    fps = 30.0
    for index in list_episode_indices(root):
        meta = json.loads((episode_dir(root, index) / "meta.json").read_text(encoding="utf-8"))
        task = meta["task"]
        emb = meta.get("metadata", {}).get("embodiment", "unknown")
        fps = float(meta.get("fps", fps))
        embodiments.add(emb)
        per_task.setdefault(task, {})
        per_task[task][emb] = per_task[task].get(emb, 0) + 1
        frames_per_task[task] = frames_per_task.get(task, 0) + int(meta["frame_count"])
        total_frames += int(meta["frame_count"])
    rows = tuple(
        TaskStats(
            task=task,
            per_embodiment=dict(sorted(per_task[task].items())),
            trajectories=sum(per_task[task].values()),
            frames=frames_per_task[task],
        )
        for task in sorted(per_task)
    )
    total_traj = sum(r.trajectories for r in rows)
    return DatasetStats(
        rows=rows,
        embodiments=tuple(sorted(embodiments)),
        total_trajectories=total_traj,
        total_frames=total_frames,
        fps=fps,
        total_hours=total_frames / fps / 3600.0 if fps > 0 else 0.0,
    )


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StoreFinding:
    code: str
    where: str
    message: str


@dataclass
class StoreReport:
    findings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def add(self, code: str, where: str, message: str):
        self.findings.append(StoreFinding(code, where, message))


def validate_store(root: str | Path) -> StoreReport:
    """Check every episode invariant plus store-level index integrity."""
    root = Path(root)
    report = StoreReport()
    indices = list_episode_indices(root)
    total_frames = 0
    for index in indices:
        where = f"ep_{index:06d}"
        try:
            ep = read_episode(root, index, strict_frames=False)
        except CorruptEpisode as exc:
            report.add("CorruptEpisode", where, str(exc))
            continue
        total_frames += ep.frame_count
        if ep.episode_index != index:
            report.add("IndexMismatch", where, f"meta index {ep.episode_index} != directory {index}")
        for arm, data in ep.arms.items():
            if not np.array_equal(data.actions[:-1], data.joints[1:]):
                report.add("ActionStateMismatch", f"{where}.{arm}", "action[t] != state[t+1]")
            if not np.array_equal(data.actions[-1], data.joints[-1]):
                report.add("ActionStateMismatch", f"{where}.{arm}", "final action must hold final state")
        ts = ep.timestamps()
        folder = episode_dir(root, index)
        lines = (folder / "frames.csv").read_text(encoding="utf-8").splitlines()
        stored_ts = np.array([float(line.split(",", 1)[0]) for line in lines[1:]])
        if not np.allclose(stored_ts, ts, atol=1e-9):
            report.add("TimestampMismatch", where, "timestamps are not t/fps")
        for cam in ep.cameras:
            if cam.width <= 0 or cam.height <= 0 or cam.focal <= 0:
                report.add("BadIntrinsics", f"{where}.{cam.name}", "nonpositive intrinsics")
            for t, frame in enumerate(cam.frames or []):
                if frame is None:
                    report.add("MissingFrame", f"{where}.{cam.name}[{t}]", "frame image missing")
                elif frame.width != cam.width or frame.height != cam.height:
                    report.add(
                        "FrameSizeMismatch",
                        f"{where}.{cam.name}[{t}]",
                        f"{frame.width}x{frame.height} != {cam.width}x{cam.height}",
                    )
    info_path = root / "meta" / "info.json"
    if info_path.is_file():
        info = json.loads(info_path.read_text(encoding="utf-8"))
        if info.get("total_episodes") != len(indices):
            report.add("IndexIntegrity", "meta/info.json", "episode count does not match scan")
        if info.get("total_frames") != total_frames:
            report.add("IndexIntegrity", "meta/info.json", "frame count does not match scan")
    return report


def store_digest(root: str | Path) -> str:
    """Recursive sha256 over meta/ and episodes/ (paths + bytes)."""
    root = Path(root)
    digest = hashlib.sha256()
    for sub in ("meta", "episodes"):
        base = root / sub
        if not base.is_dir():
            continue
        for path in sorted(base.rglob("*")):
            if path.is_file() and not path.name.startswith("."):
                digest.update(str(path.relative_to(root)).encode("utf-8"))
                digest.update(b"\x00")
                digest.update(path.read_bytes())
                digest.update(b"\x01")
    return digest.hexdigest()
