"""Domain-randomization samplers.

Every sampler is bounded (outputs verifiably inside the declared range)
and pure given an explicit generator. With randomization disabled,
samplers return deterministic canonical values instead of skipping fields,
so downstream code always receives complete values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config_dsl import CameraSpec, EnvMapSpec, RegionSpec
from .errors import DimensionMismatch
from .geometry import Pose, quat_from_axis_angle, quat_mul

ENV_MAP_LIBRARY_SIZE = 174


@dataclass(frozen=True)
class Lighting:
    env_map_id: int
    intensity: float
    rotation_deg: float


def sample_region_pose(spec: RegionSpec, rng: np.random.Generator) -> Pose:
    """Pose relative to the region target: uniform box translation, uniform yaw."""
    lo = np.array(spec.pos_min)
    hi = np.array(spec.pos_max)
    translation = lo + rng.uniform(0.0, 1.0, size=3) * (hi - lo)
    yaw_lo, yaw_hi = spec.yaw_range_deg
    yaw = yaw_lo + rng.uniform(0.0, 1.0) * (yaw_hi - yaw_lo)
    return Pose(translation, quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), np.deg2rad(yaw)))


def perturb_camera(spec: CameraSpec, nominal: Pose, rng: np.random.Generator) -> Pose:
    """Perturbed camera offset pose.

    Translation noise is uniform in the axis-aligned box of half-width
    max_translation_noise, added in the parent frame; rotation noise is a
    uniformly random axis with angle uniform in [0, max_orientation_noise],
    composed on the right of the nominal rotation.
    """
    if not spec.apply_randomization:
        return nominal
    dt = rng.uniform(-spec.max_translation_noise, spec.max_translation_noise, size=3) \
        if spec.max_translation_noise > 0 else np.zeros(3)
    angle = np.deg2rad(spec.max_orientation_noise_deg) * rng.uniform(0.0, 1.0) \
        if spec.max_orientation_noise_deg > 0 else 0.0
    if angle > 0:
        v = rng.normal(size=3)
        while np.linalg.norm(v) < 1e-12:
            v = rng.normal(size=3)
        dq = quat_from_axis_angle(v, angle)
    else:
        dq = np.array([1.0, 0.0, 0.0, 0.0])
    return Pose(nominal.translation + dt, quat_mul(nominal.rotation, dq))


def sample_env_map(
    spec: EnvMapSpec, rng: np.random.Generator, library_size: int = ENV_MAP_LIBRARY_SIZE
) -> Lighting:
    """Uniform environment-map id, intensity, and rotation draws."""
    if library_size < 1:
        raise ValueError("library_size must be >= 1")
    ilo, ihi = spec.intensity_range
    rlo, rhi = spec.rotation_range
    if not spec.apply_randomization:
        return Lighting(env_map_id=0, intensity=0.5 * (ilo + ihi), rotation_deg=rlo)
    return Lighting(
        env_map_id=int(rng.integers(0, library_size)),
        intensity=float(ilo + rng.uniform(0.0, 1.0) * (ihi - ilo)),
        rotation_deg=float(rlo + rng.uniform(0.0, 1.0) * (rhi - rlo)),
    )


def sample_home_config(
    mean, std, limits: tuple[np.ndarray, np.ndarray], rng: np.random.Generator
) -> np.ndarray:
    """Per-joint independent normal draw around mean, clamped to limits."""
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    lo, hi = np.asarray(limits[0], dtype=float), np.asarray(limits[1], dtype=float)
    if not (mean.shape == std.shape == lo.shape == hi.shape):
        raise DimensionMismatch(
            f"home sampling shapes differ: mean {mean.shape}, std {std.shape}, limits {lo.shape}/{hi.shape}"
        )
    if np.any(std < 0):
        raise ValueError("std entries must be >= 0")
    draw = mean + std * rng.standard_normal(mean.shape)
    return np.clip(draw, lo, hi)
