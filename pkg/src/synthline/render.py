"""Deterministic procedural renderer.

Pinhole-projects object boxes and arm link spheres into an RGB8 buffer as
filled primitives, painter-sorted by depth. Colors derive from asset-name
hashes, shading from the lighting intensity, background from the
environment-map id. Identical inputs produce identical bytes; images are
written with a self-contained PNG encoder so no external codec can change
the output.
"""

from __future__ import annotations

import hashlib
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .geometry import Pose

_NEAR_PLANE = 0.02


@dataclass(frozen=True)
class Image:
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) uint8

    def __post_init__(self):
        if self.pixels.shape != (self.height, self.width, 3):
            raise ValueError("pixel buffer does not match width/height")


def _hash_color(name: str) -> np.ndarray:
    digest = hashlib.blake2s(name.encode("utf-8"), digest_size=3).digest()
    # Keep colors away from pure black so shading stays visible.
    return 64 + (np.frombuffer(digest, dtype=np.uint8).astype(np.float64) * (191.0 / 255.0))


def _shade(intensity: float) -> float:
    return float(np.clip(0.25 + intensity / 9000.0, 0.25, 1.0))


def background_color(env_map_id: int, intensity: float, rotation_deg: float) -> np.ndarray:
    base = _hash_color(f"envmap:{env_map_id}")
    tint = 1.0 + 0.1 * np.sin(np.deg2rad(rotation_deg))
    return np.clip(base * _shade(intensity) * tint, 0, 255)


def _convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew monotone chain; points (N, 2), returns hull CCW."""
    pts = sorted({(float(x), float(y)) for x, y in points})
    if len(pts) <= 2:
        return np.array(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def _fill_convex(buffer: np.ndarray, hull: np.ndarray, color: np.ndarray):
    if len(hull) < 3:
        return
    h, w, _ = buffer.shape
    x_min = max(0, int(np.floor(hull[:, 0].min())))
    x_max = min(w - 1, int(np.ceil(hull[:, 0].max())))
    y_min = max(0, int(np.floor(hull[:, 1].min())))
    y_max = min(h - 1, int(np.ceil(hull[:, 1].max())))
    if x_min > x_max or y_min > y_max:
        return
    xs = np.arange(x_min, x_max + 1) + 0.5
    ys = np.arange(y_min, y_max + 1) + 0.5
    gx, gy = np.meshgrid(xs, ys)
    inside = np.ones(gx.shape, dtype=bool)
    n = len(hull)
    for i in range(n):
        ax, ay = hull[i]
        bx, by = hull[(i + 1) % n]
        inside &= (bx - ax) * (gy - ay) - (by - ay) * (gx - ax) >= 0
    buffer[y_min : y_max + 1, x_min : x_max + 1][inside] = color.astype(np.uint8)


def _fill_circle(buffer: np.ndarray, cx: float, cy: float, radius: float, color: np.ndarray):
    h, w, _ = buffer.shape
    x_min = max(0, int(np.floor(cx - radius)))
    x_max = min(w - 1, int(np.ceil(cx + radius)))
    y_min = max(0, int(np.floor(cy - radius)))
    y_max = min(h - 1, int(np.ceil(cy + radius)))
    if x_min > x_max or y_min > y_max:
        return
    xs = np.arange(x_min, x_max + 1) + 0.5
    ys = np.arange(y_min, y_max + 1) + 0.5
    gx, gy = np.meshgrid(xs, ys)
    inside = (gx - cx) ** 2 + (gy - cy) ** 2 <= radius**2
    buffer[y_min : y_max + 1, x_min : x_max + 1][inside] = color.astype(np.uint8)


def render_frame(
    boxes: list,
    spheres: list,
    camera_pose: Pose,
    width: int,
    height: int,
    focal: float,
    lighting,
) -> Image:
    """Render one frame.

    boxes: list of (name, corners (8, 3) world); spheres: list of
    (name, center, radius). The camera looks along its +Z axis, x right,
    y down, principal point at the image center.
    """
    shade = _shade(lighting.intensity)
    buffer = np.empty((height, width, 3), dtype=np.uint8)
    buffer[:] = background_color(lighting.env_map_id, lighting.intensity, lighting.rotation_deg).astype(np.uint8)

    cam_inv = camera_pose.inverse()
    cx, cy = width / 2.0, height / 2.0

    drawables = []  # (depth, kind, payload, color)
    for name, corners in boxes:
        local = np.array([cam_inv.transform_point(c) for c in corners])
        if np.all(local[:, 2] <= _NEAR_PLANE):
            continue
        visible = local[local[:, 2] > _NEAR_PLANE]
        uv = np.column_stack(
            [cx + focal * visible[:, 0] / visible[:, 2], cy + focal * visible[:, 1] / visible[:, 2]]
        )
        depth = float(np.mean(visible[:, 2]))
        drawables.append((depth, "hull", uv, np.clip(_hash_color(name) * shade, 0, 255)))
    for name, center, radius in spheres:
        local = cam_inv.transform_point(center)
        if local[2] <= _NEAR_PLANE:
            continue
        u = cx + focal * local[0] / local[2]
        v = cy + focal * local[1] / local[2]
        r_px = focal * radius / local[2]
        drawables.append((float(local[2]), "circle", (u, v, r_px), np.clip(_hash_color(name) * shade, 0, 255)))

    # Painter's algorithm: far first.
    drawables.sort(key=lambda d: (-d[0], d[1]))
    for _, kind, payload, color in drawables:
        if kind == "hull":
            hull = _convex_hull(payload)
            _fill_convex(buffer, hull, color)
        else:
            u, v, r_px = payload
            _fill_circle(buffer, u, v, r_px, color)
    return Image(width=width, height=height, pixels=buffer)


# ---------------------------------------------------------------------------
# Minimal PNG codec (RGB8, filter 0, fixed zlib level) for byte-stable output
# ---------------------------------------------------------------------------


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)
    )


def png_encode(image: Image) -> bytes:
    raw = image.pixels
    rows = b"".join(b"\x00" + raw[y].tobytes() for y in range(image.height))
    header = struct.pack(">IIBBBBB", image.width, image.height, 8, 2, 0, 0, 0)
    return (
        b"\x89PNG\r\n\x1a\n"
        + _chunk(b"IHDR", header)
        + _chunk(b"IDAT", zlib.compress(rows, 6))
        + _chunk(b"IEND", b"")
    )


def png_decode(data: bytes) -> Image:
    if data[:8] != b"\x89PNG\r\n\x1a\n":
        raise ValueError("not a PNG file")
    pos = 8
    width = height = None
    idat = b""
    while pos < len(data):
        (length,) = struct.unpack(">I", data[pos : pos + 4])
        tag = data[pos + 4 : pos + 8]
        payload = data[pos + 8 : pos + 8 + length]
        if tag == b"IHDR":
            width, height, depth, color = struct.unpack(">IIBB", payload[:10])
            if depth != 8 or color != 2:
                raise ValueError("only RGB8 PNGs are supported")
        elif tag == b"IDAT":
            idat += payload
        pos += 12 + length
    if width is None:
        raise ValueError("missing IHDR")
    raw = zlib.decompress(idat)
    stride = width * 3 + 1
    pixels = np.empty((height, width, 3), dtype=np.uint8)
    for y in range(height):
        row = raw[y * stride : (y + 1) * stride]
        if row[0] != 0:
            raise ValueError("unsupported PNG filter type")
        pixels[y] = np.frombuffer(row[1:], dtype=np.uint8).reshape(width, 3)
    return Image(width=width, height=height, pixels=pixels)
