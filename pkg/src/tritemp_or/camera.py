"""Pinhole camera models, projection, and frustum point selection.

A camera is a 3x4 projection matrix mapping homogeneous world points to
homogeneous pixel coordinates, plus the image size it targets. Frustum
selection picks the 3D points whose projection (at positive depth) lands
inside a normalized 2D box scaled to that image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CameraModel:
    view_id: str
    projection: np.ndarray  # (3, 4), row-major
    image_size: tuple[int, int]  # (H, W) pixels

    def __post_init__(self) -> None:
        proj = np.asarray(self.projection, dtype=np.float64)
        if proj.shape != (3, 4):
            raise ValueError(f"projection must be 3x4, got {proj.shape}")
        if np.linalg.matrix_rank(proj) != 3:
            raise ValueError("projection matrix must have rank 3")
        object.__setattr__(self, "projection", proj)
        object.__setattr__(self, "image_size", (int(self.image_size[0]), int(self.image_size[1])))


def look_at_projection(
    eye, target, up=(0.0, 0.0, 1.0), focal_px: float = 200.0, image_size=(192, 256)
) -> np.ndarray:
    """Build a 3x4 projection for a camera at `eye` looking at `target`."""
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    up = np.asarray(up, dtype=np.float64)

    forward = target - eye
    forward = forward / np.linalg.norm(forward)
    right = np.cross(forward, up)
    right = right / np.linalg.norm(right)
    down = np.cross(forward, right)  # completes a right-handed (x right, y down, z forward) frame

    rotation = np.stack([right, down, forward], axis=0)
    translation = -rotation @ eye
    h, w = image_size
    intrinsics = np.array(
        [[focal_px, 0.0, w / 2.0], [0.0, focal_px, h / 2.0], [0.0, 0.0, 1.0]]
    )
    return intrinsics @ np.concatenate([rotation, translation[:, None]], axis=1)


def project_points(camera: CameraModel, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project (P, 3) world points; returns pixel coords (P, 2) and depth (P,)."""
    points = np.asarray(points, dtype=np.float64)
    homo = np.concatenate([points, np.ones((points.shape[0], 1))], axis=1)
    uvw = homo @ camera.projection.T
    depth = uvw[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        pixels = uvw[:, :2] / depth[:, None]
    return pixels, depth


def project_box(camera: CameraModel, corners: np.ndarray, clip: bool = True):
    """Normalized xyxy extent of projected 3D corners, or None if all behind."""
    pixels, depth = project_points(camera, corners)
    front = depth > 0
    if not front.any():
        return None
    pixels = pixels[front]
    h, w = camera.image_size
    x1, y1 = pixels.min(axis=0)
    x2, y2 = pixels.max(axis=0)
    box = np.array([x1 / w, y1 / h, x2 / w, y2 / h])
    if clip:
        box = np.clip(box, 0.0, 1.0)
    if box[2] - box[0] <= 0 or box[3] - box[1] <= 0:
        return None
    return tuple(float(v) for v in box)


def frustum_select(box, camera: CameraModel, points: np.ndarray) -> np.ndarray:
    """Indices of points with positive depth projecting inside a normalized box.

    The box is xyxy in [0, 1], scaled to the camera's image size; bounds are
    inclusive. Points behind the camera are excluded regardless of the box.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.size == 0:
        return np.zeros(0, dtype=np.int64)
    pixels, depth = project_points(camera, points)
    h, w = camera.image_size
    x1, y1, x2, y2 = (float(v) for v in box)
    inside = (
        (depth > 0)
        & (pixels[:, 0] >= x1 * w)
        & (pixels[:, 0] <= x2 * w)
        & (pixels[:, 1] >= y1 * h)
        & (pixels[:, 1] <= y2 * h)
    )
    return np.nonzero(inside)[0].astype(np.int64)
