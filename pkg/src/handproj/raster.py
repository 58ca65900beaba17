"""Software rasterizer: render-side buffers and the simulated camera mask.

Camera and projector share one pinhole model (ideal coaxial rig); residual
misalignment is modeled as an optional 2D screen-space bias that only the
*render* path applies. The camera path always sees the unbiased truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels, quat
from .buffers import FrameBuffers, Texture
from .hand import HandMesh, Pose, skin


class BehindCameraError(ValueError):
    """A projected point has non-positive depth in the camera frame."""


@dataclass
class CameraModel:
    """Pinhole intrinsics, rigid world-to-camera transform, optional px bias."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray = field(default_factory=lambda: quat.IDENTITY.copy())  # world->camera
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    bias_px: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64)
        self.bias_px = np.asarray(self.bias_px, dtype=np.float64)
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must fall inside the image")

    @classmethod
    def default(cls, width: int, height: int, focal_scale: float = 0.9, bias_px=(0.0, 0.0)) -> "CameraModel":
        """The standard scene camera: world == camera frame, focal ~ 0.9*width."""
        return cls(
            fx=focal_scale * width,
            fy=focal_scale * width,
            cx=width / 2.0,
            cy=height / 2.0,
            width=width,
            height=height,
            bias_px=np.asarray(bias_px, dtype=np.float64),
        )

    def unbiased(self) -> "CameraModel":
        return replace(self, bias_px=np.zeros(2))

    def to_camera(self, points_mm: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points_mm, dtype=np.float64))
        return quat.rotate(self.rotation[None, :], pts) + self.translation


def project(camera: CameraModel, points_mm: np.ndarray) -> np.ndarray:
    """Pinhole projection to pixels (plus the configured bias).

    Accepts one (3,) point or (N, 3); raises BehindCameraError for z <= 0.
    """
    pts = np.asarray(points_mm, dtype=np.float64)
    single = pts.ndim == 1
    cam = camera.to_camera(pts)
    z = cam[:, 2]
    if np.any(z <= 0.0):
        raise BehindCameraError("point depth must be positive in the camera frame")
    out = np.empty((len(cam), 2))
    out[:, 0] = camera.fx * cam[:, 0] / z + camera.cx + camera.bias_px[0]
    out[:, 1] = camera.fy * cam[:, 1] / z + camera.cy + camera.bias_px[1]
    return out[0] if single else out


def _project_vertices(camera: CameraModel, verts: np.ndarray):
    cam = camera.to_camera(verts)
    z = cam[:, 2]
    xy = np.empty((len(cam), 2))
    safe = np.where(z > 0, z, 1.0)
    xy[:, 0] = camera.fx * cam[:, 0] / safe + camera.cx + camera.bias_px[0]
    xy[:, 1] = camera.fy * cam[:, 1] / safe + camera.cy + camera.bias_px[1]
    return np.ascontiguousarray(xy), np.ascontiguousarray(z)


def rasterize(
    posed_vertices: np.ndarray,
    mesh: HandMesh,
    camera: CameraModel,
    texture: Texture,
    timestamp: float = 0.0,
) -> FrameBuffers:
    """Z-buffered fill with perspective-correct UV interpolation and texture lookup."""
    if not np.all(np.isfinite(posed_vertices)):
        raise ValueError("posed vertices must be finite")
    out = FrameBuffers.empty(camera.width, camera.height, timestamp=timestamp)
    if len(mesh.triangles) == 0:
        return out
    xy, z = _project_vertices(camera, posed_vertices)
    _kernels.raster_textured(
        xy,
        z,
        np.ascontiguousarray(mesh.uvs),
        np.ascontiguousarray(mesh.triangles),
        texture.image,
        out.mask,
        out.uv,
        out.color,
        out.depth,
        _kernels.BAND_H,
    )
    return out


def render_silhouette(posed_vertices: np.ndarray, mesh: HandMesh, camera: CameraModel) -> np.ndarray:
    """Binary coverage mask only (no depth, no attributes)."""
    mask = np.zeros((camera.height, camera.width), dtype=np.uint8)
    if len(mesh.triangles) == 0:
        return mask
    xy, z = _project_vertices(camera, posed_vertices)
    _kernels.raster_silhouette(
        xy, z, np.ascontiguousarray(mesh.triangles), mask, _kernels.BAND_H
    )
    return mask


def render_camera_mask(gt_pose: Pose, mesh: HandMesh, camera: CameraModel, rest: Pose):
    """What the (unbiased) camera sees: the ground-truth silhouette at capture time.

    Returns (mask, capture_timestamp).
    """
    posed = skin(mesh, gt_pose, rest)
    return render_silhouette(posed, mesh, camera.unbiased()), gt_pose.timestamp
