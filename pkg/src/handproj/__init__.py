"""Deterministic simulation of a cascaded hand projection-mapping pipeline.

A coarse, latent 3D pose stream drives a skinned render; screen-space moving
least squares deformation pulls it onto the observed hand using temporally
filtered 2D detections; a boundary-reduction pass fills the remaining
camera-only pixels by UV extrapolation. A discrete-event timeline ties the
asynchronous stages together, and metrics plus an adaptive staircase protocol
quantify the result - all without projector or camera hardware.
"""

__version__ = "0.1.0"

from .buffers import FrameBuffers, Texture, make_texture
from .filters import FilterStrategy, KalmanState, estimate_targets, kalman_step, propagate_targets
from .hand import (
    HandMesh,
    MotionScript,
    Pose,
    SensorModels,
    Skeleton,
    detect_landmarks,
    extrapolate_pose,
    generate_hand_mesh,
    hand_skeleton,
    lmc_observe,
    rest_pose,
    sample_ground_truth,
    skin,
)
from .mls import DeformGrid, LandmarkSet, mls_map, solve_grid, warp
from .boundary import NearestField, fill_boundary, jump_flood, partition
from .metrics import SplineFit, distance_to_curve, fit_ideal_spline, mask_iou
from .raster import CameraModel, project, rasterize, render_camera_mask
from .simulate import FrameLog, SimConfig, detector_scheduling_trace, run, run_filter_comparison
from .staircase import ObserverModel, StaircaseState, run_session, staircase_step
