"""Deterministic discrete-event simulation of the projection pipeline.

Four event kinds drive a virtual clock: estimator samples, camera frames,
detector completions, and render ticks. Ties break by a fixed kind priority
(camera < estimator < detector < render), then insertion order, so a run is
bit-reproducible for a given config and seed. Per-frame pixel kernels may run
multi-threaded; their banding is fixed, so thread count never changes any
logged value.

Each render tick executes the full pipeline against the presentation
timestamp (tick + projector latency): extrapolate pose, skin, rasterize,
optionally MLS-warp toward the filtered detector targets, optionally reduce
the projection/target boundary, then score against ground truth at
presentation time.
"""

from __future__ import annotations

import heapq
import logging
import time as _time
from dataclasses import dataclass, field, replace

import numpy as np
import numba

from . import boundary, metrics
from .buffers import FrameBuffers, Texture, frame_filename, make_texture, read_ppm, write_ppm
from .filters import SKIP, DetectorRecord, FilterStrategy, KalmanBank, estimate_targets
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
from .mls import LandmarkSet, SingularControlsError, solve_grid, warp
from .raster import CameraModel, project, rasterize, render_silhouette

logger = logging.getLogger(__name__)

# event kinds, in tie-break priority order
CAMERA_FRAME = 0
LMC_SAMPLE = 1
DETECTOR_DONE = 2
RENDER_TICK = 3

KIND_NAMES = {CAMERA_FRAME: "CAMERA_FRAME", LMC_SAMPLE: "LMC_SAMPLE",
              DETECTOR_DONE: "DETECTOR_DONE", RENDER_TICK: "RENDER_TICK"}


class ConfigError(ValueError):
    """A simulation config failed validation."""


@dataclass
class SimEvent:
    time: float
    kind: int
    payload: object = None


@dataclass
class SimConfig:
    """Everything a run needs; see configs/*.cfg for the file form."""

    width: int = 256
    height: int = 192
    focal_scale: float = 0.9
    screen_bias_px: tuple = (0.0, 0.0)
    texture: str = "bands"
    atlas: int = 0
    mesh_vertices: int = 2045
    projector_rate_hz: float = 360.0
    projector_latency_s: float = 0.003
    sensors: SensorModels = field(default_factory=SensorModels)
    filter: FilterStrategy = field(default_factory=FilterStrategy)
    mls_enabled: bool = True
    mls_spacing_px: float = 16.0
    mls_alpha: float = 1.0
    mls_variant: str = "affine"
    pbr_enabled: bool = True
    scenario: MotionScript = field(default_factory=lambda: MotionScript("translate", 60.0, 0.5, 3.0))
    scenario_csv: str | None = None
    seed: int = 1
    duration_s: float = 3.0
    parallel: bool = True

    def validate(self) -> None:
        problems = []
        if self.duration_s <= 0:
            problems.append("run.duration_s must be > 0")
        if self.projector_rate_hz <= 0:
            problems.append("projector.rate_hz must be > 0")
        if self.projector_latency_s < 0:
            problems.append("projector.latency_s must be >= 0")
        if self.width < 16 or self.height < 16:
            problems.append("scene resolution must be at least 16x16")
        if self.sensors.detector_latency_s <= 0:
            problems.append("sensors.detector_latency_s must cover at least one tick (> 0)")
        if self.scenario_csv is None and self.duration_s > self.scenario.duration:
            problems.append("run.duration_s exceeds the scenario duration")
        if self.mls_spacing_px <= 1:
            problems.append("deform.spacing_px must be > 1")
        if problems:
            raise ConfigError("; ".join(problems))


@dataclass
class FrameLog:
    """One record per render tick."""

    tick_time: float
    present_time: float
    mls_applied: bool
    camera_capture_time: float
    sources: np.ndarray        # (N, 2) projected estimator joints at present time
    estimated: np.ndarray      # (N, 2) filtered targets (nan when deformation skipped)
    mapped: np.ndarray         # (N, 2) where the render's landmarks ended up
    err_px: np.ndarray         # (N,) distance to ground truth at present time
    region_counts: np.ndarray  # (4,) background / render-only / camera-only / overlap
    iou: float
    fill_ratio: float


@dataclass
class RunResult:
    logs: list
    config: SimConfig
    timing: dict | None = None

    def times(self) -> np.ndarray:
        return np.array([lg.present_time for lg in self.logs])

    def mapped(self) -> np.ndarray:
        return np.stack([lg.mapped for lg in self.logs])

    def mean_err(self) -> float:
        return float(np.mean([lg.err_px.mean() for lg in self.logs]))

    def iou(self) -> np.ndarray:
        return np.array([lg.iou for lg in self.logs])

    def fill_ratio(self) -> np.ndarray:
        return np.array([lg.fill_ratio for lg in self.logs])


class _Scenario:
    """Ground-truth pose source: closed-form script or recorded landmark rows."""

    def __init__(self, config: SimConfig, skeleton: Skeleton):
        self.skeleton = skeleton
        self.script = config.scenario
        self.rest = rest_pose(skeleton)
        self.recorded = None
        if config.scenario_csv:
            data = np.loadtxt(config.scenario_csv, delimiter=",", skiprows=1)
            if data.ndim == 1:
                data = data[None, :]
            if data.shape[1] != 1 + 3 * skeleton.n_joints:
                raise ConfigError(
                    f"recorded scenario must have 1+{3 * skeleton.n_joints} columns, got {data.shape[1]}"
                )
            self.recorded = (data[:, 0], data[:, 1:].reshape(len(data), skeleton.n_joints, 3))

    @property
    def duration(self) -> float:
        if self.recorded is not None:
            return float(self.recorded[0][-1])
        return self.script.duration

    def pose(self, t: float) -> Pose:
        if self.recorded is None:
            return sample_ground_truth(self.script, t, self.skeleton)
        ts, pos = self.recorded
        if not (ts[0] <= t <= ts[-1]):
            raise ValueError(f"t={t} outside recorded range [{ts[0]}, {ts[-1]}]")
        i = int(np.clip(np.searchsorted(ts, t) - 1, 0, len(ts) - 2))
        f = (t - ts[i]) / (ts[i + 1] - ts[i]) if ts[i + 1] > ts[i] else 0.0
        trans = pos[i] * (1 - f) + pos[i + 1] * f
        # recorded rows carry positions only; rotations hold the rest pose
        return Pose(t, self.rest.rotations.copy(), trans)


class _Stopwatch:
    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.totals: dict[str, float] = {}
        self.frames = 0

    def add(self, stage: str, t0: float) -> float:
        t1 = _time.perf_counter()
        if self.enabled:
            self.totals[stage] = self.totals.get(stage, 0.0) + (t1 - t0)
        return t1

    def report(self) -> dict:
        out = {k: 1e3 * v / max(1, self.frames) for k, v in self.totals.items()}
        out["frames"] = self.frames
        pipeline = sum(v for k, v in out.items() if k in ("skin", "raster", "mls_solve", "warp", "pbr"))
        out["pipeline_ms_per_frame"] = pipeline
        return out


def run(
    config: SimConfig,
    eval_metrics: bool = True,
    frames_dir=None,
    collect_timing: bool = False,
    progress: bool = False,
    frame_hook=None,
) -> RunResult:
    """Execute the event loop for the configured duration.

    Stage failures inside a render tick are logged and the frame falls back to
    the last healthy intermediate (never aborts the run); config problems
    raise ConfigError before anything starts.
    """
    config.validate()
    numba.set_num_threads(numba.config.NUMBA_NUM_THREADS if config.parallel else 1)

    skeleton = hand_skeleton()
    mesh = generate_hand_mesh(skeleton, config.mesh_vertices, atlas=config.atlas)
    rest = rest_pose(skeleton)
    scenario = _Scenario(config, skeleton)
    if config.duration_s > scenario.duration:
        raise ConfigError("run.duration_s exceeds the recorded scenario duration")
    camera = CameraModel.default(
        config.width, config.height, config.focal_scale, bias_px=config.screen_bias_px
    )
    camera_truth = camera.unbiased()
    if config.texture in ("bands", "checker"):
        texture = make_texture(config.texture)
    else:
        texture = Texture(read_ppm(config.texture))

    ss = np.random.SeedSequence(config.seed)
    rng_lmc, rng_det = (np.random.default_rng(s) for s in ss.spawn(2))

    sensors = config.sensors
    duration = config.duration_s
    tick_dt = 1.0 / config.projector_rate_hz

    pose_history: list[Pose] = []
    detector_history: list[DetectorRecord] = []
    kalman = KalmanBank(config.filter)
    camera_frames: list[float] = []       # capture timestamps, arrival order
    mask_cache: dict[float, np.ndarray] = {}
    detector_busy = False
    watch = _Stopwatch(collect_timing)
    logs: list[FrameLog] = []

    def truth_points(t: float) -> np.ndarray:
        return project(camera_truth, scenario.pose(t).joint_positions)

    def camera_mask_at(capture_t: float) -> np.ndarray:
        m = mask_cache.get(capture_t)
        if m is None:
            posed = skin(mesh, scenario.pose(capture_t), rest)
            m = render_silhouette(posed, mesh, camera_truth)
            mask_cache[capture_t] = m
            if len(mask_cache) > 8:
                mask_cache.pop(next(iter(mask_cache)))
        return m

    def estimated_pose_at(t: float) -> Pose:
        if not pose_history:
            return rest
        return extrapolate_pose(pose_history, t)

    heap: list = []
    seq = 0

    def push(t: float, kind: int, payload=None):
        nonlocal seq
        heapq.heappush(heap, (t, kind, seq, payload))
        seq += 1

    push(0.0, CAMERA_FRAME)
    push(0.0, LMC_SAMPLE)
    if config.projector_latency_s <= duration:
        push(0.0, RENDER_TICK)

    def launch_detector(now: float):
        nonlocal detector_busy
        if not camera_frames:
            return
        detector_busy = True
        push(now + sensors.detector_latency_s, DETECTOR_DONE, camera_frames[-1])

    while heap:
        t, kind, _, payload = heapq.heappop(heap)
        if t > duration + 1e-12:
            break

        if kind == CAMERA_FRAME:
            capture = t - sensors.camera_latency_s
            if capture >= 0.0:
                camera_frames.append(capture)
                if len(camera_frames) > 64:
                    del camera_frames[0]
                if not detector_busy:
                    launch_detector(t)
            push(t + sensors.camera_interval_s, CAMERA_FRAME)

        elif kind == LMC_SAMPLE:
            capture = t - sensors.lmc_latency_s
            if 0.0 <= capture <= scenario.duration:
                observed = lmc_observe(scenario.pose(capture), sensors, rng_lmc)
                pose_history.append(observed)
                if len(pose_history) > 8:
                    del pose_history[0]
            push(t + 1.0 / sensors.lmc_rate_hz, LMC_SAMPLE)

        elif kind == DETECTOR_DONE:
            capture_t = payload
            truth = LandmarkSet(truth_points(capture_t), capture_t, kind="truth")
            det = detect_landmarks(None, truth, sensors, rng_det)
            sources_then = LandmarkSet(
                project(camera, estimated_pose_at(capture_t).joint_positions),
                capture_t,
                kind="sources",
            )
            detector_history.append(DetectorRecord(det, sources_then))
            if len(detector_history) > 4:
                del detector_history[0]
            kalman.update(det.points, capture_t)
            launch_detector(t)

        elif kind == RENDER_TICK:
            present = t + config.projector_latency_s
            t0 = _time.perf_counter()
            pose_est = estimated_pose_at(present)
            posed = skin(mesh, pose_est, rest)
            t0 = watch.add("skin", t0)
            bufs = rasterize(posed, mesh, camera, texture, timestamp=t)
            t0 = watch.add("raster", t0)

            sources_now = LandmarkSet(
                project(camera, pose_est.joint_positions), present, kind="sources"
            )
            est = estimate_targets(
                config.filter, detector_history, sources_now, present,
                kalman=kalman, truth_provider=truth_points,
            )
            mls_applied = bool(config.mls_enabled) and est is not SKIP
            mapped = sources_now.points
            warped = bufs
            if mls_applied:
                try:
                    grid = solve_grid(
                        sources_now, est, config.width, config.height,
                        spacing=config.mls_spacing_px, alpha=config.mls_alpha,
                        variant=config.mls_variant,
                    )
                    t0 = watch.add("mls_solve", t0)
                    warped = warp(bufs, grid)
                    mapped = grid.transform_points(sources_now.points)
                    t0 = watch.add("warp", t0)
                except SingularControlsError as exc:
                    logger.warning("tick %.4f: deformation skipped (%s)", t, exc)
                    mls_applied = False

            final = warped
            counts = np.zeros(4, dtype=np.int64)
            fill_ratio = 1.0
            cam_capture = float("nan")
            if config.pbr_enabled and camera_frames:
                cam_capture = camera_frames[-1]
                cam_mask = camera_mask_at(cam_capture)
                labels = boundary.partition(cam_mask, warped.mask)
                counts = boundary.region_counts(labels)
                try:
                    nearest = boundary.jump_flood(labels)
                    final = boundary.fill_boundary(warped, cam_mask, texture, labels, nearest)
                except boundary.NoSeedsError:
                    logger.warning("tick %.4f: no overlap pixels; masking render-only region", t)
                    final = boundary.fill_boundary(warped, cam_mask, texture, labels, None)
                if counts[boundary.REGION_CAMERA_ONLY] > 0:
                    filled = np.count_nonzero(
                        final.mask[labels == boundary.REGION_CAMERA_ONLY]
                    )
                    fill_ratio = filled / counts[boundary.REGION_CAMERA_ONLY]
            t0 = watch.add("pbr", t0)
            watch.frames += 1

            iou = 1.0
            err = np.zeros(len(sources_now.points))
            if eval_metrics:
                gt = truth_points(present)
                err = np.linalg.norm(mapped - gt, axis=1)
                truth_mask = render_silhouette(
                    skin(mesh, scenario.pose(present), rest), mesh, camera_truth
                )
                iou = metrics.mask_iou(final.mask, truth_mask)
                watch.add("eval", t0)

            if frames_dir is not None:
                write_ppm(f"{frames_dir}/{frame_filename('frame', t, 'ppm')}", final.color)
            if frame_hook is not None:
                frame_hook(
                    {
                        "index": len(logs),
                        "tick_time": t,
                        "present_time": present,
                        "raw": bufs,
                        "warped": warped,
                        "final": final,
                        "camera_mask": (camera_mask_at(cam_capture)
                                        if config.pbr_enabled and camera_frames else None),
                    }
                )

            logs.append(
                FrameLog(
                    tick_time=t,
                    present_time=present,
                    mls_applied=mls_applied,
                    camera_capture_time=cam_capture,
                    sources=sources_now.points.copy(),
                    estimated=(est.points.copy() if est is not SKIP else
                               np.full_like(sources_now.points, np.nan)),
                    mapped=np.asarray(mapped, dtype=np.float64).copy(),
                    err_px=err,
                    region_counts=counts,
                    iou=float(iou),
                    fill_ratio=float(fill_ratio),
                )
            )
            if progress and len(logs) % 120 == 0:
                logger.info("tick %d / ~%d", len(logs), int(duration / tick_dt))
            nxt = t + tick_dt
            if nxt + config.projector_latency_s <= duration + 1e-12:
                push(nxt, RENDER_TICK)

    return RunResult(logs, config, watch.report() if collect_timing else None)


def detector_scheduling_trace(config: SimConfig) -> list[tuple[float, float, float]]:
    """(launch, consumed-frame capture, delivery) triples for the whole run.

    The detector relaunches the moment a result is delivered, always
    consuming the newest available camera frame.
    """
    config.validate()
    s = config.sensors
    arrivals = []
    t = 0.0
    while t <= config.duration_s + 1e-12:
        arrivals.append(t)
        t += s.camera_interval_s
    trace = []
    launch = arrivals[0]
    i = 0
    while launch <= config.duration_s + 1e-12:
        while i + 1 < len(arrivals) and arrivals[i + 1] <= launch + 1e-12:
            i += 1
        capture = arrivals[i] - s.camera_latency_s
        delivery = launch + s.detector_latency_s
        trace.append((launch, capture, delivery))
        launch = delivery
    return trace


# -- frame log CSV ---------------------------------------------------------------

def frame_log_header(n_landmarks: int = 21) -> str:
    cols = [
        "tick_time", "present_time", "mls_applied", "camera_capture_time",
        "mean_err_px", "median_err_px", "max_err_px", "iou", "fill_ratio",
        "count_background", "count_render_only", "count_camera_only", "count_overlap",
    ]
    for tag in ("src", "est", "map"):
        for lm in range(n_landmarks):
            cols += [f"{tag}{lm:02d}x", f"{tag}{lm:02d}y"]
    return ",".join(cols)


def write_frame_log(logs: list, path) -> None:
    """One CSV row per render tick; column schema in docs/csv_schemas.md."""
    n = len(logs[0].sources) if logs else 21
    with open(path, "w") as fh:
        fh.write(frame_log_header(n) + "\n")
        for lg in logs:
            row = [
                "%.17g" % lg.tick_time,
                "%.17g" % lg.present_time,
                "%d" % int(lg.mls_applied),
                "%.17g" % lg.camera_capture_time,
                "%.17g" % lg.err_px.mean(),
                "%.17g" % np.median(lg.err_px),
                "%.17g" % lg.err_px.max(),
                "%.17g" % lg.iou,
                "%.17g" % lg.fill_ratio,
            ] + ["%d" % c for c in lg.region_counts]
            for arr in (lg.sources, lg.estimated, lg.mapped):
                row += ["%.17g" % x for x in arr.ravel()]
            fh.write(",".join(row) + "\n")


# -- filter comparison harness ----------------------------------------------------

def run_filter_comparison(config: SimConfig, variants: list[str], eval_metrics: bool = True):
    """Run each variant on the shared scenario/seed and score against the ideal run.

    Returns (fit, {variant: (RunResult, MetricsReport)}). The ideal run is
    always executed (it defines the reference spline) but only reported if
    requested.
    """
    ideal_cfg = replace(config, filter=replace(config.filter, variant="ideal"))
    ideal_res = run(ideal_cfg, eval_metrics=eval_metrics)
    times = ideal_res.times()
    fit = metrics.fit_ideal_spline(times, ideal_res.mapped())

    out = {}
    for variant in variants:
        if variant == "ideal":
            res = ideal_res
        else:
            cfg = replace(config, filter=replace(config.filter, variant=variant))
            res = run(cfg, eval_metrics=eval_metrics)
        rep = metrics.report_against_spline(
            fit, res.times(), res.mapped(), res.iou(), res.fill_ratio()
        )
        out[variant] = (res, rep)
    return fit, out
