"""Temporal filtering of stale detector landmarks.

Five strategies produce the target set fed to the grid solve each frame:

  baseline     no deformation at all (the estimate is skipped entirely)
  naive        latest raw detector output, however stale
  kalman_cv    per-landmark constant-velocity Kalman prediction at render time
  propagation  stale detections shifted by how the projected sources moved:
               Q_hat(T) = Q(T-dt) + P(T) - P(T-dt)
  ideal        simulation oracle: ground-truth landmarks at render time

Kalman noise defaults come from a grid search on the bundled translate
scenario (demos/kalman_tuning.py reproduces it).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .mls import LandmarkSet

logger = logging.getLogger(__name__)

VARIANTS = ("baseline", "naive", "kalman_cv", "propagation", "ideal")

# tuned on configs/translate.cfg (see demos/kalman_tuning.py)
KALMAN_PROCESS_NOISE = 3000.0   # px^2/s^3 white-acceleration density
KALMAN_MEASUREMENT_NOISE = 0.25  # px^2


@dataclass(frozen=True)
class FilterStrategy:
    """Which estimator runs, plus its parameters."""

    variant: str = "propagation"
    kalman_process_noise: float = KALMAN_PROCESS_NOISE
    kalman_measurement_noise: float = KALMAN_MEASUREMENT_NOISE

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown filter variant {self.variant!r} (want one of {VARIANTS})")


def propagate_targets(stale_targets: LandmarkSet, sources_now: LandmarkSet, sources_then: LandmarkSet) -> LandmarkSet:
    """Shift stale targets by the source motion over the same interval."""
    if not (len(stale_targets) == len(sources_now) == len(sources_then)):
        raise ValueError("landmark sets must have equal cardinality")
    pts = stale_targets.points + sources_now.points - sources_then.points
    return LandmarkSet(pts, sources_now.timestamp, kind="estimated")


def _transition(dt: float):
    f = np.eye(4)
    f[0, 2] = dt
    f[1, 3] = dt
    return f


def _process_noise(dt: float, q: float):
    dt2 = dt * dt
    dt3 = dt2 * dt
    dt4 = dt3 * dt
    qm = np.zeros((4, 4))
    qm[0, 0] = qm[1, 1] = q * dt4 / 4.0
    qm[0, 2] = qm[2, 0] = qm[1, 3] = qm[3, 1] = q * dt3 / 2.0
    qm[2, 2] = qm[3, 3] = q * dt2
    return qm


@dataclass
class KalmanState:
    """Constant-velocity state per landmark: (x, y, vx, vy) and covariance."""

    x: np.ndarray          # (N, 4)
    cov: np.ndarray        # (N, 4, 4)
    timestamp: float

    @classmethod
    def from_measurement(cls, points: np.ndarray, timestamp: float, r: float) -> "KalmanState":
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        n = len(points)
        x = np.zeros((n, 4))
        x[:, :2] = points
        cov = np.zeros((n, 4, 4))
        cov[:] = np.diag([r, r, 1e4, 1e4])
        return cls(x, cov, timestamp)


def kalman_step(
    state: KalmanState,
    dt: float,
    measurement: np.ndarray | None,
    process_noise: float,
    measurement_noise: float,
):
    """Standard predict (constant velocity) and, if a measurement is present, update.

    Vectorized over the landmark axis. Returns (new state, predicted positions
    at the post-predict time). The covariance is re-symmetrized after the
    update; should it still go indefinite it is clamped to PSD and the event
    logged.
    """
    if dt < 0:
        raise ValueError("dt must be >= 0")
    f = _transition(dt)
    x = state.x @ f.T
    cov = f @ state.cov @ f.T + _process_noise(dt, process_noise)
    t = state.timestamp + dt
    predicted = x[:, :2].copy()

    if measurement is not None:
        z = np.atleast_2d(np.asarray(measurement, dtype=np.float64))
        innov = z - x[:, :2]
        s = cov[:, :2, :2] + measurement_noise * np.eye(2)
        k = np.linalg.solve(np.swapaxes(s, 1, 2), np.swapaxes(cov[:, :, :2], 1, 2))
        k = np.swapaxes(k, 1, 2)  # (N, 4, 2)
        x = x + np.einsum("nij,nj->ni", k, innov)
        ikh = np.eye(4) - np.pad(k, ((0, 0), (0, 0), (0, 2)))
        cov = ikh @ cov
        cov = 0.5 * (cov + np.swapaxes(cov, 1, 2))
        eig = np.linalg.eigvalsh(cov)
        if eig.min() < -1e-9:
            logger.warning("kalman covariance went indefinite (min eig %.3e); clamping", eig.min())
            vals, vecs = np.linalg.eigh(cov)
            vals = np.clip(vals, 0.0, None)
            cov = vecs @ (vals[..., None] * np.swapaxes(vecs, 1, 2))
    return KalmanState(x, cov, t), predicted


class KalmanBank:
    """Per-landmark filters driven by detector deliveries, queried between them."""

    def __init__(self, strategy: FilterStrategy):
        self.q = strategy.kalman_process_noise
        self.r = strategy.kalman_measurement_noise
        self.state: KalmanState | None = None

    def update(self, points: np.ndarray, timestamp: float) -> None:
        if self.state is None:
            self.state = KalmanState.from_measurement(points, timestamp, self.r)
            return
        dt = max(0.0, timestamp - self.state.timestamp)
        self.state, _ = kalman_step(self.state, dt, points, self.q, self.r)

    def predict_at(self, timestamp: float) -> np.ndarray | None:
        if self.state is None:
            return None
        dt = max(0.0, timestamp - self.state.timestamp)
        _, predicted = kalman_step(self.state, dt, None, self.q, self.r)
        return predicted


@dataclass
class DetectorRecord:
    """One delivered detection: the landmarks and the sources at their capture time."""

    targets: LandmarkSet           # detector output, stamped with capture time
    sources_at_capture: LandmarkSet


SKIP = "skip"


def estimate_targets(
    strategy: FilterStrategy,
    detector_history: list[DetectorRecord],
    sources_now: LandmarkSet,
    t: float,
    kalman: KalmanBank | None = None,
    truth_provider=None,
):
    """Produce the target landmark set for time t, or SKIP to bypass deformation.

    Histories are never mutated. The ideal variant needs a truth_provider
    callback mapping a timestamp to ground-truth landmarks.
    """
    variant = strategy.variant
    if variant == "baseline":
        return SKIP
    if variant == "ideal":
        if truth_provider is None:
            raise ValueError("ideal variant needs a truth_provider")
        return LandmarkSet(truth_provider(t), t, kind="truth")
    if not detector_history:
        logger.warning("no detector output yet at t=%.4f; skipping deformation", t)
        return SKIP
    latest = detector_history[-1]
    if variant == "naive":
        return latest.targets
    if variant == "propagation":
        return propagate_targets(latest.targets, sources_now, latest.sources_at_capture)
    if variant == "kalman_cv":
        if kalman is None or kalman.state is None:
            logger.warning("kalman bank empty at t=%.4f; skipping deformation", t)
            return SKIP
        return LandmarkSet(kalman.predict_at(t), t, kind="estimated")
    raise ValueError(f"unknown filter variant {variant!r}")
