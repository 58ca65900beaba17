"""Error and coverage metrics.

The filter comparison measures every run against a least-squares cubic
B-spline fitted to the ideal run's landmark traces. Two distances are
available: the time-aligned distance |pos(t) - spline(t)| (the headline
error; lag is visible in it) and the parameterization-free nearest distance
to the curve (distance_to_curve). Mask IoU and fill ratios quantify the
boundary-reduction coverage claims.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline, make_lsq_spline


@dataclass
class SplineFit:
    """Cubic B-spline per landmark per axis over the scenario time range."""

    t0: float
    t1: float
    frame_rate: float           # samples per second of the fitted traces
    splines: list               # (N, 2) nested list of scipy BSpline
    residual_px: np.ndarray     # (N,) RMS fit residual per landmark
    knot_count: int

    @property
    def n_landmarks(self) -> int:
        return len(self.splines)

    def evaluate(self, lm: int, t) -> np.ndarray:
        """Spline position(s) of one landmark; t scalar or (M,). Returns (..., 2)."""
        t = np.clip(np.asarray(t, dtype=np.float64), self.t0, self.t1)
        sx, sy = self.splines[lm]
        return np.stack([sx(t), sy(t)], axis=-1)

    def evaluate_all(self, t: float) -> np.ndarray:
        """All landmark positions at one time, (N, 2)."""
        return np.array([self.evaluate(lm, t) for lm in range(self.n_landmarks)])

    def velocity(self, lm: int, t) -> np.ndarray:
        t = np.clip(np.asarray(t, dtype=np.float64), self.t0, self.t1)
        sx, sy = self.splines[lm]
        return np.stack([sx.derivative()(t), sy.derivative()(t)], axis=-1)


def fit_ideal_spline(times: np.ndarray, traces: np.ndarray) -> SplineFit:
    """Least-squares cubic fit of per-landmark 2D traces.

    times (F,) strictly increasing, traces (F, N, 2). Interior knot count is
    F//10 clamped to [4, 64], knots placed at sample-time quantiles.
    """
    times = np.asarray(times, dtype=np.float64)
    traces = np.asarray(traces, dtype=np.float64)
    f = len(times)
    if f < 8:
        raise ValueError(f"need at least 8 samples per landmark, got {f}")
    if traces.shape[0] != f or traces.ndim != 3 or traces.shape[2] != 2:
        raise ValueError("traces must be (F, N, 2)")
    n_knots = int(np.clip(f // 10, 4, 64))
    interior = np.quantile(times, np.linspace(0, 1, n_knots + 2)[1:-1])
    knots = np.r_[[times[0]] * 4, interior, [times[-1]] * 4]

    n = traces.shape[1]
    splines = []
    residual = np.empty(n)
    for lm in range(n):
        pair = []
        err2 = 0.0
        for axis in range(2):
            sp = make_lsq_spline(times, traces[:, lm, axis], knots, k=3)
            pair.append(BSpline(sp.t, sp.c, sp.k))
            err2 += float(np.mean((pair[axis](times) - traces[:, lm, axis]) ** 2))
        splines.append(pair)
        residual[lm] = np.sqrt(err2)
    dt = np.median(np.diff(times))
    return SplineFit(float(times[0]), float(times[-1]), 1.0 / dt, splines, residual, n_knots)


def distance_to_curve(fit: SplineFit, lm: int, point, hint_t: float | None = None) -> float:
    """Nearest distance from a point to one landmark's curve image.

    Dense sampling at 10x the trace frame rate over the whole time range
    seeds a local golden-section refinement, so the result matches a global
    dense search; the hint only reorders which bracket is refined first.
    """
    point = np.asarray(point, dtype=np.float64)
    n_dense = max(32, int(np.ceil((fit.t1 - fit.t0) * fit.frame_rate * 10)))
    ts = np.linspace(fit.t0, fit.t1, n_dense)
    pts = fit.evaluate(lm, ts)
    d2 = ((pts - point) ** 2).sum(axis=1)
    order = [int(np.argmin(d2))]
    if hint_t is not None:
        order.insert(0, int(np.clip(round((hint_t - fit.t0) / (fit.t1 - fit.t0) * (n_dense - 1)), 0, n_dense - 1)))
    best = np.inf
    for idx in order:
        lo = ts[max(0, idx - 1)]
        hi = ts[min(n_dense - 1, idx + 1)]
        best = min(best, _golden_refine(fit, lm, point, lo, hi))
    return float(min(best, np.sqrt(d2.min())))


def _golden_refine(fit: SplineFit, lm: int, point: np.ndarray, lo: float, hi: float) -> float:
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc = ((fit.evaluate(lm, c) - point) ** 2).sum()
    fd = ((fit.evaluate(lm, d) - point) ** 2).sum()
    for _ in range(60):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = ((fit.evaluate(lm, c) - point) ** 2).sum()
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = ((fit.evaluate(lm, d) - point) ** 2).sum()
        if b - a < 1e-12:
            break
    return float(np.sqrt(min(fc, fd)))


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two binary masks; 1.0 when both are empty."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("masks must share dimensions")
    fa = a != 0
    fb = b != 0
    union = np.count_nonzero(fa | fb)
    if union == 0:
        return 1.0
    return np.count_nonzero(fa & fb) / union


@dataclass
class MetricsReport:
    """Per-frame series plus run-level summaries for one simulation run."""

    times: np.ndarray            # (F,) presentation timestamps
    mean_err_px: np.ndarray      # (F,) mean over landmarks, time-aligned spline distance
    median_err_px: np.ndarray    # (F,)
    max_err_px: np.ndarray       # (F,)
    mean_abs_vx_px_s: np.ndarray  # (F,) mean |horizontal velocity| of the ideal spline
    iou: np.ndarray              # (F,)
    fill_ratio: np.ndarray       # (F,)

    @property
    def summary(self) -> dict:
        return {
            "frames": len(self.times),
            "mean_err_px": float(np.mean(self.mean_err_px)),
            "median_err_px": float(np.median(self.median_err_px)),
            "max_err_px": float(np.max(self.max_err_px)) if len(self.times) else float("nan"),
            "mean_iou": float(np.mean(self.iou)),
            "mean_fill_ratio": float(np.mean(self.fill_ratio)),
        }

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("present_time,mean_err_px,median_err_px,max_err_px,mean_abs_vx_px_s,iou,fill_ratio\n")
            for i in range(len(self.times)):
                fh.write(
                    "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n"
                    % (
                        self.times[i],
                        self.mean_err_px[i],
                        self.median_err_px[i],
                        self.max_err_px[i],
                        self.mean_abs_vx_px_s[i],
                        self.iou[i],
                        self.fill_ratio[i],
                    )
                )

    def print_summary(self, label: str = "") -> None:
        s = self.summary
        head = f"metrics[{label}]" if label else "metrics"
        print(f"{head}: frames={s['frames']} mean_err={s['mean_err_px']:.4f}px "
              f"median_err={s['median_err_px']:.4f}px max_err={s['max_err_px']:.4f}px "
              f"iou={s['mean_iou']:.4f} fill={s['mean_fill_ratio']:.4f}")


def report_against_spline(fit: SplineFit, times, mapped, iou, fill_ratio) -> MetricsReport:
    """Score a run's mapped landmark positions against the ideal-run spline.

    times (F,), mapped (F, N, 2); iou and fill_ratio are passed through from
    the run's frame log.
    """
    times = np.asarray(times, dtype=np.float64)
    mapped = np.asarray(mapped, dtype=np.float64)
    f, n = mapped.shape[:2]
    ref = np.empty_like(mapped)
    vx = np.empty((f, n))
    for lm in range(n):
        ref[:, lm, :] = fit.evaluate(lm, times)
        vx[:, lm] = fit.velocity(lm, times)[:, 0]
    err = np.linalg.norm(mapped - ref, axis=2)  # (F, N)
    return MetricsReport(
        times=times,
        mean_err_px=err.mean(axis=1),
        median_err_px=np.median(err, axis=1),
        max_err_px=err.max(axis=1),
        mean_abs_vx_px_s=np.abs(vx).mean(axis=1),
        iou=np.asarray(iou, dtype=np.float64),
        fill_ratio=np.asarray(fill_ratio, dtype=np.float64),
    )
