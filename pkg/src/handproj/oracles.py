"""Oracle suites: fast paths checked against the reference implementations.

Each suite returns (passed, lines); the cli `oracle` command prints the lines
and maps the flag to an exit code, the acceptance tests assert on it. The
tolerances here are the declared contract, do not loosen them.
"""

from __future__ import annotations

import numpy as np

from . import boundary, filters, mls, reference

SUITES = ("jfa", "mls", "kalman")


def jfa_suite(n_cases: int = 20, size: int = 128, seed: int = 2024):
    """Random seed layouts: assigned distance must equal brute-force NN distance
    for >= 99.9% of pixels, with excess <= 2 px elsewhere."""
    rng = np.random.default_rng(seed)
    lines = []
    ok = True
    for case in range(n_cases):
        density = 10 ** rng.uniform(-3.5, -1.0)
        seeds = rng.random((size, size)) < density
        if not seeds.any():
            seeds[rng.integers(size), rng.integers(size)] = True
        labels = np.where(seeds, boundary.REGION_OVERLAP, boundary.REGION_CAMERA_ONLY).astype(np.uint8)
        field = boundary.jump_flood(labels)
        truth = reference.nearest_seed_distances(seeds)
        exact = np.mean(field.dist2 == truth)
        excess = np.sqrt(field.dist2.astype(np.float64)) - np.sqrt(truth)
        max_excess = float(excess.max())
        case_ok = exact >= 0.999 and max_excess <= 2.0
        ok &= case_ok
        lines.append(
            f"jfa case {case:02d}: seeds={int(seeds.sum()):5d} exact={exact:.5f} "
            f"max_excess={max_excess:.3f}px -> {'ok' if case_ok else 'FAIL'}"
        )
    return ok, lines


def mls_suite(seed: int = 7, n_sets: int = 10, n_queries: int = 40, n_affine: int = 100):
    """Pointwise agreement with the scalar MLS oracle at 1e-9, plus exact affine
    reproduction for random affine control pairs."""
    rng = np.random.default_rng(seed)
    lines = []
    ok = True
    worst = 0.0
    for _ in range(n_sets):
        p = rng.uniform(0, 256, (21, 2))
        q = p + rng.normal(0, 8, (21, 2))
        v = rng.uniform(-16, 272, (n_queries, 2))
        got = mls.mls_map(p, q, v)
        for i in range(n_queries):
            want = reference.mls_affine_point(p, q, v[i])
            worst = max(worst, float(np.linalg.norm(got[i] - want)))
    pointwise_ok = worst <= 1e-9
    ok &= pointwise_ok
    lines.append(f"mls pointwise vs oracle: worst={worst:.3e}px (tol 1e-9) -> "
                 f"{'ok' if pointwise_ok else 'FAIL'}")

    worst_aff = 0.0
    for _ in range(n_affine):
        p = rng.uniform(0, 256, (12, 2))
        a = rng.normal(0, 1, (2, 2)) + np.eye(2)
        t = rng.normal(0, 20, 2)
        q = p @ a + t
        v = rng.uniform(0, 256, (20, 2))
        got = mls.mls_map(p, q, v)
        want = v @ a + t
        worst_aff = max(worst_aff, float(np.abs(got - want).max()))
    affine_ok = worst_aff <= 1e-9
    ok &= affine_ok
    lines.append(f"mls affine reproduction ({n_affine} pairs): worst={worst_aff:.3e}px "
                 f"(tol 1e-9) -> {'ok' if affine_ok else 'FAIL'}")
    return ok, lines


def kalman_suite(seed: int = 11, n_steps: int = 10_000):
    """Step-for-step agreement with the textbook recursion at 1e-9 over random
    predict/update sequences; covariance PSD throughout."""
    rng = np.random.default_rng(seed)
    q, r = 40.0, 0.5
    z0 = rng.uniform(0, 100, 2)
    state = filters.KalmanState.from_measurement(z0, 0.0, r)
    ref_x = state.x[0].copy()
    ref_p = state.cov[0].copy()

    worst = 0.0
    min_eig = np.inf
    t = 0.0
    pos = z0.copy()
    for _ in range(n_steps):
        dt = float(rng.uniform(0.001, 0.05))
        t += dt
        has_meas = rng.random() < 0.7
        pos = pos + rng.normal(0, 2.0, 2)
        meas = pos if has_meas else None
        state, pred = filters.kalman_step(state, dt, meas, q, r)

        z_seq = [pos if has_meas else np.array([np.nan, np.nan])]
        (states,) = (reference.kalman_cv_reference(z_seq, [dt], q, r, ref_x, ref_p),)
        ref_x, ref_p = states[0]
        worst = max(
            worst,
            float(np.abs(state.x[0] - ref_x).max()),
            float(np.abs(state.cov[0] - ref_p).max()),
        )
        min_eig = min(min_eig, float(np.linalg.eigvalsh(state.cov[0]).min()))
    ok = worst <= 1e-9 and min_eig >= -1e-9
    lines = [
        f"kalman vs textbook recursion over {n_steps} steps: worst={worst:.3e} (tol 1e-9)",
        f"kalman covariance min eigenvalue: {min_eig:.3e} (>= -1e-9)",
        f"-> {'ok' if ok else 'FAIL'}",
    ]
    return ok, lines


def run_suite(name: str):
    if name == "jfa":
        return jfa_suite()
    if name == "mls":
        return mls_suite()
    if name == "kalman":
        return kalman_suite()
    raise KeyError(name)
