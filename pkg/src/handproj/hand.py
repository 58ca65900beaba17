"""Articulated hand: skeleton, procedural skinned mesh, motion, sensor models.

The skeleton is a generic joint tree; `hand_skeleton()` builds the canonical
21-joint layout (wrist + 4 joints per finger x 5 fingers, MediaPipe-style
ordering). Meshes are generated procedurally as one capsule per bone plus a
flattened-ellipsoid palm slab, with a per-finger/palm UV atlas whose seams sit
on the side edges of the hand.

Sensor models are deliberately simple: the 3D estimator re-reports delayed
ground truth with a constant per-joint bias plus Gaussian jitter, the camera
is a timestamped binary-mask source, and the 2D landmark detector is ground
truth plus pixel jitter delivered late. All randomness flows through
explicitly passed numpy Generators.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import quat
from .mls import LandmarkSet

FINGER_NAMES = ("thumb", "index", "middle", "ring", "pinky")

# per-parent offsets (mm) of the canonical skeleton, hand-local frame:
# +x thumb side, +y finger direction, +z out of the back of the hand
_HAND_OFFSETS = {
    "wrist": (None, (0.0, 0.0, 0.0)),
    "thumb_mcp": ("wrist", (28.0, 22.0, 0.0)),
    "thumb_pip": ("thumb_mcp", (26.0, 26.0, 0.0)),
    "thumb_dip": ("thumb_pip", (18.0, 18.0, 0.0)),
    "thumb_tip": ("thumb_dip", (14.0, 14.0, 0.0)),
    "index_mcp": ("wrist", (24.0, 88.0, 0.0)),
    "index_pip": ("index_mcp", (0.0, 42.0, 0.0)),
    "index_dip": ("index_pip", (0.0, 26.0, 0.0)),
    "index_tip": ("index_dip", (0.0, 22.0, 0.0)),
    "middle_mcp": ("wrist", (7.0, 92.0, 0.0)),
    "middle_pip": ("middle_mcp", (0.0, 46.0, 0.0)),
    "middle_dip": ("middle_pip", (0.0, 29.0, 0.0)),
    "middle_tip": ("middle_dip", (0.0, 24.0, 0.0)),
    "ring_mcp": ("wrist", (-11.0, 88.0, 0.0)),
    "ring_pip": ("ring_mcp", (0.0, 42.0, 0.0)),
    "ring_dip": ("ring_pip", (0.0, 27.0, 0.0)),
    "ring_tip": ("ring_dip", (0.0, 22.0, 0.0)),
    "pinky_mcp": ("wrist", (-27.0, 78.0, 0.0)),
    "pinky_pip": ("pinky_mcp", (0.0, 33.0, 0.0)),
    "pinky_dip": ("pinky_pip", (0.0, 21.0, 0.0)),
    "pinky_tip": ("pinky_dip", (0.0, 18.0, 0.0)),
}

# capsule radii (proximal, distal) per finger, mm
_FINGER_RADII = {
    "thumb": (12.0, 9.0),
    "index": (9.0, 6.5),
    "middle": (9.5, 7.0),
    "ring": (9.0, 6.5),
    "pinky": (8.0, 5.5),
}


class SkeletonError(ValueError):
    """Joint graph is not a tree rooted at joint 0."""


@dataclass
class Skeleton:
    """Joint tree with rest-pose local transforms (rotation + translation, mm).

    Joints must be listed in topological order (parent index < joint index,
    root parent = -1), which also rules out cycles.
    """

    names: list[str]
    parents: np.ndarray          # (J,) int, -1 for the root
    local_positions: np.ndarray  # (J, 3) mm, offset from parent
    local_rotations: np.ndarray  # (J, 4) xyzw unit quaternions

    def __post_init__(self):
        self.parents = np.asarray(self.parents, dtype=np.int32)
        self.local_positions = np.asarray(self.local_positions, dtype=np.float64)
        self.local_rotations = np.asarray(self.local_rotations, dtype=np.float64)
        j = len(self.names)
        if self.parents.shape != (j,):
            raise SkeletonError("parent table does not match joint count")
        if j == 0 or self.parents[0] != -1:
            raise SkeletonError("joint 0 must be the root")
        if np.any(self.parents[1:] < 0) or np.any(self.parents[1:] >= np.arange(1, j)):
            raise SkeletonError("joints must be topologically ordered under a single root")

    @property
    def n_joints(self) -> int:
        return len(self.names)

    def bones(self) -> list[tuple[int, int]]:
        """(parent, child) segment list; the bone is bound to its parent joint."""
        return [(int(self.parents[j]), j) for j in range(1, self.n_joints)]

    def forward_kinematics(self, local_rotations=None, local_positions=None):
        """Compose local transforms root-down. Returns (quats (J,4), positions (J,3))."""
        rows = self.local_rotations if local_rotations is None else np.asarray(local_rotations)
        offs = self.local_positions if local_positions is None else np.asarray(local_positions)
        j = self.n_joints
        world_q = np.empty((j, 4))
        world_p = np.empty((j, 3))
        world_q[0] = rows[0]
        world_p[0] = offs[0]
        for i in range(1, j):
            p = self.parents[i]
            world_q[i] = quat.multiply(world_q[p], rows[i])
            world_p[i] = world_p[p] + quat.rotate(world_q[p], offs[i])
        return world_q, world_p

    def rest_world(self):
        return self.forward_kinematics()


def hand_skeleton() -> Skeleton:
    """The canonical 21-joint hand (wrist + 5 fingers x MCP/PIP/DIP/TIP)."""
    names = list(_HAND_OFFSETS.keys())
    idx = {n: i for i, n in enumerate(names)}
    parents = [-1] + [idx[_HAND_OFFSETS[n][0]] for n in names[1:]]
    offsets = [list(_HAND_OFFSETS[n][1]) for n in names]
    rots = np.tile(quat.IDENTITY, (len(names), 1))
    return Skeleton(names, np.array(parents), np.array(offsets), rots)


def _is_hand_layout(skeleton: Skeleton) -> bool:
    if skeleton.n_joints != 21:
        return False
    chains = np.flatnonzero(skeleton.parents == 0)
    if len(chains) != 5:
        return False
    for c in chains:
        j, depth = c, 1
        while True:
            kids = np.flatnonzero(skeleton.parents == j)
            if len(kids) == 0:
                break
            if len(kids) != 1:
                return False
            j = kids[0]
            depth += 1
        if depth != 4:
            return False
    return True


@dataclass
class Pose:
    """World rigid transform per joint at one instant (quaternions xyzw, mm)."""

    timestamp: float
    rotations: np.ndarray     # (J, 4)
    translations: np.ndarray  # (J, 3)

    def __post_init__(self):
        self.rotations = np.asarray(self.rotations, dtype=np.float64)
        self.translations = np.asarray(self.translations, dtype=np.float64)
        if not np.isfinite(self.timestamp) or self.timestamp < 0.0:
            raise ValueError(f"pose timestamp must be finite and >= 0, got {self.timestamp}")
        norms = np.linalg.norm(self.rotations, axis=-1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ValueError("pose rotations must be unit quaternions")

    @property
    def joint_positions(self) -> np.ndarray:
        return self.translations

    def copy(self) -> "Pose":
        return Pose(self.timestamp, self.rotations.copy(), self.translations.copy())


@dataclass
class HandMesh:
    """Skinned triangle mesh in the rest pose.

    weights reference joints (a bone follows its proximal joint); at most 4
    influences per vertex, padded with weight 0. seam_edges lists the UV-island
    boundary edges as vertex index pairs.
    """

    vertices: np.ndarray       # (N, 3) mm
    triangles: np.ndarray      # (T, 3) int32
    uvs: np.ndarray            # (N, 2) in [0, 1]
    weight_joints: np.ndarray  # (N, 4) int32
    weight_values: np.ndarray  # (N, 4)
    seam_edges: np.ndarray     # (E, 2) int32
    islands: np.ndarray        # (N,) int32 UV-island id per vertex

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)


@dataclass(frozen=True)
class MotionScript:
    """Closed-form ground-truth motion, evaluable at any t in [0, duration].

    kind: translate | rotate | articulate | combined. amplitude is mm for
    translate, degrees for rotate/articulate; combined uses amplitude mm of
    translation plus 0.6*amplitude degrees of rotation and articulation.
    All channels are sums of sinusoids, so the pose is smooth in t and the
    rest pose is reproduced exactly at t = 0.
    """

    kind: str
    amplitude: float
    frequency: float
    duration: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("translate", "rotate", "articulate", "combined"):
            raise ValueError(f"unknown motion kind {self.kind!r}")
        if self.duration <= 0:
            raise ValueError("duration must be positive")


@dataclass
class SensorModels:
    """Rates, latencies and noise levels of the three sensing paths."""

    lmc_rate_hz: float = 100.0
    lmc_latency_s: float = 0.010
    lmc_bias_mm: np.ndarray = field(default_factory=lambda: np.zeros(3))
    lmc_jitter_std_mm: float = 0.0
    camera_interval_s: float = 0.00185
    camera_latency_s: float = 0.0
    detector_latency_s: float = 0.016
    detector_jitter_std_px: float = 0.0

    def __post_init__(self):
        self.lmc_bias_mm = np.asarray(self.lmc_bias_mm, dtype=np.float64)
        if self.lmc_rate_hz <= 0 or self.camera_interval_s <= 0:
            raise ValueError("sensor rates must be positive")
        for name in ("lmc_latency_s", "camera_latency_s", "detector_latency_s"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


# -- scene mount ---------------------------------------------------------------

# Hand-local frame -> world: flip so fingers point up on screen and place the
# hand in front of the camera (world == camera frame, +z into the scene).
MOUNT_ROTATION = quat.from_axis_angle(np.array([1.0, 0.0, 0.0]), np.pi)
MOUNT_TRANSLATION = np.array([0.0, 60.0, 420.0])

_BASE_SKELETON = hand_skeleton()


def _finger_chains(skeleton: Skeleton) -> list[list[int]]:
    chains = []
    for c in np.flatnonzero(skeleton.parents == 0):
        chain = [int(c)]
        while True:
            kids = np.flatnonzero(skeleton.parents == chain[-1])
            if len(kids) == 0:
                break
            chain.append(int(kids[0]))
        chains.append(chain)
    return chains


def _curl_axes(skeleton: Skeleton) -> np.ndarray:
    """Per-joint axis to bend about for articulation (zero for non-finger joints)."""
    _, rest_p = skeleton.rest_world()
    axes = np.zeros((skeleton.n_joints, 3))
    for chain in _finger_chains(skeleton):
        for a, b in zip(chain[:-1], chain[1:]):
            d = rest_p[b] - rest_p[a]
            n = np.cross(d, [0.0, 0.0, 1.0])
            norm = np.linalg.norm(n)
            if norm > 1e-9:
                axes[a] = n / norm
    return axes


_CURL_AXES = _curl_axes(_BASE_SKELETON)
_CURL_SCALE = {"mcp": 1.0, "pip": 0.8, "dip": 0.6}


def sample_ground_truth(script: MotionScript, t: float, skeleton: Skeleton | None = None) -> Pose:
    """Ground-truth world pose at time t. Deterministic in (script, t)."""
    if not (0.0 <= t <= script.duration):
        raise ValueError(f"t={t} outside [0, {script.duration}]")
    skeleton = skeleton or _BASE_SKELETON
    phase = np.sin(2.0 * np.pi * script.frequency * t)

    kind = script.kind
    trans_amp = rot_amp = art_amp = 0.0
    if kind == "translate":
        trans_amp = script.amplitude
    elif kind == "rotate":
        rot_amp = np.deg2rad(script.amplitude)
    elif kind == "articulate":
        art_amp = np.deg2rad(script.amplitude)
    else:
        trans_amp = script.amplitude
        rot_amp = np.deg2rad(0.6 * script.amplitude)
        art_amp = np.deg2rad(0.6 * script.amplitude)

    local_rots = skeleton.local_rotations
    if art_amp != 0.0:
        rng = np.random.default_rng(script.seed)
        finger_amp = art_amp * (0.7 + 0.3 * rng.random(5))
        local_rots = local_rots.copy()
        for fi, chain in enumerate(_finger_chains(skeleton)):
            for depth, joint in enumerate(chain[:-1]):
                scale = (1.0, 0.8, 0.6)[min(depth, 2)]
                axis = _CURL_AXES[joint] if skeleton is _BASE_SKELETON else _curl_axes(skeleton)[joint]
                if np.linalg.norm(axis) == 0.0:
                    continue
                bend = quat.from_axis_angle(axis, -finger_amp[fi % 5] * scale * phase)
                local_rots[joint] = quat.multiply(local_rots[joint], bend)

    world_q, world_p = skeleton.forward_kinematics(local_rotations=local_rots)

    # mount into the camera-facing world frame
    world_q = quat.multiply(MOUNT_ROTATION[None, :], world_q)
    world_p = quat.rotate(MOUNT_ROTATION[None, :], world_p) + MOUNT_TRANSLATION

    if rot_amp != 0.0:
        spin = quat.from_axis_angle(np.array([0.0, 0.0, 1.0]), rot_amp * phase)
        wrist = world_p[0].copy()
        world_q = quat.multiply(spin[None, :], world_q)
        world_p = quat.rotate(spin[None, :], world_p - wrist) + wrist
    if trans_amp != 0.0:
        world_p = world_p + np.array([trans_amp * phase, 0.0, 0.0])

    return Pose(t, world_q, world_p)


def rest_pose(skeleton: Skeleton | None = None) -> Pose:
    """Mounted rest pose (the t=0 pose of every script)."""
    skeleton = skeleton or _BASE_SKELETON
    world_q, world_p = skeleton.rest_world()
    world_q = quat.multiply(MOUNT_ROTATION[None, :], world_q)
    world_p = quat.rotate(MOUNT_ROTATION[None, :], world_p) + MOUNT_TRANSLATION
    return Pose(0.0, world_q, world_p)


# -- sensors -------------------------------------------------------------------


def lmc_observe(gt: Pose, models: SensorModels, rng: np.random.Generator) -> Pose:
    """Estimator output for a ground-truth pose: constant bias + positional jitter.

    The caller samples `gt` at (event time - lmc_latency_s); the returned pose
    keeps that capture timestamp, which is what makes downstream extrapolation
    compensate the latency.
    """
    noise = rng.normal(0.0, 1.0, gt.translations.shape)
    trans = gt.translations + models.lmc_bias_mm + models.lmc_jitter_std_mm * noise
    return Pose(gt.timestamp, gt.rotations.copy(), np.asarray(trans))


def extrapolate_pose(history: list[Pose], target_t: float) -> Pose:
    """Constant-velocity extrapolation of the last two distinct-time samples.

    Translations extrapolate linearly, rotations along the geodesic. With
    fewer than two usable samples the latest pose is returned unchanged.
    """
    if not history:
        raise ValueError("empty pose history")
    newest = history[-1]
    older = None
    for p in reversed(history[:-1]):
        if p.timestamp < newest.timestamp:
            older = p
            break
    if older is None:
        return newest
    s = (target_t - older.timestamp) / (newest.timestamp - older.timestamp)
    trans = older.translations + s * (newest.translations - older.translations)
    delta = quat.multiply(quat.conjugate(older.rotations), newest.rotations)
    rots = quat.normalize(quat.multiply(older.rotations, quat.power(delta, s)))
    return Pose(max(target_t, 0.0), rots, trans)


def detect_landmarks(
    camera_mask,
    gt_landmarks_at_capture: LandmarkSet,
    models: SensorModels,
    rng: np.random.Generator,
) -> LandmarkSet:
    """Simulated 2D landmark detector: capture-time truth plus pixel jitter.

    camera_mask is accepted for interface parity with a real detector; the
    simulated one only consumes the ground-truth projections and the noise
    stream. The result keeps the capture timestamp; the timeline delivers it
    detector_latency_s later.
    """
    pts = np.asarray(gt_landmarks_at_capture.points, dtype=np.float64)
    noise = rng.normal(0.0, 1.0, pts.shape)
    if models.detector_jitter_std_px > 0.0:
        pts = pts + models.detector_jitter_std_px * noise
    return LandmarkSet(pts, gt_landmarks_at_capture.timestamp, kind="detected")


# -- skinning ------------------------------------------------------------------


def skin(mesh: HandMesh, pose: Pose, rest: Pose) -> np.ndarray:
    """Linear blend skinning: v' = sum_b w_b * M_b * M_b,rest^-1 * v."""
    n_joints = len(rest.translations)
    if mesh.weight_joints.max() >= n_joints:
        raise ValueError("mesh weights reference a joint missing from the pose")
    # per-joint rest->posed rigid map: A = R * R_rest^T, b = t - A * t_rest
    r = quat.to_matrix(pose.rotations)
    r_rest = quat.to_matrix(rest.rotations)
    a = r @ np.swapaxes(r_rest, 1, 2)
    b = pose.translations - np.einsum("jik,jk->ji", a, rest.translations)
    out = np.zeros_like(mesh.vertices)
    for k in range(mesh.weight_joints.shape[1]):
        w = mesh.weight_values[:, k]
        if not np.any(w):
            continue
        j = mesh.weight_joints[:, k]
        moved = np.einsum("nik,nk->ni", a[j], mesh.vertices) + b[j]
        out += w[:, None] * moved
    return out


# -- procedural mesh -----------------------------------------------------------


def _capsule(p0, p1, r0, r1, n_axial, n_radial, seam_dir):
    """Capsule from p0 to p1 with linearly varying radius.

    seam_dir picks the radial direction of the UV seam; the seam column is
    duplicated (u = 0 and u = 1 copies) so UV interpolation never wraps.
    Returns (vertices, triangles, u, v) with v running tip-to-tip.
    """
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    axis = p1 - p0
    length = np.linalg.norm(axis)
    z = axis / length
    seam = np.asarray(seam_dir, dtype=np.float64)
    seam = seam - z * np.dot(seam, z)
    if np.linalg.norm(seam) < 1e-6:
        seam = np.cross(z, [0.0, 0.0, 1.0])
        if np.linalg.norm(seam) < 1e-6:
            seam = np.cross(z, [0.0, 1.0, 0.0])
    x = seam / np.linalg.norm(seam)
    y = np.cross(z, x)

    cols = n_radial + 1
    theta = 2.0 * np.pi * np.arange(cols) / n_radial  # last column == first position
    ring_dirs = np.outer(np.cos(theta), x) + np.outer(np.sin(theta), y)
    ring_u = np.arange(cols) / n_radial

    rows = []  # (center, radius, v)
    total = length + r0 + r1
    rows.append((p0 - z * r0 * 0.7071, r0 * 0.7071, (r0 - r0 * 0.7071) / total))
    for k in range(n_axial):
        t = k / (n_axial - 1)
        rows.append((p0 + axis * t, r0 + (r1 - r0) * t, (r0 + length * t) / total))
    rows.append((p1 + z * r1 * 0.7071, r1 * 0.7071, (r0 + length + r1 * 0.7071) / total))

    verts = [p0 - z * r0]
    u = [0.5]
    v = [0.0]
    for center, radius, vv in rows:
        verts.extend(center + radius * ring_dirs)
        u.extend(ring_u)
        v.extend([vv] * cols)
    verts.append(p1 + z * r1)
    u.append(0.5)
    v.append(1.0)

    tris = []
    n_rows = len(rows)
    first = 1
    for j in range(n_radial):  # bottom fan
        tris.append((0, first + j + 1, first + j))
    for rrow in range(n_rows - 1):
        a = first + rrow * cols
        b = a + cols
        for j in range(n_radial):
            tris.append((a + j, a + j + 1, b + j))
            tris.append((a + j + 1, b + j + 1, b + j))
    apex = len(verts) - 1
    top = first + (n_rows - 1) * cols
    for j in range(n_radial):  # top fan
        tris.append((apex, top + j, top + j + 1))
    return (
        np.array(verts),
        np.array(tris, dtype=np.int32),
        np.array(u),
        np.array(v),
    )


def _ellipsoid(center, semiaxes, n_lat, n_lon, seam_dir):
    """Lat-long tessellated ellipsoid; the (duplicated) longitude seam faces seam_dir."""
    center = np.asarray(center, dtype=np.float64)
    semi = np.asarray(semiaxes, dtype=np.float64)
    lon0 = np.arctan2(seam_dir[1], seam_dir[0])
    cols = n_lon + 1
    verts = [center + semi * np.array([0.0, 0.0, 1.0])]
    u = [0.5]
    v = [0.0]
    for i in range(1, n_lat + 1):
        lat = np.pi * i / (n_lat + 1)
        for j in range(cols):
            lon = lon0 + 2.0 * np.pi * j / n_lon
            d = np.array(
                [np.sin(lat) * np.cos(lon), np.sin(lat) * np.sin(lon), np.cos(lat)]
            )
            verts.append(center + semi * d)
            u.append(j / n_lon)
            v.append(i / (n_lat + 1))
    verts.append(center + semi * np.array([0.0, 0.0, -1.0]))
    u.append(0.5)
    v.append(1.0)

    tris = []
    for j in range(n_lon):
        tris.append((0, 1 + j + 1, 1 + j))
    for i in range(n_lat - 1):
        a = 1 + i * cols
        b = a + cols
        for j in range(n_lon):
            tris.append((a + j, a + j + 1, b + j))
            tris.append((a + j + 1, b + j + 1, b + j))
    south = len(verts) - 1
    last = 1 + (n_lat - 1) * cols
    for j in range(n_lon):
        tris.append((south, last + j, last + j + 1))
    return np.array(verts), np.array(tris, dtype=np.int32), np.array(u), np.array(v)


def _segment_distances(points, p0, p1):
    d = p1 - p0
    denom = float(np.dot(d, d))
    if denom < 1e-12:
        return np.linalg.norm(points - p0, axis=1)
    t = np.clip((points - p0) @ d / denom, 0.0, 1.0)
    nearest = p0 + t[:, None] * d
    return np.linalg.norm(points - nearest, axis=1)


def _nearest_two_bone_weights(points, skeleton: Skeleton):
    """Inverse-distance weights over the two nearest bone segments.

    Weights accumulate on each bone's proximal joint; with a single bone every
    vertex is fully bound to it.
    """
    _, rest_p = skeleton.rest_world()
    bones = skeleton.bones()
    dists = np.stack(
        [_segment_distances(points, rest_p[p], rest_p[c]) for p, c in bones]
    )
    n = len(points)
    wj = np.zeros((n, 4), dtype=np.int32)
    wv = np.zeros((n, 4))
    if len(bones) == 1:
        wj[:, 0] = bones[0][0]
        wv[:, 0] = 1.0
        return wj, wv
    order = np.argsort(dists, axis=0)
    b1, b2 = order[0], order[1]
    d1 = dists[b1, np.arange(n)]
    d2 = dists[b2, np.arange(n)]
    j1 = np.array([bones[i][0] for i in b1], dtype=np.int32)
    j2 = np.array([bones[i][0] for i in b2], dtype=np.int32)
    denom = d1 + d2
    w1 = np.where(denom > 1e-12, d2 / np.where(denom > 0, denom, 1.0), 1.0)
    same = j1 == j2
    wj[:, 0] = j1
    wv[:, 0] = np.where(same, 1.0, w1)
    wj[:, 1] = np.where(same, 0, j2)
    wv[:, 1] = np.where(same, 0.0, 1.0 - w1)
    return wj, wv


def _pack_island(u, v, u_range, v_range):
    return np.stack(
        [u_range[0] + u * (u_range[1] - u_range[0]), v_range[0] + v * (v_range[1] - v_range[0])],
        axis=1,
    )


def generate_hand_mesh(skeleton: Skeleton, target_vertex_count: int, atlas: int = 0) -> HandMesh:
    """Capsule-per-bone mesh with a palm slab and a per-finger/palm UV atlas.

    Vertex count lands within +-10% of the target. atlas selects one of two
    seam layouts (islands mirrored, cylinder seams rotated to the opposite
    side) so the UV mapping can be swapped when the hand flips.
    """
    if target_vertex_count < 100:
        raise ValueError("target_vertex_count must be >= 100")
    if not isinstance(skeleton, Skeleton):
        raise SkeletonError("generate_hand_mesh needs a Skeleton")

    _, rest_p = skeleton.rest_world()
    is_hand = _is_hand_layout(skeleton)
    seam_side = np.array([1.0, 0.0, 0.0]) if atlas == 0 else np.array([-1.0, 0.0, 0.0])

    parts = []  # (verts, tris, uvs, island)
    if is_hand:
        chains = _finger_chains(skeleton)
        # thumb keeps its wrist segment; other fingers are covered by the palm slab
        segments = []  # (p0, p1, r0, r1, island)
        for fi, chain in enumerate(chains):
            name = FINGER_NAMES[fi]
            r_prox, r_dist = _FINGER_RADII[name]
            joints = ([0] + chain) if name == "thumb" else chain
            n_seg = len(joints) - 1
            for s in range(n_seg):
                t0, t1 = s / n_seg, (s + 1) / n_seg
                r0 = r_prox + (r_dist - r_prox) * t0
                r1 = r_prox + (r_dist - r_prox) * t1
                segments.append((rest_p[joints[s]], rest_p[joints[s + 1]], r0, r1, fi + 1))

        lengths = np.array([np.linalg.norm(p1 - p0) for p0, p1, *_ in segments])
        capsule_budget = 0.74 * target_vertex_count
        n_radial = 8
        for (p0, p1, r0, r1, island), ln in zip(segments, lengths):
            share = capsule_budget * ln / lengths.sum()
            n_axial = max(2, int(round((share - 2) / (n_radial + 1) - 2)))
            parts.append((*_capsule(p0, p1, r0, r1, n_axial, n_radial, seam_side), island))

        used = sum(len(p[0]) for p in parts)
        remaining = max(64, target_vertex_count - used)
        n_lat = max(4, int(np.sqrt(remaining)))
        n_lon = max(6, int(round((remaining - 2) / n_lat)) - 1)
        mcps = rest_p[[c[0] for c in chains]]
        palm_pts = np.vstack([rest_p[0], mcps])
        center = np.array(
            [0.5 * (palm_pts[:, 0].min() + palm_pts[:, 0].max()),
             0.5 * (rest_p[0, 1] + mcps[:, 1].mean()),
             0.0]
        )
        semi = np.array(
            [0.5 * (palm_pts[:, 0].max() - palm_pts[:, 0].min()) + 12.0,
             0.5 * (mcps[:, 1].mean() - rest_p[0, 1]) + 18.0,
             11.0]
        )
        parts.append((*_ellipsoid(center, semi, n_lat, n_lon, seam_side), 0))
    else:
        bones = skeleton.bones()
        lengths = np.array(
            [np.linalg.norm(rest_p[c] - rest_p[p]) for p, c in bones]
        )
        n_radial = 8
        for (p, c), ln in zip(bones, lengths):
            share = target_vertex_count * ln / lengths.sum()
            n_axial = max(2, int(round((share - 2) / (n_radial + 1) - 2)))
            radius = 0.18 * ln + 2.0
            parts.append((*_capsule(rest_p[p], rest_p[c], radius, radius, n_axial, n_radial, seam_side), 1))

    # island UV layout: palm block on one side, finger strips on the other
    if atlas == 0:
        palm_u = (0.02, 0.44)
        strip_u = lambda fi: (0.50 + 0.10 * fi, 0.58 + 0.10 * fi)
    else:
        palm_u = (0.56, 0.98)
        strip_u = lambda fi: (0.02 + 0.10 * fi, 0.10 + 0.10 * fi)

    island_parts: dict[int, list[int]] = {}
    for i, part in enumerate(parts):
        island_parts.setdefault(part[4], []).append(i)

    all_v, all_t, all_uv, all_island = [], [], [], []
    offset = 0
    for i, (verts, tris, u, v, island) in enumerate(parts):
        if island == 0:
            uv = _pack_island(u, v, palm_u, (0.02, 0.98))
        else:
            members = island_parts[island]
            k = members.index(i)
            n = len(members)
            v0 = 0.02 + 0.96 * k / n
            v1 = 0.02 + 0.96 * (k + 1) / n - 0.01
            uv = _pack_island(u, v, strip_u(island - 1), (v0, v1))
        all_v.append(verts)
        all_t.append(tris + offset)
        all_uv.append(uv)
        all_island.append(np.full(len(verts), island, dtype=np.int32))
        offset += len(verts)

    vertices = np.vstack(all_v)
    triangles = np.vstack(all_t).astype(np.int32)
    uvs = np.clip(np.vstack(all_uv), 0.0, 1.0)
    islands = np.concatenate(all_island)
    wj, wv = _nearest_two_bone_weights(vertices, skeleton)

    # island boundaries double as seams: edges used by exactly one triangle
    edges = np.sort(
        np.vstack([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]),
        axis=1,
    )
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    seam_edges = uniq[counts == 1].astype(np.int32)

    return HandMesh(vertices, triangles, uvs, wj, wv, seam_edges, islands)


def save_obj(mesh: HandMesh, path) -> None:
    """Wavefront-style text export (positions, UVs, faces)."""
    with open(path, "w") as fh:
        fh.write(f"# handproj mesh: {mesh.n_vertices} vertices, {len(mesh.triangles)} triangles\n")
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.6f} {v[1]:.6f} {v[2]:.6f}\n")
        for uv in mesh.uvs:
            fh.write(f"vt {uv[0]:.6f} {uv[1]:.6f}\n")
        for t in mesh.triangles:
            a, b, c = (int(i) + 1 for i in t)
            fh.write(f"f {a}/{a} {b}/{b} {c}/{c}\n")
