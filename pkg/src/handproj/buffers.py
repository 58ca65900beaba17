"""Frame buffers, textures and the binary PPM/PGM image formats used for dumps.

The uv plane stores -1 in both channels for pixels outside the foreground;
depth is +inf there. This convention is what lets the warp and fill kernels
treat background uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UV_INVALID = -1.0


@dataclass
class FrameBuffers:
    """Render-side per-pixel planes at projector resolution."""

    mask: np.ndarray   # (H, W) uint8, 1 where covered
    uv: np.ndarray     # (H, W, 2) float32, UV_INVALID outside the mask
    color: np.ndarray  # (H, W, 3) float32 in [0, 1]
    depth: np.ndarray  # (H, W) float32 camera-space depth, +inf outside
    timestamp: float = 0.0

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @classmethod
    def empty(cls, width: int, height: int, timestamp: float = 0.0) -> "FrameBuffers":
        return cls(
            mask=np.zeros((height, width), dtype=np.uint8),
            uv=np.full((height, width, 2), UV_INVALID, dtype=np.float32),
            color=np.zeros((height, width, 3), dtype=np.float32),
            depth=np.full((height, width), np.inf, dtype=np.float32),
            timestamp=timestamp,
        )

    def copy(self) -> "FrameBuffers":
        return FrameBuffers(
            self.mask.copy(), self.uv.copy(), self.color.copy(), self.depth.copy(), self.timestamp
        )


@dataclass
class Texture:
    """Three-channel image sampled with clamp addressing."""

    image: np.ndarray  # (H, W, 3) float32 in [0, 1]

    def __post_init__(self):
        self.image = np.ascontiguousarray(self.image, dtype=np.float32)
        if self.image.ndim != 3 or self.image.shape[2] != 3 or self.image.size == 0:
            raise ValueError("texture must be a nonempty (H, W, 3) image")

    @property
    def width(self) -> int:
        return self.image.shape[1]

    @property
    def height(self) -> int:
        return self.image.shape[0]

    def sample(self, uv: np.ndarray) -> np.ndarray:
        """Vectorized bilinear lookup, uv (..., 2) clamped to the edge texels."""
        uv = np.asarray(uv, dtype=np.float64)
        th, tw = self.image.shape[:2]
        x = uv[..., 0] * tw - 0.5
        y = uv[..., 1] * th - 0.5
        x0 = np.floor(x).astype(np.int64)
        y0 = np.floor(y).astype(np.int64)
        fx = (x - x0)[..., None]
        fy = (y - y0)[..., None]
        x0c = np.clip(x0, 0, tw - 1)
        x1c = np.clip(x0 + 1, 0, tw - 1)
        y0c = np.clip(y0, 0, th - 1)
        y1c = np.clip(y0 + 1, 0, th - 1)
        img = self.image
        top = img[y0c, x0c] * (1 - fx) + img[y0c, x1c] * fx
        bot = img[y1c, x0c] * (1 - fx) + img[y1c, x1c] * fx
        return top * (1 - fy) + bot * fy


def make_texture(name: str = "bands", size: int = 512) -> Texture:
    """Built-in procedural textures.

    "bands": smooth sinusoidal color bands, strictly non-black so coverage can
    be read off the color planes. "checker": 16x16 checkerboard.
    """
    u, v = np.meshgrid(np.linspace(0, 1, size), np.linspace(0, 1, size))
    if name == "bands":
        r = 0.55 + 0.35 * np.sin(2 * np.pi * (3 * u + 1 * v))
        g = 0.55 + 0.35 * np.sin(2 * np.pi * (1 * u + 4 * v) + 1.3)
        b = 0.55 + 0.35 * np.sin(2 * np.pi * (5 * u - 2 * v) + 2.1)
        img = np.stack([r, g, b], axis=-1)
        img = np.clip(img, 0.15, 1.0)
    elif name == "checker":
        c = ((np.floor(u * 16).astype(int) + np.floor(v * 16).astype(int)) % 2).astype(np.float64)
        img = np.stack([0.2 + 0.7 * c, 0.25 + 0.5 * c, 0.9 - 0.6 * c], axis=-1)
    else:
        raise ValueError(f"unknown texture {name!r} (want 'bands' or 'checker', or a PPM path)")
    return Texture(img.astype(np.float32))


# -- PPM / PGM -----------------------------------------------------------------


def write_ppm(path, image: np.ndarray) -> None:
    """Binary P6. Accepts float [0,1] or uint8 (H, W, 3)."""
    img = np.asarray(image)
    if img.dtype != np.uint8:
        img = (np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(img.tobytes())


def write_pgm(path, image: np.ndarray) -> None:
    """Binary P5. Binary masks are spread to 0/255 for visibility."""
    img = np.asarray(image)
    if img.dtype == np.uint8 and img.max(initial=0) <= 1:
        img = img * np.uint8(255)
    elif img.dtype != np.uint8:
        img = (np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(img.tobytes())


def read_ppm(path) -> np.ndarray:
    """Read binary P6 into float32 (H, W, 3) in [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    if fields[0] != b"P6":
        raise ValueError("not a binary PPM (P6) file")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    pos += 1
    raw = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=pos)
    return (raw.reshape(h, w, 3).astype(np.float32)) / float(maxval)


def frame_filename(prefix: str, timestamp: float, ext: str) -> str:
    """Dump naming convention: the frame timestamp in microseconds."""
    return f"{prefix}_{int(round(timestamp * 1e6)):09d}.{ext}"
