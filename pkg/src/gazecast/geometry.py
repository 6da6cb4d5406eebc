"""Gaze-cone generation, ground-truth heatmaps, head masks, 2D gaze vectors.

Coordinate conventions, used everywhere in the package:
  * image points are normalized (x, y) in [0,1]^2, x rightward, y downward;
  * pixel (i, j) = (row, col) has its center at ((j+0.5)/w, (i+0.5)/h);
  * a point's containing pixel is (floor(y*h), floor(x*w)), clamped.

Everything here is pure and content-independent: outputs depend only on
annotations and resolutions, never on image pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import DomainError
from .tensor import Tensor

EYE_SOURCES = ("annotated", "pose_midpoint", "prototypal")


@dataclass(frozen=True)
class HeadBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (0.0 <= self.x_min < self.x_max <= 1.0 and 0.0 <= self.y_min < self.y_max <= 1.0):
            raise DomainError(
                f"invalid head box ({self.x_min},{self.y_min},{self.x_max},{self.y_max})"
            )

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


@dataclass(frozen=True)
class EyePoint:
    x: float
    y: float
    source: str = "annotated"

    def __post_init__(self):
        if not (0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0):
            raise DomainError(f"eye point ({self.x},{self.y}) outside [0,1]^2")
        if self.source not in EYE_SOURCES:
            raise DomainError(f"unknown eye source {self.source!r}")

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class GazeVector2D:
    """A unit-norm 2D direction."""

    x: float
    y: float

    def __post_init__(self):
        n = math.hypot(self.x, self.y)
        if abs(n - 1.0) > 1e-9:
            raise DomainError(f"gaze vector ({self.x},{self.y}) has norm {n}, expected 1")

    @classmethod
    def of(cls, vx: float, vy: float) -> "GazeVector2D":
        n = math.hypot(vx, vy)
        if n < 1e-12:
            raise DomainError("cannot normalize a zero gaze vector")
        return cls(vx / n, vy / n)

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass
class GazeCone:
    image: Tensor  # [1, h, w], values in [0, 1]
    gaze: np.ndarray  # the direction that produced it
    aperture: float


@dataclass
class GroundTruthHeatmap:
    image: Tensor  # [1, h, w], peak exactly 1 at the rounded gaze point
    gaze_points: list[tuple[float, float]]
    sigma: float


def pixel_centers(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    """Normalized (x, y) coordinates of all pixel centers, each (h, w)."""
    xs = (np.arange(w) + 0.5) / w
    ys = (np.arange(h) + 0.5) / h
    return np.broadcast_to(xs, (h, w)).copy(), np.broadcast_to(ys[:, None], (h, w)).copy()


def containing_pixel(x: float, y: float, h: int, w: int) -> tuple[int, int]:
    i = min(int(y * h), h - 1)
    j = min(int(x * w), w - 1)
    return max(i, 0), max(j, 0)


def cone_batch(gaze: Tensor, eyes: np.ndarray, h: int, w: int,
               aperture: float = math.pi) -> Tensor:
    """Gaze-cone images for a batch of direction vectors.

    ``gaze`` is an [N, 2] tensor (differentiable), ``eyes`` an [N, 2] array
    of normalized eye positions. Each pixel scores the cosine between the
    gaze direction and the eye-to-pixel direction, clipped at zero; pixels
    whose angular offset exceeds aperture/2 are zeroed; the pixel containing
    the eye is assigned 1. Output is [N, 1, h, w].
    """
    if gaze.ndim != 2 or gaze.shape[1] != 2:
        raise DomainError(f"gaze must be [N,2], got {gaze.shape}")
    n = gaze.shape[0]
    norms = np.linalg.norm(gaze.data, axis=1)
    if np.any(norms < 1e-12):
        raise DomainError("zero gaze vector in cone generation")

    cx, cy = pixel_centers(h, w)
    dx = cx[None] - eyes[:, 0, None, None]  # (N, h, w)
    dy = cy[None] - eyes[:, 1, None, None]
    dist = np.hypot(dx, dy)
    eye_hot = np.zeros((n, h, w))
    for k in range(n):
        i, j = containing_pixel(eyes[k, 0], eyes[k, 1], h, w)
        eye_hot[k, i, j] = 1.0
    safe = np.where(dist > 0.0, dist, 1.0)
    ux = Tensor(dx / safe)
    uy = Tensor(dy / safe)

    gx = T.reshape(gaze[:, 0], (n, 1, 1))
    gy = T.reshape(gaze[:, 1], (n, 1, 1))
    gnorm = T.reshape(T.tsqrt(T.tsum(T.mul(gaze, gaze), axis=1)), (n, 1, 1))
    cos_map = T.div(T.add(T.mul(gx, ux), T.mul(gy, uy)), gnorm)

    keep = (cos_map.data >= math.cos(aperture / 2.0) - 1e-15).astype(cos_map.data.dtype)
    cone = T.mul(T.relu(cos_map), Tensor(keep * (1.0 - eye_hot)))
    cone = T.add(cone, Tensor(eye_hot))
    return T.reshape(cone, (n, 1, h, w))


def generate_cone(gaze: GazeVector2D | Tensor, eye: EyePoint, h: int, w: int,
                  aperture: float = math.pi) -> GazeCone:
    """Single-sample cone; see ``cone_batch`` for the pixel rule."""
    if h < 2 or w < 2:
        raise DomainError(f"cone resolution ({h},{w}) too small")
    if isinstance(gaze, GazeVector2D):
        gt = Tensor(gaze.xy.reshape(1, 2))
        gvec = gaze.xy
    else:
        gt = T.reshape(gaze, (1, 2)) if gaze.ndim == 1 else gaze
        gvec = gt.data[0].copy()
    img = cone_batch(gt, np.asarray([[eye.x, eye.y]]), h, w, aperture)
    return GazeCone(image=T.reshape(img, (1, h, w)), gaze=gvec, aperture=aperture)


def render_head_mask(box: HeadBox, h: int, w: int) -> Tensor:
    """Binary [1,h,w] image: 1 where the pixel center lies inside the box."""
    cx, cy = pixel_centers(h, w)
    inside = (
        (cx >= box.x_min) & (cx <= box.x_max) & (cy >= box.y_min) & (cy <= box.y_max)
    )
    return Tensor(inside.astype(T.get_default_dtype()).reshape(1, h, w))


def make_gt_heatmap(points: list[tuple[float, float]], h: int, w: int,
                    sigma: float) -> GroundTruthHeatmap:
    """Per-pixel maximum of per-point Gaussians, peak exactly 1.

    ``sigma`` is in pixels at the (h, w) resolution. Each Gaussian is
    centered on the pixel containing its point, untruncated and
    peak-normalized.
    """
    if not points:
        raise DomainError("ground-truth heatmap needs at least one point")
    for x, y in points:
        if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
            raise DomainError(f"gaze point ({x},{y}) outside [0,1]^2")
    rows = np.arange(h)[:, None]
    cols = np.arange(w)[None, :]
    acc = np.zeros((h, w))
    for x, y in points:
        ci, cj = containing_pixel(x, y, h, w)
        d2 = (rows - ci) ** 2 + (cols - cj) ** 2
        np.maximum(acc, np.exp(-d2 / (2.0 * sigma * sigma)), out=acc)
    return GroundTruthHeatmap(
        image=Tensor(acc.reshape(1, h, w)),
        gaze_points=[(float(x), float(y)) for x, y in points],
        sigma=float(sigma),
    )


def gt_gaze_direction(eye: EyePoint, gaze_point: tuple[float, float]) -> GazeVector2D:
    """Unit vector from the eye to the annotated gaze point."""
    vx = gaze_point[0] - eye.x
    vy = gaze_point[1] - eye.y
    if math.hypot(vx, vy) < 1e-12:
        raise DomainError("gaze point coincides with the eye; direction undefined")
    return GazeVector2D.of(vx, vy)


def prototypal_eye(box: HeadBox) -> EyePoint:
    """Fallback eye location: horizontally centered, one third from the
    top of the head box (eyes sit in the upper third of a head)."""
    return EyePoint(
        x=(box.x_min + box.x_max) / 2.0,
        y=box.y_min + (box.y_max - box.y_min) / 3.0,
        source="prototypal",
    )


# ---------------------------------------------------------------------------
# PGM export for visual inspection
# ---------------------------------------------------------------------------


def write_pgm(path, image: np.ndarray) -> None:
    """Binary PGM (P5, maxval 255) from a 2D float image in [0,1]."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3 and img.shape[0] == 1:
        img = img[0]
    if img.ndim != 2:
        raise ValueError(f"PGM writer expects a 2D image, got shape {img.shape}")
    data = np.rint(255.0 * np.clip(img, 0.0, 1.0)).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read back a binary P5 PGM written by ``write_pgm`` (uint8 values)."""
    with open(path, "rb") as f:
        if f.readline().strip() != b"P5":
            raise ValueError(f"{path}: not a binary PGM")
        dims = f.readline().split()
        w, hgt = int(dims[0]), int(dims[1])
        maxval = int(f.readline())
        if maxval != 255:
            raise ValueError(f"{path}: unsupported maxval {maxval}")
        return np.frombuffer(f.read(w * hgt), dtype=np.uint8).reshape(hgt, w)
