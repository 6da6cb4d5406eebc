"""Prediction heads (heatmap regression, in/out classification) and losses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from . import tensor as T
from .encoders import EncoderConfig
from .fusion import DropoutPlan, ModalityEmbedder
from .errors import ShapeMismatchError
from .tensor import Tensor

BCE_CLAMP = 1e-7


@dataclass
class LossBreakdown:
    """Component losses plus their exact weighted combination.

    ``total`` is the differentiable tensor used for backward; the float
    fields are the logged values. Recomputing
    lambda_gaze*gaze + lambda_dir*direction + lambda_io*inout + lambda_att*attention
    in that order reproduces total bit-exactly.
    """

    gaze: float
    direction: float
    inout: float
    attention: float
    lambda_gaze: float
    lambda_dir: float
    lambda_io: float
    lambda_att: float
    total: Tensor

    @property
    def total_value(self) -> float:
        return self.total.item()


class HeatmapHead(nn.Module):
    """Parameter-free upsampling to heatmap resolution followed by a conv
    stack (d -> d/2 -> d/4 -> 1), sigmoid-bounded by default."""

    def __init__(self, cfg: EncoderConfig, heatmap_resolution: int,
                 rng: np.random.Generator, upsample: str = "nearest",
                 bounded: bool = True):
        d = cfg.feature_channels
        self.factor = heatmap_resolution // cfg.feature_resolution
        if self.factor * cfg.feature_resolution != heatmap_resolution:
            raise ShapeMismatchError(
                f"heatmap resolution {heatmap_resolution} is not a multiple of "
                f"feature resolution {cfg.feature_resolution}"
            )
        self.upsample = upsample
        self.bounded = bounded
        self.conv1 = nn.Conv2d(d, d // 2, 3, rng, padding=1)
        self.conv2 = nn.Conv2d(d // 2, d // 4, 3, rng, padding=1)
        self.conv3 = nn.Conv2d(d // 4, 1, 3, rng, padding=1)

    def forward(self, fmap: Tensor) -> Tensor:
        up = (T.upsample_bilinear if self.upsample == "bilinear" else T.upsample_nearest)(
            fmap, self.factor
        )
        x = T.relu(self.conv1(up))
        x = T.relu(self.conv2(x))
        x = self.conv3(x)
        return T.sigmoid(x) if self.bounded else x


class InOutHead(nn.Module):
    """Scene embedding (same architecture as the modality embedder) joined
    with the gaze embedding, then two linear layers and a sigmoid."""

    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator):
        self.scene_embed = ModalityEmbedder(cfg, rng)
        self.fc1 = nn.Linear(2 * cfg.embedding_size, cfg.embedding_size, rng)
        self.fc2 = nn.Linear(cfg.embedding_size, 1, rng)

    def forward(self, fmap: Tensor, gaze_embedding: Tensor) -> Tensor:
        scene = self.scene_embed(fmap)
        joined = T.concat([scene, gaze_embedding], axis=1)
        logit = self.fc2(T.relu(self.fc1(joined)))
        return T.reshape(T.sigmoid(logit), (fmap.shape[0],))


def argmax_point(heatmap: np.ndarray | Tensor) -> tuple[float, float]:
    """Pixel-center coordinates of the first maximum in row-major order."""
    data = heatmap.data if isinstance(heatmap, Tensor) else np.asarray(heatmap)
    img = data.reshape(data.shape[-2], data.shape[-1])
    h, w = img.shape
    flat_idx = int(np.argmax(img))
    i, j = divmod(flat_idx, w)
    return ((j + 0.5) / w, (i + 0.5) / h)


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


def loss_gaze(pred: Tensor, target: Tensor, sample_mask: np.ndarray | None = None) -> Tensor:
    """Mean per-pixel squared error; an optional 0/1 per-sample mask limits
    the average to in-frame samples (all-masked batches contribute 0)."""
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"heatmap shapes differ: {pred.shape} vs {target.shape}")
    diff = T.sub(pred, target)
    sq = T.mul(diff, diff)
    if sample_mask is None:
        return T.tmean(sq)
    count = float(sample_mask.sum())
    if count == 0.0:
        return T.scale(T.tsum(sq), 0.0)
    per_pixel = float(np.prod(pred.shape[1:]))
    m = sample_mask.reshape((-1,) + (1,) * (pred.ndim - 1)).astype(pred.dtype)
    return T.scale(T.tsum(T.mul(sq, Tensor(m))), 1.0 / (count * per_pixel))


def loss_dir(pred_dir: Tensor, target_dir: Tensor,
             sample_mask: np.ndarray | None = None) -> Tensor:
    """1 - cos(angle) between predicted and target unit directions, in [0,2].

    Batched inputs are [N,2]; a mask averages over valid samples only.
    """
    cos = T.cosine_similarity(pred_dir, target_dir, axis=-1)
    one_minus = T.sub(Tensor(np.ones(cos.shape, dtype=cos.dtype)), cos)
    if cos.ndim == 0 or sample_mask is None:
        return T.tmean(one_minus) if cos.ndim else one_minus
    count = float(sample_mask.sum())
    if count == 0.0:
        return T.scale(T.tsum(one_minus), 0.0)
    return T.scale(T.tsum(T.mul(one_minus, Tensor(sample_mask.astype(cos.dtype)))), 1.0 / count)


def loss_io(pred: Tensor, target: np.ndarray) -> Tensor:
    """Binary cross entropy with probabilities clamped to [1e-7, 1-1e-7]."""
    p = T.clamp(pred, BCE_CLAMP, 1.0 - BCE_CLAMP)
    y = Tensor(np.asarray(target, dtype=p.dtype).reshape(p.shape))
    ones = Tensor(np.ones(p.shape, dtype=p.dtype))
    term = T.add(T.mul(y, T.tlog(p)), T.mul(T.sub(ones, y), T.tlog(T.sub(ones, p))))
    return T.scale(T.tmean(term), -1.0)


def loss_att(weights: Tensor, plan: DropoutPlan, modalities: tuple[str, ...]) -> Tensor:
    """Sum of attention weights of dropped modalities (batch mean); exactly
    zero when the plan is empty."""
    if not plan.dropped:
        return Tensor(np.zeros(()))
    picked = None
    for idx, m in enumerate(modalities):
        if m in plan.dropped:
            w_m = T.tmean(weights[:, idx]) if weights.ndim == 2 else weights[idx]
            picked = w_m if picked is None else T.add(picked, w_m)
    return picked


def total_loss(gaze: Tensor, direction: Tensor, inout: Tensor, attention: Tensor,
               lambda_gaze: float = 100.0, lambda_dir: float = 0.1,
               lambda_io: float = 1.0, lambda_att: float = 1.0) -> LossBreakdown:
    """Weighted combination, components retained for logging."""
    total = T.scale(gaze, lambda_gaze)
    total = T.add(total, T.scale(direction, lambda_dir))
    total = T.add(total, T.scale(inout, lambda_io))
    total = T.add(total, T.scale(attention, lambda_att))
    return LossBreakdown(
        gaze=float(gaze.data), direction=float(direction.data),
        inout=float(inout.data), attention=float(attention.data),
        lambda_gaze=lambda_gaze, lambda_dir=lambda_dir,
        lambda_io=lambda_io, lambda_att=lambda_att,
        total=total,
    )
