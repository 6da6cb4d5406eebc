"""Training loop: deterministic shuffling, per-batch dropout plans, AdamW
steps, and a plain-text loss CSV (step, components, total)."""

from __future__ import annotations

import math

import numpy as np

from . import nn
from . import tensor as T
from .config import RunConfig
from .data import SceneSample
from .errors import GazecastError
from .fusion import EMPTY_PLAN, sample_dropout_plan
from .model import Batch, GazeTargetModel, build_batch, compute_losses, sample_features

CSV_HEADER = "step,loss_gaze,loss_dir,loss_io,loss_att,loss_total"


class TrainingDivergedError(GazecastError):
    """Loss became NaN/Inf during training."""


def train_model(cfg: RunConfig, samples: list[SceneSample],
                init_states: list[dict] | None = None,
                csv_path=None, log=None) -> GazeTargetModel:
    """Train a fresh model on ``samples`` for cfg.epochs; deterministic
    given (cfg, samples)."""
    T.set_default_dtype(cfg.precision)
    model = GazeTargetModel(cfg)
    for state in init_states or []:
        model.load_partial(state)

    optimizer = nn.AdamW(
        model.parameters(), learning_rate=cfg.learning_rate,
        betas=(cfg.beta1, cfg.beta2), epsilon=cfg.epsilon,
        weight_decay=cfg.weight_decay,
    )
    shuffle_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 1)))
    plan_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 2)))

    feature_cache = [sample_features(s, cfg) for s in samples]
    csv_file = open(csv_path, "w") if csv_path else None
    if csv_file:
        csv_file.write(CSV_HEADER + "\n")

    step = 0
    try:
        for epoch in range(cfg.epochs):
            order = shuffle_rng.permutation(len(samples))
            for start in range(0, len(samples), cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                batch = build_batch(None, cfg, cache=[feature_cache[i] for i in idx])
                plan = EMPTY_PLAN
                if cfg.effective_p_drop > 0.0:
                    plan = sample_dropout_plan(cfg.modalities, cfg.effective_p_drop, plan_rng)
                T.fresh_tape()
                result = model(batch, plan)
                losses = compute_losses(result, batch, cfg, plan)
                total = losses.total_value
                if not math.isfinite(total):
                    raise TrainingDivergedError(
                        f"non-finite loss {total} at step {step} (epoch {epoch})"
                    )
                T.backward(losses.total)
                optimizer.step()
                optimizer.zero_grad()
                step += 1
                if csv_file:
                    csv_file.write(
                        f"{step},{losses.gaze!r},{losses.direction!r},"
                        f"{losses.inout!r},{losses.attention!r},{total!r}\n"
                    )
            if log:
                log(f"epoch {epoch + 1}/{cfg.epochs}: loss {total:.6f}")
    finally:
        if csv_file:
            csv_file.close()
        T.fresh_tape()
    return model
