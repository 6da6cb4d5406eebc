import sys, time
import numpy as np
sys.path.insert(0, "/root/pkg/src")
from gazecast import data as D
from gazecast.config import RunConfig
from gazecast.evaluate import evaluate_model
from gazecast.model import GazeTargetModel
from gazecast.train import train_model

train = D.generate_dataset(D.SceneSpec(rng_seed=1001), 400)
test = D.generate_dataset(D.SceneSpec(rng_seed=2002), 100)

variants = [
    dict(tag="ldir1_lr2e3",  lambda_dir=1.0, learning_rate=2e-3),
    dict(tag="ldir1_sig4",   lambda_dir=1.0, learning_rate=1e-3, sigma=4.0, binarization_radius=12.0),
    dict(tag="ldir1_lr2e3_sig4", lambda_dir=1.0, learning_rate=2e-3, sigma=4.0, binarization_radius=12.0),
]
for v in variants:
    tag = v.pop("tag")
    cfg = RunConfig(variant="image_only", precision="f32", epochs=8,
                    batch_size=16, seed=0, heatmap_bounded=False, **v)
    t0 = time.time()
    model = train_model(cfg, train)
    rep, _ = evaluate_model(model, test, cfg)
    un = GazeTargetModel(cfg)
    rep0, _ = evaluate_model(un, test, cfg)
    print(f"{tag}: untrained {rep0.avg_dist:.3f} -> {rep.avg_dist:.3f} AUC {rep.auc:.3f} [{time.time()-t0:.0f}s]", flush=True)
