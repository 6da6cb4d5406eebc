import sys, time
import numpy as np
sys.path.insert(0, "/root/pkg/src")
from gazecast import data as D, tensor as T
from gazecast.config import RunConfig
from gazecast.evaluate import evaluate_model
from gazecast.model import GazeTargetModel, build_batch
from gazecast.train import train_model

train = D.generate_dataset(D.SceneSpec(rng_seed=1001), 400)
test = D.generate_dataset(D.SceneSpec(rng_seed=2002), 100)

for epochs in (6, 12):
    cfg = RunConfig(variant="image_only", precision="f32", epochs=epochs, learning_rate=1e-3,
                    batch_size=16, seed=0, heatmap_bounded=False)
    t0 = time.time()
    model = train_model(cfg, train)
    rep, dumps = evaluate_model(model, test, cfg)
    print(f"linear head epochs={epochs}: AvgDist {rep.avg_dist:.3f} AUC {rep.auc:.3f} [{time.time()-t0:.0f}s]", flush=True)
    batch = build_batch(test[:2], cfg)
    with T.no_grad():
        hm = model(batch).heatmap.data
    print(f"   heatmap range [{hm.min():.4f}, {hm.max():.4f}]", flush=True)
