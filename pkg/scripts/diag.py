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

for lr, epochs in [(1e-3, 15), (3e-3, 15)]:
    cfg = RunConfig(variant="image_only", precision="f32", epochs=epochs, learning_rate=lr,
                    batch_size=16, seed=0)
    t0 = time.time()
    losses = []
    model = train_model(cfg, train, log=lambda m: losses.append(m))
    rep, dumps = evaluate_model(model, test, cfg)
    print(f"lr={lr} epochs={epochs}: AvgDist {rep.avg_dist:.3f} AUC {rep.auc:.3f} [{time.time()-t0:.0f}s]")
    print("   loss tail:", losses[-3:])
    batch = build_batch(test[:2], cfg)
    with T.no_grad():
        hm = model(batch).heatmap.data
    print(f"   heatmap range [{hm.min():.4f}, {hm.max():.4f}] mean {hm.mean():.4f}")
