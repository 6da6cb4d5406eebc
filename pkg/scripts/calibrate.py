"""Calibration harness for the learning-based acceptance experiments."""
import sys, time
import numpy as np
sys.path.insert(0, "/root/pkg/src")
from gazecast import data as D, tensor as T
from gazecast.config import RunConfig
from gazecast.evaluate import evaluate_model
from gazecast.model import GazeTargetModel
from gazecast.train import train_model


def run(variant, train_samples, test_samples, seed, epochs, lr, res=64, p_drop=0.3):
    cfg = RunConfig(variant=variant, precision="f32", epochs=epochs, learning_rate=lr,
                    batch_size=16, seed=seed, p_drop=p_drop,
                    input_resolution=res, heatmap_resolution=res)
    t0 = time.time()
    untrained = GazeTargetModel(cfg)
    rep0, _ = evaluate_model(untrained, test_samples, cfg)
    model = train_model(cfg, train_samples)
    rep1, _ = evaluate_model(model, test_samples, cfg)
    dt = time.time() - t0
    print(f"  {variant:12s} seed={seed} untrained AvgDist {rep0.avg_dist:.3f} -> trained {rep1.avg_dist:.3f} "
          f"(AUC {rep1.auc:.3f}) [{dt:.0f}s]", flush=True)
    return rep0.avg_dist, rep1.avg_dist, model, cfg


if __name__ == "__main__":
    n_train, n_test, epochs, lr = int(sys.argv[1]), int(sys.argv[2]), int(sys.argv[3]), float(sys.argv[4])
    spec = D.SceneSpec(rng_seed=1001, target_rule="mixed")
    train = D.generate_dataset(spec, n_train)
    test = D.generate_dataset(D.SceneSpec(rng_seed=2002, target_rule="mixed"), n_test)
    print(f"train {n_train}, test {n_test}, epochs {epochs}, lr {lr}")
    run("multimodal", train, test, 0, epochs, lr)
