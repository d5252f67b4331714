"""Leave-one-out error table, layer ablation and decode-mode ablation on ETH/UCY.

    python benchmarks/reproduce_tables.py /path/to/ethucy [--out results.json]

The data directory holds one subdirectory per scene (eth, hotel, univ,
zara1, zara2) with the scene's ``frame ped x y`` text files.
"""
import argparse
import json
import logging
import time
from dataclasses import replace

from trajcnn.data import SCENES, load_data_dir
from trajcnn.model import ModelConfig
from trajcnn.train import TrainConfig, run_all_folds

RUNS = {
    "cnn": ("cnn", {}),
    "lstm": ("lstm", {}),
    "linear": ("linear", {}),
    "cnn_3_layers": ("cnn", {"num_layers": 3}),
    "cnn_5_layers": ("cnn", {"num_layers": 5}),
    "cnn_sequential": ("cnn", {"decode_mode": "sequential"}),
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("data_dir")
    ap.add_argument("--out", default="results.json")
    ap.add_argument("--runs", default=",".join(RUNS))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    scenes = load_data_dir(args.data_dir)
    results = {}
    for name in args.runs.split(","):
        kind, overrides = RUNS[name]
        mcfg = replace(ModelConfig(seed=args.seed), **overrides)
        t0 = time.time()
        rep = run_all_folds(scenes, mcfg, TrainConfig(seed=args.seed), kind=kind)
        results[name] = rep.to_dict() | {"seconds": time.time() - t0}
        print(f"{name:16s} " + "  ".join(
            f"{s} {rep.scenes[s]['ade']:.2f}/{rep.scenes[s]['fde']:.2f}" for s in SCENES)
            + f"  AVG {rep.avg_ade:.2f}/{rep.avg_fde:.2f}", flush=True)
        with open(args.out, "w") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()
