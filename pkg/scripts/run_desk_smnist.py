#!/usr/bin/env python3
"""Scaled-down sequential-MNIST benchmark: adaptive TC-LIF vs LIF under
online training.

Uses real MNIST IDX files from $TCLIF_DATA_DIR when present, otherwise a
synthetic digit set through the same ingestion path. Finishes in a couple of
minutes on one CPU core.
"""

import argparse
import os

import numpy as np

from tclif.config import build_network, desk_smnist_config
from tclif.data import images_to_sequences
from tclif.synth import load_or_synth_mnist
from tclif.train import make_trainer, train_run, write_metrics


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/desk_smnist")
    parser.add_argument("--n-train", type=int, default=10000)
    parser.add_argument("--n-test", type=int, default=2000)
    parser.add_argument("--neurons", nargs="+",
                        default=["tclif_adaptive", "lif"])
    args = parser.parse_args()

    data_dir = os.environ.get("TCLIF_DATA_DIR")
    tr_x, tr_y, te_x, te_y, source = load_or_synth_mnist(
        data_dir, args.n_train, args.n_test, seed=0)
    print(f"dataset source: {source}")
    os.makedirs(args.out, exist_ok=True)

    results = {}
    for neuron in args.neurons:
        cfg = desk_smnist_config(neuron)
        x_train = images_to_sequences(tr_x, cfg.frame_size)
        x_test = images_to_sequences(te_x, cfg.frame_size)
        net = build_network(cfg, np.random.default_rng(cfg.seed))
        trainer = make_trainer(net, cfg)
        metrics = train_run(trainer, x_train, tr_y, x_test, te_y,
                            log=lambda m: None)
        write_metrics(os.path.join(args.out, f"{neuron}.csv"), metrics)
        results[neuron] = metrics[-1].test_acc
        print(f"{neuron}: "
              + " ".join(f"{m.test_acc:.3f}" for m in metrics))

    for neuron, acc in results.items():
        print(f"final {neuron}: {acc:.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
