#!/usr/bin/env python3
"""Decay-variant ablation on a small SHD-style task: adaptive (time-varying
clamped gamma decays) vs modified (fixed learnable decays), averaged over
seeds.

Uses real SPKEV1 files from $TCLIF_DATA_DIR (shd_train.spkev / shd_test.spkev)
when present, otherwise synthetic event streams through the same binning path.
"""

import argparse
import os

import numpy as np

from tclif.config import build_network, desk_shd_config
from tclif.data import load_spike_events, spikes_to_sequences
from tclif.synth import synth_spike_dataset
from tclif.train import make_trainer, train_run


def load_splits(n_train: int, n_test: int):
    root = os.environ.get("TCLIF_DATA_DIR")
    if root and all(os.path.exists(os.path.join(root, f))
                    for f in ("shd_train.spkev", "shd_test.spkev")):
        train = load_spike_events(os.path.join(root, "shd_train.spkev"))
        test = load_spike_events(os.path.join(root, "shd_test.spkev"))
        train.samples = train.samples[:n_train]
        test.samples = test.samples[:n_test]
        return train, test, "shd"
    return (synth_spike_dataset(n_train, seed=100),
            synth_spike_dataset(n_test, seed=999), "synth")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--n-train", type=int, default=1000)
    parser.add_argument("--n-test", type=int, default=400)
    args = parser.parse_args()

    train_ds, test_ds, source = load_splits(args.n_train, args.n_test)
    print(f"dataset source: {source}")
    cfg0 = desk_shd_config()
    x_train, y_train = spikes_to_sequences(train_ds, cfg0.shd_bins)
    x_test, y_test = spikes_to_sequences(test_ds, cfg0.shd_bins)

    accs = {"tclif_adaptive": [], "tclif_modified": []}
    for neuron in accs:
        for seed in args.seeds:
            cfg = desk_shd_config(neuron, seed)
            net = build_network(cfg, np.random.default_rng(cfg.seed))
            trainer = make_trainer(net, cfg)
            metrics = train_run(trainer, x_train, y_train, x_test, y_test)
            accs[neuron].append(metrics[-1].test_acc)
            print(f"{neuron} seed {seed}: {metrics[-1].test_acc:.4f}")

    for neuron, vals in accs.items():
        print(f"mean {neuron}: {np.mean(vals):.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
