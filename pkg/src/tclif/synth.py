"""Deterministic synthetic stand-ins for the benchmark datasets.

The desk-scale checks run against real S-MNIST / SHD files when they are
available under the data directory; otherwise they fall back to these
generators, which exercise the exact same ingestion code paths (IDX images
and SPKEV1 event files respectively).
"""

from __future__ import annotations

import os

import numpy as np
from scipy import ndimage

from .data import EventStream, SpikeDataset, load_mnist_idx

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def synth_digit_images(n_train: int, n_test: int, seed: int = 0):
    """Handwritten-digit images as uint8 (N, 28, 28) built by upsampling and
    augmenting the bundled scikit-learn digits set. Train and test draw from
    disjoint base images."""
    from sklearn.datasets import load_digits

    base = load_digits()
    images8 = base.images / 16.0       # (1797, 8, 8) in [0, 1]
    labels = base.target
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(labels))
    split = int(0.8 * len(order))
    pools = {"train": order[:split], "test": order[split:]}
    out = {}
    for name, count in (("train", n_train), ("test", n_test)):
        pool = pools[name]
        picks = rng.integers(0, len(pool), size=count)
        imgs = np.zeros((count, 28, 28), dtype=np.uint8)
        labs = np.zeros(count, dtype=np.uint8)
        for i, k in enumerate(picks):
            img = ndimage.zoom(images8[pool[k]], 3.5, order=1)
            dx, dy = rng.integers(-1, 2, size=2)
            img = np.roll(np.roll(img, dx, axis=0), dy, axis=1)
            img = img * rng.uniform(0.9, 1.0)
            img += rng.normal(0.0, 0.01, size=img.shape)
            imgs[i] = np.clip(img * 255.0, 0, 255).astype(np.uint8)
            labs[i] = labels[pool[k]]
        out[name] = (imgs, labs)
    return out["train"][0], out["train"][1], out["test"][0], out["test"][1]


def load_or_synth_mnist(data_dir: str | None, n_train: int, n_test: int,
                        seed: int = 0):
    """Real MNIST IDX files when present, synthetic digits otherwise.
    Returns (train_images, train_labels, test_images, test_labels, source)."""
    if data_dir:
        paths = [os.path.join(data_dir, f)
                 for split in ("train", "test") for f in MNIST_FILES[split]]
        if all(os.path.exists(p) for p in paths):
            tr_x, tr_y = load_mnist_idx(paths[0], paths[1])
            te_x, te_y = load_mnist_idx(paths[2], paths[3])
            rng = np.random.default_rng(seed)
            tr_idx = rng.permutation(tr_x.shape[0])[:n_train]
            te_idx = rng.permutation(te_x.shape[0])[:n_test]
            return (tr_x[tr_idx], tr_y[tr_idx].astype(np.int64),
                    te_x[te_idx], te_y[te_idx].astype(np.int64), "mnist")
    tr_x, tr_y, te_x, te_y = synth_digit_images(n_train, n_test, seed)
    return (tr_x, tr_y.astype(np.int64), te_x, te_y.astype(np.int64), "synth")


def synth_spike_dataset(n_samples: int, seed: int = 0,
                        num_channels: int = 700, num_classes: int = 20,
                        duration_us: int = 1_000_000,
                        events_per_sample: int = 2000) -> SpikeDataset:
    """Audio-digit-like event streams: each class drives a band of channels
    whose center drifts across the sample, plus uniform background noise."""
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n_samples):
        label = int(rng.integers(0, num_classes))
        n_sig = int(events_per_sample * 0.8)
        n_bg = events_per_sample - n_sig
        times = rng.integers(0, duration_us, size=n_sig).astype(np.float64)
        center = (label + 0.5) / num_classes * num_channels
        # slow class-dependent drift across the sample
        drift = 40.0 * np.sin(2.0 * np.pi * (times / duration_us)
                              + label * 0.7)
        chans = center + drift + rng.normal(0.0, 18.0, size=n_sig)
        chans = np.clip(np.round(chans), 0, num_channels - 1)
        bg_t = rng.integers(0, duration_us, size=n_bg).astype(np.float64)
        bg_c = rng.integers(0, num_channels, size=n_bg).astype(np.float64)
        all_t = np.concatenate([times, bg_t]).astype(np.uint64)
        all_c = np.concatenate([chans, bg_c]).astype(np.uint16)
        order = np.argsort(all_t, kind="stable")
        samples.append(EventStream(times_us=all_t[order],
                                   channels=all_c[order], label=label))
    return SpikeDataset(samples=samples, num_channels=num_channels,
                        sample_duration_us=duration_us)


def synth_pixel_stream(n_samples: int, t_len: int, seed: int = 0):
    """Random [0,1] pixel streams of shape (T, N, 1) with random labels;
    used by the memory-profiling runs."""
    rng = np.random.default_rng(seed)
    x = rng.random((t_len, n_samples, 1))
    labels = rng.integers(0, 10, size=n_samples)
    return x, labels
