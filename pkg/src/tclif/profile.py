"""Memory comparison of the two trainers: exact stored-real counts (the
platform-independent measure both trainers maintain internally) plus the
process-level peak allocation from tracemalloc, across sequence lengths."""

from __future__ import annotations

import tracemalloc
from dataclasses import dataclass

import numpy as np

from .config import TrainConfig, build_network
from .synth import synth_pixel_stream
from .train import make_trainer

DEFAULT_LENGTHS = (49, 98, 196, 392, 784)
MEMORY_HEADER = "T,algo,stored_reals,peak_bytes"


@dataclass
class ProfileRow:
    t_len: int
    algo: str
    stored_reals: int
    peak_bytes: int


def profile_run(t_len: int, algo: str, batch: int = 32, hidden: int = 128,
                seed: int = 0) -> ProfileRow:
    """Train one batch of a 1-channel pixel stream of length ``t_len`` and
    report the trainer's peak stored-real count and the allocator peak."""
    cfg = TrainConfig(arch=[1, hidden, 10], frame_size=1, trainer=algo,
                      neuron="tclif_adaptive", optimizer="sgd", epochs=1,
                      batch_size=batch, seed=seed, grad_clip=0.0)
    net = build_network(cfg, np.random.default_rng(seed))
    x, labels = synth_pixel_stream(batch, t_len, seed)
    trainer = make_trainer(net, cfg)
    tracemalloc.start()
    try:
        trainer.train_batch(x, labels, 0, lr=0.01)
        _, peak = tracemalloc.get_traced_memory()
    finally:
        tracemalloc.stop()
    return ProfileRow(t_len, algo, trainer.peak_stored_reals, int(peak))


def memory_report(path: str, lengths=DEFAULT_LENGTHS,
                  algos=("bptt", "eprop"), batch: int = 32,
                  hidden: int = 128, seed: int = 0) -> list[ProfileRow]:
    rows = [profile_run(t, algo, batch, hidden, seed)
            for t in lengths for algo in algos]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(MEMORY_HEADER + "\n")
        for r in rows:
            fh.write(f"{r.t_len},{r.algo},{r.stored_reals},{r.peak_bytes}\n")
    return rows


def linear_fit(ts, ys) -> tuple[float, float, float]:
    """Least-squares line through (t, y); returns (slope, intercept, r2)."""
    ts = np.asarray(ts, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    slope, intercept = np.polyfit(ts, ys, 1)
    pred = slope * ts + intercept
    ss_res = float(np.sum((ys - pred) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2
