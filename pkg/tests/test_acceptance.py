"""Acceptance suite: each test checks one criterion at its stated tolerance
and prints a single PASS/FAIL line with the measured value."""

import time

import numpy as np
import pytest

from tclif.config import (build_network, desk_shd_config, desk_smnist_config)
from tclif.data import images_to_sequences, load_spike_events, \
    spikes_to_sequences
from tclif.profile import linear_fit, memory_report
from tclif.synth import load_or_synth_mnist, synth_spike_dataset
from tclif.train import make_trainer, train_run
from tclif.verify import (suite_feedforward_exactness, suite_linear_fd,
                          suite_recursion)


def _report(name, passed, detail):
    print(f"ACCEPTANCE {name}: {'PASS' if passed else 'FAIL'} ({detail})")
    assert passed, f"{name}: {detail}"


def test_criterion_eligibility_recursion_vs_unrolled():
    start = time.monotonic()
    r = suite_recursion(200, seed=0)
    elapsed = time.monotonic() - start
    _report("eligibility-recursion",
            r.max_rel_err <= 1e-10 and elapsed < 10.0,
            f"max rel err {r.max_rel_err:.3e} <= 1e-10, {elapsed:.1f}s < 10s")


def test_criterion_feedforward_exactness():
    start = time.monotonic()
    r = suite_feedforward_exactness(50, seed=1)
    elapsed = time.monotonic() - start
    _report("feedforward-exactness",
            r.max_rel_err <= 1e-8 and elapsed < 30.0,
            f"max rel err {r.max_rel_err:.3e} <= 1e-8, {elapsed:.1f}s < 30s")


def test_criterion_linear_regime_finite_differences():
    start = time.monotonic()
    r = suite_linear_fd(seed=2)
    elapsed = time.monotonic() - start
    _report("linear-regime-fd",
            r.max_rel_err <= 1e-5 and elapsed < 60.0,
            f"max rel err {r.max_rel_err:.3e} <= 1e-5, {elapsed:.1f}s < 60s")


def test_criterion_reductions():
    from helpers import make_net, random_batch
    from tclif.bptt import unroll_forward
    from tclif.network import draw_decays, forward_step
    from tclif.neurons import Kind

    # adaptive with both floors at 1 is vanilla, bitwise
    net_a = make_net(np.random.default_rng(30), Kind.TCLIF_ADAPTIVE,
                     widths=(3, 5, 2), recurrent=True, v_th=0.4)
    net_v = make_net(np.random.default_rng(30), Kind.TCLIF_VANILLA,
                     widths=(3, 5, 2), recurrent=True, v_th=0.4)
    for p in net_a.layers:
        p.a_d[...] = 1.0
        p.a_s[...] = 1.0
    rng = np.random.default_rng(31)
    x, labels = random_batch(rng, 20, 3, 3, 2)
    ca, la = unroll_forward(net_a, x, labels, seed=0)
    cv, lv = unroll_forward(net_v, x, labels, seed=0)
    bitwise = la == lv and all(
        np.array_equal(ra[0].v_s, rv[0].v_s)
        and np.array_equal(ra[0].v_d, rv[0].v_d)
        and np.array_equal(ra[0].z, rv[0].z)
        for ra, rv in zip(ca.layers, cv.layers))

    # a_d[t]=0, beta1=0, beta2=1 (and gamma=0) collapses to LIF
    alpha = 0.85
    net_t = make_net(np.random.default_rng(32), Kind.TCLIF_MODIFIED,
                     widths=(3, 5, 2), recurrent=True, v_th=0.6,
                     gamma=0.0, beta_fixed=(0.0, 1.0))
    net_l = make_net(np.random.default_rng(32), Kind.LIF,
                     widths=(3, 5, 2), recurrent=True, v_th=0.6,
                     lif_alpha=alpha, beta_fixed=(0.0, 1.0))
    for p in net_t.layers:
        p.alpha1[...] = 0.0
        p.alpha2[...] = alpha
    max_gap = 0.0
    for _ in range(100):
        x, _ = random_batch(rng, 8, 2, 3, 2)
        st_t = net_t.zero_states(2)
        st_l = net_l.zero_states(2)
        for t in range(x.shape[0]):
            st_t, z_t = forward_step(net_t, st_t, x[t],
                                     draw_decays(net_t, t, None))
            st_l, z_l = forward_step(net_l, st_l, x[t],
                                     draw_decays(net_l, t, None))
            max_gap = max(max_gap, float(np.max(np.abs(
                st_t[0].v_s - st_l[0].v_s))))
            if not np.array_equal(z_t[0], z_l[0]):
                max_gap = np.inf
    _report("reductions", bitwise and max_gap < 1e-12,
            f"adaptive(a=1)==vanilla bitwise: {bitwise}; "
            f"degenerate-vs-LIF max |dv_s| {max_gap:.2e}")


def test_criterion_memory_scaling(tmp_path):
    start = time.monotonic()
    rows = memory_report(str(tmp_path / "memory.csv"))
    elapsed = time.monotonic() - start
    bptt = [(r.t_len, r.stored_reals) for r in rows if r.algo == "bptt"]
    eprop = [r.stored_reals for r in rows if r.algo == "eprop"]
    slope, _, r2 = linear_fit([p[0] for p in bptt], [p[1] for p in bptt])
    growth = bptt[-1][1] / bptt[0][1]
    variation = max(eprop) / min(eprop)
    ok = (r2 > 0.99 and slope > 0 and growth >= 15.0
          and variation <= 1.05 and elapsed < 120.0)
    _report("memory-scaling", ok,
            f"bptt r2 {r2:.4f} > 0.99, growth {growth:.1f}x >= 15x; "
            f"online variation {variation:.4f} <= 1.05; "
            f"{elapsed:.0f}s < 120s")


def test_criterion_desk_scale_smnist():
    start = time.monotonic()
    tr_x, tr_y, te_x, te_y, source = load_or_synth_mnist(
        source_env(), 10000, 2000, seed=0)
    accs = {}
    for neuron in ("tclif_adaptive", "lif"):
        cfg = desk_smnist_config(neuron)
        x_train = images_to_sequences(tr_x, cfg.frame_size)
        x_test = images_to_sequences(te_x, cfg.frame_size)
        net = build_network(cfg, np.random.default_rng(cfg.seed))
        trainer = make_trainer(net, cfg)
        metrics = train_run(trainer, x_train, tr_y, x_test, te_y)
        accs[neuron] = metrics[-1].test_acc
    elapsed = time.monotonic() - start
    ok = (accs["tclif_adaptive"] >= 0.80
          and accs["lif"] < accs["tclif_adaptive"]
          and elapsed < 1200.0)
    _report("desk-scale-smnist", ok,
            f"[{source}] adaptive {accs['tclif_adaptive']:.3f} >= 0.80, "
            f"lif {accs['lif']:.3f} strictly lower; "
            f"{elapsed:.0f}s < 1200s")


def source_env():
    import os
    return os.environ.get("TCLIF_DATA_DIR")


def _shd_splits(n_train=1000, n_test=400):
    import os
    root = source_env()
    if root and all(os.path.exists(os.path.join(root, f))
                    for f in ("shd_train.spkev", "shd_test.spkev")):
        train = load_spike_events(os.path.join(root, "shd_train.spkev"))
        test = load_spike_events(os.path.join(root, "shd_test.spkev"))
        if train.num_channels == 700:
            train.samples = train.samples[:n_train]
            test.samples = test.samples[:n_test]
            return train, test, "shd"
    return (synth_spike_dataset(n_train, seed=100),
            synth_spike_dataset(n_test, seed=999), "synth")


def test_criterion_shd_ablation_direction():
    train_ds, test_ds, source = _shd_splits()
    cfg0 = desk_shd_config()
    x_train, y_train = spikes_to_sequences(train_ds, cfg0.shd_bins)
    x_test, y_test = spikes_to_sequences(test_ds, cfg0.shd_bins)
    means = {}
    for neuron in ("tclif_adaptive", "tclif_modified"):
        accs = []
        for seed in (0, 1, 2):
            cfg = desk_shd_config(neuron, seed)
            net = build_network(cfg, np.random.default_rng(cfg.seed))
            trainer = make_trainer(net, cfg)
            metrics = train_run(trainer, x_train, y_train, x_test, y_test)
            accs.append(metrics[-1].test_acc)
        means[neuron] = float(np.mean(accs))
    ok = means["tclif_adaptive"] >= means["tclif_modified"]
    _report("shd-ablation-direction", ok,
            f"[{source}] adaptive mean {means['tclif_adaptive']:.3f} >= "
            f"modified mean {means['tclif_modified']:.3f} over 3 seeds")


def test_criterion_converter_round_trip(tmp_path):
    import os
    import sys
    sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..",
                                    "shd_convert"))
    import shd_convert
    from test_shd_convert import make_h5

    root = source_env()
    h5_path = None
    if root:
        cand = os.path.join(root, "shd_test.h5")
        if os.path.exists(cand):
            h5_path = cand
    if h5_path is None:
        h5_path = str(tmp_path / "synthetic.h5")
        make_h5(h5_path, 30, seed=7)
        source = "synthetic"
    else:
        source = "shd"
    out = str(tmp_path / "out.spkev")
    n_samples, n_events, _ = shd_convert.convert(h5_path, out)
    ds = load_spike_events(out)   # raises on CRC mismatch
    got_events = sum(s.times_us.size for s in ds.samples)
    import h5py
    with h5py.File(h5_path, "r") as f:
        labels = [int(v) for v in f["labels"]]
    ok = (len(ds.samples) == n_samples == len(labels)
          and got_events == n_events
          and [s.label for s in ds.samples] == labels)
    _report("converter-round-trip", ok,
            f"[{source}] {n_samples} samples, {n_events} events preserved, "
            f"CRC valid")
