"""Command-line entry point: train, eval, gradcheck, memprofile.

Exit codes: 0 success, 2 input problem (missing files, bad config), 3 numeric
failure (divergence, resource exhaustion), 4 verification failure (gradcheck
tolerance breach, corrupted checkpoint/dataset checksum).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .bptt import ResourceError
from .checkpoint import load_checkpoint, save_checkpoint
from .config import (ConfigError, TrainConfig, apply_overrides,
                     build_network, default_config, load_config)
from .data import (CorruptionError, FormatError, PermutationSpec,
                   images_to_sequences, load_mnist_idx, load_spike_events,
                   spikes_to_sequences)
from .profile import DEFAULT_LENGTHS, linear_fit, memory_report
from .synth import MNIST_FILES
from .train import (DivergenceError, evaluate, make_trainer, train_run,
                    write_metrics)
from .verify import approximation_gap, run_all

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_VERIFY = 4


def data_dir() -> str:
    return os.environ.get("TCLIF_DATA_DIR", "data")


def load_dataset(cfg: TrainConfig):
    """Load the configured dataset from the data directory as dense sequence
    tensors (T, N, input_dim) plus label vectors."""
    root = data_dir()
    if cfg.dataset in ("smnist", "psmnist"):
        paths = [os.path.join(root, f)
                 for split in ("train", "test") for f in MNIST_FILES[split]]
        missing = [p for p in paths if not os.path.exists(p)]
        if missing:
            raise FileNotFoundError(
                f"dataset files not found: {', '.join(missing)} "
                f"(set TCLIF_DATA_DIR)")
        tr_x, tr_y = load_mnist_idx(paths[0], paths[1])
        te_x, te_y = load_mnist_idx(paths[2], paths[3])
        perm = (PermutationSpec(cfg.permutation_seed)
                if cfg.dataset == "psmnist" else None)
        x_train = images_to_sequences(tr_x, cfg.frame_size, perm)
        x_test = images_to_sequences(te_x, cfg.frame_size, perm)
        return (x_train, tr_y.astype(np.int64),
                x_test, te_y.astype(np.int64))
    # shd
    paths = [os.path.join(root, "shd_train.spkev"),
             os.path.join(root, "shd_test.spkev")]
    missing = [p for p in paths if not os.path.exists(p)]
    if missing:
        raise FileNotFoundError(
            f"dataset files not found: {', '.join(missing)} "
            f"(set TCLIF_DATA_DIR)")
    splits = []
    for p in paths:
        ds = load_spike_events(p)
        if ds.num_channels != cfg.arch[0]:
            raise ConfigError(
                f"{p}: {ds.num_channels} channels but arch expects "
                f"{cfg.arch[0]} inputs")
        splits.append(spikes_to_sequences(ds, cfg.shd_bins, cfg.shd_binary))
    (x_train, y_train), (x_test, y_test) = splits
    return x_train, y_train, x_test, y_test


def _resolve_config(args) -> TrainConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = default_config(args.dataset) if getattr(args, "dataset", None) \
            else TrainConfig()
    if args.override:
        cfg = apply_overrides(cfg, args.override)
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "update_per_step", False):
        cfg.update_per_step = True
    if getattr(args, "no_reset", False):
        cfg.reset_enabled = False
    cfg.validate()
    return cfg


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    x_train, y_train, x_test, y_test = load_dataset(cfg)
    net = build_network(cfg, np.random.default_rng(cfg.seed))
    trainer = make_trainer(net, cfg)
    os.makedirs(args.out, exist_ok=True)

    def log(msg: str) -> None:
        print(msg, file=sys.stderr)

    metrics = train_run(trainer, x_train, y_train, x_test, y_test, log=log)
    write_metrics(os.path.join(args.out, "metrics.csv"), metrics)
    save_checkpoint(os.path.join(args.out, "model.tclf"), net, cfg)
    if metrics:
        print(f"final test accuracy {metrics[-1].test_acc:.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    net, cfg = load_checkpoint(args.checkpoint)
    if args.override:
        cfg = apply_overrides(cfg, args.override)
    if args.seed is not None:
        cfg.seed = args.seed
    _, _, x_test, y_test = load_dataset(cfg)
    acc = evaluate(net, x_test, y_test, cfg.batch_size, cfg.seed)
    print(f"test accuracy {acc:.4f}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    n_rec, n_exact = (20, 8) if args.quick else (200, 50)
    results = run_all(n_recursion=n_rec, n_exactness=n_exact)
    failed = []
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name}: max relative error {r.max_rel_err:.3e} "
              f"(tolerance {r.tol:.0e})")
        if not r.passed:
            failed.append(r.name)
    gap = approximation_gap()
    print(f"INFO reset+recurrence approximation gap (not asserted): "
          f"{gap:.3e}")
    if failed:
        print(f"gradcheck failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_memprofile(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "memory.csv")
    rows = memory_report(path)
    for algo in ("bptt", "eprop"):
        pts = [(r.t_len, r.stored_reals) for r in rows if r.algo == algo]
        slope, _, r2 = linear_fit([p[0] for p in pts], [p[1] for p in pts])
        print(f"{algo}: slope {slope:.1f} reals/step, r2 {r2:.4f}")
    print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tclif",
        description="Two-compartment spiking network training "
                    "(online e-prop / offline BPTT)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dataset_default=None):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--override", action="append", default=[],
                       metavar="K=V", help="config override (repeatable)")
        p.add_argument("--seed", type=int, default=None)

    p_train = sub.add_parser("train", help="train a model")
    common(p_train)
    p_train.add_argument("--dataset", choices=("smnist", "psmnist", "shd"),
                         help="use the built-in defaults for this dataset "
                              "(ignored when --config is given)")
    p_train.add_argument("--out", default="out", help="output directory")
    p_train.add_argument("--update-per-step", action="store_true",
                         help="apply the optimizer at every time step")
    p_train.add_argument("--no-reset", action="store_true",
                         help="disable spike resets (test mode)")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    common(p_eval)
    p_eval.add_argument("--checkpoint", required=True, help="TCLF file")
    p_eval.set_defaults(func=cmd_eval)

    p_grad = sub.add_parser("gradcheck",
                            help="run the gradient oracle suites")
    p_grad.add_argument("--quick", action="store_true",
                        help="fewer random instances (smoke test)")
    p_grad.set_defaults(func=cmd_gradcheck)

    p_mem = sub.add_parser("memprofile",
                           help=f"profile memory over T in {DEFAULT_LENGTHS}")
    p_mem.add_argument("--out", default="out", help="output directory")
    p_mem.set_defaults(func=cmd_memprofile)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FormatError, FileNotFoundError, IsADirectoryError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DivergenceError, ResourceError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CorruptionError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
