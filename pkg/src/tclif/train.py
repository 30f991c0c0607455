"""Training loops: the online e-prop trainer (constant memory in sequence
length) and the offline BPTT trainer (linear memory, the baseline), plus
evaluation and per-epoch metrics.

Both trainers optimize the same objective: per-step softmax cross entropy on
the leaky readout, averaged over time steps and batch. The online trainer
accumulates gradients over the sequence and applies the optimizer once per
batch by default; ``update_per_step`` applies it at every time step instead.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .bptt import backward, unroll_forward
from .config import TrainConfig
from .eprop import (EligibilityState, GradAccumulator, ReadoutState,
                    hidden_learning_signal, output_learning_signal,
                    readout_step, softmax, spike_input_gain)
from .network import Network, decay_rngs, draw_decays, forward_step, param_refs
from .neurons import Kind, surrogate_grad
from .optim import Optimizer, lr_at


class DivergenceError(RuntimeError):
    """Non-finite loss; carries diagnostics for the CLI's numeric exit code."""


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    test_acc: float
    wallclock_s: float
    peak_stored_reals: int


METRICS_HEADER = "epoch,train_loss,train_acc,test_acc,wallclock_s,peak_stored_reals"


def write_metrics(path: str, rows: list[EpochMetrics]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(METRICS_HEADER + "\n")
        for r in rows:
            fh.write(f"{r.epoch},{r.train_loss:.10g},{r.train_acc:.6f},"
                     f"{r.test_acc:.6f},{r.wallclock_s:.3f},"
                     f"{r.peak_stored_reals}\n")


@dataclass
class OnlineCarry:
    """Everything the online trainer holds between time steps. Its footprint
    is independent of how many steps have been processed."""

    states: list
    eligs: list[EligibilityState]
    ro: ReadoutState
    ro_elig: np.ndarray            # kappa-filtered top-layer observable
    rngs: list
    grads: GradAccumulator
    loss_sum: float = 0.0
    steps: int = 0
    prob_sum: np.ndarray | None = None

    def stored_reals(self) -> int:
        n = self.ro.y.size + self.ro_elig.size
        for st in self.states:
            n += st.v_d.size + st.v_s.size + st.z.size
        for el in self.eligs:
            n += el.stored_reals()
        for a in self.grads.arrays():
            n += a.size
        if self.prob_sum is not None:
            n += self.prob_sum.size
        return n


class OnlineTrainer:
    """e-prop: forward step, eligibility step, learning signals, accumulate.

    No per-step history is retained; gradients build up as raw sums of
    learning-signal x filtered-trace products and are divided by the sequence
    length when the sequence finishes (so chunked processing is exactly
    additive).
    """

    def __init__(self, net: Network, cfg: TrainConfig,
                 observable: str = "spike"):
        self.net = net
        self.cfg = cfg
        self.observable = observable
        self.opt = Optimizer(cfg.optimizer, param_refs(net, trainer="eprop"))
        self.peak_stored_reals = 0

    # -- sequence-level API ------------------------------------------------

    def start_sequence(self, batch: int, sequence_index: int,
                       seed: int | None = None) -> OnlineCarry:
        net = self.net
        seed = self.cfg.seed if seed is None else seed
        return OnlineCarry(
            states=net.zero_states(batch),
            eligs=[EligibilityState.zeros(p, batch) for p in net.layers],
            ro=ReadoutState.zeros(batch, net.num_classes, net.kappa),
            ro_elig=np.zeros((batch, net.layers[-1].n_post)),
            rngs=decay_rngs(seed, sequence_index, len(net.layers)),
            grads=GradAccumulator.zeros(net.layers, net.w_out),
            prob_sum=np.zeros((batch, net.num_classes)),
        )

    def run_chunk(self, carry: OnlineCarry, x: np.ndarray,
                  labels: np.ndarray,
                  per_step_hook=None) -> OnlineCarry:
        """Process a chunk of time steps, updating state and gradient sums in
        place. ``per_step_hook(grads_view)`` supports per-step updates."""
        net = self.net
        batch = x.shape[1]
        kappa = net.kappa
        for k in range(x.shape[0]):
            t = carry.steps
            draws = draw_decays(net, t, carry.rngs)
            prev_states = carry.states
            carry.states, zs = forward_step(net, carry.states, x[k], draws)
            psis = [surrogate_grad(st.v_s, p.v_th, p.gamma)
                    for st, p in zip(carry.states, net.layers)]
            obs = carry.states[-1].v_s if self.observable == "soma" else zs[-1]
            carry.ro = readout_step(carry.ro, net.w_out, obs)
            carry.ro_elig = kappa * carry.ro_elig + obs
            step_loss, l_out = output_learning_signal(carry.ro, labels)
            if not np.isfinite(step_loss):
                raise DivergenceError(f"non-finite loss at step {t}")
            carry.loss_sum += step_loss
            carry.prob_sum += softmax(carry.ro.y)

            step_grads = carry.grads
            if per_step_hook is not None:
                step_grads = GradAccumulator.zeros(net.layers, net.w_out)
            step_grads.g_readout += np.einsum("bc,bh->ch", l_out,
                                              carry.ro_elig) / batch

            # learning signals, top layer first, then spatially backpropagated
            signal = l_out @ net.w_out
            for l in range(len(net.layers) - 1, -1, -1):
                p = net.layers[l]
                x_l = x[k] if l == 0 else zs[l - 1]
                carry.eligs[l].update(p, x_l, prev_states[l].z,
                                      prev_states[l], draws[l], psis[l],
                                      kappa, self.observable)
                carry.eligs[l].accumulate_into(step_grads.layers[l], signal)
                if l > 0:
                    signal = hidden_learning_signal(
                        signal, p.w_in, psis[l], spike_input_gain(p))
            carry.steps += 1
            if per_step_hook is not None:
                per_step_hook(step_grads)
            reals = self.stored_reals(carry)
            if reals > self.peak_stored_reals:
                self.peak_stored_reals = reals
        return carry

    def finish(self, carry: OnlineCarry) -> tuple[float, GradAccumulator,
                                                  np.ndarray]:
        """Average the accumulated sums over time steps; returns the mean
        loss, gradients of the mean objective, and the summed class
        probabilities used for prediction."""
        t_len = max(carry.steps, 1)
        carry.grads.scale(1.0 / t_len)
        return carry.loss_sum / t_len, carry.grads, carry.prob_sum

    # -- batch-level API ----------------------------------------------------

    def train_batch(self, x: np.ndarray, labels: np.ndarray,
                    sequence_index: int, lr: float) -> tuple[float, int]:
        carry = self.start_sequence(x.shape[1], sequence_index)
        if self.cfg.update_per_step:
            t_len = x.shape[0]

            def hook(step_grads: GradAccumulator) -> None:
                step_grads.scale(1.0 / t_len)
                if self.cfg.grad_clip > 0:
                    step_grads.clip_global_norm(self.cfg.grad_clip)
                self.opt.step(step_grads, lr)

            carry = self.run_chunk(carry, x, labels, per_step_hook=hook)
            loss = carry.loss_sum / max(carry.steps, 1)
            probs = carry.prob_sum
        else:
            carry = self.run_chunk(carry, x, labels)
            loss, grads, probs = self.finish(carry)
            if self.cfg.grad_clip > 0:
                grads.clip_global_norm(self.cfg.grad_clip)
            self.opt.step(grads, lr)
        correct = int(np.sum(np.argmax(probs, axis=1) == labels))
        return loss, correct

    def stored_reals(self, carry: OnlineCarry | None = None) -> int:
        n = self.net.param_count() + self.opt.stored_reals()
        if carry is not None:
            n += carry.stored_reals()
        return n


class BPTTTrainer:
    """Unroll, cache, reverse. Peak stored-real count grows linearly in T."""

    def __init__(self, net: Network, cfg: TrainConfig,
                 observable: str = "spike"):
        self.net = net
        self.cfg = cfg
        self.observable = observable
        self.opt = Optimizer(cfg.optimizer, param_refs(net, trainer="bptt"))
        self.peak_stored_reals = 0

    def compute_grads(self, x, labels, sequence_index: int,
                      seed: int | None = None):
        seed = self.cfg.seed if seed is None else seed
        cache, loss = unroll_forward(self.net, x, labels, seed,
                                     sequence_index, self.observable)
        if not np.isfinite(loss):
            raise DivergenceError("non-finite loss in BPTT forward")
        reals = cache.stored_reals() + self.net.param_count() \
            + self.opt.stored_reals()
        if reals > self.peak_stored_reals:
            self.peak_stored_reals = reals
        grads = backward(cache, self.net)
        return loss, grads, cache

    def train_batch(self, x: np.ndarray, labels: np.ndarray,
                    sequence_index: int, lr: float) -> tuple[float, int]:
        loss, grads, cache = self.compute_grads(x, labels, sequence_index)
        if self.cfg.grad_clip > 0:
            grads.clip_global_norm(self.cfg.grad_clip)
        self.opt.step(grads, lr)
        probs = sum(softmax(y) for y in cache.y)
        correct = int(np.sum(np.argmax(probs, axis=1) == labels))
        return loss, correct


def make_trainer(net: Network, cfg: TrainConfig, observable: str = "spike"):
    if cfg.trainer == "bptt":
        return BPTTTrainer(net, cfg, observable)
    return OnlineTrainer(net, cfg, observable)


# ---------------------------------------------------------------------------
# evaluation and epoch loops


EVAL_SEQ_BASE = 2 ** 31  # decay-stream namespace for evaluation batches


def evaluate(net: Network, x: np.ndarray, labels: np.ndarray,
             batch_size: int, seed: int) -> float:
    """Accuracy with prediction = argmax over classes of the time-summed
    softmax outputs. Deterministic under a fixed seed (the adaptive decay
    draws use a dedicated stream)."""
    n = x.shape[1]
    correct = 0
    for bi, lo in enumerate(range(0, n, batch_size)):
        xb = x[:, lo:lo + batch_size]
        lb = labels[lo:lo + batch_size]
        states = net.zero_states(xb.shape[1])
        ro = ReadoutState.zeros(xb.shape[1], net.num_classes, net.kappa)
        rngs = decay_rngs(seed, EVAL_SEQ_BASE + bi, len(net.layers))
        prob_sum = np.zeros_like(ro.y)
        for t in range(xb.shape[0]):
            draws = draw_decays(net, t, rngs)
            states, zs = forward_step(net, states, xb[t], draws)
            ro = readout_step(ro, net.w_out, zs[-1])
            prob_sum += softmax(ro.y)
        correct += int(np.sum(np.argmax(prob_sum, axis=1) == lb))
    return correct / n


def train_epoch(trainer, x_train: np.ndarray, y_train: np.ndarray,
                x_test: np.ndarray, y_test: np.ndarray, epoch: int,
                log=None) -> EpochMetrics:
    """One pass over the training data followed by a test evaluation.

    ``x_*`` are dense (T, N, input_dim) tensors; batches are drawn in a
    seed-deterministic shuffled order.
    """
    cfg = trainer.cfg
    start = time.monotonic()
    n = x_train.shape[1]
    order = np.random.default_rng([cfg.seed, 0x5F, epoch]).permutation(n)
    lr = lr_at(cfg.schedule, epoch, cfg.lr0, cfg.epochs,
               cfg.step_every, cfg.step_factor)
    loss_sum = 0.0
    correct = 0
    n_batches = 0
    for bi, lo in enumerate(range(0, n, cfg.batch_size)):
        idx = order[lo:lo + cfg.batch_size]
        seq_idx = epoch * (n // cfg.batch_size + 1) + bi
        loss, ok = trainer.train_batch(x_train[:, idx], y_train[idx],
                                       seq_idx, lr)
        loss_sum += loss
        correct += ok
        n_batches += 1
        if log is not None and bi % 50 == 0:
            log(f"epoch {epoch} batch {bi} loss {loss:.4f}")
    test_acc = evaluate(trainer.net, x_test, y_test, cfg.batch_size, cfg.seed)
    return EpochMetrics(
        epoch=epoch,
        train_loss=loss_sum / max(n_batches, 1),
        train_acc=correct / n,
        test_acc=test_acc,
        wallclock_s=time.monotonic() - start,
        peak_stored_reals=trainer.peak_stored_reals,
    )


def train_run(trainer, x_train, y_train, x_test, y_test,
              log=None) -> list[EpochMetrics]:
    return [train_epoch(trainer, x_train, y_train, x_test, y_test, e, log)
            for e in range(trainer.cfg.epochs)]
