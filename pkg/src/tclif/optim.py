"""Plain-numpy SGD and Adam over the network's parameter registry, plus the
learning-rate schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .eprop import GradAccumulator
from .network import ParamRef


def lr_at(schedule: str, epoch: int, lr0: float, total_epochs: int,
          step_every: int = 15, step_factor: float = 0.8) -> float:
    """Scheduled learning rate for a zero-based epoch index."""
    if epoch < 0:
        raise ValueError("epoch must be nonnegative")
    if schedule == "cosine":
        if total_epochs <= 0:
            return lr0
        return lr0 * 0.5 * (1.0 + math.cos(math.pi * epoch / total_epochs))
    if schedule == "step":
        return lr0 * step_factor ** (epoch // step_every)
    if schedule == "constant":
        return lr0
    raise ValueError(f"unknown schedule {schedule!r}")


def sgd_step(refs: list[ParamRef], grads: GradAccumulator, lr: float) -> None:
    """p <- p - lr * g, then project constrained parameters back into range."""
    for ref in refs:
        g = ref.grad_of(grads)
        ref.value[...] = ref.value - lr * g
        if ref.project is not None:
            ref.project(ref.value)


@dataclass
class AdamState:
    beta_m: float = 0.9
    beta_v: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def stored_reals(self) -> int:
        return sum(np.size(a) for a in self.m.values()) + \
            sum(np.size(a) for a in self.v.values())


def adam_step(state: AdamState, refs: list[ParamRef],
              grads: GradAccumulator, lr: float) -> None:
    """Standard bias-corrected first/second moment update."""
    state.t += 1
    bc_m = 1.0 - state.beta_m ** state.t
    bc_v = 1.0 - state.beta_v ** state.t
    for ref in refs:
        g = np.asarray(ref.grad_of(grads), dtype=np.float64)
        if ref.name not in state.m:
            state.m[ref.name] = np.zeros_like(g)
            state.v[ref.name] = np.zeros_like(g)
        m = state.m[ref.name]
        v = state.v[ref.name]
        m *= state.beta_m
        m += (1.0 - state.beta_m) * g
        v *= state.beta_v
        v += (1.0 - state.beta_v) * g * g
        update = lr * (m / bc_m) / (np.sqrt(v / bc_v) + state.eps)
        ref.value[...] = ref.value - update
        if ref.project is not None:
            ref.project(ref.value)


class Optimizer:
    """Thin dispatcher so trainers can hold one object regardless of kind."""

    def __init__(self, kind: str, refs: list[ParamRef]):
        if kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {kind!r}")
        self.kind = kind
        self.refs = refs
        self.adam = AdamState() if kind == "adam" else None

    def step(self, grads: GradAccumulator, lr: float) -> None:
        if self.kind == "sgd":
            sgd_step(self.refs, grads, lr)
        else:
            adam_step(self.adam, self.refs, grads, lr)

    def stored_reals(self) -> int:
        return 0 if self.adam is None else self.adam.stored_reals()
