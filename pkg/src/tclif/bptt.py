"""Offline baseline: hand-rolled reverse-mode gradients through the unrolled
dynamics, with the surrogate pseudo-derivative at every spike.

This module defines the reference semantics the online rule is compared
against. The spike nonlinearity z = H(v_s - v_th) gets a custom
vector-Jacobian rule on the composed state (v_d, v_s):

    dz/d(v_d, v_s) := (beta2 * psi, psi)

i.e. the dendrite's same-step route into the soma is smoothed with the same
triangular surrogate. With this convention the online eligibility trace
psi * (beta2 * eps_d + eps_s) is exactly dz/dW, so the no-reset feedforward
gradients of the two trainers agree to machine precision.

The cache deliberately stores every intermediate state: its footprint grows
linearly with sequence length. That is the point of the memory comparison,
asserted elsewhere, not avoided here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .eprop import (GradAccumulator, ReadoutState, output_learning_signal,
                    readout_step, softmax)
from .network import Network, decay_rngs, draw_decays, forward_step
from .neurons import DecayDraw, Kind, LayerState, surrogate_grad


class ResourceError(RuntimeError):
    """Raised when the unroll cache cannot be grown; carries the step index."""

    def __init__(self, step: int):
        super().__init__(f"out of memory while caching step {step}")
        self.step = step


@dataclass
class StepRecord:
    """Everything one layer contributes to the cache at one time step."""

    v_d: np.ndarray
    v_s: np.ndarray
    z: np.ndarray
    psi: np.ndarray
    draw: DecayDraw


@dataclass
class UnrollCache:
    """Per-step records for every layer plus the readout trajectory.

    ``layers[t][l]`` is the StepRecord of layer l at step t; length is exactly
    the sequence length.
    """

    x: np.ndarray                                # (T, batch, input_dim)
    labels: np.ndarray
    layers: list[list[StepRecord]] = field(default_factory=list)
    y: list[np.ndarray] = field(default_factory=list)
    observable: str = "spike"

    @property
    def t_len(self) -> int:
        return len(self.layers)

    def stored_reals(self) -> int:
        n = 0
        for step in self.layers:
            for rec in step:
                n += rec.v_d.size + rec.v_s.size + rec.z.size + rec.psi.size
                n += 2  # decay draw
        for y in self.y:
            n += y.size
        return n


def unroll_forward(net: Network, x: np.ndarray, labels: np.ndarray,
                   seed: int, sequence_index: int = 0,
                   observable: str = "spike",
                   loss_scale: float = 1.0) -> tuple[UnrollCache, float]:
    """Run the forward pass, caching every intermediate state.

    The loss (per-step softmax cross entropy, mean over time and batch) is
    computed with the same summation order as the online trainer, so the two
    agree bitwise on identical batches and seeds.
    """
    t_len, batch, _ = x.shape
    states = net.zero_states(batch)
    ro = ReadoutState.zeros(batch, net.num_classes, net.kappa)
    rngs = decay_rngs(seed, sequence_index, len(net.layers))
    cache = UnrollCache(x=x, labels=np.asarray(labels), observable=observable)
    loss_sum = 0.0
    for t in range(t_len):
        draws = draw_decays(net, t, rngs)
        states, zs = forward_step(net, states, x[t], draws)
        step_records = []
        for p, st, draw in zip(net.layers, states, draws):
            psi = surrogate_grad(st.v_s, p.v_th, p.gamma)
            step_records.append(StepRecord(v_d=st.v_d, v_s=st.v_s, z=st.z,
                                           psi=psi, draw=draw))
        try:
            cache.layers.append(step_records)
        except MemoryError as exc:  # pragma: no cover - platform dependent
            raise ResourceError(t) from exc
        obs = states[-1].v_s if observable == "soma" else zs[-1]
        ro = readout_step(ro, net.w_out, obs)
        cache.y.append(ro.y)
        step_loss, _ = output_learning_signal(ro, cache.labels)
        loss_sum += step_loss
    return cache, loss_scale * loss_sum / t_len


def state_jacobian(beta1: float, beta2: float,
                   decay: DecayDraw) -> np.ndarray:
    """d h[t+1] / d h[t] for the composed TC-LIF update (spikes frozen):
    [[a_d, beta1], [beta2*a_d, a_s + beta1*beta2]]."""
    return np.array([
        [decay.a_d_t, beta1],
        [beta2 * decay.a_d_t, decay.a_s_t + beta1 * beta2],
    ])


def backward(cache: UnrollCache, net: Network,
             loss_scale: float = 1.0) -> GradAccumulator:
    """Exact reverse-mode gradients of the surrogate-smoothed computation
    graph, including reset pathways, recurrence, and all spatial paths."""
    t_len = cache.t_len
    batch = cache.x.shape[1]
    n_layers = len(net.layers)
    grads = GradAccumulator.zeros(net.layers, net.w_out)
    g_beta = [np.zeros(2) for _ in net.layers]

    lam_vd = [np.zeros((batch, p.n_post)) for p in net.layers]
    lam_vs = [np.zeros((batch, p.n_post)) for p in net.layers]
    # adjoints of z[l][t] accumulated from steps > t (recurrence, resets)
    lam_z = [np.zeros((batch, p.n_post)) for p in net.layers]
    lam_y = np.zeros((batch, net.num_classes))
    onehot_rows = np.arange(batch)
    scale = loss_scale / (t_len * batch)

    for t in range(t_len - 1, -1, -1):
        recs = cache.layers[t]
        # per-step loss adjoint plus leaky carry from the future
        p_t = softmax(cache.y[t])
        p_t[onehot_rows, cache.labels] -= 1.0
        lam_y = net.kappa * lam_y + scale * p_t
        top = recs[-1]
        obs_top = top.v_s if cache.observable == "soma" else top.z
        grads.g_readout += lam_y.T @ obs_top
        if cache.observable == "soma":
            lam_vs[-1] += lam_y @ net.w_out
        else:
            lam_z[-1] += lam_y @ net.w_out

        lam_z_prev = [np.zeros_like(a) for a in lam_z]
        for l in range(n_layers - 1, -1, -1):
            p = net.layers[l]
            rec = recs[l]
            prev = cache.layers[t - 1][l] if t > 0 else None
            v_d_prev = prev.v_d if prev is not None else 0.0
            v_s_prev = prev.v_s if prev is not None else 0.0
            z_prev = prev.z if prev is not None else np.zeros_like(rec.z)
            lz = lam_z[l]
            if p.kind.tag is Kind.LIF:
                lv = lam_vs[l] + rec.psi * lz
                new_vs_prev = p.alpha * lv
                if p.kind.reset_enabled:
                    lam_z_prev[l] -= p.v_th * lv
                lam_i = lv
                new_vd_prev = np.zeros_like(lv)
            else:
                beta1, beta2 = p.betas()
                lvs = lam_vs[l] + rec.psi * lz
                lvd = lam_vd[l] + beta2 * rec.psi * lz
                # v_s[t] = a_s v_s[t-1] + beta2 v_d[t] - v_th z[t-1]
                lvd = lvd + beta2 * lvs
                new_vs_prev = rec.draw.a_s_t * lvs
                if rec.draw.clamped_s:
                    grads.layers[l].g_decay[1] += float(np.sum(lvs * v_s_prev))
                g_beta[l][1] += float(np.sum(lvs * rec.v_d))
                if p.kind.reset_enabled:
                    lam_z_prev[l] -= p.v_th * lvs
                # v_d[t] = a_d v_d[t-1] + beta1 v_s[t-1] - gamma z[t-1] + I[t]
                new_vd_prev = rec.draw.a_d_t * lvd
                new_vs_prev = new_vs_prev + beta1 * lvd
                if rec.draw.clamped_d:
                    grads.layers[l].g_decay[0] += float(np.sum(lvd * v_d_prev))
                g_beta[l][0] += float(np.sum(lvd * v_s_prev))
                if p.kind.reset_enabled:
                    lam_z_prev[l] -= p.gamma * lvd
                lam_i = lvd
            # I[t] = w_rec z[t-1] + w_in x[t] + bias
            x_l = cache.x[t] if l == 0 else recs[l - 1].z
            grads.layers[l].g_w_in += lam_i.T @ x_l
            grads.layers[l].g_bias += lam_i.sum(axis=0)
            if p.w_rec is not None:
                grads.layers[l].g_w_rec += lam_i.T @ z_prev
                lam_z_prev[l] += lam_i @ p.w_rec
            if l > 0:
                lam_z[l - 1] += lam_i @ p.w_in
            lam_vd[l] = new_vd_prev
            lam_vs[l] = new_vs_prev
        lam_z = lam_z_prev

    for l, p in enumerate(net.layers):
        if p.w_rec is not None:
            np.fill_diagonal(grads.layers[l].g_w_rec, 0.0)
        if p.kind.is_tclif and p.beta_fixed is None:
            s1 = 1.0 / (1.0 + np.exp(-float(p.c1)))
            s2 = 1.0 / (1.0 + np.exp(-float(p.c2)))
            grads.layers[l].g_c[0] = -g_beta[l][0] * s1 * (1.0 - s1)
            grads.layers[l].g_c[1] = g_beta[l][1] * s2 * (1.0 - s2)
    return grads
