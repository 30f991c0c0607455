"""Layer stacking, parameter registry, and the shared forward step.

Both trainers (online e-prop and offline BPTT) drive the exact same forward
computation so that losses agree bitwise under a fixed seed; the adaptive
variant's decay draws come from per-layer generators derived deterministically
from (seed, sequence index, layer index).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .eprop import GradAccumulator
from .neurons import (DecayDraw, Kind, LayerParams, LayerState, decay_for,
                      input_current, lif_step, tclif_step)


@dataclass
class Network:
    layers: list[LayerParams]
    w_out: np.ndarray       # (classes, top_width)
    kappa: float = 0.9

    def __post_init__(self):
        self.w_out = np.asarray(self.w_out, dtype=np.float64)
        if self.w_out.shape[1] != self.layers[-1].n_post:
            raise ValueError("readout width does not match top layer")

    @property
    def num_classes(self) -> int:
        return self.w_out.shape[0]

    @property
    def input_dim(self) -> int:
        return self.layers[0].n_pre

    def zero_states(self, batch: int) -> list[LayerState]:
        return [LayerState.zeros(batch, p.n_post) for p in self.layers]

    def param_count(self) -> int:
        n = self.w_out.size
        for p in self.layers:
            n += p.w_in.size + p.bias.size + 6  # couplings + decays
            if p.w_rec is not None:
                n += p.w_rec.size
        return n


def decay_rngs(seed: int, sequence_index: int,
               n_layers: int) -> list[np.random.Generator]:
    """One independent decay stream per layer, keyed by the run seed and the
    sequence (batch) index so both trainers replay identical draws."""
    return [np.random.default_rng([seed, 0x7C, sequence_index, layer])
            for layer in range(n_layers)]


def draw_decays(net: Network, t: int,
                rngs: list[np.random.Generator] | None) -> list[DecayDraw]:
    return [decay_for(p, t, None if rngs is None else rngs[i])
            for i, p in enumerate(net.layers)]


def forward_step(net: Network, states: list[LayerState], x_t: np.ndarray,
                 draws: list[DecayDraw]
                 ) -> tuple[list[LayerState], list[np.ndarray]]:
    """Advance every layer one step, feeding each layer the same-step spikes
    of the layer below. Returns the new states and per-layer spike vectors."""
    new_states: list[LayerState] = []
    zs: list[np.ndarray] = []
    inp = x_t
    for params, st, draw in zip(net.layers, states, draws):
        i_t = input_current(params, inp,
                            st.z if params.w_rec is not None else None)
        if params.kind.tag is Kind.LIF:
            new, z = lif_step(st, i_t, params.alpha, params.v_th,
                              params.kind.reset_enabled)
        else:
            new, z = tclif_step(st, i_t, params, draw)
        new_states.append(new)
        zs.append(z)
        inp = z
    return new_states, zs


# ---------------------------------------------------------------------------
# parameter registry (shared by the optimizers and the checkpoint format)


@dataclass
class ParamRef:
    name: str
    value: np.ndarray                                  # in-place updatable
    grad_of: Callable[[GradAccumulator], np.ndarray]
    project: Callable[[np.ndarray], None] | None = None


def _clip_unit(lo: float) -> Callable[[np.ndarray], None]:
    def proj(a: np.ndarray) -> None:
        np.clip(a, lo, 1.0, out=a)
    return proj


def param_refs(net: Network, trainer: str = "eprop") -> list[ParamRef]:
    """Learnable parameters in declaration order.

    The coupling parameters c1/c2 are trainable only under BPTT (and only when
    the couplings are not pinned by ``beta_fixed``); the online derivation
    treats them as constants.
    """
    refs: list[ParamRef] = []
    for i, p in enumerate(net.layers):
        refs.append(ParamRef(f"layers.{i}.w_in", p.w_in,
                             lambda a, i=i: a.layers[i].g_w_in))
        refs.append(ParamRef(f"layers.{i}.bias", p.bias,
                             lambda a, i=i: a.layers[i].g_bias))
        if p.w_rec is not None:
            refs.append(ParamRef(f"layers.{i}.w_rec", p.w_rec,
                                 lambda a, i=i: a.layers[i].g_w_rec))
        tag = p.kind.tag
        if tag is Kind.TCLIF_MODIFIED:
            refs.append(ParamRef(f"layers.{i}.alpha1", p.alpha1,
                                 lambda a, i=i: a.layers[i].g_decay[0],
                                 project=_clip_unit(0.0)))
            refs.append(ParamRef(f"layers.{i}.alpha2", p.alpha2,
                                 lambda a, i=i: a.layers[i].g_decay[1],
                                 project=_clip_unit(0.0)))
        elif tag is Kind.TCLIF_ADAPTIVE:
            refs.append(ParamRef(f"layers.{i}.a_d", p.a_d,
                                 lambda a, i=i: a.layers[i].g_decay[0],
                                 project=_clip_unit(1e-6)))
            refs.append(ParamRef(f"layers.{i}.a_s", p.a_s,
                                 lambda a, i=i: a.layers[i].g_decay[1],
                                 project=_clip_unit(1e-6)))
        if trainer == "bptt" and p.kind.is_tclif and p.beta_fixed is None:
            refs.append(ParamRef(f"layers.{i}.c1", p.c1,
                                 lambda a, i=i: a.layers[i].g_c[0]))
            refs.append(ParamRef(f"layers.{i}.c2", p.c2,
                                 lambda a, i=i: a.layers[i].g_c[1]))
    refs.append(ParamRef("w_out", net.w_out, lambda a: a.g_readout))
    return refs


def init_layer(rng: np.random.Generator, kind, n_pre: int, n_post: int,
               recurrent: bool, **kwargs) -> LayerParams:
    """Uniform +-sqrt(1/fan_in) weight init; recurrent matrix uses the same
    scheme with a zeroed diagonal."""
    bound = float(np.sqrt(1.0 / n_pre))
    w_in = rng.uniform(-bound, bound, size=(n_post, n_pre))
    w_rec = None
    if recurrent:
        b_rec = float(np.sqrt(1.0 / n_post))
        w_rec = rng.uniform(-b_rec, b_rec, size=(n_post, n_post))
        np.fill_diagonal(w_rec, 0.0)
    return LayerParams(kind=kind, w_in=w_in, w_rec=w_rec,
                       bias=np.zeros(n_post), **kwargs)
