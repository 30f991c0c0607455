"""Shared builders for the test suite."""

import numpy as np

from tclif.network import Network, init_layer
from tclif.neurons import Kind, NeuronKind

ALL_KINDS = (Kind.LIF, Kind.TCLIF_VANILLA, Kind.TCLIF_MODIFIED,
             Kind.TCLIF_ADAPTIVE)


def make_net(rng, kind, widths=(3, 5, 4), recurrent=False, reset=True,
             v_th=0.4, gamma=0.5, kappa=0.9, beta_fixed="random",
             lif_alpha=0.9):
    """Random small network: widths = (input, hidden..., classes)."""
    nk = NeuronKind(tag=kind, reset_enabled=reset)
    if beta_fixed == "random":
        beta_fixed = (float(rng.uniform(-0.9, -0.1)),
                      float(rng.uniform(0.3, 1.0)))
    layers = []
    for n_pre, n_post in zip(widths[:-2], widths[1:-1]):
        layer = init_layer(rng, nk, n_pre, n_post, recurrent=recurrent,
                           v_th=v_th, gamma=gamma,
                           alpha1=float(rng.uniform(0.3, 0.9)),
                           alpha2=float(rng.uniform(0.3, 0.9)),
                           a_d=float(rng.uniform(0.5, 0.9)),
                           a_s=float(rng.uniform(0.5, 0.9)),
                           alpha=lif_alpha, beta_fixed=beta_fixed)
        layer.bias[...] = rng.normal(0.0, 0.3, size=n_post)
        layers.append(layer)
    top = widths[-2]
    bound = np.sqrt(1.0 / top)
    w_out = rng.uniform(-bound, bound, size=(widths[-1], top))
    return Network(layers=layers, w_out=w_out, kappa=kappa)


def random_batch(rng, t_len, batch, n_in, n_classes):
    x = rng.random((t_len, batch, n_in))
    labels = rng.integers(0, n_classes, size=batch)
    return x, labels
