import numpy as np
import pytest

from helpers import ALL_KINDS, make_net, random_batch
from tclif.bptt import backward, state_jacobian, unroll_forward
from tclif.neurons import (DecayDraw, Kind, LayerParams, LayerState,
                           NeuronKind, tclif_step)
from tclif.verify import (suite_feedforward_exactness, suite_linear_fd,
                          suite_recursion)


def test_state_jacobian_matches_numerical_jacobian():
    """FD on (v_d, v_s) of tclif_step with the spike input frozen, rel 1e-6."""
    rng = np.random.default_rng(0)
    p = LayerParams(kind=NeuronKind(tag=Kind.TCLIF_VANILLA, reset_enabled=False),
                    w_in=np.eye(1), bias=np.zeros(1),
                    beta_fixed=(-0.37, 0.81), v_th=np.inf)
    draw = DecayDraw(0.63, 0.54, 0)
    i_t = np.array([[0.2]])
    h = 1e-6

    def step(v_d, v_s):
        st = LayerState(v_d=np.array([[v_d]]), v_s=np.array([[v_s]]),
                        z=np.zeros((1, 1)))
        new, _ = tclif_step(st, i_t, p, draw)
        return np.array([new.v_d[0, 0], new.v_s[0, 0]])

    v_d0, v_s0 = 0.3, -0.4
    num = np.zeros((2, 2))
    num[:, 0] = (step(v_d0 + h, v_s0) - step(v_d0 - h, v_s0)) / (2 * h)
    num[:, 1] = (step(v_d0, v_s0 + h) - step(v_d0, v_s0 - h)) / (2 * h)
    np.testing.assert_allclose(state_jacobian(-0.37, 0.81, draw), num,
                               rtol=1e-6)


def test_loss_scale_scales_gradients_exactly():
    rng = np.random.default_rng(4)
    net = make_net(rng, Kind.TCLIF_MODIFIED, widths=(3, 4, 2),
                   recurrent=True)
    x, labels = random_batch(rng, 8, 2, 3, 2)
    cache1, loss1 = unroll_forward(net, x, labels, seed=0)
    g1 = backward(cache1, net)
    cache2, loss2 = unroll_forward(net, x, labels, seed=0, loss_scale=2.0)
    g2 = backward(cache2, net, loss_scale=2.0)
    assert loss2 == 2.0 * loss1
    for a, b in zip(g1.arrays(), g2.arrays()):
        np.testing.assert_array_equal(2.0 * a, b)


def test_backward_deterministic_bitwise():
    rng = np.random.default_rng(5)
    net = make_net(rng, Kind.TCLIF_ADAPTIVE, widths=(3, 5, 2),
                   recurrent=True)
    x, labels = random_batch(rng, 10, 3, 3, 2)
    outs = []
    for _ in range(2):
        cache, loss = unroll_forward(net, x, labels, seed=7)
        grads = backward(cache, net)
        outs.append((loss, [a.copy() for a in grads.arrays()]))
    assert outs[0][0] == outs[1][0]
    for a, b in zip(outs[0][1], outs[1][1]):
        np.testing.assert_array_equal(a, b)


def test_cache_stored_reals_doubles_with_t():
    rng = np.random.default_rng(6)
    net = make_net(rng, Kind.TCLIF_ADAPTIVE, widths=(3, 8, 2))
    x, labels = random_batch(rng, 20, 4, 3, 2)
    c1, _ = unroll_forward(net, x[:10], labels, seed=0)
    c2, _ = unroll_forward(net, x, labels, seed=0)
    ratio = c2.stored_reals() / c1.stored_reals()
    assert abs(ratio - 2.0) < 0.02


def test_cache_length_equals_sequence_length():
    rng = np.random.default_rng(7)
    net = make_net(rng, Kind.LIF, widths=(2, 3, 2))
    x, labels = random_batch(rng, 6, 2, 2, 2)
    cache, _ = unroll_forward(net, x, labels, seed=0)
    assert cache.t_len == 6
    assert len(cache.y) == 6


def test_recurrent_gradient_diagonal_stays_zero():
    rng = np.random.default_rng(8)
    net = make_net(rng, Kind.TCLIF_VANILLA, widths=(3, 5, 2),
                   recurrent=True, v_th=0.3)
    x, labels = random_batch(rng, 12, 2, 3, 2)
    cache, _ = unroll_forward(net, x, labels, seed=0)
    grads = backward(cache, net)
    np.testing.assert_array_equal(np.diag(grads.layers[0].g_w_rec), 0.0)


def test_suite_recursion_small():
    r = suite_recursion(24, seed=10)
    assert r.max_rel_err <= r.tol


def test_suite_feedforward_exactness_small():
    r = suite_feedforward_exactness(8, seed=11)
    assert r.max_rel_err <= r.tol


def test_suite_linear_fd():
    r = suite_linear_fd(seed=12)
    assert r.max_rel_err <= r.tol


def test_multi_layer_feedforward_no_reset_matches_eprop():
    """Two hidden layers: the spatially backpropagated learning signal is
    still temporally local, but with no reset/recurrence and per-step loss
    the only cross-layer temporal path runs through spikes, which BPTT's
    surrogate sees identically at the same step."""
    from tclif.config import TrainConfig
    from tclif.train import OnlineTrainer

    rng = np.random.default_rng(9)
    net = make_net(rng, Kind.TCLIF_VANILLA, widths=(3, 4, 4, 2),
                   recurrent=False, reset=False, v_th=0.4)
    x, labels = random_batch(rng, 1, 2, 3, 2)   # single step: exact
    cfg = TrainConfig(seed=0, grad_clip=0.0)
    trainer = OnlineTrainer(net, cfg)
    carry = trainer.start_sequence(2, 0)
    carry = trainer.run_chunk(carry, x, labels)
    _, online, _ = trainer.finish(carry)
    cache, _ = unroll_forward(net, x, labels, seed=0)
    offline = backward(cache, net)
    for l in range(2):
        np.testing.assert_allclose(online.layers[l].g_w_in,
                                   offline.layers[l].g_w_in,
                                   rtol=1e-10, atol=1e-14)
