"""Online credit assignment: eligibility vectors/traces, learning signals, and
gradient accumulation.

The eligibility vector of a synapse (j, i) is the forward-accumulated
sensitivity of neuron j's hidden state to the weight, one entry per
compartment. Because every recursion coefficient (compartment decays and
couplings) is a per-layer scalar shared across neurons, the vector does not
actually depend on the postsynaptic index: we store one two-component trace
per presynaptic line and recover the per-synapse matrix by broadcasting. The
kappa-filtered trace that pairs with the instantaneous learning signal *does*
depend on both indices (through the per-neuron surrogate factor) and is stored
as a full matrix; it is what makes the online gradient match the offline one
exactly for the readout's leaky integration.

All traces update in O(1) memory per step: nothing here grows with sequence
length.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .neurons import DecayDraw, Kind, LayerParams, LayerState


# ---------------------------------------------------------------------------
# eligibility vector recursions


def step_eligibility_lif(eps: np.ndarray, pre_t: np.ndarray,
                         alpha: float) -> np.ndarray:
    """LIF eligibility: eps' = alpha * eps + pre."""
    return alpha * eps + pre_t


def step_eligibility_tclif(eps_d: np.ndarray, eps_s: np.ndarray,
                           pre_t: np.ndarray, beta1: float, beta2: float,
                           decay: DecayDraw) -> tuple[np.ndarray, np.ndarray]:
    """Two-compartment eligibility recursion for weight-type parameters
    (the direct term enters the dendritic component):

        eps_d' = a_d[t] * eps_d + beta1 * eps_s + pre
        eps_s' = a_s[t] * eps_s + beta2 * eps_d'

    which expands to eps_s' = (a_s + beta1*beta2) eps_s + a_d*beta2 eps_d
    + beta2 * pre.
    """
    return step_eligibility_direct(eps_d, eps_s, pre_t, 0.0, beta1, beta2, decay)


def step_eligibility_direct(eps_d: np.ndarray, eps_s: np.ndarray,
                            direct_d, direct_s, beta1: float, beta2: float,
                            decay: DecayDraw) -> tuple[np.ndarray, np.ndarray]:
    """Generic two-compartment recursion with explicit direct terms per
    compartment. Weight/bias traces put their presynaptic drive in
    ``direct_d``; decay-parameter traces inject the previous compartment
    potential into their own compartment."""
    new_d = decay.a_d_t * eps_d + beta1 * eps_s + direct_d
    new_s = decay.a_s_t * eps_s + beta2 * new_d + direct_s
    return new_d, new_s


def step_eligibility_decay(eps_d: np.ndarray, eps_s: np.ndarray,
                           state_prev: LayerState, decay: DecayDraw,
                           beta1: float, beta2: float, which: str,
                           clamped: bool) -> tuple[np.ndarray, np.ndarray]:
    """Eligibility recursion for a learnable decay parameter.

    ``which`` selects the compartment whose decay the parameter controls
    ("d" for alpha1/a_d, "s" for alpha2/a_s). The direct term is the previous
    potential of that compartment, but only when the parameter actually acted
    this step (``clamped``): in the adaptive variant the clamp's derivative
    w.r.t. its floor is 1 at the floor and 0 in the interior.
    """
    if which not in ("d", "s"):
        raise ValueError("which must be 'd' or 's'")
    if clamped:
        direct_d = state_prev.v_d if which == "d" else 0.0
        direct_s = state_prev.v_s if which == "s" else 0.0
    else:
        direct_d = direct_s = 0.0
    return step_eligibility_direct(eps_d, eps_s, direct_d, direct_s,
                                   beta1, beta2, decay)


def combine_vector(eps_d: np.ndarray, eps_s: np.ndarray,
                   beta2: float) -> np.ndarray:
    """Contract the two-component eligibility vector with the observable
    Jacobian's [beta2, 1] structure (the surrogate factor applied separately)."""
    return beta2 * eps_d + eps_s


def eligibility_trace(psi: np.ndarray, eps_comb: np.ndarray) -> np.ndarray:
    """Per-synapse trace e[..., j, i] = psi[..., j] * eps_comb[..., i].

    ``eps_comb`` is the beta2-combined vector for TC-LIF (``combine_vector``)
    or the plain single-compartment vector for LIF.
    """
    return psi[..., :, None] * eps_comb[..., None, :]


def unit_trace(psi: np.ndarray, eps_comb: np.ndarray) -> np.ndarray:
    """Per-neuron trace for parameters without a presynaptic index (bias,
    decay constants): elementwise psi * eps_comb."""
    return psi * eps_comb


# ---------------------------------------------------------------------------
# readout and learning signals


@dataclass
class ReadoutState:
    """Non-spiking leaky-integrator readout membrane."""

    y: np.ndarray          # (batch, classes)
    kappa: float

    @classmethod
    def zeros(cls, batch: int, classes: int, kappa: float) -> "ReadoutState":
        if not 0.0 <= kappa < 1.0:
            raise ValueError("kappa must lie in [0, 1)")
        return cls(y=np.zeros((batch, classes)), kappa=kappa)


def readout_step(ro: ReadoutState, w_out: np.ndarray,
                 z_t: np.ndarray) -> ReadoutState:
    """y' = kappa * y + w_out @ z."""
    if z_t.shape[-1] != w_out.shape[1]:
        raise ValueError("readout input width mismatch")
    return ReadoutState(y=ro.kappa * ro.y + z_t @ w_out.T, kappa=ro.kappa)


def softmax(y: np.ndarray) -> np.ndarray:
    shifted = y - y.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def output_learning_signal(ro: ReadoutState,
                           targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Per-step softmax cross entropy on the readout membrane.

    Returns the batch-mean loss and the unscaled error signal
    l_out = softmax(y) - onehot(target), the gradient of the per-sample loss
    w.r.t. y.
    """
    y = ro.y
    targets = np.asarray(targets)
    shifted = y - y.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=-1))
    picked = shifted[np.arange(y.shape[0]), targets]
    loss = float(np.mean(logz - picked))
    l_out = softmax(y)
    l_out[np.arange(y.shape[0]), targets] -= 1.0
    return loss, l_out


def spike_input_gain(params: LayerParams) -> float:
    """Coefficient of the same-step path from a layer's input current to its
    spike output, excluding the surrogate factor psi.

    The input drives the dendrite directly and the soma through beta2; the
    observable Jacobian routes both compartments with weights [beta2, 1], so
    the combined TC-LIF gain is 2*beta2. For LIF the current enters the single
    membrane directly.
    """
    if params.kind.tag is Kind.LIF:
        return 1.0
    _, beta2 = params.betas()
    return 2.0 * beta2


def hidden_learning_signal(l_upper: np.ndarray, w_upper_in: np.ndarray,
                           psi_upper: np.ndarray, gain_upper: float) -> np.ndarray:
    """Spatially-exact, temporally-local learning signal for the layer below:

        L_i = sum_j l_upper[j] * psi_upper[j] * gain_upper * w_upper_in[j, i]

    ``gain_upper`` is ``spike_input_gain`` of the upper layer. Signals flow at
    a single time step; no temporal credit passes through upper-layer state.
    """
    if l_upper.shape != psi_upper.shape:
        raise ValueError("learning signal / surrogate shape mismatch")
    return (l_upper * psi_upper * gain_upper) @ w_upper_in


# ---------------------------------------------------------------------------
# gradient accumulation


@dataclass
class LayerGrads:
    g_w_in: np.ndarray
    g_bias: np.ndarray
    g_w_rec: np.ndarray | None = None
    # (dendritic, somatic) decay parameter: alpha1/alpha2 or a_d/a_s.
    g_decay: np.ndarray = field(default_factory=lambda: np.zeros(2))
    # (c1, c2) coupling parameters; populated by the BPTT path only.
    g_c: np.ndarray = field(default_factory=lambda: np.zeros(2))

    @classmethod
    def zeros_like(cls, p: LayerParams) -> "LayerGrads":
        return cls(
            g_w_in=np.zeros_like(p.w_in),
            g_bias=np.zeros_like(p.bias),
            g_w_rec=None if p.w_rec is None else np.zeros_like(p.w_rec),
        )

    def arrays(self):
        out = [self.g_w_in, self.g_bias, self.g_decay, self.g_c]
        if self.g_w_rec is not None:
            out.append(self.g_w_rec)
        return out


@dataclass
class GradAccumulator:
    """Per-parameter gradient sums, built online from learning-signal x
    eligibility-trace products. Accumulation is additive: summing over a
    sequence in chunks equals one pass (fixed summation order)."""

    layers: list[LayerGrads]
    g_readout: np.ndarray

    @classmethod
    def zeros(cls, layer_params: list[LayerParams],
              w_out: np.ndarray) -> "GradAccumulator":
        return cls(layers=[LayerGrads.zeros_like(p) for p in layer_params],
                   g_readout=np.zeros_like(w_out))

    def arrays(self):
        out = []
        for lg in self.layers:
            out.extend(lg.arrays())
        out.append(self.g_readout)
        return out

    def scale(self, s: float) -> None:
        for a in self.arrays():
            a *= s

    def global_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(a * a)) for a in self.arrays())))

    def clip_global_norm(self, max_norm: float) -> bool:
        """Scale all gradients so the global norm is at most ``max_norm``.
        Returns True when clipping triggered."""
        norm = self.global_norm()
        if norm > max_norm and norm > 0.0:
            self.scale(max_norm / norm)
            return True
        return False


def accumulate(grad: np.ndarray, l: np.ndarray, e: np.ndarray) -> np.ndarray:
    """grad[j, i] += mean over batch of l[b, j] * e[b, j, i] (in place).

    Also handles per-neuron parameters (e of shape (batch, post) accumulating
    into (post,)) and scalar parameters (summing over neurons).
    """
    batch = l.shape[0]
    if e.ndim == 3:
        grad += np.einsum("bj,bji->ji", l, e) / batch
    elif grad.ndim == 1 and grad.shape == l.shape[1:]:
        grad += np.sum(l * e, axis=0) / batch
    else:  # scalar parameter: sum over neurons, mean over batch
        grad += np.sum(l * e) / batch
    return grad


# ---------------------------------------------------------------------------
# per-layer online trace container


@dataclass
class EligibilityState:
    """All eligibility state one layer needs for online training.

    ``eps_*`` are the raw two-component eligibility vectors, stored factored
    per presynaptic line (see module docstring). ``ebar_*`` are the
    kappa-filtered per-synapse traces that multiply the instantaneous learning
    signal. LIF layers use only the somatic component.
    """

    # raw vectors
    eps_d_in: np.ndarray               # (batch, pre)
    eps_s_in: np.ndarray               # (batch, pre)
    eps_d_rec: np.ndarray | None       # (batch, post)
    eps_s_rec: np.ndarray | None
    eps_d_bias: float
    eps_s_bias: float
    # decay-parameter vectors, per neuron
    eps_d_ad: np.ndarray | None        # (batch, post)
    eps_s_ad: np.ndarray | None
    eps_d_as: np.ndarray | None
    eps_s_as: np.ndarray | None
    # kappa-filtered traces
    ebar_in: np.ndarray                # (batch, post, pre)
    ebar_rec: np.ndarray | None        # (batch, post, post)
    ebar_bias: np.ndarray              # (batch, post)
    ebar_ad: np.ndarray | None         # (batch, post)
    ebar_as: np.ndarray | None

    @classmethod
    def zeros(cls, params: LayerParams, batch: int) -> "EligibilityState":
        post, pre = params.n_post, params.n_pre
        rec = params.w_rec is not None
        tag = params.kind.tag
        decays = tag in (Kind.TCLIF_MODIFIED, Kind.TCLIF_ADAPTIVE)

        def z(*shape):
            return np.zeros(shape)

        return cls(
            eps_d_in=z(batch, pre), eps_s_in=z(batch, pre),
            eps_d_rec=z(batch, post) if rec else None,
            eps_s_rec=z(batch, post) if rec else None,
            eps_d_bias=0.0, eps_s_bias=0.0,
            eps_d_ad=z(batch, post) if decays else None,
            eps_s_ad=z(batch, post) if decays else None,
            eps_d_as=z(batch, post) if decays else None,
            eps_s_as=z(batch, post) if decays else None,
            ebar_in=z(batch, post, pre),
            ebar_rec=z(batch, post, post) if rec else None,
            ebar_bias=z(batch, post),
            ebar_ad=z(batch, post) if decays else None,
            ebar_as=z(batch, post) if decays else None,
        )

    # -- one online step -----------------------------------------------

    def update(self, params: LayerParams, x_t: np.ndarray,
               z_prev: np.ndarray, state_prev: LayerState, decay: DecayDraw,
               psi: np.ndarray, kappa: float,
               observable: str = "spike") -> None:
        """Advance all traces by one time step (in place).

        ``psi`` is the surrogate gradient at the *post-update* somatic
        potential. ``observable="soma"`` is the test-harness linear regime:
        the readout taps v_s directly, so the trace is the raw somatic
        eligibility with no surrogate factor.
        """
        tag = params.kind.tag
        if tag is Kind.LIF:
            self.eps_s_in = step_eligibility_lif(self.eps_s_in, x_t, params.alpha)
            if self.eps_s_rec is not None:
                self.eps_s_rec = step_eligibility_lif(
                    self.eps_s_rec, z_prev, params.alpha)
            self.eps_s_bias = params.alpha * self.eps_s_bias + 1.0
            comb_in = self.eps_s_in
            comb_rec = self.eps_s_rec
            comb_bias = self.eps_s_bias
            comb_ad = comb_as = None
        else:
            beta1, beta2 = params.betas()
            self.eps_d_in, self.eps_s_in = step_eligibility_tclif(
                self.eps_d_in, self.eps_s_in, x_t, beta1, beta2, decay)
            if self.eps_d_rec is not None:
                self.eps_d_rec, self.eps_s_rec = step_eligibility_tclif(
                    self.eps_d_rec, self.eps_s_rec, z_prev, beta1, beta2, decay)
            self.eps_d_bias, self.eps_s_bias = step_eligibility_tclif(
                self.eps_d_bias, self.eps_s_bias, 1.0, beta1, beta2, decay)
            if self.eps_d_ad is not None:
                self.eps_d_ad, self.eps_s_ad = step_eligibility_decay(
                    self.eps_d_ad, self.eps_s_ad, state_prev, decay,
                    beta1, beta2, "d", decay.clamped_d)
                self.eps_d_as, self.eps_s_as = step_eligibility_decay(
                    self.eps_d_as, self.eps_s_as, state_prev, decay,
                    beta1, beta2, "s", decay.clamped_s)
            if observable == "soma":
                comb_in = self.eps_s_in
                comb_rec = self.eps_s_rec
                comb_bias = self.eps_s_bias
                comb_ad = self.eps_s_ad
                comb_as = self.eps_s_as
            else:
                comb_in = combine_vector(self.eps_d_in, self.eps_s_in, beta2)
                comb_rec = (None if self.eps_d_rec is None else
                            combine_vector(self.eps_d_rec, self.eps_s_rec, beta2))
                comb_bias = combine_vector(self.eps_d_bias, self.eps_s_bias, beta2)
                comb_ad = (None if self.eps_d_ad is None else
                           combine_vector(self.eps_d_ad, self.eps_s_ad, beta2))
                comb_as = (None if self.eps_d_as is None else
                           combine_vector(self.eps_d_as, self.eps_s_as, beta2))

        if observable == "soma":
            psi = np.ones_like(psi)

        self.ebar_in *= kappa
        self.ebar_in += eligibility_trace(psi, comb_in)
        if self.ebar_rec is not None:
            self.ebar_rec *= kappa
            e_rec = eligibility_trace(psi, comb_rec)
            # forward dynamics exclude the self-synapse
            idx = np.arange(e_rec.shape[-1])
            e_rec[..., idx, idx] = 0.0
            self.ebar_rec += e_rec
        self.ebar_bias *= kappa
        self.ebar_bias += unit_trace(psi, comb_bias)
        if self.ebar_ad is not None:
            self.ebar_ad *= kappa
            self.ebar_ad += unit_trace(psi, comb_ad)
            self.ebar_as *= kappa
            self.ebar_as += unit_trace(psi, comb_as)

    def accumulate_into(self, grads: LayerGrads, l: np.ndarray,
                        scale: float = 1.0) -> None:
        """grads += scale * (mean over batch of l x filtered traces)."""
        ls = l if scale == 1.0 else l * scale
        accumulate(grads.g_w_in, ls, self.ebar_in)
        if grads.g_w_rec is not None:
            accumulate(grads.g_w_rec, ls, self.ebar_rec)
            np.fill_diagonal(grads.g_w_rec, 0.0)
        accumulate(grads.g_bias, ls, self.ebar_bias)
        if self.ebar_ad is not None:
            batch = l.shape[0]
            grads.g_decay[0] += float(np.sum(ls * self.ebar_ad) / batch)
            grads.g_decay[1] += float(np.sum(ls * self.ebar_as) / batch)

    def stored_reals(self) -> int:
        n = 2  # bias vector pair
        for a in (self.eps_d_in, self.eps_s_in, self.eps_d_rec, self.eps_s_rec,
                  self.eps_d_ad, self.eps_s_ad, self.eps_d_as, self.eps_s_as,
                  self.ebar_in, self.ebar_rec, self.ebar_bias,
                  self.ebar_ad, self.ebar_as):
            if a is not None:
                n += a.size
        return n
