"""Forward dynamics of LIF and two-compartment (TC-LIF) spiking neurons.

All step functions are pure: they take a state and return a new state,
never mutating their inputs. Arrays carry a leading batch dimension.

Variants:
  * LIF            -- single membrane potential with decay ``alpha``.
  * TCLIF_VANILLA  -- coupled dendrite/soma, both compartment decays fixed at 1.
  * TCLIF_MODIFIED -- compartment decays are learnable constants alpha1/alpha2.
  * TCLIF_ADAPTIVE -- compartment decays are per-step clamped gamma draws with
                      learnable floors a_d/a_s.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class Kind(enum.Enum):
    LIF = "lif"
    TCLIF_VANILLA = "tclif_vanilla"
    TCLIF_MODIFIED = "tclif_modified"
    TCLIF_ADAPTIVE = "tclif_adaptive"


@dataclass(frozen=True)
class NeuronKind:
    """Neuron variant tag plus the test-harness reset switch.

    ``reset_enabled=False`` zeroes both reset terms (the -gamma*z backpropagating
    spike into the dendrite and the -v_th*z soma reset). It exists so that the
    no-reset gradient-equivalence checks can run; production configs keep it on.
    """

    tag: Kind
    reset_enabled: bool = True

    @property
    def is_tclif(self) -> bool:
        return self.tag is not Kind.LIF


def _scalar(x) -> np.ndarray:
    """Wrap a learnable scalar as a 0-d float64 array (updatable in place)."""
    return np.asarray(x, dtype=np.float64).copy()


@dataclass
class LayerParams:
    """All per-layer parameters, learnable and fixed.

    Learnable scalars are stored as 0-d float64 arrays so optimizers can update
    them in place through the parameter registry.
    """

    kind: NeuronKind
    w_in: np.ndarray                      # (post, pre)
    bias: np.ndarray                      # (post,)
    w_rec: np.ndarray | None = None       # (post, post), zero diagonal
    # Soma/dendrite couplings: beta1 = -sigmoid(c1), beta2 = sigmoid(c2).
    # beta_fixed overrides the sigmoid mapping (the modified/adaptive variants
    # use fixed couplings; the default -0.5/1.0 is not representable as a
    # finite sigmoid argument).
    c1: np.ndarray = field(default_factory=lambda: _scalar(0.0))
    c2: np.ndarray = field(default_factory=lambda: _scalar(2.1972))
    beta_fixed: tuple[float, float] | None = None
    # Modified-variant compartment decays, learnable, in [0, 1].
    alpha1: np.ndarray = field(default_factory=lambda: _scalar(1.0))
    alpha2: np.ndarray = field(default_factory=lambda: _scalar(1.0))
    # Adaptive-variant decay floors, learnable, in (0, 1].
    a_d: np.ndarray = field(default_factory=lambda: _scalar(1.0))
    a_s: np.ndarray = field(default_factory=lambda: _scalar(1.0))
    # LIF membrane decay (fixed).
    alpha: float = 0.9
    v_th: float = 1.0
    gamma: float = 0.5

    def __post_init__(self):
        self.w_in = np.asarray(self.w_in, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.w_rec is not None:
            self.w_rec = np.asarray(self.w_rec, dtype=np.float64)
            if self.w_rec.shape[0] != self.w_rec.shape[1]:
                raise ValueError("w_rec must be square")
        for name in ("c1", "c2", "alpha1", "alpha2", "a_d", "a_s"):
            setattr(self, name, _scalar(getattr(self, name)))

    @property
    def n_post(self) -> int:
        return self.w_in.shape[0]

    @property
    def n_pre(self) -> int:
        return self.w_in.shape[1]

    def betas(self) -> tuple[float, float]:
        if self.beta_fixed is not None:
            return self.beta_fixed
        return couplings(float(self.c1), float(self.c2))


@dataclass
class LayerState:
    """Per-neuron hidden state: dendritic and somatic potentials plus the last
    emitted spike vector. For LIF layers ``v_d`` is unused and stays zero."""

    v_d: np.ndarray   # (batch, post)
    v_s: np.ndarray   # (batch, post)
    z: np.ndarray     # (batch, post), binary

    @classmethod
    def zeros(cls, batch: int, n: int) -> "LayerState":
        return cls(
            v_d=np.zeros((batch, n)),
            v_s=np.zeros((batch, n)),
            z=np.zeros((batch, n)),
        )


@dataclass(frozen=True)
class DecayDraw:
    """Compartment decay multipliers for one layer at one time step.

    ``clamped_d``/``clamped_s`` record whether the draw hit the learnable floor
    (where the clamp has unit derivative w.r.t. the floor); they gate the decay
    parameter eligibility traces. For the modified variant the "draw" is the
    constant (alpha1, alpha2) and both flags are set.
    """

    a_d_t: float
    a_s_t: float
    t: int
    clamped_d: bool = False
    clamped_s: bool = False


def couplings(c1: float, c2: float) -> tuple[float, float]:
    """Map the raw coupling parameters through sigmoids:
    beta1 = -sigma(c1) in (-1, 0), beta2 = sigma(c2) in (0, 1)."""
    b1 = -1.0 / (1.0 + np.exp(-c1))
    b2 = 1.0 / (1.0 + np.exp(-c2))
    return float(b1), float(b2)


def input_current(params: LayerParams, x_t: np.ndarray,
                  z_prev: np.ndarray | None) -> np.ndarray:
    """Affine input current: recurrent drive from last step's spikes plus
    feedforward drive plus bias. The recurrent term is omitted when the layer
    has no recurrent weights."""
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.shape[-1] != params.n_pre:
        raise ValueError(
            f"input width {x_t.shape[-1]} != layer fan-in {params.n_pre}")
    i_t = x_t @ params.w_in.T + params.bias
    if params.w_rec is not None:
        if z_prev is None:
            raise ValueError("recurrent layer requires previous spikes")
        z_prev = np.asarray(z_prev, dtype=np.float64)
        if z_prev.shape[-1] != params.n_post:
            raise ValueError(
                f"spike width {z_prev.shape[-1]} != layer size {params.n_post}")
        i_t = i_t + z_prev @ params.w_rec.T
    return i_t


def heaviside(x: np.ndarray) -> np.ndarray:
    """Spike function; fires on v_s >= v_th, i.e. H(0) = 1."""
    return (x >= 0.0).astype(np.float64)


def lif_step(state: LayerState, i_t: np.ndarray, alpha: float, v_th: float,
             reset_enabled: bool = True) -> tuple[LayerState, np.ndarray]:
    """One LIF update: decay, soft reset by the last spike, integrate, fire."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    reset = v_th * state.z if reset_enabled else 0.0
    v = alpha * state.v_s - reset + i_t
    z = heaviside(v - v_th)
    new = LayerState(v_d=np.zeros_like(v), v_s=v, z=z)
    return new, z


def tclif_step(state: LayerState, i_t: np.ndarray, params: LayerParams,
               decay: DecayDraw) -> tuple[LayerState, np.ndarray]:
    """One TC-LIF update.

    Dendrite first (it sees the input current and the backpropagating-spike
    reset), then soma (coupled to the *new* dendritic potential), then fire.
    """
    if i_t.shape[-1] != params.n_post:
        raise ValueError("current width does not match layer size")
    beta1, beta2 = params.betas()
    if params.kind.reset_enabled:
        reset_d = params.gamma * state.z
        reset_s = params.v_th * state.z
    else:
        reset_d = reset_s = 0.0
    v_d = decay.a_d_t * state.v_d + beta1 * state.v_s - reset_d + i_t
    v_s = decay.a_s_t * state.v_s + beta2 * v_d - reset_s
    z = heaviside(v_s - params.v_th)
    return LayerState(v_d=v_d, v_s=v_s, z=z), z


def sample_decay(t: int, a_d: float, a_s: float,
                 rng: np.random.Generator) -> DecayDraw:
    """Draw the adaptive variant's decay multipliers for source step ``t``.

    Each compartment draws independently from Gamma(shape=t+1, scale=1/(t+1))
    (mean 1, variance 1/(t+1), so the draws tighten around 1 as t grows) and is
    clamped into [floor, 1]. One scalar draw per layer per step, shared across
    the batch; deterministic under a seeded generator.
    """
    if not (0.0 < a_d <= 1.0 and 0.0 < a_s <= 1.0):
        raise ValueError("decay floors must lie in (0, 1]")
    shape = t + 1
    g_d = float(rng.gamma(shape, 1.0 / shape))
    g_s = float(rng.gamma(shape, 1.0 / shape))
    return DecayDraw(
        a_d_t=float(min(max(g_d, a_d), 1.0)),
        a_s_t=float(min(max(g_s, a_s), 1.0)),
        t=t,
        clamped_d=g_d < a_d,
        clamped_s=g_s < a_s,
    )


def decay_for(params: LayerParams, t: int,
              rng: np.random.Generator | None) -> DecayDraw:
    """Per-kind decay multipliers for the transition produced at step ``t``."""
    tag = params.kind.tag
    if tag is Kind.TCLIF_VANILLA:
        return DecayDraw(1.0, 1.0, t)
    if tag is Kind.TCLIF_MODIFIED:
        # Constant learnable decays; the clamp flags gate the decay-parameter
        # eligibility traces, which for this variant are always live.
        return DecayDraw(float(params.alpha1), float(params.alpha2), t,
                         clamped_d=True, clamped_s=True)
    if tag is Kind.TCLIF_ADAPTIVE:
        if rng is None:
            raise ValueError("adaptive kind needs a decay RNG stream")
        return sample_decay(t, float(params.a_d), float(params.a_s), rng)
    # LIF: single membrane decay, expressed in the somatic slot.
    return DecayDraw(0.0, params.alpha, t)


def surrogate_grad(v_s: np.ndarray, v_th: float, gamma: float) -> np.ndarray:
    """Triangular pseudo-derivative of the spike threshold,
    psi = max(0, gamma - |v_s - v_th|) / gamma^2, peak 1/gamma at threshold."""
    if gamma <= 0:
        raise ValueError("surrogate width gamma must be positive")
    return np.maximum(0.0, gamma - np.abs(v_s - v_th)) / (gamma * gamma)
