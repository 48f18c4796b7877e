"""
LSTM layer: cell forward pass, sequence unrolling and backpropagation through time

Gates follow
    f_t = sigma(W_fx x_t + W_fh h_{t-1} + b_f)
    i_t = sigma(W_ix x_t + W_ih h_{t-1} + b_i)
    g_t = tanh(W_gx x_t + W_gh h_{t-1} + b_g)
    o_t = sigma(W_ox x_t + W_oh h_{t-1} + b_o)
    c_t = g_t * i_t + c_{t-1} * f_t
    h_t = o_t * tanh(c_t)

Every array carries a leading batch axis: inputs are (batch, input_size),
states (batch, hidden_size). Sequences are (T, batch, features).
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ShapeError
from .nncore import ParamSet, add, check_finite, init_uniform, matmul, sigmoid, tanh_act

GATES = ("f", "i", "g", "o")


@dataclass(frozen=True)
class LstmParams:
    """Names of one LSTM layer's tensors inside a shared ParamSet"""

    params: ParamSet
    prefix: str
    input_size: int
    hidden_size: int

    @classmethod
    def create(cls, params: ParamSet, prefix: str, input_size: int, hidden_size: int,
               rng: np.random.Generator) -> "LstmParams":
        if input_size < 1 or hidden_size < 1:
            raise ValueError(f"LSTM sizes must be positive (input={input_size}, hidden={hidden_size})")
        for gate in GATES:
            params.add(f"{prefix}.W_{gate}x", init_uniform(rng, (hidden_size, input_size), hidden_size))
            params.add(f"{prefix}.W_{gate}h", init_uniform(rng, (hidden_size, hidden_size), hidden_size))
            params.add(f"{prefix}.b_{gate}", init_uniform(rng, (hidden_size,), hidden_size))
        return cls(params, prefix, input_size, hidden_size)

    def names(self) -> List[str]:
        return [f"{self.prefix}.{kind}_{gate}{suffix}"
                for gate in GATES
                for kind, suffix in (("W", "x"), ("W", "h"), ("b", ""))]

    def tensor(self, kind: str, gate: str) -> np.ndarray:
        return self.params.value(f"{self.prefix}.{kind}_{gate}")

    def stacked(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Gate tensors stacked in f, i, g, o order: (4H, I), (4H, H), (4H,)"""
        W_x = np.vstack([self.tensor("W", f"{g}x") for g in GATES])
        W_h = np.vstack([self.tensor("W", f"{g}h") for g in GATES])
        b = np.concatenate([self.tensor("b", g) for g in GATES])
        return W_x, W_h, b

    @staticmethod
    def parameter_count(input_size: int, hidden_size: int) -> int:
        h, i = hidden_size, input_size
        return 4 * (h * i + h * h + h)


@dataclass(frozen=True)
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, batch: int, hidden_size: int) -> "LstmState":
        return cls(np.zeros((batch, hidden_size)), np.zeros((batch, hidden_size)))


@dataclass
class StepCache:
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    f: np.ndarray
    i: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray
    h: np.ndarray


@dataclass
class BpttCache:
    steps: List[StepCache] = field(default_factory=list)

    def __len__(self):
        return len(self.steps)


@dataclass
class BpttGrads:
    """Gradients w.r.t. the inputs and the initial state"""

    dx: np.ndarray
    dh0: np.ndarray
    dc0: np.ndarray


def _cell_step(stacked, hidden_size: int, x_t: np.ndarray, prev: LstmState) -> Tuple[LstmState, StepCache]:
    W_x, W_h, b = stacked
    x_t = np.atleast_2d(x_t)
    if x_t.shape[1] != W_x.shape[1]:
        raise ShapeError("lstm input", x_t.shape, W_x.shape)
    if prev.h.shape != (x_t.shape[0], hidden_size) or prev.c.shape != prev.h.shape:
        raise ShapeError("lstm state", prev.h.shape, prev.c.shape, (x_t.shape[0], hidden_size))

    z = add(matmul(x_t, W_x.T) + matmul(prev.h, W_h.T), b)
    H = hidden_size
    f = sigmoid(z[:, :H])
    i = sigmoid(z[:, H:2 * H])
    g = tanh_act(z[:, 2 * H:3 * H])
    o = sigmoid(z[:, 3 * H:])
    c = g * i + prev.c * f
    tanh_c = tanh_act(c)
    h = o * tanh_c
    check_finite(c, "cell state")
    cache = StepCache(x=x_t, h_prev=prev.h, c_prev=prev.c, f=f, i=i, g=g, o=o, c=c, tanh_c=tanh_c, h=h)
    return LstmState(h=h, c=c), cache


def cell_forward(lstm: LstmParams, x_t: np.ndarray, prev: LstmState) -> Tuple[LstmState, StepCache]:
    return _cell_step(lstm.stacked(), lstm.hidden_size, x_t, prev)


def sequence_forward(lstm: LstmParams, inputs: Sequence[np.ndarray],
                     init: Optional[LstmState] = None) -> Tuple[np.ndarray, LstmState, BpttCache]:
    """
    Unroll the cell over inputs (T, batch, input_size).

    Returns outputs (T, batch, hidden_size), the final state and the cache
    needed by bptt_backward. init defaults to the zero state.
    """
    if len(inputs) == 0:
        raise ValueError("sequence_forward needs at least one time step")
    stacked = lstm.stacked()
    batch = np.atleast_2d(inputs[0]).shape[0]
    state = init if init is not None else LstmState.zeros(batch, lstm.hidden_size)
    cache = BpttCache()
    outputs = []
    for x_t in inputs:
        state, step = _cell_step(stacked, lstm.hidden_size, x_t, state)
        cache.steps.append(step)
        outputs.append(state.h)
    return np.stack(outputs), state, cache


def bptt_backward(lstm: LstmParams, cache: BpttCache, output_grads: Sequence[np.ndarray],
                  final_grads: Optional[LstmState] = None) -> BpttGrads:
    """
    Reverse-mode gradients of the unrolled recurrence.

    output_grads[t] is dLoss/dh_t; final_grads optionally adds gradients
    flowing into the final (h, c). Parameter gradients are added to the
    existing accumulators (frozen parameters included; the optimizer
    ignores them).
    """
    if len(output_grads) != len(cache):
        raise ValueError(f"{len(output_grads)} output gradients for a {len(cache)}-step cache")
    W_x, W_h, _ = lstm.stacked()
    H = lstm.hidden_size
    first = cache.steps[0]
    dh_next = np.zeros_like(first.h) if final_grads is None else np.array(final_grads.h, dtype=float)
    dc_next = np.zeros_like(first.c) if final_grads is None else np.array(final_grads.c, dtype=float)

    dW_x = np.zeros_like(W_x)
    dW_h = np.zeros_like(W_h)
    db = np.zeros(4 * H)
    dx = []

    for t in range(len(cache) - 1, -1, -1):
        s = cache.steps[t]
        dh = np.asarray(output_grads[t], dtype=float) + dh_next
        if dh.shape != s.h.shape:
            raise ShapeError("bptt output gradient", dh.shape, s.h.shape)
        do = dh * s.tanh_c
        dc = dc_next + dh * s.o * (1.0 - s.tanh_c ** 2)
        dz = np.concatenate([
            dc * s.c_prev * s.f * (1.0 - s.f),   # forget
            dc * s.g * s.i * (1.0 - s.i),        # input
            dc * s.i * (1.0 - s.g ** 2),         # candidate
            do * s.o * (1.0 - s.o),              # output
        ], axis=1)
        dW_x += dz.T @ s.x
        dW_h += dz.T @ s.h_prev
        db += dz.sum(axis=0)
        dx.append(dz @ W_x)
        dh_next = dz @ W_h
        dc_next = dc * s.f

    for k, gate in enumerate(GATES):
        rows = slice(k * H, (k + 1) * H)
        lstm.params[f"{lstm.prefix}.W_{gate}x"].grad += dW_x[rows]
        lstm.params[f"{lstm.prefix}.W_{gate}h"].grad += dW_h[rows]
        lstm.params[f"{lstm.prefix}.b_{gate}"].grad += db[rows]

    check_finite(dW_h, "recurrent weight gradient")
    return BpttGrads(dx=np.stack(dx[::-1]), dh0=dh_next, dc0=dc_next)
