"""
Dense neural-network numerics

numpy float64 arrays are the tensor type. Layers keep their parameters in a
named ParamSet and accumulate hand-derived gradients into it; adam_step
updates every trainable parameter and leaves frozen ones bit-identical.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, Optional, Tuple

import numpy as np
from scipy.special import expit

from .errors import NonDeterministicClosureError, NumericError, OptimizerStateError, ShapeError

logger = logging.getLogger(__name__)

DTYPE = np.float64


# --------------------------------------------------------------------- tensors

def as_tensor(values) -> np.ndarray:
    tensor = np.asarray(values, dtype=DTYPE)
    check_finite(tensor)
    return tensor


def check_finite(tensor: np.ndarray, what: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(tensor)):
        raise NumericError(f"non-finite value in {what} of shape {np.shape(tensor)}")
    return tensor


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim not in (1, 2) or b.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    return check_finite(a @ b, "matmul result")


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        shape = np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError("add", a.shape, b.shape) from None
    if shape != a.shape:
        raise ShapeError("add", a.shape, b.shape)
    return check_finite(a + b, "add result")


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise ShapeError("hadamard", a.shape, b.shape)
    return check_finite(a * b, "hadamard result")


def sigmoid(x):
    """Logistic function; expit saturates instead of overflowing"""
    return expit(x)


def tanh_act(x):
    return np.tanh(x)


# ------------------------------------------------------------------ parameters

@dataclass
class Parameter:
    value: np.ndarray
    grad: np.ndarray
    frozen: bool = False


class ParamSet:
    """Ordered name -> Parameter registry shared by every layer of a model"""

    def __init__(self):
        self._params: Dict[str, Parameter] = {}

    def add(self, name: str, value, frozen: bool = False) -> Parameter:
        if name in self._params:
            raise ValueError(f"parameter '{name}' already registered")
        value = as_tensor(value).copy()
        param = Parameter(value=value, grad=np.zeros_like(value), frozen=frozen)
        self._params[name] = param
        return param

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def value(self, name: str) -> np.ndarray:
        return self._params[name].value

    def trainable(self):
        return [(name, p) for name, p in self._params.items() if not p.frozen]

    def freeze(self, prefix: str = "") -> None:
        for name, param in self._params.items():
            if name.startswith(prefix):
                param.frozen = True

    def zero_grad(self) -> None:
        for param in self._params.values():
            param.grad.fill(0.0)

    def size(self) -> int:
        return int(sum(p.value.size for p in self._params.values()))

    def grad_norm(self) -> float:
        return float(np.sqrt(sum(np.sum(p.grad ** 2) for _, p in self.trainable())))

    def clip_grad_norm(self, max_norm: float) -> float:
        """Rescale trainable gradients to a global L2 norm of at most max_norm"""
        total = self.grad_norm()
        if total > max_norm:
            factor = max_norm / (total + 1e-12)
            for _, param in self.trainable():
                param.grad *= factor
        return total

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self._params.items()}


def init_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    """U(-k, k) with k = 1/sqrt(fan_in)"""
    k = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-k, k, size=shape)


# ---------------------------------------------------------------- linear layer

@dataclass
class LinearCache:
    name: str
    x: np.ndarray


def add_linear(params: ParamSet, name: str, in_features: int, out_features: int,
               rng: np.random.Generator) -> None:
    params.add(f"{name}.W", init_uniform(rng, (out_features, in_features), in_features))
    params.add(f"{name}.b", init_uniform(rng, (out_features,), in_features))


def linear_forward(params: ParamSet, name: str, x: np.ndarray) -> Tuple[np.ndarray, LinearCache]:
    """y = W x + b, applied to each row of a (batch, in) input"""
    W = params.value(f"{name}.W")
    b = params.value(f"{name}.b")
    x2 = np.atleast_2d(x)
    if x2.shape[1] != W.shape[1]:
        raise ShapeError(f"linear '{name}'", x2.shape, W.shape)
    y = add(matmul(x2, W.T), b)
    return y, LinearCache(name=name, x=x2)


def linear_backward(params: ParamSet, cache: LinearCache, upstream: np.ndarray) -> np.ndarray:
    """Accumulate dW, db into the ParamSet and return the input gradient"""
    W = params[f"{cache.name}.W"]
    b = params[f"{cache.name}.b"]
    upstream = np.atleast_2d(upstream)
    if upstream.shape != (cache.x.shape[0], W.value.shape[0]):
        raise ShapeError(f"linear '{cache.name}' backward", upstream.shape, (cache.x.shape[0], W.value.shape[0]))
    W.grad += upstream.T @ cache.x
    b.grad += upstream.sum(axis=0)
    return upstream @ W.value


# ------------------------------------------------------------------------ loss

def mse_loss(pred: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    pred = np.asarray(pred, dtype=DTYPE)
    target = np.asarray(target, dtype=DTYPE)
    if pred.shape != target.shape:
        raise ShapeError("mse_loss", pred.shape, target.shape)
    if pred.size == 0:
        raise ValueError("mse_loss of an empty tensor")
    diff = pred - target
    return float(np.mean(diff ** 2)), 2.0 * diff / diff.size


# ------------------------------------------------------------------- optimizer

@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: ParamSet, **hyper) -> "AdamState":
        return cls(**hyper).attach(params)

    def attach(self, params: ParamSet) -> "AdamState":
        for name, param in params.items():
            self.m[name] = np.zeros_like(param.value)
            self.v[name] = np.zeros_like(param.value)
        return self


def adam_step(params: ParamSet, state: AdamState) -> None:
    """One bias-corrected Adam update; frozen parameters are skipped, all gradients zeroed"""
    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t
    for name, param in params.items():
        if param.frozen:
            continue
        m, v = state.m.get(name), state.v.get(name)
        if m is None or m.shape != param.value.shape or v.shape != param.value.shape:
            raise OptimizerStateError(f"moments for '{name}' do not match shape {param.value.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * param.grad
        v *= state.beta2
        v += (1.0 - state.beta2) * param.grad ** 2
        m_hat = m / correction1
        v_hat = v / correction2
        param.value -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    params.zero_grad()


def cosine_schedule(base: float, floor: float, epochs: int) -> Callable[[int], float]:
    """Cosine annealing from base at epoch 0 down to floor at epoch epochs - 1"""
    if epochs < 1 or base <= 0.0 or floor < 0.0 or floor > base:
        raise ValueError(f"bad cosine schedule (base={base}, floor={floor}, epochs={epochs})")
    span = max(epochs - 1, 1)

    def rate(epoch: int) -> float:
        return float(floor + 0.5 * (base - floor) * (1.0 + np.cos(np.pi * min(epoch, span) / span)))

    return rate


# ------------------------------------------------------------ gradient checking

def finite_difference_check(closure: Callable[[], float], params: ParamSet, h: float = 1e-5,
                            names: Optional[list] = None) -> float:
    """
    Compare analytic gradients with central differences.

    closure() must run a forward and backward pass, accumulating gradients
    into params, and return the scalar loss. Returns the max over trainable
    coordinates of |analytic - numeric| / max(1, |numeric|); 0.0 when no
    coordinate is trainable.
    """
    if h <= 0:
        raise ValueError("finite-difference step must be positive")

    params.zero_grad()
    first = closure()
    analytic = {name: p.grad.copy() for name, p in params.items()}
    params.zero_grad()
    if closure() != first:
        raise NonDeterministicClosureError("closure returned different losses for identical parameters")

    worst = 0.0
    for name, param in params.trainable():
        if names is not None and name not in names:
            continue
        flat = param.value.reshape(-1)
        grad = analytic[name].reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + h
            plus = closure()
            flat[idx] = original - h
            minus = closure()
            flat[idx] = original
            numeric = (plus - minus) / (2.0 * h)
            worst = max(worst, abs(grad[idx] - numeric) / max(1.0, abs(numeric)))
    params.zero_grad()
    return worst
