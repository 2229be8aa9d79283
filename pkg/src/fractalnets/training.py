"""Hinge-loss training of ReLU nets: initialization, backprop, SGD and Adam."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .network import LayeredNet, ShapeMismatch


@dataclass(frozen=True)
class PaperUniform:
    """Weights uniform in ``[-1/(2 fan_in), 1/(2 fan_in)]``, every bias equal to ``b``."""

    b: float = 0.5

    def __post_init__(self):
        if not 0 <= self.b <= 0.5:
            raise ValueError("bias must lie in [0, 1/2]")


@dataclass(frozen=True)
class Uniform:
    """Weights and biases uniform in ``[-scale/sqrt(fan_in), scale/sqrt(fan_in)]``.

    With ``scale=1`` this is the usual default initialization of dense layers
    in deep-learning frameworks.
    """

    scale: float = 1.0


@dataclass(frozen=True)
class NetLiteral:
    net: LayeredNet


def init(scheme, widths: Sequence[int], seed: int = 0) -> LayeredNet:
    """A net with layer sizes ``widths = [d, k_1, ..., k_{t-1}, 1]``."""
    if isinstance(scheme, NetLiteral):
        if list(scheme.net.widths) != list(widths):
            raise ShapeMismatch(f"literal net has widths {scheme.net.widths}, asked for {widths}")
        return scheme.net.copy()
    if len(widths) < 2 or min(widths) < 1:
        raise ValueError(f"invalid widths {widths}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        if isinstance(scheme, PaperUniform):
            a = 1.0 / (2 * fan_in)
            b = np.full(fan_out, scheme.b)
        elif isinstance(scheme, Uniform):
            a = scheme.scale / np.sqrt(fan_in)
            b = None
        else:
            raise TypeError(f"unknown init scheme {scheme!r}")
        weights.append(rng.uniform(-a, a, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-a, a, size=fan_out) if b is None else b)
    return LayeredNet(weights, biases)


def _backward(net: LayeredNet, X, dout):
    """Gradients of ``sum_m dout_m * net(x_m)`` for scalar-output nets."""
    acts = net.activations(X)
    inputs = [X] + acts[:-1]
    grads = [None] * net.depth
    delta = dout[:, None]
    for k in range(net.depth - 1, -1, -1):
        grads[k] = (delta.T @ inputs[k], delta.sum(axis=0))
        if k:
            delta = (delta @ net.weights[k]) * (acts[k - 1] > 0)
    return acts[-1][:, 0], grads


def hinge_loss_and_grad(net: LayeredNet, X, y):
    """Mean hinge loss ``max(1 - y N(x), 0)`` and its gradient, as ``[(dW, db), ...]``.

    At kinks the subgradient is 0 (ReLU at 0, hinge at margin exactly 1).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, net.input_dim)
    if len(X) == 0:
        raise ValueError("empty batch")
    if len(X) != len(y) or net.output_dim != 1:
        raise ShapeMismatch("batch and labels disagree, or the net is not scalar-output")
    out = net.activations(X)[-1][:, 0]
    slack = 1 - y * out
    active = slack > 0
    loss = float(np.mean(np.where(active, slack, 0.0)))
    dout = np.where(active, -y, 0.0) / len(y)
    _, grads = _backward(net, X, dout)
    return loss, grads


def output_gradients(net: LayeredNet, x):
    """Per-parameter gradients of the scalar output at a single input."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    _, grads = _backward(net, x, np.ones(1))
    return grads


def grad_max_norm(grads) -> float:
    return max(max(np.max(np.abs(dW)), np.max(np.abs(db))) for dW, db in grads)


@dataclass
class SGD:
    lr: float

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")

    def init_state(self, net):
        return None

    def step(self, state, net: LayeredNet, grads):
        for (W, b), (dW, db) in zip(zip(net.weights, net.biases), grads):
            W -= self.lr * dW
            b -= self.lr * db
        return state


@dataclass
class AdamState:
    t: int
    m: list
    v: list


@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")

    def init_state(self, net):
        zeros = [np.zeros_like(p) for p in net.params()]
        return AdamState(0, zeros, [z.copy() for z in zeros])

    def step(self, state: AdamState, net: LayeredNet, grads):
        state.t += 1
        c1 = 1 - self.beta1 ** state.t
        c2 = 1 - self.beta2 ** state.t
        flat = [g for pair in grads for g in pair]
        for p, g, m, v in zip(net.params(), flat, state.m, state.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return state


def optimizer_step(optimizer, state, net: LayeredNet, grads):
    """Apply one update to a copy of ``net``; returns ``(state, new_net)``."""
    if len(grads) != net.depth or any(dW.shape != W.shape for (dW, _), W in zip(grads, net.weights)):
        raise ShapeMismatch("gradient does not match the net's shape")
    new = net.copy()
    if state is None:
        state = optimizer.init_state(new)
    state = optimizer.step(state, new, grads)
    return state, new


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 100
    steps: int = 10_000
    eval_every: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")
        if self.steps < 0 or self.eval_every < 1:
            raise ValueError("steps must be >= 0 and eval_every >= 1")

    def make_optimizer(self):
        if self.optimizer == "adam":
            return Adam(self.lr, self.beta1, self.beta2, self.eps)
        if self.optimizer == "sgd":
            return SGD(self.lr)
        raise ValueError(f"unknown optimizer {self.optimizer!r}")


def evaluate_accuracy(net: LayeredNet, data) -> float:
    """Fraction of samples with ``sign(net(x)) == y``, counting ``sign(0)`` as +1."""
    if len(data.y) == 0:
        raise ValueError("empty dataset")
    pred = np.where(net(data.X) >= 0, 1, -1)
    return float(np.mean(pred == data.y))


@dataclass
class TrainResult:
    net: LayeredNet
    history: list = field(default_factory=list)
    best_accuracy: float = float("nan")
    best_step: int = 0
    seconds: float = 0.0


def train(data, widths: Sequence[int], scheme, config: TrainConfig, eval_data=None) -> TrainResult:
    """Mini-batch training on a fixed dataset; keeps the best checkpoint on ``eval_data``.

    ``history`` holds ``(step, train_loss, eval_accuracy)`` at step 0, every
    ``eval_every`` steps and at the final step.  ``train_loss`` is the mean
    mini-batch loss since the previous checkpoint.
    """
    start = time.perf_counter()
    eval_data = data if eval_data is None else eval_data
    net = init(scheme, widths, config.seed)
    opt = config.make_optimizer()
    state = opt.init_state(net)
    rng = np.random.default_rng([config.seed, 1])
    m = len(data.y)
    order = rng.permutation(m)
    pos = 0
    best = evaluate_accuracy(net, eval_data)
    best_net, best_step = net.copy(), 0
    history = [(0, float(hinge_loss_and_grad(net, data.X, data.y)[0]), best)]
    running, count = 0.0, 0
    for step in range(1, config.steps + 1):
        if pos + config.batch_size > m:
            order = rng.permutation(m)
            pos = 0
        idx = order[pos:pos + config.batch_size]
        pos += config.batch_size
        loss, grads = hinge_loss_and_grad(net, data.X[idx], data.y[idx])
        state = opt.step(state, net, grads)
        running += loss
        count += 1
        if step % config.eval_every == 0 or step == config.steps:
            acc = evaluate_accuracy(net, eval_data)
            history.append((step, running / count, acc))
            running, count = 0.0, 0
            if acc > best:
                best, best_net, best_step = acc, net.copy(), step
    return TrainResult(best_net, history, best, best_step, time.perf_counter() - start)


def write_history(history, path) -> None:
    lines = ["step,loss,accuracy"] + [f"{s},{format(l, '.17g')},{format(a, '.17g')}"
                                      for s, l, a in history]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
