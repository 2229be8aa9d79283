"""Feedforward ReLU networks as plain lists of weight matrices and bias vectors."""
from __future__ import annotations

from pathlib import Path

import numpy as np


class ShapeMismatch(ValueError):
    pass


class LayeredNet:
    """Affine layers ``x -> W x + b`` with ReLU between them and none after the last.

    ``depth`` counts affine layers, so a net with one hidden layer has depth 2.
    """

    def __init__(self, weights, biases):
        weights = [np.atleast_2d(np.asarray(W, dtype=float)) for W in weights]
        biases = [np.atleast_1d(np.asarray(b, dtype=float)) for b in biases]
        if not weights or len(weights) != len(biases):
            raise ShapeMismatch("need one bias vector per weight matrix")
        for k, (W, b) in enumerate(zip(weights, biases)):
            if W.shape[0] != b.size:
                raise ShapeMismatch(f"layer {k + 1}: {W.shape} weights with {b.size} biases")
            if k and W.shape[1] != weights[k - 1].shape[0]:
                raise ShapeMismatch(f"layer {k + 1} expects {W.shape[1]} inputs, "
                                    f"previous layer gives {weights[k - 1].shape[0]}")
        self.weights = weights
        self.biases = biases

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def hidden_widths(self) -> list[int]:
        return [W.shape[0] for W in self.weights[:-1]]

    @property
    def width(self) -> int:
        return max(self.hidden_widths, default=0)

    @property
    def widths(self) -> list[int]:
        return [self.input_dim] + [W.shape[0] for W in self.weights]

    def num_params(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def copy(self) -> "LayeredNet":
        return LayeredNet([W.copy() for W in self.weights], [b.copy() for b in self.biases])

    def params(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def activations(self, X):
        """Post-ReLU hidden activations for an ``(m, d)`` batch, then the output."""
        X = self._check(X)
        acts = []
        h = X
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W.T + b
            h = z if k == self.depth - 1 else np.maximum(z, 0.0)
            acts.append(h)
        return acts

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 0 or (X.ndim == 1 and self.input_dim > 1)
        out = self.activations(X)[-1]
        if self.output_dim == 1:
            out = out[:, 0]
        return out[0] if single else out

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim <= 1:
            X = X.reshape(-1, self.input_dim) if self.input_dim == 1 else X.reshape(1, -1)
        if X.shape[1] != self.input_dim:
            raise ShapeMismatch(f"net takes {self.input_dim} inputs, got {X.shape[1]}")
        return X

    def __repr__(self):
        return f"LayeredNet(widths={self.widths})"


def forward(net: LayeredNet, x):
    """Evaluate the net on one point or an ``(m, d)`` batch."""
    return net(x)


def stack(first: LayeredNet, second: LayeredNet) -> LayeredNet:
    """The composition ``second ∘ first``, merging the two affine layers at the seam."""
    if first.output_dim != second.input_dim:
        raise ShapeMismatch("cannot compose nets with mismatched dimensions")
    W1, b1 = first.weights[-1], first.biases[-1]
    W2, b2 = second.weights[0], second.biases[0]
    weights = first.weights[:-1] + [W2 @ W1] + second.weights[1:]
    biases = first.biases[:-1] + [W2 @ b1 + b2] + second.biases[1:]
    return LayeredNet(weights, biases)


def _fmt_row(values) -> str:
    return " ".join(format(float(v), ".17g") for v in values)


def net_to_text(net: LayeredNet) -> str:
    lines = [f"layers {net.depth}"]
    for W, b in zip(net.weights, net.biases):
        lines.append(f"{W.shape[0]} {W.shape[1]}")
        lines.extend(_fmt_row(row) for row in W)
        lines.append(_fmt_row(b))
    return "\n".join(lines) + "\n"


def net_from_text(text: str) -> LayeredNet:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    try:
        head = lines[0].split()
        if head[0] != "layers":
            raise ValueError("first line must be 'layers <t>'")
        t = int(head[1])
        pos = 1
        weights, biases = [], []
        for _ in range(t):
            rows, cols = (int(v) for v in lines[pos].split())
            pos += 1
            W = np.array([[float(v) for v in lines[pos + i].split()] for i in range(rows)])
            pos += rows
            b = np.array([float(v) for v in lines[pos].split()])
            pos += 1
            if W.shape != (rows, cols) or b.size != rows:
                raise ValueError("layer block does not match its declared shape")
            weights.append(W)
            biases.append(b)
    except (IndexError, ValueError) as exc:
        raise ShapeMismatch(f"malformed net text: {exc}") from None
    return LayeredNet(weights, biases)


def save_net(net: LayeredNet, path) -> None:
    Path(path).write_text(net_to_text(net), encoding="utf-8")


def load_net(path) -> LayeredNet:
    return net_from_text(Path(path).read_text(encoding="utf-8"))
