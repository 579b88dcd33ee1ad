"""Small fully-connected network with hand-written backprop and Adam.

Used both by the driving-condition classifier (softmax output) and by the
Q-networks (identity output). Weights are stored as ``(fan_in, fan_out)``
matrices so a batch ``x`` of shape ``(B, fan_in)`` maps as ``x @ W + b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FormatError

CHECKPOINT_VERSION = 1
_MAGIC = "itemhev-mlp"


@dataclass
class Mlp:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_activation: str = "relu"
    output_activation: str = "identity"

    def __post_init__(self):
        self.layer_sizes = tuple(int(n) for n in self.layer_sizes)
        if self.hidden_activation != "relu":
            raise ValueError(f"unsupported hidden activation {self.hidden_activation!r}")
        if self.output_activation not in ("identity", "softmax"):
            raise ValueError(f"unsupported output activation {self.output_activation!r}")
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("parameter count does not match layer_sizes")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.layer_sizes[i], self.layer_sizes[i + 1]) or b.shape != (self.layer_sizes[i + 1],):
                raise ValueError(f"layer {i} has shapes {w.shape}/{b.shape}")

    @classmethod
    def create(
        cls,
        layer_sizes: Sequence[int],
        seed: int = 0,
        output_activation: str = "identity",
    ) -> "Mlp":
        """He-uniform initialised network with zero biases."""
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            limit = np.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(tuple(layer_sizes), weights, biases, output_activation=output_activation)

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "Mlp":
        return Mlp(
            self.layer_sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.hidden_activation,
            self.output_activation,
        )

    def load_from(self, other: "Mlp") -> None:
        for dst, src in zip(self.params, other.params):
            dst[...] = src

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return forward(self, x)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_input(net: Mlp, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.layer_sizes[0] or x.ndim > 2:
        raise ValueError(f"input of shape {x.shape} does not match layer size {net.layer_sizes[0]}")
    return x


def _forward_cache(net: Mlp, x: np.ndarray):
    acts = [x]
    h = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        h = np.maximum(z, 0.0) if i < last else z
        acts.append(h)
    return acts


def forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    x = _check_input(net, x)
    h = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w + b
        if i < last:
            h = np.maximum(h, 0.0)
    return softmax(h) if net.output_activation == "softmax" else h


def backprop(net: Mlp, acts: list[np.ndarray], dout: np.ndarray) -> list[np.ndarray]:
    """Parameter gradients given dLoss/d(pre-output-activation).

    ``acts`` is the cache from a forward pass; gradients are returned in
    the same order as ``net.params``.
    """
    grads: list[np.ndarray] = []
    delta = dout
    for i in range(len(net.weights) - 1, -1, -1):
        h_in = acts[i]
        if h_in.ndim == 1:
            gw = np.outer(h_in, delta)
            gb = delta.copy()
        else:
            gw = h_in.T @ delta
            gb = delta.sum(axis=0)
        grads = [gw, gb] + grads
        if i > 0:
            delta = (delta @ net.weights[i].T) * (acts[i] > 0)
    return grads


def backward(
    net: Mlp,
    x: np.ndarray,
    target: np.ndarray,
    loss: str = "mse",
    mask: np.ndarray | None = None,
) -> tuple[float, list[np.ndarray]]:
    """Loss value and exact parameter gradients.

    ``loss="mse"``: sum over (masked) outputs of squared error, averaged over
    the batch; the mask selects which outputs contribute (e.g. the taken
    action of a Q-network).
    ``loss="ce"``: cross-entropy of the softmax output against ``target``
    probabilities, averaged over the batch.
    """
    x = _check_input(net, x)
    target = np.asarray(target, dtype=float)
    acts = _forward_cache(net, x)
    z = acts[-1]
    if target.shape != z.shape:
        raise ValueError(f"target shape {target.shape} != output shape {z.shape}")
    batch = z.shape[0] if z.ndim == 2 else 1
    if loss == "mse":
        if net.output_activation == "softmax":
            raise ValueError("mse loss is only supported with identity output")
        err = z - target
        if mask is not None:
            err = err * mask
        value = float((err ** 2).sum() / batch)
        dout = 2.0 * err / batch
    elif loss == "ce":
        if net.output_activation != "softmax":
            raise ValueError("cross-entropy requires softmax output")
        p = softmax(z)
        value = float(-(target * np.log(np.clip(p, 1e-300, None))).sum() / batch)
        dout = (p - target) / batch
    else:
        raise ValueError(f"unknown loss {loss!r}")
    return value, backprop(net, acts, dout)


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_net(cls, net: Mlp, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        return cls(
            lr=lr, beta1=beta1, beta2=beta2, eps=eps,
            m=[np.zeros_like(p) for p in net.params],
            v=[np.zeros_like(p) for p in net.params],
        )


def adam_step(net: Mlp, grads: list[np.ndarray], state: AdamState) -> tuple[Mlp, AdamState]:
    """Bias-corrected Adam update, applied in place."""
    if len(grads) != len(state.m):
        raise ValueError("gradient list does not match optimizer state")
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(net.params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return net, state


def save(net: Mlp, path: str | Path) -> None:
    """Write a checkpoint: text header terminated by ``end``, then raw parameters.

    Header lines::

        itemhev-mlp 1
        layers 2 16 16 3
        hidden relu
        output softmax
        float64-le <n parameters>
        end

    followed by every layer's weight matrix (row-major, shape fan_in x
    fan_out) and then its bias vector, layer by layer, as little-endian
    IEEE-754 doubles.
    """
    flat = np.concatenate([p.ravel() for p in net.params]).astype("<f8")
    header = (
        f"{_MAGIC} {CHECKPOINT_VERSION}\n"
        f"layers {' '.join(str(n) for n in net.layer_sizes)}\n"
        f"hidden {net.hidden_activation}\n"
        f"output {net.output_activation}\n"
        f"float64-le {flat.size}\n"
        "end\n"
    )
    with Path(path).open("wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(flat.tobytes())


def load(path: str | Path) -> Mlp:
    data = Path(path).read_bytes()
    marker = b"\nend\n"
    cut = data.find(marker)
    if cut < 0:
        raise FormatError(f"{path}: missing checkpoint header terminator")
    try:
        lines = data[:cut].decode("ascii").splitlines()
        magic, version = lines[0].split()
        fields = {ln.split()[0]: ln.split()[1:] for ln in lines[1:]}
        sizes = tuple(int(n) for n in fields["layers"])
        hidden = fields["hidden"][0]
        output = fields["output"][0]
        count = int(fields["float64-le"][0])
    except (UnicodeDecodeError, ValueError, KeyError, IndexError) as exc:
        raise FormatError(f"{path}: malformed checkpoint header ({exc})") from exc
    if magic != _MAGIC:
        raise FormatError(f"{path}: not an mlp checkpoint")
    if int(version) != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    body = data[cut + len(marker):]
    expected = sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))
    if count != expected or len(body) != 8 * count:
        raise FormatError(f"{path}: expected {expected} parameters, header says {count}, body holds {len(body) / 8:g}")
    flat = np.frombuffer(body, dtype="<f8").astype(float)
    weights, biases, pos = [], [], 0
    for a, b in zip(sizes[:-1], sizes[1:]):
        weights.append(flat[pos:pos + a * b].reshape(a, b).copy())
        pos += a * b
        biases.append(flat[pos:pos + b].copy())
        pos += b
    if not np.all(np.isfinite(flat)):
        raise FormatError(f"{path}: non-finite parameters")
    return Mlp(sizes, weights, biases, hidden, output)
