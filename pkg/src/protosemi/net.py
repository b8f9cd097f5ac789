"""Small feed-forward classifier with exact backpropagation in numpy.

Hidden layers use tanh (smooth everywhere, so finite-difference gradient
checks are clean).  The embedding of an input is the post-activation
output of the last hidden layer, i.e. the network with its final linear
layer removed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ParameterError

ACTIVATION = "tanh"
NET_HEADER = "protosemi-net"
_FLOAT_FMT = "%.17g"
_SHUFFLE_STREAM = 0  # rng stream tag for per-epoch batch shuffling


@dataclass
class TrainConfig:
    """Supervised SGD settings; the learning rate follows a cosine decay."""

    base_lr: float
    total_epochs: int
    batch_size: int
    weight_decay: float = 5e-4
    seed: int = 0

    def __post_init__(self):
        if self.base_lr < 0:
            raise ParameterError("base_lr must be nonnegative")
        if self.total_epochs < 1:
            raise ParameterError("total_epochs must be at least 1")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be at least 1")
        if self.weight_decay < 0:
            raise ParameterError("weight_decay must be nonnegative")


class Network:
    """Multilayer perceptron: tanh hidden layers, linear output logits."""

    def __init__(self, layer_dims, weights, biases, rng_seed=None):
        self.layer_dims = [int(d) for d in layer_dims]
        self.weights = weights  # weights[l]: (dims[l], dims[l+1])
        self.biases = biases
        self.rng_seed = rng_seed

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def num_classes(self) -> int:
        return self.layer_dims[-1]

    @property
    def embed_dim(self) -> int:
        return self.layer_dims[-2]

    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.input_dim:
            raise ParameterError(
                f"input dimension {x.shape[-1]} does not match network input {self.input_dim}"
            )
        return x

    def activations(self, batch: np.ndarray):
        """Forward a (B, D) batch; returns (activation list, logits).

        The list holds the input followed by every post-tanh hidden
        output, which is exactly what backprop needs to cache.
        """
        a = self._check_input(np.atleast_2d(batch))
        acts = [a]
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.tanh(a @ w + b)
            acts.append(a)
        logits = a @ self.weights[-1] + self.biases[-1]
        return acts, logits

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Logits for one (D,) input or a (B, D) batch."""
        x = self._check_input(x)
        if x.ndim == 1:
            return self.activations(x[None, :])[1][0]
        return self.activations(x)[1]

    def embed(self, x: np.ndarray) -> np.ndarray:
        """Last hidden activation for one (D,) input or a (B, D) batch."""
        x = self._check_input(x)
        single = x.ndim == 1
        acts, _ = self.activations(np.atleast_2d(x))
        return acts[-1][0] if single else acts[-1]

    def backprop(self, acts, logit_grad):
        """Gradients of a scalar loss given d(loss)/d(logits)."""
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        delta = logit_grad
        for layer in reversed(range(len(self.weights))):
            grads_w[layer] = acts[layer].T @ delta
            grads_b[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer].T) * (1.0 - acts[layer] ** 2)
        return grads_w, grads_b

    def sgd_step(self, grads_w, grads_b, lr: float, weight_decay: float = 0.0) -> None:
        """In-place SGD update; decay is an L2 term on the weights only."""
        for w, b, gw, gb in zip(self.weights, self.biases, grads_w, grads_b):
            if weight_decay > 0.0:
                w -= lr * (gw + weight_decay * w)
            else:
                w -= lr * gw
            b -= lr * gb

    def copy(self) -> "Network":
        return Network(
            list(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.rng_seed,
        )

    def params_equal(self, other: "Network") -> bool:
        return self.layer_dims == other.layer_dims and all(
            np.array_equal(a, b)
            for a, b in zip(self.weights + self.biases, other.weights + other.biases)
        )


def init_network(layer_dims, seed: int) -> Network:
    """Fresh network: weights uniform in +-1/sqrt(fan_in), biases zero.

    ``layer_dims`` must contain at least one hidden layer so that the
    embedding (network minus final linear layer) exists.
    """
    dims = [int(d) for d in layer_dims]
    if len(dims) < 3:
        raise ParameterError("need at least one hidden layer (layer_dims of length >= 3)")
    if any(d < 1 for d in dims):
        raise ParameterError("every layer dimension must be at least 1")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        scale = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-scale, scale, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Network(dims, weights, biases, rng_seed=seed)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax; accepts a (K,) vector or (B, K) batch."""
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits: np.ndarray, label: int) -> float:
    """-log softmax(logits)[label], stabilized by max subtraction."""
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 1:
        raise ParameterError("cross_entropy expects a single logit vector")
    if not 0 <= label < z.shape[0]:
        raise ParameterError(f"label {label} out of range for {z.shape[0]} classes")
    shifted = z - z.max()
    return float(np.log(np.exp(shifted).sum()) - shifted[label])


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.shape[0], num_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def cross_entropy_grads(net: Network, batch: np.ndarray, targets: np.ndarray):
    """Mean cross-entropy against soft target rows, plus its gradients.

    Returns (loss, grads_w, grads_b); gradients are already averaged
    over the batch.
    """
    acts, logits = net.activations(batch)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_norm - np.sum(targets * shifted, axis=1)))
    probs = softmax(logits)
    logit_grad = (probs - targets) / batch.shape[0]
    grads_w, grads_b = net.backprop(acts, logit_grad)
    return loss, grads_w, grads_b


def cosine_lr(epoch: int, total: int, base_lr: float) -> float:
    """Cosine decay from base_lr at epoch 0 to 0 at epoch == total."""
    if total < 1:
        raise ParameterError("total must be at least 1")
    if not 0 <= epoch <= total:
        raise ParameterError(f"epoch {epoch} outside [0, {total}]")
    return base_lr * (1.0 + math.cos(math.pi * epoch / total)) / 2.0


def epoch_shuffle_rng(seed: int, epoch: int) -> np.random.Generator:
    """The rng that orders batches for a given (seed, epoch)."""
    return np.random.default_rng([seed, _SHUFFLE_STREAM, epoch])


def train_epoch(net: Network, features: np.ndarray, labels: np.ndarray,
                config: TrainConfig, epoch_index: int) -> float:
    """One epoch of mini-batch SGD on cross-entropy; updates net in place.

    Batches are a deterministic shuffle of the view, derived from
    (config.seed, epoch_index).  Returns the mean per-sample loss
    measured before each update.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = features.shape[0]
    if n == 0:
        raise ParameterError("training view must be nonempty")
    if epoch_index >= config.total_epochs:
        raise ParameterError("epoch_index must be below total_epochs")
    lr = cosine_lr(epoch_index, config.total_epochs, config.base_lr)
    perm = epoch_shuffle_rng(config.seed, epoch_index).permutation(n)
    total_loss = 0.0
    for start in range(0, n, config.batch_size):
        idx = perm[start:start + config.batch_size]
        targets = one_hot(labels[idx], net.num_classes)
        loss, grads_w, grads_b = cross_entropy_grads(net, features[idx], targets)
        net.sgd_step(grads_w, grads_b, lr, config.weight_decay)
        total_loss += loss * len(idx)
    return total_loss / n


def save_network(net: Network, path) -> None:
    """Checkpoint in the line-oriented text format of ``load_network``."""
    dims = ",".join(str(d) for d in net.layer_dims)
    lines = [f"{NET_HEADER} v1 dims={dims} activation={ACTIVATION}"]
    for w, b in zip(net.weights, net.biases):
        for row in w:
            lines.append(" ".join(_FLOAT_FMT % v for v in row))
        lines.append(" ".join(_FLOAT_FMT % v for v in b))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_network(path) -> Network:
    """Read a checkpoint written by ``save_network``."""
    lines = Path(path).read_text(encoding="ascii").splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise FormatError(f"{path}: empty file")
    header = lines[0].split()
    if (
        len(header) != 4
        or header[0] != NET_HEADER
        or header[1] != "v1"
        or not header[2].startswith("dims=")
        or not header[3].startswith("activation=")
    ):
        raise FormatError(f"line 1: bad header {lines[0]!r}")
    if header[3] != f"activation={ACTIVATION}":
        raise FormatError(f"line 1: unsupported {header[3]}")
    try:
        dims = [int(t) for t in header[2][len("dims="):].split(",")]
    except ValueError:
        raise FormatError("line 1: unparsable layer dims") from None
    if len(dims) < 3 or any(d < 1 for d in dims):
        raise FormatError("line 1: invalid layer dims")

    expected = sum(fan_in + 1 for fan_in in dims[:-1])
    if len(lines) - 1 != expected:
        raise FormatError(f"expected {expected} parameter lines, found {len(lines) - 1}")

    def parse_row(lineno: int, width: int) -> np.ndarray:
        parts = lines[lineno - 1].split()
        if len(parts) != width:
            raise FormatError(f"line {lineno}: expected {width} values, got {len(parts)}")
        try:
            row = np.array([float(p) for p in parts])
        except ValueError:
            raise FormatError(f"line {lineno}: unparsable value") from None
        if not np.all(np.isfinite(row)):
            raise FormatError(f"line {lineno}: non-finite value")
        return row

    weights, biases = [], []
    lineno = 2
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = np.empty((fan_in, fan_out))
        for r in range(fan_in):
            w[r] = parse_row(lineno, fan_out)
            lineno += 1
        weights.append(w)
        biases.append(parse_row(lineno, fan_out))
        lineno += 1
    return Network(dims, weights, biases)
