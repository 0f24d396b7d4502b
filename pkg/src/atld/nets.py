"""The two players: an MLP classifier and a latent-feature discriminator.

The classifier maps inputs to the latent features of its last hidden layer
plus class logits; the discriminator maps latent features to a manifold
probability ``d0`` (probability the feature lies on the adversarial manifold)
and its own class logits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from atld import tensor as T
from atld.tensor import Tensor

CHECKPOINT_HEADER = "ATLD-CKPT-1"

# keeps d0 strictly inside (0,1) even when the logistic saturates in float64
D0_RANGE_EPS = 1e-12

_ACTIVATIONS = {"tanh": T.tanh, "relu": T.relu}


@dataclass(frozen=True)
class LatentBatch:
    """Latent features of one batch, tagged with where they came from."""

    features: Tensor
    origin: str = "clean"

    def __post_init__(self):
        if self.origin not in ("clean", "adversarial"):
            raise ValueError(f"unknown latent origin '{self.origin}'")


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


class _Mlp:
    """Stack of dense layers with a shared activation on all but the last."""

    def __init__(self, dims: list[int], activation: str, seed: int, prefix: str):
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation '{activation}'")
        self.activation = activation
        self.dims = list(dims)
        rng = np.random.default_rng(seed)
        self.weights: list[Tensor] = []
        self.biases: list[Tensor] = []
        for i, (din, dout) in enumerate(zip(dims[:-1], dims[1:])):
            self.weights.append(Tensor(_glorot(rng, din, dout), requires_grad=True, name=f"{prefix}.w{i}"))
            self.biases.append(Tensor(np.zeros(dout), requires_grad=True, name=f"{prefix}.b{i}"))

    def forward(self, x: Tensor, activate_last: bool) -> Tensor:
        act = _ACTIVATIONS[self.activation]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = T.bias_add(T.matmul(h, w), b)
            if i < last or activate_last:
                h = act(h)
        return h

    def parameters(self) -> list[Tensor]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out


def _as_input(x, width: int, what: str) -> Tensor:
    t = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))
    if t.data.ndim != 2 or t.shape[1] != width:
        raise ValueError(f"{what} expects a (batch, {width}) input, got {t.shape}")
    return t


class ClassifierNet:
    """Feature extractor plus softmax head.

    ``forward_features`` returns the activations of the last hidden layer
    (width ``latent_dim``); ``forward_logits`` applies the linear class head
    on top of them.
    """

    def __init__(
        self,
        input_dim: int = 2,
        hidden: tuple[int, ...] = (64, 64),
        latent_dim: int = 32,
        num_classes: int = 2,
        activation: str = "tanh",
        seed: int = 0,
    ):
        self.input_dim = input_dim
        self.hidden = tuple(hidden)
        self.latent_dim = latent_dim
        self.num_classes = num_classes
        self.body = _Mlp([input_dim, *hidden, latent_dim], activation, seed, "classifier")
        rng = np.random.default_rng(seed + 1)
        self.head_w = Tensor(_glorot(rng, latent_dim, num_classes), requires_grad=True, name="classifier.head_w")
        self.head_b = Tensor(np.zeros(num_classes), requires_grad=True, name="classifier.head_b")

    def forward_features(self, x, origin: str = "clean") -> LatentBatch:
        t = _as_input(x, self.input_dim, "forward_features")
        return LatentBatch(self.body.forward(t, activate_last=True), origin)

    def forward_logits(self, x) -> Tensor:
        latent = x.features if isinstance(x, LatentBatch) else self.forward_features(x).features
        return T.bias_add(T.matmul(latent, self.head_w), self.head_b)

    def logits_from_latent(self, latent: Tensor) -> Tensor:
        return T.bias_add(T.matmul(latent, self.head_w), self.head_b)

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.forward_logits(x).data, axis=1)

    def parameters(self) -> list[Tensor]:
        return self.body.parameters() + [self.head_w, self.head_b]

    def param_count(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {p.name: p.data.copy() for p in self.parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for p in self.parameters():
            p.data = np.asarray(state[p.name], dtype=np.float64).reshape(p.shape)


class DiscriminatorNet:
    """MLP over latent features with C+1 outputs.

    The first output passes through a logistic to give ``d0``; the remaining
    C outputs are class logits.
    """

    def __init__(
        self,
        latent_dim: int = 32,
        hidden: tuple[int, ...] = (64,),
        num_classes: int = 2,
        activation: str = "tanh",
        seed: int = 0,
    ):
        self.latent_dim = latent_dim
        self.hidden = tuple(hidden)
        self.num_classes = num_classes
        self.body = _Mlp([latent_dim, *hidden, num_classes + 1], activation, seed, "discriminator")

    def raw_forward(self, z) -> Tensor:
        t = _as_input(z, self.latent_dim, "discriminator")
        return self.body.forward(t, activate_last=False)

    def parameters(self) -> list[Tensor]:
        return self.body.parameters()

    def param_count(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {p.name: p.data.copy() for p in self.parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for p in self.parameters():
            p.data = np.asarray(state[p.name], dtype=np.float64).reshape(p.shape)

    def clone(self) -> "DiscriminatorNet":
        other = DiscriminatorNet(
            self.latent_dim, self.hidden, self.num_classes, self.body.activation, seed=0
        )
        other.load_state_dict(self.state_dict())
        return other


def discriminator_forward(d: DiscriminatorNet, z) -> tuple[Tensor, Tensor]:
    """Split the discriminator output into (d0, class_logits).

    ``d0`` is the logistic of the first raw output, clamped into the open
    interval so it stays strictly inside (0, 1) in float64.
    """
    features = z.features if isinstance(z, LatentBatch) else z
    raw = d.raw_forward(features)
    d0 = T.clip(
        T.sigmoid(T.reshape(T.slice_cols(raw, 0, 1), (raw.shape[0],))),
        D0_RANGE_EPS,
        1.0 - D0_RANGE_EPS,
    )
    class_logits = T.slice_cols(raw, 1, d.num_classes + 1)
    return d0, class_logits


def expected_param_count(dims: list[int]) -> int:
    """Parameter count of a dense stack: sum of (fan_in + 1) * fan_out."""
    return sum((din + 1) * dout for din, dout in zip(dims[:-1], dims[1:]))


# ---------------------------------------------------------------------------
# checkpoint files
# ---------------------------------------------------------------------------


def save_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict[str, str] | None = None) -> None:
    """Write named tensors (and optional metadata) as a versioned text file.

    Format: a header line, ``meta <key> <value>`` lines, then per tensor a
    ``tensor <name> <dim...>`` line followed by one line of C99 hex floats
    (exact float64 round-trip).
    """
    lines = [CHECKPOINT_HEADER]
    for key, value in (meta or {}).items():
        if any(c.isspace() for c in str(key)):
            raise ValueError(f"meta key may not contain whitespace: {key!r}")
        lines.append(f"meta {key} {value}")
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype=np.float64)
        dims = " ".join(str(d) for d in arr.shape)
        lines.append(f"tensor {name} {dims}".rstrip())
        lines.append(" ".join(v.hex() for v in arr.reshape(-1).tolist()))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CHECKPOINT_HEADER:
        raise ValueError(f"not a {CHECKPOINT_HEADER} checkpoint: {path}")
    tensors: dict[str, np.ndarray] = {}
    meta: dict[str, str] = {}
    i = 1
    while i < len(lines):
        line = lines[i]
        if not line.strip():
            i += 1
            continue
        if line.startswith("meta "):
            _, key, value = line.split(" ", 2)
            meta[key] = value
            i += 1
            continue
        if not line.startswith("tensor "):
            raise ValueError(f"malformed checkpoint line {i + 1}: {line[:40]!r}")
        parts = line.split()
        name = parts[1]
        shape = tuple(int(d) for d in parts[2:])
        values = [float.fromhex(tok) for tok in lines[i + 1].split()]
        tensors[name] = np.array(values, dtype=np.float64).reshape(shape)
        i += 2
    return tensors, meta
