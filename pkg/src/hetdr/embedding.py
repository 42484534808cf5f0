"""Per-network node embeddings.

For each square network: random surfing produces a probabilistic
co-occurrence (PCO) matrix, which is transformed to a shifted positive
PMI matrix and compressed by a stacked denoising autoencoder. Per-network
embeddings for one entity kind are fused by column concatenation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.special import expit

from hetdr.errors import NumericalError
from hetdr.networks import Network


@dataclass(frozen=True)
class SurfConfig:
    """Random-surfing parameters: continuation probability and step count."""

    alpha: float = 0.98
    steps: int = 10

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")


@dataclass(frozen=True)
class PpmiMatrix:
    """Dense nonnegative shifted-PPMI representation of one network."""

    values: np.ndarray
    shift: float = 0.0


@dataclass(frozen=True)
class SdaeConfig:
    """Autoencoder hyperparameters.

    `layer_sizes` is the encoder half, input width first, strictly
    decreasing down to the embedding width; the decoder mirrors it.
    Hidden layers use `activation`, the output layer is linear.
    """

    layer_sizes: tuple[int, ...]
    noise_rate: float = 0.2
    weight_decay: float = 1e-4
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    activation: str = "sigmoid"

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        if len(self.layer_sizes) < 2:
            raise ValueError("layer_sizes needs at least input and embedding widths")
        if any(s <= 0 for s in self.layer_sizes):
            raise ValueError(f"layer sizes must be positive, got {self.layer_sizes}")
        if any(a <= b for a, b in zip(self.layer_sizes, self.layer_sizes[1:])):
            raise ValueError(
                f"layer_sizes must be strictly decreasing, got {self.layer_sizes}"
            )
        if not (0.0 <= self.noise_rate < 1.0):
            raise ValueError(f"noise_rate must be in [0, 1), got {self.noise_rate}")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.activation not in ("sigmoid", "linear"):
            raise ValueError(f"unsupported activation {self.activation!r}")


@dataclass
class SdaeLayer:
    weights: np.ndarray
    bias: np.ndarray
    activation: str


@dataclass
class SdaeModel:
    """Full encoder/decoder stack; the first `n_encoder_layers` layers encode."""

    layers: list[SdaeLayer]
    n_encoder_layers: int
    training_loss_history: list[float] = field(default_factory=list)

    @property
    def input_width(self) -> int:
        return self.layers[0].weights.shape[0]

    @property
    def embedding_width(self) -> int:
        return self.layers[self.n_encoder_layers - 1].weights.shape[1]


@dataclass(frozen=True)
class Embedding:
    """Low-dimensional node vectors for one network."""

    kind: str
    name: str
    values: np.ndarray


@dataclass(frozen=True)
class FeatureMatrix:
    """Fused per-kind feature matrix with per-network provenance."""

    kind: str
    values: np.ndarray
    provenance: tuple[tuple[str, int], ...]


def row_normalize(net: Network) -> tuple[sparse.csr_matrix, np.ndarray]:
    """Row-stochastic transition matrix of a square network.

    All-zero rows are kept as-is (dangling nodes accumulate no transitions)
    and returned as the second element.
    """
    n, m = net.shape
    if n != m:
        raise ValueError(f"row_normalize requires a square network, got shape {net.shape}")
    a = net.to_csr()
    sums = np.asarray(a.sum(axis=1)).ravel()
    zero_rows = np.flatnonzero(sums == 0)
    scale = np.ones_like(sums)
    nz = sums > 0
    scale[nz] = 1.0 / sums[nz]
    t = sparse.diags(scale) @ a
    return t.tocsr(), zero_rows


def random_surf(t: sparse.spmatrix | np.ndarray, cfg: SurfConfig) -> np.ndarray:
    """Accumulated visit probabilities over `cfg.steps` surf steps.

    With p_0 the one-hot distribution per source node, iterates
    p_k = alpha * p_{k-1} T + (1 - alpha) * p_0 and returns sum_{k=1..K} p_k
    as a dense matrix whose rows index source nodes.
    """
    n, m = t.shape
    if n != m:
        raise ValueError(f"transition matrix must be square, got shape {t.shape}")
    if sparse.issparse(t):
        t = t.tocsr()
        step = lambda p: (t.T @ p.T).T  # noqa: E731 - sparse right-multiply
    else:
        t = np.asarray(t, dtype=np.float64)
        step = lambda p: p @ t  # noqa: E731
    eye = np.eye(n, dtype=np.float64)
    p = eye
    pco = np.zeros((n, n), dtype=np.float64)
    for _ in range(cfg.steps):
        p = cfg.alpha * step(p) + (1.0 - cfg.alpha) * eye
        pco += p
    return pco


def ppmi(pco: np.ndarray, shift: float = 0.0) -> PpmiMatrix:
    """Shifted positive PMI of a nonnegative co-occurrence matrix.

    PMI_ij = log(pco_ij * total / (rowsum_i * colsum_j)); cells with
    pco_ij = 0 map to 0 directly; the output is max(0, PMI - shift).
    """
    pco = np.asarray(pco, dtype=np.float64)
    if shift < 0:
        raise ValueError(f"shift must be >= 0, got {shift}")
    if (pco < 0).any():
        raise ValueError("PCO matrix must be nonnegative")
    total = pco.sum()
    if total <= 0:
        raise ValueError("PCO matrix must have positive total sum")
    rows = pco.sum(axis=1)
    cols = pco.sum(axis=0)
    out = np.zeros_like(pco)
    pos = pco > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (pco * total) / np.outer(rows, cols)
    out[pos] = np.maximum(0.0, np.log(ratio[pos]) - shift)
    return PpmiMatrix(values=out, shift=float(shift))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return expit(z)


def reconstruction_objective(
    layers: Sequence[SdaeLayer],
    x_in: np.ndarray,
    x_target: np.ndarray,
    weight_decay: float,
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Reconstruction loss ||x_target - x_hat||_F^2 + weight_decay * sum ||W_l||_F^2
    and its analytic gradients w.r.t. every weight matrix and bias vector.

    `x_in` is the (possibly corrupted) input; the loss is always measured
    against the clean `x_target`.
    """
    acts = [np.asarray(x_in, dtype=np.float64)]
    a = acts[0]
    for layer in layers:
        z = a @ layer.weights + layer.bias
        a = _sigmoid(z) if layer.activation == "sigmoid" else z
        acts.append(a)
    resid = acts[-1] - x_target
    loss = float(np.sum(resid * resid))
    loss += weight_decay * sum(float(np.sum(l.weights * l.weights)) for l in layers)

    n_layers = len(layers)
    grads_w: list[np.ndarray] = [np.empty(0)] * n_layers
    grads_b: list[np.ndarray] = [np.empty(0)] * n_layers
    d_act = 2.0 * resid
    for l in range(n_layers - 1, -1, -1):
        if layers[l].activation == "sigmoid":
            a_l = acts[l + 1]
            delta = d_act * a_l * (1.0 - a_l)
        else:
            delta = d_act
        grads_w[l] = acts[l].T @ delta + 2.0 * weight_decay * layers[l].weights
        grads_b[l] = delta.sum(axis=0)
        if l > 0:
            d_act = delta @ layers[l].weights.T
    return loss, grads_w, grads_b


def corrupt_rows(x: np.ndarray, noise_rate: float, rng: np.random.Generator) -> np.ndarray:
    """Masking corruption: zero a `noise_rate` fraction of each row."""
    n_masked = int(round(noise_rate * x.shape[1]))
    if n_masked == 0:
        return x.copy()
    order = np.argsort(rng.random(x.shape), axis=1)
    mask = np.ones_like(x)
    rows = np.repeat(np.arange(x.shape[0]), n_masked)
    mask[rows, order[:, :n_masked].ravel()] = 0.0
    return x * mask


def _init_layers(cfg: SdaeConfig, rng: np.random.Generator) -> list[SdaeLayer]:
    widths = list(cfg.layer_sizes) + list(cfg.layer_sizes[-2::-1])
    layers = []
    for idx, (fan_in, fan_out) in enumerate(zip(widths, widths[1:])):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        act = "linear" if idx == len(widths) - 2 else cfg.activation
        layers.append(SdaeLayer(weights=w, bias=np.zeros(fan_out), activation=act))
    return layers


def sdae_train(x: np.ndarray, cfg: SdaeConfig, init: SdaeModel | None = None) -> SdaeModel:
    """Train the stacked denoising autoencoder with mini-batch gradient descent.

    Deterministic given cfg.seed. The loss history holds the full-data
    objective under one fixed evaluation corruption mask (drawn up front),
    entry 0 before any update and one entry per epoch after it; a
    non-finite loss aborts with the offending epoch.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != cfg.layer_sizes[0]:
        raise ValueError(
            f"input width {x.shape[-1] if x.ndim == 2 else '?'} does not match "
            f"configured input size {cfg.layer_sizes[0]}"
        )
    rng = np.random.default_rng(cfg.seed)
    if init is not None:
        layers = [
            SdaeLayer(l.weights.copy(), l.bias.copy(), l.activation) for l in init.layers
        ]
    else:
        layers = _init_layers(cfg, rng)
    eval_input = corrupt_rows(x, cfg.noise_rate, rng)

    def full_loss() -> float:
        loss, _, _ = reconstruction_objective(layers, eval_input, x, cfg.weight_decay)
        return loss

    history = [full_loss()]
    n = x.shape[0]
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            xb = x[idx]
            xin = corrupt_rows(xb, cfg.noise_rate, rng)
            loss, grads_w, grads_b = reconstruction_objective(
                layers, xin, xb, cfg.weight_decay
            )
            if not np.isfinite(loss):
                raise NumericalError(
                    f"non-finite SDAE loss at epoch {epoch}; lower the learning rate"
                )
            for layer, gw, gb in zip(layers, grads_w, grads_b):
                layer.weights -= cfg.learning_rate * gw
                layer.bias -= cfg.learning_rate * gb
        epoch_loss = full_loss()
        if not np.isfinite(epoch_loss):
            raise NumericalError(
                f"non-finite SDAE loss at epoch {epoch}; lower the learning rate"
            )
        history.append(epoch_loss)
    return SdaeModel(
        layers=layers,
        n_encoder_layers=len(cfg.layer_sizes) - 1,
        training_loss_history=history,
    )


def sdae_encode(model: SdaeModel, x: np.ndarray) -> np.ndarray:
    """Apply the encoder half, without corruption."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.input_width:
        raise ValueError(
            f"input width {x.shape[-1]} does not match model input width "
            f"{model.input_width}"
        )
    a = x
    for layer in model.layers[: model.n_encoder_layers]:
        z = a @ layer.weights + layer.bias
        a = _sigmoid(z) if layer.activation == "sigmoid" else z
    return a


def embed_network(
    net: Network, surf_cfg: SurfConfig, ppmi_shift: float, sdae_cfg: SdaeConfig, name: str
) -> tuple[Embedding, SdaeModel]:
    """Full per-network embedding: normalize -> surf -> PPMI -> SDAE encode."""
    t, _ = row_normalize(net)
    pco = random_surf(t, surf_cfg)
    pm = ppmi(pco, ppmi_shift)
    model = sdae_train(pm.values, sdae_cfg)
    vectors = sdae_encode(model, pm.values)
    return Embedding(kind=net.row_kind, name=name, values=vectors), model


def fuse_embeddings(parts: Sequence[Embedding]) -> FeatureMatrix:
    """Concatenate per-network embeddings for one entity kind, column-wise."""
    if not parts:
        raise ValueError("no embeddings to fuse")
    kind = parts[0].kind
    n = parts[0].values.shape[0]
    for p in parts:
        if p.kind != kind:
            raise ValueError(f"cannot fuse {p.kind} embedding into {kind} features")
        if p.values.shape[0] != n:
            raise ValueError(
                f"embedding {p.name!r} has {p.values.shape[0]} rows, expected {n} "
                "(mismatched ID maps?)"
            )
    values = np.concatenate([np.asarray(p.values, dtype=np.float64) for p in parts], axis=1)
    if not np.isfinite(values).all():
        raise ValueError("fused features contain non-finite entries")
    provenance = tuple((p.name, int(p.values.shape[1])) for p in parts)
    return FeatureMatrix(kind=kind, values=values, provenance=provenance)
