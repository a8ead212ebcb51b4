"""Model parameters and layers: typed projection, per-path graph convolution
with symmetric normalization, subgraph-level attention fusion, cross entropy,
Adam with decoupled weight decay, and a finite-difference gradient checker.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import Tensor
from .graph import GraphError, HetGraph, LabelSet, MetaPath

ACTIVATIONS: dict[str, Callable[[Tensor], Tensor]] = {
    "relu": ad.relu,
    "tanh": ad.tanh,
    "identity": lambda t: t,
}


@dataclass(frozen=True)
class NormalizedAdjacency:
    """D^{-1/2} (A + I) D^{-1/2} with degrees taken from A + I."""

    matrix: sp.csr_array
    path: MetaPath | None = None


def sym_normalize(adj: sp.csr_array, path: MetaPath | None = None) -> NormalizedAdjacency:
    """Add self-loops and normalize each entry by sqrt(deg_i * deg_j)."""
    n, m = adj.shape
    if n != m:
        raise GraphError(f"sym_normalize needs a square matrix, got {adj.shape}")
    hat = sp.csr_array(adj, dtype=np.float64) + sp.eye_array(n, format="csr")
    hat = sp.csr_array(hat)
    hat.sum_duplicates()
    hat.sort_indices()
    degrees = np.asarray(hat.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(degrees)
    rows = np.repeat(np.arange(n), np.diff(hat.indptr))
    hat.data = hat.data * inv_sqrt[rows] * inv_sqrt[hat.indices]
    return NormalizedAdjacency(hat, path)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Model:
    """All learnable parameters of the path-aware network.

    proj maps node type -> (d_type, hidden) projection; conv maps path name
    -> one (hidden, hidden) matrix per layer; the attention parameters fuse
    per-path embeddings; classifier maps hidden -> classes.
    """

    def __init__(
        self,
        feature_dims: Mapping[str, int],
        path_names: Sequence[str],
        num_classes: int,
        hidden_dim: int = 64,
        num_layers: int = 2,
        activation: str = "relu",
        seed: int = 0,
    ):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        if num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        self.hidden_dim = hidden_dim
        self.num_layers = num_layers
        self.num_classes = num_classes
        self.activation = activation
        self.path_names = list(path_names)
        rng = np.random.default_rng(seed)
        d = hidden_dim
        self.proj = {
            t: Tensor(_glorot(rng, dim, d, (dim, d)), requires_grad=True, name=f"proj.{t}")
            for t, dim in feature_dims.items()
        }
        self.conv = {
            p: [
                Tensor(_glorot(rng, d, d, (d, d)), requires_grad=True, name=f"conv.{p}.{l}")
                for l in range(num_layers)
            ]
            for p in self.path_names
        }
        self.attn_w = Tensor(_glorot(rng, d, d, (d, d)), requires_grad=True, name="attn_w")
        self.attn_b = Tensor(np.zeros(d), requires_grad=True, name="attn_b")
        self.attn_q = Tensor(_glorot(rng, d, 1, (d,)), requires_grad=True, name="attn_q")
        self.classifier = Tensor(
            _glorot(rng, d, num_classes, (d, num_classes)),
            requires_grad=True,
            name="classifier",
        )

    def parameters(self) -> list[tuple[str, Tensor]]:
        params = [(t.name, t) for t in self.proj.values()]
        for p in self.path_names:
            params.extend((t.name, t) for t in self.conv[p])
        params.extend(
            (t.name, t)
            for t in (self.attn_w, self.attn_b, self.attn_q, self.classifier)
        )
        return params

    def zero_grad(self):
        for _, t in self.parameters():
            t.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.values.copy() for name, t in self.parameters()}

    def load_state_dict(self, state: Mapping[str, np.ndarray]):
        for name, t in self.parameters():
            if name not in state:
                raise KeyError(f"missing parameter {name!r}")
            if state[name].shape != t.values.shape:
                raise ValueError(
                    f"parameter {name!r} has shape {state[name].shape}, "
                    f"expected {t.values.shape}"
                )
            t.values = np.array(state[name], dtype=np.float64)


def project_features(
    model: Model, g: HetGraph, types: Sequence[str] | None = None
) -> dict[str, Tensor]:
    """Project each type's raw features into the shared hidden space."""
    wanted = list(types) if types is not None else list(model.proj)
    out = {}
    for t in wanted:
        if t not in model.proj:
            raise GraphError(f"no projection matrix for node type {t!r}")
        if t not in g.features:
            raise GraphError(f"node type {t!r} has no features")
        out[t] = ad.matmul(Tensor(g.features[t]), model.proj[t])
    return out


def graph_conv(
    norm: NormalizedAdjacency, h: Tensor, w: Tensor, activation: str = "identity"
) -> Tensor:
    """One convolution layer: norm @ h @ w, then the given activation."""
    out = ad.matmul(ad.spmm(norm.matrix, h), w)
    return ACTIVATIONS[activation](out)


def conv_stack(
    norm: NormalizedAdjacency, h: Tensor, weights: Sequence[Tensor], activation: str
) -> Tensor:
    """Stacked convolutions; the activation is skipped on the last layer."""
    for i, w in enumerate(weights):
        act = activation if i < len(weights) - 1 else "identity"
        h = graph_conv(norm, h, w, act)
    return h


def subgraph_attention(
    embeddings: Sequence[Tensor], model: Model
) -> tuple[Tensor, Tensor]:
    """Fuse per-path embeddings with softmax attention weights.

    Each path's score is the mean over nodes of q . tanh(H @ W + b); the
    softmax of the scores weights the sum of embeddings.
    """
    if not embeddings:
        raise ValueError("subgraph_attention needs at least one embedding")
    shapes = {e.values.shape for e in embeddings}
    if len(shapes) != 1:
        raise ValueError(f"embedding shapes differ: {sorted(shapes)}")
    scores = [
        ad.mean(ad.matmul(ad.tanh(ad.add(ad.matmul(h, model.attn_w), model.attn_b)),
                          model.attn_q))
        for h in embeddings
    ]
    betas = ad.softmax(ad.stack_scalars(scores))
    fused = ad.weighted_sum(list(embeddings), betas)
    return fused, betas


def cross_entropy(logits: Tensor, labels: LabelSet, idx: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of the true class over the given nodes."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size and not labels.mask[idx].all():
        bad = idx[~labels.mask[idx]]
        raise GraphError(f"unlabeled nodes in loss indices: {bad[:5].tolist()}")
    picked = ad.gather_rows(logits, idx)
    return ad.cross_entropy_from_logits(picked, labels.labels[idx])


class Adam:
    """Adam with decoupled weight decay and bias correction."""

    def __init__(
        self,
        params: Sequence[tuple[str, Tensor]],
        lr: float = 0.005,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = {name: np.zeros_like(t.values) for name, t in self.params}
        self.v = {name: np.zeros_like(t.values) for name, t in self.params}

    def step(self):
        missing = [name for name, t in self.params if t.grad is None]
        if missing:
            raise ValueError(f"missing gradients for {missing}")
        self.step_count += 1
        b1, b2 = self.betas
        correct1 = 1.0 - b1**self.step_count
        correct2 = 1.0 - b2**self.step_count
        for name, t in self.params:
            g = t.grad
            self.m[name] = b1 * self.m[name] + (1.0 - b1) * g
            self.v[name] = b2 * self.v[name] + (1.0 - b2) * g * g
            m_hat = self.m[name] / correct1
            v_hat = self.v[name] / correct2
            update = m_hat / (np.sqrt(v_hat) + self.eps)
            if self.weight_decay:
                update = update + self.weight_decay * t.values
            t.values = t.values - self.lr * update

    def zero_grad(self):
        for _, t in self.params:
            t.zero_grad()


def gradient_check(
    model: Model,
    loss_fn: Callable[[], Tensor],
    step: float = 1e-5,
    coords_per_param: int = 200,
    zero_floor: float = 1e-6,
    seed: int = 0,
) -> float:
    """Max relative error between analytic gradients and central differences.

    loss_fn must rebuild the loss from the model's current parameter values
    and be deterministic (no dropout). For each parameter tensor a random
    subsample of coordinates is probed; coordinates where both gradients are
    below zero_floor are treated as matching.
    """
    rng = np.random.default_rng(seed)
    model.zero_grad()
    loss_fn().backward()
    analytic = {name: t.grad.copy() for name, t in model.parameters()}

    worst = 0.0
    for name, t in model.parameters():
        flat = t.values.reshape(-1)
        size = flat.size
        count = min(size, coords_per_param)
        coords = rng.choice(size, size=count, replace=False)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + step
            f_plus = float(loss_fn().values)
            flat[c] = orig - step
            f_minus = float(loss_fn().values)
            flat[c] = orig
            numeric = (f_plus - f_minus) / (2.0 * step)
            a = analytic[name].reshape(-1)[c]
            denom = max(abs(a), abs(numeric))
            if denom < zero_floor:
                continue
            worst = max(worst, abs(a - numeric) / denom)
    return worst
