"""Learnable prompt pools: query projection, top-k retrieval, composition.

A pool holds N key-value prompt pairs. An input-derived query vector is
matched against the keys by cosine similarity; the k best prompts are
retrieved and their values combined by a softmax over the selected
similarities (at the pool's composition temperature) into one instance-level
prompt representation. Retrieval indices are discrete: gradients flow through
the similarities and composition weights, never through the ranking itself.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .tensor import ShapeError, Tensor


@dataclass
class PromptPool:
    """N prompt pairs: keys [N, d], values [N, T, d], plus composition
    temperature. ``kind`` tags the pool as task- or domain-facing."""

    keys: Tensor
    values: Tensor
    temperature: float
    kind: str = "task"

    @property
    def n(self) -> int:
        return self.keys.shape[0]

    @property
    def tokens(self) -> int:
        return self.values.shape[1]

    @property
    def dim(self) -> int:
        return self.keys.shape[1]

    def parameters(self):
        yield f"pools.{self.kind}.keys", self.keys
        yield f"pools.{self.kind}.values", self.values


@dataclass
class PromptSelection:
    """Result of one query against one pool.

    indices are sorted by descending similarity (ties to the lower index);
    ``similarities`` and ``weights`` stay differentiable w.r.t. the query and
    keys, ``full_probs`` is the temperature-1 softmax over all N similarities
    used by the balance regularizer.
    """

    indices: list
    similarities: Tensor
    weights: Tensor
    full_probs: Tensor
    pool_size: int = field(default=0)


def init_pool(n: int, tokens: int, dim: int, temperature: float,
              rng: np.random.Generator, kind: str = "task") -> PromptPool:
    """Fresh pool with keys/values drawn i.i.d. from normal(0, 0.02).

    Small-scale init keeps early similarities near zero so the balance loss
    can shape utilization before any prompt dominates.
    """
    if n < 1 or tokens < 1 or dim < 1:
        raise ValueError(f"pool sizes must be >= 1, got N={n} T={tokens} d={dim}")
    if temperature <= 0:
        raise ValueError(f"pool temperature must be > 0, got {temperature}")
    keys = T.randn(rng, n, dim, std=0.02, requires_grad=True)
    values = T.randn(rng, n, tokens, dim, std=0.02, requires_grad=True)
    return PromptPool(keys=keys, values=values, temperature=float(temperature),
                      kind=kind)


class QueryProjector:
    """Maps a feature map to a query vector in the pool's key space.

    Three stages: two 3x3 stride-1 convolutions with a nonlinearity between,
    global average pooling over the spatial grid, and a two-layer MLP ending
    at the key dimension. ``activation='identity'`` turns the projector into
    a purely linear map (used by the linearity tests).
    """

    def __init__(self, in_channels: int, dim: int, rng: np.random.Generator,
                 activation: str = "silu", name: str = "projector"):
        if activation not in ("silu", "identity"):
            raise ValueError(f"unknown activation '{activation}'")
        self.in_channels = in_channels
        self.dim = dim
        self.activation = activation
        self.name = name
        w = in_channels
        c_std = 1.0 / np.sqrt(in_channels * 9.0)
        w_std = 1.0 / np.sqrt(w)
        self.conv1_w = T.randn(rng, w, in_channels, 3, 3, std=c_std, requires_grad=True)
        self.conv1_b = T.zeros(w, requires_grad=True)
        self.conv2_w = T.randn(rng, w, w, 3, 3, std=1.0 / np.sqrt(w * 9.0), requires_grad=True)
        self.conv2_b = T.zeros(w, requires_grad=True)
        self.fc1_w = T.randn(rng, w, w, std=w_std, requires_grad=True)
        self.fc1_b = T.zeros(w, requires_grad=True)
        self.fc2_w = T.randn(rng, w, dim, std=w_std, requires_grad=True)
        self.fc2_b = T.zeros(dim, requires_grad=True)

    def _act(self, x: Tensor) -> Tensor:
        return T.silu(x) if self.activation == "silu" else x

    def parameters(self):
        for attr in ("conv1_w", "conv1_b", "conv2_w", "conv2_b",
                     "fc1_w", "fc1_b", "fc2_w", "fc2_b"):
            yield f"{self.name}.{attr}", getattr(self, attr)

    def forward(self, features: Tensor) -> Tensor:
        """[c, h, w] -> [d], or batched [B, c, h, w] -> [B, d]."""
        single = features.ndim == 3
        x = features.reshape(1, *features.shape) if single else features
        if x.ndim != 4:
            raise ShapeError(f"projector expects [c,h,w] or [B,c,h,w], "
                             f"got {features.shape}")
        x = T.conv2d(x, self.conv1_w, self.conv1_b, stride=1, padding=1)
        x = self._act(x)
        x = T.conv2d(x, self.conv2_w, self.conv2_b, stride=1, padding=1)
        x = x.mean(axis=(2, 3))                 # global average pool -> [B, w]
        x = self._act(T.matmul(x, self.fc1_w) + self.fc1_b)
        q = T.matmul(x, self.fc2_w) + self.fc2_b
        return q.reshape(self.dim) if single else q


def compute_query(projector: QueryProjector, features: Tensor) -> Tensor:
    return projector.forward(features)


def _cosine_to_keys(pool: PromptPool, query: Tensor) -> Tensor:
    """Differentiable [N] vector of cosine similarities query vs. each key."""
    qn = float(np.linalg.norm(query.data))
    key_norms_np = np.linalg.norm(pool.keys.data, axis=1)
    if qn == 0.0 or np.any(key_norms_np == 0.0):
        # degenerate features must not abort a step; fall back to the
        # scalar cosine which defines zero-norm pairs as 0
        return T.stack([T.cosine_similarity(query, T.take(pool.keys, [j]).reshape(pool.dim))
                        for j in range(pool.n)]).reshape(pool.n)
    dots = T.matmul(pool.keys, query.reshape(pool.dim, 1)).reshape(pool.n)
    key_norms = T.sqrt(T.tsum(T.mul(pool.keys, pool.keys), axis=1))
    qnorm = T.sqrt(T.tsum(T.mul(query, query)))
    return dots / (key_norms * qnorm)


def select_top_k(pool: PromptPool, query: Tensor, k: int) -> PromptSelection:
    """Retrieve the k most similar prompts (cosine), ties to the lower index."""
    if not 1 <= k <= pool.n:
        raise ValueError(f"top-k must satisfy 1 <= k <= N={pool.n}, got k={k}")
    if query.shape != (pool.dim,):
        raise ShapeError(f"query shape {query.shape} does not match "
                         f"key dimension ({pool.dim},)")
    sims = _cosine_to_keys(pool, query)
    order = np.argsort(-sims.data, kind="stable")
    indices = [int(j) for j in order[:k]]
    similarities = T.take(sims, indices)
    weights = T.softmax(similarities, temperature=pool.temperature)
    full_probs = T.softmax(sims, temperature=1.0)
    return PromptSelection(indices=indices, similarities=similarities,
                           weights=weights, full_probs=full_probs,
                           pool_size=pool.n)


def compose(selection: PromptSelection, pool: PromptPool) -> Tensor:
    """Weighted combination of the selected values: PR = sum_j alpha_j V_j."""
    if max(selection.indices) >= pool.n:
        raise IndexError(
            f"stale selection: index {max(selection.indices)} >= pool size {pool.n}")
    chosen = T.take(pool.values, selection.indices)          # [k, T, d]
    alpha = selection.weights.reshape(len(selection.indices), 1, 1)
    return T.tsum(T.mul(alpha, chosen), axis=0)              # [T, d]
