"""Cross-attention fusion of prompt representations and gated injection.

The task and domain representations are fused by single-head scaled
dot-product attention (task tokens query the domain tokens) with a residual
connection. The fused representation is injected into backbone feature maps
at each site through the same attention mechanism, with the feature/prompt
balance set per site by a learnable gate alpha = sigmoid(raw): queries are
scaled by alpha, the prompt context by 1 - alpha.

Output projections start at zero, so a freshly initialized model's forward
pass is bit-identical with and without injection.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import ShapeError, Tensor


class CrossAttention:
    """Single-head scaled dot-product attention, dimension-preserving,
    bias-free. W_O zero-initialized for warm-start neutrality."""

    def __init__(self, dim: int, rng: np.random.Generator,
                 zero_output: bool = True, name: str = "attn"):
        self.dim = dim
        self.name = name
        std = 1.0 / np.sqrt(dim)
        self.w_q = T.randn(rng, dim, dim, std=std, requires_grad=True)
        self.w_k = T.randn(rng, dim, dim, std=std, requires_grad=True)
        self.w_v = T.randn(rng, dim, dim, std=std, requires_grad=True)
        self.w_o = (T.zeros(dim, dim, requires_grad=True) if zero_output
                    else T.randn(rng, dim, dim, std=std, requires_grad=True))

    def parameters(self):
        for attr in ("w_q", "w_k", "w_v", "w_o"):
            yield f"{self.name}.{attr}", getattr(self, attr)


def attend(attn: CrossAttention, queries: Tensor, context: Tensor) -> Tensor:
    """softmax(Q K^T / sqrt(d)) V, then the output projection.

    queries: [m, d], context: [n, d] -> [m, d]. Residuals are the callers'
    business.
    """
    if queries.ndim != 2 or context.ndim != 2:
        raise ShapeError(f"attend expects 2-D token matrices, got "
                         f"{queries.shape} and {context.shape}")
    if queries.shape[1] != attn.dim or context.shape[1] != attn.dim:
        raise ShapeError(f"attend dimension mismatch: queries {queries.shape}, "
                         f"context {context.shape}, attention dim {attn.dim}")
    q = T.matmul(queries, attn.w_q)
    k = T.matmul(context, attn.w_k)
    v = T.matmul(context, attn.w_v)
    scores = T.matmul(q, k.T) / np.sqrt(attn.dim)
    weights = T.softmax(scores, axis=-1)
    return T.matmul(T.matmul(weights, v), attn.w_o)


def fuse_representations(attn: CrossAttention, pr_task: Tensor,
                         pr_domain: Tensor) -> Tensor:
    """Task tokens attend over domain tokens; residual keeps the task path:
    PR_dt = PR_t + Attn(PR_t, PR_d)."""
    if pr_task.shape != pr_domain.shape:
        raise ShapeError(f"fuse_representations shape mismatch: "
                         f"{pr_task.shape} vs {pr_domain.shape}")
    return pr_task + attend(attn, pr_task, pr_domain)


class ChannelAdapter:
    """Affine map from prompt dimension d to a site's channel count c."""

    def __init__(self, dim: int, channels: int, rng: np.random.Generator,
                 name: str = "adapter"):
        self.dim = dim
        self.channels = channels
        self.name = name
        self.w = T.randn(rng, dim, channels, std=1.0 / np.sqrt(dim),
                         requires_grad=True)
        self.b = T.zeros(channels, requires_grad=True)

    def parameters(self):
        yield f"{self.name}.w", self.w
        yield f"{self.name}.b", self.b

    def apply(self, tokens: Tensor) -> Tensor:
        if tokens.shape[-1] != self.dim:
            raise ShapeError(f"adapter expects tokens of dim {self.dim}, "
                             f"got {tokens.shape}")
        return T.matmul(tokens, self.w) + self.b


class GateSet:
    """One trainable raw scalar per injection layer; alpha_l = sigmoid(raw_l)
    keeps every gate strictly inside (0, 1) without projection steps."""

    def __init__(self, n_sites: int, init_raw: float = 0.0):
        self.raw = [Tensor(np.asarray(init_raw), requires_grad=True)
                    for _ in range(n_sites)]

    def __len__(self):
        return len(self.raw)

    def parameters(self):
        for i, r in enumerate(self.raw):
            yield f"gates.{i}.raw", r

    def alpha(self, site: int) -> Tensor:
        return T.sigmoid(self.raw[site])

    def alphas(self) -> list:
        return [float(T.sigmoid(r).data) for r in self.raw]


def gated_inject(attn: CrossAttention, feature: Tensor, pr_dt: Tensor,
                 gate: Tensor, channel_adapter: ChannelAdapter,
                 residual: bool = True) -> Tensor:
    """Inject the fused prompt representation into one feature map.

    feature [c, h, w] positions become h*w query tokens scaled by alpha;
    the adapted prompt tokens, scaled by 1 - alpha, are the attention
    context. The attended result is reshaped back and (by default) added
    residually to the incoming feature.
    """
    if feature.ndim != 3:
        raise ShapeError(f"gated_inject expects feature [c,h,w], "
                         f"got {feature.shape}")
    c, h, w = feature.shape
    adapted = channel_adapter.apply(pr_dt)            # [T, c]
    if adapted.shape[1] != c:
        raise ShapeError(f"adapter produces {adapted.shape[1]} channels, "
                         f"feature has {c}")
    tokens = feature.reshape(c, h * w).T              # [hw, c]
    queries = T.mul(tokens, gate)
    context = T.mul(adapted, 1.0 - gate)
    out = attend(attn, queries, context)              # [hw, c]
    delta = out.T.reshape(c, h, w)
    return feature + delta if residual else delta
