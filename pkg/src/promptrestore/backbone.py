"""Small U-shaped restoration network with prompt-pool guidance hooks.

Pipeline: first conv -> shallow feature (domain query hook) -> strided
encoder -> bottleneck feature (task query hook) -> per-sample prompt
retrieval and composition -> cross-attention fusion into one joint
representation -> gated injection at the bottleneck and every decoder level
-> skip-connected decoder -> zero-initialized final conv. The network
predicts a residual, so a fresh model reproduces its input exactly and the
identity baseline is the training starting point.

Either prompt pool can be disabled; with both off the model degenerates to
the plain backbone and carries no pool, projector, fusion, or gate
parameters (the ablation baseline).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .fusion import (ChannelAdapter, CrossAttention, GateSet,
                     fuse_representations, gated_inject)
from .pool import QueryProjector, compose, init_pool, select_top_k
from .tensor import ShapeError, Tensor


@dataclass
class BackboneConfig:
    levels: int = 3
    channels: tuple = (16, 32, 64)
    blocks: int = 1
    in_channels: int = 3

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        if len(self.channels) != self.levels:
            raise ValueError(f"need {self.levels} channel counts, "
                             f"got {self.channels}")
        if any(b >= a for a, b in zip(self.channels[1:], self.channels[:-1])):
            raise ValueError(f"channels must increase down the encoder, "
                             f"got {self.channels}")
        if self.blocks < 1 or self.levels < 2:
            raise ValueError("levels must be >= 2 and blocks >= 1")

    @property
    def divisor(self) -> int:
        return 2 ** (self.levels - 1)


@dataclass
class PoolSettings:
    enabled: bool = True
    n: int = 8
    top_k: int = 2
    temperature: float = 1.0


@dataclass
class ModelConfig:
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    dim: int = 64                 # prompt key/query dimension
    tokens: int = 2               # value tokens per prompt
    task_pool: PoolSettings = field(default_factory=lambda: PoolSettings(top_k=2))
    domain_pool: PoolSettings = field(default_factory=lambda: PoolSettings(top_k=3))
    fusion_residual: bool = True  # residual around each injection site

    @property
    def prompts_enabled(self) -> bool:
        return self.task_pool.enabled or self.domain_pool.enabled


@dataclass
class ForwardDiagnostics:
    """Per-forward observability: which prompts each sample selected, the
    gate openings, and the magnitude of the fused representation.

    The trailing fields hold live (differentiable) tensors for the training
    losses: per-sample task/domain representations before fusion and the
    batched query matrices."""

    task_selections: list | None
    domain_selections: list | None
    gate_values: list
    pr_dt_norm: float
    pr_task: list | None = None
    pr_domain: list | None = None
    q_task: Tensor | None = None
    q_domain: Tensor | None = None


class _Conv:
    def __init__(self, c_in, c_out, k, rng, stride=1, zero_init=False, name=""):
        std = 1.0 / np.sqrt(c_in * k * k)
        self.w = (T.zeros(c_out, c_in, k, k, requires_grad=True) if zero_init
                  else T.randn(rng, c_out, c_in, k, k, std=std, requires_grad=True))
        self.b = T.zeros(c_out, requires_grad=True)
        self.stride = stride
        self.padding = k // 2
        self.name = name

    def __call__(self, x):
        return T.conv2d(x, self.w, self.b, stride=self.stride, padding=self.padding)

    def parameters(self):
        yield f"{self.name}.w", self.w
        yield f"{self.name}.b", self.b


class _Block:
    """`blocks` repetitions of conv3x3 + silu at a fixed width."""

    def __init__(self, channels, blocks, rng, name=""):
        self.convs = [_Conv(channels, channels, 3, rng, name=f"{name}.conv{i}")
                      for i in range(blocks)]

    def __call__(self, x):
        for conv in self.convs:
            x = T.silu(conv(x))
        return x

    def parameters(self):
        for conv in self.convs:
            yield from conv.parameters()


class RestorationModel:
    """The full restorer: backbone plus (optionally) both prompt pools."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.config = config
        bb = config.backbone
        ch = bb.channels
        self.conv_in = _Conv(bb.in_channels, ch[0], 3, rng, name="backbone.conv_in")
        self.enc_blocks = [_Block(ch[i], bb.blocks, rng, name=f"backbone.enc{i}")
                           for i in range(bb.levels - 1)]
        self.downs = [_Conv(ch[i], ch[i + 1], 3, rng, stride=2,
                            name=f"backbone.down{i}")
                      for i in range(bb.levels - 1)]
        self.bottleneck = _Block(ch[-1], bb.blocks, rng, name="backbone.bottleneck")
        self.ups = [_Conv(ch[i + 1], ch[i], 3, rng, name=f"backbone.up{i}")
                    for i in reversed(range(bb.levels - 1))]
        self.merges = [_Conv(2 * ch[i], ch[i], 1, rng, name=f"backbone.merge{i}")
                       for i in reversed(range(bb.levels - 1))]
        self.dec_blocks = [_Block(ch[i], bb.blocks, rng, name=f"backbone.dec{i}")
                           for i in reversed(range(bb.levels - 1))]
        self.conv_out = _Conv(ch[0], bb.in_channels, 3, rng, zero_init=True,
                              name="backbone.conv_out")

        self.task_pool = None
        self.domain_pool = None
        self.task_projector = None
        self.domain_projector = None
        self.fusion_attn = None
        self.inject_attns = []
        self.adapters = []
        self.gates = None

        if config.task_pool.enabled:
            s = config.task_pool
            self.task_pool = init_pool(s.n, config.tokens, config.dim,
                                       s.temperature, rng, kind="task")
            self.task_projector = QueryProjector(ch[-1], config.dim, rng,
                                                 name="projector.task")
        if config.domain_pool.enabled:
            s = config.domain_pool
            self.domain_pool = init_pool(s.n, config.tokens, config.dim,
                                         s.temperature, rng, kind="domain")
            self.domain_projector = QueryProjector(ch[0], config.dim, rng,
                                                   name="projector.domain")
        if config.task_pool.enabled and config.domain_pool.enabled:
            self.fusion_attn = CrossAttention(config.dim, rng, zero_output=True,
                                              name="fusion.attn")
        if config.prompts_enabled:
            # injection at the bottleneck and at every decoder level
            site_channels = [ch[-1]] + [ch[i] for i in reversed(range(bb.levels - 1))]
            self.inject_attns = [CrossAttention(c, rng, zero_output=True,
                                                name=f"inject.{i}.attn")
                                 for i, c in enumerate(site_channels)]
            self.adapters = [ChannelAdapter(config.dim, c, rng,
                                            name=f"inject.{i}.adapter")
                             for i, c in enumerate(site_channels)]
            self.gates = GateSet(len(site_channels))

    # -- parameter registry ---------------------------------------------------

    def parameters(self):
        yield from self.conv_in.parameters()
        for blk in self.enc_blocks:
            yield from blk.parameters()
        for conv in self.downs:
            yield from conv.parameters()
        yield from self.bottleneck.parameters()
        for conv in self.ups:
            yield from conv.parameters()
        for conv in self.merges:
            yield from conv.parameters()
        for blk in self.dec_blocks:
            yield from blk.parameters()
        yield from self.conv_out.parameters()
        if self.task_pool is not None:
            yield from self.task_pool.parameters()
            yield from self.task_projector.parameters()
        if self.domain_pool is not None:
            yield from self.domain_pool.parameters()
            yield from self.domain_projector.parameters()
        if self.fusion_attn is not None:
            yield from self.fusion_attn.parameters()
        for attn in self.inject_attns:
            yield from attn.parameters()
        for adapter in self.adapters:
            yield from adapter.parameters()
        if self.gates is not None:
            yield from self.gates.parameters()

    def named_parameters(self) -> dict:
        return dict(self.parameters())

    def zero_grad(self):
        for _, p in self.parameters():
            p.zero_grad()

    # -- prompt plumbing -------------------------------------------------------

    def _fused_representation(self, q_task, q_domain, b: int):
        """Per-sample retrieval, composition, and fusion. Returns
        (PR_dt, PR_t, PR_d, task selection, domain selection)."""
        cfg = self.config
        sel_t = sel_d = None
        pr_t = pr_d = None
        if self.task_pool is not None:
            q = T.take(q_task, [b]).reshape(cfg.dim)
            sel_t = select_top_k(self.task_pool, q, cfg.task_pool.top_k)
            pr_t = compose(sel_t, self.task_pool)
        if self.domain_pool is not None:
            q = T.take(q_domain, [b]).reshape(cfg.dim)
            sel_d = select_top_k(self.domain_pool, q, cfg.domain_pool.top_k)
            pr_d = compose(sel_d, self.domain_pool)
        if pr_t is not None and pr_d is not None:
            pr_dt = fuse_representations(self.fusion_attn, pr_t, pr_d)
        else:
            pr_dt = pr_t if pr_t is not None else pr_d
        return pr_dt, pr_t, pr_d, sel_t, sel_d

    def _inject(self, features: Tensor, pr_dts: list, site: int) -> Tensor:
        out = []
        for b in range(features.shape[0]):
            feat = T.take(features, [b]).reshape(features.shape[1:])
            out.append(gated_inject(self.inject_attns[site], feat, pr_dts[b],
                                    self.gates.alpha(site), self.adapters[site],
                                    residual=self.config.fusion_residual))
        return T.stack(out)

    # -- forward ---------------------------------------------------------------

    def forward(self, lq: Tensor, want_diagnostics: bool = True):
        """Restore a [B, 3, H, W] batch (or a single [3, H, W] image).

        Returns (restored, ForwardDiagnostics); H and W must be divisible by
        2^(levels-1).
        """
        cfg = self.config
        single = lq.ndim == 3
        x = lq.reshape(1, *lq.shape) if single else lq
        if x.ndim != 4:
            raise ShapeError(f"expected [B,3,H,W] or [3,H,W], got {lq.shape}")
        if x.shape[1] != cfg.backbone.in_channels:
            raise ShapeError(f"expected {cfg.backbone.in_channels} input "
                             f"channels, got {x.shape[1]}")
        h, w = x.shape[2], x.shape[3]
        div = cfg.backbone.divisor
        if h % div or w % div:
            raise ShapeError(f"spatial dims ({h}, {w}) must be divisible "
                             f"by {div}")
        batch = x.shape[0]

        shallow = self.conv_in(x)
        feat = shallow
        skips = []
        for blk, down in zip(self.enc_blocks, self.downs):
            feat = blk(feat)
            skips.append(feat)
            feat = down(feat)
        mid = self.bottleneck(feat)

        pr_dts = None
        q_task = q_domain = None
        prs_t = prs_d = sels_t = sels_d = None
        gate_values = []
        pr_norm = 0.0
        if cfg.prompts_enabled:
            q_task = (self.task_projector.forward(mid)
                      if self.task_pool is not None else None)
            q_domain = (self.domain_projector.forward(shallow)
                        if self.domain_pool is not None else None)
            pr_dts, prs_t, prs_d, sels_t, sels_d = [], [], [], [], []
            for b in range(batch):
                pr_dt, pr_t, pr_d, sel_t, sel_d = \
                    self._fused_representation(q_task, q_domain, b)
                pr_dts.append(pr_dt)
                prs_t.append(pr_t)
                prs_d.append(pr_d)
                sels_t.append(sel_t)
                sels_d.append(sel_d)
            if self.task_pool is None:
                prs_t = sels_t = None
            if self.domain_pool is None:
                prs_d = sels_d = None
            gate_values = self.gates.alphas()
            pr_norm = float(np.mean([np.linalg.norm(p.data) for p in pr_dts]))
            mid = self._inject(mid, pr_dts, site=0)

        feat = mid
        for i, (up, merge, blk) in enumerate(zip(self.ups, self.merges,
                                                 self.dec_blocks)):
            feat = up(T.upsample_nearest2(feat))
            feat = merge(T.concat([feat, skips[-1 - i]], axis=1))
            feat = blk(feat)
            if cfg.prompts_enabled:
                feat = self._inject(feat, pr_dts, site=i + 1)
        delta = self.conv_out(feat)
        restored = x + delta

        diag = None
        if want_diagnostics:
            diag = ForwardDiagnostics(task_selections=sels_t,
                                      domain_selections=sels_d,
                                      gate_values=gate_values,
                                      pr_dt_norm=pr_norm,
                                      pr_task=prs_t, pr_domain=prs_d,
                                      q_task=q_task, q_domain=q_domain)
        if single:
            restored = restored.reshape(*lq.shape)
        return restored, diag


def count_parameters(model: RestorationModel) -> int:
    """Exact count of trainable scalars, pools and gates included."""
    return sum(p.size for _, p in model.parameters())
