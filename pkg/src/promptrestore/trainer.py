"""Training loop: total objective, Adam with cosine annealing, evaluation.

The step objective combines an L1 pixel loss and an L1 Fourier-domain loss
with the prompt regularizers:

    L = w_pix L_pix + w_fft L_fft + w_align L_align
        + w_div (L_div_task + L_div_domain)
        + w_bal (L_bal_task + L_bal_domain)
        + w_con (L_con_task + L_con_domain)

Diversity, balance, and contrastive terms apply to both pools; alignment
ties the pooled domain representation to the sample's surrogate text
feature. Every run is bit-reproducible: data sampling consumes a dedicated
RNG stream whose state is checkpointed, evaluation draws from fixed seeded
sets, and resuming from a checkpoint continues the exact loss sequence of
the uninterrupted run.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import tensor as T
from .backbone import ModelConfig, PoolSettings, RestorationModel
from .checkpoint import CheckpointState, save_checkpoint
from .data import DataConfig, SyntheticDataset
from .metrics import psnr, ssim
from .regularizers import (RegularizerConfig, alignment_loss, balance_loss,
                           contrastive_loss, diversity_loss)
from .tensor import Tensor


@dataclass
class LossWeights:
    pix: float = 1.0
    fft: float = 0.1
    align: float = 1.0
    div: float = 0.1
    bal: float = 0.1
    con: float = 0.1

    def __post_init__(self):
        for name in ("pix", "fft", "align", "div", "bal", "con"):
            if getattr(self, name) < 0:
                raise ValueError(f"loss weight '{name}' must be >= 0")


@dataclass
class OptimConfig:
    lr: float = 4e-4
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8
    lr_min: float = 1e-6
    grad_clip: float = 0.0      # 0 disables clipping

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")


@dataclass
class TrainConfig:
    steps: int = 2000
    batch_size: int = 12
    seed: int = 0
    eval_every: int = 0         # 0: evaluate only after the final step
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    reg: RegularizerConfig = field(default_factory=RegularizerConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")


# ---------------------------------------------------------------------------
# losses

def reconstruction_losses(restored: Tensor, hq: Tensor):
    """(L1 pixel loss, L1 Fourier loss) between restored and target.

    The Fourier term is the mean of |Re| + |Im| of the spectrum of the
    residual, per channel (the transform is linear, so transforming the
    difference equals differencing the transforms).
    """
    if restored.shape != hq.shape:
        raise T.ShapeError(f"loss shape mismatch: {restored.shape} "
                           f"vs {hq.shape}")
    diff = restored - hq
    l_pix = T.tmean(T.tabs(diff))
    flat = diff.reshape(-1, *restored.shape[-2:]) if diff.ndim > 2 else \
        diff.reshape(1, *restored.shape[-2:])
    terms = []
    for c in range(flat.shape[0]):
        channel = T.take(flat, [c]).reshape(flat.shape[1:])
        re, im = T.dft2(channel)
        terms.append((T.tsum(T.tabs(re)) + T.tsum(T.tabs(im))).reshape(1))
    l_fft = T.tsum(T.concat(terms)) / float(flat.size)
    return l_pix, l_fft


def _selected_key_split(pool, selection):
    pos = T.take(pool.keys, selection.indices)
    rest = [j for j in range(pool.n) if j not in selection.indices]
    neg = T.take(pool.keys, rest)
    return pos, neg


def total_loss(model: RestorationModel, restored: Tensor, hq: Tensor,
               samples, diag, weights: LossWeights,
               reg: RegularizerConfig):
    """The full step objective plus its per-term weighted breakdown.

    The breakdown entries sum to the returned scalar exactly; zero-weight
    or inapplicable terms are reported as 0.
    """
    l_pix, l_fft = reconstruction_losses(restored, hq)
    parts = {"pix": T.mul(l_pix, weights.pix),
             "fft": T.mul(l_fft, weights.fft)}

    batch = len(samples)
    if model.domain_pool is not None and weights.align > 0:
        texts = [Tensor(s.text_feature) for s in samples]
        parts["align"] = T.mul(alignment_loss(diag.pr_domain, texts), weights.align)

    for kind, pool, sels, queries in (
            ("task", model.task_pool, diag.task_selections, diag.q_task),
            ("domain", model.domain_pool, diag.domain_selections, diag.q_domain)):
        if pool is None:
            continue
        if weights.div > 0:
            parts[f"div_{kind}"] = T.mul(
                diversity_loss(pool.values, reg.tau_div), weights.div)
        if weights.bal > 0:
            bal = [balance_loss(sel.full_probs).reshape(1) for sel in sels]
            parts[f"bal_{kind}"] = T.mul(T.tmean(T.concat(bal)), weights.bal)
        if weights.con > 0 and pool.n > max(len(s.indices) for s in sels):
            con = []
            for b, sel in enumerate(sels):
                q = T.take(queries, [b]).reshape(pool.dim)
                pos, neg = _selected_key_split(pool, sel)
                con.append(contrastive_loss(q, pos, neg, reg.tau_con).reshape(1))
            parts[f"con_{kind}"] = T.mul(T.tmean(T.concat(con)), weights.con)

    total = None
    for term in parts.values():
        total = term if total is None else total + term
    breakdown = {name: term.item() for name, term in parts.items()}
    for name in ("pix", "fft", "align", "div_task", "div_domain",
                 "bal_task", "bal_domain", "con_task", "con_domain"):
        breakdown.setdefault(name, 0.0)
    return total, breakdown


# ---------------------------------------------------------------------------
# optimizer

class Adam:
    """Standard bias-corrected Adam over a named-parameter table."""

    def __init__(self, params: dict, beta1: float = 0.9, beta2: float = 0.99,
                 eps: float = 1e-8):
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}

    def step(self, lr: float, step: int, grad_clip: float = 0.0):
        if step < 1:
            raise ValueError(f"adam step counter must be >= 1, got {step}")
        c1 = 1.0 - self.beta1 ** step
        c2 = 1.0 - self.beta2 ** step
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            if not np.isfinite(g).all():
                raise T.NonFiniteError(f"non-finite gradient for '{name}'")
            if grad_clip > 0:
                norm = float(np.linalg.norm(g))
                if norm > grad_clip:
                    g = g * (grad_clip / norm)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def adam_step(params: dict, moments_m: dict, moments_v: dict, lr: float,
              beta1: float, beta2: float, eps: float, step: int):
    """One functional Adam update over plain arrays (see also Adam)."""
    opt = Adam(params, beta1, beta2, eps)
    opt.m, opt.v = moments_m, moments_v
    opt.step(lr, step)
    return moments_m, moments_v


def lr_schedule(step: int, total_steps: int, lr_init: float,
                lr_min: float = 1e-6) -> float:
    """Cosine annealing from lr_init (step 0) down to lr_min (final step)."""
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    cos = math.cos(math.pi * step / total_steps)
    return lr_min + 0.5 * (lr_init - lr_min) * (1.0 + cos)


# ---------------------------------------------------------------------------
# evaluation

def evaluate(model: RestorationModel, dataset: SyntheticDataset,
             size: int | None = None, n: int | None = None) -> list:
    """Per-(domain, task) PSNR/SSIM on the fixed seeded eval sets.

    Side-effect free on model state (no tape growth, no grads). Returns one
    row per cell with the identity baseline alongside.
    """
    cfg = dataset.config
    size = size or cfg.eval_size
    n = n or cfg.eval_samples
    rows = []
    with T.no_grad():
        for domain in dataset.domains:
            for task in dataset.tasks:
                samples = dataset.eval_batch(domain.id, task.id, n, size)
                lq = Tensor(np.stack([s.lq for s in samples]))
                restored, _ = model.forward(lq, want_diagnostics=False)
                ps, ss, ps_lq, ss_lq = [], [], [], []
                for i, s in enumerate(samples):
                    out = np.clip(restored.data[i], 0.0, 1.0)
                    ps.append(psnr(out, s.hq))
                    ss.append(ssim(out, s.hq))
                    ps_lq.append(psnr(s.lq, s.hq))
                    ss_lq.append(ssim(s.lq, s.hq))
                rows.append({"domain": domain.id, "task": task.id,
                             "psnr": float(np.mean(ps)),
                             "ssim": float(np.mean(ss)),
                             "psnr_lq": float(np.mean(ps_lq)),
                             "ssim_lq": float(np.mean(ss_lq)),
                             "n": n})
    return rows


# ---------------------------------------------------------------------------
# training

@dataclass
class TrainResult:
    model: RestorationModel
    dataset: SyntheticDataset
    history: list
    evals: list
    config: TrainConfig
    checkpoint_path: Path | None = None


def _config_snapshot(config: TrainConfig) -> dict:
    from .config import train_config_to_flat   # deferred: config imports us
    return train_config_to_flat(config)


def load_model_state(model: RestorationModel, state: CheckpointState):
    """Copy checkpointed arrays into the model, strict on names and shapes."""
    params = model.named_parameters()
    missing = [n for n in params if n not in state.params]
    extra = [n for n in state.params if n not in params]
    if missing or extra:
        raise ValueError(f"checkpoint/model parameter table mismatch: "
                         f"missing {missing or 'none'}, "
                         f"unexpected {extra or 'none'}")
    for name, p in params.items():
        arr = state.params[name]
        if tuple(arr.shape) != tuple(p.shape):
            raise ValueError(f"shape mismatch for '{name}': checkpoint has "
                             f"{tuple(arr.shape)}, model expects {tuple(p.shape)}")
        p.data = np.array(arr, dtype=np.float64)


def _gradient_spot_check(model, loss_fn, rng) -> float:
    """FD-check one randomly chosen parameter entry per module family
    against the live total loss; returns the worst relative error."""
    families = {}
    for name, p in model.parameters():
        families.setdefault(name.split(".")[0], []).append((name, p))
    worst = 0.0
    for fam, plist in families.items():
        name, p = plist[int(rng.integers(len(plist)))]
        if p.grad is None:
            continue
        idx = np.unravel_index(int(rng.integers(p.size)), p.shape)
        base = p.data[idx]
        eps = 1e-6
        p.data[idx] = base + eps
        with T.no_grad():
            hi = loss_fn().item()
        p.data[idx] = base - eps
        with T.no_grad():
            lo = loss_fn().item()
        p.data[idx] = base
        numeric = (hi - lo) / (2 * eps)
        denom = max(abs(numeric), abs(p.grad[idx]), 1e-8)
        worst = max(worst, abs(numeric - p.grad[idx]) / denom)
    return worst


def train(config: TrainConfig, out_dir=None,
          resume: CheckpointState | None = None,
          gradient_check: bool = False) -> TrainResult:
    """Run (or resume) a full training; deterministic given the seed.

    With ``out_dir`` set, emits history.jsonl (one JSON record per step,
    eval records interleaved) and checkpoint.bin.
    """
    dataset = SyntheticDataset(config.data, dim=config.model.dim,
                               seed=config.seed)
    init_ss, sample_ss = np.random.SeedSequence(config.seed).spawn(2)
    model = RestorationModel(config.model, np.random.default_rng(init_ss))
    sample_rng = np.random.default_rng(sample_ss)
    params = model.named_parameters()
    opt = Adam(params, config.optim.beta1, config.optim.beta2, config.optim.eps)
    start_step = 0

    if resume is not None:
        load_model_state(model, resume)
        for name in params:
            opt.m[name] = np.array(resume.moments_m[name], dtype=np.float64)
            opt.v[name] = np.array(resume.moments_v[name], dtype=np.float64)
        sample_rng.bit_generator.state = resume.rng_state
        start_step = resume.step

    out_dir = Path(out_dir) if out_dir is not None else None
    history_fh = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        history_fh = open(out_dir / "history.jsonl",
                          "a" if resume is not None else "w")

    history = []
    evals = []

    def emit(record):
        history.append(record)
        if history_fh is not None:
            history_fh.write(json.dumps(record, sort_keys=True) + "\n")

    def run_eval(step):
        rows = evaluate(model, dataset)
        emit({"step": step, "eval": rows})
        return rows

    try:
        for step in range(start_step + 1, config.steps + 1):
            lr = lr_schedule(step - 1, config.steps, config.optim.lr,
                             config.optim.lr_min)
            batch = dataset.balanced_batch(config.batch_size,
                                           config.data.image_size, sample_rng)
            lq = Tensor(np.stack([s.lq for s in batch]))
            hq = Tensor(np.stack([s.hq for s in batch]))

            T.reset_tape()
            model.zero_grad()
            restored, diag = model.forward(lq)
            loss, breakdown = total_loss(model, restored, hq, batch, diag,
                                         config.loss, config.reg)
            loss.backward()

            record = {"step": step, "lr": lr, "total": loss.item(),
                      "terms": breakdown,
                      "gates": diag.gate_values}
            for kind, sels, pool in (("task", diag.task_selections,
                                      model.task_pool),
                                     ("domain", diag.domain_selections,
                                      model.domain_pool)):
                if sels is None:
                    continue
                counts = [0] * pool.n
                for sel in sels:
                    for j in sel.indices:
                        counts[j] += 1
                record[f"{kind}_selection_counts"] = counts

            if gradient_check and step == config.steps:
                def live_loss():
                    out, dg = model.forward(lq)
                    return total_loss(model, out, hq, batch, dg,
                                      config.loss, config.reg)[0]
                record["gradcheck_rel_err"] = _gradient_spot_check(
                    model, live_loss, np.random.default_rng(config.seed + step))

            opt.step(lr, step, config.optim.grad_clip)
            T.reset_tape()
            emit(record)

            if config.eval_every and step % config.eval_every == 0 \
                    and step < config.steps:
                run_eval(step)

        evals = run_eval(config.steps) if config.steps > start_step else \
            run_eval(start_step)
    finally:
        if history_fh is not None:
            history_fh.close()

    ckpt_path = None
    if out_dir is not None:
        ckpt_path = out_dir / "checkpoint.bin"
        write_training_checkpoint(ckpt_path, config, model, opt,
                                  max(config.steps, start_step), sample_rng)
    return TrainResult(model=model, dataset=dataset, history=history,
                       evals=evals, config=config, checkpoint_path=ckpt_path)


def write_training_checkpoint(path, config: TrainConfig,
                              model: RestorationModel, opt: Adam,
                              step: int, sample_rng: np.random.Generator):
    params = {name: p.data for name, p in model.parameters()}
    save_checkpoint(path, config=_config_snapshot(config), step=step,
                    rng_state=sample_rng.bit_generator.state,
                    params=params, moments_m=opt.m, moments_v=opt.v)


# ---------------------------------------------------------------------------
# ablation harness

ABLATION_ARMS = ("both", "task", "domain", "none")


def ablation_config(config: TrainConfig, arm: str) -> TrainConfig:
    want_task = arm in ("both", "task")
    want_domain = arm in ("both", "domain")
    model = replace(config.model,
                    task_pool=replace(config.model.task_pool, enabled=want_task),
                    domain_pool=replace(config.model.domain_pool,
                                        enabled=want_domain))
    return replace(config, model=model)


def run_ablation(config: TrainConfig, arms=ABLATION_ARMS) -> dict:
    """Train one model per arm under identical seed/steps; report the mean
    eval PSNR (and rows) per arm."""
    results = {}
    for arm in arms:
        res = train(ablation_config(config, arm))
        mean_psnr = float(np.mean([r["psnr"] for r in res.evals]))
        results[arm] = {"mean_psnr": mean_psnr, "rows": res.evals,
                        "final_total": res.history[-2]["total"]
                        if len(res.history) > 1 else None}
    return results
