"""Flat key = value run configuration.

Every knob of a training run lives in one namespace (`section.key`), each
with a documented default. Files hold one `key = value` pair per line with
`#` comments; unknown keys are rejected with the offending line number, and
`--set section.key=value` overrides apply on top. A parsed config
normalizes to a canonical sorted text form that round-trips exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

from .backbone import BackboneConfig, ModelConfig, PoolSettings
from .data import DataConfig
from .regularizers import RegularizerConfig
from .trainer import LossWeights, OptimConfig, TrainConfig


class ConfigError(ValueError):
    """Unparseable, unknown, or ill-typed configuration input."""


@dataclass
class _Field:
    kind: str        # int | float | bool | str | csv | csv_int
    default: object
    doc: str


SCHEMA = {
    "trainer.steps": _Field("int", 2000, "training steps"),
    "trainer.batch_size": _Field("int", 12, "samples per step, domain-balanced"),
    "trainer.seed": _Field("int", 0, "master seed for init and sampling"),
    "trainer.eval_every": _Field("int", 0, "eval cadence in steps (0: final only)"),
    "data.domains": _Field("csv", ["natural", "medical", "remote"],
                           "image domains in the roster"),
    "data.tasks": _Field("csv", ["noise", "haze"], "degradation tasks"),
    "data.image_size": _Field("int", 32, "training crop side"),
    "data.eval_size": _Field("int", 64, "evaluation image side"),
    "data.eval_samples": _Field("int", 4, "eval images per (domain, task)"),
    "data.jitter": _Field("float", 0.1, "text-feature instance jitter"),
    "data.noise_sigma": _Field("float", 0.1, "additive noise std"),
    "data.blur_sigma": _Field("float", 1.8, "Gaussian blur std"),
    "data.streak_count": _Field("int", 8, "bright streaks per image"),
    "data.streak_strength": _Field("float", 0.6, "streak added brightness"),
    "data.sr_factor": _Field("int", 2, "downsample-restore factor"),
    "data.mask_patches": _Field("int", 3, "zeroed patches per image"),
    "data.mask_patch_frac": _Field("float", 0.2, "patch side / image side"),
    "data.haze_t_min": _Field("float", 0.5, "haze transmission lower bound"),
    "data.haze_t_max": _Field("float", 0.75, "haze transmission upper bound"),
    "data.airlight_min": _Field("float", 0.8, "haze airlight lower bound"),
    "data.airlight_max": _Field("float", 0.95, "haze airlight upper bound"),
    "pools.dim": _Field("int", 64, "prompt key/query dimension"),
    "pools.tokens": _Field("int", 2, "value tokens per prompt"),
    "pools.task.enabled": _Field("bool", True, "use the task prompt pool"),
    "pools.task.n": _Field("int", 8, "task pool size"),
    "pools.task.topk": _Field("int", 2, "task prompts retrieved per query"),
    "pools.task.temperature": _Field("float", 1.0, "task composition temperature"),
    "pools.domain.enabled": _Field("bool", True, "use the domain prompt pool"),
    "pools.domain.n": _Field("int", 8, "domain pool size"),
    "pools.domain.topk": _Field("int", 3, "domain prompts retrieved per query"),
    "pools.domain.temperature": _Field("float", 1.0,
                                       "domain composition temperature"),
    "backbone.levels": _Field("int", 3, "encoder depth"),
    "backbone.channels": _Field("csv_int", [16, 32, 64], "channels per level"),
    "backbone.blocks": _Field("int", 1, "conv blocks per level"),
    "fusion.residual": _Field("bool", True,
                              "residual connection around gated injection"),
    "loss.pix": _Field("float", 1.0, "pixel L1 weight"),
    "loss.fft": _Field("float", 0.1, "Fourier L1 weight"),
    "loss.align": _Field("float", 1.0, "cross-modal alignment weight"),
    "loss.div": _Field("float", 0.1, "diversity weight (per pool)"),
    "loss.bal": _Field("float", 0.1, "balance weight (per pool)"),
    "loss.con": _Field("float", 0.1, "contrastive weight (per pool)"),
    "loss.tau_div": _Field("float", 0.1, "diversity similarity threshold"),
    "loss.tau_con": _Field("float", 0.1, "contrastive temperature"),
    "optim.lr": _Field("float", 4e-4, "initial learning rate"),
    "optim.beta1": _Field("float", 0.9, "Adam beta1"),
    "optim.beta2": _Field("float", 0.99, "Adam beta2"),
    "optim.eps": _Field("float", 1e-8, "Adam epsilon"),
    "optim.lr_min": _Field("float", 1e-6, "cosine annealing floor"),
    "optim.grad_clip": _Field("float", 0.0, "global-norm clip (0: off)"),
    "out.dir": _Field("str", "", "run directory (empty: auto under the root)"),
}

ENV_OUTPUT_ROOT = "PROMPTRESTORE_RUNS"


def parse_value(key: str, text: str):
    field = SCHEMA.get(key)
    if field is None:
        raise ConfigError(f"unknown config key '{key}'")
    text = text.strip()
    try:
        if field.kind == "int":
            return int(text)
        if field.kind == "float":
            return float(text)
        if field.kind == "bool":
            low = text.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(text)
        if field.kind == "csv":
            return [p.strip() for p in text.split(",") if p.strip()]
        if field.kind == "csv_int":
            return [int(p.strip()) for p in text.split(",") if p.strip()]
        return text
    except ValueError:
        raise ConfigError(f"key '{key}' expects {field.kind}, "
                          f"got '{text}'") from None


def format_value(key: str, value) -> str:
    kind = SCHEMA[key].kind
    if kind in ("csv", "csv_int"):
        return ",".join(str(v) for v in value)
    if kind == "bool":
        return "true" if value else "false"
    return repr(value) if kind == "float" else str(value)


def defaults() -> dict:
    return {key: field.default for key, field in SCHEMA.items()}


def parse_config_file(path) -> dict:
    """Read overrides from a file; returns only the keys it sets."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', "
                                  f"got '{stripped}'")
            key, _, value = stripped.partition("=")
            key = key.strip()
            try:
                out[key] = parse_value(key, value)
            except ConfigError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return out


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply `section.key=value` strings on top of a config dict."""
    out = dict(cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override '{item}' must look like "
                              f"section.key=value")
        key, _, value = item.partition("=")
        out[key.strip()] = parse_value(key.strip(), value)
    return out


def resolve(file_values: dict | None = None, overrides=()) -> dict:
    cfg = defaults()
    cfg.update(file_values or {})
    return apply_overrides(cfg, overrides)


def format_config(cfg: dict) -> str:
    """Canonical text form: every key, sorted, one per line."""
    lines = [f"{key} = {format_value(key, cfg[key])}" for key in sorted(cfg)]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# conversion to/from the typed training config

def flat_to_train_config(cfg: dict) -> TrainConfig:
    c = defaults()
    c.update(cfg)
    data = DataConfig(
        domains=tuple(c["data.domains"]),
        tasks=tuple(c["data.tasks"]),
        image_size=c["data.image_size"],
        eval_size=c["data.eval_size"],
        eval_samples=c["data.eval_samples"],
        jitter=c["data.jitter"],
        noise_sigma=c["data.noise_sigma"],
        blur_sigma=c["data.blur_sigma"],
        streak_count=c["data.streak_count"],
        streak_strength=c["data.streak_strength"],
        sr_factor=c["data.sr_factor"],
        mask_patches=c["data.mask_patches"],
        mask_patch_frac=c["data.mask_patch_frac"],
        haze_t_range=(c["data.haze_t_min"], c["data.haze_t_max"]),
        airlight_range=(c["data.airlight_min"], c["data.airlight_max"]),
    )
    model = ModelConfig(
        backbone=BackboneConfig(levels=c["backbone.levels"],
                                channels=tuple(c["backbone.channels"]),
                                blocks=c["backbone.blocks"]),
        dim=c["pools.dim"],
        tokens=c["pools.tokens"],
        task_pool=PoolSettings(enabled=c["pools.task.enabled"],
                               n=c["pools.task.n"],
                               top_k=c["pools.task.topk"],
                               temperature=c["pools.task.temperature"]),
        domain_pool=PoolSettings(enabled=c["pools.domain.enabled"],
                                 n=c["pools.domain.n"],
                                 top_k=c["pools.domain.topk"],
                                 temperature=c["pools.domain.temperature"]),
        fusion_residual=c["fusion.residual"],
    )
    return TrainConfig(
        steps=c["trainer.steps"],
        batch_size=c["trainer.batch_size"],
        seed=c["trainer.seed"],
        eval_every=c["trainer.eval_every"],
        data=data,
        model=model,
        loss=LossWeights(pix=c["loss.pix"], fft=c["loss.fft"],
                         align=c["loss.align"], div=c["loss.div"],
                         bal=c["loss.bal"], con=c["loss.con"]),
        reg=RegularizerConfig(tau_div=c["loss.tau_div"],
                              tau_con=c["loss.tau_con"]),
        optim=OptimConfig(lr=c["optim.lr"], beta1=c["optim.beta1"],
                          beta2=c["optim.beta2"], eps=c["optim.eps"],
                          lr_min=c["optim.lr_min"],
                          grad_clip=c["optim.grad_clip"]),
    )


def train_config_to_flat(config: TrainConfig) -> dict:
    d, m, o = config.data, config.model, config.optim
    return {
        "trainer.steps": config.steps,
        "trainer.batch_size": config.batch_size,
        "trainer.seed": config.seed,
        "trainer.eval_every": config.eval_every,
        "data.domains": list(d.domains),
        "data.tasks": list(d.tasks),
        "data.image_size": d.image_size,
        "data.eval_size": d.eval_size,
        "data.eval_samples": d.eval_samples,
        "data.jitter": d.jitter,
        "data.noise_sigma": d.noise_sigma,
        "data.blur_sigma": d.blur_sigma,
        "data.streak_count": d.streak_count,
        "data.streak_strength": d.streak_strength,
        "data.sr_factor": d.sr_factor,
        "data.mask_patches": d.mask_patches,
        "data.mask_patch_frac": d.mask_patch_frac,
        "data.haze_t_min": d.haze_t_range[0],
        "data.haze_t_max": d.haze_t_range[1],
        "data.airlight_min": d.airlight_range[0],
        "data.airlight_max": d.airlight_range[1],
        "pools.dim": m.dim,
        "pools.tokens": m.tokens,
        "pools.task.enabled": m.task_pool.enabled,
        "pools.task.n": m.task_pool.n,
        "pools.task.topk": m.task_pool.top_k,
        "pools.task.temperature": m.task_pool.temperature,
        "pools.domain.enabled": m.domain_pool.enabled,
        "pools.domain.n": m.domain_pool.n,
        "pools.domain.topk": m.domain_pool.top_k,
        "pools.domain.temperature": m.domain_pool.temperature,
        "backbone.levels": m.backbone.levels,
        "backbone.channels": list(m.backbone.channels),
        "backbone.blocks": m.backbone.blocks,
        "fusion.residual": m.fusion_residual,
        "loss.pix": config.loss.pix,
        "loss.fft": config.loss.fft,
        "loss.align": config.loss.align,
        "loss.div": config.loss.div,
        "loss.bal": config.loss.bal,
        "loss.con": config.loss.con,
        "loss.tau_div": config.reg.tau_div,
        "loss.tau_con": config.reg.tau_con,
        "optim.lr": o.lr,
        "optim.beta1": o.beta1,
        "optim.beta2": o.beta2,
        "optim.eps": o.eps,
        "optim.lr_min": o.lr_min,
        "optim.grad_clip": o.grad_clip,
        "out.dir": "",
    }
