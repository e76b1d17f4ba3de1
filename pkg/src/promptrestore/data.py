"""Deterministic synthetic multi-domain, multi-task restoration data.

Three image domains with distinct visual statistics stand in for real
datasets: band-limited color textures (natural-like), soft grayscale blob
images replicated to three channels (medical-like), and block-mosaic tile
images (remote-sensing-like). Six degradations cover the task roster:
additive noise, Gaussian blur, bright streak overlay, downsample-restore,
patch masking, and haze.

Each domain owns a unit anchor vector; a sample's surrogate text feature is
its domain anchor plus a fixed per-task offset plus jitter, renormalized.
This carries exactly the coarse domain-level semantics the alignment loss
needs, with mild task/instance variation, and no external models.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

DOMAINS = ("natural", "medical", "remote")
TASKS = ("noise", "blur", "streak", "downsample-restore", "mask", "haze")

ANCHOR_MAX_COSINE = 0.3
TASK_OFFSET_SCALE = 0.2


@dataclass
class DataConfig:
    domains: tuple = DOMAINS
    tasks: tuple = ("noise", "haze")
    image_size: int = 32
    eval_size: int = 64
    eval_samples: int = 4
    jitter: float = 0.1
    noise_sigma: float = 0.1
    blur_sigma: float = 1.8
    streak_count: int = 8
    streak_strength: float = 0.6
    sr_factor: int = 2
    mask_patches: int = 3
    mask_patch_frac: float = 0.2   # patch side as a fraction of image side
    haze_t_range: tuple = (0.5, 0.75)
    airlight_range: tuple = (0.8, 0.95)

    def __post_init__(self):
        self.domains = tuple(self.domains)
        self.tasks = tuple(self.tasks)
        for d in self.domains:
            if d not in DOMAINS:
                raise ValueError(f"unknown domain '{d}' (choose from {DOMAINS})")
        for t in self.tasks:
            if t not in TASKS:
                raise ValueError(f"unknown task '{t}' (choose from {TASKS})")


@dataclass
class DomainSpec:
    id: str
    anchor: np.ndarray


@dataclass
class TaskSpec:
    id: str
    params: dict = field(default_factory=dict)


@dataclass
class SyntheticSample:
    lq: np.ndarray              # [3, h, w] in [0, 1]
    hq: np.ndarray              # [3, h, w] in [0, 1]
    domain_id: str
    task_id: str
    text_feature: np.ndarray    # unit [d]


# ---------------------------------------------------------------------------
# HQ image generators

def _normalize01(img: np.ndarray) -> np.ndarray:
    lo, hi = img.min(), img.max()
    if hi - lo < 1e-12:
        return np.full_like(img, 0.5)
    return (img - lo) / (hi - lo)


def _natural_hq(size: int, rng: np.random.Generator) -> np.ndarray:
    """Band-limited random Fourier texture with mild per-channel tinting."""
    f = np.fft.fftfreq(size)
    radius = np.sqrt(f[:, None] ** 2 + f[None, :] ** 2)
    amp = 1.0 / (1.0 + (radius * size / 2.0) ** 2.2)
    amp[radius > 0.35] = 0.0
    spec = (rng.standard_normal((size, size)) +
            1j * rng.standard_normal((size, size))) * amp
    base = _normalize01(np.fft.ifft2(spec).real)
    tint = rng.uniform(0.6, 1.0, size=3)
    offset = rng.uniform(0.0, 0.25, size=3)
    img = np.stack([np.clip(base * t + o, 0, 1) for t, o in zip(tint, offset)])
    return img


def _medical_hq(size: int, rng: np.random.Generator) -> np.ndarray:
    """Soft elliptical blobs on a dark ground, grayscale tripled."""
    yy, xx = np.mgrid[0:size, 0:size] / size
    img = np.full((size, size), rng.uniform(0.03, 0.10))
    for _ in range(int(rng.integers(3, 7))):
        cy, cx = rng.uniform(0.15, 0.85, size=2)
        ay, ax = rng.uniform(0.05, 0.25, size=2)
        theta = rng.uniform(0, np.pi)
        dy, dx = yy - cy, xx - cx
        ry = dy * np.cos(theta) + dx * np.sin(theta)
        rx = -dy * np.sin(theta) + dx * np.cos(theta)
        blob = np.exp(-(ry ** 2 / (2 * ay ** 2) + rx ** 2 / (2 * ax ** 2)))
        img += rng.uniform(0.3, 0.8) * blob
    gray = np.clip(img, 0, 1)
    return np.stack([gray, gray, gray])


def _remote_hq(size: int, rng: np.random.Generator) -> np.ndarray:
    """Block mosaic of muted tiles split by thin darker grid lines."""
    img = np.zeros((3, size, size))
    rows = np.sort(rng.choice(np.arange(2, size - 1), size=int(rng.integers(2, 5)),
                              replace=False))
    cols = np.sort(rng.choice(np.arange(2, size - 1), size=int(rng.integers(2, 5)),
                              replace=False))
    r_edges = [0, *rows.tolist(), size]
    c_edges = [0, *cols.tolist(), size]
    for r0, r1 in zip(r_edges[:-1], r_edges[1:]):
        for c0, c1 in zip(c_edges[:-1], c_edges[1:]):
            color = rng.uniform(0.2, 0.8, size=3)
            img[:, r0:r1, c0:c1] = color[:, None, None]
    img[:, rows, :] *= 0.55
    img[:, :, cols] *= 0.55
    return np.clip(img, 0, 1)


_GENERATORS = {"natural": _natural_hq, "medical": _medical_hq,
               "remote": _remote_hq}


def generate_hq(domain: DomainSpec, size: int, rng: np.random.Generator) -> np.ndarray:
    if size < 4:
        raise ValueError(f"image size must be >= 4, got {size}")
    return _GENERATORS[domain.id](size, rng)


# ---------------------------------------------------------------------------
# degradations

def _gaussian_kernel1d(sigma: float) -> np.ndarray:
    radius = max(1, int(3.0 * sigma + 0.5))
    x = np.arange(-radius, radius + 1)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _blur_channel(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    r = (len(kernel) - 1) // 2
    padded = np.pad(img, ((r, r), (0, 0)), mode="reflect")
    win = np.lib.stride_tricks.sliding_window_view(padded, len(kernel), axis=0)
    img = np.einsum("ijk,k->ij", win, kernel)
    padded = np.pad(img, ((0, 0), (r, r)), mode="reflect")
    win = np.lib.stride_tricks.sliding_window_view(padded, len(kernel), axis=1)
    return np.einsum("ijk,k->ij", win, kernel)


def degrade(hq: np.ndarray, task: TaskSpec, rng: np.random.Generator) -> np.ndarray:
    """Apply one degradation; output has the input's shape, clamped to [0, 1]."""
    p = task.params
    _, h, w = hq.shape
    if task.id == "noise":
        sigma = p.get("sigma", 0.1)
        return np.clip(hq + sigma * rng.standard_normal(hq.shape), 0, 1)
    if task.id == "blur":
        kernel = _gaussian_kernel1d(p.get("sigma", 1.8))
        return np.clip(np.stack([_blur_channel(c, kernel) for c in hq]), 0, 1)
    if task.id == "streak":
        mask = np.zeros((h, w), dtype=bool)
        for _ in range(int(p.get("count", 8))):
            x0, y0 = rng.uniform(0, w), rng.uniform(0, h)
            ang = rng.uniform(np.pi / 3, 2 * np.pi / 3)
            length = rng.uniform(0.4, 0.9) * h
            t = np.linspace(0.0, 1.0, int(2 * length) + 2)
            ys = (y0 + np.sin(ang) * length * t).astype(int)
            xs = (x0 + np.cos(ang) * length * t).astype(int)
            keep = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
            mask[ys[keep], xs[keep]] = True
        strength = p.get("strength", 0.6)
        return np.clip(hq + strength * mask[None, :, :], 0, 1)
    if task.id == "downsample-restore":
        s = int(p.get("factor", 2))
        if h % s or w % s:
            raise ValueError(f"size ({h},{w}) not divisible by factor {s}")
        small = hq.reshape(3, h // s, s, w // s, s).mean(axis=(2, 4))
        return np.clip(small.repeat(s, axis=1).repeat(s, axis=2), 0, 1)
    if task.id == "mask":
        lq = hq.copy()
        side = max(2, int(p.get("patch_frac", 0.2) * h))
        for _ in range(int(p.get("patches", 3))):
            r = int(rng.integers(0, h - side + 1))
            c = int(rng.integers(0, w - side + 1))
            lq[:, r:r + side, c:c + side] = 0.0
        return lq
    if task.id == "haze":
        t_lo, t_hi = p.get("t_range", (0.5, 0.75))
        a_lo, a_hi = p.get("airlight_range", (0.8, 0.95))
        t = rng.uniform(t_lo, t_hi)
        airlight = rng.uniform(a_lo, a_hi)
        return np.clip(t * hq + (1.0 - t) * airlight, 0, 1)
    raise ValueError(f"unknown task '{task.id}'")


# ---------------------------------------------------------------------------
# surrogate text features

def _stable_seed(*parts) -> int:
    digest = hashlib.sha256("/".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def task_offset(task_id: str, dim: int) -> np.ndarray:
    """Fixed unit offset per task id, independent of any run seed."""
    rng = np.random.default_rng(_stable_seed("task-offset", task_id, dim))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def text_feature(domain: DomainSpec, task_id: str | None,
                 rng: np.random.Generator, jitter: float = 0.1) -> np.ndarray:
    """Unit surrogate for an encoded image description: domain anchor plus a
    fixed task offset plus instance jitter."""
    if jitter < 0:
        raise ValueError(f"jitter must be >= 0, got {jitter}")
    dim = domain.anchor.shape[0]
    feat = domain.anchor.copy()
    if task_id is not None:
        feat = feat + TASK_OFFSET_SCALE * task_offset(task_id, dim)
    if jitter > 0:
        feat = feat + jitter * rng.standard_normal(dim)
    return feat / np.linalg.norm(feat)


def make_anchors(domain_ids, dim: int, seed: int) -> dict:
    """Pairwise-dissimilar unit anchors (cosine < 0.3), resampled as needed."""
    rng = np.random.default_rng(_stable_seed("anchors", seed, dim))
    anchors = {}
    for did in domain_ids:
        for _ in range(10000):
            v = rng.standard_normal(dim)
            v /= np.linalg.norm(v)
            if all(abs(float(v @ a)) < ANCHOR_MAX_COSINE
                   for a in anchors.values()):
                anchors[did] = v
                break
        else:
            raise RuntimeError("could not sample dissimilar anchors; "
                               "increase the feature dimension")
    return anchors


# ---------------------------------------------------------------------------
# dataset

class SyntheticDataset:
    """Deterministic sample factory over a (domains x tasks) roster."""

    def __init__(self, config: DataConfig, dim: int, seed: int):
        self.config = config
        self.dim = dim
        self.seed = seed
        anchors = make_anchors(config.domains, dim, seed)
        self.domains = [DomainSpec(id=d, anchor=anchors[d]) for d in config.domains]
        self.tasks = [self._task_spec(t) for t in config.tasks]

    def _task_spec(self, task_id: str) -> TaskSpec:
        c = self.config
        params = {
            "noise": {"sigma": c.noise_sigma},
            "blur": {"sigma": c.blur_sigma},
            "streak": {"count": c.streak_count, "strength": c.streak_strength},
            "downsample-restore": {"factor": c.sr_factor},
            "mask": {"patches": c.mask_patches, "patch_frac": c.mask_patch_frac},
            "haze": {"t_range": c.haze_t_range, "airlight_range": c.airlight_range},
        }[task_id]
        return TaskSpec(id=task_id, params=params)

    def domain(self, domain_id: str) -> DomainSpec:
        for d in self.domains:
            if d.id == domain_id:
                return d
        raise KeyError(f"domain '{domain_id}' not in roster")

    def task(self, task_id: str) -> TaskSpec:
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise KeyError(f"task '{task_id}' not in roster")

    def sample(self, domain_id: str, task_id: str, size: int,
               rng: np.random.Generator) -> SyntheticSample:
        domain = self.domain(domain_id)
        task = self.task(task_id)
        hq = generate_hq(domain, size, rng)
        lq = degrade(hq, task, rng)
        feat = text_feature(domain, task_id, rng, self.config.jitter)
        return SyntheticSample(lq=lq, hq=hq, domain_id=domain_id,
                               task_id=task_id, text_feature=feat)

    def balanced_batch(self, batch_size: int, size: int,
                       rng: np.random.Generator) -> list:
        """Domain-balanced batch: per-domain counts differ by at most one
        (extras rotate by a seeded offset), tasks uniform within domain."""
        n_dom = len(self.domains)
        if batch_size < n_dom:
            raise ValueError(f"batch size {batch_size} is smaller than the "
                             f"{n_dom}-domain roster")
        base, extra = divmod(batch_size, n_dom)
        offset = int(rng.integers(n_dom))
        counts = [base + (1 if (i - offset) % n_dom < extra else 0)
                  for i in range(n_dom)]
        batch = []
        for domain, count in zip(self.domains, counts):
            for _ in range(count):
                task_id = self.tasks[int(rng.integers(len(self.tasks)))].id
                batch.append(self.sample(domain.id, task_id, size, rng))
        return batch

    def eval_batch(self, domain_id: str, task_id: str, n: int,
                   size: int) -> list:
        """Fixed evaluation samples, reproducible independent of training."""
        out = []
        for i in range(n):
            rng = np.random.default_rng(
                _stable_seed("eval", self.seed, domain_id, task_id, size, i))
            out.append(self.sample(domain_id, task_id, size, rng))
        return out


# ---------------------------------------------------------------------------
# export

def write_ppm(path, img: np.ndarray):
    """Binary P6 portable pixmap of a [3, h, w] image in [0, 1]."""
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValueError(f"expected [3, h, w], got {img.shape}")
    h, w = img.shape[1], img.shape[2]
    pixels = (np.clip(img, 0, 1) * 255.0).round().astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(pixels.transpose(1, 2, 0).tobytes())
