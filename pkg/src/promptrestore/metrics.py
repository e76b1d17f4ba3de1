"""Fidelity metrics: PSNR (dB, capped) and windowed SSIM."""

from __future__ import annotations

import math

import numpy as np

PSNR_CAP_DB = 100.0
_MSE_FLOOR = 1e-10


def psnr(a, b, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE), capped at 100 dB for (near-)identical images."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"psnr shape mismatch: {a.shape} vs {b.shape}")
    if peak <= 0:
        raise ValueError(f"peak must be > 0, got {peak}")
    mse = float(np.mean((a - b) ** 2))
    if mse < _MSE_FLOOR:
        return PSNR_CAP_DB
    return 10.0 * math.log10(peak * peak / mse)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    g /= g.sum()
    return np.outer(g, g)


_WINDOW = _gaussian_window()


def _filter_valid(img: np.ndarray, window: np.ndarray) -> np.ndarray:
    k = window.shape[0]
    win = np.lib.stride_tricks.sliding_window_view(img, (k, k))
    return np.einsum("ijkl,kl->ij", win, window)


def ssim(a, b, peak: float = 1.0) -> float:
    """Mean local SSIM over an 11x11 Gaussian window (sigma 1.5),
    C1=(0.01 peak)^2, C2=(0.03 peak)^2, computed per channel and averaged."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"ssim shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a, b = a[None], b[None]
    if a.ndim != 3:
        raise ValueError(f"ssim expects [h,w] or [c,h,w], got {a.shape}")
    k = _WINDOW.shape[0]
    if a.shape[1] < k or a.shape[2] < k:
        raise ValueError(f"image {a.shape} smaller than the {k}x{k} window")
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    scores = []
    for x, y in zip(a, b):
        mu_x = _filter_valid(x, _WINDOW)
        mu_y = _filter_valid(y, _WINDOW)
        sig_x = _filter_valid(x * x, _WINDOW) - mu_x * mu_x
        sig_y = _filter_valid(y * y, _WINDOW) - mu_y * mu_y
        sig_xy = _filter_valid(x * y, _WINDOW) - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * sig_xy + c2)
        den = (mu_x ** 2 + mu_y ** 2 + c1) * (sig_x + sig_y + c2)
        scores.append(float(np.mean(num / den)))
    return float(np.mean(scores))
