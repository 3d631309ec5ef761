"""Saliency heatmaps and the threshold mask that restricts gradient sampling."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image

from .tensorops import as_image


class HeatmapError(ValueError):
    pass


def normalize_heatmap(values) -> np.ndarray:
    """Min-max normalize to [0, 1]; a constant map becomes all 0.5."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise HeatmapError(f"heatmap must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise HeatmapError("heatmap contains non-finite values")
    lo, hi = arr.min(), arr.max()
    if hi - lo <= 0:
        return np.full(arr.shape, 0.5)
    return (arr - lo) / (hi - lo)


def constant_heatmap(height: int, width: int) -> np.ndarray:
    """Heatmap that carries no information; its threshold mask is always full."""
    return np.full((height, width), 0.5)


def load_heatmap(path, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Read a grayscale PNG (bytes mapped to byte/255) or a headerless CSV."""
    path = Path(path)
    try:
        if path.suffix.lower() == ".csv":
            raw = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
        else:
            with Image.open(path) as img:
                raw = np.asarray(img.convert("L"), dtype=np.float64) / 255.0
    except (OSError, ValueError) as exc:
        raise HeatmapError(f"cannot read heatmap {path}: {exc}") from exc
    if shape is not None and tuple(raw.shape) != tuple(shape[:2]):
        raise HeatmapError(f"heatmap {path} has shape {raw.shape}, expected {tuple(shape[:2])}")
    return normalize_heatmap(raw)


def _positions(extent: int, patch: int, stride: int) -> list[int]:
    pos = list(range(0, extent - patch + 1, stride))
    if pos[-1] != extent - patch:
        pos.append(extent - patch)
    return pos


def occlusion_query_count(height: int, width: int, patch: int, stride: int) -> int:
    rows = math.ceil((height - patch) / stride) + 1
    cols = math.ceil((width - patch) / stride) + 1
    return rows * cols + 1


def occlusion_saliency(oracle, image, target_label, patch: int = 4, stride: int = 2,
                       fill: float = 0.5) -> np.ndarray:
    """Black-box saliency: score drop when a square patch is greyed out.

    Drops are accumulated per pixel and averaged by how many patches covered
    it. Patch positions always include the last row/column; with a stride
    wider than the patch, pixels between patches are never covered and read
    a neutral drop of 0.
    """
    img = as_image(image)
    h, w = img.shape[:2]
    if patch < 1 or patch > min(h, w):
        raise ValueError(f"patch must be in [1, {min(h, w)}], got {patch}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    base = oracle.query(img, target_label, phase="saliency")
    acc = np.zeros((h, w))
    cover = np.zeros((h, w))
    for r in _positions(h, patch, stride):
        for c in _positions(w, patch, stride):
            occluded = img.copy()
            occluded[r:r + patch, c:c + patch, :] = fill
            drop = base - oracle.query(occluded, target_label, phase="saliency")
            acc[r:r + patch, c:c + patch] += drop
            cover[r:r + patch, c:c + patch] += 1
    return normalize_heatmap(np.divide(acc, cover, out=np.zeros((h, w)), where=cover > 0))


def threshold_mask(heatmap, tau: float) -> np.ndarray:
    return np.asarray(heatmap) >= tau


def mask_area(mask) -> int:
    return int(np.count_nonzero(mask))


def mask_reset_check(mask, sampled_count: int, min_area: int, channels: int = 3,
                     sampled_fraction_cap: float = 0.75) -> bool:
    """True when the mask is too small or too much of it has been sampled.

    ``mask`` may be a boolean array or its area. The sampled fraction is
    measured over maskable coordinates, i.e. ``channels * area``.
    """
    area = mask if isinstance(mask, (int, np.integer)) else mask_area(mask)
    return area < min_area or sampled_count > sampled_fraction_cap * channels * area
