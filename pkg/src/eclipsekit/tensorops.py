"""Image and gradient array primitives.

Images are ``(H, W, 3)`` float arrays with values in ``[0, 1]``. Gradient
buffers share the image shape but are unbounded float64.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import fft

from ._backend import convolve2d_reflect

GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])


class JpegError(RuntimeError):
    """Raised when the JPEG codec fails to encode or decode an image."""


def as_image(image, *, copy: bool = False) -> np.ndarray:
    """Validate an image and promote it to float64."""
    arr = np.array(image, dtype=np.float64, copy=copy) if copy else np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected an (H, W, 3) image, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("image values must lie in [0, 1]")
    return arr


def gaussian_kernel(k: int, sigma: float) -> np.ndarray:
    """Normalized ``k x k`` Gaussian weights centred on the middle cell."""
    if int(k) != k or k < 1 or k % 2 == 0:
        raise ValueError(f"kernel size must be an odd positive integer, got {k!r}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    k = int(k)
    offsets = np.arange(k) - (k - 1) / 2.0
    sq = offsets[:, None] ** 2 + offsets[None, :] ** 2
    weights = np.exp(-sq / (2.0 * sigma * sigma))
    return weights / weights.sum()


def gaussian_blur(buffer, kernel) -> np.ndarray:
    """Per-channel 2-D convolution with reflect padding.

    Accepts ``(H, W)`` planes or ``(H, W, C)`` stacks; output has the input
    shape and dtype float64.
    """
    buf = np.asarray(buffer, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1] or kernel.shape[0] % 2 == 0:
        raise ValueError("kernel must be a square array with odd side")
    if buf.size == 0:
        raise ValueError("cannot blur an empty buffer")
    if buf.ndim == 2:
        return convolve2d_reflect(buf, kernel)
    if buf.ndim != 3:
        raise ValueError(f"expected a 2-D or 3-D buffer, got shape {buf.shape}")
    out = np.empty_like(buf)
    for ch in range(buf.shape[2]):
        out[:, :, ch] = convolve2d_reflect(buf[:, :, ch], kernel)
    return out


def clip_to_budget(candidate, original, beta: float) -> np.ndarray:
    """Project ``candidate`` into the L-inf ball of radius ``beta`` around
    ``original``, intersected with ``[0, 1]``."""
    cand = np.asarray(candidate, dtype=np.float64)
    orig = np.asarray(original, dtype=np.float64)
    if cand.shape != orig.shape:
        raise ValueError(f"shape mismatch: {cand.shape} vs {orig.shape}")
    if beta < 0:
        raise ValueError("beta must be non-negative")
    lo = np.maximum(0.0, orig - beta)
    hi = np.minimum(1.0, orig + beta)
    return np.minimum(np.maximum(cand, lo), hi)


def dct2(channel) -> np.ndarray:
    """Orthonormal type-II 2-D DCT of a single ``(H, W)`` plane."""
    return fft.dctn(np.asarray(channel, dtype=np.float64), type=2, norm="ortho")


def idct2(coeffs) -> np.ndarray:
    return fft.idctn(np.asarray(coeffs, dtype=np.float64), type=2, norm="ortho")


def to_grayscale(image) -> np.ndarray:
    return np.asarray(image, dtype=np.float64) @ GRAY_WEIGHTS


def to_uint8(image) -> np.ndarray:
    return np.clip(np.rint(np.asarray(image, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def from_uint8(data) -> np.ndarray:
    return np.asarray(data, dtype=np.float64) / 255.0


def jpeg_roundtrip(image, quality: int = 75) -> np.ndarray:
    """Encode as baseline JPEG at ``quality`` and decode back."""
    if int(quality) != quality or not 1 <= quality <= 100:
        raise ValueError(f"JPEG quality must be an integer in 1..100, got {quality!r}")
    img = as_image(image)
    buf = io.BytesIO()
    try:
        Image.fromarray(to_uint8(img)).save(
            buf, format="JPEG", quality=int(quality), optimize=False, progressive=False
        )
        buf.seek(0)
        with Image.open(buf) as decoded:
            out = np.asarray(decoded.convert("RGB"))
    except (OSError, ValueError) as exc:
        raise JpegError(f"JPEG round-trip failed: {exc}") from exc
    if out.shape != img.shape:
        raise JpegError(f"decoded shape {out.shape} differs from input {img.shape}")
    return from_uint8(out)


def png_bytes(image) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(to_uint8(image)).save(buf, format="PNG")
    return buf.getvalue()


def read_image(path) -> np.ndarray:
    with Image.open(path) as img:
        return from_uint8(np.asarray(img.convert("RGB")))


def write_image(path, image) -> None:
    """Write PNG or JPEG depending on the file suffix."""
    path = Path(path)
    fmt = "JPEG" if path.suffix.lower() in (".jpg", ".jpeg") else "PNG"
    Image.fromarray(to_uint8(image)).save(path, format=fmt)
