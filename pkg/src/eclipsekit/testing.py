"""Closed-form references for the synthetic oracle, used by the test suite.

The synthetic oracle is ``softmax(<T_k, x> / temperature)``, so its
gradient and exact finite differences are available analytically.
"""

from __future__ import annotations

import numpy as np

from .oracle import SyntheticOracleSpec, synthetic_confidence
from .tensorops import as_image


def analytic_gradient(spec: SyntheticOracleSpec, image, label) -> np.ndarray:
    """``d p_label / d x = p_label * (T_label - sum_j p_j T_j) / temperature``."""
    img = as_image(image)
    probs = synthetic_confidence(spec, img)
    p = np.array([probs[lab] for lab in spec.labels])
    k = spec.labels.index(str(label))
    mixed = np.tensordot(p, spec.templates, axes=1)
    return p[k] * (spec.templates[k] - mixed) / spec.temperature


def analytic_differences(spec: SyntheticOracleSpec, image, label, indices,
                         probe_magnitude: float) -> np.ndarray:
    """Exact forward differences ``p(x + h e_i) - p(x)`` computed in closed
    form: each probe shifts every logit by ``h_i * T_k[i] / temperature``.

    ``h_i`` is the probe after clipping to [0, 1]. Images are assumed to be
    on the 8-bit grid already, and probes land on it too when
    ``probe_magnitude`` is a multiple of 1/255 after rounding.
    """
    img = as_image(image)
    flat = img.reshape(-1)
    templates = spec.templates.reshape(len(spec.labels), -1)
    base_logits = templates @ flat / spec.temperature
    k = spec.labels.index(str(label))

    def prob(z):
        e = np.exp(z - z.max())
        return e[k] / e.sum()

    base = prob(base_logits)
    out = np.empty(len(indices))
    for n, i in enumerate(np.asarray(indices).reshape(-1)):
        h = min(1.0, flat[i] + probe_magnitude) - flat[i]
        out[n] = prob(base_logits + h * templates[:, i] / spec.temperature) - base
    return out


def brute_force_convolve(plane, kernel) -> np.ndarray:
    """Direct 2-D convolution with mirror padding (edge not repeated)."""
    plane = np.asarray(plane, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    h, w = plane.shape
    r = kernel.shape[0] // 2
    out = np.zeros_like(plane)

    def mirror(i, n):
        if n == 1:
            return 0
        period = 2 * (n - 1)
        i %= period
        return i if i < n else period - i

    for i in range(h):
        for j in range(w):
            acc = 0.0
            for a in range(-r, r + 1):
                for b in range(-r, r + 1):
                    acc += kernel[r - a, r - b] * plane[mirror(i + a, h), mirror(j + b, w)]
            out[i, j] = acc
    return out


def brute_force_dct2(channel) -> np.ndarray:
    """Orthonormal DCT-II by the defining double sum."""
    x = np.asarray(channel, dtype=np.float64)
    h, w = x.shape

    def basis(n):
        k = np.arange(n)[:, None]
        m = np.arange(n)[None, :]
        c = np.cos(np.pi * (2 * m + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
        c[0] /= np.sqrt(2.0)
        return c

    return basis(h) @ x @ basis(w).T


def brute_force_auc(scores, labels) -> float:
    """Fraction of positive/negative pairs ordered correctly, ties one half."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    pos, neg = s[y], s[~y]
    total = 0.0
    for p in pos:
        for n in neg:
            total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (pos.size * neg.size)
