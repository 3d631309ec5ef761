"""Image corpora: manifest I/O and a synthetic world for desk-scale runs.

A corpus directory holds PNG images plus ``manifest.csv`` with columns
``filename, ground_truth_label, target_label``. The synthetic generator also
writes ``oracle.npz`` (a :class:`SyntheticOracleSpec`), ``surrogate.npz``
(a perturbed copy standing in for a locally trained model), and an optional
``benign/`` folder of extra unattacked images.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .oracle import SyntheticOracleSpec, synthetic_logits
from .tensorops import dct2, from_uint8, idct2, read_image, to_uint8, write_image

MANIFEST = "manifest.csv"
MANIFEST_FIELDS = ("filename", "ground_truth_label", "target_label")


class CorpusError(ValueError):
    pass


@dataclass
class CorpusItem:
    image_id: str
    image: np.ndarray
    ground_truth: str
    target: str
    filename: str = ""


@dataclass
class SyntheticCorpus:
    spec: SyntheticOracleSpec
    surrogate: SyntheticOracleSpec
    items: list[CorpusItem]
    benign: list[np.ndarray] = field(default_factory=list)


def smooth_field(rng, height, width, channels=3, alpha=1.5):
    """Random field with a ``1 / (1 + r) ** alpha`` DCT amplitude spectrum."""
    u = np.arange(height)[:, None]
    v = np.arange(width)[None, :]
    amp = 1.0 / (1.0 + np.hypot(u, v)) ** alpha
    out = np.empty((height, width, channels))
    shared = rng.normal(size=(height, width))
    for c in range(channels):
        # channels are correlated, as in natural images
        coeffs = (0.7 * shared + 0.3 * rng.normal(size=(height, width))) * amp
        out[:, :, c] = idct2(coeffs)
    return out


def lowpass(image, fraction):
    """Keep only the lowest ``fraction`` of DCT frequencies per axis."""
    h, w = image.shape[:2]
    keep = np.zeros((h, w))
    keep[: max(1, round(fraction * h)), : max(1, round(fraction * w))] = 1.0
    out = np.empty_like(image)
    for c in range(image.shape[2]):
        out[:, :, c] = idct2(dct2(image[:, :, c]) * keep)
    return out


def benign_image(rng, size, alpha=1.5, noise=0.01, low=0.15, high=0.85):
    img = smooth_field(rng, size, size, 3, alpha)
    img = (img - img.min()) / max(img.max() - img.min(), 1e-12)
    img = low + (high - low) * img
    img += noise * rng.normal(size=img.shape)
    return from_uint8(to_uint8(np.clip(img, 0.0, 1.0)))


def make_templates(rng, size, n_labels, alpha=1.0):
    """Zero-mean, orthonormal (flattened) template per label."""
    raw = [smooth_field(rng, size, size, 3, alpha).ravel() for _ in range(n_labels)]
    basis = []
    for vec in raw:
        vec = vec - vec.mean()
        for b in basis:
            vec = vec - (vec @ b) * b
        basis.append(vec / np.linalg.norm(vec))
    return np.stack(basis).reshape(n_labels, size, size, 3)


def make_synthetic_corpus(n_images=20, size=16, labels=("cat", "dog"), seed=0,
                          n_benign=0, temperature=0.25, difficulty=(0.35, 0.55),
                          surrogate_noise=0.3) -> SyntheticCorpus:
    """Build an oracle and ``n_images`` images of label ``labels[0]`` to be
    pushed towards ``labels[1]``.

    ``difficulty`` bounds the initial logit gap between ground truth and
    target as a fraction of the largest gap change an L-inf 0.1 budget can
    buy, so every image is attackable in principle.
    """
    rng = np.random.default_rng(seed)
    labels = tuple(labels)
    templates = make_templates(rng, size, len(labels))
    spec = SyntheticOracleSpec(templates, labels, temperature)
    noisy = templates + surrogate_noise * np.stack(
        [make_templates(rng, size, 1)[0] for _ in labels])
    surrogate = SyntheticOracleSpec(noisy, labels, temperature)

    gt, tgt = labels[0], labels[1]
    direction = (templates[0] - templates[1]) / temperature
    max_gain = 0.1 * np.abs(direction).sum()
    # push along a smooth version of the label direction so the benign
    # content itself is neutral under compression
    unit = lowpass(direction, 0.25)
    unit /= np.linalg.norm(unit)
    items = []
    while len(items) < n_images:
        img = benign_image(rng, size)
        want = rng.uniform(*difficulty) * max_gain
        for _ in range(5):
            logits = synthetic_logits(spec, img)
            gap = logits[0] - logits[1]
            lam = (want - gap) / (direction.ravel() @ unit.ravel())
            img = from_uint8(to_uint8(np.clip(img + lam * unit, 0.05, 0.95)))
        logits = synthetic_logits(spec, img)
        if logits.argmax() != 0 or logits[0] - logits[1] <= 0:
            continue
        idx = len(items)
        items.append(CorpusItem(f"img{idx:03d}", img, gt, tgt, f"img{idx:03d}.png"))
    benign = [benign_image(rng, size) for _ in range(n_benign)]
    return SyntheticCorpus(spec, surrogate, items, benign)


def write_manifest(path, items) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_FIELDS)
        for it in items:
            writer.writerow([it.filename or f"{it.image_id}.png", it.ground_truth, it.target])


def write_corpus(corpus: SyntheticCorpus, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for it in corpus.items:
        write_image(directory / it.filename, it.image)
    write_manifest(directory / MANIFEST, corpus.items)
    corpus.spec.save(directory / "oracle.npz")
    corpus.surrogate.save(directory / "surrogate.npz")
    if corpus.benign:
        bdir = directory / "benign"
        bdir.mkdir(exist_ok=True)
        for k, img in enumerate(corpus.benign):
            write_image(bdir / f"benign{k:04d}.png", img)
    return directory


def load_corpus(directory) -> list[CorpusItem]:
    directory = Path(directory)
    manifest = directory / MANIFEST
    if not manifest.is_file():
        raise CorpusError(f"no {MANIFEST} in {directory}")
    items = []
    with manifest.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(MANIFEST_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise CorpusError(f"manifest lacks columns: {sorted(missing)}")
        for row in reader:
            path = directory / row["filename"]
            try:
                image = read_image(path)
            except OSError as exc:
                raise CorpusError(f"cannot read {path}: {exc}") from exc
            items.append(CorpusItem(Path(row["filename"]).stem, image,
                                    row["ground_truth_label"], row["target_label"], row["filename"]))
    if not items:
        raise CorpusError(f"corpus {directory} is empty")
    items.sort(key=lambda it: it.image_id)
    return items


def load_images(directory) -> list[tuple[str, np.ndarray]]:
    """All PNG images in a folder, sorted by name."""
    directory = Path(directory)
    paths = sorted(p for p in directory.iterdir() if p.suffix.lower() == ".png")
    return [(p.stem, read_image(p)) for p in paths]
