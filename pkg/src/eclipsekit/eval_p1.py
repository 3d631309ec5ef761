"""Robustness of adversarial examples to JPEG compression."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

from .tensorops import jpeg_roundtrip

LOW_LOSS_THRESHOLD = 0.3
SURVIVAL_THRESHOLD = 0.05

TABLE_HEADERS = ("Attack", "Median Loss", "Low-loss%", "Surviving%")
CSV_FIELDS = ("attack", "quality", "median_loss", "low_loss_pct", "surviving_pct", "n")


@dataclass
class CompressionRecord:
    image_id: str
    pre_score: float
    post_score: float
    quality: int

    @property
    def loss(self) -> float:
        return self.pre_score - self.post_score

    def to_dict(self) -> dict:
        return {**asdict(self), "loss": self.loss}


@dataclass
class P1Report:
    median_loss: float
    low_loss_pct: float
    surviving_pct: float
    n: int
    quality: int | None = None
    attack: str = ""

    def to_dict(self) -> dict:
        return asdict(self)

    def table_row(self) -> list[str]:
        return [self.attack, f"{self.median_loss:.2f}", f"{self.low_loss_pct:.2f}", f"{self.surviving_pct:.2f}"]


def compression_loss(oracle, adversarial, target_label, quality: int = 75,
                     image_id: str = "") -> CompressionRecord:
    """Target-score drop caused by one JPEG round-trip (two oracle queries)."""
    pre = oracle.query(adversarial, target_label, phase="p1-pre")
    post = oracle.query(jpeg_roundtrip(adversarial, quality), target_label, phase="p1-post")
    return CompressionRecord(image_id, float(pre), float(post), int(quality))


def p1_metrics(records, attack: str = "") -> P1Report:
    losses = np.array([r.loss if isinstance(r, CompressionRecord) else float(r) for r in records])
    if losses.size == 0:
        raise ValueError("p1_metrics needs at least one record")
    qualities = {r.quality for r in records if isinstance(r, CompressionRecord)}
    n = losses.size
    return P1Report(
        median_loss=float(np.median(losses)),
        low_loss_pct=100.0 * np.count_nonzero(losses < LOW_LOSS_THRESHOLD) / n,
        surviving_pct=100.0 * np.count_nonzero(losses < SURVIVAL_THRESHOLD) / n,
        n=int(n),
        quality=qualities.pop() if len(qualities) == 1 else None,
        attack=attack,
    )


def write_reports_csv(path, reports) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for r in reports:
            writer.writerow([r.attack, r.quality, f"{r.median_loss:.6f}", f"{r.low_loss_pct:.4f}",
                             f"{r.surviving_pct:.4f}", r.n])


def write_table_csv(path, reports) -> None:
    """Human-facing table with the column headers of the compression table."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TABLE_HEADERS)
        for r in reports:
            writer.writerow(r.table_row())


def write_reports_json(path, reports) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=2, sort_keys=True)
        fh.write("\n")
