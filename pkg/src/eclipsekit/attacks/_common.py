from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..oracle import QueryLedger


@dataclass
class AttackOutcome:
    success: bool
    adversarial_image: np.ndarray
    queries: QueryLedger
    fitness_trace: list = field(default_factory=list)
    iterations_used: int = 0
    attack: str = ""
    final_fitness: float = 0.0
    records: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def total_queries(self) -> int:
        return self.queries.total_queries

    def summary(self) -> dict:
        return {
            "attack": self.attack,
            "success": bool(self.success),
            "final_fitness": float(self.final_fitness),
            "iterations_used": int(self.iterations_used),
            "queries": self.queries.to_dict(),
            **({"stats": self.stats} if self.stats else {}),
        }


def write_trace(path, outcome: AttackOutcome, image_path=None) -> None:
    """One JSON record per iteration, then a final outcome record."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for rec in outcome.records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
        final = {"final": True, **outcome.summary()}
        if image_path is not None:
            final["adversarial_image"] = str(image_path)
        fh.write(json.dumps(final, sort_keys=True) + "\n")


def read_trace(path) -> tuple[list[dict], dict]:
    records, final = [], {}
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            if rec.get("final"):
                final = rec
            else:
                records.append(rec)
    return records, final
