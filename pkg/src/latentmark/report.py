"""Evaluation report: per-image rows plus mean/std aggregates, CSV and JSON."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

ROW_FIELDS = (
    "image_id",
    "method",
    "psnr",
    "ssim",
    "perceptual",
    "bit_acc_clean",
    "bit_acc_noised",
    "bit_acc_ecc",
    "word_acc",
    "perturbation",
    "error",
)

_METRIC_FIELDS = (
    "psnr",
    "ssim",
    "perceptual",
    "bit_acc_clean",
    "bit_acc_noised",
    "bit_acc_ecc",
    "word_acc",
)


@dataclass
class EvalRow:
    image_id: str
    method: str
    psnr: float = math.nan
    ssim: float = math.nan
    perceptual: float = math.nan
    bit_acc_clean: float = math.nan
    bit_acc_noised: float = math.nan
    bit_acc_ecc: float = math.nan
    word_acc: float = math.nan
    perturbation: str = ""
    error: str = ""


@dataclass
class EvalReport:
    rows: list[EvalRow]
    config: dict = field(default_factory=dict)

    @property
    def ok_rows(self) -> list[EvalRow]:
        return [r for r in self.rows if not r.error]

    @property
    def has_errors(self) -> bool:
        return any(r.error for r in self.rows)

    def aggregates(self) -> dict[str, dict[str, float]]:
        out = {}
        for name in _METRIC_FIELDS:
            values = np.array(
                [getattr(r, name) for r in self.ok_rows], dtype=np.float64
            )
            values = values[~np.isnan(values)]
            if values.size:
                out[name] = {
                    "mean": float(values.mean()),
                    "std": float(values.std()),
                    "count": int(values.size),
                }
        return out

    def write_csv(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=ROW_FIELDS)
            writer.writeheader()
            for row in self.rows:
                writer.writerow(asdict(row))

    def write_json(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "config": self.config,
            "aggregates": self.aggregates(),
            "row_count": len(self.rows),
            "error_count": sum(1 for r in self.rows if r.error),
        }
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True))

    @classmethod
    def read_csv(cls, path: str | Path) -> "EvalReport":
        rows = []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                for name in _METRIC_FIELDS:
                    rec[name] = float(rec[name]) if rec[name] != "" else math.nan
                rows.append(EvalRow(**rec))
        return cls(rows)
