"""Sweep results: (x, estimate, binomial error, shots) series and their CSV form."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CSV_HEADER = ("x", "y", "y_err", "shots")


def binomial_error(y, shots):
    y = np.asarray(y, dtype=float)
    shots = np.asarray(shots, dtype=float)
    return np.sqrt(np.clip(y * (1 - y), 0, None) / np.where(shots > 0, shots, np.inf))


@dataclass(frozen=True)
class DecayCurve:
    x: np.ndarray
    y: np.ndarray
    y_err: np.ndarray
    shots: np.ndarray
    label: str = ""

    def __post_init__(self):
        for name in ("x", "y", "y_err", "shots"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        n = len(self.x)
        if not (len(self.y) == len(self.y_err) == len(self.shots) == n):
            raise ValueError("curve columns differ in length")

    @classmethod
    def from_counts(cls, x, successes, shots, label: str = "") -> "DecayCurve":
        shots = np.asarray(shots, dtype=float) * np.ones(len(x))
        y = np.asarray(successes, dtype=float) / shots
        return cls(np.asarray(x, float), y, binomial_error(y, shots), shots, label)

    @classmethod
    def exact(cls, x, y, label: str = "") -> "DecayCurve":
        """Noise-free probabilities: zero error, zero shots."""
        n = len(x)
        return cls(np.asarray(x, float), np.asarray(y, float), np.zeros(n), np.zeros(n), label)

    def __len__(self):
        return len(self.x)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in zip(self.x, self.y, self.y_err, self.shots):
            w.writerow([f"{v:.10g}" for v in row])
        return buf.getvalue()

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_csv(), encoding="utf-8")
        return path

    @classmethod
    def read_csv(cls, path, label: str = "") -> "DecayCurve":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != CSV_HEADER:
                raise ValueError(f"unexpected CSV header {header}")
            rows = np.array([[float(v) for v in row] for row in reader], dtype=float).reshape(-1, 4)
        return cls(rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3], label)


GammaCurve = DecayCurve
