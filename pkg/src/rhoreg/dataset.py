"""Datasets of (w, y) pairs with provenance flags, and their CSV round trip."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError

FLAG_CLEAN = 0
FLAG_OUTLIER = 1
FLAG_CONTAMINATED = 2


@dataclass
class Dataset:
    """n observation pairs; ``flags`` marks corrupted rows.

    W has shape (n, d), y and flags shape (n,).  Flag values: 0 clean,
    1 injected outlier, 2 contaminated draw.
    """

    W: np.ndarray
    y: np.ndarray
    flags: np.ndarray

    def __post_init__(self):
        self.W = np.atleast_2d(np.asarray(self.W, dtype=float))
        self.y = np.asarray(self.y, dtype=float)
        if self.flags is None:
            self.flags = np.zeros(len(self.y), dtype=int)
        self.flags = np.asarray(self.flags, dtype=int)
        if not (len(self.W) == len(self.y) == len(self.flags)):
            raise DomainError(
                f"inconsistent lengths: W {len(self.W)}, y {len(self.y)}, "
                f"flags {len(self.flags)}"
            )

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def d(self) -> int:
        return self.W.shape[1]

    def clean_subset(self) -> "Dataset":
        keep = self.flags == FLAG_CLEAN
        return Dataset(self.W[keep], self.y[keep], self.flags[keep])


def save_csv(ds: Dataset, path: str | Path) -> None:
    """Write `w1..wd,y,flag` rows; floats carry 17 significant digits so the
    round trip through text is exact."""
    path = Path(path)
    header = ",".join([f"w{j + 1}" for j in range(ds.d)] + ["y", "flag"])
    with path.open("w", encoding="ascii") as fh:
        fh.write(header + "\n")
        for i in range(ds.n):
            cells = [format(v, ".17g") for v in ds.W[i]]
            cells.append(format(ds.y[i], ".17g"))
            cells.append(str(int(ds.flags[i])))
            fh.write(",".join(cells) + "\n")


def load_csv(path: str | Path) -> Dataset:
    path = Path(path)
    with path.open("r", encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
        if len(header) < 3 or header[-2] != "y" or header[-1] != "flag":
            raise DomainError(f"{path}: expected header w1..wd,y,flag, got {header}")
        d = len(header) - 2
        W, y, flags = [], [], []
        for line_no, line in enumerate(fh, start=2):
            cells = line.strip().split(",")
            if len(cells) != d + 2:
                raise DomainError(f"{path}:{line_no}: expected {d + 2} cells")
            W.append([float(c) for c in cells[:d]])
            y.append(float(cells[d]))
            flags.append(int(cells[d + 1]))
    return Dataset(np.array(W), np.array(y), np.array(flags))
