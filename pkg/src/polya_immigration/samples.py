"""Tagged sample containers shared by samplers and transforms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SampleBatch:
    """I.i.d. positive samples together with the seed that produced them."""

    values: np.ndarray
    seed: int
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("sample batches are one-dimensional")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise ValueError("sample values must be finite and positive")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    def scaled(self, theta: float, label: str | None = None) -> "SampleBatch":
        return SampleBatch(theta * self.values, self.seed, label or f"{theta:g}*{self.label}")
