"""Deterministic random-stream plumbing shared by the Monte Carlo estimators.

Every estimator takes a root seed and a worker count.  Worker ``i`` draws from
``np.random.default_rng(np.random.SeedSequence([seed, i]))``, and partial
results are merged in worker order, so the output of a run is a pure function
of ``(seed, n_samples, n_workers)`` regardless of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def worker_rng(seed: int, worker_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(worker_id)]))


def split_counts(n_total: int, n_workers: int) -> list[int]:
    """Near-even split of n_total samples over workers (first blocks larger)."""
    if n_workers < 1:
        raise ValueError("need at least one worker")
    base, extra = divmod(int(n_total), int(n_workers))
    return [base + (1 if i < extra else 0) for i in range(n_workers)]


@dataclass
class RunningMoments:
    """Streaming count / sum / sum of squares with exact associative merge."""

    count: int = 0
    total: float = 0.0
    total_sq: float = 0.0

    def add_batch(self, values: np.ndarray) -> None:
        v = np.asarray(values, dtype=float)
        self.count += v.size
        self.total += float(v.sum())
        self.total_sq += float(np.square(v).sum())

    def merge(self, other: "RunningMoments") -> None:
        self.count += other.count
        self.total += other.total
        self.total_sq += other.total_sq

    @property
    def mean(self) -> float:
        if self.count == 0:
            raise ValueError("no samples accumulated")
        return self.total / self.count

    @property
    def variance(self) -> float:
        """Unbiased sample variance (0 for fewer than two samples)."""
        if self.count < 2:
            return 0.0
        second = self.total_sq / self.count
        var = (second - self.mean**2) * self.count / (self.count - 1)
        return max(var, 0.0)

    @property
    def std_error(self) -> float:
        if self.count == 0:
            return float("inf")
        return (self.variance / self.count) ** 0.5
