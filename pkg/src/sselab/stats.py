"""Streaming ensemble estimators: sample mean and sample standard error.

For ``R`` realizations ``F_r`` at a grid point the estimators are

    mean   = (1/R) sum_r F_r
    stderr = sqrt( sum_r (F_r - mean)^2 / (R (R - 1)) )

accumulated with Welford's update so that ``R = 10^4`` values close to one
do not lose digits.  Partial accumulators merge with Chan's pairwise rule.
"""

from __future__ import annotations

import numpy as np

from .errors import GridMismatch, InsufficientSamples


class EnsembleAccumulator:
    """Per-grid-point running moments of a real functional.

    Parameters
    ----------
    times : array_like
        The time grid every added realization must share.
    functional : str, optional
        Name of the sample series read from a :class:`TrajectoryRecord`;
        ``"output_B"`` reads the record's output path.
    """

    def __init__(self, times, functional: str = "eta11"):
        self.times = np.asarray(times, dtype=float)
        self.functional = functional
        self.count = 0
        self.aborted = 0
        self._mean = np.zeros(self.times.size)
        self._m2 = np.zeros(self.times.size)

    def _check_grid(self, times) -> None:
        times = np.asarray(times, dtype=float)
        if times.shape != self.times.shape or not np.array_equal(times, self.times):
            raise GridMismatch("record grid differs from accumulator grid")

    def add_values(self, values) -> "EnsembleAccumulator":
        values = np.asarray(values, dtype=float)
        if values.shape != self.times.shape:
            raise GridMismatch(f"expected {self.times.size} samples, got {values.shape}")
        self.count += 1
        delta = values - self._mean
        self._mean += delta / self.count
        self._m2 += delta * (values - self._mean)
        return self

    def add(self, record) -> "EnsembleAccumulator":
        """Add one :class:`~sselab.sde.TrajectoryRecord`."""
        self._check_grid(record.times)
        if self.functional == "output_B" and "output_B" not in record.functional_samples:
            values = record.output_path
        else:
            values = record.functional_samples[self.functional]
        return self.add_values(values)

    def add_batch(self, batch, key: str | None = None) -> "EnsembleAccumulator":
        """Add every accepted row of a :class:`~sselab.sde.BatchResult` in row order.

        Aborted rows are counted in ``aborted`` and excluded from the moments.
        """
        self._check_grid(batch.times)
        rows = batch.samples[key or self.functional]
        for r in range(rows.shape[0]):
            if batch.aborted[r]:
                self.aborted += 1
            else:
                self.add_values(rows[r])
        return self

    def merge(self, other: "EnsembleAccumulator") -> "EnsembleAccumulator":
        """Fold ``other`` into ``self`` (pairwise moment combination)."""
        self._check_grid(other.times)
        if other.count == 0:
            self.aborted += other.aborted
            return self
        n = self.count + other.count
        delta = other._mean - self._mean
        self._mean = self._mean + delta * (other.count / n)
        self._m2 = self._m2 + other._m2 + delta * delta * (self.count * other.count / n)
        self.count = n
        self.aborted += other.aborted
        return self

    @property
    def mean(self) -> np.ndarray:
        return self._mean.copy()

    def finalize(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(mean, stderr)`` per grid point."""
        if self.count < 2:
            raise InsufficientSamples(f"need at least 2 realizations, have {self.count}")
        var = self._m2 / (self.count * (self.count - 1))
        return self._mean.copy(), np.sqrt(np.maximum(var, 0.0))


def sample_mean_stderr(samples, axis: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Two-pass mean and standard error of ``samples`` along ``axis``."""
    samples = np.asarray(samples, dtype=float)
    r = samples.shape[axis]
    if r < 2:
        raise InsufficientSamples(f"need at least 2 realizations, have {r}")
    mean = samples.mean(axis=axis)
    dev = samples - np.expand_dims(mean, axis)
    return mean, np.sqrt(np.sum(dev * dev, axis=axis) / (r * (r - 1)))
