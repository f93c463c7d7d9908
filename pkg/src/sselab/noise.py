"""Seeded noise streams, Wiener increments and the Ornstein-Uhlenbeck process.

Every realization ``r`` of an ensemble owns the stream ``(master_seed, r)``.
The substream state is derived by hashing the pair through
``numpy.random.SeedSequence(entropy=master_seed, spawn_key=(r,))`` and
feeding it to a counter-based Philox4x64 generator, so a trajectory's noise
never depends on which worker ran it or in which order.

Standard normals come from the polar Box-Muller method.  Uniforms are
consumed in pairs ``(u1, u2)`` mapped to ``v = 2u - 1``; a pair is accepted
when ``0 < s = v1^2 + v2^2 < 1`` and yields ``v1*f`` then ``v2*f`` with
``f = sqrt(-2 ln s / s)``.  Rejected pairs yield nothing.  Surplus variates
are buffered so the normal sequence is the same however calls are chunked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter

_MASK64 = (1 << 64) - 1


class NoiseStream:
    """Single-owner reproducible stream of standard-normal variates."""

    def __init__(self, master_seed: int, stream_index: int = 0):
        master_seed = int(master_seed)
        stream_index = int(stream_index)
        if not 0 <= master_seed <= _MASK64:
            raise InvalidParameter("master_seed must be a 64-bit unsigned integer")
        if stream_index < 0:
            raise InvalidParameter("stream_index must be nonnegative")
        self.master_seed = master_seed
        self.stream_index = stream_index
        seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(stream_index,))
        self._gen = np.random.Generator(np.random.Philox(seq))
        self._buffer = np.empty(0)

    def __repr__(self) -> str:
        return f"NoiseStream(master_seed={self.master_seed}, stream_index={self.stream_index})"

    def _refill(self, needed: int) -> None:
        chunks = [self._buffer]
        have = self._buffer.size
        while have < needed:
            # acceptance rate of the polar method is pi/4
            pairs = max(32, int(math.ceil((needed - have) / 2 / 0.785)) + 8)
            v = 2.0 * self._gen.random(2 * pairs) - 1.0
            v1, v2 = v[0::2], v[1::2]
            s = v1 * v1 + v2 * v2
            ok = (s > 0.0) & (s < 1.0)
            v1, v2, s = v1[ok], v2[ok], s[ok]
            f = np.sqrt(-2.0 * np.log(s) / s)
            z = np.empty(2 * s.size)
            z[0::2] = v1 * f
            z[1::2] = v2 * f
            chunks.append(z)
            have += z.size
        self._buffer = np.concatenate(chunks)

    def normals(self, n: int) -> np.ndarray:
        """Next ``n`` standard-normal variates."""
        if n < 0:
            raise InvalidParameter("n must be nonnegative")
        if self._buffer.size < n:
            self._refill(n)
        out, self._buffer = self._buffer[:n], self._buffer[n:]
        return out.copy()

    def standard_normal(self) -> float:
        return float(self.normals(1)[0])


def standard_normal(stream: NoiseStream) -> float:
    return stream.standard_normal()


@dataclass(frozen=True)
class WienerIncrements:
    dt: float
    values: np.ndarray

    def path(self) -> np.ndarray:
        """Partial sums ``W(t_n)`` including ``W(0) = 0``."""
        return np.concatenate(([0.0], np.cumsum(self.values)))


def wiener_increments(stream: NoiseStream, n_steps: int, dt: float) -> WienerIncrements:
    """Draw ``n_steps`` increments ``Z_n * sqrt(dt)``."""
    if not dt > 0.0:
        raise InvalidParameter(f"dt must be positive, got {dt}")
    if n_steps < 0:
        raise InvalidParameter("n_steps must be nonnegative")
    return WienerIncrements(dt, stream.normals(n_steps) * math.sqrt(dt))


def normal_matrix(master_seed: int, stream_indices, n: int) -> np.ndarray:
    """Rows of ``n`` fresh normals, row ``i`` from stream ``stream_indices[i]``."""
    idx = list(stream_indices)
    out = np.empty((len(idx), n))
    for row, r in enumerate(idx):
        out[row] = NoiseStream(master_seed, r).normals(n)
    return out


@dataclass(frozen=True)
class OUState:
    """Current value of a stationary O-U process with inverse correlation time ``k``."""

    k: float
    x: float


def _check_k(k: float) -> None:
    # X(0) = Z / sqrt(2k) needs k > 0; the k -> 0 Markovian limit is only
    # available through the deterministic reference equations.
    if not (k > 0.0 and math.isfinite(k)):
        raise InvalidParameter(f"O-U rate k must be positive and finite, got {k}")


def ou_stationary_sample(k: float, z):
    """Map standard normal(s) ``z`` onto the stationary law ``N(0, 1/(2k))``."""
    _check_k(k)
    return z / math.sqrt(2.0 * k)


def ou_init(k: float, stream: NoiseStream) -> OUState:
    _check_k(k)
    return OUState(k, ou_stationary_sample(k, stream.standard_normal()))


def ou_step(state: OUState, dt: float, dW: float) -> OUState:
    """Euler step of ``dX = -k X dt + dW``."""
    if not dt > 0.0:
        raise InvalidParameter(f"dt must be positive, got {dt}")
    return OUState(state.k, state.x + (-state.k * state.x) * dt + dW)
