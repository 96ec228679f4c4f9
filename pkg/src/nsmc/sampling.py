"""Uniform directions on the unit sphere from seeded, partitionable streams.

Directions are generated in fixed-size blocks. Block ``b`` of stream
``(seed, stream_id)`` in ``n`` dimensions is drawn from its own generator
keyed by ``(seed, n, stream_id, b)``, so the ``k``-th direction depends only
on the seed, the stream id, the dimension and ``k``. Each block also owns an
auxiliary generator for body-side randomness (synthetic extent draws), keyed
the same way.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError

BLOCK_SIZE = 1024

_DIRECTIONS = 0
_AUXILIARY = 1


def _generator(seed, n, stream_id, block, purpose):
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(n, stream_id, block, purpose))
    return np.random.Generator(np.random.PCG64DXSM(ss))


def random_directions(rng, count, n):
    """``count`` iid uniform directions in ``n`` dims as rows of an array."""
    x = rng.standard_normal((count, n))
    norms = np.sqrt(np.einsum("ij,ij->i", x, x))
    while True:
        bad = norms == 0.0
        if not bad.any():
            break
        x[bad] = rng.standard_normal((int(bad.sum()), n))
        norms[bad] = np.sqrt(np.einsum("ij,ij->i", x[bad], x[bad]))
    return x / norms[:, None]


class DirectionStream:
    """Deterministic stream of uniform directions on ``S^(n-1)``.

    Parameters
    ----------
    seed : int
        Experiment seed (any non-negative integer, typically 64-bit).
    stream_id : int
        Worker or trial index; distinct ids give independent streams.
    n : int
        Dimension of the ambient space.
    """

    def __init__(self, seed, stream_id, n):
        if int(n) != n or n < 1:
            raise DomainError(f"dimension must be a positive integer, got {n}")
        if stream_id < 0 or seed < 0:
            raise DomainError("seed and stream_id must be non-negative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.n = int(n)
        self.counter = 0
        self._block_index = -1
        self._block = None
        self._aux = None

    def __repr__(self):
        return (f"DirectionStream(seed={self.seed}, stream_id={self.stream_id}, "
                f"n={self.n}, counter={self.counter})")

    def _load(self, index):
        gen = _generator(self.seed, self.n, self.stream_id, index, _DIRECTIONS)
        self._block = random_directions(gen, BLOCK_SIZE, self.n)
        self._aux = _generator(self.seed, self.n, self.stream_id, index, _AUXILIARY)
        self._block_index = index

    def take_block(self):
        """Return the unread directions of the current block and its aux generator.

        Advances the counter past them.
        """
        index, offset = divmod(self.counter, BLOCK_SIZE)
        if index != self._block_index:
            self._load(index)
        dirs = self._block[offset:]
        self.counter += dirs.shape[0]
        return dirs, self._aux

    def take(self, count):
        """Return the next ``count`` directions as a ``(count, n)`` array."""
        parts = []
        while count > 0:
            index, offset = divmod(self.counter, BLOCK_SIZE)
            if index != self._block_index:
                self._load(index)
            chunk = self._block[offset:offset + count]
            self.counter += chunk.shape[0]
            count -= chunk.shape[0]
            parts.append(chunk)
        if not parts:
            return np.empty((0, self.n))
        return np.concatenate(parts) if len(parts) > 1 else parts[0].copy()

    @property
    def aux_rng(self):
        """Auxiliary generator of the block holding the next direction."""
        index = self.counter // BLOCK_SIZE
        if index != self._block_index:
            self._load(index)
        return self._aux


def sample_direction(stream):
    """Draw the next uniform direction from ``stream``."""
    return stream.take(1)[0]


def antithetic_pair(stream):
    """Draw ``(s, -s)`` with ``s`` uniform on the sphere."""
    s = sample_direction(stream)
    return s, -s


def worker_streams(seed, n, workers, offset=0):
    """One stream per worker, with ids ``offset .. offset + workers - 1``."""
    if workers < 1:
        raise DomainError(f"need at least one worker, got {workers}")
    return [DirectionStream(seed, offset + w, n) for w in range(workers)]


def uniform_in_ball(rng, n, radius):
    """A point uniformly distributed in the ``n``-ball of the given radius."""
    s = random_directions(rng, 1, n)[0]
    return s * radius * rng.random() ** (1.0 / n)
