"""Random-access shared-randomness tapes.

A :class:`SharedTape` holds one 64-bit key per simulated trial. Register ``i``
of a trial is an independent draw ``(u_i, v_i)`` from the source, computed on
demand from ``(key, i)``; Alice's :class:`PlayerView` exposes only the ``u``
halves and Bob's only the ``v`` halves. Because both views hash the same
``(key, i)``, they read consistent halves of the same draw without anything
being materialised, which is what lets a protocol address ``2**30``
registers.

Block reads (``block=ell``) return one draw from the ``ell``-fold tensor power
(a tuple index in ``U**ell``). Each block size has its own key space, so
mixing block sizes never aliases registers.
"""

from __future__ import annotations

import numpy as np

from . import _rng
from .sources import BipartiteSource, block_table


class SharedTape:
    def __init__(self, source: BipartiteSource, keys):
        self.source = source
        self.keys = np.atleast_1d(np.asarray(keys, dtype=np.uint64))

    @classmethod
    def from_seed(cls, source: BipartiteSource, seed: int, trials: int, start: int = 0):
        counters = np.arange(start, start + trials, dtype=np.uint64)
        return cls(source, _rng.derive_seeds(seed, counters, "tape"))

    @property
    def trials(self) -> int:
        return len(self.keys)

    def _draw(self, idx, block: int, per_trial: bool = False) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.uint64)
        with np.errstate(over="ignore"):
            salt = _rng.mix64(np.uint64(block) * _rng.GOLDEN)
        stream = _rng.mix64(self.keys ^ salt)
        if per_trial:
            stream = stream.reshape((-1,) + (1,) * (idx.ndim - 1))
            uniforms = _rng.counter_uniforms(stream, idx)
        else:
            stream = stream.reshape((-1,) + (1,) * idx.ndim)
            uniforms = _rng.counter_uniforms(stream, idx[None, ...])
        return block_table(self.source, block).lookup(uniforms)

    def read_pairs(self, idx, block: int = 1, per_trial: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """Both halves of registers ``idx``; shape ``(trials,) + idx.shape``.

        With ``per_trial=True`` the leading axis of ``idx`` already indexes trials.
        """
        table = block_table(self.source, block)
        pos = self._draw(idx, block, per_trial)
        return table.u[pos], table.v[pos]

    def alice(self) -> "PlayerView":
        return PlayerView(self, "u")

    def bob(self) -> "PlayerView":
        return PlayerView(self, "v")

    def repeat(self, count: int) -> "SharedTape":
        """Tape with each trial key repeated ``count`` times (same randomness per block)."""
        return SharedTape(self.source, np.repeat(self.keys, count))


class PlayerView:
    """One player's half of a shared tape, optionally shifted by a register offset."""

    def __init__(self, tape: SharedTape, side: str, offset: int = 0):
        self.tape = tape
        self.side = side
        self.offset = offset

    @property
    def trials(self) -> int:
        return self.tape.trials

    @property
    def alphabet(self) -> int:
        s = self.tape.source
        return s.u_size if self.side == "u" else s.v_size

    def shifted(self, offset: int) -> "PlayerView":
        return PlayerView(self.tape, self.side, self.offset + offset)

    def _coin_keys(self, stream: int) -> np.ndarray:
        salt = np.uint64(_rng.derive_seed(0, "coins", self.side, stream))
        return _rng.mix64(self.tape.keys ^ salt)

    def coins(self, idx, stream: int = 0) -> np.ndarray:
        """Private uniforms at ``offset + idx``; independent of the other player's coins."""
        idx = np.asarray(idx, dtype=np.int64) + self.offset
        keys = self._coin_keys(stream).reshape((-1,) + (1,) * idx.ndim)
        return _rng.counter_uniforms(keys, idx.astype(np.uint64)[None, ...])

    def coins_at(self, rows, idx, stream: int = 0) -> np.ndarray:
        """``coins(idx)[rows, idx]`` evaluated only at the listed (trial, index) pairs."""
        idx = np.asarray(idx, dtype=np.int64) + self.offset
        keys = self._coin_keys(stream)[np.asarray(rows)]
        return _rng.counter_uniforms(keys, idx.astype(np.uint64))

    def read(self, idx, block: int = 1, per_trial: bool = False) -> np.ndarray:
        """Symbols (or ``block``-tuple indices) at registers ``offset + idx``.

        With ``per_trial=True`` the leading axis of ``idx`` indexes trials, so
        each trial may address different registers.
        """
        idx = np.asarray(idx, dtype=np.int64) + self.offset
        table = block_table(self.tape.source, block)
        pos = self.tape._draw(idx, block, per_trial)
        return (table.u if self.side == "u" else table.v)[pos]
