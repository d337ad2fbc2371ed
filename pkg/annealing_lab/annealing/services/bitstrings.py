"""Computational basis states.

Bit ``i`` (1-based) is the ``i``-th character of the ket ``|b1 b2 ... bN>``.
A true bit means spin ``s_i = +1`` and variable ``x_i`` true. The integer
index of a state is ``sum(b_i * 2**(N - i))``, so bit 1 is the most
significant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from annealing.exceptions import InvalidInputError


@dataclass(frozen=True, order=True)
class BasisState:
    bits: tuple[bool, ...]

    def __post_init__(self):
        if not self.bits:
            raise InvalidInputError("A basis state needs at least one bit.")

    @classmethod
    def from_string(cls, text: str) -> BasisState:
        text = text.strip()
        if not text or set(text) - {'0', '1'}:
            raise InvalidInputError(f"Not a bitstring: {text!r}")
        return cls(tuple(ch == '1' for ch in text))

    @classmethod
    def from_index(cls, index: int, n: int) -> BasisState:
        if n < 1 or not 0 <= index < 2 ** n:
            raise InvalidInputError(f"Index {index} does not address a {n}-bit state.")
        return cls(tuple(bool((index >> (n - 1 - k)) & 1) for k in range(n)))

    @classmethod
    def from_spins(cls, spins: Iterable[int]) -> BasisState:
        return cls(tuple(int(s) > 0 for s in spins))

    @property
    def n(self) -> int:
        return len(self.bits)

    @property
    def index(self) -> int:
        value = 0
        for bit in self.bits:
            value = (value << 1) | int(bit)
        return value

    @property
    def spins(self) -> np.ndarray:
        return np.where(np.array(self.bits, dtype=bool), 1, -1)

    def flip(self, subset: Iterable[int]) -> BasisState:
        """Return the state with the given 1-based positions inverted."""
        positions = set(subset)
        bad = [i for i in positions if not 1 <= i <= self.n]
        if bad:
            raise InvalidInputError(f"Positions {sorted(bad)} outside [1, {self.n}].")
        return BasisState(tuple((not b) if (k + 1) in positions else b for k, b in enumerate(self.bits)))

    def hamming_distance(self, other: BasisState) -> int:
        if other.n != self.n:
            raise InvalidInputError("Hamming distance needs states of equal length.")
        return sum(a != b for a, b in zip(self.bits, other.bits))

    def __str__(self) -> str:
        return ''.join('1' if b else '0' for b in self.bits)


def all_index_bits(n: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Boolean matrix (rows = indices in [start, stop), columns = bits 1..n)."""
    stop = 2 ** n if stop is None else stop
    indices = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((indices[:, None] >> shifts[None, :]) & 1).astype(bool)
