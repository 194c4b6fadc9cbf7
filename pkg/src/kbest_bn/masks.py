"""Bitmask helpers for variable subsets.

Variable sets are encoded as integers: bit i set means variable i is in the
set. Parent-set tables store one entry per subset of V without the child, so
there are also helpers for dropping/reinserting the child's bit to form a
dense index.
"""
from __future__ import annotations

from typing import Iterator


def iter_bits(mask: int) -> Iterator[int]:
    """Yield the set bit positions of ``mask`` in ascending order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def iter_submasks(mask: int) -> Iterator[int]:
    """Yield every submask of ``mask`` (including 0 and ``mask`` itself)."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def drop_bit(mask: int, i: int) -> int:
    """Dense index of ``mask`` within subsets of V minus variable ``i``.

    ``mask`` must not contain bit ``i``; the bits above ``i`` shift down one.
    """
    low = mask & ((1 << i) - 1)
    return low | ((mask >> (i + 1)) << i)


def insert_bit(index: int, i: int) -> int:
    """Inverse of :func:`drop_bit`: re-expand a dense index to a full mask."""
    low = index & ((1 << i) - 1)
    return low | ((index >> i) << (i + 1))


def masks_by_size(width: int) -> list[int]:
    """All masks over ``width`` bits ordered by popcount, then value."""
    return sorted(range(1 << width), key=lambda m: (m.bit_count(), m))
