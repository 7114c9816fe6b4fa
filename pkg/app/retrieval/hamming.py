"""Packed binary codes and Hamming distance by XOR + population count.

Bit k of a code is stored most-significant-first: bit 0 is the top bit of
word 0. Unused low bits of the last word are zero.
"""
from __future__ import annotations

import numpy as np

from app.core.errors import ShapeError, ValidationFailure

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)
_NIBBLE = np.array([8, 4, 2, 1], dtype=np.uint8)


def popcount64(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint64)
    x = x - ((x >> np.uint64(1)) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M4
    return ((x * _H01) >> np.uint64(56)).astype(np.int64)


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """(..., b) 0/1 array -> (..., ceil(b/64)) uint64 words."""
    bits = np.asarray(bits, dtype=np.uint8)
    b = bits.shape[-1]
    words = max(1, -(-b // 64))
    padded = np.zeros(bits.shape[:-1] + (words * 64,), dtype=np.uint8)
    padded[..., :b] = bits
    packed = np.packbits(padded, axis=-1, bitorder="big")
    return np.ascontiguousarray(packed).view(">u8").astype(np.uint64)


def unpack_bits(words: np.ndarray, b: int) -> np.ndarray:
    raw = np.asarray(words, dtype=np.uint64).astype(">u8").view(np.uint8)
    return np.unpackbits(raw, axis=-1, bitorder="big")[..., :b]


def hamming_distance(code_a, code_b) -> int:
    a = np.asarray(code_a, dtype=np.uint8)
    b = np.asarray(code_b, dtype=np.uint8)
    if a.shape != b.shape:
        raise ShapeError(f"codes differ in length: {a.shape[-1]} vs {b.shape[-1]} bits")
    return int(popcount64(pack_bits(a) ^ pack_bits(b)).sum())


def hamming_distances(query_words: np.ndarray, db_words: np.ndarray) -> np.ndarray:
    """Distances from one packed query (W,) to packed codes (n, W)."""
    if db_words.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    return popcount64(db_words ^ query_words[None, :]).sum(axis=1)


def code_to_hex(bits: np.ndarray) -> str:
    bits = np.asarray(bits, dtype=np.uint8)
    pad = (-bits.size) % 4
    if pad:
        bits = np.concatenate([bits, np.zeros(pad, dtype=np.uint8)])
    nibbles = bits.reshape(-1, 4) @ _NIBBLE
    return "".join(format(int(v), "x") for v in nibbles)


def hex_to_code(text: str, b: int) -> np.ndarray:
    if len(text) != -(-b // 4):
        raise ValidationFailure(f"hex code '{text}' has the wrong length for {b} bits")
    try:
        values = [int(ch, 16) for ch in text]
    except ValueError as e:
        raise ValidationFailure(f"hex code '{text}' is not hexadecimal") from e
    bits = np.array([(v >> s) & 1 for v in values for s in (3, 2, 1, 0)], dtype=np.uint8)
    if bits[b:].any():
        raise ValidationFailure(f"hex code '{text}' sets bits beyond {b}")
    return bits[:b]
