"""Vernam one-time pad over bit sequences.

XOR is linear, so two ciphertexts under the same key leak the XOR of their
plaintexts.  ``OneTimePad`` therefore tracks a consumption cursor and
refuses to hand out key material twice.
"""
from __future__ import annotations

import numpy as np


class KeyExhaustedError(ValueError):
    pass


class KeyReuseError(ValueError):
    pass


def _bits(seq) -> np.ndarray:
    arr = np.asarray(seq, dtype=np.uint8)
    if np.any(arr > 1):
        raise ValueError("bit sequences may hold only 0 and 1")
    return arr


def pack(bits) -> np.ndarray:
    """Bits to big-endian octets along the last axis (zero-padded)."""
    return np.packbits(_bits(bits), axis=-1)


def unpack(octets, count: int) -> np.ndarray:
    return np.unpackbits(np.asarray(octets, dtype=np.uint8), axis=-1, count=count)


def xor_octets(a, b) -> np.ndarray:
    return np.bitwise_xor(np.asarray(a, dtype=np.uint8), np.asarray(b, dtype=np.uint8))


def vernam_encrypt(message, key) -> np.ndarray:
    """XOR ``message`` with the leading bits of ``key``.

    Works along the last axis, so batches of messages or keys broadcast.
    """
    m = _bits(message)
    k = _bits(key)
    n = m.shape[-1] if m.ndim else 0
    if k.shape[-1] < n:
        raise KeyExhaustedError(f"key has {k.shape[-1]} bits, message needs {n}")
    return unpack(xor_octets(pack(m), pack(k[..., :n])), n)


vernam_decrypt = vernam_encrypt


class OneTimePad:
    """One party's copy of a shared pad with a forward-only cursor."""

    def __init__(self, key):
        self._key = _bits(key).ravel().copy()
        self._key.setflags(write=False)
        self.offset = 0

    @property
    def remaining(self) -> int:
        return self._key.size - self.offset

    def _take(self, n: int, offset: int | None) -> tuple[int, np.ndarray]:
        start = self.offset if offset is None else offset
        if start < self.offset:
            raise KeyReuseError(f"key bits before offset {self.offset} are already consumed")
        if start + n > self._key.size:
            raise KeyExhaustedError(f"need {n} key bits at offset {start}, pad holds {self._key.size}")
        self.offset = start + n
        return start, self._key[start:start + n]

    def encrypt(self, message, offset: int | None = None) -> tuple[int, np.ndarray]:
        """Return ``(offset, ciphertext)``; the offset travels with the ciphertext."""
        m = _bits(message).ravel()
        start, k = self._take(m.size, offset)
        return start, vernam_encrypt(m, k)

    def decrypt(self, ciphertext, offset: int) -> np.ndarray:
        c = _bits(ciphertext).ravel()
        _, k = self._take(c.size, offset)
        return vernam_decrypt(c, k)
