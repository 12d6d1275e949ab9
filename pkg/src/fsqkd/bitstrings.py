"""ASCII bit-string files: '0'/'1' characters, whitespace ignored."""
from __future__ import annotations

from pathlib import Path

import numpy as np


def parse_bits(text: str) -> np.ndarray:
    chars = "".join(text.split())
    bad = set(chars) - {"0", "1"}
    if bad:
        raise ValueError(f"unexpected characters in bit string: {''.join(sorted(bad))!r}")
    return (np.frombuffer(chars.encode("ascii"), dtype=np.uint8) - ord("0")).astype(np.uint8)


def format_bits(bits, width: int | None = None) -> str:
    s = "".join("1" if b else "0" for b in np.asarray(bits).ravel())
    if width:
        s = "\n".join(s[i:i + width] for i in range(0, len(s), width))
    return s


def read_bits(path) -> np.ndarray:
    return parse_bits(Path(path).read_text(encoding="ascii"))
