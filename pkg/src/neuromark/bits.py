"""Bit-string payloads: vectors over {-1,+1} and their text forms."""
from __future__ import annotations

import numpy as np

from .tensor import DTYPE


def random_bits(rng, batch, n):
    """Uniform batch of bit strings, entries in {-1,+1}, shape (batch, n)."""
    return (rng.integers(0, 2, size=(batch, n)) * 2 - 1).astype(DTYPE)


def check_bits(bits):
    bits = np.asarray(bits)
    if not np.all(np.abs(bits) == 1):
        raise ValueError("bit strings must contain only -1 and +1")
    return bits


def parse_bits(text, n):
    """Parse a payload written as 0/1 characters or hex (MSB first).

    A string of exactly n characters from {0,1} is read as binary; otherwise
    the text is read as hex, which requires n to be a multiple of 4 and
    exactly n/4 digits. 0 maps to -1 and 1 maps to +1.
    """
    text = text.strip().lower()
    if len(text) == n and set(text) <= {"0", "1"}:
        bin_str = text
    else:
        try:
            int(text, 16)
        except ValueError:
            raise ValueError(
                f"cannot parse {text!r} as a {n}-bit payload (binary or hex)"
            ) from None
        if n % 4 != 0 or len(text) != n // 4:
            raise ValueError(
                f"hex payload needs exactly {n // 4 if n % 4 == 0 else 'n/4'} digits "
                f"for n={n}; got {len(text)} digits"
            )
        bin_str = bin(int(text, 16))[2:].zfill(n)
    return np.array([1.0 if ch == "1" else -1.0 for ch in bin_str], dtype=DTYPE)


def format_bits(bits):
    """Render a {-1,+1} vector as a 0/1 string."""
    return "".join("1" if b > 0 else "0" for b in np.asarray(bits))


def bits_to_hex(bits):
    s = format_bits(bits)
    if len(s) % 4 != 0:
        raise ValueError("hex rendering requires a multiple of 4 bits")
    return format(int(s, 2), f"0{len(s) // 4}x")
