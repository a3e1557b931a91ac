"""Canonical text encoding and digests.

Records are compact JSON objects with a fixed field order: no whitespace
between tokens, UTF-8, integers in base 10, lists in stored order, mappings
as objects keyed by decimal id in ascending numeric order, and rationals as
``"num/den"`` strings in lowest terms. Two equal values always encode to the
same bytes, which is what makes the SHA-256 digests comparable across runs
and across implementations.
"""

from __future__ import annotations

import hashlib
import json
from fractions import Fraction
from typing import Any

ZERO_DIGEST = bytes(32)


def encode_fraction(value: Fraction) -> str:
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


def decode_fraction(text: str) -> Fraction:
    num, sep, den = text.partition("/")
    if not sep:
        raise ValueError(f"bad rational {text!r}")
    value = Fraction(int(num), int(den))
    if encode_fraction(value) != text:
        raise ValueError(f"rational {text!r} is not in lowest terms")
    return value


def dumps(record: Any) -> str:
    """Encode a record already laid out in canonical field order."""
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"), allow_nan=False)


def loads(text: str) -> Any:
    return json.loads(text)


def sha256(text: str) -> bytes:
    return hashlib.sha256(text.encode("utf-8")).digest()


def hexdigest(digest: bytes) -> str:
    return digest.hex()


def parse_hexdigest(text: str) -> bytes:
    if not isinstance(text, str) or len(text) != 64 or text != text.lower():
        raise ValueError(f"bad digest {text!r}")
    return bytes.fromhex(text)
