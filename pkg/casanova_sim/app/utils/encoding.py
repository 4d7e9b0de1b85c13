"""Canonical binary encoding shared by transactions, blocks and side-protocol messages.

Every field is length-prefixed and fields are always written in a fixed
order, so the bytes (and therefore every content hash) are identical on
every platform.
"""

import hashlib
import struct
from typing import Iterable, Optional

def encode_int(value: int) -> bytes:
    return struct.pack(">q", value)

def encode_bytes(value: bytes) -> bytes:
    return struct.pack(">I", len(value)) + value

def encode_str(value: str) -> bytes:
    return encode_bytes(value.encode("utf-8"))

def encode_optional_int(value: Optional[int]) -> bytes:
    if value is None:
        return b"\x00"
    return b"\x01" + encode_int(value)

def encode_seq(items: Iterable[bytes]) -> bytes:
    """Encodes already-encoded items as a counted, length-prefixed sequence"""

    items = list(items)
    return struct.pack(">I", len(items)) + b"".join(encode_bytes(item) for item in items)

def digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()
