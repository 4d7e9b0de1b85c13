def short_hash(digest: bytes, length: int = 8) -> str:
    """Hex prefix of a content hash, for labels and log lines"""

    return digest.hex()[:length]