"""FNV-1a 64-bit hashing shared by function hashes, vocabularies and fold assignment."""

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes | str) -> int:
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = FNV64_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV64_PRIME) & _MASK64
    return h


def hashed_index(token: str, dim: int) -> int:
    """Stable bucket of ``token`` in a hashed vocabulary of size ``dim``."""
    return fnv1a64(token) % dim
