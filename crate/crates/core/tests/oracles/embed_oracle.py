"""Independent reimplementation of the local n-gram embedder.

Prints cosine similarities used as frozen regression values in the Rust
unit tests. Run: python3 embed_oracle.py
"""
import math
import struct

MASK = (1 << 64) - 1
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
SEED = 0x9AE16A3B2F90404F


def gram_hash(gram: bytes) -> int:
    h = FNV_OFFSET ^ SEED
    for b in gram:
        h ^= b
        h = (h * FNV_PRIME) & MASK
    z = (h + 0x9E3779B97F4A7C15) & MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def embed(text: str, dim: int = 256):
    p = b"^" + text.encode() + b"$"
    acc = [0.0] * dim
    for n in (2, 3):
        for i in range(len(p) - n + 1):
            h = gram_hash(p[i : i + n])
            acc[h % dim] += -1.0 if h >> 63 else 1.0
    norm = math.sqrt(sum(v * v for v in acc))
    if norm == 0:
        return [1.0] + [0.0] * (dim - 1)
    # round through f32 as the Rust side stores f32
    return [struct.unpack("f", struct.pack("f", v / norm))[0] for v in acc]


def cosine(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    return dot / (na * nb)


if __name__ == "__main__":
    a = embed("amazon")
    print("amazon/amaz0n", repr(cosine(a, embed("amaz0n"))))
    print("amazon/zebra-corp", repr(cosine(a, embed("zebra-corp"))))
