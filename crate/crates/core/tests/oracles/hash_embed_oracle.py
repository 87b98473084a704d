#!/usr/bin/env python3
"""Reference character n-gram feature hasher used to freeze expected vectors.

Usage: hash_embed_oracle.py TEXT DIM
Prints the raw signed counts and the f32 bit patterns of the normalized vector.
"""
import math
import struct
import sys

import numpy as np

MASK = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & MASK
    return h


def counts(text: str, dim: int):
    chars = ["^"] + list(text) + ["$"]
    out = [0] * dim
    if not text:
        return out
    for n in (3, 4, 5):
        for i in range(len(chars) - n + 1):
            h = fnv1a64("".join(chars[i : i + n]).encode("utf-8"))
            out[h % dim] += -1 if (h >> 63) & 1 else 1
    return out


def main():
    text, dim = sys.argv[1], int(sys.argv[2])
    c = counts(text, dim)
    norm = math.sqrt(sum(float(x) * float(x) for x in c))
    vec = [np.float32(x / norm) if norm > 0 else np.float32(0.0) for x in c]
    bits = [struct.unpack("<I", struct.pack("<f", v))[0] for v in vec]
    print("counts", c)
    print("bits", ["0x%08x" % b for b in bits])


if __name__ == "__main__":
    main()
