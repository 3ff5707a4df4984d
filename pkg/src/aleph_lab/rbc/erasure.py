"""Systematic Reed-Solomon coding over GF(2^8).

Any k of the n shares recover the blob. The blob is length-prefixed and
zero-padded to a multiple of k before splitting.
"""

from functools import lru_cache

import numpy as np

_PRIM = 0x11D


def _tables():
    exp = np.zeros(512, dtype=np.uint8)
    log = np.zeros(256, dtype=np.int32)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & 0x100:
            x ^= _PRIM
    exp[255:510] = exp[:255]
    mul = np.zeros((256, 256), dtype=np.uint8)
    for a in range(1, 256):
        mul[a, 1:] = exp[(log[a] + log[1:256]) % 255]
    return exp, log, mul


EXP, LOG, MUL = _tables()


def gf_mul(a: int, b: int) -> int:
    return int(MUL[a, b])


def gf_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("inverse of zero in GF(256)")
    return int(EXP[255 - LOG[a]])


def _mat_inv(m):
    """Gauss-Jordan inverse of a small square matrix over GF(256)."""
    k = len(m)
    a = [list(row) + [1 if i == j else 0 for j in range(k)] for i, row in enumerate(m)]
    for col in range(k):
        piv = next(r for r in range(col, k) if a[r][col])
        a[col], a[piv] = a[piv], a[col]
        inv = gf_inv(a[col][col])
        a[col] = [gf_mul(v, inv) for v in a[col]]
        for r in range(k):
            if r != col and a[r][col]:
                factor = a[r][col]
                a[r] = [v ^ gf_mul(factor, w) for v, w in zip(a[r], a[col])]
    return [row[k:] for row in a]


def _vandermonde(rows, k):
    out = []
    for x in rows:
        row, acc = [], 1
        for _ in range(k):
            row.append(acc)
            acc = gf_mul(acc, x)
        out.append(row)
    return out


@lru_cache(maxsize=None)
def generator_matrix(k: int, n: int) -> tuple:
    """n x k matrix whose first k rows are the identity."""
    if not 1 <= k <= n <= 255:
        raise ValueError("need 1 <= k <= n <= 255")
    v = _vandermonde(range(n), k)
    top_inv = _mat_inv(v[:k])
    g = []
    for row in v:
        g.append(tuple(_dot(row, [top_inv[t][c] for t in range(k)]) for c in range(k)))
    return tuple(g)


def _dot(a, b):
    acc = 0
    for x, y in zip(a, b):
        acc ^= gf_mul(x, y)
    return acc


def _combine(coeffs, rows):
    out = np.zeros(rows.shape[1], dtype=np.uint8)
    for c, row in zip(coeffs, rows):
        if c:
            out ^= MUL[c][row]
    return out


def encode(blob: bytes, k: int, n: int) -> list:
    g = generator_matrix(k, n)
    data = len(blob).to_bytes(4, "big") + blob
    pad = (-len(data)) % k
    data += b"\0" * pad
    rows = np.frombuffer(data, dtype=np.uint8).reshape(k, -1)
    shares = [rows[i].tobytes() for i in range(k)]
    for j in range(k, n):
        shares.append(_combine(g[j], rows).tobytes())
    return shares


@lru_cache(maxsize=1024)
def _decode_matrix(idx: tuple, k: int, n: int):
    g = generator_matrix(k, n)
    return _mat_inv([g[i] for i in idx])


def decode(shares: dict, k: int, n: int) -> bytes:
    """Recover the blob from a mapping share index -> share bytes."""
    if len(shares) < k:
        raise ValueError(f"need {k} shares, got {len(shares)}")
    idx = tuple(sorted(shares)[:k])
    lengths = {len(shares[i]) for i in idx}
    if len(lengths) != 1:
        raise ValueError("shares have different lengths")
    if any(not 0 <= i < n for i in idx):
        raise ValueError("share index out of range")
    rows = np.stack([np.frombuffer(shares[i], dtype=np.uint8) for i in idx])
    inv = _decode_matrix(idx, k, n)
    data = b"".join(_combine(inv[t], rows).tobytes() for t in range(k))
    size = int.from_bytes(data[:4], "big")
    if size > len(data) - 4:
        raise ValueError("decoded length prefix out of range")
    return data[4 : 4 + size]
