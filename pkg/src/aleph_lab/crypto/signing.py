"""Schnorr signatures used to authenticate units."""

from functools import lru_cache

from .group import GroupBackend


def keygen(rng, backend: GroupBackend):
    sk = 1 + rng.randrange(backend.q - 1)
    return sk, backend.exp(backend.g, sk)


def sign(sk: int, msg: bytes, backend: GroupBackend) -> bytes:
    k = backend.hash_to_scalar(b"schnorr-nonce", backend.scalar_bytes(sk), msg) or 1
    r = backend.exp(backend.g, k)
    pk = backend.exp(backend.g, sk)
    c = _challenge(backend, r, pk, msg)
    s = (k + c * sk) % backend.q
    return backend.scalar_bytes(c) + backend.scalar_bytes(s)


@lru_cache(maxsize=1 << 16)
def verify(pk: int, msg: bytes, signature: bytes, backend: GroupBackend) -> bool:
    n = backend.scalar_len
    if len(signature) != 2 * n:
        return False
    c = int.from_bytes(signature[:n], "big")
    s = int.from_bytes(signature[n:], "big")
    if c >= backend.q or s >= backend.q:
        return False
    r = backend.mul(backend.exp(backend.g, s), backend.exp(pk, backend.q - c))
    return c == _challenge(backend, r, pk, msg)


def _challenge(backend, r, pk, msg) -> int:
    eb = backend.element_bytes
    return backend.hash_to_scalar(b"schnorr", eb(r), eb(pk), msg)
