"""Deterministic encryption over dedicated per-pair key pairs.

Every ordered pair (k -> i) owns two key pairs: a recipient pair held by i
and a sender pair held by k. Both ends derive the same static Diffie-Hellman
secret, and the ciphertext is the plaintext XOR a keystream hashed from that
secret. XOR makes every ciphertext the encryption of its own decryption, and
a recipient can publish the pair secret with a DLEQ proof so anyone can
re-encrypt a revealed plaintext and compare.
"""

import hashlib
from dataclasses import dataclass

from .group import GroupBackend


class DecodeError(ValueError):
    pass


@dataclass(frozen=True)
class DedicatedKeyPairs:
    backend: GroupBackend
    recipient_sk: dict  # (k, i) -> scalar, held by i
    recipient_pk: dict
    sender_sk: dict  # (k, i) -> scalar, held by k
    sender_pk: dict

    @classmethod
    def generate(cls, n: int, rng, backend: GroupBackend):
        rsk, rpk, ssk, spk = {}, {}, {}, {}
        for k in range(n):
            for i in range(n):
                a = 1 + rng.randrange(backend.q - 1)
                b = 1 + rng.randrange(backend.q - 1)
                rsk[(k, i)], rpk[(k, i)] = a, backend.exp(backend.g, a)
                ssk[(k, i)], spk[(k, i)] = b, backend.exp(backend.g, b)
        return cls(backend, rsk, rpk, ssk, spk)


def _keystream(backend: GroupBackend, shared: int, k: int, i: int, length: int) -> bytes:
    out = b""
    block = 0
    seed = backend.element_bytes(shared) + b"%d>%d" % (k, i) + length.to_bytes(4, "big")
    while len(out) < length:
        out += hashlib.sha256(seed + block.to_bytes(4, "big")).digest()
        block += 1
    return out[:length]


def _xor(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


def pair_secret_for_sender(keys: DedicatedKeyPairs, k: int, i: int) -> int:
    return keys.backend.exp(keys.recipient_pk[(k, i)], keys.sender_sk[(k, i)])


def pair_secret_for_recipient(keys: DedicatedKeyPairs, k: int, i: int) -> int:
    return keys.backend.exp(keys.sender_pk[(k, i)], keys.recipient_sk[(k, i)])


def encrypt_with_secret(backend, shared: int, k: int, i: int, plaintext: bytes) -> bytes:
    return _xor(plaintext, _keystream(backend, shared, k, i, len(plaintext)))


def enc_dedicated(keys: DedicatedKeyPairs, k: int, i: int, plaintext: int) -> bytes:
    backend = keys.backend
    shared = pair_secret_for_sender(keys, k, i)
    return encrypt_with_secret(backend, shared, k, i, backend.scalar_bytes(plaintext))


def dec_dedicated_bytes(keys: DedicatedKeyPairs, k: int, i: int, ciphertext: bytes) -> bytes:
    backend = keys.backend
    if len(ciphertext) != backend.scalar_len:
        raise DecodeError("ciphertext length does not match scalar length")
    shared = pair_secret_for_recipient(keys, k, i)
    return encrypt_with_secret(backend, shared, k, i, ciphertext)


def dec_dedicated(keys: DedicatedKeyPairs, k: int, i: int, ciphertext: bytes) -> int:
    return int.from_bytes(dec_dedicated_bytes(keys, k, i, ciphertext), "big")


def prove_pair_secret(keys: DedicatedKeyPairs, k: int, i: int):
    """Recipient i reveals the pair secret with a proof that it is
    sender_pk^{sk} for the sk behind recipient_pk."""
    b = keys.backend
    sk = keys.recipient_sk[(k, i)]
    base = keys.sender_pk[(k, i)]
    shared = b.exp(base, sk)
    w = b.hash_to_scalar(b"pair-nonce", b.scalar_bytes(sk), b"%d>%d" % (k, i))
    a1, a2 = b.exp(b.g, w), b.exp(base, w)
    c = _pair_challenge(b, keys.recipient_pk[(k, i)], base, shared, a1, a2)
    return shared, (c, (w + c * sk) % b.q)


def verify_pair_secret(backend, recipient_pk: int, sender_pk: int, shared: int, proof) -> bool:
    c, z = proof
    q = backend.q
    if not (0 <= c < q and 0 <= z < q) or not backend.is_element(shared):
        return False
    a1 = backend.mul(backend.exp(backend.g, z), backend.exp(recipient_pk, q - c))
    a2 = backend.mul(backend.exp(sender_pk, z), backend.exp(shared, q - c))
    return c == _pair_challenge(backend, recipient_pk, sender_pk, shared, a1, a2)


def _pair_challenge(b, pk, base, shared, a1, a2) -> int:
    eb = b.element_bytes
    return b.hash_to_scalar(b"pair", eb(b.g), eb(pk), eb(base), eb(shared), eb(a1), eb(a2))
