"""Key boxes and the votes cast on them."""

from dataclasses import dataclass
from functools import lru_cache

from ..crypto import (
    Polynomial,
    dec_dedicated,
    enc_dedicated,
    encrypt_with_secret,
    prove_pair_secret,
    verify_pair_secret,
)
from ..wire import DecodeError, Reader, Writer

OK, BAD = 1, 0


@dataclass(frozen=True)
class KeyBox:
    dealer: int
    commitment: tuple  # g^{a_0}, ..., g^{a_f}
    encrypted_keys: tuple  # ciphertext for node i at position i

    def encode(self, backend) -> bytes:
        w = Writer().u16(self.dealer).u8(len(self.commitment))
        for c in self.commitment:
            w.raw(backend.element_bytes(c))
        w.u16(len(self.encrypted_keys))
        for e in self.encrypted_keys:
            w.blob(e)
        return w.getvalue()

    @classmethod
    def decode(cls, data: bytes, backend):
        r = Reader(data)
        dealer = r.u16()
        commitment = tuple(
            backend.element_from_bytes(r.raw(backend.element_len)) for _ in range(r.u8())
        )
        keys = tuple(r.blob() for _ in range(r.u16()))
        r.done()
        return cls(dealer, commitment, keys)

    def well_formed(self, n: int, f: int, backend) -> bool:
        return (
            len(self.commitment) == f + 1
            and len(self.encrypted_keys) == n
            and all(backend.is_element(c) for c in self.commitment)
            and all(len(e) == backend.scalar_len for e in self.encrypted_keys)
        )

    def vk(self, i: int, backend) -> int:
        return derived_vk(self.commitment, i, backend)


@lru_cache(maxsize=1 << 16)
def derived_vk(commitment: tuple, i: int, backend) -> int:
    """Verification key of node i (evaluation point i+1) from a commitment."""
    x = i + 1
    acc = backend.identity
    power = 1
    for c in commitment:
        acc = backend.mul(acc, backend.exp(c, power))
        power = power * x % backend.q
    return acc


def build_key_box(k: int, n: int, f: int, pair_keys, rng, backend):
    """Deal a fresh key set; returns the box and the dealer's own tossing key.

    The polynomial is dropped on return; only the dealer's own key survives.
    """
    poly = Polynomial.random(f, backend.q, rng)
    commitment = tuple(backend.exp(backend.g, a) for a in poly.coefficients)
    encrypted = tuple(enc_dedicated(pair_keys, k, i, poly(i + 1)) for i in range(n))
    return KeyBox(k, commitment, encrypted), poly(k + 1)


@dataclass(frozen=True)
class KeyVote:
    voter: int
    dealer: int
    verdict: int
    plaintext: bytes = b""  # revealed key bytes for a bad verdict
    pair_secret: int = 0
    proof: tuple = (0, 0)


def decrypt_key(box: KeyBox, i: int, pair_keys) -> int:
    return dec_dedicated(pair_keys, box.dealer, i, box.encrypted_keys[i])


def vote_key_box(i: int, box: KeyBox, pair_keys, backend) -> KeyVote:
    tk = decrypt_key(box, i, pair_keys)
    if tk < backend.q and backend.exp(backend.g, tk) == box.vk(i, backend):
        return KeyVote(i, box.dealer, OK)
    shared, proof = prove_pair_secret(pair_keys, box.dealer, i)
    plaintext = tk.to_bytes(backend.scalar_len, "big")
    return KeyVote(i, box.dealer, BAD, plaintext, shared, proof)


def check_vote(vote: KeyVote, box: KeyBox, recipient_pk, sender_pk, backend) -> bool:
    """A bad verdict must expose a plaintext that re-encrypts to the box's
    ciphertext and fails the key check. Ok verdicts cannot be checked."""
    if vote.verdict == OK:
        return True
    if vote.verdict != BAD or len(vote.plaintext) != backend.scalar_len:
        return False
    k, i = box.dealer, vote.voter
    if not verify_pair_secret(backend, recipient_pk, sender_pk, vote.pair_secret, vote.proof):
        return False
    if encrypt_with_secret(backend, vote.pair_secret, k, i, vote.plaintext) != box.encrypted_keys[i]:
        return False
    tk = int.from_bytes(vote.plaintext, "big")
    return not (tk < backend.q and backend.exp(backend.g, tk) == box.vk(i, backend))


def encode_votes(votes, backend) -> bytes:
    w = Writer().u16(len(votes))
    for v in votes:
        w.u16(v.dealer).u8(v.verdict)
        if v.verdict == BAD:
            w.raw(v.plaintext).raw(backend.element_bytes(v.pair_secret))
            w.raw(backend.scalar_bytes(v.proof[0])).raw(backend.scalar_bytes(v.proof[1]))
    return w.getvalue()


def decode_votes(data: bytes, voter: int, backend) -> list:
    r = Reader(data)
    out = []
    for _ in range(r.u16()):
        dealer = r.u16()
        verdict = r.u8()
        if verdict == OK:
            out.append(KeyVote(voter, dealer, OK))
        elif verdict == BAD:
            plaintext = r.raw(backend.scalar_len)
            shared = backend.element_from_bytes(r.raw(backend.element_len))
            c = backend.scalar_from_bytes(r.raw(backend.scalar_len))
            z = backend.scalar_from_bytes(r.raw(backend.scalar_len))
            out.append(KeyVote(voter, dealer, BAD, plaintext, shared, (c, z)))
        else:
            raise DecodeError("unknown verdict")
    r.done()
    return out
