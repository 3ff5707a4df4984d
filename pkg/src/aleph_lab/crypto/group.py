"""Prime-order subgroup of Z_p* for a safe prime p = 2q + 1.

Elements are plain ints in [1, p). Scalars are ints in [0, q).
"""

import hashlib
from dataclasses import dataclass
from functools import cached_property

import gmpy2


def hash_bytes(data: bytes) -> bytes:
    """256-bit digest used everywhere a protocol hash is needed."""
    return hashlib.sha256(data).digest()


@dataclass(frozen=True)
class GroupBackend:
    name: str
    p: int
    q: int
    g: int = 4

    @cached_property
    def element_len(self) -> int:
        return (self.p.bit_length() + 7) // 8

    @cached_property
    def scalar_len(self) -> int:
        return (self.q.bit_length() + 7) // 8

    @property
    def identity(self) -> int:
        return 1

    @property
    def lam(self) -> int:
        return 256

    def exp(self, base: int, e: int) -> int:
        return int(gmpy2.powmod(base, e % self.q, self.p))

    def mul(self, a: int, b: int) -> int:
        return a * b % self.p

    def is_element(self, x: int) -> bool:
        # Quadratic residues are exactly the order-q subgroup when p = 2q + 1.
        return 0 < x < self.p and gmpy2.legendre(x, self.p) == 1

    def element_bytes(self, x: int) -> bytes:
        return x.to_bytes(self.element_len, "big")

    def scalar_bytes(self, s: int) -> bytes:
        return s.to_bytes(self.scalar_len, "big")

    def element_from_bytes(self, data: bytes) -> int:
        if len(data) != self.element_len:
            raise ValueError("bad element length")
        return int.from_bytes(data, "big")

    def scalar_from_bytes(self, data: bytes) -> int:
        if len(data) != self.scalar_len:
            raise ValueError("bad scalar length")
        return int.from_bytes(data, "big")

    def hash_to_scalar(self, *parts: bytes) -> int:
        h = hashlib.sha256()
        for part in parts:
            h.update(len(part).to_bytes(4, "big"))
            h.update(part)
        return int.from_bytes(h.digest(), "big") % self.q

    def random_scalar(self, rng) -> int:
        return rng.randrange(self.q)


def hash_to_group(m: bytes, backend: GroupBackend) -> int:
    """Map bytes into the order-q subgroup without revealing a discrete log.

    Rejection-sample an integer in [1, p-1] from a counter-mode digest and
    square it.
    """
    bits = backend.p.bit_length()
    nbytes = (bits + 7) // 8
    ctr = 0
    while True:
        stream = b""
        block = 0
        while len(stream) < nbytes:
            stream += hashlib.sha256(
                b"h2g" + ctr.to_bytes(4, "big") + block.to_bytes(4, "big") + m
            ).digest()
            block += 1
        x = int.from_bytes(stream[:nbytes], "big") >> (8 * nbytes - bits)
        if 1 <= x <= backend.p - 1:
            return x * x % backend.p
        ctr += 1


TINY = GroupBackend(name="tiny", p=130787, q=65393)

STANDARD = GroupBackend(
    name="standard",
    q=0xEE2294844CB05388BACEB353569B71E43F9369B803B4674425A47DFDF975CDED,
    p=2 * 0xEE2294844CB05388BACEB353569B71E43F9369B803B4674425A47DFDF975CDED + 1,
)

BACKENDS = {b.name: b for b in (TINY, STANDARD)}
