"""Threshold signatures over a prime-order group.

Node i (0-based) holds the polynomial evaluation at x = i + 1. Shares carry
a Chaum-Pedersen proof that they use the same exponent as the node's
verification key, which stands in for a DDH check.
"""

from dataclasses import dataclass
from functools import lru_cache

from .group import GroupBackend, hash_to_group


class ConfigError(ValueError):
    pass


class ReconstructionError(ValueError):
    pass


@dataclass(frozen=True)
class Polynomial:
    coefficients: tuple
    q: int

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x: int) -> int:
        acc = 0
        for c in reversed(self.coefficients):
            acc = (acc * x + c) % self.q
        return acc

    @classmethod
    def random(cls, degree: int, q: int, rng, constant=None):
        coeffs = [rng.randrange(q) for _ in range(degree + 1)]
        if constant is not None:
            coeffs = [constant % q] + [0] * degree
        return cls(tuple(coeffs), q)


@dataclass(frozen=True)
class ThresholdKeySet:
    tk: tuple  # per node, None when not held
    vk: tuple
    joint_vk: int
    f: int

    @property
    def n(self) -> int:
        return len(self.vk)

    def holds_correct_key(self, i: int, backend: GroupBackend) -> bool:
        return self.tk[i] is not None and backend.exp(backend.g, self.tk[i]) == self.vk[i]

    def for_node(self, i: int) -> "ThresholdKeySet":
        """Public keys plus only node i's tossing key."""
        tk = tuple(t if j == i else None for j, t in enumerate(self.tk))
        return ThresholdKeySet(tk, self.vk, self.joint_vk, self.f)


@dataclass(frozen=True)
class SignatureShare:
    signer: int
    value: int
    proof: tuple  # (challenge, response)


def generate_keys(n: int, f: int, rng, backend: GroupBackend, constant=None):
    if n != 3 * f + 1:
        raise ConfigError(f"need n = 3f+1, got n={n}, f={f}")
    poly = Polynomial.random(f, backend.q, rng, constant)
    tk = tuple(poly(i + 1) for i in range(n))
    vk = tuple(backend.exp(backend.g, t) for t in tk)
    joint = backend.exp(backend.g, poly(0))
    return poly, ThresholdKeySet(tk, vk, joint, f)


def lagrange_at_zero(indices, q: int) -> list:
    """Coefficients l_j with sum l_j * A(x_j) = A(0), for 1-based points."""
    xs = list(indices)
    if len(set(xs)) != len(xs):
        raise ValueError("duplicate interpolation indices")
    return list(_lagrange(tuple(xs), q))


@lru_cache(maxsize=4096)
def _lagrange(xs: tuple, q: int) -> tuple:
    out = []
    for j, xj in enumerate(xs):
        num, den = 1, 1
        for m, xm in enumerate(xs):
            if m != j:
                num = num * xm % q
                den = den * (xm - xj) % q
        out.append(num * pow(den, -1, q) % q)
    return tuple(out)


def _dleq_challenge(backend, h, vk, value, a1, a2) -> int:
    eb = backend.element_bytes
    return backend.hash_to_scalar(
        b"dleq", eb(backend.g), eb(h), eb(vk), eb(value), eb(a1), eb(a2)
    )


def create_share(m: bytes, tk: int, i: int, backend: GroupBackend) -> SignatureShare:
    h = hash_to_group(m, backend)
    value = backend.exp(h, tk)
    vk = backend.exp(backend.g, tk)
    # Deterministic nonce: same (m, tk) gives byte-identical shares.
    w = backend.hash_to_scalar(b"dleq-nonce", backend.scalar_bytes(tk % backend.q), m)
    a1 = backend.exp(backend.g, w)
    a2 = backend.exp(h, w)
    c = _dleq_challenge(backend, h, vk, value, a1, a2)
    z = (w + c * tk) % backend.q
    return SignatureShare(i, value, (c, z))


def verify_share(m: bytes, s: SignatureShare, i: int, vk_list, backend: GroupBackend) -> bool:
    if s.signer != i or not 0 <= i < len(vk_list):
        return False
    return _verify_cached(m, s.value, s.proof, vk_list[i], backend)


def verify_share_with_key(m: bytes, s: SignatureShare, vk: int, backend: GroupBackend) -> bool:
    """Check a share against an explicitly given verification key."""
    return _verify_cached(m, s.value, s.proof, vk, backend)


@lru_cache(maxsize=1 << 18)
def _verify_cached(m: bytes, value: int, proof: tuple, vk: int, backend: GroupBackend) -> bool:
    c, z = proof
    q = backend.q
    if not (0 <= c < q and 0 <= z < q):
        return False
    if not backend.is_element(value) or not backend.is_element(vk):
        return False
    h = hash_to_group(m, backend)
    a1 = backend.mul(backend.exp(backend.g, z), backend.exp(vk, q - c))
    a2 = backend.mul(backend.exp(h, z), backend.exp(value, q - c))
    return c == _dleq_challenge(backend, h, vk, value, a1, a2)


def combine_shares(shares, backend: GroupBackend) -> int:
    """Interpolate in the exponent from exactly the given shares (unchecked)."""
    signers = tuple(s.signer + 1 for s in shares)
    coeffs = lagrange_at_zero(signers, backend.q)
    acc = backend.identity
    for s, l in zip(shares, coeffs):
        acc = backend.mul(acc, backend.exp(s.value, l))
    return acc


def generate_signature(m: bytes, shares, vk_list, f: int, backend: GroupBackend) -> int:
    by_signer = {}
    for s in shares:
        if not verify_share(m, s, s.signer, vk_list, backend):
            raise ReconstructionError(f"share from node {s.signer} does not verify")
        by_signer.setdefault(s.signer, s)
    if len(by_signer) < f + 1:
        raise ReconstructionError(f"need {f + 1} shares, got {len(by_signer)}")
    chosen = [by_signer[k] for k in sorted(by_signer)[: f + 1]]
    return combine_shares(chosen, backend)
