"""Secret bits from a threshold key set handed out at genesis.

Every unit of round r carries its creator's share of the signature on the
nonce "r". Once a unit of round r+1 exists locally, at least 2f+1 round-r
units do too, so f+1 valid shares are available and the hash of the
reconstructed signature is the secret.
"""

from ..chdag import SHARES
from ..crypto import ReconstructionError, combine_shares, create_share, hash_bytes, verify_share
from ..wire import DecodeError
from .shares import DEALER_KEYSET, dealer_nonce, decode_shares, encode_shares


class InsufficientShares(AssertionError):
    """A complete round lacked f+1 valid shares; impossible for valid DAGs."""


class DealerBeacon:
    def __init__(self, me, keys, dag, backend, required=True):
        self.me = me
        self.keys = keys
        self.dag = dag
        self.backend = backend
        self.required = required  # False once keys may be missing at up to f nodes
        self._secrets = {}

    @property
    def holds_key(self) -> bool:
        return self.keys.tk[self.me] is not None

    def sections(self, rnd: int, parents=()) -> list:
        if not self.holds_key:
            return []
        nonce = dealer_nonce(rnd)
        share = create_share(nonce, self.keys.tk[self.me], self.me, self.backend)
        return [(SHARES, encode_shares([(nonce, DEALER_KEYSET, share)], self.backend))]

    def validate(self, u, dag) -> list:
        data = u.section(SHARES)
        if data is None:
            return ["missing_share"] if self.required else []
        try:
            entries = decode_shares(data, self.backend)
        except DecodeError:
            return ["share_encoding"]
        if len(entries) != 1:
            return ["share_count"]
        nonce, keyset, share = entries[0]
        if nonce != dealer_nonce(u.round) or keyset != DEALER_KEYSET or share.signer != u.creator:
            return ["share_nonce"]
        if not verify_share(nonce, share, u.creator, self.keys.vk, self.backend):
            return ["share_invalid"]
        return []

    def unit_share(self, u):
        data = u.section(SHARES)
        if data is None:
            return None
        return decode_shares(data, self.backend)[0][2]

    def secret_bits(self, i, r):
        """Secret for round r; the node index is irrelevant with one key set."""
        cached = self._secrets.get(r)
        if cached is not None:
            return cached
        if self.dag.height < r + 1:
            return None
        shares = {}
        for u in self.dag.units_at_round(r):
            s = self.unit_share(u)
            if s is not None:
                shares.setdefault(s.signer, s)
        f = self.keys.f
        if len(shares) < f + 1:
            if self.required:
                raise InsufficientShares(f"round {r}: {len(shares)} shares")
            return None
        chosen = [shares[k] for k in sorted(shares)[: f + 1]]
        sigma = combine_shares(chosen, self.backend)
        out = hash_bytes(self.backend.element_bytes(sigma))
        self._secrets[r] = out
        return out


def signature_from_shares(nonce, shares, vk, f, backend):
    """Verify and combine; raises ReconstructionError when short."""
    good = {}
    for s in shares:
        if verify_share(nonce, s, s.signer, vk, backend):
            good.setdefault(s.signer, s)
    if len(good) < f + 1:
        raise ReconstructionError(f"need {f + 1} valid shares, got {len(good)}")
    return combine_shares([good[k] for k in sorted(good)[: f + 1]], backend)
