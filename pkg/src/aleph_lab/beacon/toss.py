"""Toss: one multicast round of signature shares on a fresh nonce."""

from ..crypto import combine_shares, create_share, hash_bytes, verify_share


class TossSession:
    def __init__(self, me, nonce: bytes, keys, backend):
        self.me = me
        self.nonce = nonce
        self.keys = keys
        self.backend = backend
        self.valid = {}
        self.output = None

    def own_share(self):
        tk = self.keys.tk[self.me]
        if tk is None:
            return None
        return create_share(self.nonce, tk, self.me, self.backend)

    def add(self, share):
        """Record a share; returns the output once f+1 valid shares are in."""
        if self.output is not None or share.signer in self.valid:
            return self.output
        if not verify_share(self.nonce, share, share.signer, self.keys.vk, self.backend):
            return None
        self.valid[share.signer] = share
        if len(self.valid) >= self.keys.f + 1:
            chosen = [self.valid[k] for k in sorted(self.valid)[: self.keys.f + 1]]
            sigma = combine_shares(chosen, self.backend)
            self.output = hash_bytes(self.backend.element_bytes(sigma))
        return self.output
