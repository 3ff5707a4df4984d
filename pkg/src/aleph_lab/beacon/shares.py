"""Encoding of the signature-share section carried by units and toss messages."""

from ..crypto import SignatureShare
from ..wire import Reader, Writer

DEALER_KEYSET = 0xFFFF


def dealer_nonce(r: int) -> bytes:
    return b"%d" % r


def multicoin_nonce(i: int, r: int) -> bytes:
    return b"%d|%d" % (i, r)


def encode_shares(entries, backend) -> bytes:
    """entries: iterable of (nonce, keyset, SignatureShare)."""
    w = Writer().u32(len(entries))
    for nonce, keyset, s in entries:
        c, z = s.proof
        w.blob(nonce).u16(keyset).u16(s.signer)
        w.raw(backend.element_bytes(s.value))
        w.raw(backend.scalar_bytes(c)).raw(backend.scalar_bytes(z))
    return w.getvalue()


def decode_shares(data: bytes, backend) -> list:
    r = Reader(data)
    out = []
    for _ in range(r.u32()):
        nonce = r.blob()
        keyset = r.u16()
        signer = r.u16()
        value = backend.element_from_bytes(r.raw(backend.element_len))
        c = backend.scalar_from_bytes(r.raw(backend.scalar_len))
        z = backend.scalar_from_bytes(r.raw(backend.scalar_len))
        out.append((nonce, keyset, SignatureShare(signer, value, (c, z))))
    r.done()
    return out


def share_size(backend, nonce_len: int = 8) -> int:
    return 4 + nonce_len + 4 + backend.element_len + 2 * backend.scalar_len
