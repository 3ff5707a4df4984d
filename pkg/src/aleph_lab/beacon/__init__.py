from .dealer import DealerBeacon, InsufficientShares, signature_from_shares
from .keybox import BAD, OK, KeyBox, KeyVote, build_key_box, check_vote, derived_vk, vote_key_box
from .shares import DEALER_KEYSET, dealer_nonce, decode_shares, encode_shares, multicoin_nonce
from .toss import TossSession
from .trustless import SHARE_ROUND, VOTE_ROUND, TrustlessBeacon

__all__ = [
    "DealerBeacon",
    "InsufficientShares",
    "signature_from_shares",
    "BAD",
    "OK",
    "KeyBox",
    "KeyVote",
    "build_key_box",
    "check_vote",
    "derived_vk",
    "vote_key_box",
    "DEALER_KEYSET",
    "dealer_nonce",
    "decode_shares",
    "encode_shares",
    "multicoin_nonce",
    "TossSession",
    "SHARE_ROUND",
    "VOTE_ROUND",
    "TrustlessBeacon",
]
