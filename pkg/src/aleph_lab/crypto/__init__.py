from .group import BACKENDS, STANDARD, TINY, GroupBackend, hash_bytes, hash_to_group
from .threshold import (
    ConfigError,
    Polynomial,
    ReconstructionError,
    SignatureShare,
    ThresholdKeySet,
    combine_shares,
    create_share,
    generate_keys,
    generate_signature,
    lagrange_at_zero,
    verify_share,
    verify_share_with_key,
)
from .encryption import (
    DecodeError,
    DedicatedKeyPairs,
    dec_dedicated,
    dec_dedicated_bytes,
    enc_dedicated,
    encrypt_with_secret,
    prove_pair_secret,
    verify_pair_secret,
)

__all__ = [
    "BACKENDS",
    "STANDARD",
    "TINY",
    "GroupBackend",
    "hash_bytes",
    "hash_to_group",
    "ConfigError",
    "Polynomial",
    "ReconstructionError",
    "SignatureShare",
    "ThresholdKeySet",
    "combine_shares",
    "create_share",
    "generate_keys",
    "generate_signature",
    "lagrange_at_zero",
    "verify_share",
    "verify_share_with_key",
    "DecodeError",
    "DedicatedKeyPairs",
    "dec_dedicated",
    "dec_dedicated_bytes",
    "enc_dedicated",
    "encrypt_with_secret",
    "prove_pair_secret",
    "verify_pair_secret",
]
