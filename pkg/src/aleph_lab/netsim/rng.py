"""Independent random streams derived from one root seed."""

import hashlib
import random


def derive_seed(seed, role: str, index=0) -> int:
    digest = hashlib.sha256(f"{seed}|{role}|{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def derive_rng(seed, role: str, index=0) -> random.Random:
    return random.Random(derive_seed(seed, role, index))
