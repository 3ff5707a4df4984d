"""Binary Merkle tree over erasure shares.

Leaves are hash(index || share); an odd level duplicates its last node.
"""

from ..crypto import hash_bytes


def leaf_hash(index: int, share: bytes) -> bytes:
    return hash_bytes(b"\x00" + index.to_bytes(4, "big") + share)


def _node(a: bytes, b: bytes) -> bytes:
    return hash_bytes(b"\x01" + a + b)


def build(shares) -> list:
    """All levels, leaves first; the root is levels[-1][0]."""
    level = [leaf_hash(i, s) for i, s in enumerate(shares)]
    levels = [level]
    while len(level) > 1:
        if len(level) % 2:
            level = level + [level[-1]]
            levels[-1] = level
        level = [_node(level[i], level[i + 1]) for i in range(0, len(level), 2)]
        levels.append(level)
    return levels


def root(shares) -> bytes:
    return build(shares)[-1][0]


def branch(levels, index: int) -> tuple:
    path = []
    for level in levels[:-1]:
        path.append(level[index ^ 1])
        index //= 2
    return tuple(path)


def verify(root_hash: bytes, index: int, share: bytes, path, n: int) -> bool:
    if not 0 <= index < n:
        return False
    depth = 0
    size = n
    while size > 1:
        size = (size + 1) // 2
        depth += 1
    if len(path) != depth:
        return False
    h = leaf_hash(index, share)
    for sib in path:
        h = _node(h, sib) if index % 2 == 0 else _node(sib, h)
        index //= 2
    return h == root_hash
