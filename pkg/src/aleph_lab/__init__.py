"""Aleph atomic broadcast, Quick-Aleph and a trustless randomness beacon in a deterministic simulator."""

__version__ = "0.1.0"
