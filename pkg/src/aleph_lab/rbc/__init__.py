from . import erasure, merkle
from .protocol import (
    ALERT_CHANNEL,
    COMMIT,
    INVALID,
    PREVOTE,
    PROPOSE,
    READY,
    UNIT_CHANNEL,
    WAIT,
    RbcEngine,
    RbcMessage,
    check_size,
    decode_message,
    encode_message,
    make_proposals,
)

__all__ = [
    "erasure",
    "merkle",
    "ALERT_CHANNEL",
    "COMMIT",
    "INVALID",
    "PREVOTE",
    "PROPOSE",
    "READY",
    "UNIT_CHANNEL",
    "WAIT",
    "RbcEngine",
    "RbcMessage",
    "check_size",
    "decode_message",
    "encode_message",
    "make_proposals",
]
