"""Public classical channel between Alice and Bob.

Messages carry slot indices, parities and control parameters, never key
bits.  The channel is an in-process queue that keeps a transcript, which
is also what disclosure accounting counts.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np


class MessageKind(enum.Enum):
    SIFT_ANNOUNCE = "sift_announce"
    PARITY_REQUEST = "parity_request"
    PARITY_REPLY = "parity_reply"
    SESSION_CONTROL = "session_control"


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype).ravel()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ClassicalMessage:
    kind: MessageKind
    sender: str
    indices: np.ndarray = field(default_factory=lambda: _frozen_array([], np.int64))
    parities: np.ndarray = field(default_factory=lambda: _frozen_array([], np.uint8))
    control: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))

    @classmethod
    def sift_announce(cls, indices) -> ClassicalMessage:
        return cls(MessageKind.SIFT_ANNOUNCE, "bob", indices=_frozen_array(indices, np.int64))

    @classmethod
    def parity_request(cls, **params) -> ClassicalMessage:
        return cls(MessageKind.PARITY_REQUEST, "bob", control=MappingProxyType(dict(params)))

    @classmethod
    def parity_reply(cls, parities) -> ClassicalMessage:
        parities = _frozen_array(parities, np.uint8)
        if np.any(parities > 1):
            raise ValueError("parities must be 0 or 1")
        return cls(MessageKind.PARITY_REPLY, "alice", parities=parities)

    @classmethod
    def session_control(cls, sender: str, **params) -> ClassicalMessage:
        return cls(MessageKind.SESSION_CONTROL, sender, control=MappingProxyType(dict(params)))


class ClassicalChannel:
    """Ordered message queue with a full transcript."""

    def __init__(self):
        self._pending: deque[ClassicalMessage] = deque()
        self.transcript: list[ClassicalMessage] = []

    def send(self, message: ClassicalMessage) -> None:
        self._pending.append(message)
        self.transcript.append(message)

    def receive(self) -> ClassicalMessage:
        return self._pending.popleft()

    def exchange(self, message: ClassicalMessage) -> ClassicalMessage:
        """Send and immediately deliver; used where both ends live in one process."""
        self.send(message)
        return self.receive()

    def disclosed_parities(self) -> int:
        return sum(m.parities.size for m in self.transcript if m.kind is MessageKind.PARITY_REPLY)
