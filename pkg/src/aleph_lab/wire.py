"""Length-prefixed binary encoding helpers shared by the wire formats."""

import struct


class DecodeError(ValueError):
    pass


class Writer:
    def __init__(self):
        self.parts = []

    def u8(self, v):
        self.parts.append(struct.pack(">B", v))
        return self

    def u16(self, v):
        self.parts.append(struct.pack(">H", v))
        return self

    def u32(self, v):
        self.parts.append(struct.pack(">I", v))
        return self

    def raw(self, b):
        self.parts.append(b)
        return self

    def blob(self, b):
        self.parts.append(struct.pack(">I", len(b)))
        self.parts.append(b)
        return self

    def getvalue(self) -> bytes:
        return b"".join(self.parts)


class Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def _take(self, n):
        if n < 0 or self.pos + n > len(self.data):
            raise DecodeError("truncated input")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self):
        return self._take(1)[0]

    def u16(self):
        return struct.unpack(">H", self._take(2))[0]

    def u32(self):
        return struct.unpack(">I", self._take(4))[0]

    def raw(self, n):
        return self._take(n)

    def blob(self):
        return self._take(self.u32())

    def done(self):
        if self.pos != len(self.data):
            raise DecodeError("trailing bytes")
