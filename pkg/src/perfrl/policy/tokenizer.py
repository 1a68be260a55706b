"""Byte-level tokenizer: 256 byte tokens plus BOS, EOS, PAD.

Round-trips arbitrary byte strings exactly. Program text (str) goes through
UTF-8 with surrogateescape so non-UTF-8 candidate bytes survive decode/encode.
"""

from __future__ import annotations


class ByteTokenizer:
    BOS = 256
    EOS = 257
    PAD = 258
    vocab_size = 259

    def encode_bytes(self, data: bytes) -> list[int]:
        return list(data)

    def decode_bytes(self, ids) -> bytes:
        # non-byte ids (BOS/EOS/PAD) are dropped
        return bytes(i for i in ids if 0 <= i < 256)

    def encode(self, text: str) -> list[int]:
        return self.encode_bytes(text.encode("utf-8", "surrogateescape"))

    def decode(self, ids) -> str:
        return self.decode_bytes(ids).decode("utf-8", "surrogateescape")
