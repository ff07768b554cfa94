"""QR code version 3, error correction level M.

One RS block of 44 data + 26 parity codewords, numeric and byte modes.
The encoder always applies mask 0; the decoder accepts any of the eight
masks and any format word within Hamming distance 3 of a valid one.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .rs import RSDecodeError, rs_decode, rs_encode

VERSION = 3
SIZE = 17 + 4 * VERSION  # 29
DATA_CODEWORDS = 44
EC_CODEWORDS = 26
TOTAL_CODEWORDS = DATA_CODEWORDS + EC_CODEWORDS
DATA_BITS = DATA_CODEWORDS * 8  # 352
ALIGNMENT_CENTERS = (6, 22)
REMAINDER_BITS = 7

NUMERIC_CAPACITY = 101
BYTE_CAPACITY = 42

EC_LEVEL_BITS = {"L": 1, "M": 0, "Q": 3, "H": 2}
_MODE_NUMERIC = 0b0001
_MODE_BYTE = 0b0100

_FORMAT_MASK = 0x5412
_FORMAT_POLY = 0x537


class QRError(ValueError):
    pass


class CapacityError(QRError):
    pass


class FormatInfoError(QRError):
    pass


class QRDecodeError(QRError):
    pass


@dataclass(frozen=True)
class Payload:
    mode: str  # "numeric" | "byte"
    content: str | bytes

    def __post_init__(self):
        if self.mode == "numeric":
            if not isinstance(self.content, str) or not all(c in "0123456789" for c in self.content):
                raise ValueError("numeric payload must be ASCII digits")
        elif self.mode == "byte":
            if isinstance(self.content, str):
                object.__setattr__(self, "content", self.content.encode("utf-8"))
            elif not isinstance(self.content, bytes):
                raise ValueError("byte payload must be bytes")
        else:
            raise ValueError(f"unsupported mode {self.mode!r}")

    @classmethod
    def numeric(cls, digits: str) -> "Payload":
        return cls("numeric", digits)

    @classmethod
    def from_bytes(cls, data: bytes | str) -> "Payload":
        return cls("byte", data)


# ------------------------------------------------------------- layout

def _function_mask() -> np.ndarray:
    f = np.zeros((SIZE, SIZE), dtype=bool)
    # finders with separators
    f[0:9, 0:9] = True
    f[0:9, SIZE - 8 :] = True
    f[SIZE - 8 :, 0:9] = True
    # timing
    f[6, :] = True
    f[:, 6] = True
    # alignment (the only one for version 3 not overlapping a finder)
    c = ALIGNMENT_CENTERS[1]
    f[c - 2 : c + 3, c - 2 : c + 3] = True
    return f


FUNCTION_MASK = _function_mask()
FUNCTION_MASK.setflags(write=False)


def _function_pattern() -> np.ndarray:
    """Dark modules of the fixed patterns; format area left light."""
    m = np.zeros((SIZE, SIZE), dtype=bool)

    def finder(r0, c0):
        for dr in range(7):
            for dc in range(7):
                ring = max(abs(dr - 3), abs(dc - 3))
                m[r0 + dr, c0 + dc] = ring != 2

    finder(0, 0)
    finder(0, SIZE - 7)
    finder(SIZE - 7, 0)
    for i in range(8, SIZE - 8):
        m[6, i] = m[i, 6] = i % 2 == 0
    c = ALIGNMENT_CENTERS[1]
    for dr in range(-2, 3):
        for dc in range(-2, 3):
            m[c + dr, c + dc] = max(abs(dr), abs(dc)) != 1
    m[SIZE - 8, 8] = True  # always-dark module
    return m


FUNCTION_PATTERN = _function_pattern()
FUNCTION_PATTERN.setflags(write=False)


@lru_cache(maxsize=1)
def data_module_order() -> tuple[tuple[int, int], ...]:
    """(row, col) of every data module in codeword bit order."""
    order = []
    right = SIZE - 1
    while right >= 1:
        if right == 6:
            right = 5
        upward = ((right + 1) & 2) == 0
        for vert in range(SIZE):
            row = SIZE - 1 - vert if upward else vert
            for j in range(2):
                col = right - j
                if not FUNCTION_MASK[row, col]:
                    order.append((row, col))
        right -= 2
    return tuple(order)


def codeword_module_map() -> list[list[tuple[int, int]]]:
    """Modules (row, col) occupied by each of the 70 codewords."""
    order = data_module_order()
    return [list(order[8 * i : 8 * i + 8]) for i in range(TOTAL_CODEWORDS)]


def format_positions():
    """Two copies of the 15 format bit positions, index i = bit i (LSB first)."""
    first = [(i, 8) for i in range(6)] + [(7, 8), (8, 8), (8, 7)]
    first += [(8, 14 - i) for i in range(9, 15)]
    second = [(8, SIZE - 1 - i) for i in range(8)]
    second += [(SIZE - 15 + i, 8) for i in range(8, 15)]
    return first, second


def format_word(ec_level: str, mask: int) -> int:
    data = (EC_LEVEL_BITS[ec_level] << 3) | mask
    rem = data
    for _ in range(10):
        rem = (rem << 1) ^ ((rem >> 9) * _FORMAT_POLY)
    return ((data << 10) | rem) ^ _FORMAT_MASK


VALID_FORMATS = {
    format_word(level, mask): (level, mask) for level in EC_LEVEL_BITS for mask in range(8)
}


def mask_pattern(mask: int) -> np.ndarray:
    r, c = np.indices((SIZE, SIZE))
    fns = {
        0: lambda: (r + c) % 2 == 0,
        1: lambda: r % 2 == 0,
        2: lambda: c % 3 == 0,
        3: lambda: (r + c) % 3 == 0,
        4: lambda: (r // 2 + c // 3) % 2 == 0,
        5: lambda: (r * c) % 2 + (r * c) % 3 == 0,
        6: lambda: ((r * c) % 2 + (r * c) % 3) % 2 == 0,
        7: lambda: ((r + c) % 2 + (r * c) % 3) % 2 == 0,
    }
    return fns[mask]() & ~FUNCTION_MASK


# ------------------------------------------------------------- bit stream

class _BitWriter:
    def __init__(self):
        self.bits: list[int] = []

    def put(self, value: int, length: int):
        for i in range(length - 1, -1, -1):
            self.bits.append((value >> i) & 1)


def _segment_bits(p: Payload) -> list[int]:
    w = _BitWriter()
    if p.mode == "numeric":
        digits = p.content
        if len(digits) > NUMERIC_CAPACITY:
            raise CapacityError(f"numeric payload of {len(digits)} digits exceeds {NUMERIC_CAPACITY}")
        w.put(_MODE_NUMERIC, 4)
        w.put(len(digits), 10)
        for i in range(0, len(digits), 3):
            chunk = digits[i : i + 3]
            w.put(int(chunk), {3: 10, 2: 7, 1: 4}[len(chunk)])
    else:
        data = p.content
        if len(data) > BYTE_CAPACITY:
            raise CapacityError(f"byte payload of {len(data)} bytes exceeds {BYTE_CAPACITY}")
        w.put(_MODE_BYTE, 4)
        w.put(len(data), 8)
        for b in data:
            w.put(b, 8)
    return w.bits


def data_codewords(p: Payload) -> list[int]:
    bits = _segment_bits(p)
    if len(bits) > DATA_BITS:
        raise CapacityError("payload exceeds version 3-M capacity")
    bits += [0] * min(4, DATA_BITS - len(bits))
    bits += [0] * (-len(bits) % 8)
    words = [int("".join(map(str, bits[i : i + 8])), 2) for i in range(0, len(bits), 8)]
    pad = (0xEC, 0x11)
    i = 0
    while len(words) < DATA_CODEWORDS:
        words.append(pad[i % 2])
        i += 1
    return words


def _parse_segment(words) -> Payload:
    bits = []
    for w in words:
        bits.extend((w >> i) & 1 for i in range(7, -1, -1))
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(bits):
            raise QRDecodeError("segment runs past the data codewords")
        v = 0
        for b in bits[pos : pos + n]:
            v = (v << 1) | b
        pos += n
        return v

    mode = take(4)
    if mode == _MODE_NUMERIC:
        count = take(10)
        if count > NUMERIC_CAPACITY:
            raise QRDecodeError("numeric count exceeds capacity")
        out = []
        left = count
        while left > 0:
            n = min(3, left)
            v = take({3: 10, 2: 7, 1: 4}[n])
            if v >= 10**n:
                raise QRDecodeError("invalid numeric group")
            out.append(str(v).zfill(n))
            left -= n
        return Payload.numeric("".join(out))
    if mode == _MODE_BYTE:
        count = take(8)
        if count > BYTE_CAPACITY:
            raise QRDecodeError("byte count exceeds capacity")
        return Payload.from_bytes(bytes(take(8) for _ in range(count)))
    raise QRDecodeError(f"unsupported mode indicator {mode:04b}")


# ------------------------------------------------------------- symbol

def qr_encode(p: Payload, mask: int = 0) -> np.ndarray:
    """Encode ``p`` as a 29x29 boolean module matrix (True = dark)."""
    words = rs_encode(data_codewords(p), EC_CODEWORDS)
    m = FUNCTION_PATTERN.copy()
    order = data_module_order()
    for i, (r, c) in enumerate(order):
        if i < 8 * TOTAL_CODEWORDS:
            m[r, c] = bool((words[i >> 3] >> (7 - (i & 7))) & 1)
    m ^= mask_pattern(mask)
    fmt = format_word("M", mask)
    for copy in format_positions():
        for i, (r, c) in enumerate(copy):
            m[r, c] = bool((fmt >> i) & 1)
    return m


def read_format(m: np.ndarray) -> tuple[str, int]:
    """Best (ec_level, mask) from either format copy, distance <= 3."""
    best = None
    for copy in format_positions():
        word = 0
        for i, (r, c) in enumerate(copy):
            word |= int(bool(m[r, c])) << i
        for valid, info in VALID_FORMATS.items():
            d = bin(word ^ valid).count("1")
            if best is None or d < best[0]:
                best = (d, info)
    if best is None or best[0] > 3:
        raise FormatInfoError("format information unreadable")
    return best[1]


def read_codewords(m: np.ndarray, mask: int) -> list[int]:
    m = np.asarray(m, dtype=bool) ^ mask_pattern(mask)
    words = [0] * TOTAL_CODEWORDS
    for i, (r, c) in enumerate(data_module_order()[: 8 * TOTAL_CODEWORDS]):
        if m[r, c]:
            words[i >> 3] |= 1 << (7 - (i & 7))
    return words


def qr_decode(m) -> Payload:
    m = np.asarray(m, dtype=bool)
    if m.shape != (SIZE, SIZE):
        raise QRError(f"expected a {SIZE}x{SIZE} symbol, got {m.shape}")
    level, mask = read_format(m)
    if level != "M":
        raise FormatInfoError(f"unsupported error correction level {level}")
    try:
        data = rs_decode(read_codewords(m, mask), EC_CODEWORDS)
    except RSDecodeError as exc:
        raise QRDecodeError(f"Reed-Solomon failure: {exc}") from exc
    return _parse_segment(data)
