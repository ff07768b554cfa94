"""Payload-bearing visual objects: QR v3-M symbols, 5x7 text, bitmaps."""
from .font import UnsupportedCharacterError, glyph_bitmap, rasterize_text
from .objects import prepare_image_object, rectangle_object, symbol_image, synthetic_floor_plan
from .qr import (
    BYTE_CAPACITY,
    NUMERIC_CAPACITY,
    CapacityError,
    FormatInfoError,
    Payload,
    QRDecodeError,
    QRError,
    qr_decode,
    qr_encode,
)
from .rs import RSDecodeError, rs_decode, rs_encode

__all__ = [
    "BYTE_CAPACITY",
    "NUMERIC_CAPACITY",
    "CapacityError",
    "FormatInfoError",
    "Payload",
    "QRDecodeError",
    "QRError",
    "RSDecodeError",
    "UnsupportedCharacterError",
    "glyph_bitmap",
    "prepare_image_object",
    "qr_decode",
    "qr_encode",
    "rasterize_text",
    "rectangle_object",
    "rs_decode",
    "rs_encode",
    "symbol_image",
    "synthetic_floor_plan",
]
