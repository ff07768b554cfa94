import numpy as np
import pytest

from optichannel.pnm import PnmError, decode_pnm, encode_pnm, load_pnm, save_pnm


def test_hand_written_p5():
    data = b"P5\n2 1\n255\n" + bytes([0, 255])
    assert decode_pnm(data).tolist() == [[0, 255]]


def test_comments_and_whitespace_in_header():
    data = b"P5 # a comment\n# another\n 3\t1\n255\n" + bytes([1, 2, 3])
    assert decode_pnm(data).tolist() == [[1, 2, 3]]


def test_truncated_body():
    data = b"P5\n4 4\n255\n" + bytes(15)
    with pytest.raises(PnmError, match="truncated"):
        decode_pnm(data)


@pytest.mark.parametrize("maxval", [1, 254, 65535])
def test_unsupported_maxval(maxval):
    with pytest.raises(PnmError, match="maxval"):
        decode_pnm(b"P5\n1 1\n%d\n" % maxval + b"\x00\x00")


@pytest.mark.parametrize("data", [b"P2\n1 1\n255\n0", b"P5\n1\n", b"P5\nx 1\n255\n\x00", b"", b"P5\n0 1\n255\n"])
def test_malformed_header(data):
    with pytest.raises(PnmError):
        decode_pnm(data)


def test_canonical_file_roundtrip_is_byte_identical(tmp_path):
    rng = np.random.default_rng(0)
    for shape in ((5, 7), (3, 4, 3)):
        img = rng.integers(0, 256, size=shape, dtype=np.uint8)
        raw = encode_pnm(img)
        p = tmp_path / "a.pnm"
        p.write_bytes(raw)
        loaded = load_pnm(p)
        assert np.array_equal(loaded, img)
        save_pnm(loaded, tmp_path / "b.pnm")
        assert (tmp_path / "b.pnm").read_bytes() == raw


def test_p6_layout():
    data = b"P6\n2 1\n255\n" + bytes([255, 0, 0, 0, 0, 255])
    img = decode_pnm(data)
    assert img.shape == (1, 2, 3)
    assert img[0, 0].tolist() == [255, 0, 0] and img[0, 1].tolist() == [0, 0, 255]
