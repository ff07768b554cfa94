"""Reed-Solomon over GF(256), QR conventions (poly 0x11D, generator roots a^0..a^(n-1)).

Codewords are sequences of ints, most significant coefficient first, exactly
as they appear in the QR codeword stream.
"""
from __future__ import annotations

PRIMITIVE = 0x11D  # 285

EXP = [0] * 512
LOG = [0] * 256


def _build_tables():
    x = 1
    for i in range(255):
        EXP[i] = x
        LOG[x] = i
        x <<= 1
        if x & 0x100:
            x ^= PRIMITIVE
    for i in range(255, 512):
        EXP[i] = EXP[i - 255]


_build_tables()


class RSDecodeError(ValueError):
    """The received block is not within correction capacity."""


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return EXP[LOG[a] + LOG[b]]


def gf_div(a: int, b: int) -> int:
    if b == 0:
        raise ZeroDivisionError("division by zero in GF(256)")
    if a == 0:
        return 0
    return EXP[(LOG[a] - LOG[b]) % 255]


def gf_pow(a: int, n: int) -> int:
    if a == 0:
        return 0
    return EXP[(LOG[a] * n) % 255]


def gf_inv(a: int) -> int:
    return gf_div(1, a)


def poly_mul(p, q):
    out = [0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a == 0:
            continue
        for j, b in enumerate(q):
            out[i + j] ^= gf_mul(a, b)
    return out


def poly_eval(p, x: int) -> int:
    """Horner evaluation, highest-degree coefficient first."""
    y = 0
    for c in p:
        y = gf_mul(y, x) ^ c
    return y


_GENERATORS: dict[int, list[int]] = {}


def generator_poly(nsym: int) -> list[int]:
    if nsym not in _GENERATORS:
        g = [1]
        for i in range(nsym):
            g = poly_mul(g, [1, EXP[i]])
        _GENERATORS[nsym] = g
    return _GENERATORS[nsym]


def rs_encode(data, nsym: int = 26) -> list[int]:
    """Return ``data`` followed by ``nsym`` parity codewords."""
    data = [int(d) for d in data]
    if any(not 0 <= d < 256 for d in data):
        raise ValueError("codewords must be bytes")
    if len(data) + nsym > 255:
        raise ValueError("block longer than 255 codewords")
    gen = generator_poly(nsym)
    rem = data + [0] * nsym
    for i in range(len(data)):
        coef = rem[i]
        if coef:
            for j in range(1, len(gen)):
                rem[i + j] ^= gf_mul(gen[j], coef)
    return data + rem[len(data):]


def syndromes(block, nsym: int) -> list[int]:
    return [poly_eval(block, EXP[i]) for i in range(nsym)]


def _berlekamp_massey(synd):
    # locator polynomial, lowest-degree coefficient first
    sigma = [1]
    prev = [1]
    L = 0
    m = 1
    b = 1
    for n in range(len(synd)):
        d = synd[n]
        for i in range(1, L + 1):
            if i < len(sigma):
                d ^= gf_mul(sigma[i], synd[n - i])
        if d == 0:
            m += 1
            continue
        coef = gf_div(d, b)
        shifted = [0] * m + [gf_mul(coef, c) for c in prev]
        new = sigma + [0] * max(0, len(shifted) - len(sigma))
        for i, c in enumerate(shifted):
            new[i] ^= c
        if 2 * L <= n:
            prev = sigma
            L = n + 1 - L
            b = d
            m = 1
        else:
            m += 1
        sigma = new
    while len(sigma) > 1 and sigma[-1] == 0:
        sigma.pop()
    return sigma, L


def _eval_low(p, x):
    # p lowest-degree first
    y = 0
    for c in reversed(p):
        y = gf_mul(y, x) ^ c
    return y


def rs_correct(block, nsym: int = 26) -> tuple[list[int], list[int]]:
    """Correct ``block`` in place semantics; returns (corrected, error positions).

    Raises RSDecodeError if the block is not within capacity.
    """
    block = [int(c) for c in block]
    n = len(block)
    synd = syndromes(block, nsym)
    if not any(synd):
        return block, []
    sigma, L = _berlekamp_massey(synd)
    if L > nsym // 2 or len(sigma) - 1 != L:
        raise RSDecodeError("too many errors")
    # position p (index from the start) corresponds to locator X = a^(n-1-p)
    positions = []
    for p in range(n):
        xinv = EXP[(255 - (n - 1 - p)) % 255]
        if _eval_low(sigma, xinv) == 0:
            positions.append(p)
    if len(positions) != L:
        raise RSDecodeError("error locator roots do not match its degree")
    # evaluator omega = S(x) * sigma(x) mod x^nsym, lowest first
    omega = [0] * nsym
    for i, s in enumerate(synd):
        if s == 0:
            continue
        for j, c in enumerate(sigma):
            if i + j < nsym:
                omega[i + j] ^= gf_mul(s, c)
    # formal derivative: odd-degree terms survive in characteristic 2
    dsigma = [sigma[i] if i % 2 == 1 else 0 for i in range(1, len(sigma))]
    for p in positions:
        x = EXP[(n - 1 - p) % 255]
        xinv = gf_inv(x)
        denom = _eval_low(dsigma, xinv)
        if denom == 0:
            raise RSDecodeError("degenerate error evaluator")
        magnitude = gf_mul(x, gf_div(_eval_low(omega, xinv), denom))
        block[p] ^= magnitude
    if any(syndromes(block, nsym)):
        raise RSDecodeError("correction did not yield a codeword")
    return block, positions


def rs_decode(block, nsym: int = 26) -> list[int]:
    """Return the corrected data codewords of ``block``."""
    corrected, _ = rs_correct(block, nsym)
    return corrected[: len(corrected) - nsym]
