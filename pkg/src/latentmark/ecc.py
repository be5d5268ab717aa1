"""Shortened binary BCH codes for channel-robust payloads.

A codeword is laid out as [k data bits | n-k parity bits], most significant
first, so the data survives verbatim in the channel (systematic encoding).
Codes are built over GF(2^m) and shortened from length 2^m - 1 down to the
requested size.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .payload import _as_bits

# Standard primitive polynomials, indexed by field degree m.
_PRIMITIVE_POLY = {
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,
    7: 0b10001001,
    8: 0b100011101,
    9: 0b1000010001,
    10: 0b10000001001,
}

DEFAULT_T = 5


class GaloisField:
    """GF(2^m) with exp/log tables over a fixed primitive polynomial."""

    def __init__(self, m: int):
        if m not in _PRIMITIVE_POLY:
            raise ValueError(f"unsupported field degree m={m}")
        self.m = m
        self.size = 1 << m
        self.order = self.size - 1
        self.exp = [0] * (2 * self.order)
        self.log = [0] * self.size
        poly = _PRIMITIVE_POLY[m]
        x = 1
        for i in range(self.order):
            self.exp[i] = x
            self.log[x] = i
            x <<= 1
            if x & self.size:
                x ^= poly
        # doubled table lets mul skip an explicit mod
        for i in range(self.order, 2 * self.order):
            self.exp[i] = self.exp[i - self.order]

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self.exp[self.log[a] + self.log[b]]

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("inverse of 0 in GF(2^m)")
        return self.exp[self.order - self.log[a]]

    def pow_alpha(self, i: int) -> int:
        return self.exp[i % self.order]


def _cyclotomic_coset(r: int, order: int) -> list[int]:
    coset, x = [], r % order
    while x not in coset:
        coset.append(x)
        x = (2 * x) % order
    return coset


@lru_cache(maxsize=None)
def _generator_poly(m: int, t: int) -> int:
    """Binary generator polynomial with roots alpha^1 .. alpha^2t (as an int bitmask)."""
    gf = GaloisField(m)
    g = 1  # polynomial "1"
    seen: set[int] = set()
    for r in range(1, 2 * t + 1):
        if r % gf.order in seen:
            continue
        coset = _cyclotomic_coset(r, gf.order)
        seen.update(coset)
        # minimal polynomial of alpha^r: product of (x + alpha^j) over the coset
        mp = [1]
        for j in coset:
            root = gf.pow_alpha(j)
            nxt = [0] * (len(mp) + 1)
            for d, c in enumerate(mp):
                nxt[d + 1] ^= c
                nxt[d] ^= gf.mul(c, root)
            mp = nxt
        if any(c not in (0, 1) for c in mp):
            raise AssertionError("minimal polynomial must have binary coefficients")
        mp_int = sum(c << d for d, c in enumerate(mp))
        # carryless multiply g * mp over GF(2)
        prod = 0
        for d in range(mp_int.bit_length()):
            if (mp_int >> d) & 1:
                prod ^= g << d
        g = prod
    return g


def parity_bits(m: int, t: int) -> int:
    """Number of parity bits of the (m, t) BCH code: deg of the generator."""
    return _generator_poly(m, t).bit_length() - 1


@dataclass(frozen=True)
class EccConfig:
    """A valid shortened BCH parameterization (n, k, t) over GF(2^m)."""

    codeword_length: int  # n, bits on the channel
    data_length: int      # k, user payload bits
    correctable_errors: int  # t
    field_degree: int     # m

    def __post_init__(self):
        n, k, t, m = (self.codeword_length, self.data_length,
                      self.correctable_errors, self.field_degree)
        if t < 1:
            raise ValueError("t must be >= 1")
        if not 1 <= k <= n:
            raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
        if n > (1 << m) - 1:
            raise ValueError(f"n={n} exceeds field length {(1 << m) - 1}")
        if n - k != parity_bits(m, t):
            raise ValueError(
                f"(n={n}, k={k}) incompatible with the {parity_bits(m, t)} "
                f"parity bits of the (m={m}, t={t}) code"
            )

    @classmethod
    def for_payload(cls, data_bits: int, t: int = DEFAULT_T) -> "EccConfig":
        """Smallest field that protects `data_bits` with t correctable errors."""
        if data_bits < 1:
            raise ValueError("data_bits must be >= 1")
        for m in sorted(_PRIMITIVE_POLY):
            if m < 2 * t + 1 and (1 << m) - 1 < 2 * t + 1:
                continue
            p = parity_bits(m, t)
            if (1 << m) - 1 - p >= data_bits:
                return cls(data_bits + p, data_bits, t, m)
        raise ValueError(f"no supported field fits {data_bits} data bits at t={t}")

    @classmethod
    def for_channel(cls, channel_bits: int, t: int = DEFAULT_T) -> "EccConfig":
        """Best code whose codeword is exactly `channel_bits` long.

        Keeps the requested t when some field admits it, otherwise steps t
        down until at least one data bit fits.
        """
        for t_eff in range(t, 0, -1):
            for m in sorted(_PRIMITIVE_POLY):
                if (1 << m) - 1 < channel_bits:
                    continue
                p = parity_bits(m, t_eff)
                if p < channel_bits:
                    return cls(channel_bits, channel_bits - p, t_eff, m)
        raise ValueError(f"no BCH code fits a {channel_bits}-bit channel")


class BchCodec:
    """Encoder/decoder for one EccConfig."""

    def __init__(self, cfg: EccConfig):
        self.cfg = cfg
        self.gf = GaloisField(cfg.field_degree)
        self.generator = _generator_poly(cfg.field_degree, cfg.correctable_errors)
        self.n_parity = cfg.codeword_length - cfg.data_length

    def encode(self, data) -> np.ndarray:
        bits = _as_bits(data)
        if bits.size != self.cfg.data_length:
            raise ValueError(
                f"data length {bits.size} != configured k={self.cfg.data_length}"
            )
        msg = 0
        for b in bits:  # data[0] is the highest-degree coefficient
            msg = (msg << 1) | int(b)
        rem = self._poly_mod(msg << self.n_parity)
        out = np.empty(self.cfg.codeword_length, dtype=np.uint8)
        out[: bits.size] = bits
        for i in range(self.n_parity):
            out[bits.size + i] = (rem >> (self.n_parity - 1 - i)) & 1
        return out

    def decode(self, codeword) -> tuple[np.ndarray, bool]:
        bits = _as_bits(codeword)
        n, k = self.cfg.codeword_length, self.cfg.data_length
        if bits.size != n:
            raise ValueError(f"codeword length {bits.size} != configured n={n}")
        received = bits.copy()
        syn = self._syndromes(received)
        if not any(syn):
            return received[:k].copy(), True
        locator = self._berlekamp_massey(syn)
        errors = len(locator) - 1
        corrected = received[:k].copy()  # best effort if decoding fails
        if errors == 0 or errors > self.cfg.correctable_errors or locator[-1] == 0:
            return corrected, False
        positions = self._chien_search(locator)
        if len(positions) != errors or any(p >= n for p in positions):
            return corrected, False
        fixed = received.copy()
        for p in positions:
            fixed[n - 1 - p] ^= 1
        if any(self._syndromes(fixed)):
            return corrected, False
        return fixed[:k].copy(), True

    # -- internals ---------------------------------------------------------

    def _poly_mod(self, value: int) -> int:
        gdeg = self.n_parity
        while value.bit_length() > gdeg:
            value ^= self.generator << (value.bit_length() - 1 - gdeg)
        return value

    def _syndromes(self, bits: np.ndarray) -> list[int]:
        gf = self.gf
        degrees = [int(d) for d in np.flatnonzero(bits[::-1])]
        syn = []
        for j in range(1, 2 * self.cfg.correctable_errors + 1):
            s = 0
            for d in degrees:
                s ^= gf.pow_alpha(j * d)
            syn.append(s)
        return syn

    def _berlekamp_massey(self, syn: list[int]) -> list[int]:
        gf = self.gf
        c, b = [1], [1]
        length, shift, b_disc = 0, 1, 1
        for i, s in enumerate(syn):
            d = s
            for j in range(1, length + 1):
                d ^= gf.mul(c[j], syn[i - j])
            if d == 0:
                shift += 1
                continue
            coef = gf.mul(d, gf.inv(b_disc))
            updated = c + [0] * max(0, len(b) + shift - len(c))
            for j, bc in enumerate(b):
                updated[j + shift] ^= gf.mul(coef, bc)
            if 2 * length <= i:
                b, c = c, updated
                length = i + 1 - length
                b_disc, shift = d, 1
            else:
                c = updated
                shift += 1
        while len(c) > 1 and c[-1] == 0:
            c.pop()
        return c

    def _chien_search(self, locator: list[int]) -> list[int]:
        gf = self.gf
        roots = []
        for pos in range(gf.order):
            x = gf.pow_alpha(-pos % gf.order)
            acc = 0
            for coef in reversed(locator):
                acc = gf.mul(acc, x) ^ coef
            if acc == 0:
                roots.append(pos)
                if len(roots) == len(locator) - 1:
                    break
        return roots


@lru_cache(maxsize=8)
def _codec(cfg: EccConfig) -> BchCodec:
    return BchCodec(cfg)


def ecc_encode(data, cfg: EccConfig) -> np.ndarray:
    """Systematic BCH codeword for a k-bit payload."""
    return _codec(cfg).encode(data)


def ecc_decode(codeword, cfg: EccConfig) -> tuple[np.ndarray, bool]:
    """Recover the payload; `corrected` is False when errors exceeded t."""
    return _codec(cfg).decode(codeword)
