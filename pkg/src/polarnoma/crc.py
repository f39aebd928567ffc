"""Binary cyclic redundancy checks.

Bit blocks throughout the package are 1-D ``numpy`` arrays of dtype ``uint8``
holding values in {0, 1}, first-transmitted bit at index 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["CrcSpec", "CRC8_DEFAULT", "attach_crc", "check_crc", "crc_remainder"]


@dataclass(frozen=True)
class CrcSpec:
    """CRC described by its generator polynomial.

    Parameters
    ----------
    degree : int
        Number of parity bits appended.
    poly : int
        Full generator polynomial including the leading x^degree term,
        most significant bit first.  ``0x107`` encodes x^8 + x^2 + x + 1.
    """

    degree: int = 8
    poly: int = 0x107

    def __post_init__(self) -> None:
        if self.degree < 1:
            raise ValueError(f"CRC degree must be >= 1, got {self.degree}")
        if self.poly.bit_length() != self.degree + 1:
            raise ValueError(
                f"generator 0x{self.poly:x} does not have degree {self.degree}"
            )
        if self.poly & 1 == 0:
            raise ValueError("generator must have a nonzero constant term")


#: Degree-8 CRC, generator x^8 + x^2 + x + 1.
CRC8_DEFAULT = CrcSpec(degree=8, poly=0x107)


def _as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8).ravel()
    if arr.size and arr.max() > 1:
        raise ValueError("bit block may only contain 0 and 1")
    return arr


def crc_remainder(bits, spec: CrcSpec = CRC8_DEFAULT) -> int:
    """Remainder of the bit polynomial modulo the generator (MSB-first division)."""
    arr = _as_bits(bits)
    reg = 0
    top = 1 << spec.degree
    for b in arr:
        reg = (reg << 1) | int(b)
        if reg & top:
            reg ^= spec.poly
    return reg


def attach_crc(info_bits, spec: CrcSpec = CRC8_DEFAULT) -> np.ndarray:
    """Append ``spec.degree`` parity bits so the whole block divides the generator.

    The parity is the remainder of ``info(x) * x^degree`` modulo the generator,
    appended MSB first.
    """
    info = _as_bits(info_bits)
    if info.size < 1:
        raise ValueError("need at least one information bit")
    reg = crc_remainder(np.concatenate([info, np.zeros(spec.degree, np.uint8)]), spec)
    parity = np.array(
        [(reg >> (spec.degree - 1 - i)) & 1 for i in range(spec.degree)], np.uint8
    )
    return np.concatenate([info, parity])


def check_crc(payload_bits, spec: CrcSpec = CRC8_DEFAULT) -> bool:
    """True when the payload (info followed by parity) has zero remainder."""
    payload = _as_bits(payload_bits)
    if payload.size < spec.degree:
        raise ValueError(
            f"payload of {payload.size} bits is shorter than the CRC degree {spec.degree}"
        )
    return crc_remainder(payload, spec) == 0
