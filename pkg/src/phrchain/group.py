"""Prime-order cyclic group arithmetic over a safe-prime modulus.

The reference instantiation works in the quadratic-residue subgroup of
Z_p* for the largest 256-bit safe prime p = 2q + 1, giving a prime group
order q of 255 bits and a canonical fixed-width byte encoding (32 bytes
per element and per scalar). Any other (p, q, g) triple with g generating
an order-q subgroup can be plugged in through the same dataclass; tests
use tiny groups to cross-check arithmetic by brute force.

These parameters are sized for protocol simulation and transcript-format
work, not for production key material.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import encoding as enc

# Largest safe prime below 2**256: p = 2**256 - 36113, q = (p - 1) // 2.
_P = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFF72EF
_Q = (_P - 1) // 2
_G = 4  # 2**2, a quadratic residue, hence a generator of the order-q subgroup

_SYSTEM_RNG = random.SystemRandom()


def _rng(rng: random.Random | None) -> random.Random:
    return _SYSTEM_RNG if rng is None else rng


@dataclass(frozen=True)
class GroupParams:
    """A prime-order cyclic subgroup of Z_modulus*."""

    group_id: str
    modulus: int
    order: int
    generator: int

    def __post_init__(self) -> None:
        if not (1 < self.generator < self.modulus):
            raise ValueError("generator out of range")
        if pow(self.generator, self.order, self.modulus) != 1:
            raise ValueError("generator order does not divide the declared group order")

    @classmethod
    def default(cls) -> "GroupParams":
        return cls(group_id="modp256-v1", modulus=_P, order=_Q, generator=_G)

    @property
    def element_size(self) -> int:
        return (self.modulus.bit_length() + 7) // 8

    @property
    def scalar_size(self) -> int:
        return (self.order.bit_length() + 7) // 8

    def exp(self, base: int, exponent: int) -> int:
        """base**exponent for a subgroup element; negative exponents allowed."""
        return pow(base, exponent % self.order, self.modulus)

    def mul(self, a: int, b: int) -> int:
        return a * b % self.modulus

    def random_scalar(self, rng: random.Random | None = None) -> int:
        """Uniform nonzero scalar in [1, order)."""
        return _rng(rng).randrange(1, self.order)

    def random_bytes(self, n: int, rng: random.Random | None = None) -> bytes:
        return _rng(rng).randbytes(n)

    def is_element(self, value: int) -> bool:
        """True iff value is in the prime-order subgroup (identity excluded)."""
        if not (1 <= value < self.modulus):
            return False
        return value != 1 and pow(value, self.order, self.modulus) == 1

    def encode_element(self, value: int) -> bytes:
        return value.to_bytes(self.element_size, "big")

    def decode_element(self, data: bytes) -> int:
        if len(data) != self.element_size:
            raise ValueError(f"element encoding must be {self.element_size} bytes")
        value = int.from_bytes(data, "big")
        if not (1 <= value < self.modulus):
            raise ValueError("element out of range")
        return value

    def encode_scalar(self, value: int) -> bytes:
        return value.to_bytes(self.scalar_size, "big")

    def decode_scalar(self, data: bytes) -> int:
        if len(data) != self.scalar_size:
            raise ValueError(f"scalar encoding must be {self.scalar_size} bytes")
        value = int.from_bytes(data, "big")
        if value >= self.order:
            raise ValueError("scalar out of range")
        return value

    def to_bytes(self) -> bytes:
        return (
            enc.prefixed_str(self.group_id)
            + enc.prefixed(self.modulus.to_bytes((self.modulus.bit_length() + 7) // 8, "big"))
            + enc.prefixed(self.order.to_bytes((self.order.bit_length() + 7) // 8, "big"))
            + enc.prefixed(self.generator.to_bytes((self.generator.bit_length() + 7) // 8, "big"))
        )

    @classmethod
    def read_from(cls, reader) -> "GroupParams":
        group_id = reader.prefixed_str()
        modulus = int.from_bytes(reader.prefixed(), "big")
        order = int.from_bytes(reader.prefixed(), "big")
        generator = int.from_bytes(reader.prefixed(), "big")
        return cls(group_id=group_id, modulus=modulus, order=order, generator=generator)
