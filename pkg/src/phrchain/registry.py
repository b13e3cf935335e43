"""Enrollment registries and the public condition codebook.

A trusted third party is assumed to have vetted every participant;
enrollment here simply appends a verified public key to the ordered
list for its role. Key order is load-bearing: ring proofs commit to the
list digest, and a key's index is stable for the life of the registry.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from . import encoding as enc
from .crypto import key_list_digest
from .group import GroupParams

_REGISTRY_MAGIC = b"PHRR"
_CODEBOOK_MAGIC = b"PHRB"
_FILE_VERSION = 1

ROLES = ("patient", "hospital", "researcher")


class DuplicateKeyError(ValueError):
    """The public key is already enrolled."""


class UnknownConditionError(KeyError):
    """A condition name is not present in the codebook."""


@dataclass
class Registry:
    """Ordered public-key registry for one role. Single-writer."""

    group: GroupParams
    role: str
    _keys: list[int] = field(default_factory=list)
    digest: bytes = b""

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        self.digest = key_list_digest(self.group, self._keys)

    @property
    def keys(self) -> tuple[int, ...]:
        return tuple(self._keys)

    def __len__(self) -> int:
        return len(self._keys)

    def __contains__(self, public: int) -> bool:
        return public in self._keys

    def enroll(self, public: int) -> int:
        """Append a verified public key; returns its stable index."""
        if not self.group.is_element(public):
            raise ValueError("public key is not a valid group element")
        if public in self._keys:
            raise DuplicateKeyError(f"key already enrolled in {self.role} registry")
        self._keys.append(public)
        self.digest = key_list_digest(self.group, self._keys)
        return len(self._keys) - 1

    def index_of(self, public: int) -> int:
        return self._keys.index(public)

    def to_bytes(self) -> bytes:
        parts = [enc.prefixed(self.group.to_bytes()), enc.prefixed_str(self.role), enc.u32(len(self._keys))]
        parts.extend(self.group.encode_element(k) for k in self._keys)
        return b"".join(parts)

    @classmethod
    def read_from(cls, reader: enc.Reader) -> "Registry":
        group = GroupParams.read_from(enc.Reader(reader.prefixed()))
        role = reader.prefixed_str()
        count = reader.u32()
        keys = [group.decode_element(reader.take(group.element_size)) for _ in range(count)]
        return cls(group=group, role=role, _keys=keys)

    def save(self, path: Path | str) -> None:
        enc.write_versioned(path, _REGISTRY_MAGIC, _FILE_VERSION, self.to_bytes())

    @classmethod
    def load(cls, path: Path | str) -> "Registry":
        reader = enc.read_versioned(path, _REGISTRY_MAGIC, _FILE_VERSION)
        registry = cls.read_from(reader)
        reader.expect_end()
        return registry

    def describe(self) -> str:
        lines = [f"{self.role} registry: {len(self._keys)} keys, digest {self.digest.hex()[:16]}"]
        for i, k in enumerate(self._keys):
            lines.append(f"  [{i:4d}] {self.group.encode_element(k).hex()[:32]}...")
        return "\n".join(lines)


@dataclass(frozen=True)
class Directories:
    """The three role registries every verifier consults."""

    patients: Registry
    hospitals: Registry
    researchers: Registry

    @property
    def group(self) -> GroupParams:
        return self.patients.group


def new_directories(group: GroupParams) -> Directories:
    return Directories(
        patients=Registry(group, "patient"),
        hospitals=Registry(group, "hospital"),
        researchers=Registry(group, "researcher"),
    )


@dataclass(frozen=True)
class ConditionCodebook:
    """Stable-position condition names backing the public bit vector.

    Bit i covers lifetime_codes[i]; bit len(lifetime_codes) + j covers
    visit_codes[j]. The codebook is public configuration shared by all
    parties, so positions must never be reordered once blocks exist.
    """

    lifetime_codes: tuple[str, ...]
    visit_codes: tuple[str, ...]

    def __post_init__(self) -> None:
        names = self.lifetime_codes + self.visit_codes
        if len(set(names)) != len(names):
            raise ValueError("condition names must be unique across both lists")

    @classmethod
    def default(cls, lifetime: int = 128, visit: int = 128) -> "ConditionCodebook":
        return cls(
            lifetime_codes=tuple(f"lifetime-{i:03d}" for i in range(lifetime)),
            visit_codes=tuple(f"visit-{i:03d}" for i in range(visit)),
        )

    @property
    def n_bits(self) -> int:
        return len(self.lifetime_codes) + len(self.visit_codes)

    @property
    def n_bytes(self) -> int:
        return (self.n_bits + 7) // 8

    def position(self, name: str) -> int:
        if name in self.lifetime_codes:
            return self.lifetime_codes.index(name)
        if name in self.visit_codes:
            return len(self.lifetime_codes) + self.visit_codes.index(name)
        raise UnknownConditionError(name)

    def encode(self, lifetime_set: Iterable[str], visit_set: Iterable[str]) -> bytes:
        """Bit vector with a 1 at each named condition's position."""
        value = 0
        for name in lifetime_set:
            if name not in self.lifetime_codes:
                raise UnknownConditionError(name)
            value |= 1 << self.position(name)
        for name in visit_set:
            if name not in self.visit_codes:
                raise UnknownConditionError(name)
            value |= 1 << self.position(name)
        return value.to_bytes(self.n_bytes, "big")

    def to_bytes(self) -> bytes:
        parts = [enc.u32(len(self.lifetime_codes))]
        parts.extend(enc.prefixed_str(n) for n in self.lifetime_codes)
        parts.append(enc.u32(len(self.visit_codes)))
        parts.extend(enc.prefixed_str(n) for n in self.visit_codes)
        return b"".join(parts)

    @classmethod
    def read_from(cls, reader: enc.Reader) -> "ConditionCodebook":
        lifetime = tuple(reader.prefixed_str() for _ in range(reader.u32()))
        visit = tuple(reader.prefixed_str() for _ in range(reader.u32()))
        return cls(lifetime_codes=lifetime, visit_codes=visit)

    def save(self, path: Path | str) -> None:
        enc.write_versioned(path, _CODEBOOK_MAGIC, _FILE_VERSION, self.to_bytes())

    @classmethod
    def load(cls, path: Path | str) -> "ConditionCodebook":
        reader = enc.read_versioned(path, _CODEBOOK_MAGIC, _FILE_VERSION)
        codebook = cls.read_from(reader)
        reader.expect_end()
        return codebook

    def describe(self) -> str:
        lines = [
            f"condition codebook: {len(self.lifetime_codes)} lifetime + "
            f"{len(self.visit_codes)} visit codes ({self.n_bits} bits)"
        ]
        for offset, name in enumerate(self.lifetime_codes):
            lines.append(f"  bit {offset:3d}  {name}")
        for offset, name in enumerate(self.visit_codes):
            lines.append(f"  bit {len(self.lifetime_codes) + offset:3d}  {name}")
        return "\n".join(lines)


def codes_match(bits: bytes, query_mask: bytes) -> bool:
    """True iff every condition set in the mask is also set in the vector."""
    if len(bits) != len(query_mask):
        return False
    vector = int.from_bytes(bits, "big")
    mask = int.from_bytes(query_mask, "big")
    return vector & mask == mask
