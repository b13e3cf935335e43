"""Block structures, the append-only chain, and patient-side secrets.

Three block kinds exist on the ledger: the patient record block, the
researcher request (a fork of a patient block), and the patient approval.
Blocks are content-addressed: block_id is the hash of the canonical
serialization, never stored inside it.

A patient block carries no field derived from the patient's identity
key. Linkage across a patient's blocks lives only in the off-chain
secrets: each block's hidden chain state folds the symmetric key, data
pointer, data digest, and the previous state, and the on-chain
commitment is the hash of that state with a fresh 256-bit nonce. The
first block in a patient's history chains from a state of 32 zero bytes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

from . import encoding as enc
from .crypto import (
    CredentialProof,
    KeyPair,
    Signature,
    TAG_CHAIN,
    credential_prove,
    digest,
    keygen,
    new_sym_key,
    sign,
    sym_encrypt,
)
from .group import GroupParams, _rng
from .registry import Directories

GENESIS_STATE = bytes(32)
NONCE_SIZE = 32
PTR_SIZE = 32

_KIND_PATIENT = 1
_KIND_REQUEST = 2
_KIND_APPROVAL = 3

_CHAIN_MAGIC = b"PHRC"
_STORE_MAGIC = b"PHRS"
_FILE_VERSION = 1


class EnrollmentError(ValueError):
    """A party's identity key does not sit at its claimed registry index."""


class NotApprovedError(ValueError):
    """Attempt to append a block whose consensus record is not approved."""


def chain_state(sym_key: bytes, data_ptr: bytes, data_digest: bytes, prev_state: bytes) -> bytes:
    """Hidden per-block chain state: hash over key, pointer, data digest, previous state."""
    for name, value in (("sym_key", sym_key), ("data_ptr", data_ptr),
                        ("data_digest", data_digest), ("prev_state", prev_state)):
        if len(value) != 32:
            raise ValueError(f"{name} must be 32 bytes")
    return digest(TAG_CHAIN + sym_key + data_ptr + data_digest + prev_state)


def state_commitment(state: bytes, nonce: bytes) -> bytes:
    """On-chain commitment: hash of the chain state with the block's nonce."""
    if len(state) != 32:
        raise ValueError("state must be 32 bytes")
    if len(nonce) != NONCE_SIZE:
        raise ValueError(f"nonce must be {NONCE_SIZE} bytes")
    return digest(TAG_CHAIN + state + nonce)


@dataclass(frozen=True)
class TimeRange:
    """Inclusive visit-time window."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if not (0 <= self.start <= self.end):
            raise ValueError(f"invalid range [{self.start}, {self.end}]")

    def contains(self, t: int) -> bool:
        return self.start <= t <= self.end

    def encloses(self, other: "TimeRange") -> bool:
        return self.start <= other.start and other.end <= self.end

    def to_bytes(self) -> bytes:
        return enc.u64(self.start) + enc.u64(self.end)

    @classmethod
    def read_from(cls, reader: enc.Reader) -> "TimeRange":
        start = reader.u64()
        end = reader.u64()
        if start > end:
            raise enc.FormatError("range start exceeds end")
        return cls(start, end)


# ---------------------------------------------------------------------------
# Block structures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PatientBlock:
    """One visit's record block: anonymous credentials in the header, public
    condition bits, chained commitment, and the two fresh block keys in the body."""

    patient_credential: CredentialProof
    hospital_credential: CredentialProof
    patient_sig: Signature
    hospital_sig: Signature
    condition_bits: bytes
    commitment: bytes
    patient_block_pk: int
    hospital_block_pk: int
    group: GroupParams

    def body_bytes(self) -> bytes:
        """Canonical body serialization; this is what both parties sign."""
        return _body_bytes(
            self.group,
            self.condition_bits,
            self.commitment,
            self.patient_block_pk,
            self.hospital_block_pk,
        )

    def canonical_bytes(self) -> bytes:
        header = (
            enc.prefixed(self.patient_credential.to_bytes(self.group))
            + enc.prefixed(self.hospital_credential.to_bytes(self.group))
            + self.patient_sig.to_bytes(self.group)
            + self.hospital_sig.to_bytes(self.group)
        )
        return enc.u8(_KIND_PATIENT) + header + self.body_bytes()

    @cached_property
    def block_id(self) -> bytes:
        return digest(self.canonical_bytes())

    @classmethod
    def read_from(cls, reader: enc.Reader, group: GroupParams) -> "PatientBlock":
        patient_credential = CredentialProof.from_bytes(reader.prefixed(), group)
        hospital_credential = CredentialProof.from_bytes(reader.prefixed(), group)
        patient_sig = Signature.read_from(reader, group)
        hospital_sig = Signature.read_from(reader, group)
        condition_bits = reader.prefixed()
        commitment = reader.take(32)
        patient_block_pk = group.decode_element(reader.take(group.element_size))
        hospital_block_pk = group.decode_element(reader.take(group.element_size))
        return cls(
            patient_credential=patient_credential,
            hospital_credential=hospital_credential,
            patient_sig=patient_sig,
            hospital_sig=hospital_sig,
            condition_bits=condition_bits,
            commitment=commitment,
            patient_block_pk=patient_block_pk,
            hospital_block_pk=hospital_block_pk,
            group=group,
        )


@dataclass(frozen=True)
class RequestBlock:
    """Researcher fork of a patient block, asking for a visit-time window."""

    parent_ptr: bytes
    requested_range: TimeRange
    researcher_pk: int
    signature: Signature
    group: GroupParams

    def canonical_bytes(self) -> bytes:
        return (
            enc.u8(_KIND_REQUEST)
            + self.parent_ptr
            + self.requested_range.to_bytes()
            + self.group.encode_element(self.researcher_pk)
            + self.signature.to_bytes(self.group)
        )

    @cached_property
    def block_id(self) -> bytes:
        return digest(self.canonical_bytes())

    @classmethod
    def read_from(cls, reader: enc.Reader, group: GroupParams) -> "RequestBlock":
        parent_ptr = reader.take(32)
        requested = TimeRange.read_from(reader)
        researcher_pk = group.decode_element(reader.take(group.element_size))
        signature = Signature.read_from(reader, group)
        return cls(parent_ptr, requested, researcher_pk, signature, group)


@dataclass(frozen=True)
class ApprovalBlock:
    """Patient grant: signs the request under the forked block's key, with the
    (possibly narrowed) range the patient is actually willing to disclose."""

    parent_ptr: bytes
    granted_range: TimeRange
    signature: Signature
    group: GroupParams

    def canonical_bytes(self) -> bytes:
        return (
            enc.u8(_KIND_APPROVAL)
            + self.parent_ptr
            + self.granted_range.to_bytes()
            + self.signature.to_bytes(self.group)
        )

    @cached_property
    def block_id(self) -> bytes:
        return digest(self.canonical_bytes())

    @classmethod
    def read_from(cls, reader: enc.Reader, group: GroupParams) -> "ApprovalBlock":
        parent_ptr = reader.take(32)
        granted = TimeRange.read_from(reader)
        signature = Signature.read_from(reader, group)
        return cls(parent_ptr, granted, signature, group)


def _body_bytes(
    group: GroupParams, condition_bits: bytes, commitment: bytes, patient_pk: int, hospital_pk: int
) -> bytes:
    # Field order: condition bits, commitment, patient block key, hospital block key.
    return (
        enc.prefixed(condition_bits)
        + commitment
        + group.encode_element(patient_pk)
        + group.encode_element(hospital_pk)
    )


Block = PatientBlock | RequestBlock | ApprovalBlock

_BLOCK_KINDS = {
    _KIND_PATIENT: PatientBlock,
    _KIND_REQUEST: RequestBlock,
    _KIND_APPROVAL: ApprovalBlock,
}


def decode_block(data: bytes, group: GroupParams) -> Block:
    """Parse canonical block bytes; raises FormatError/ValueError on malformed input."""
    reader = enc.Reader(data)
    kind = reader.u8()
    if kind not in _BLOCK_KINDS:
        raise enc.FormatError(f"unknown block kind {kind}")
    block = _BLOCK_KINDS[kind].read_from(reader, group)
    reader.expect_end()
    return block


# ---------------------------------------------------------------------------
# Patient-side secrets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockSecrets:
    """Everything the patient must retain off-chain for one of their blocks."""

    block_id: bytes
    block_key: KeyPair
    sym_key: bytes
    nonce: bytes
    data_ptr: bytes
    data_digest: bytes
    state: bytes
    visit_time: int


@dataclass(frozen=True)
class PatientSecrets:
    """The patient's private, strictly time-ordered block history."""

    records: tuple[BlockSecrets, ...] = ()

    @property
    def last_state(self) -> bytes:
        return self.records[-1].state if self.records else GENESIS_STATE

    def with_record(self, record: BlockSecrets) -> "PatientSecrets":
        if self.records and record.visit_time <= self.records[-1].visit_time:
            raise ValueError("visit times must be strictly increasing")
        return PatientSecrets(self.records + (record,))

    def index_of(self, block_id: bytes) -> int:
        for i, record in enumerate(self.records):
            if record.block_id == block_id:
                return i
        raise KeyError("block not in this patient's history")

    def find(self, block_id: bytes) -> BlockSecrets | None:
        for record in self.records:
            if record.block_id == block_id:
                return record
        return None

    def state_before(self, index: int) -> bytes:
        return self.records[index - 1].state if index > 0 else GENESIS_STATE

    def in_window(self, window: TimeRange) -> tuple[BlockSecrets, ...]:
        """The contiguous run of records whose visit time falls in the window."""
        return tuple(r for r in self.records if window.contains(r.visit_time))


@dataclass(frozen=True)
class PatientContext:
    identity: KeyPair
    index: int
    secrets: PatientSecrets


@dataclass(frozen=True)
class HospitalContext:
    identity: KeyPair
    index: int


# ---------------------------------------------------------------------------
# Off-chain encrypted data store
# ---------------------------------------------------------------------------


class OffChainStore:
    """Pointer-addressed ciphertext store; never sees plaintext or keys."""

    def __init__(self) -> None:
        self._items: dict[bytes, bytes] = {}

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, ptr: bytes) -> bool:
        return ptr in self._items

    def put_encrypted(
        self, data: bytes, key: bytes, rng: random.Random | None = None
    ) -> tuple[bytes, bytes]:
        """Encrypt and store; returns (fresh random pointer, digest of the plaintext)."""
        ciphertext = sym_encrypt(key, data, rng)
        ptr = _rng(rng).randbytes(PTR_SIZE)
        while ptr in self._items:  # 2^-256 per draw; retry rather than surface
            ptr = _rng(rng).randbytes(PTR_SIZE)
        self._items[ptr] = ciphertext
        return ptr, digest(data)

    def get(self, ptr: bytes) -> bytes:
        return self._items[ptr]

    def to_bytes(self) -> bytes:
        parts = [enc.u32(len(self._items))]
        for ptr in sorted(self._items):
            parts.append(ptr)
            parts.append(enc.prefixed(self._items[ptr]))
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "OffChainStore":
        reader = enc.Reader(data)
        store = cls()
        for _ in range(reader.u32()):
            ptr = reader.take(PTR_SIZE)
            store._items[ptr] = reader.prefixed()
        reader.expect_end()
        return store

    def save(self, path: Path | str) -> None:
        enc.write_versioned(path, _STORE_MAGIC, _FILE_VERSION, self.to_bytes())

    @classmethod
    def load(cls, path: Path | str) -> "OffChainStore":
        reader = enc.read_versioned(path, _STORE_MAGIC, _FILE_VERSION)
        return cls.from_bytes(reader.take(reader.remaining()))


# ---------------------------------------------------------------------------
# Block creation
# ---------------------------------------------------------------------------


def create_patient_block(
    patient: PatientContext,
    hospital: HospitalContext,
    data: bytes,
    condition_bits: bytes,
    directories: Directories,
    store: OffChainStore,
    visit_time: int,
    rng: random.Random | None = None,
) -> tuple[PatientBlock, PatientSecrets]:
    """Run the full block-creation flow for one visit.

    Fresh block keys for both parties, encrypted data stored off-chain,
    chained commitment under a fresh nonce, anonymous credentials, and both
    signatures over the body. Returns the block (ready for consensus
    submission) and the patient's secrets extended with the new record.
    """
    group = directories.group
    _check_enrolled(directories.patients.keys, patient.index, patient.identity.public, "patient")
    _check_enrolled(directories.hospitals.keys, hospital.index, hospital.identity.public, "hospital")

    patient_block_kp = keygen(group, rng)
    hospital_block_kp = keygen(group, rng)

    patient_credential = credential_prove(
        group, directories.patients.keys, patient.index, patient.identity.secret, patient_block_kp, rng
    )
    hospital_credential = credential_prove(
        group, directories.hospitals.keys, hospital.index, hospital.identity.secret, hospital_block_kp, rng
    )

    sym_key = new_sym_key(rng)
    data_ptr, data_digest = store.put_encrypted(data, sym_key, rng)
    state = chain_state(sym_key, data_ptr, data_digest, patient.secrets.last_state)
    nonce = _rng(rng).randbytes(NONCE_SIZE)
    commitment = state_commitment(state, nonce)

    body = _body_bytes(group, condition_bits, commitment, patient_block_kp.public, hospital_block_kp.public)
    block = PatientBlock(
        patient_credential=patient_credential,
        hospital_credential=hospital_credential,
        patient_sig=sign(group, patient_block_kp, body, rng),
        hospital_sig=sign(group, hospital_block_kp, body, rng),
        condition_bits=condition_bits,
        commitment=commitment,
        patient_block_pk=patient_block_kp.public,
        hospital_block_pk=hospital_block_kp.public,
        group=group,
    )

    record = BlockSecrets(
        block_id=block.block_id,
        block_key=patient_block_kp,
        sym_key=sym_key,
        nonce=nonce,
        data_ptr=data_ptr,
        data_digest=data_digest,
        state=state,
        visit_time=visit_time,
    )
    return block, patient.secrets.with_record(record)


def _check_enrolled(keys: tuple[int, ...], index: int, public: int, who: str) -> None:
    if not (0 <= index < len(keys)) or keys[index] != public:
        raise EnrollmentError(f"{who} identity key is not enrolled at index {index}")


# ---------------------------------------------------------------------------
# The chain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainEntry:
    block: Block
    record: object  # consensus.ConsensusResult; duck-typed to avoid an import cycle


class Chain:
    """Append-only block list; appending requires an approved consensus record."""

    def __init__(self, group: GroupParams):
        self.group = group
        self._entries: list[ChainEntry] = []
        self._index: dict[bytes, int] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def append(self, block: Block, record) -> None:
        if not record.approved:
            raise NotApprovedError("consensus record is not approved")
        if block.block_id in self._index:
            raise ValueError("block already on chain")
        self._index[block.block_id] = len(self._entries)
        self._entries.append(ChainEntry(block, record))

    def get(self, block_id: bytes) -> Block | None:
        pos = self._index.get(block_id)
        return self._entries[pos].block if pos is not None else None

    def entries(self) -> tuple[ChainEntry, ...]:
        return tuple(self._entries)

    def blocks(self):
        return (entry.block for entry in self._entries)

    def patient_blocks(self):
        return (b for b in self.blocks() if isinstance(b, PatientBlock))

    def to_bytes(self) -> bytes:
        parts = [enc.prefixed(self.group.to_bytes()), enc.u32(len(self._entries))]
        for entry in self._entries:
            parts.append(enc.prefixed(entry.block.canonical_bytes()))
            parts.append(enc.prefixed(entry.record.to_bytes()))
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Chain":
        from .consensus import ConsensusResult

        reader = enc.Reader(data)
        group = GroupParams.read_from(enc.Reader(reader.prefixed()))
        chain = cls(group)
        for _ in range(reader.u32()):
            block = decode_block(reader.prefixed(), group)
            record = ConsensusResult.from_bytes(reader.prefixed())
            chain.append(block, record)
        reader.expect_end()
        return chain

    def save(self, path: Path | str) -> None:
        enc.write_versioned(path, _CHAIN_MAGIC, _FILE_VERSION, self.to_bytes())

    @classmethod
    def load(cls, path: Path | str) -> "Chain":
        reader = enc.read_versioned(path, _CHAIN_MAGIC, _FILE_VERSION)
        return cls.from_bytes(reader.take(reader.remaining()))
