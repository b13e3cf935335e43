"""Discrete-log proof primitives and authenticated symmetric encryption.

Three sigma-protocol transcripts are produced here, all made
non-interactive by hashing the transcript into the challenge:

* ``SchnorrProof`` -- knowledge of the secret for one public key.
* ``RingProof`` -- knowledge of the secret for at least one key in an
  ordered ring, without revealing which (simulate every non-witness
  branch, split the binding challenge additively across branches).
* ``CredentialProof`` -- conjunction of a ring proof over an enrolled
  key list and a Schnorr proof for a fresh block key, bound under one
  joint context so neither half can be replayed against a different
  block key or key list.

Challenges are SHA-256 outputs reduced mod the group order, with a
distinct domain tag per use ("FS-SCHNORR", "FS-OR", "SIG"; the ledger's
hash chain uses "CHAIN"). All proving functions take an optional
``random.Random`` so transcripts are reproducible under a fixed seed;
the default is the operating system RNG.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Sequence

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from . import encoding as enc
from .group import GroupParams, _rng

TAG_FS_SCHNORR = b"FS-SCHNORR"
TAG_FS_OR = b"FS-OR"
TAG_SIG = b"SIG"
TAG_CHAIN = b"CHAIN"

SYM_KEY_SIZE = 32
_GCM_NONCE_SIZE = 12


class DecryptionError(ValueError):
    """Authenticated decryption failed: wrong key or tampered ciphertext."""


def digest(data: bytes) -> bytes:
    """The canonical 32-byte hash (SHA-256)."""
    return hashlib.sha256(data).digest()


def hash_to_scalar(group: GroupParams, tag: bytes, payload: bytes) -> int:
    """Fiat-Shamir challenge: domain-tagged hash reduced mod the group order."""
    return int.from_bytes(digest(tag + payload), "big") % group.order


def key_list_digest(group: GroupParams, keys: Sequence[int]) -> bytes:
    """Digest over the canonical serialization of an ordered key list."""
    parts = [enc.u32(len(keys))]
    parts.extend(group.encode_element(k) for k in keys)
    return digest(b"".join(parts))


@dataclass(frozen=True)
class KeyPair:
    secret: int
    public: int


def keygen(group: GroupParams, rng: random.Random | None = None) -> KeyPair:
    """Fresh keypair: uniform secret in [1, order), public = generator**secret."""
    secret = group.random_scalar(rng)
    return KeyPair(secret=secret, public=group.exp(group.generator, secret))


# ---------------------------------------------------------------------------
# Schnorr proof of knowledge
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SchnorrProof:
    commitment: int
    challenge: int
    response: int

    def to_bytes(self, group: GroupParams) -> bytes:
        return (
            group.encode_element(self.commitment)
            + group.encode_scalar(self.challenge)
            + group.encode_scalar(self.response)
        )

    @classmethod
    def read_from(cls, reader: enc.Reader, group: GroupParams) -> "SchnorrProof":
        commitment = group.decode_element(reader.take(group.element_size))
        challenge = group.decode_scalar(reader.take(group.scalar_size))
        response = group.decode_scalar(reader.take(group.scalar_size))
        return cls(commitment, challenge, response)


def _schnorr_challenge(group: GroupParams, context: bytes, public: int, commitment: int) -> int:
    payload = enc.prefixed(context) + group.encode_element(public) + group.encode_element(commitment)
    return hash_to_scalar(group, TAG_FS_SCHNORR, payload)


def schnorr_prove(
    group: GroupParams, kp: KeyPair, context: bytes, rng: random.Random | None = None
) -> SchnorrProof:
    """Prove knowledge of kp.secret, bound to an arbitrary context string."""
    r = group.random_scalar(rng)
    commitment = group.exp(group.generator, r)
    challenge = _schnorr_challenge(group, context, kp.public, commitment)
    response = (r + challenge * kp.secret) % group.order
    return SchnorrProof(commitment, challenge, response)


def schnorr_verify(group: GroupParams, public: int, proof: SchnorrProof, context: bytes) -> bool:
    """True iff the challenge recomputes from the context and the equation holds."""
    if not _scalar_ok(group, proof.challenge) or not _scalar_ok(group, proof.response):
        return False
    if not (1 <= proof.commitment < group.modulus) or not (1 <= public < group.modulus):
        return False
    if proof.challenge != _schnorr_challenge(group, context, public, proof.commitment):
        return False
    lhs = group.exp(group.generator, proof.response)
    rhs = group.mul(proof.commitment, group.exp(public, proof.challenge))
    return lhs == rhs


def _scalar_ok(group: GroupParams, value: int) -> bool:
    return 0 <= value < group.order


# ---------------------------------------------------------------------------
# Ring membership proof (one-of-many OR composition)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RingProof:
    """One Schnorr-shaped transcript per ring key plus the binding challenge.

    Branch challenges sum to the binding challenge mod the group order, so
    exactly one branch is forced by the Fiat-Shamir hash while the rest were
    simulated; the transcript layout is identical for every witness index.
    """

    branches: tuple[SchnorrProof, ...]
    binding_challenge: int

    def to_bytes(self, group: GroupParams) -> bytes:
        parts = [enc.u32(len(self.branches))]
        parts.extend(b.to_bytes(group) for b in self.branches)
        parts.append(group.encode_scalar(self.binding_challenge))
        return b"".join(parts)

    @classmethod
    def read_from(cls, reader: enc.Reader, group: GroupParams) -> "RingProof":
        count = reader.u32()
        branches = tuple(SchnorrProof.read_from(reader, group) for _ in range(count))
        binding = group.decode_scalar(reader.take(group.scalar_size))
        return cls(branches, binding)


def _ring_binding_challenge(
    group: GroupParams, context: bytes, commitments: Sequence[int]
) -> int:
    parts = [enc.prefixed(context), enc.u32(len(commitments))]
    parts.extend(group.encode_element(t) for t in commitments)
    return hash_to_scalar(group, TAG_FS_OR, b"".join(parts))


@dataclass(frozen=True)
class _RingCommitState:
    index: int
    nonce: int
    commitments: tuple[int, ...]
    simulated: tuple[tuple[int, int], ...]  # (challenge, response) per branch; witness slot unused


def _ring_commit(
    group: GroupParams, ring: Sequence[int], index: int, rng: random.Random | None
) -> _RingCommitState:
    commitments: list[int] = []
    simulated: list[tuple[int, int]] = []
    nonce = 0
    for i, key in enumerate(ring):
        if i == index:
            nonce = group.random_scalar(rng)
            commitments.append(group.exp(group.generator, nonce))
            simulated.append((0, 0))
        else:
            # Simulated branch: pick the challenge and response first, then
            # solve for the commitment that satisfies the verification equation.
            c = group.random_scalar(rng)
            s = group.random_scalar(rng)
            commitments.append(group.mul(group.exp(group.generator, s), group.exp(key, -c)))
            simulated.append((c, s))
    return _RingCommitState(index, nonce, tuple(commitments), tuple(simulated))


def _ring_finish(
    group: GroupParams, state: _RingCommitState, secret: int, binding: int
) -> RingProof:
    simulated_sum = sum(c for i, (c, _) in enumerate(state.simulated) if i != state.index)
    real_challenge = (binding - simulated_sum) % group.order
    real_response = (state.nonce + real_challenge * secret) % group.order
    branches = []
    for i, commitment in enumerate(state.commitments):
        if i == state.index:
            branches.append(SchnorrProof(commitment, real_challenge, real_response))
        else:
            c, s = state.simulated[i]
            branches.append(SchnorrProof(commitment, c, s))
    return RingProof(tuple(branches), binding)


def ring_prove(
    group: GroupParams,
    ring: Sequence[int],
    index: int,
    secret: int,
    context: bytes,
    rng: random.Random | None = None,
) -> RingProof:
    """Prove knowledge of the secret for ring[index] without revealing the index."""
    if not 0 <= index < len(ring):
        raise IndexError(f"witness index {index} outside ring of {len(ring)}")
    if group.exp(group.generator, secret) != ring[index]:
        raise ValueError("witness secret does not match the ring key at the given index")
    state = _ring_commit(group, ring, index, rng)
    binding = _ring_binding_challenge(group, context, state.commitments)
    return _ring_finish(group, state, secret, binding)


def ring_verify(
    group: GroupParams, ring: Sequence[int], proof: RingProof, context: bytes
) -> bool:
    """True iff challenges sum to the recomputed binding and every branch equation holds."""
    if len(proof.branches) != len(ring) or len(ring) == 0:
        return False
    for branch in proof.branches:
        if not _scalar_ok(group, branch.challenge) or not _scalar_ok(group, branch.response):
            return False
        if not (1 <= branch.commitment < group.modulus):
            return False
    binding = _ring_binding_challenge(group, context, [b.commitment for b in proof.branches])
    if binding != proof.binding_challenge:
        return False
    if sum(b.challenge for b in proof.branches) % group.order != binding:
        return False
    for key, branch in zip(ring, proof.branches):
        lhs = group.exp(group.generator, branch.response)
        rhs = group.mul(branch.commitment, group.exp(key, branch.challenge))
        if lhs != rhs:
            return False
    return True


# ---------------------------------------------------------------------------
# Credential proof: ring membership AND possession of a fresh block key
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CredentialProof:
    """Anonymous credential for one block: enrolled identity + fresh key.

    The joint context is key-list digest || block public key || digest of
    both commitment sets; each sub-challenge derives from it, so the proof
    cannot be re-targeted at another block key or another key list.
    """

    membership: RingProof
    possession: SchnorrProof
    joint_context: bytes

    def to_bytes(self, group: GroupParams) -> bytes:
        return (
            enc.prefixed(self.joint_context)
            + self.membership.to_bytes(group)
            + self.possession.to_bytes(group)
        )

    @classmethod
    def read_from(cls, reader: enc.Reader, group: GroupParams) -> "CredentialProof":
        joint_context = reader.prefixed()
        membership = RingProof.read_from(reader, group)
        possession = SchnorrProof.read_from(reader, group)
        return cls(membership, possession, joint_context)

    @classmethod
    def from_bytes(cls, data: bytes, group: GroupParams) -> "CredentialProof":
        reader = enc.Reader(data)
        proof = cls.read_from(reader, group)
        reader.expect_end()
        return proof


def _joint_context(
    group: GroupParams,
    ring: Sequence[int],
    block_public: int,
    possession_commitment: int,
    ring_commitments: Sequence[int],
) -> bytes:
    commit_parts = [group.encode_element(possession_commitment), enc.u32(len(ring_commitments))]
    commit_parts.extend(group.encode_element(t) for t in ring_commitments)
    return (
        key_list_digest(group, ring)
        + group.encode_element(block_public)
        + digest(b"".join(commit_parts))
    )


def credential_prove(
    group: GroupParams,
    ring: Sequence[int],
    index: int,
    identity_secret: int,
    block_kp: KeyPair,
    rng: random.Random | None = None,
) -> CredentialProof:
    """Bind ring membership of an identity key to possession of a block key."""
    if not 0 <= index < len(ring):
        raise IndexError(f"witness index {index} outside ring of {len(ring)}")
    if group.exp(group.generator, identity_secret) != ring[index]:
        raise ValueError("identity secret does not match the ring key at the given index")
    ring_state = _ring_commit(group, ring, index, rng)
    possession_nonce = group.random_scalar(rng)
    possession_commitment = group.exp(group.generator, possession_nonce)
    joint = _joint_context(group, ring, block_kp.public, possession_commitment, ring_state.commitments)

    binding = _ring_binding_challenge(group, joint, ring_state.commitments)
    membership = _ring_finish(group, ring_state, identity_secret, binding)

    challenge = _schnorr_challenge(group, joint, block_kp.public, possession_commitment)
    response = (possession_nonce + challenge * block_kp.secret) % group.order
    possession = SchnorrProof(possession_commitment, challenge, response)
    return CredentialProof(membership, possession, joint)


def credential_verify(
    group: GroupParams, ring: Sequence[int], block_public: int, proof: CredentialProof
) -> bool:
    """True iff both halves verify under the joint context recomputed from inputs."""
    if not group.is_element(block_public):
        return False
    if len(proof.membership.branches) != len(ring):
        return False
    expected = _joint_context(
        group,
        ring,
        block_public,
        proof.possession.commitment,
        [b.commitment for b in proof.membership.branches],
    )
    if proof.joint_context != expected:
        return False
    return ring_verify(group, ring, proof.membership, expected) and schnorr_verify(
        group, block_public, proof.possession, expected
    )


# ---------------------------------------------------------------------------
# Schnorr signatures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Signature:
    commitment: int
    response: int

    def to_bytes(self, group: GroupParams) -> bytes:
        return group.encode_element(self.commitment) + group.encode_scalar(self.response)

    @classmethod
    def read_from(cls, reader: enc.Reader, group: GroupParams) -> "Signature":
        commitment = group.decode_element(reader.take(group.element_size))
        response = group.decode_scalar(reader.take(group.scalar_size))
        return cls(commitment, response)


def _signature_challenge(group: GroupParams, public: int, commitment: int, message: bytes) -> int:
    payload = group.encode_element(public) + group.encode_element(commitment) + digest(message)
    return hash_to_scalar(group, TAG_SIG, payload)


def sign(group: GroupParams, kp: KeyPair, message: bytes, rng: random.Random | None = None) -> Signature:
    """Schnorr signature over the digest of the message."""
    r = group.random_scalar(rng)
    commitment = group.exp(group.generator, r)
    challenge = _signature_challenge(group, kp.public, commitment, message)
    response = (r + challenge * kp.secret) % group.order
    return Signature(commitment, response)


def verify_signature(group: GroupParams, public: int, message: bytes, sig: Signature) -> bool:
    if not _scalar_ok(group, sig.response) or not (1 <= sig.commitment < group.modulus):
        return False
    if not (1 <= public < group.modulus):
        return False
    challenge = _signature_challenge(group, public, sig.commitment, message)
    lhs = group.exp(group.generator, sig.response)
    rhs = group.mul(sig.commitment, group.exp(public, challenge))
    return lhs == rhs


# ---------------------------------------------------------------------------
# Authenticated symmetric encryption (AES-256-GCM, nonce-prefixed)
# ---------------------------------------------------------------------------


def new_sym_key(rng: random.Random | None = None) -> bytes:
    return _rng(rng).randbytes(SYM_KEY_SIZE)


def sym_encrypt(key: bytes, plaintext: bytes, rng: random.Random | None = None) -> bytes:
    """Encrypt under a fresh random nonce; returns nonce || ciphertext+tag."""
    if len(key) != SYM_KEY_SIZE:
        raise ValueError(f"symmetric key must be {SYM_KEY_SIZE} bytes")
    nonce = _rng(rng).randbytes(_GCM_NONCE_SIZE)
    return nonce + AESGCM(key).encrypt(nonce, plaintext, None)


def sym_decrypt(key: bytes, ciphertext: bytes) -> bytes:
    """Decrypt a nonce-prefixed ciphertext; raises DecryptionError on any tamper."""
    if len(key) != SYM_KEY_SIZE:
        raise ValueError(f"symmetric key must be {SYM_KEY_SIZE} bytes")
    if len(ciphertext) < _GCM_NONCE_SIZE + 16:
        raise DecryptionError("ciphertext too short")
    nonce, body = ciphertext[:_GCM_NONCE_SIZE], ciphertext[_GCM_NONCE_SIZE:]
    try:
        return AESGCM(key).decrypt(nonce, body, None)
    except InvalidTag as exc:
        raise DecryptionError("authentication failed") from exc
