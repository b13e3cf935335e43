"""Flat verify-and-vote consensus over a simulated miner pool.

Every miner (hospital) checks the submitted block and votes; the block
is approved once at least half the pool approves. Malicious miners
reject immediately at zero verification cost. Time is a virtual clock:
each honest miner's verification cost is sampled from the pool's timing
model, and every miner propagates its vote to every other miner at a
constant cost per ordered pair, so total propagation grows with the
square of the pool size.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass

from . import encoding as enc
from .crypto import credential_verify, verify_signature
from .ledger import ApprovalBlock, Block, Chain, PatientBlock, RequestBlock
from .registry import Directories


@dataclass(frozen=True)
class MinerPool:
    """Simulation parameters for one mining group.

    verify_seconds is the honest per-miner verification cost; set it to
    None to use the measured wall time of the actual block verification
    instead (results are then no longer reproducible across machines).
    verify_jitter adds a per-miner uniform [0, jitter) sample on top.
    """

    n_miners: int
    malicious_fraction: float = 0.0
    verify_seconds: float | None = 1e-3
    verify_jitter: float = 0.0
    pair_seconds: float = 1e-6

    def __post_init__(self) -> None:
        if self.n_miners < 1:
            raise ValueError("pool needs at least one miner")
        if not 0.0 <= self.malicious_fraction <= 1.0:
            raise ValueError("malicious_fraction must be in [0, 1]")
        if self.verify_jitter < 0 or self.pair_seconds < 0:
            raise ValueError("timing constants must be nonnegative")

    @property
    def n_malicious(self) -> int:
        # The epsilon absorbs float error in fraction * n when the fraction
        # was written as count/n (e.g. 15/22 * 22 rounds below 15).
        return math.floor(self.malicious_fraction * self.n_miners + 1e-9)


@dataclass(frozen=True)
class MinerVote:
    miner: int
    malicious: bool
    approve: bool
    seconds: float

    def to_bytes(self) -> bytes:
        return enc.u32(self.miner) + enc.u8(self.malicious) + enc.u8(self.approve) + enc.f64(self.seconds)

    @classmethod
    def read_from(cls, reader: enc.Reader) -> "MinerVote":
        return cls(reader.u32(), bool(reader.u8()), bool(reader.u8()), reader.f64())


@dataclass(frozen=True)
class ConsensusResult:
    approved: bool
    approvals: int
    rejections: int
    simulated_time: float
    votes: tuple[MinerVote, ...]

    def to_bytes(self) -> bytes:
        parts = [
            enc.u8(self.approved),
            enc.u32(self.approvals),
            enc.u32(self.rejections),
            enc.f64(self.simulated_time),
            enc.u32(len(self.votes)),
        ]
        parts.extend(v.to_bytes() for v in self.votes)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "ConsensusResult":
        reader = enc.Reader(data)
        approved = bool(reader.u8())
        approvals = reader.u32()
        rejections = reader.u32()
        simulated = reader.f64()
        votes = tuple(MinerVote.read_from(reader) for _ in range(reader.u32()))
        reader.expect_end()
        return cls(approved, approvals, rejections, simulated, votes)


def approval_threshold(n_miners: int) -> int:
    """Votes needed for approval: at least half the pool."""
    return math.ceil(n_miners / 2)


# ---------------------------------------------------------------------------
# Block verification (what each honest miner runs)
# ---------------------------------------------------------------------------


def verify_block(block: Block, directories: Directories, chain: Chain | None = None) -> bool:
    """Full miner-side validity check; returns False on any malformed input."""
    try:
        if isinstance(block, PatientBlock):
            return _verify_patient_block(block, directories)
        if isinstance(block, RequestBlock):
            return _verify_request_block(block, directories, chain)
        if isinstance(block, ApprovalBlock):
            return _verify_approval_block(block, directories, chain)
        return False
    except Exception:
        return False


def _verify_patient_block(block: PatientBlock, directories: Directories) -> bool:
    group = directories.group
    if not credential_verify(
        group, directories.patients.keys, block.patient_block_pk, block.patient_credential
    ):
        return False
    if not credential_verify(
        group, directories.hospitals.keys, block.hospital_block_pk, block.hospital_credential
    ):
        return False
    body = block.body_bytes()
    if not verify_signature(group, block.patient_block_pk, body, block.patient_sig):
        return False
    return verify_signature(group, block.hospital_block_pk, body, block.hospital_sig)


def _verify_request_block(block: RequestBlock, directories: Directories, chain: Chain | None) -> bool:
    if chain is None:
        return False
    group = directories.group
    parent = chain.get(block.parent_ptr)
    if not isinstance(parent, PatientBlock):
        return False
    if block.researcher_pk not in directories.researchers:
        return False
    message = parent.canonical_bytes() + block.requested_range.to_bytes()
    return verify_signature(group, block.researcher_pk, message, block.signature)


def _verify_approval_block(block: ApprovalBlock, directories: Directories, chain: Chain | None) -> bool:
    if chain is None:
        return False
    group = directories.group
    request = chain.get(block.parent_ptr)
    if not isinstance(request, RequestBlock):
        return False
    forked = chain.get(request.parent_ptr)
    if not isinstance(forked, PatientBlock):
        return False
    if not request.requested_range.encloses(block.granted_range):
        return False
    message = request.canonical_bytes() + block.granted_range.to_bytes()
    return verify_signature(group, forked.patient_block_pk, message, block.signature)


# ---------------------------------------------------------------------------
# The vote
# ---------------------------------------------------------------------------


def run_consensus(
    block: Block,
    pool: MinerPool,
    directories: Directories,
    seed: int,
    chain: Chain | None = None,
) -> ConsensusResult:
    """Simulate one consensus round over the pool.

    The malicious subset is drawn deterministically from the seed. Honest
    miners all apply the same deterministic validity check (run once);
    malicious miners reject without verifying. The simulated time is the
    slowest miner's verification cost plus all-to-all vote propagation.
    """
    rng = random.Random(seed)
    malicious = frozenset(rng.sample(range(pool.n_miners), pool.n_malicious))

    if pool.verify_seconds is None:
        started = time.perf_counter()
        valid = verify_block(block, directories, chain)
        base_cost = time.perf_counter() - started
    else:
        valid = verify_block(block, directories, chain)
        base_cost = pool.verify_seconds

    votes = []
    approvals = 0
    for miner in range(pool.n_miners):
        # One jitter draw per miner regardless of role keeps the RNG stream
        # and the per-round bookkeeping independent of the malicious count.
        jitter = rng.random() * pool.verify_jitter
        if miner in malicious:
            votes.append(MinerVote(miner=miner, malicious=True, approve=False, seconds=0.0))
        else:
            votes.append(MinerVote(miner=miner, malicious=False, approve=valid, seconds=base_cost + jitter))
            approvals += int(valid)

    propagation = pool.pair_seconds * pool.n_miners * (pool.n_miners - 1)
    simulated = max((v.seconds for v in votes), default=0.0) + propagation
    return ConsensusResult(
        approved=approvals >= approval_threshold(pool.n_miners),
        approvals=approvals,
        rejections=pool.n_miners - approvals,
        simulated_time=simulated,
        votes=tuple(votes),
    )
