"""Permissioned health-record ledger sandbox.

Patients and hospitals publish jointly signed record blocks under fresh
per-block keys, proving enrollment anonymously with ring-membership
proofs; hospitals vote blocks in at a 50% threshold; researchers fork
blocks to request visit ranges and verify disclosed data against the
chained on-chain commitments.
"""

from .access import (
    DisclosureEntry,
    DisclosurePackage,
    VerificationReport,
    build_disclosure_package,
    create_approval_block,
    create_request_block,
    pending_requests,
    scan_blocks,
    verify_disclosure,
)
from .consensus import ConsensusResult, MinerPool, run_consensus, verify_block
from .crypto import (
    CredentialProof,
    KeyPair,
    RingProof,
    SchnorrProof,
    Signature,
    credential_prove,
    credential_verify,
    digest,
    keygen,
    new_sym_key,
    ring_prove,
    ring_verify,
    schnorr_prove,
    schnorr_verify,
    sign,
    sym_decrypt,
    sym_encrypt,
    verify_signature,
)
from .group import GroupParams
from .ledger import (
    ApprovalBlock,
    BlockSecrets,
    Chain,
    GENESIS_STATE,
    HospitalContext,
    OffChainStore,
    PatientBlock,
    PatientContext,
    PatientSecrets,
    RequestBlock,
    TimeRange,
    chain_state,
    create_patient_block,
    state_commitment,
)
from .registry import ConditionCodebook, Directories, Registry, codes_match, new_directories

__all__ = [
    "ApprovalBlock",
    "BlockSecrets",
    "Chain",
    "ConditionCodebook",
    "ConsensusResult",
    "CredentialProof",
    "Directories",
    "DisclosureEntry",
    "DisclosurePackage",
    "GENESIS_STATE",
    "GroupParams",
    "HospitalContext",
    "KeyPair",
    "MinerPool",
    "OffChainStore",
    "PatientBlock",
    "PatientContext",
    "PatientSecrets",
    "Registry",
    "RequestBlock",
    "RingProof",
    "SchnorrProof",
    "Signature",
    "TimeRange",
    "VerificationReport",
    "build_disclosure_package",
    "chain_state",
    "codes_match",
    "create_approval_block",
    "create_patient_block",
    "create_request_block",
    "credential_prove",
    "credential_verify",
    "digest",
    "keygen",
    "new_directories",
    "new_sym_key",
    "pending_requests",
    "ring_prove",
    "ring_verify",
    "run_consensus",
    "scan_blocks",
    "schnorr_prove",
    "schnorr_verify",
    "sign",
    "state_commitment",
    "sym_decrypt",
    "sym_encrypt",
    "verify_block",
    "verify_disclosure",
    "verify_signature",
]
