import random
from dataclasses import dataclass, field

import pytest

from phrchain import (
    Chain,
    ConditionCodebook,
    Directories,
    HospitalContext,
    KeyPair,
    MinerPool,
    OffChainStore,
    PatientBlock,
    PatientContext,
    PatientSecrets,
    create_patient_block,
    keygen,
    new_directories,
    run_consensus,
)
from phrchain.group import GroupParams


@pytest.fixture(scope="session")
def group():
    return GroupParams.default()


@pytest.fixture()
def tiny_group():
    # Subgroup of order 11 in Z_23*; small enough for brute-force oracles.
    return GroupParams(group_id="tiny-23", modulus=23, order=11, generator=4)


@dataclass
class World:
    """A populated simulation: registries, codebook, store, chain, miner pool."""

    group: GroupParams
    directories: Directories
    codebook: ConditionCodebook
    store: OffChainStore
    chain: Chain
    pool: MinerPool
    patient_kps: list[KeyPair]
    hospital_kps: list[KeyPair]
    researcher_kps: list[KeyPair]
    rng: random.Random
    seed: int
    _seq: int = field(default=0)

    def patient(self, index: int = 0, secrets: PatientSecrets | None = None) -> PatientContext:
        return PatientContext(
            identity=self.patient_kps[index], index=index, secrets=secrets or PatientSecrets()
        )

    def hospital(self, index: int = 0) -> HospitalContext:
        return HospitalContext(identity=self.hospital_kps[index], index=index)

    def submit_block(
        self,
        patient: PatientContext,
        data: bytes,
        visit_time: int,
        bits: bytes | None = None,
        hospital_index: int = 0,
        append: bool = True,
    ) -> tuple[PatientBlock, PatientContext]:
        """Create a block, run consensus, append, and roll the patient context."""
        if bits is None:
            bits = self.codebook.encode([], [])
        block, secrets = create_patient_block(
            patient,
            self.hospital(hospital_index),
            data,
            bits,
            self.directories,
            self.store,
            visit_time=visit_time,
            rng=self.rng,
        )
        if append:
            self._seq += 1
            result = run_consensus(block, self.pool, self.directories, seed=self.seed + self._seq)
            self.chain.append(block, result)
        return block, PatientContext(identity=patient.identity, index=patient.index, secrets=secrets)


@pytest.fixture()
def make_world(group):
    def build(patients=4, hospitals=4, researchers=1, miners=8, malicious=0.0, seed=7) -> World:
        rng = random.Random(seed)
        directories = new_directories(group)
        patient_kps = [keygen(group, rng) for _ in range(patients)]
        hospital_kps = [keygen(group, rng) for _ in range(hospitals)]
        researcher_kps = [keygen(group, rng) for _ in range(researchers)]
        for kp in patient_kps:
            directories.patients.enroll(kp.public)
        for kp in hospital_kps:
            directories.hospitals.enroll(kp.public)
        for kp in researcher_kps:
            directories.researchers.enroll(kp.public)
        return World(
            group=group,
            directories=directories,
            codebook=ConditionCodebook.default(),
            store=OffChainStore(),
            chain=Chain(group),
            pool=MinerPool(n_miners=miners, malicious_fraction=malicious),
            patient_kps=patient_kps,
            hospital_kps=hospital_kps,
            researcher_kps=researcher_kps,
            rng=rng,
            seed=seed,
        )

    return build
