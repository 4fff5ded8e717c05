"""Chain core: hashing goldens, PoW, validation, tamper evidence."""

import hashlib
import threading
from dataclasses import replace

import pytest

from meshchain import (
    GENESIS,
    Block,
    ChainError,
    EditScript,
    MeshDelta,
    MiningAborted,
    Transaction,
    Vertex,
    cumulative_work,
    make_transaction,
    meets_difficulty,
    mine_block,
    tx_id,
    validate_block,
    verify_transaction,
)

from helpers import (
    build_chain,
    flip_hex,
    mutate_delta,
    single_field_mutations,
    single_vertex_delta,
    validate_chain,
)

# Network identifier, frozen. Computed once from the documented canonical
# header and double-checked against plain hashlib below.
GENESIS_HASH = "5cad9cb8d9564a30a4d14427cb7ec0ec959929162b87ca92bddbfb97616f5c49"

# Root transaction with author "a", timestamp 0, delta inserting vertex
# (1, 0, 0). Digest computed independently over the documented bytes.
GOLDEN_ROOT_TX_ID = "7ada2011637993da86e42dfd70e79fec1d5da71557e31d05738eb6d3b542505d"


class TestGenesis:
    def test_constant_fields(self):
        assert GENESIS.height == 0
        assert GENESIS.prev_hash == "0" * 64
        assert GENESIS.tx_ids == ()
        assert GENESIS.nonce == 0
        assert GENESIS.timestamp == 0
        assert GENESIS.difficulty == 0

    def test_hash_pinned(self):
        assert GENESIS.hash == GENESIS_HASH

    def test_hash_matches_independent_sha256(self):
        preimage = (
            '{"difficulty":0,"height":0,"nonce":0,"prev_hash":"' + "0" * 64
            + '","timestamp":0,"tx_ids":[]}'
        )
        assert hashlib.sha256(preimage.encode()).hexdigest() == GENESIS.hash


class TestTxId:
    def test_golden_value_from_documented_bytes(self):
        preimage = (
            '{"author":"a","delta":{"faces":{"deletions":[],"insertions":[]},'
            '"vertices":{"deletions":[],"insertions":[[0,["1.000000","0.000000",'
            '"0.000000"]]]}},"parent_tx_id":null,"timestamp":0}'
        )
        independent = hashlib.sha256(preimage.encode()).hexdigest()
        assert independent == GOLDEN_ROOT_TX_ID
        assert tx_id(None, single_vertex_delta(), "a", 0) == GOLDEN_ROOT_TX_ID

    def test_deterministic(self):
        delta = single_vertex_delta()
        assert tx_id(None, delta, "a", 0) == tx_id(None, delta, "a", 0)

    def test_timestamp_changes_digest(self):
        delta = single_vertex_delta()
        assert tx_id(None, delta, "a", 0) != tx_id(None, delta, "a", 1)

    def test_parent_changes_digest(self):
        delta = single_vertex_delta()
        assert tx_id(None, delta, "a", 0) != tx_id("ab" * 32, delta, "a", 0)


class TestTransaction:
    def test_make_transaction_id_verifies(self):
        tx = make_transaction(None, single_vertex_delta(), "alice", 42)
        assert verify_transaction(tx) == []

    def test_id_mismatch_detected(self):
        tx = make_transaction(None, single_vertex_delta(), "alice", 42)
        tampered = replace(tx, author="bob")
        problems = verify_transaction(tampered)
        assert problems and "id mismatch" in problems[0]

    def test_trivial_delta_requires_root(self):
        root = make_transaction(None, single_vertex_delta(), "a", 0)
        child = make_transaction(root.id, MeshDelta(), "a", 1)
        problems = verify_transaction(child)
        assert any("empty delta" in p for p in problems)

    def test_author_size_capped(self):
        with pytest.raises(ChainError):
            make_transaction(None, single_vertex_delta(), "x" * 257, 0)

    def test_json_roundtrip(self):
        tx = make_transaction(None, single_vertex_delta(), "alice", 42)
        assert Transaction.from_json(tx.to_json()) == tx

    def test_from_json_rejects_extra_fields(self):
        tx = make_transaction(None, single_vertex_delta(), "alice", 42)
        data = tx.to_json()
        data["fee"] = 1
        with pytest.raises(ChainError):
            Transaction.from_json(data)


class TestMeetsDifficulty:
    def test_zero_always_true(self):
        assert meets_difficulty("f" * 64, 0)
        assert meets_difficulty(GENESIS.hash, 0)

    def test_sixteen_bit_boundary(self):
        # 0x0000ffff... has exactly 16 leading zero bits; 0x0001 has 15.
        assert meets_difficulty("0000" + "f" * 60, 16)
        assert not meets_difficulty("0001" + "f" * 60, 16)

    def test_top_bit_set_fails_one(self):
        assert not meets_difficulty("8" + "0" * 63, 1)
        assert meets_difficulty("7" + "f" * 63, 1)

    def test_difficulty_255(self):
        assert meets_difficulty("0" * 63 + "1", 255)
        assert not meets_difficulty("0" * 62 + "20", 255)

    def test_out_of_range_rejected(self):
        with pytest.raises(ChainError):
            meets_difficulty("0" * 64, 256)
        with pytest.raises(ChainError):
            meets_difficulty("0" * 64, -1)


class TestMineBlock:
    def test_difficulty_zero_accepts_nonce_zero(self):
        tx = make_transaction(None, single_vertex_delta(), "a", 0)
        block = mine_block(GENESIS, [tx], 0, timestamp=7)
        assert block.nonce == 0
        assert block.height == 1
        assert block.prev_hash == GENESIS.hash

    def test_mined_block_validates(self):
        tx = make_transaction(None, single_vertex_delta(), "a", 0)
        block = mine_block(GENESIS, [tx], 8, timestamp=7)
        assert validate_block(block, GENESIS, set(), 8) == []
        assert meets_difficulty(block.hash, 8)

    def test_abort_flag_preset(self):
        tx = make_transaction(None, single_vertex_delta(), "a", 0)
        flag = threading.Event()
        flag.set()
        with pytest.raises(MiningAborted):
            mine_block(GENESIS, [tx], 8, should_abort=flag.is_set)

    def test_refuses_empty_transaction_list(self):
        with pytest.raises(ChainError):
            mine_block(GENESIS, [], 0)

    def test_refuses_duplicate_ids(self):
        tx = make_transaction(None, single_vertex_delta(), "a", 0)
        with pytest.raises(ChainError):
            mine_block(GENESIS, [tx, tx], 0)

    def test_block_json_roundtrip(self):
        tx = make_transaction(None, single_vertex_delta(), "a", 0)
        block = mine_block(GENESIS, [tx], 4, timestamp=7)
        assert Block.from_json(block.to_json()) == block


class TestValidateBlock:
    def test_valid_chain_has_no_violations(self):
        assert validate_chain(build_chain(), 4) == []

    def test_delta_tamper_reports_tx_and_hash(self):
        blocks = build_chain()
        block = blocks[1]
        tampered_tx = replace(block.transactions[0], delta=mutate_delta(block.transactions[0].delta))
        tampered = replace(block, transactions=(tampered_tx,) + block.transactions[1:])
        violations = validate_block(tampered, GENESIS, set(), 4)
        assert any("id mismatch" in v for v in violations)

    def test_unknown_parent_rejected(self):
        orphan = make_transaction("cd" * 32, single_vertex_delta(), "a", 0)
        block = mine_block(GENESIS, [orphan], 0, timestamp=5)
        violations = validate_block(block, GENESIS, set(), 0)
        assert any("unknown" in v for v in violations)

    def test_parent_later_in_block_rejected(self):
        t0 = make_transaction(None, single_vertex_delta(1.0), "a", 0)
        t1 = make_transaction(t0.id, single_vertex_delta(2.0), "a", 1)
        block = mine_block(GENESIS, [t1, t0], 0, timestamp=5)
        violations = validate_block(block, GENESIS, set(), 0)
        assert any("later in the same block" in v for v in violations)

    def test_parent_earlier_in_block_accepted(self):
        t0 = make_transaction(None, single_vertex_delta(1.0), "a", 0)
        t1 = make_transaction(t0.id, single_vertex_delta(2.0), "a", 1)
        block = mine_block(GENESIS, [t0, t1], 0, timestamp=5)
        assert validate_block(block, GENESIS, set(), 0) == []

    def test_tx_already_in_chain_rejected(self):
        tx = make_transaction(None, single_vertex_delta(), "a", 0)
        block = mine_block(GENESIS, [tx], 0, timestamp=5)
        violations = validate_block(block, GENESIS, {tx.id}, 0)
        assert any("already in chain" in v for v in violations)

    def test_wrong_network_difficulty_rejected(self):
        tx = make_transaction(None, single_vertex_delta(), "a", 0)
        block = mine_block(GENESIS, [tx], 0, timestamp=5)
        violations = validate_block(block, GENESIS, set(), 8)
        assert any("network constant" in v for v in violations)

    def test_height_and_linkage_checked(self):
        blocks = build_chain()
        violations = validate_block(blocks[2], GENESIS, set(), 4)
        assert any(v.startswith("height") for v in violations)
        assert any(v.startswith("prev_hash") for v in violations)


class TestTamperEvidence:
    def test_every_single_field_mutation_detected(self):
        blocks = build_chain()
        assert validate_chain(blocks, 4) == []
        checked = 0
        for index in range(1, len(blocks)):
            for label, mutated in single_field_mutations(blocks[index]):
                chain = list(blocks)
                chain[index] = mutated
                assert validate_chain(chain, 4), (
                    f"mutation of block {index} field {label} went undetected"
                )
                checked += 1
        assert checked >= 40

    def test_genesis_mutation_detected(self):
        blocks = build_chain()
        chain = list(blocks)
        chain[0] = replace(GENESIS, timestamp=1, hash=GENESIS.hash)
        assert "genesis mismatch" in validate_chain(chain, 4)


class TestCumulativeWork:
    def test_genesis_alone(self):
        assert cumulative_work([GENESIS]) == 1

    def test_two_blocks_difficulty_eight(self):
        t0 = make_transaction(None, single_vertex_delta(1.0), "a", 0)
        b1 = mine_block(GENESIS, [t0], 8, timestamp=1)
        t1 = make_transaction(t0.id, single_vertex_delta(2.0), "a", 1)
        b2 = mine_block(b1, [t1], 8, timestamp=2)
        assert cumulative_work([GENESIS, b1, b2]) == 1 + 256 + 256

    def test_longer_chain_strictly_heavier(self):
        blocks = build_chain()
        assert cumulative_work(blocks) > cumulative_work(blocks[:-1])
