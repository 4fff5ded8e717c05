"""Node behavior: commit/mine/checkout, gossip, forks, persistence."""

import json
import logging
import random
import threading

import pytest

from meshchain import (
    EMPTY_MESH,
    GENESIS,
    AdmitStatus,
    BlockStatus,
    Mesh,
    Node,
    NodeConfig,
    NodeError,
    PeerTransport,
    PeerUnreachable,
    SyncOutcome,
    Transaction,
    Block,
    canonical_dumps,
    diff_mesh,
    make_transaction,
    mine_block,
    parse_obj,
)

from helpers import mutate_mesh

TRIANGLE = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3")
QUAD = parse_obj("v 0 0 0\nv 2 0 0\nv 2 2 0\nv 0 2 0\nf 1 2 3 4")


class DirectTransport(PeerTransport):
    """In-process wire: payloads still JSON-roundtrip for fidelity."""

    def __init__(self, registry, origin):
        self.registry = registry
        self.origin = origin
        self.sent_txs = []
        self.sent_blocks = []

    def _peer(self, url) -> Node:
        node = self.registry.get(url)
        if node is None:
            raise PeerUnreachable(f"no such peer {url}")
        return node

    def send_transaction(self, peer, tx_json):
        self.sent_txs.append((peer, tx_json["id"]))
        tx = Transaction.from_json(json.loads(canonical_dumps(tx_json)))
        self._peer(peer).receive_transaction(tx, from_peer=self.origin)

    def send_block(self, peer, block_json):
        self.sent_blocks.append((peer, block_json["hash"]))
        block = Block.from_json(json.loads(canonical_dumps(block_json)))
        self._peer(peer).receive_block(block, from_peer=self.origin)

    def fetch_chain(self, peer):
        return [b.to_json() for b in self._peer(peer).active_chain()]

    def fetch_genesis_hash(self, peer):
        return self._peer(peer).genesis_hash


def make_network(count, difficulty=0, topology=None, data_dirs=None):
    """Nodes wired through DirectTransport; topology defaults to full."""
    registry = {}
    nodes = []
    for i in range(count):
        url = f"http://node{i}"
        config = NodeConfig(
            difficulty=difficulty,
            author=f"node{i}",
            data_dir=None if data_dirs is None else data_dirs[i],
        )
        node = Node(config, transport=DirectTransport(registry, url))
        node.set_self_url(url)
        registry[url] = node
        nodes.append(node)
    for i, node in enumerate(nodes):
        peers = topology[i] if topology else [j for j in range(count) if j != i]
        for p in peers:
            node.add_peer(f"http://node{p}")
    return nodes


class TestCommit:
    def test_first_commit_is_root_with_full_delta(self):
        (node,) = make_network(1)
        tx = node.handle_commit(TRIANGLE, author="alice")
        assert tx.parent_tx_id is None
        assert len(tx.delta.vertex_script.insertions) == 3
        assert len(tx.delta.face_script.insertions) == 1
        pending, _ = node.mempool_snapshot()
        assert pending == [tx]

    def test_successive_commits_chain_in_mempool(self):
        (node,) = make_network(1)
        first = node.handle_commit(TRIANGLE)
        second = node.handle_commit(QUAD)
        assert second.parent_tx_id == first.id
        node.handle_mine()
        assert node.handle_checkout(first.id) == TRIANGLE
        assert node.handle_checkout(second.id) == QUAD

    def test_commit_after_mine_parents_on_chain_tip(self):
        (node,) = make_network(1)
        first = node.handle_commit(TRIANGLE)
        node.handle_mine()
        second = node.handle_commit(QUAD)
        assert second.parent_tx_id == first.id

    def test_identical_mesh_rejected(self):
        (node,) = make_network(1)
        node.handle_commit(TRIANGLE)
        with pytest.raises(NodeError, match="nothing changed"):
            node.handle_commit(TRIANGLE)

    def test_empty_first_commit_rejected(self):
        (node,) = make_network(1)
        with pytest.raises(NodeError, match="nothing changed"):
            node.handle_commit(Mesh())

    def test_unknown_parent_override_rejected(self):
        (node,) = make_network(1)
        with pytest.raises(NodeError, match="unknown parent"):
            node.handle_commit(TRIANGLE, parent_override="ab" * 32)

    def test_parent_override_branches_history(self):
        (node,) = make_network(1)
        root = node.handle_commit(TRIANGLE)
        node.handle_commit(QUAD)
        sibling_mesh = mutate_mesh(random.Random(1), TRIANGLE)
        sibling = node.handle_commit(sibling_mesh, parent_override=root.id)
        assert sibling.parent_tx_id == root.id
        node.handle_mine()
        assert node.handle_checkout(sibling.id) == sibling_mesh


class TestMine:
    def test_single_node_mine_empties_pool(self):
        (node,) = make_network(1)
        tx = node.handle_commit(TRIANGLE)
        block = node.handle_mine()
        assert block.height == 1
        assert block.tx_ids == (tx.id,)
        pending, _ = node.mempool_snapshot()
        assert pending == []
        assert node.tip_hash == block.hash

    def test_mine_empty_mempool_is_error(self):
        (node,) = make_network(1)
        with pytest.raises(NodeError, match="empty"):
            node.handle_mine()
        assert node.tip_hash == GENESIS.hash

    def test_mined_block_gossips(self):
        a, b = make_network(2)
        a.handle_commit(TRIANGLE)
        block = a.handle_mine()
        assert b.tip_hash == block.hash


class TestCheckout:
    def test_mempool_tx_not_checkoutable(self):
        (node,) = make_network(1)
        tx = node.handle_commit(TRIANGLE)
        with pytest.raises(NodeError, match="unknown transaction"):
            node.handle_checkout(tx.id)

    def test_unknown_tx(self):
        (node,) = make_network(1)
        with pytest.raises(NodeError):
            node.handle_checkout("ab" * 32)

    def test_rollback_to_earlier_commit(self):
        (node,) = make_network(1)
        first = node.handle_commit(TRIANGLE)
        node.handle_commit(QUAD)
        node.handle_mine()
        assert node.handle_checkout(first.id) == TRIANGLE


class TestGossip:
    def test_transaction_reaches_line_topology_end(self):
        a, b, c = make_network(3, topology=[[1], [0, 2], [1]])
        tx = a.handle_commit(TRIANGLE)
        pending_c, _ = c.mempool_snapshot()
        assert [t.id for t in pending_c] == [tx.id]

    def test_duplicate_not_reforwarded(self):
        a, b = make_network(2)
        tx = a.handle_commit(TRIANGLE)
        sends_before = len(b.transport.sent_txs)
        result = b.receive_transaction(tx, from_peer=None)
        assert result.status is AdmitStatus.DUPLICATE
        assert len(b.transport.sent_txs) == sends_before

    def test_invalid_transaction_dropped_and_logged(self):
        (node,) = make_network(1)
        tx = make_transaction(None, diff_mesh(EMPTY_MESH, TRIANGLE), "a", 0)
        from dataclasses import replace
        forged = replace(tx, author="m")
        result = node.receive_transaction(forged)
        assert result.status is AdmitStatus.INVALID
        pending, orphans = node.mempool_snapshot()
        assert pending == [] and orphans == []
        assert node.violations

    def test_orphan_child_waits_for_parent(self):
        a, b = make_network(2, topology=[[], []])  # no gossip
        root_tx = make_transaction(None, diff_mesh(EMPTY_MESH, TRIANGLE), "x", 1)
        child_tx = make_transaction(root_tx.id, diff_mesh(TRIANGLE, QUAD), "x", 2)
        assert a.receive_transaction(child_tx).status is AdmitStatus.ORPHANED
        result = a.receive_transaction(root_tx)
        assert result.status is AdmitStatus.ADMITTED
        assert [t.id for t in result.promoted] == [child_tx.id]
        pending, _ = a.mempool_snapshot()
        assert [t.id for t in pending] == [root_tx.id, child_tx.id]


def hand_mined_branch(meshes, difficulty=0, author="x", timestamp0=1000):
    """Blocks mined outside any node, one tx per block."""
    blocks = []
    parent_block = GENESIS
    parent_tx = None
    prev_mesh = EMPTY_MESH
    for i, mesh in enumerate(meshes):
        tx = make_transaction(parent_tx, diff_mesh(prev_mesh, mesh), author, timestamp0 + i)
        block = mine_block(parent_block, [tx], difficulty, timestamp=timestamp0 + i)
        blocks.append(block)
        parent_block = block
        parent_tx = tx.id
        prev_mesh = mesh
    return blocks


class TestReceiveBlock:
    def test_extends_tip(self):
        (node,) = make_network(1)
        (block,) = hand_mined_branch([TRIANGLE])
        assert node.receive_block(block) is BlockStatus.EXTENDED
        assert node.tip_hash == block.hash

    def test_duplicate(self):
        (node,) = make_network(1)
        (block,) = hand_mined_branch([TRIANGLE])
        node.receive_block(block)
        assert node.receive_block(block) is BlockStatus.DUPLICATE

    def test_equal_branch_is_side_branch_incumbent_wins(self):
        (node,) = make_network(1)
        (ours,) = hand_mined_branch([TRIANGLE], timestamp0=1000)
        (theirs,) = hand_mined_branch([QUAD], timestamp0=2000)
        node.receive_block(ours)
        assert node.receive_block(theirs) is BlockStatus.SIDE_BRANCH
        assert node.tip_hash == ours.hash

    def test_longer_branch_reorgs_and_readmits(self):
        (node,) = make_network(1)
        (ours,) = hand_mined_branch([TRIANGLE], timestamp0=1000)
        node.receive_block(ours)
        our_tx = ours.transactions[0]
        theirs = hand_mined_branch([QUAD, mutate_mesh(random.Random(0), QUAD)], timestamp0=2000)
        assert node.receive_block(theirs[0]) is BlockStatus.SIDE_BRANCH
        assert node.receive_block(theirs[1]) is BlockStatus.REORGED
        assert node.tip_hash == theirs[1].hash
        pending, _ = node.mempool_snapshot()
        assert [t.id for t in pending] == [our_tx.id]

    def test_invalid_block_dropped_and_logged(self):
        (node,) = make_network(1)
        (block,) = hand_mined_branch([TRIANGLE])
        from dataclasses import replace
        forged = replace(block, timestamp=block.timestamp + 1)
        assert node.receive_block(forged) is BlockStatus.INVALID
        assert node.tip_hash == GENESIS.hash
        assert node.violations

    def test_orphan_block_connects_when_parent_arrives(self):
        (node,) = make_network(1)
        branch = hand_mined_branch([TRIANGLE, QUAD])
        assert node.receive_block(branch[1]) is BlockStatus.ORPHAN
        assert node.tip_hash == GENESIS.hash
        assert node.receive_block(branch[0]) is BlockStatus.EXTENDED
        assert node.tip_hash == branch[1].hash


class TestSyncChain:
    def test_fresh_node_adopts_established_peer(self):
        a, b = make_network(2, topology=[[], []])
        b.handle_commit(TRIANGLE)
        b.handle_mine()
        b.handle_commit(QUAD)
        b.handle_mine()
        assert a.sync_chain("http://node1") is SyncOutcome.ADOPTED
        assert a.tip_hash == b.tip_hash

    def test_equal_chains_kept(self):
        a, b = make_network(2)
        a.handle_commit(TRIANGLE)
        a.handle_mine()  # gossips to b
        assert a.tip_hash == b.tip_hash
        assert a.sync_chain("http://node1") is SyncOutcome.KEPT

    def test_unreachable_peer_kept(self):
        (a,) = make_network(1)
        assert a.sync_chain("http://nowhere") is SyncOutcome.KEPT

    def test_tampered_history_rejected(self):
        a, b = make_network(2, topology=[[], []])
        b.handle_commit(TRIANGLE)
        b.handle_mine()
        b.handle_commit(QUAD)
        b.handle_mine()
        # Byzantine peer: rewrite a stored transaction without re-mining.
        from dataclasses import replace
        with b._lock:
            victim_block = b._branch(b._tip_hash)[1]
            victim_tx = victim_block.transactions[0]
            mutated_tx = replace(victim_tx, author="mallory")
            mutated = replace(victim_block, transactions=(mutated_tx,))
            b._blocks[victim_block.hash] = mutated
        assert a.sync_chain("http://node1") is SyncOutcome.KEPT
        assert a.tip_hash == GENESIS.hash
        assert any("invalid" in v for v in a.violations)

    def test_sync_triggered_by_orphan_block(self):
        a, b = make_network(2, topology=[[], []])
        # b mines two blocks while a hears nothing (no gossip links).
        b.handle_commit(TRIANGLE)
        b.handle_mine()
        b.handle_commit(QUAD)
        block2 = b.handle_mine()
        # a gets only the second block: parent unknown -> sync from sender.
        assert a.receive_block(block2, from_peer="http://node1") is BlockStatus.ORPHAN
        assert a.tip_hash == b.tip_hash


class TestPersistence:
    def test_roundtrip_tip_and_checkouts(self, tmp_path):
        data_dir = str(tmp_path / "node0")
        nodes = make_network(1, data_dirs=[data_dir])
        node = nodes[0]
        first = node.handle_commit(TRIANGLE)
        node.handle_mine()
        second = node.handle_commit(QUAD)
        node.handle_mine()
        tip_before = node.tip_hash
        reborn = Node(NodeConfig(data_dir=data_dir, difficulty=0))
        assert reborn.tip_hash == tip_before
        assert reborn.handle_checkout(first.id) == TRIANGLE
        assert reborn.handle_checkout(second.id) == QUAD

    def test_truncated_store_starts_from_genesis(self, tmp_path, caplog):
        data_dir = str(tmp_path / "node0")
        nodes = make_network(1, data_dirs=[data_dir])
        nodes[0].handle_commit(TRIANGLE)
        nodes[0].handle_mine()
        store = tmp_path / "node0" / "chain.json"
        store.write_text(store.read_text()[: len(store.read_text()) // 2])
        with caplog.at_level(logging.WARNING):
            reborn = Node(NodeConfig(data_dir=data_dir, difficulty=0))
        assert reborn.tip_hash == GENESIS.hash
        assert any("corrupt" in r.message for r in caplog.records)

    def test_tampered_store_starts_from_genesis(self, tmp_path, caplog):
        data_dir = str(tmp_path / "node0")
        nodes = make_network(1, data_dirs=[data_dir])
        nodes[0].handle_commit(TRIANGLE)
        nodes[0].handle_mine()
        store = tmp_path / "node0" / "chain.json"
        payload = json.loads(store.read_text())
        payload["blocks"][1]["transactions"][0]["author"] = "mallory"
        store.write_text(json.dumps(payload))
        with caplog.at_level(logging.WARNING):
            reborn = Node(NodeConfig(data_dir=data_dir, difficulty=0))
        assert reborn.tip_hash == GENESIS.hash

    def test_mempool_not_persisted(self, tmp_path):
        data_dir = str(tmp_path / "node0")
        nodes = make_network(1, data_dirs=[data_dir])
        nodes[0].handle_commit(TRIANGLE)
        nodes[0].handle_mine()
        nodes[0].handle_commit(QUAD)  # left unmined
        reborn = Node(NodeConfig(data_dir=data_dir, difficulty=0))
        pending, _ = reborn.mempool_snapshot()
        assert pending == []


class TestConcurrency:
    def test_interleaved_commits_and_mines_keep_invariants(self):
        (node,) = make_network(1)
        errors = []

        def committer(seed):
            rng = random.Random(seed)
            mesh = TRIANGLE
            for _ in range(10):
                mesh = mutate_mesh(rng, mesh, 2)
                try:
                    node.handle_commit(mesh, author=f"t{seed}")
                except NodeError:
                    pass

        def miner():
            for _ in range(10):
                try:
                    node.handle_mine()
                except NodeError:
                    pass

        threads = [threading.Thread(target=committer, args=(s,)) for s in range(3)]
        threads.append(threading.Thread(target=miner))
        for t in threads:
            t.start()
        for t in threads:
            t.join()

        chain = node.active_chain()
        chain_ids = {tx.id for b in chain for tx in b.transactions}
        pending, _ = node.mempool_snapshot()
        # Pool and chain never overlap; every pool parent is resolvable.
        assert chain_ids.isdisjoint({t.id for t in pending})
        pool_ids = {t.id for t in pending}
        for tx in pending:
            assert tx.parent_tx_id is None or tx.parent_tx_id in chain_ids | pool_ids
        # Every chain transaction reconstructs.
        for tx_id in list(chain_ids):
            node.handle_checkout(tx_id)
