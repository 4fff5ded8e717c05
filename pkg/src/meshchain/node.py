"""The blockchain client: one node of the collaborative modeling network.

A node owns its chain state behind a single lock, serves the modeling
tool (commit / mine / checkout) and the peer protocol (transaction and
block gossip, full-chain sync), resolves forks by greatest cumulative
work (incumbent wins ties), and persists the block store after every
accepted block. Mining runs outside the lock and is aborted through a
poll flag whenever the tip moves.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Set, Tuple
from urllib.parse import urlparse

from .canonical import FORMAT_VERSION, canonical_dumps
from .chain import (
    GENESIS,
    Block,
    ChainError,
    MiningAborted,
    Transaction,
    cumulative_work,
    make_transaction,
    mine_block,
    validate_block,
)
from .history import TxIndex, rebuild_index, replay_mesh
from .mempool import AdmitResult, AdmitStatus, Mempool, MempoolEmpty
from .mesh import EMPTY_MESH, Mesh, MeshError, diff_mesh
from .transport import HttpTransport, PeerTransport, PeerUnreachable

ORPHAN_BLOCK_CAP = 64
MINE_ATTEMPTS = 3
STORE_FILENAME = "chain.json"


class NodeError(Exception):
    """Client-facing failure; the API surfaces the message verbatim."""


class BlockStatus(Enum):
    EXTENDED = "extended"
    REORGED = "reorged"
    SIDE_BRANCH = "side_branch"
    ORPHAN = "orphan"
    INVALID = "invalid"
    DUPLICATE = "duplicate"


class SyncOutcome(Enum):
    ADOPTED = "adopted"
    KEPT = "kept"


def normalize_peer_url(url: str) -> str:
    url = url.strip().rstrip("/")
    parsed = urlparse(url)
    if parsed.scheme not in ("http", "https") or not parsed.netloc:
        raise NodeError(f"peer URL must be http(s)://host:port, got {url!r}")
    return url


class PeerSet:
    """Deduplicated peer base URLs, never containing the node itself."""

    def __init__(self, self_url: Optional[str] = None):
        self._urls: List[str] = []
        self._self_url = self_url

    def set_self_url(self, url: str) -> None:
        self._self_url = normalize_peer_url(url)
        self._urls = [u for u in self._urls if u != self._self_url]

    def add(self, url: str) -> bool:
        url = normalize_peer_url(url)
        if url == self._self_url or url in self._urls:
            return False
        self._urls.append(url)
        return True

    def all(self) -> List[str]:
        return list(self._urls)

    def __contains__(self, url: str) -> bool:
        return url in self._urls

    def __len__(self) -> int:
        return len(self._urls)


@dataclass
class NodeConfig:
    port: int = 0
    host: str = "127.0.0.1"
    data_dir: Optional[str] = None
    peers: List[str] = field(default_factory=list)
    difficulty: int = 16
    author: str = "anonymous"

    def __post_init__(self):
        if not 0 <= self.difficulty <= 255:
            raise NodeError(f"difficulty must be in [0, 255], got {self.difficulty}")
        if not 0 <= self.port <= 65535:
            raise NodeError(f"invalid port {self.port}")


class Node:
    """Exclusive owner of chain, mempool and peer state.

    All mutation happens under self._lock in short transitions; reads
    hand out immutable snapshots. Outbound gossip never runs under the
    lock and tolerates unreachable peers.
    """

    def __init__(self, config: NodeConfig, transport: Optional[PeerTransport] = None):
        self.config = config
        self.transport: PeerTransport = transport or HttpTransport()
        self.log = logging.getLogger("meshchain.node")
        self._lock = threading.RLock()
        self._blocks: Dict[str, Block] = {GENESIS.hash: GENESIS}
        self._tip_hash: str = GENESIS.hash
        self._index: TxIndex = TxIndex()
        self._chain_tx_ids: Set[str] = set()
        self._mempool = Mempool()
        self._peers = PeerSet()
        self._orphan_blocks: "Dict[str, Block]" = {}
        self._mine_aborts: Set[threading.Event] = set()
        self.version = 0
        self.violations: List[str] = []
        self.self_url: Optional[str] = None
        if config.data_dir:
            self._restore()
        for peer in config.peers:
            self._peers.add(peer)

    # -- snapshots ---------------------------------------------------

    def set_self_url(self, url: str) -> None:
        with self._lock:
            self.self_url = url
            self._peers.set_self_url(url)

    @property
    def tip_hash(self) -> str:
        with self._lock:
            return self._tip_hash

    @property
    def genesis_hash(self) -> str:
        return GENESIS.hash

    def state_version(self) -> int:
        with self._lock:
            return self.version

    def active_chain(self) -> List[Block]:
        with self._lock:
            return self._branch(self._tip_hash)

    def tx_index(self) -> TxIndex:
        with self._lock:
            return self._index

    def get_block(self, block_hash: str) -> Optional[Block]:
        with self._lock:
            return self._blocks.get(block_hash)

    def mempool_snapshot(self) -> Tuple[List[Transaction], List[Transaction]]:
        with self._lock:
            return self._mempool.transactions(), self._mempool.orphans()

    def peers(self) -> List[str]:
        with self._lock:
            return self._peers.all()

    def add_peer(self, url: str) -> bool:
        with self._lock:
            added = self._peers.add(url)
            if added:
                self._bump_version()
            return added

    # -- modeling-tool operations -------------------------------------

    def handle_commit(
        self,
        mesh: Mesh,
        author: Optional[str] = None,
        parent_override: Optional[str] = None,
    ) -> Transaction:
        """Pack a mesh into a delta transaction, admit it, gossip it.

        The parent defaults to the local lineage tip: the most recently
        admitted mempool transaction, else the last transaction in the
        active chain, else none (a fresh model from the empty mesh).
        """
        author = author if author is not None else self.config.author
        with self._lock:
            if parent_override is not None:
                if parent_override not in self._chain_tx_ids and parent_override not in self._mempool:
                    raise NodeError(f"unknown parent transaction {parent_override}")
                parent_id: Optional[str] = parent_override
            else:
                last_pending = self._mempool.last_admitted()
                parent_id = last_pending.id if last_pending else self._last_chain_tx_id()
            parent_mesh = self._resolve_mesh(parent_id) if parent_id else EMPTY_MESH
            delta = diff_mesh(parent_mesh, mesh)
            if delta.is_empty:
                raise NodeError("nothing changed: mesh is identical to its parent")
            tx = make_transaction(parent_id, delta, author, int(time.time()))
            result = self._mempool.admit(self._chain_tx_ids, tx)
            if result.status is not AdmitStatus.ADMITTED:
                raise NodeError(f"commit not admitted: {result.status.value}")
            self._bump_version()
        self._broadcast_transaction(tx)
        return tx

    def handle_mine(self) -> Block:
        """Mine the mempool into a block on the current tip.

        Runs the nonce scan outside the state lock; if another block
        lands meanwhile the scan aborts and is rebased, at most
        MINE_ATTEMPTS times.
        """
        for _attempt in range(MINE_ATTEMPTS):
            with self._lock:
                try:
                    txs = self._mempool.take_all()
                except MempoolEmpty:
                    raise NodeError("mempool is empty: nothing to mine") from None
                prev = self._blocks[self._tip_hash]
                abort = threading.Event()
                self._mine_aborts.add(abort)
            try:
                block = mine_block(prev, txs, self.config.difficulty, abort.is_set)
            except MiningAborted:
                continue
            finally:
                with self._lock:
                    self._mine_aborts.discard(abort)
            with self._lock:
                if self._tip_hash != prev.hash:
                    continue
                status = self._validate_and_accept(block)
                if status is BlockStatus.INVALID:
                    raise NodeError("mined block failed validation (internal error)")
            self._broadcast_block(block)
            return block
        raise NodeError("mining contention: the chain tip kept changing; try again")

    def handle_checkout(self, tx_id: str) -> Mesh:
        """Reconstruct the mesh committed at a mined transaction."""
        with self._lock:
            index = self._index
        if tx_id not in index:
            raise NodeError(f"unknown transaction {tx_id} (mempool entries are not checkout-able)")
        return replay_mesh(index.get_transaction, tx_id)

    # -- peer protocol -------------------------------------------------

    def receive_transaction(self, tx: Transaction, from_peer: Optional[str] = None) -> AdmitResult:
        """Admit a gossiped transaction; forward it on first admission."""
        with self._lock:
            result = self._mempool.admit(self._chain_tx_ids, tx)
            if result.status is AdmitStatus.ADMITTED:
                self._bump_version()
            elif result.status is AdmitStatus.INVALID:
                self._log_violation(f"invalid transaction {tx.id}: {result.reason}")
        if result.status is AdmitStatus.ADMITTED:
            self._broadcast_transaction(tx, exclude=from_peer)
            for promoted in result.promoted:
                self._broadcast_transaction(promoted, exclude=from_peer)
        return result

    def receive_block(self, block: Block, from_peer: Optional[str] = None) -> BlockStatus:
        """Validate and file a gossiped block; may extend or reorg.

        A block whose parent is unknown is buffered and triggers a full
        chain sync from the sender.
        """
        connected: List[Block] = []
        with self._lock:
            if block.hash in self._blocks:
                return BlockStatus.DUPLICATE
            if block.prev_hash not in self._blocks:
                if len(self._orphan_blocks) >= ORPHAN_BLOCK_CAP:
                    oldest = next(iter(self._orphan_blocks))
                    del self._orphan_blocks[oldest]
                self._orphan_blocks[block.hash] = block
                status = BlockStatus.ORPHAN
            else:
                status = self._validate_and_accept(block)
                if status is not BlockStatus.INVALID:
                    connected = self._connect_orphan_descendants(block)
        if status is BlockStatus.ORPHAN and from_peer is not None:
            self.sync_chain(from_peer)
        elif status not in (BlockStatus.INVALID, BlockStatus.ORPHAN, BlockStatus.DUPLICATE):
            self._broadcast_block(block, exclude=from_peer)
            for child in connected:
                self._broadcast_block(child, exclude=from_peer)
        return status

    def sync_chain(self, peer: str) -> SyncOutcome:
        """Fetch a peer's full chain; adopt it iff it validates from
        genesis and carries strictly more work than the local chain."""
        try:
            payload = self.transport.fetch_chain(peer)
        except PeerUnreachable as exc:
            self.log.debug("sync: peer %s unreachable: %s", peer, exc)
            return SyncOutcome.KEPT
        try:
            remote = [Block.from_json(b) for b in payload]
        except (ChainError, MeshError, TypeError) as exc:
            self._log_violation(f"sync: peer {peer} sent a malformed chain: {exc}")
            return SyncOutcome.KEPT
        if not remote or remote[0].to_json() != GENESIS.to_json():
            self._log_violation(f"sync: peer {peer} is on a different network (genesis mismatch)")
            return SyncOutcome.KEPT
        known_ids: Set[str] = set()
        for i in range(1, len(remote)):
            violations = validate_block(remote[i], remote[i - 1], known_ids, self.config.difficulty)
            if violations:
                self._log_violation(
                    f"sync: peer {peer} chain invalid at height {remote[i].height}: "
                    + "; ".join(violations)
                )
                return SyncOutcome.KEPT
            known_ids.update(tx.id for tx in remote[i].transactions)
        remote_work = cumulative_work(remote)
        with self._lock:
            if remote_work <= self._branch_work(self._tip_hash):
                return SyncOutcome.KEPT
            old_tip = self._tip_hash
            for b in remote:
                self._blocks.setdefault(b.hash, b)
            self._advance_tip(remote[-1], old_tip)
            self._connect_orphan_descendants(remote[-1])
        return SyncOutcome.ADOPTED

    # -- persistence ----------------------------------------------------

    def _store_path(self) -> Optional[str]:
        if not self.config.data_dir:
            return None
        return os.path.join(self.config.data_dir, STORE_FILENAME)

    def _persist(self) -> None:
        """Atomically write the block store and tip (called under lock)."""
        path = self._store_path()
        if path is None:
            return
        os.makedirs(self.config.data_dir, exist_ok=True)
        blocks = sorted(self._blocks.values(), key=lambda b: (b.height, b.hash))
        payload = {
            "format": FORMAT_VERSION,
            "tip": self._tip_hash,
            "blocks": [b.to_json() for b in blocks],
        }
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(canonical_dumps(payload))
        os.replace(tmp, path)

    def _restore(self) -> None:
        """Load and re-validate the persisted chain; on any corruption
        start from genesis rather than serve an unvalidated chain."""
        path = self._store_path()
        if path is None or not os.path.exists(path):
            return
        try:
            with open(path, "r", encoding="utf-8") as fh:
                payload = json.load(fh)
            if payload.get("format") != FORMAT_VERSION:
                raise ChainError(f"unsupported store format {payload.get('format')!r}")
            blocks = [Block.from_json(b) for b in payload["blocks"]]
            blocks.sort(key=lambda b: (b.height, b.hash))
            if not blocks or blocks[0].to_json() != GENESIS.to_json():
                raise ChainError("store does not begin at the network genesis")
            store: Dict[str, Block] = {GENESIS.hash: GENESIS}
            for block in blocks[1:]:
                if block.prev_hash not in store:
                    raise ChainError(f"block {block.hash} has no stored parent")
                branch = self._branch_in(store, block.prev_hash)
                branch_ids = {tx.id for b in branch for tx in b.transactions}
                violations = validate_block(
                    block, store[block.prev_hash], branch_ids, self.config.difficulty
                )
                if violations:
                    raise ChainError(f"stored block {block.hash} invalid: " + "; ".join(violations))
                store[block.hash] = block
            tip = payload["tip"]
            if tip not in store:
                raise ChainError(f"stored tip {tip} not among stored blocks")
            self._blocks = store
            self._tip_hash = tip
            branch = self._branch(tip)
            self._index = rebuild_index(branch)
            self._chain_tx_ids = {tx.id for b in branch for tx in b.transactions}
            self.log.info("restored chain: height %d, tip %s", branch[-1].height, tip)
        except Exception as exc:
            self.log.warning("corrupt chain store (%s); starting from genesis", exc)
            self._blocks = {GENESIS.hash: GENESIS}
            self._tip_hash = GENESIS.hash
            self._index = TxIndex()
            self._chain_tx_ids = set()

    # -- internals (all called under lock unless noted) ------------------

    def _bump_version(self) -> None:
        self.version += 1

    def _log_violation(self, message: str) -> None:
        self.log.warning(message)
        self.violations.append(message)

    @staticmethod
    def _branch_in(store: Dict[str, Block], tip_hash: str) -> List[Block]:
        blocks: List[Block] = []
        cursor = tip_hash
        while True:
            block = store[cursor]
            blocks.append(block)
            if block.height == 0:
                break
            cursor = block.prev_hash
        blocks.reverse()
        return blocks

    def _branch(self, tip_hash: str) -> List[Block]:
        return self._branch_in(self._blocks, tip_hash)

    def _branch_work(self, tip_hash: str) -> int:
        return cumulative_work(self._branch(tip_hash))

    def _last_chain_tx_id(self) -> Optional[str]:
        for block in reversed(self._branch(self._tip_hash)):
            if block.transactions:
                return block.transactions[-1].id
        return None

    def _resolve_mesh(self, tx_id: str) -> Mesh:
        """Mesh at a transaction that may still live in the mempool."""

        def get_tx(tid: str) -> Optional[Transaction]:
            pending = self._mempool.get(tid)
            return pending if pending is not None else self._index.get_transaction(tid)

        return replay_mesh(get_tx, tx_id)

    def _validate_and_accept(self, block: Block) -> BlockStatus:
        prev = self._blocks[block.prev_hash]
        parent_branch = self._branch(block.prev_hash)
        branch_ids = {tx.id for b in parent_branch for tx in b.transactions}
        violations = validate_block(block, prev, branch_ids, self.config.difficulty)
        if violations:
            self._log_violation(f"rejected block {block.hash}: " + "; ".join(violations))
            return BlockStatus.INVALID
        self._blocks[block.hash] = block
        new_work = cumulative_work(parent_branch) + 2**block.difficulty
        old_tip = self._tip_hash
        if new_work > self._branch_work(old_tip):
            extends = block.prev_hash == old_tip
            self._advance_tip(block, old_tip)
            return BlockStatus.EXTENDED if extends else BlockStatus.REORGED
        self._bump_version()
        self._persist()
        return BlockStatus.SIDE_BRANCH

    def _advance_tip(self, new_tip: Block, old_tip_hash: str) -> None:
        """Move the active tip: rebuild the index, re-admit transactions
        from abandoned blocks, reconcile the mempool, abort miners."""
        old_branch = self._branch(old_tip_hash)
        self._tip_hash = new_tip.hash
        new_branch = self._branch(new_tip.hash)
        new_hashes = {b.hash for b in new_branch}
        new_ids = {tx.id for b in new_branch for tx in b.transactions}
        self._index = rebuild_index(new_branch)
        self._chain_tx_ids = new_ids
        for abandoned in (b for b in old_branch if b.hash not in new_hashes):
            for tx in abandoned.transactions:
                self._mempool.admit(new_ids, tx)
        self._mempool.reconcile(new_ids)
        for event in self._mine_aborts:
            event.set()
        self._bump_version()
        self._persist()

    def _connect_orphan_descendants(self, parent: Block) -> List[Block]:
        """Attach buffered orphan blocks that now have a stored parent."""
        for block_hash in [h for h in self._orphan_blocks if h in self._blocks]:
            del self._orphan_blocks[block_hash]
        connected: List[Block] = []
        frontier = [parent.hash]
        while frontier:
            parent_hash = frontier.pop(0)
            ready = [b for b in self._orphan_blocks.values() if b.prev_hash == parent_hash]
            for block in ready:
                del self._orphan_blocks[block.hash]
                if self._validate_and_accept(block) is not BlockStatus.INVALID:
                    connected.append(block)
                    frontier.append(block.hash)
        return connected

    # -- gossip (never called under lock) --------------------------------

    def _broadcast_transaction(self, tx: Transaction, exclude: Optional[str] = None) -> None:
        payload = tx.to_json()
        for peer in self.peers():
            if peer == exclude:
                continue
            try:
                self.transport.send_transaction(peer, payload)
            except PeerUnreachable as exc:
                self.log.debug("tx broadcast to %s failed: %s", peer, exc)

    def _broadcast_block(self, block: Block, exclude: Optional[str] = None) -> None:
        payload = block.to_json()
        for peer in self.peers():
            if peer == exclude:
                continue
            try:
                self.transport.send_block(peer, payload)
            except PeerUnreachable as exc:
                self.log.debug("block broadcast to %s failed: %s", peer, exc)
