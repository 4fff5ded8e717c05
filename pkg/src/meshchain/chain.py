"""Transactions, blocks, proof-of-work mining and validation.

Ids and hashes are SHA-256 over canonical JSON, so any byte of a
committed delta or block header that changes after mining is detected
by recomputation. Difficulty is a fixed network constant (leading zero
bits of the block hash); there is no retargeting and no mining reward.
"""

from __future__ import annotations

import hashlib
import re
import time
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Optional, Sequence

from .canonical import canonical_bytes, canonical_dumps, canonical_hash, sha256_hex
from .mesh import MeshDelta, MeshError

HASH_HEX_RE = re.compile(r"[0-9a-f]{64}")
GENESIS_PREV_HASH = "0" * 64
MAX_AUTHOR_BYTES = 256
MAX_NONCE = 2**64 - 1
ABORT_CHECK_INTERVAL = 10_000


class ChainError(ValueError):
    """Malformed chain data or invalid chain operation input."""


class MiningAborted(Exception):
    """Mining stopped because the abort flag was set (tip changed)."""


class NonceExhausted(ChainError):
    """The whole 64-bit nonce space failed the difficulty target."""


def _is_hash(value: Any) -> bool:
    return isinstance(value, str) and HASH_HEX_RE.fullmatch(value) is not None


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


@dataclass(frozen=True)
class Transaction:
    """A parent-linked mesh modification; the node of the history tree.

    A root transaction (parent_tx_id None) applies its delta to the
    empty mesh and starts a fresh model.
    """

    id: str
    parent_tx_id: Optional[str]
    delta: MeshDelta
    author: str
    timestamp: int

    def __post_init__(self):
        if not _is_hash(self.id):
            raise ChainError(f"transaction id must be 64 lowercase hex chars, got {self.id!r}")
        if self.parent_tx_id is not None and not _is_hash(self.parent_tx_id):
            raise ChainError(f"parent_tx_id must be null or a 64-hex digest, got {self.parent_tx_id!r}")
        if not isinstance(self.delta, MeshDelta):
            raise ChainError(f"delta must be a MeshDelta, got {type(self.delta).__name__}")
        if not isinstance(self.author, str) or len(self.author.encode("utf-8")) > MAX_AUTHOR_BYTES:
            raise ChainError("author must be a UTF-8 string of at most 256 bytes")
        if not _is_int(self.timestamp) or self.timestamp < 0:
            raise ChainError(f"timestamp must be a non-negative integer, got {self.timestamp!r}")

    def to_json(self) -> dict:
        return {
            "author": self.author,
            "delta": self.delta.to_json(),
            "id": self.id,
            "parent_tx_id": self.parent_tx_id,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_json(cls, data: Any) -> "Transaction":
        if not isinstance(data, dict):
            raise ChainError(f"transaction must be an object, got {data!r}")
        expected = {"author", "delta", "id", "parent_tx_id", "timestamp"}
        if set(data) != expected:
            raise ChainError(f"transaction fields must be {sorted(expected)}, got {sorted(data)}")
        try:
            delta = MeshDelta.from_json(data["delta"])
        except MeshError as exc:
            raise ChainError(f"malformed delta: {exc}") from None
        return cls(
            id=data["id"],
            parent_tx_id=data["parent_tx_id"],
            delta=delta,
            author=data["author"],
            timestamp=data["timestamp"],
        )


def tx_id(parent_tx_id: Optional[str], delta: MeshDelta, author: str, timestamp: int) -> str:
    """Content hash of a transaction; identical on every node."""
    return canonical_hash(
        {
            "author": author,
            "delta": delta.to_json(),
            "parent_tx_id": parent_tx_id,
            "timestamp": timestamp,
        }
    )


def make_transaction(
    parent_tx_id: Optional[str], delta: MeshDelta, author: str, timestamp: int
) -> Transaction:
    """Build a transaction with its id computed from the other fields."""
    return Transaction(
        id=tx_id(parent_tx_id, delta, author, timestamp),
        parent_tx_id=parent_tx_id,
        delta=delta,
        author=author,
        timestamp=timestamp,
    )


def verify_transaction(tx: Transaction) -> list:
    """Content-level violations: id mismatch, trivial non-root delta."""
    violations = []
    expected = tx_id(tx.parent_tx_id, tx.delta, tx.author, tx.timestamp)
    if tx.id != expected:
        violations.append(f"transaction id mismatch: stated {tx.id}, computed {expected}")
    if tx.parent_tx_id is not None and tx.delta.is_empty:
        violations.append(f"transaction {tx.id} has an empty delta but names a parent")
    return violations


@dataclass(frozen=True)
class Block:
    """A proof-of-work sealed batch of transactions."""

    height: int
    prev_hash: str
    tx_ids: tuple
    transactions: tuple
    nonce: int
    timestamp: int
    difficulty: int
    hash: str

    def __post_init__(self):
        object.__setattr__(self, "tx_ids", tuple(self.tx_ids))
        object.__setattr__(self, "transactions", tuple(self.transactions))
        if not _is_int(self.height) or self.height < 0:
            raise ChainError(f"height must be a non-negative integer, got {self.height!r}")
        if not _is_hash(self.prev_hash):
            raise ChainError(f"prev_hash must be a 64-hex digest, got {self.prev_hash!r}")
        for tid in self.tx_ids:
            if not _is_hash(tid):
                raise ChainError(f"tx id must be a 64-hex digest, got {tid!r}")
        for tx in self.transactions:
            if not isinstance(tx, Transaction):
                raise ChainError(f"expected Transaction, got {type(tx).__name__}")
        if not _is_int(self.nonce) or not 0 <= self.nonce <= MAX_NONCE:
            raise ChainError(f"nonce must be an unsigned 64-bit integer, got {self.nonce!r}")
        if not _is_int(self.timestamp) or self.timestamp < 0:
            raise ChainError(f"timestamp must be a non-negative integer, got {self.timestamp!r}")
        if not _is_int(self.difficulty) or not 0 <= self.difficulty <= 255:
            raise ChainError(f"difficulty must be in [0, 255], got {self.difficulty!r}")
        if not _is_hash(self.hash):
            raise ChainError(f"block hash must be a 64-hex digest, got {self.hash!r}")

    def header_json(self) -> dict:
        return {
            "difficulty": self.difficulty,
            "height": self.height,
            "nonce": self.nonce,
            "prev_hash": self.prev_hash,
            "timestamp": self.timestamp,
            "tx_ids": list(self.tx_ids),
        }

    def to_json(self) -> dict:
        data = self.header_json()
        data["hash"] = self.hash
        data["transactions"] = [tx.to_json() for tx in self.transactions]
        return data

    @classmethod
    def from_json(cls, data: Any) -> "Block":
        if not isinstance(data, dict):
            raise ChainError(f"block must be an object, got {data!r}")
        expected = {
            "difficulty",
            "hash",
            "height",
            "nonce",
            "prev_hash",
            "timestamp",
            "transactions",
            "tx_ids",
        }
        if set(data) != expected:
            raise ChainError(f"block fields must be {sorted(expected)}, got {sorted(data)}")
        if not isinstance(data["transactions"], list) or not isinstance(data["tx_ids"], list):
            raise ChainError("block transactions and tx_ids must be arrays")
        return cls(
            height=data["height"],
            prev_hash=data["prev_hash"],
            tx_ids=tuple(data["tx_ids"]),
            transactions=tuple(Transaction.from_json(t) for t in data["transactions"]),
            nonce=data["nonce"],
            timestamp=data["timestamp"],
            difficulty=data["difficulty"],
            hash=data["hash"],
        )


def block_hash(
    height: int,
    prev_hash: str,
    tx_ids: Sequence[str],
    nonce: int,
    timestamp: int,
    difficulty: int,
) -> str:
    """Header hash: SHA-256 over the canonical JSON of the header."""
    return canonical_hash(
        {
            "difficulty": difficulty,
            "height": height,
            "nonce": nonce,
            "prev_hash": prev_hash,
            "timestamp": timestamp,
            "tx_ids": list(tx_ids),
        }
    )


GENESIS = Block(
    height=0,
    prev_hash=GENESIS_PREV_HASH,
    tx_ids=(),
    transactions=(),
    nonce=0,
    timestamp=0,
    difficulty=0,
    hash=block_hash(0, GENESIS_PREV_HASH, (), 0, 0, 0),
)


def meets_difficulty(hash_hex: str, difficulty: int) -> bool:
    """True iff the hash, read as a 256-bit big-endian int, has at
    least `difficulty` leading zero bits."""
    if not 0 <= difficulty <= 255:
        raise ChainError(f"difficulty must be in [0, 255], got {difficulty}")
    return int(hash_hex, 16) >> (256 - difficulty) == 0


def mine_block(
    prev: Block,
    transactions: Sequence[Transaction],
    difficulty: int,
    should_abort: Optional[Callable[[], bool]] = None,
    timestamp: Optional[int] = None,
) -> Block:
    """Scan nonces from 0 until the header hash meets the difficulty.

    Polls should_abort at least every 10,000 attempts and raises
    MiningAborted promptly when it reports True (the caller's tip moved
    and the block must be rebased). Long-running: call outside any lock.
    """
    transactions = tuple(transactions)
    if not transactions:
        raise ChainError("refusing to mine a block with no transactions")
    ids = [tx.id for tx in transactions]
    if len(set(ids)) != len(ids):
        raise ChainError("transactions for a block must have distinct ids")
    if timestamp is None:
        timestamp = int(time.time())
    height = prev.height + 1

    # The nonce is the only field that varies per attempt, so hash
    # prebuilt canonical-JSON fragments instead of re-serializing the
    # whole header 2^difficulty times.
    prefix = f'{{"difficulty":{difficulty},"height":{height},"nonce":'.encode()
    suffix = (
        f',"prev_hash":{canonical_dumps(prev.hash)}'
        f',"timestamp":{timestamp}'
        f',"tx_ids":{canonical_dumps(ids)}}}'
    ).encode()

    shift = 256 - difficulty
    for nonce in range(MAX_NONCE + 1):
        if should_abort is not None and nonce % ABORT_CHECK_INTERVAL == 0 and should_abort():
            raise MiningAborted(f"mining aborted at nonce {nonce}")
        digest = hashlib.sha256(prefix + str(nonce).encode() + suffix).hexdigest()
        if int(digest, 16) >> shift == 0:
            block = Block(
                height=height,
                prev_hash=prev.hash,
                tx_ids=tuple(ids),
                transactions=transactions,
                nonce=nonce,
                timestamp=timestamp,
                difficulty=difficulty,
                hash=digest,
            )
            # Fragment assembly must agree with the generic encoder.
            assert block.hash == block_hash(height, prev.hash, ids, nonce, timestamp, difficulty)
            return block
    raise NonceExhausted(f"no nonce satisfies difficulty {difficulty}")


def validate_block(
    block: Block,
    prev: Block,
    known_tx_ids: Iterable[str],
    network_difficulty: int,
) -> list:
    """All acceptance-rule violations for a block against its parent.

    Returns an empty list when the block is acceptable. Never raises on
    semantically bad input; every failed rule contributes one entry.
    """
    known = set(known_tx_ids)
    violations = []
    if block.height != prev.height + 1:
        violations.append(f"height: expected {prev.height + 1}, got {block.height}")
    if block.prev_hash != prev.hash:
        violations.append(f"prev_hash: expected {prev.hash}, got {block.prev_hash}")
    recomputed = block_hash(
        block.height, block.prev_hash, block.tx_ids, block.nonce, block.timestamp, block.difficulty
    )
    if block.hash != recomputed:
        violations.append(f"hash mismatch: stated {block.hash}, computed {recomputed}")
    if not meets_difficulty(block.hash, block.difficulty):
        violations.append(f"hash does not meet difficulty {block.difficulty}")
    if block.difficulty != network_difficulty:
        violations.append(
            f"difficulty: network constant is {network_difficulty}, block declares {block.difficulty}"
        )
    if len(block.tx_ids) != len(block.transactions):
        violations.append(
            f"tx_ids lists {len(block.tx_ids)} ids for {len(block.transactions)} transactions"
        )
    if len(set(block.tx_ids)) != len(block.tx_ids):
        violations.append("tx_ids contains duplicates")
    for position, tx in enumerate(block.transactions):
        for problem in verify_transaction(tx):
            violations.append(f"tx[{position}]: {problem}")
        if position < len(block.tx_ids) and block.tx_ids[position] != tx.id:
            violations.append(
                f"tx[{position}]: listed id {block.tx_ids[position]} does not match body id {tx.id}"
            )
        if tx.id in known:
            violations.append(f"tx[{position}]: {tx.id} already in chain")
    earlier: set = set()
    for position, tx in enumerate(block.transactions):
        parent = tx.parent_tx_id
        if parent is not None and parent not in known and parent not in earlier:
            if parent in {t.id for t in block.transactions}:
                violations.append(
                    f"tx[{position}]: parent {parent} appears later in the same block"
                )
            else:
                violations.append(f"tx[{position}]: parent {parent} is unknown")
        earlier.add(tx.id)
    return violations


def cumulative_work(chain: Sequence[Block]) -> int:
    """Fork-choice metric: sum of 2^difficulty over the chain's blocks.

    Genesis has difficulty 0 and therefore contributes 1.
    """
    return sum(2**block.difficulty for block in chain)
