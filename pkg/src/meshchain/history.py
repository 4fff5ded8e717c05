"""Transaction index over the active chain and mesh reconstruction.

Checkout replays the delta path from a root transaction down to the
requested one, starting from the empty mesh. The index is an immutable
snapshot; the node swaps whole snapshots when the active chain changes,
so readers never observe a half-updated view.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

from .chain import Block, Transaction
from .mesh import EMPTY_MESH, DeltaApplyError, Mesh, patch_mesh


class HistoryError(ValueError):
    """Unknown transaction or a broken parent link in the index."""


@dataclass(frozen=True)
class IndexEntry:
    tx: Transaction
    block_hash: str
    height: int


class TxIndex:
    """Immutable map of transaction id to (transaction, containing block)."""

    def __init__(self, entries: Optional[Dict[str, IndexEntry]] = None):
        self._entries: Dict[str, IndexEntry] = dict(entries or {})

    def __contains__(self, tx_id: str) -> bool:
        return tx_id in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, tx_id: str) -> Optional[IndexEntry]:
        return self._entries.get(tx_id)

    def ids(self) -> List[str]:
        return list(self._entries)

    def entries(self) -> List[IndexEntry]:
        return list(self._entries.values())

    def get_transaction(self, tx_id: str) -> Optional[Transaction]:
        entry = self._entries.get(tx_id)
        return entry.tx if entry else None


def rebuild_index(chain: Sequence[Block]) -> TxIndex:
    """Index every transaction of the given (validated) chain in order."""
    entries: Dict[str, IndexEntry] = {}
    for block in chain:
        for tx in block.transactions:
            entries[tx.id] = IndexEntry(tx=tx, block_hash=block.hash, height=block.height)
    return TxIndex(entries)


def walk_ancestry(get_tx: Callable[[str], Optional[Transaction]], tx_id: str) -> List[Transaction]:
    """Root-to-tx transaction path through an arbitrary lookup.

    The lookup may span the chain index and the mempool; the node uses
    that to diff against not-yet-mined parents.
    """
    path: List[Transaction] = []
    seen = set()
    current: Optional[str] = tx_id
    while current is not None:
        if current in seen:
            raise HistoryError(f"parent cycle detected at transaction {current}")
        seen.add(current)
        tx = get_tx(current)
        if tx is None:
            if current == tx_id:
                raise HistoryError(f"unknown transaction {tx_id}")
            raise HistoryError(
                f"broken parent link: {current} is referenced but not indexed"
            )
        path.append(tx)
        current = tx.parent_tx_id
    path.reverse()
    return path


def replay_mesh(get_tx: Callable[[str], Optional[Transaction]], tx_id: str) -> Mesh:
    """Fold the ancestry's deltas over the empty mesh."""
    mesh = EMPTY_MESH
    for tx in walk_ancestry(get_tx, tx_id):
        try:
            mesh = patch_mesh(mesh, tx.delta)
        except DeltaApplyError as exc:
            raise HistoryError(
                f"chain corruption: delta of transaction {tx.id} does not apply: {exc}"
            ) from exc
    return mesh


def ancestry_path(index: TxIndex, tx_id: str) -> List[Transaction]:
    """Path from a root transaction to tx_id within the active chain."""
    return walk_ancestry(index.get_transaction, tx_id)


def reconstruct_mesh(index: TxIndex, tx_id: str) -> Mesh:
    """Checkout: the exact mesh committed at tx_id."""
    return replay_mesh(index.get_transaction, tx_id)
