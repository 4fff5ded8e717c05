"""Pool of validated transactions awaiting inclusion in a block.

Arrival order is preserved, parents are admitted before children, and
a transaction whose parent is not yet known waits in a bounded orphan
buffer instead of the pool proper. Mutation happens only inside the
node's exclusive state section.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Set

from .chain import Transaction, verify_transaction

ORPHAN_CAP = 1024


class MempoolEmpty(Exception):
    """take_all on a pool with nothing admitted; mining is a no-op."""


class AdmitStatus(Enum):
    ADMITTED = "admitted"
    DUPLICATE = "duplicate"
    ORPHANED = "orphaned"
    INVALID = "invalid"


@dataclass
class AdmitResult:
    status: AdmitStatus
    reason: Optional[str] = None
    # Orphans admitted because this transaction was their missing parent.
    promoted: List[Transaction] = field(default_factory=list)


class Mempool:
    def __init__(self, orphan_cap: int = ORPHAN_CAP):
        self._pool: "OrderedDict[str, Transaction]" = OrderedDict()
        self._orphans: "OrderedDict[str, Transaction]" = OrderedDict()
        self._orphan_cap = orphan_cap

    def __len__(self) -> int:
        return len(self._pool)

    def __contains__(self, tx_id: str) -> bool:
        return tx_id in self._pool

    def transactions(self) -> List[Transaction]:
        """Admitted transactions in arrival order (read-only snapshot)."""
        return list(self._pool.values())

    def orphans(self) -> List[Transaction]:
        return list(self._orphans.values())

    def ids(self) -> Set[str]:
        return set(self._pool)

    def get(self, tx_id: str) -> Optional[Transaction]:
        return self._pool.get(tx_id)

    def last_admitted(self) -> Optional[Transaction]:
        if not self._pool:
            return None
        return next(reversed(self._pool.values()))

    def admit(self, chain_tx_ids: Set[str], tx: Transaction) -> AdmitResult:
        """Validate and file one transaction.

        Admitting the missing parent of buffered orphans promotes those
        orphans (recursively); they are reported in the result so the
        caller can gossip them onward.
        """
        problems = verify_transaction(tx)
        if problems:
            return AdmitResult(AdmitStatus.INVALID, reason="; ".join(problems))
        if tx.id in self._pool or tx.id in chain_tx_ids:
            return AdmitResult(AdmitStatus.DUPLICATE)
        if tx.id in self._orphans:
            return AdmitResult(AdmitStatus.ORPHANED, reason="already buffered")
        parent = tx.parent_tx_id
        if parent is not None and parent not in chain_tx_ids and parent not in self._pool:
            if len(self._orphans) >= self._orphan_cap:
                self._orphans.popitem(last=False)
            self._orphans[tx.id] = tx
            return AdmitResult(AdmitStatus.ORPHANED, reason=f"parent {parent} unknown")
        self._pool[tx.id] = tx
        promoted = self._promote_orphans([tx.id])
        return AdmitResult(AdmitStatus.ADMITTED, promoted=promoted)

    def _promote_orphans(self, newly_known: List[str]) -> List[Transaction]:
        promoted: List[Transaction] = []
        frontier = list(newly_known)
        while frontier:
            parent_id = frontier.pop(0)
            ready = [o for o in self._orphans.values() if o.parent_tx_id == parent_id]
            for orphan in ready:
                del self._orphans[orphan.id]
                self._pool[orphan.id] = orphan
                promoted.append(orphan)
                frontier.append(orphan.id)
        return promoted

    def take_all(self) -> List[Transaction]:
        """All admitted transactions, arrival order; the pool keeps them
        until reconcile sees them land in a block."""
        if not self._pool:
            raise MempoolEmpty("mempool has no admitted transactions")
        return list(self._pool.values())

    def reconcile(self, chain_tx_ids: Set[str]) -> int:
        """Drop everything the chain now contains; re-run promotion.

        Returns the number of evicted transactions. Idempotent.
        """
        evicted = 0
        for tx_id in [t for t in self._pool if t in chain_tx_ids]:
            del self._pool[tx_id]
            evicted += 1
        for tx_id in [t for t in self._orphans if t in chain_tx_ids]:
            del self._orphans[tx_id]
            evicted += 1
        # Parents may have landed in the chain; promote whatever became valid.
        changed = True
        while changed:
            changed = False
            for orphan in list(self._orphans.values()):
                parent = orphan.parent_tx_id
                if parent in chain_tx_ids or parent in self._pool:
                    del self._orphans[orphan.id]
                    self._pool[orphan.id] = orphan
                    changed = True
        return evicted
