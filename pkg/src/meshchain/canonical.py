"""Canonical JSON encoding and content hashing.

Every node must produce identical bytes for identical logical values,
otherwise transaction ids and block hashes diverge across the network.
Canonical form: UTF-8, object keys sorted by codepoint, no insignificant
whitespace, no NaN/Infinity. Fractional numbers never appear; coordinates
travel as fixed-precision decimal strings (see meshchain.mesh).
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

FORMAT_VERSION = "1"


def canonical_dumps(obj: Any) -> str:
    """Serialize to the canonical JSON string."""
    return json.dumps(
        obj,
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        allow_nan=False,
    )


def canonical_bytes(obj: Any) -> bytes:
    """Serialize to canonical JSON, UTF-8 encoded."""
    return canonical_dumps(obj).encode("utf-8")


def sha256_hex(data: bytes) -> str:
    """Lowercase hex SHA-256 digest of raw bytes."""
    return hashlib.sha256(data).hexdigest()


def canonical_hash(obj: Any) -> str:
    """SHA-256 digest of the canonical JSON encoding."""
    return sha256_hex(canonical_bytes(obj))
