"""Outbound peer communication.

Nodes talk plain HTTP. The transport is injectable so the simulation
harness can gate calls (partitions) and count relays without touching
node logic.
"""

from __future__ import annotations

from typing import Any, List

import requests

from .canonical import canonical_dumps

DEFAULT_TIMEOUT = 10.0
_JSON_HEADERS = {"Content-Type": "application/json"}


class PeerUnreachable(Exception):
    """The peer could not be reached or answered garbage."""


class PeerTransport:
    """Interface the node uses for all peer-directed traffic."""

    def send_transaction(self, peer: str, tx_json: dict) -> None:
        raise NotImplementedError

    def send_block(self, peer: str, block_json: dict) -> None:
        raise NotImplementedError

    def fetch_chain(self, peer: str) -> List[dict]:
        raise NotImplementedError

    def fetch_genesis_hash(self, peer: str) -> str:
        raise NotImplementedError


class HttpTransport(PeerTransport):
    def __init__(self, timeout: float = DEFAULT_TIMEOUT):
        self.timeout = timeout
        self.origin: str = ""

    def set_origin(self, url: str) -> None:
        """Own base URL, sent as X-Peer-Url so receivers can skip us
        when re-broadcasting."""
        self.origin = url

    def _post(self, url: str, payload: Any) -> None:
        headers = dict(_JSON_HEADERS)
        if self.origin:
            headers["X-Peer-Url"] = self.origin
        try:
            requests.post(
                url, data=canonical_dumps(payload).encode("utf-8"),
                headers=headers, timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise PeerUnreachable(str(exc)) from exc

    def _get_json(self, url: str) -> Any:
        try:
            response = requests.get(url, timeout=self.timeout)
            response.raise_for_status()
            return response.json()
        except (requests.RequestException, ValueError) as exc:
            raise PeerUnreachable(str(exc)) from exc

    def send_transaction(self, peer: str, tx_json: dict) -> None:
        self._post(f"{peer}/p2p/transaction", tx_json)

    def send_block(self, peer: str, block_json: dict) -> None:
        self._post(f"{peer}/p2p/block", block_json)

    def fetch_chain(self, peer: str) -> List[dict]:
        payload = self._get_json(f"{peer}/p2p/chain")
        if not isinstance(payload, dict) or not isinstance(payload.get("blocks"), list):
            raise PeerUnreachable(f"peer {peer} returned a malformed chain payload")
        return payload["blocks"]

    def fetch_genesis_hash(self, peer: str) -> str:
        payload = self._get_json(f"{peer}/p2p/genesis")
        if not isinstance(payload, dict) or not isinstance(payload.get("genesis_hash"), str):
            raise PeerUnreachable(f"peer {peer} returned a malformed genesis payload")
        return payload["genesis_hash"]
