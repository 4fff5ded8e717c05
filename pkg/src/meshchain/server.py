"""HTTP face of a node: modeling-tool API, peer protocol, web UI assets.

All bodies are canonical JSON (format "1"); success is 200, client
errors are 4xx with {"error": reason}. Senders identify themselves via
the X-Peer-Url header so gossip can skip the originator.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any, Optional, Tuple

from .canonical import canonical_dumps
from .chain import Block, ChainError, Transaction
from .history import HistoryError
from .mesh import Mesh, MeshError, parse_obj, serialize_obj
from .node import Node, NodeError

log = logging.getLogger("meshchain.server")

MAX_BODY_BYTES = 64 * 1024 * 1024
PEER_HEADER = "X-Peer-Url"
_WEBUI_DIR = Path(__file__).parent / "webui"

_PLACEHOLDER_PAGE = """<!doctype html>
<html><head><title>meshchain node</title></head>
<body><h1>meshchain node</h1>
<p>This node is running. The web UI assets are not built; see the
frontend/ directory of the repository for build instructions. The JSON
API lives under <code>/api</code>.</p></body></html>
"""


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


def _chain_summary(node: Node) -> dict:
    blocks = node.active_chain()
    return {
        "blocks": [
            {
                "difficulty": b.difficulty,
                "hash": b.hash,
                "height": b.height,
                "prev_hash": b.prev_hash,
                "timestamp": b.timestamp,
                "tx_count": len(b.transactions),
                "tx_ids": list(b.tx_ids),
            }
            for b in blocks
        ],
        "difficulty": node.config.difficulty,
        "genesis_hash": node.genesis_hash,
        "height": blocks[-1].height,
        "tip": blocks[-1].hash,
    }


def _commit_payload_mesh(body: dict) -> Mesh:
    has_mesh = "mesh" in body
    has_obj = "obj_text" in body
    if has_mesh == has_obj:
        raise ApiError(400, "commit body needs exactly one of 'mesh' or 'obj_text'")
    if has_mesh:
        return Mesh.from_json(body["mesh"])
    if not isinstance(body["obj_text"], str):
        raise ApiError(400, "obj_text must be a string")
    return parse_obj(body["obj_text"])


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "meshchain"

    # BaseHTTPRequestHandler logs to stderr by default; keep it quiet.
    def log_message(self, fmt: str, *args: Any) -> None:
        log.debug("%s %s", self.address_string(), fmt % args)

    @property
    def node(self) -> Node:
        return self.server.node  # type: ignore[attr-defined]

    # -- plumbing -----------------------------------------------------

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if length > MAX_BODY_BYTES:
            raise ApiError(413, f"body too large ({length} bytes)")
        raw = self.rfile.read(length) if length else b"{}"
        if not raw.strip():
            return {}
        try:
            body = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ApiError(400, f"malformed JSON body: {exc}") from None
        if not isinstance(body, dict):
            raise ApiError(400, "body must be a JSON object")
        return body

    def _send_json(self, status: int, payload: Any) -> None:
        data = canonical_dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _send_error_json(self, status: int, message: str) -> None:
        self._send_json(status, {"error": message})

    def _from_peer(self) -> Optional[str]:
        return self.headers.get(PEER_HEADER) or None

    def _dispatch(self, method: str) -> None:
        try:
            handled = self._route(method)
        except ApiError as exc:
            self._send_error_json(exc.status, str(exc))
            return
        except (NodeError, ChainError, MeshError, HistoryError) as exc:
            self._send_error_json(400, str(exc))
            return
        except (BrokenPipeError, ConnectionResetError):
            raise
        except Exception as exc:  # pragma: no cover - unexpected
            log.exception("internal error handling %s %s", method, self.path)
            self._send_error_json(500, f"internal error: {exc}")
            return
        if not handled:
            self._send_error_json(404, f"no such endpoint: {method} {self.path}")

    def do_GET(self) -> None:
        self._dispatch("GET")

    def do_POST(self) -> None:
        self._dispatch("POST")

    # -- routing ------------------------------------------------------

    def _route(self, method: str) -> bool:
        path = self.path.split("?", 1)[0]
        parts = [p for p in path.split("/") if p]
        if method == "GET":
            if parts == ["api", "chain"]:
                self._send_json(200, _chain_summary(self.node))
            elif parts == ["api", "mempool"]:
                pending, orphans = self.node.mempool_snapshot()
                self._send_json(200, {
                    "orphans": [t.to_json() for t in orphans],
                    "transactions": [t.to_json() for t in pending],
                })
            elif parts == ["api", "peers"]:
                self._send_json(200, {"peers": self.node.peers()})
            elif len(parts) == 3 and parts[:2] == ["api", "checkout"]:
                mesh = self.node.handle_checkout(parts[2])
                self._send_json(200, {"mesh": mesh.to_json(), "obj_text": serialize_obj(mesh)})
            elif len(parts) == 3 and parts[:2] == ["api", "block"]:
                block = self.node.get_block(parts[2])
                if block is None:
                    raise ApiError(404, f"unknown block {parts[2]}")
                self._send_json(200, block.to_json())
            elif len(parts) == 3 and parts[:2] == ["api", "transaction"]:
                self._send_json(200, self._transaction_info(parts[2]))
            elif parts == ["p2p", "chain"]:
                self._send_json(200, {"blocks": [b.to_json() for b in self.node.active_chain()]})
            elif parts == ["p2p", "genesis"]:
                self._send_json(200, {"genesis_hash": self.node.genesis_hash})
            elif parts[:1] in ([], ["api"], ["p2p"]) and parts:
                return False
            else:
                self._serve_static(parts)
            return True
        if method == "POST":
            if parts == ["api", "commit"]:
                body = self._read_body()
                mesh = _commit_payload_mesh(body)
                author = body.get("author")
                if author is not None and not isinstance(author, str):
                    raise ApiError(400, "author must be a string")
                parent = body.get("parent")
                if parent is not None and not isinstance(parent, str):
                    raise ApiError(400, "parent must be a transaction id string")
                tx = self.node.handle_commit(mesh, author=author, parent_override=parent)
                self._send_json(200, tx.to_json())
            elif parts == ["api", "mine"]:
                self._read_body()
                block = self.node.handle_mine()
                self._send_json(200, block.to_json())
            elif parts == ["api", "peers"]:
                body = self._read_body()
                url = body.get("url")
                if not isinstance(url, str):
                    raise ApiError(400, "body must carry a peer 'url' string")
                added = self.node.add_peer(url)
                self._send_json(200, {"added": added, "peers": self.node.peers()})
            elif parts == ["p2p", "transaction"]:
                tx = Transaction.from_json(self._read_body())
                result = self.node.receive_transaction(tx, from_peer=self._from_peer())
                self._send_json(200, {"status": result.status.value, "reason": result.reason})
            elif parts == ["p2p", "block"]:
                block = Block.from_json(self._read_body())
                status = self.node.receive_block(block, from_peer=self._from_peer())
                self._send_json(200, {"status": status.value})
            else:
                return False
            return True
        return False

    def _transaction_info(self, tx_id: str) -> dict:
        entry = self.node.tx_index().get(tx_id)
        if entry is not None:
            return {
                "block_hash": entry.block_hash,
                "height": entry.height,
                "in_mempool": False,
                "transaction": entry.tx.to_json(),
            }
        pending, orphans = self.node.mempool_snapshot()
        for tx in pending + orphans:
            if tx.id == tx_id:
                return {
                    "block_hash": None,
                    "height": None,
                    "in_mempool": True,
                    "transaction": tx.to_json(),
                }
        raise ApiError(404, f"unknown transaction {tx_id}")

    # -- static web UI --------------------------------------------------

    def _serve_static(self, parts: list) -> None:
        webui_dir: Path = self.server.webui_dir  # type: ignore[attr-defined]
        relative = "/".join(parts) or "index.html"
        target = (webui_dir / relative).resolve()
        if not str(target).startswith(str(webui_dir.resolve())) or not target.is_file():
            if relative == "index.html":
                data = _PLACEHOLDER_PAGE.encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "text/html; charset=utf-8")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)
                return
            raise ApiError(404, f"no such file: /{relative}")
        content_type = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        data = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


class NodeServer:
    """Binds a node to a loopback port and runs it on a daemon thread."""

    def __init__(self, node: Node, webui_dir: Optional[Path] = None):
        self.node = node
        self._httpd = ThreadingHTTPServer((node.config.host, node.config.port), _Handler)
        self._httpd.daemon_threads = True
        self._httpd.node = node  # type: ignore[attr-defined]
        self._httpd.webui_dir = webui_dir or _WEBUI_DIR  # type: ignore[attr-defined]
        self._thread: Optional[threading.Thread] = None
        host, port = self._httpd.server_address[:2]
        self.base_url = f"http://{host}:{port}"
        node.set_self_url(self.base_url)
        origin_setter = getattr(node.transport, "set_origin", None)
        if origin_setter is not None:
            origin_setter(self.base_url)

    def start(self) -> str:
        self._thread = threading.Thread(
            target=lambda: self._httpd.serve_forever(poll_interval=0.05),
            name=f"meshchain-http-{self.base_url}",
            daemon=True,
        )
        self._thread.start()
        return self.base_url

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def serve_forever(self) -> None:
        self._httpd.serve_forever()
