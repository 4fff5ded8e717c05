"""Command-line modeling-tool client and node launcher.

The CLI speaks the same HTTP API a real modeling-tool plugin would;
`serve` runs a node, the rest are thin client commands against one.
Exit code 0 on success, 1 with the API error text on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Any, List, Optional

import requests

from .canonical import canonical_dumps
from .harness import run_scenario, scenario_from_file
from .mesh import parse_obj, serialize_obj
from .node import Node, NodeConfig
from .server import NodeServer


class CliError(Exception):
    pass


def _request(method: str, url: str, payload: Optional[dict] = None) -> Any:
    try:
        if method == "GET":
            response = requests.get(url, timeout=30)
        else:
            response = requests.post(
                url,
                data=canonical_dumps(payload or {}).encode("utf-8"),
                headers={"Content-Type": "application/json"},
                timeout=600,
            )
    except requests.RequestException as exc:
        raise CliError(f"cannot reach node: {exc}") from None
    try:
        body = response.json()
    except ValueError:
        raise CliError(f"node returned non-JSON ({response.status_code})") from None
    if response.status_code != 200:
        raise CliError(body.get("error", f"HTTP {response.status_code}"))
    return body


def cmd_serve(args: argparse.Namespace) -> int:
    config = NodeConfig(
        port=args.port,
        host=args.host,
        data_dir=args.data_dir,
        peers=args.peer,
        difficulty=args.difficulty,
        author=args.author,
    )
    node = Node(config)
    server = NodeServer(node)
    url = server.start()
    print(f"node listening on {url} (difficulty {config.difficulty}, "
          f"{len(node.peers())} peer(s))")
    try:
        while True:
            server._thread.join(1)  # keep the main thread interruptible
    except KeyboardInterrupt:
        print("shutting down")
        server.stop()
    return 0


def cmd_commit(args: argparse.Namespace) -> int:
    with open(args.file, "r", encoding="utf-8") as fh:
        mesh = parse_obj(fh.read())
    payload: dict = {"mesh": mesh.to_json(), "author": args.author}
    if args.parent:
        payload["parent"] = args.parent
    tx = _request("POST", f"{args.node}/api/commit", payload)
    print(f"committed {tx['id']}")
    print(f"  parent: {tx['parent_tx_id'] or '(root)'}")
    return 0


def cmd_checkout(args: argparse.Namespace) -> int:
    body = _request("GET", f"{args.node}/api/checkout/{args.tx}")
    obj_text = body["obj_text"]
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(obj_text)
        mesh = body["mesh"]
        print(f"wrote {args.output} ({len(mesh['vertices'])} vertices, "
              f"{len(mesh['faces'])} faces)")
    else:
        sys.stdout.write(obj_text)
    return 0


def cmd_mine(args: argparse.Namespace) -> int:
    block = _request("POST", f"{args.node}/api/mine", {})
    print(f"mined block {block['hash']}")
    print(f"  height {block['height']}, nonce {block['nonce']}, "
          f"{len(block['tx_ids'])} transaction(s)")
    return 0


def cmd_log(args: argparse.Namespace) -> int:
    chain = _request("GET", f"{args.node}/api/chain")
    mempool = _request("GET", f"{args.node}/api/mempool")
    print(f"chain height {chain['height']}, tip {chain['tip']}")
    for block in reversed(chain["blocks"]):
        print(f"  block {block['height']:>4}  {block['hash'][:16]}  "
              f"{block['tx_count']} tx")
        for tx_id in block["tx_ids"]:
            print(f"    tx {tx_id}")
    pending = mempool["transactions"]
    print(f"mempool: {len(pending)} pending")
    for tx in pending:
        print(f"    tx {tx['id']}  by {tx['author']}")
    return 0


def cmd_peers(args: argparse.Namespace) -> int:
    if args.peers_command == "add":
        body = _request("POST", f"{args.node}/api/peers", {"url": args.url})
        verb = "added" if body["added"] else "already known"
        print(f"{verb}: {args.url}")
    else:
        body = _request("GET", f"{args.node}/api/peers")
    for peer in body["peers"]:
        print(f"  {peer}")
    return 0


def cmd_harness(args: argparse.Namespace) -> int:
    scenario = scenario_from_file(args.scenario)
    report = run_scenario(scenario)
    for line in report.step_log:
        print(line)
    if report.failures:
        print(f"{len(report.failures)} failure(s):", file=sys.stderr)
        for failure in report.failures:
            print(f"  {failure}", file=sys.stderr)
        return 1
    print(f"scenario {report.name}: all steps passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meshchain",
        description="Serverless collaborative 3D modeling on a proof-of-work chain.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run a blockchain client node")
    serve.add_argument("--port", type=int, default=8400)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--data-dir", default=None)
    serve.add_argument("--peer", action="append", default=[], metavar="URL")
    serve.add_argument("--difficulty", type=int, default=16)
    serve.add_argument("--author", default="anonymous")
    serve.set_defaults(handler=cmd_serve)

    commit = sub.add_parser("commit", help="commit an OBJ file as a transaction")
    commit.add_argument("file", metavar="FILE.obj")
    commit.add_argument("--node", required=True, metavar="URL")
    commit.add_argument("--author", required=True)
    commit.add_argument("--parent", default=None, metavar="TX")
    commit.set_defaults(handler=cmd_commit)

    checkout = sub.add_parser("checkout", help="reconstruct the mesh at a transaction")
    checkout.add_argument("tx", metavar="TX")
    checkout.add_argument("--node", required=True, metavar="URL")
    checkout.add_argument("-o", "--output", default=None, metavar="FILE.obj")
    checkout.set_defaults(handler=cmd_checkout)

    mine = sub.add_parser("mine", help="mine the mempool into a block")
    mine.add_argument("--node", required=True, metavar="URL")
    mine.set_defaults(handler=cmd_mine)

    log_cmd = sub.add_parser("log", help="show the chain and the mempool")
    log_cmd.add_argument("--node", required=True, metavar="URL")
    log_cmd.set_defaults(handler=cmd_log)

    peers = sub.add_parser("peers", help="manage the peer set")
    peers_sub = peers.add_subparsers(dest="peers_command", required=True)
    peers_add = peers_sub.add_parser("add")
    peers_add.add_argument("url", metavar="URL")
    peers_add.add_argument("--node", required=True, metavar="URL")
    peers_add.set_defaults(handler=cmd_peers)
    peers_list = peers_sub.add_parser("list")
    peers_list.add_argument("--node", required=True, metavar="URL")
    peers_list.set_defaults(handler=cmd_peers)

    harness = sub.add_parser("harness", help="run a multi-node simulation scenario")
    harness_sub = harness.add_subparsers(dest="harness_command", required=True)
    harness_run = harness_sub.add_parser("run")
    harness_run.add_argument("scenario", metavar="SCENARIO.json")
    harness_run.set_defaults(handler=cmd_harness)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
