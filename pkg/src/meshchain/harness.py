"""Deterministic multi-node simulation for tests and demos.

Spawns N real nodes (each with its own HTTP server on a loopback port),
then drives a scripted scenario: commits, mines, partitions, tampering,
quiescence waits and assertions. Partitions are emulated by failing
inter-group calls inside the injected transport, not by firewalling,
so runs are portable and deterministic. Healing performs one
anti-entropy round (every node syncs once from each peer) because push
gossip alone carries no history to a rejoining side.
"""

from __future__ import annotations

import json
import threading
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Set

from .chain import Block, Transaction
from .history import rebuild_index
from .mesh import Mesh, parse_obj
from .node import Node, NodeConfig
from .server import NodeServer
from .transport import HttpTransport, PeerUnreachable

SETTLE_MS = 500
POLL_MS = 50

STEP_KINDS = {
    "commit",
    "mine",
    "mine_concurrent",
    "partition",
    "heal",
    "tamper",
    "sync",
    "wait_quiesce",
    "assert_converged",
    "assert_tip_height",
    "assert_mempool_contains",
    "assert_mempool_size",
    "assert_checkout",
    "assert_violation_logged",
    "assert_relays_at_most",
}


class ScenarioError(ValueError):
    """Scenario file violates the schema; message names the location."""


@dataclass
class Scenario:
    name: str
    node_count: int
    topology: List[List[int]]
    difficulty: int
    steps: List[dict]


def _require(condition: bool, where: str, message: str) -> None:
    if not condition:
        raise ScenarioError(f"{where}: {message}")


def scenario_from_json(data: Any) -> Scenario:
    """Validate and build a Scenario from parsed JSON."""
    _require(isinstance(data, dict), "scenario", "top level must be an object")
    name = data.get("name", "unnamed")
    _require(isinstance(name, str), "name", "must be a string")
    nodes = data.get("nodes")
    _require(isinstance(nodes, int) and not isinstance(nodes, bool) and nodes >= 1,
             "nodes", "must be a positive integer")
    difficulty = data.get("difficulty", 0)
    _require(isinstance(difficulty, int) and 0 <= difficulty <= 255,
             "difficulty", "must be an integer in [0, 255]")

    topology_raw = data.get("topology", "full")
    if topology_raw == "full":
        topology = [[j for j in range(nodes) if j != i] for i in range(nodes)]
    else:
        _require(isinstance(topology_raw, list) and len(topology_raw) == nodes,
                 "topology", f"must be 'full' or a list of {nodes} peer lists")
        topology = []
        for i, peers in enumerate(topology_raw):
            _require(isinstance(peers, list), f"topology[{i}]", "must be a list of node indices")
            for p in peers:
                _require(isinstance(p, int) and 0 <= p < nodes and p != i,
                         f"topology[{i}]", f"bad peer index {p!r}")
            topology.append(list(peers))

    steps_raw = data.get("steps", [])
    _require(isinstance(steps_raw, list), "steps", "must be a list")

    def check_node(where: str, value: Any) -> None:
        _require(isinstance(value, int) and 0 <= value < nodes, where,
                 f"node index must be in [0, {nodes - 1}], got {value!r}")

    steps: List[dict] = []
    commit_count = 0
    partition_open = False
    for i, step in enumerate(steps_raw):
        where = f"steps[{i}]"
        _require(isinstance(step, dict), where, "must be an object")
        kind = step.get("kind")
        _require(kind in STEP_KINDS, where, f"unknown step kind {kind!r}")
        if kind == "commit":
            check_node(f"{where}.node", step.get("node"))
            _require(isinstance(step.get("obj"), str), where, "commit needs an 'obj' document string")
            commit_count += 1
        elif kind == "mine":
            check_node(f"{where}.node", step.get("node"))
        elif kind == "mine_concurrent":
            miners = step.get("nodes")
            _require(isinstance(miners, list) and len(miners) >= 2, where,
                     "mine_concurrent needs a list of at least 2 nodes")
            for m in miners:
                check_node(f"{where}.nodes", m)
        elif kind == "partition":
            _require(not partition_open, where, "partition while another partition is active")
            groups = step.get("groups")
            _require(isinstance(groups, list) and len(groups) >= 2, where,
                     "partition needs at least 2 groups")
            seen: Set[int] = set()
            for g in groups:
                _require(isinstance(g, list) and g, where, "each group must be a non-empty list")
                for member in g:
                    check_node(f"{where}.groups", member)
                    _require(member not in seen, where, f"node {member} appears in two groups")
                    seen.add(member)
            _require(seen == set(range(nodes)), where, "groups must cover every node exactly once")
            partition_open = True
        elif kind == "heal":
            _require(partition_open, where, "heal without an active partition")
            partition_open = False
        elif kind == "tamper":
            check_node(f"{where}.node", step.get("node"))
            height = step.get("height")
            _require(isinstance(height, int) and height >= 1, where,
                     "tamper needs a block height >= 1")
        elif kind == "sync":
            check_node(f"{where}.node", step.get("node"))
            check_node(f"{where}.from", step.get("from"))
        elif kind in ("assert_tip_height", "assert_mempool_size", "assert_violation_logged"):
            check_node(f"{where}.node", step.get("node"))
            if kind == "assert_tip_height":
                _require(isinstance(step.get("height"), int), where, "needs an integer 'height'")
            if kind == "assert_mempool_size":
                _require(isinstance(step.get("count"), int), where, "needs an integer 'count'")
        elif kind in ("assert_mempool_contains", "assert_checkout"):
            check_node(f"{where}.node", step.get("node"))
            commit_ref = step.get("commit")
            _require(isinstance(commit_ref, int) and 0 <= commit_ref < commit_count, where,
                     f"'commit' must reference an earlier commit step, got {commit_ref!r}")
        elif kind == "assert_relays_at_most":
            commit_ref = step.get("commit")
            _require(isinstance(commit_ref, int) and 0 <= commit_ref < commit_count, where,
                     f"'commit' must reference an earlier commit step, got {commit_ref!r}")
            _require(isinstance(step.get("limit"), int), where, "needs an integer 'limit'")
        elif kind == "assert_converged":
            members = step.get("nodes")
            if members is not None:
                _require(isinstance(members, list) and members, where, "'nodes' must be a non-empty list")
                for m in members:
                    check_node(f"{where}.nodes", m)
        steps.append(dict(step))
    _require(not partition_open, "steps", "scenario ends with an unhealed partition")
    return Scenario(name=name, node_count=nodes, topology=topology,
                    difficulty=difficulty, steps=steps)


def scenario_from_file(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: not valid JSON: {exc}") from None
    return scenario_from_json(data)


def fixture_path(name: str) -> str:
    """Filesystem path of a scenario fixture shipped with the package."""
    return str(Path(__file__).parent / "scenarios" / f"{name}.json")


class PartitionGate:
    """Shared reachability oracle plus relay counters for all transports."""

    def __init__(self):
        self._lock = threading.Lock()
        self._group_of: Optional[Dict[int, int]] = None
        self._index_of_url: Dict[str, int] = {}
        self.tx_relays: Dict[str, int] = {}
        self.block_relays: Dict[str, int] = {}

    def register(self, url: str, index: int) -> None:
        with self._lock:
            self._index_of_url[url] = index

    def set_groups(self, groups: List[List[int]]) -> None:
        with self._lock:
            self._group_of = {m: gi for gi, g in enumerate(groups) for m in g}

    def clear(self) -> None:
        with self._lock:
            self._group_of = None

    def allowed(self, src_index: int, dst_url: str) -> bool:
        with self._lock:
            if self._group_of is None:
                return True
            dst_index = self._index_of_url.get(dst_url)
            if dst_index is None:
                return True
            return self._group_of.get(src_index) == self._group_of.get(dst_index)

    def count_tx(self, tx_id: str) -> None:
        with self._lock:
            self.tx_relays[tx_id] = self.tx_relays.get(tx_id, 0) + 1

    def count_block(self, block_hash: str) -> None:
        with self._lock:
            self.block_relays[block_hash] = self.block_relays.get(block_hash, 0) + 1


class GatedTransport(HttpTransport):
    """Real HTTP, except calls across an active partition fail."""

    def __init__(self, node_index: int, gate: PartitionGate, timeout: float = 10.0):
        super().__init__(timeout=timeout)
        self.node_index = node_index
        self.gate = gate

    def _check(self, peer: str) -> None:
        if not self.gate.allowed(self.node_index, peer):
            raise PeerUnreachable(f"partitioned: node {self.node_index} cannot reach {peer}")

    def send_transaction(self, peer: str, tx_json: dict) -> None:
        self._check(peer)
        self.gate.count_tx(tx_json["id"])
        super().send_transaction(peer, tx_json)

    def send_block(self, peer: str, block_json: dict) -> None:
        self._check(peer)
        self.gate.count_block(block_json["hash"])
        super().send_block(peer, block_json)

    def fetch_chain(self, peer: str) -> List[dict]:
        self._check(peer)
        return super().fetch_chain(peer)

    def fetch_genesis_hash(self, peer: str) -> str:
        self._check(peer)
        return super().fetch_genesis_hash(peer)


@dataclass
class ScenarioReport:
    name: str
    tips: List[str] = field(default_factory=list)
    failures: List[str] = field(default_factory=list)
    step_log: List[str] = field(default_factory=list)
    tx_relays: Dict[str, int] = field(default_factory=dict)
    commits: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


class ScenarioRunner:
    def __init__(self, scenario: Scenario, settle_ms: int = SETTLE_MS, poll_ms: int = POLL_MS):
        self.scenario = scenario
        self.settle_ms = settle_ms
        self.poll_ms = poll_ms
        self.gate = PartitionGate()
        self.nodes: List[Node] = []
        self.servers: List[NodeServer] = []
        self.urls: List[str] = []
        self.commits: List[str] = []          # tx id per commit step
        self.commit_meshes: List[Mesh] = []   # committed mesh, the checkout oracle
        self.report = ScenarioReport(name=scenario.name)

    # -- lifecycle ------------------------------------------------------

    def start(self) -> None:
        for i in range(self.scenario.node_count):
            config = NodeConfig(port=0, difficulty=self.scenario.difficulty, author=f"node{i}")
            node = Node(config, transport=GatedTransport(i, self.gate))
            server = NodeServer(node)
            url = server.start()
            self.gate.register(url, i)
            self.nodes.append(node)
            self.servers.append(server)
            self.urls.append(url)
        for i, peers in enumerate(self.scenario.topology):
            for p in peers:
                self.nodes[i].add_peer(self.urls[p])

    def stop(self) -> None:
        for server in self.servers:
            try:
                server.stop()
            except Exception:
                pass

    # -- steps ----------------------------------------------------------

    def run(self) -> ScenarioReport:
        self.start()
        try:
            for i, step in enumerate(self.scenario.steps):
                kind = step["kind"]
                try:
                    outcome = self._run_step(step)
                except Exception as exc:
                    tail = traceback.format_exc(limit=3)
                    self.report.failures.append(f"steps[{i}] {kind}: crashed: {exc}\n{tail}")
                    outcome = "crashed"
                self.report.step_log.append(f"steps[{i}] {kind}: {outcome}")
        finally:
            self.report.tips = [n.tip_hash for n in self.nodes]
            self.report.tx_relays = dict(self.gate.tx_relays)
            self.report.commits = list(self.commits)
            self.stop()
        return self.report

    def _fail(self, message: str) -> str:
        self.report.failures.append(message)
        return f"FAILED: {message}"

    def _run_step(self, step: dict) -> str:
        kind = step["kind"]
        if kind == "commit":
            node = self.nodes[step["node"]]
            mesh = parse_obj(step["obj"])
            tx = node.handle_commit(mesh, author=step.get("author"))
            self.commits.append(tx.id)
            self.commit_meshes.append(mesh)
            return f"tx {tx.id[:12]} at node {step['node']}"
        if kind == "mine":
            block = self.nodes[step["node"]].handle_mine()
            return f"block {block.hash[:12]} height {block.height} at node {step['node']}"
        if kind == "mine_concurrent":
            return self._mine_concurrent(step["nodes"])
        if kind == "partition":
            self.gate.set_groups(step["groups"])
            return f"groups {step['groups']}"
        if kind == "heal":
            self.gate.clear()
            for node in self.nodes:
                for peer in node.peers():
                    node.sync_chain(peer)
            return "healed + anti-entropy round"
        if kind == "tamper":
            return self._tamper(step["node"], step["height"])
        if kind == "sync":
            outcome = self.nodes[step["node"]].sync_chain(self.urls[step["from"]])
            return f"node {step['node']} from node {step['from']}: {outcome.value}"
        if kind == "wait_quiesce":
            return self._wait_quiesce()
        if kind == "assert_converged":
            members = step.get("nodes") or list(range(len(self.nodes)))
            tips = {i: self.nodes[i].tip_hash for i in members}
            if len(set(tips.values())) != 1:
                return self._fail(f"tips diverge: {tips}")
            return f"tip {self.nodes[members[0]].tip_hash[:12]} everywhere"
        if kind == "assert_tip_height":
            chain = self.nodes[step["node"]].active_chain()
            actual = chain[-1].height
            if actual != step["height"]:
                return self._fail(
                    f"node {step['node']} tip height {actual}, expected {step['height']}"
                )
            return f"height {actual}"
        if kind == "assert_mempool_contains":
            tx_id = self.commits[step["commit"]]
            pending, _ = self.nodes[step["node"]].mempool_snapshot()
            if tx_id not in {t.id for t in pending}:
                return self._fail(
                    f"node {step['node']} mempool lacks commit {step['commit']} ({tx_id[:12]})"
                )
            return "present"
        if kind == "assert_mempool_size":
            pending, _ = self.nodes[step["node"]].mempool_snapshot()
            if len(pending) != step["count"]:
                return self._fail(
                    f"node {step['node']} mempool size {len(pending)}, expected {step['count']}"
                )
            return f"size {len(pending)}"
        if kind == "assert_checkout":
            tx_id = self.commits[step["commit"]]
            expected = self.commit_meshes[step["commit"]]
            actual = self.nodes[step["node"]].handle_checkout(tx_id)
            if actual != expected:
                return self._fail(
                    f"node {step['node']} checkout of commit {step['commit']} differs"
                )
            return "mesh matches"
        if kind == "assert_violation_logged":
            node = self.nodes[step["node"]]
            if not node.violations:
                return self._fail(f"node {step['node']} logged no violations")
            return f"{len(node.violations)} violation(s)"
        if kind == "assert_relays_at_most":
            tx_id = self.commits[step["commit"]]
            relays = self.gate.tx_relays.get(tx_id, 0)
            if relays > step["limit"]:
                return self._fail(f"tx relayed {relays} times, limit {step['limit']}")
            return f"{relays} relays"
        raise ScenarioError(f"unhandled step kind {kind!r}")

    def _mine_concurrent(self, miners: List[int]) -> str:
        results: Dict[int, str] = {}

        def mine(index: int) -> None:
            try:
                block = self.nodes[index].handle_mine()
                results[index] = f"block {block.hash[:12]}"
            except Exception as exc:
                results[index] = f"error: {exc}"

        threads = [threading.Thread(target=mine, args=(i,)) for i in miners]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        return "; ".join(f"node {i}: {results[i]}" for i in miners)

    def _tamper(self, index: int, height: int) -> str:
        # Byzantine mutation: rewrite one stored transaction body without
        # re-mining, so the node serves a chain whose hashes no longer
        # match its content. Reaches into node internals by design.
        node = self.nodes[index]
        with node._lock:
            branch = node._branch(node._tip_hash)
            if height >= len(branch):
                raise ScenarioError(f"tamper: node {index} chain has no height {height}")
            block = branch[height]
            if not block.transactions:
                raise ScenarioError(f"tamper: block at height {height} has no transactions")
            victim = block.transactions[0]
            mutated_tx = Transaction(
                id=victim.id,
                parent_tx_id=victim.parent_tx_id,
                delta=victim.delta,
                author=victim.author + " (tampered)",
                timestamp=victim.timestamp,
            )
            bodies = list(block.transactions)
            bodies[0] = mutated_tx
            mutated = Block(
                height=block.height,
                prev_hash=block.prev_hash,
                tx_ids=block.tx_ids,
                transactions=tuple(bodies),
                nonce=block.nonce,
                timestamp=block.timestamp,
                difficulty=block.difficulty,
                hash=block.hash,
            )
            node._blocks[block.hash] = mutated
            node._index = rebuild_index(node._branch(node._tip_hash))
        return f"node {index} block at height {height} mutated"

    def _wait_quiesce(self) -> str:
        deadline = time.monotonic() + 30.0
        stable_needed = self.settle_ms / 1000.0
        last = [n.state_version() for n in self.nodes]
        stable_since = time.monotonic()
        while time.monotonic() < deadline:
            time.sleep(self.poll_ms / 1000.0)
            current = [n.state_version() for n in self.nodes]
            if current != last:
                last = current
                stable_since = time.monotonic()
            elif time.monotonic() - stable_since >= stable_needed:
                return f"quiesced at versions {current}"
        return self._fail("no quiescence within 30 s")


def run_scenario(scenario: Scenario, settle_ms: int = SETTLE_MS, poll_ms: int = POLL_MS) -> ScenarioReport:
    """Execute a scenario start to finish, returning the full report."""
    return ScenarioRunner(scenario, settle_ms=settle_ms, poll_ms=poll_ms).run()
