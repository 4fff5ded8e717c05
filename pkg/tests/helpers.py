"""Shared generators and independent oracles for the test suite.

The oracles here must stay independent of the code paths they check:
LCS length is computed with a textbook DP table (itself validated
against literal subsequence enumeration), and mesh pairs are produced
by a seeded RNG so failures are reproducible.
"""

from __future__ import annotations

import random
from dataclasses import replace
from typing import List, Sequence, Tuple

from meshchain import (
    GENESIS,
    Block,
    EditScript,
    Face,
    Mesh,
    MeshDelta,
    Vertex,
    make_transaction,
    mine_block,
    validate_block,
)

COORD_POOL = [i * 0.25 for i in range(-8, 9)]


def lcs_length_dp(a: Sequence, b: Sequence) -> int:
    """Classic quadratic LCS table; exact, independent of Myers."""
    n, m = len(a), len(b)
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n):
        row = dp[i]
        nxt = dp[i + 1]
        for j in range(m):
            if a[i] == b[j]:
                nxt[j + 1] = row[j] + 1
            else:
                nxt[j + 1] = max(row[j + 1], nxt[j])
    return dp[n][m]


def minimal_script_size(a: Sequence, b: Sequence) -> int:
    """Fewest deletions+insertions turning a into b."""
    return len(a) + len(b) - 2 * lcs_length_dp(a, b)


def _is_subsequence(sub: Sequence, seq: Sequence) -> bool:
    it = iter(seq)
    return all(any(x == y for y in it) for x in sub)


def lcs_length_enumerated(a: Sequence, b: Sequence) -> int:
    """Literal exhaustive search over subsequences of a. Tiny inputs only."""
    best = 0
    for mask in range(1 << len(a)):
        sub = [a[i] for i in range(len(a)) if mask >> i & 1]
        if len(sub) > best and _is_subsequence(sub, b):
            best = len(sub)
    return best


def random_vertex(rng: random.Random) -> Vertex:
    return Vertex.of(rng.choice(COORD_POOL), rng.choice(COORD_POOL), rng.choice(COORD_POOL))


def random_mesh(rng: random.Random, max_vertices: int = 60) -> Mesh:
    n = rng.randrange(0, max_vertices + 1)
    vertices = tuple(random_vertex(rng) for _ in range(n))
    faces: List[Face] = []
    if n >= 3:
        for _ in range(rng.randrange(0, max(1, n // 3))):
            k = rng.randint(3, min(5, n))
            faces.append(Face(tuple(rng.sample(range(n), k))))
    return Mesh(vertices, tuple(faces))


def mutate_mesh(rng: random.Random, mesh: Mesh, edits: int = 3) -> Mesh:
    """A nearby mesh: the kind of change a modeling session produces."""
    vertices = list(mesh.vertices)
    faces = list(mesh.faces)
    for _ in range(edits):
        op = rng.choice(["insert_v", "delete_v", "move_v", "insert_f", "delete_f"])
        if op == "insert_v":
            vertices.insert(rng.randrange(len(vertices) + 1), random_vertex(rng))
        elif op == "delete_v" and vertices:
            pos = rng.randrange(len(vertices))
            del vertices[pos]
            kept = []
            for face in faces:
                if pos in face.indices:
                    continue
                kept.append(Face(tuple(i - 1 if i > pos else i for i in face.indices)))
            faces = kept
        elif op == "move_v" and vertices:
            vertices[rng.randrange(len(vertices))] = random_vertex(rng)
        elif op == "insert_f" and len(vertices) >= 3:
            k = rng.randint(3, min(5, len(vertices)))
            faces.insert(rng.randrange(len(faces) + 1), Face(tuple(rng.sample(range(len(vertices)), k))))
        elif op == "delete_f" and faces:
            del faces[rng.randrange(len(faces))]
    return Mesh(tuple(vertices), tuple(faces))


def mesh_pair(rng: random.Random, max_vertices: int = 60) -> Tuple[Mesh, Mesh]:
    """Mostly related pairs (edits of a base), sometimes unrelated ones."""
    base = random_mesh(rng, max_vertices)
    if rng.random() < 0.7:
        return base, mutate_mesh(rng, base, edits=rng.randint(1, 6))
    return base, random_mesh(rng, max_vertices)


def grid_mesh(side: int) -> Mesh:
    """A side x side quad grid; handy for size-scaling checks."""
    vertices = tuple(
        Vertex.of(x * 0.5, y * 0.5, 0) for x in range(side) for y in range(side)
    )
    faces = []
    for x in range(side - 1):
        for y in range(side - 1):
            i = x * side + y
            faces.append(Face((i, i + side, i + side + 1, i + 1)))
    return Mesh(vertices, tuple(faces))


# --- chain fixtures and the tamper sweep --------------------------------


def single_vertex_delta(x: float = 1.0) -> MeshDelta:
    return MeshDelta(vertex_script=EditScript(insertions=((0, Vertex.of(x, 0, 0)),)))


def flip_hex(digest: str, position: int = 0) -> str:
    replacement = "1" if digest[position] == "0" else "0"
    return digest[:position] + replacement + digest[position + 1 :]


def build_chain(difficulty: int = 4) -> list:
    """Genesis plus three mined blocks, five transactions total."""
    blocks = [GENESIS]
    t0 = make_transaction(None, single_vertex_delta(1.0), "alice", 10)
    t1 = make_transaction(t0.id, single_vertex_delta(2.0), "bob", 11)
    blocks.append(mine_block(blocks[-1], [t0, t1], difficulty, timestamp=100))
    t2 = make_transaction(t1.id, single_vertex_delta(3.0), "alice", 12)
    blocks.append(mine_block(blocks[-1], [t2], difficulty, timestamp=200))
    t3 = make_transaction(t2.id, single_vertex_delta(4.0), "carol", 13)
    t4 = make_transaction(t3.id, single_vertex_delta(5.0), "carol", 14)
    blocks.append(mine_block(blocks[-1], [t3, t4], difficulty, timestamp=300))
    return blocks


def validate_chain(blocks: list, difficulty: int) -> list:
    """Violations across a whole chain, genesis identity included."""
    violations = []
    if blocks[0].to_json() != GENESIS.to_json():
        violations.append("genesis mismatch")
    known: set = set()
    for i in range(1, len(blocks)):
        violations.extend(validate_block(blocks[i], blocks[i - 1], known, difficulty))
        known.update(tx.id for tx in blocks[i].transactions)
    return violations


def mutate_delta(delta: MeshDelta) -> MeshDelta:
    """Nudge one coordinate of the first inserted vertex by 1e-6."""
    pos, vertex = delta.vertex_script.insertions[0]
    moved = Vertex.of(float(vertex.x) + 0.000001, vertex.y, vertex.z)
    script = EditScript(
        deletions=delta.vertex_script.deletions,
        insertions=((pos, moved),) + delta.vertex_script.insertions[1:],
    )
    return MeshDelta(vertex_script=script, face_script=delta.face_script)


def single_field_mutations(block: Block):
    """Yield (label, mutated block) for every header and tx field."""
    yield "height", replace(block, height=block.height + 1)
    yield "prev_hash", replace(block, prev_hash=flip_hex(block.prev_hash))
    yield "nonce", replace(block, nonce=block.nonce + 1)
    yield "timestamp", replace(block, timestamp=block.timestamp + 1)
    yield "difficulty", replace(block, difficulty=block.difficulty + 1)
    yield "hash", replace(block, hash=flip_hex(block.hash))
    ids = list(block.tx_ids)
    yield "tx_ids[0]", replace(block, tx_ids=tuple([flip_hex(ids[0])] + ids[1:]))
    if len(ids) > 1:
        yield "tx_ids order", replace(block, tx_ids=tuple(reversed(ids)))
    for i, tx in enumerate(block.transactions):
        def with_tx(new_tx):
            bodies = list(block.transactions)
            bodies[i] = new_tx
            return replace(block, transactions=tuple(bodies))

        yield f"tx[{i}].id", with_tx(replace(tx, id=flip_hex(tx.id)))
        new_parent = flip_hex(tx.parent_tx_id) if tx.parent_tx_id else "ab" * 32
        yield f"tx[{i}].parent_tx_id", with_tx(replace(tx, parent_tx_id=new_parent))
        yield f"tx[{i}].author", with_tx(replace(tx, author=tx.author + "x"))
        yield f"tx[{i}].timestamp", with_tx(replace(tx, timestamp=tx.timestamp + 1))
        yield f"tx[{i}].delta", with_tx(replace(tx, delta=mutate_delta(tx.delta)))
