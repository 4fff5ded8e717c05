"""Polygonal meshes: OBJ exchange, canonical hashing, diff and patch.

Coordinates are fixed-precision decimal strings (exactly 6 fractional
digits, half-away-from-zero rounding, no "-0.000000") so that equal
meshes hash identically on every node regardless of platform float
formatting. Mesh modifications are stored as positional edit scripts
over the ordered vertex and face lists; a script is minimal in the
LCS sense, which keeps committed deltas proportional to the edit, not
to the mesh.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation, ROUND_HALF_UP
from typing import Any, Iterable, Sequence, TypeVar, Union

from .canonical import canonical_bytes as _canonical_bytes


class MeshError(ValueError):
    """Invalid mesh data or mesh operation input."""


class ObjParseError(MeshError):
    """Malformed OBJ document; message carries the offending line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class DeltaApplyError(MeshError):
    """Edit script does not fit the base it was applied to."""


_QUANTUM = Decimal("0.000001")
_COORD_RE = re.compile(r"-?(0|[1-9][0-9]*)\.[0-9]{6}")

Coordinate = Union[str, int, float, Decimal]


def quantize_coordinate(value: Coordinate) -> str:
    """Round a coordinate to the canonical 6-digit decimal string.

    Rounding is half-away-from-zero on the 7th fractional digit. The
    result is sign-normalized: a value rounding to zero is "0.000000".
    """
    if isinstance(value, float):
        value = repr(value)
    try:
        dec = Decimal(value)
    except InvalidOperation:
        raise MeshError(f"not a decimal coordinate: {value!r}") from None
    if not dec.is_finite():
        raise MeshError(f"coordinate must be finite, got {value!r}")
    try:
        dec = dec.quantize(_QUANTUM, rounding=ROUND_HALF_UP)
    except InvalidOperation:
        raise MeshError(f"coordinate out of range: {value!r}") from None
    if dec == 0:
        return "0.000000"
    return str(dec)


@dataclass(frozen=True)
class Vertex:
    """A point in model space, held as canonical coordinate strings."""

    x: str
    y: str
    z: str

    def __post_init__(self):
        for name in ("x", "y", "z"):
            coord = getattr(self, name)
            if not isinstance(coord, str) or not _COORD_RE.fullmatch(coord):
                raise MeshError(f"non-canonical coordinate {name}={coord!r}")
            if coord == "-0.000000":
                raise MeshError("negative zero is not canonical")

    @classmethod
    def of(cls, x: Coordinate, y: Coordinate, z: Coordinate) -> "Vertex":
        """Build a vertex from arbitrary numeric input, quantizing each axis."""
        return cls(quantize_coordinate(x), quantize_coordinate(y), quantize_coordinate(z))

    def to_json(self) -> list:
        return [self.x, self.y, self.z]

    @classmethod
    def from_json(cls, data: Any) -> "Vertex":
        if not isinstance(data, list) or len(data) != 3:
            raise MeshError(f"vertex must be a 3-element array, got {data!r}")
        return cls(*data)


@dataclass(frozen=True)
class Face:
    """An ordered ring of vertex indices (0-based, at least a triangle)."""

    indices: tuple

    def __post_init__(self):
        idx = tuple(self.indices)
        object.__setattr__(self, "indices", idx)
        if len(idx) < 3:
            raise MeshError(f"face needs at least 3 indices, got {len(idx)}")
        for i in idx:
            if not isinstance(i, int) or isinstance(i, bool) or i < 0:
                raise MeshError(f"face index must be a non-negative integer, got {i!r}")
        if len(set(idx)) != len(idx):
            raise MeshError(f"face repeats a vertex index: {idx}")

    def to_json(self) -> list:
        return list(self.indices)

    @classmethod
    def from_json(cls, data: Any) -> "Face":
        if not isinstance(data, list):
            raise MeshError(f"face must be an array of indices, got {data!r}")
        return cls(tuple(data))


@dataclass(frozen=True)
class Mesh:
    """Ordered vertex and face lists; order is part of the identity."""

    vertices: tuple = ()
    faces: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "faces", tuple(self.faces))
        for v in self.vertices:
            if not isinstance(v, Vertex):
                raise MeshError(f"expected Vertex, got {type(v).__name__}")
        count = len(self.vertices)
        for f in self.faces:
            if not isinstance(f, Face):
                raise MeshError(f"expected Face, got {type(f).__name__}")
            for i in f.indices:
                if i >= count:
                    raise MeshError(
                        f"face index {i} out of range for {count} vertices"
                    )

    def to_json(self) -> dict:
        return {
            "faces": [f.to_json() for f in self.faces],
            "vertices": [v.to_json() for v in self.vertices],
        }

    @classmethod
    def from_json(cls, data: Any) -> "Mesh":
        if not isinstance(data, dict):
            raise MeshError(f"mesh must be an object, got {data!r}")
        unknown = set(data) - {"vertices", "faces"}
        if unknown:
            raise MeshError(f"unknown mesh fields: {sorted(unknown)}")
        vertices = data.get("vertices", [])
        faces = data.get("faces", [])
        if not isinstance(vertices, list) or not isinstance(faces, list):
            raise MeshError("mesh vertices and faces must be arrays")
        return cls(
            tuple(Vertex.from_json(v) for v in vertices),
            tuple(Face.from_json(f) for f in faces),
        )


def canonical_mesh_bytes(mesh: Mesh) -> bytes:
    """Canonical JSON encoding of a mesh; the hashing preimage."""
    return _canonical_bytes(mesh.to_json())


# --- OBJ exchange (geometry-only subset) ------------------------------

_INT_RE = re.compile(r"-?[0-9]+")


def parse_obj(text: str) -> Mesh:
    """Parse the supported OBJ subset: `v x y z`, `f i j k...`, comments.

    Face indices are 1-based in the document and converted to 0-based.
    Any other statement kind (vt, vn, usemtl, ...) is a hard error so
    data is never dropped silently.
    """
    vertices: list = []
    raw_faces: list = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        keyword = parts[0]
        if keyword == "v":
            if len(parts) != 4:
                raise ObjParseError(lineno, f"vertex needs exactly 3 coordinates, got {len(parts) - 1}")
            try:
                vertices.append(Vertex.of(parts[1], parts[2], parts[3]))
            except MeshError as exc:
                raise ObjParseError(lineno, str(exc)) from None
        elif keyword == "f":
            if len(parts) < 4:
                raise ObjParseError(lineno, f"face needs at least 3 indices, got {len(parts) - 1}")
            indices = []
            for token in parts[1:]:
                if not _INT_RE.fullmatch(token):
                    raise ObjParseError(lineno, f"face index {token!r} is not a plain integer")
                indices.append(int(token))
            raw_faces.append((lineno, indices))
        else:
            raise ObjParseError(lineno, f"unsupported statement {keyword!r}")

    faces = []
    count = len(vertices)
    for lineno, indices in raw_faces:
        zero_based = []
        for i in indices:
            if i < 1 or i > count:
                raise ObjParseError(lineno, f"face index {i} out of range (mesh has {count} vertices)")
            zero_based.append(i - 1)
        if len(set(zero_based)) != len(zero_based):
            raise ObjParseError(lineno, f"face repeats a vertex index: {indices}")
        faces.append(Face(tuple(zero_based)))
    return Mesh(tuple(vertices), tuple(faces))


def serialize_obj(mesh: Mesh) -> str:
    """Emit the canonical OBJ document: all vertices, then all faces."""
    lines = [f"v {v.x} {v.y} {v.z}" for v in mesh.vertices]
    lines.extend("f " + " ".join(str(i + 1) for i in f.indices) for f in mesh.faces)
    if not lines:
        return ""
    return "\n".join(lines) + "\n"


# --- Edit scripts -------------------------------------------------------

T = TypeVar("T")


@dataclass(frozen=True)
class EditScript:
    """Deletions from the base plus insertions at final positions.

    `deletions` are strictly ascending indices into the base sequence;
    `insertions` are strictly ascending `(result_index, item)` pairs
    where result_index is the position in the transformed sequence.
    """

    deletions: tuple = ()
    insertions: tuple = ()

    def __post_init__(self):
        deletions = tuple(self.deletions)
        insertions = tuple((pos, item) for pos, item in self.insertions)
        object.__setattr__(self, "deletions", deletions)
        object.__setattr__(self, "insertions", insertions)
        prev = -1
        for pos in deletions:
            if not isinstance(pos, int) or isinstance(pos, bool) or pos < 0:
                raise MeshError(f"deletion index must be a non-negative integer, got {pos!r}")
            if pos <= prev:
                raise MeshError(f"deletion indices must be strictly ascending, got {deletions}")
            prev = pos
        prev = -1
        for pos, _item in insertions:
            if not isinstance(pos, int) or isinstance(pos, bool) or pos < 0:
                raise MeshError(f"insertion index must be a non-negative integer, got {pos!r}")
            if pos <= prev:
                raise MeshError("insertion indices must be strictly ascending")
            prev = pos

    @property
    def is_empty(self) -> bool:
        return not self.deletions and not self.insertions

    @property
    def entry_count(self) -> int:
        return len(self.deletions) + len(self.insertions)

    def to_json(self, item_to_json) -> dict:
        return {
            "deletions": list(self.deletions),
            "insertions": [[pos, item_to_json(item)] for pos, item in self.insertions],
        }

    @classmethod
    def from_json(cls, data: Any, item_from_json) -> "EditScript":
        if not isinstance(data, dict) or set(data) != {"deletions", "insertions"}:
            raise MeshError(f"edit script must have deletions and insertions, got {data!r}")
        deletions = data["deletions"]
        insertions = data["insertions"]
        if not isinstance(deletions, list) or not isinstance(insertions, list):
            raise MeshError("edit script fields must be arrays")
        pairs = []
        for entry in insertions:
            if not isinstance(entry, list) or len(entry) != 2:
                raise MeshError(f"insertion must be [index, item], got {entry!r}")
            pairs.append((entry[0], item_from_json(entry[1])))
        return cls(tuple(deletions), tuple(pairs))


def apply_sequence(base: Sequence[T], script: EditScript) -> list:
    """Replay an edit script: deletions (descending), then insertions.

    Raises DeltaApplyError when the script does not fit the base, which
    signals a delta applied against the wrong parent.
    """
    out = list(base)
    for pos in reversed(script.deletions):
        if pos >= len(base):
            raise DeltaApplyError(
                f"deletion index {pos} out of range for base of length {len(base)}"
            )
        del out[pos]
    for pos, item in script.insertions:
        if pos > len(out):
            raise DeltaApplyError(
                f"insertion index {pos} beyond current length {len(out)}"
            )
        out.insert(pos, item)
    return out


def _myers_moves(a: Sequence[T], b: Sequence[T]):
    """Greedy shortest-edit search; yields deletions and insertions.

    Returns (deleted base indices ascending, inserted (target index, item)
    pairs ascending). The total move count is minimal, i.e. equals
    len(a) + len(b) - 2 * LCS(a, b).
    """
    n, m = len(a), len(b)
    v: dict = {1: 0}
    trace: list = []
    found = None
    for d in range(n + m + 1):
        trace.append(dict(v))
        for k in range(-d, d + 1, 2):
            if k == -d or (k != d and v.get(k - 1, 0) < v.get(k + 1, 0)):
                x = v.get(k + 1, 0)
            else:
                x = v.get(k - 1, 0) + 1
            y = x - k
            while x < n and y < m and a[x] == b[y]:
                x += 1
                y += 1
            v[k] = x
            if x >= n and y >= m:
                found = d
                break
        if found is not None:
            break
    assert found is not None

    deletions: list = []
    insertions: list = []
    x, y = n, m
    for d in range(found, 0, -1):
        snapshot = trace[d]
        k = x - y
        if k == -d or (k != d and snapshot.get(k - 1, 0) < snapshot.get(k + 1, 0)):
            prev_k = k + 1
        else:
            prev_k = k - 1
        prev_x = snapshot.get(prev_k, 0)
        prev_y = prev_x - prev_k
        while x > prev_x and y > prev_y:
            x -= 1
            y -= 1
        if x == prev_x:
            insertions.append((prev_y, b[prev_y]))
        else:
            deletions.append(prev_x)
        x, y = prev_x, prev_y
    deletions.reverse()
    insertions.reverse()
    return deletions, insertions


def diff_sequence(base: Sequence[T], target: Sequence[T]) -> EditScript:
    """Minimal edit script turning base into target.

    Deterministic: ties between equally short scripts are broken by the
    greedy search, which keeps the earliest-matching base items.
    """
    base = list(base)
    target = list(target)
    prefix = 0
    limit = min(len(base), len(target))
    while prefix < limit and base[prefix] == target[prefix]:
        prefix += 1
    suffix = 0
    while (
        suffix < limit - prefix
        and base[len(base) - 1 - suffix] == target[len(target) - 1 - suffix]
    ):
        suffix += 1
    core_base = base[prefix : len(base) - suffix]
    core_target = target[prefix : len(target) - suffix]

    if not core_base:
        deletions: list = []
        insertions = [(prefix + i, item) for i, item in enumerate(core_target)]
    elif not core_target:
        deletions = [prefix + i for i in range(len(core_base))]
        insertions = []
    else:
        raw_del, raw_ins = _myers_moves(core_base, core_target)
        deletions = [prefix + i for i in raw_del]
        insertions = [(prefix + pos, item) for pos, item in raw_ins]
    return EditScript(tuple(deletions), tuple(insertions))


# --- Mesh deltas ---------------------------------------------------------


@dataclass(frozen=True)
class MeshDelta:
    """Paired edit scripts over a mesh's vertex and face lists."""

    vertex_script: EditScript = field(default_factory=EditScript)
    face_script: EditScript = field(default_factory=EditScript)

    @property
    def is_empty(self) -> bool:
        return self.vertex_script.is_empty and self.face_script.is_empty

    @property
    def entry_count(self) -> int:
        return self.vertex_script.entry_count + self.face_script.entry_count

    def to_json(self) -> dict:
        return {
            "faces": self.face_script.to_json(lambda f: f.to_json()),
            "vertices": self.vertex_script.to_json(lambda v: v.to_json()),
        }

    @classmethod
    def from_json(cls, data: Any) -> "MeshDelta":
        if not isinstance(data, dict) or set(data) != {"faces", "vertices"}:
            raise MeshError(f"delta must have faces and vertices scripts, got {data!r}")
        return cls(
            vertex_script=EditScript.from_json(data["vertices"], Vertex.from_json),
            face_script=EditScript.from_json(data["faces"], Face.from_json),
        )


def canonical_delta_bytes(delta: MeshDelta) -> bytes:
    """Canonical JSON encoding of a delta; used inside transaction ids."""
    return _canonical_bytes(delta.to_json())


def diff_mesh(base: Mesh, target: Mesh) -> MeshDelta:
    """Delta whose application to base reproduces target exactly."""
    return MeshDelta(
        vertex_script=diff_sequence(base.vertices, target.vertices),
        face_script=diff_sequence(base.faces, target.faces),
    )


def patch_mesh(base: Mesh, delta: MeshDelta) -> Mesh:
    """Apply a delta; the inverse of diff_mesh on its output."""
    vertices = apply_sequence(base.vertices, delta.vertex_script)
    faces = apply_sequence(base.faces, delta.face_script)
    count = len(vertices)
    for result_index, face in enumerate(faces):
        for i in face.indices:
            if i >= count:
                raise DeltaApplyError(
                    f"face at result index {result_index} references vertex {i}, "
                    f"but the patched mesh has {count} vertices"
                )
    return Mesh(tuple(vertices), tuple(faces))


EMPTY_MESH = Mesh()
