"""meshchain: serverless collaborative 3D modeling on a PoW blockchain.

Each node pairs a modeling-tool-facing HTTP API with a blockchain
client: mesh edits become diff transactions, get mined into blocks,
gossip to peers, and can be checked out at any point in history.
"""

from .canonical import canonical_bytes, canonical_dumps, canonical_hash, sha256_hex
from .chain import (
    GENESIS,
    Block,
    ChainError,
    MiningAborted,
    Transaction,
    cumulative_work,
    make_transaction,
    meets_difficulty,
    mine_block,
    tx_id,
    validate_block,
    verify_transaction,
)
from .harness import Scenario, ScenarioError, run_scenario, scenario_from_file
from .history import (
    HistoryError,
    TxIndex,
    ancestry_path,
    rebuild_index,
    reconstruct_mesh,
)
from .mempool import AdmitResult, AdmitStatus, Mempool, MempoolEmpty
from .mesh import (
    EMPTY_MESH,
    DeltaApplyError,
    EditScript,
    Face,
    Mesh,
    MeshDelta,
    MeshError,
    ObjParseError,
    Vertex,
    apply_sequence,
    canonical_delta_bytes,
    canonical_mesh_bytes,
    diff_mesh,
    diff_sequence,
    parse_obj,
    patch_mesh,
    quantize_coordinate,
    serialize_obj,
)
from .node import BlockStatus, Node, NodeConfig, NodeError, PeerSet, SyncOutcome
from .server import NodeServer
from .transport import HttpTransport, PeerTransport, PeerUnreachable

__version__ = "0.1.0"
