/**
 * Typed client for the node's JSON API. The UI performs no chain
 * logic: every hash, count and mesh it shows comes straight out of
 * these responses.
 */

export type VertexJson = [string, string, string];
export type FaceJson = number[];

export interface MeshJson {
  vertices: VertexJson[];
  faces: FaceJson[];
}

export interface TransactionJson {
  id: string;
  parent_tx_id: string | null;
  author: string;
  timestamp: number;
  delta: unknown;
}

export interface BlockSummary {
  difficulty: number;
  hash: string;
  height: number;
  prev_hash: string;
  timestamp: number;
  tx_count: number;
  tx_ids: string[];
}

export interface ChainSummary {
  blocks: BlockSummary[];
  difficulty: number;
  genesis_hash: string;
  height: number;
  tip: string;
}

export interface MempoolView {
  transactions: TransactionJson[];
  orphans: TransactionJson[];
}

export interface CheckoutResult {
  mesh: MeshJson;
  obj_text: string;
}

export interface BlockJson extends Omit<BlockSummary, "tx_count"> {
  nonce: number;
  transactions: TransactionJson[];
}

export interface TransactionInfo {
  block_hash: string | null;
  height: number | null;
  in_mempool: boolean;
  transaction: TransactionJson;
}

export interface CommitRequest {
  obj_text: string;
  author?: string;
  parent?: string;
}

/** API failure carrying the node's error text verbatim. */
export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class NodeApi {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    let body: unknown;
    try {
      body = await response.json();
    } catch {
      throw new ApiError(response.status, `node returned non-JSON (HTTP ${response.status})`);
    }
    if (!response.ok) {
      const message =
        typeof body === "object" && body !== null && "error" in body
          ? String((body as { error: unknown }).error)
          : `HTTP ${response.status}`;
      throw new ApiError(response.status, message);
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  getChain(): Promise<ChainSummary> {
    return this.request<ChainSummary>("/api/chain");
  }

  getMempool(): Promise<MempoolView> {
    return this.request<MempoolView>("/api/mempool");
  }

  getTransaction(txId: string): Promise<TransactionInfo> {
    return this.request<TransactionInfo>(`/api/transaction/${txId}`);
  }

  checkout(txId: string): Promise<CheckoutResult> {
    return this.request<CheckoutResult>(`/api/checkout/${txId}`);
  }

  commit(body: CommitRequest): Promise<TransactionJson> {
    return this.post<TransactionJson>("/api/commit", body);
  }

  mine(): Promise<BlockJson> {
    return this.post<BlockJson>("/api/mine", {});
  }
}
