/**
 * Typed client for the node's JSON API. The UI performs no chain
 * logic: every hash, count and mesh it shows comes straight out of
 * these responses.
 */
/** API failure carrying the node's error text verbatim. */
export class ApiError extends Error {
    constructor(status, message) {
        super(message);
        this.status = status;
        this.name = "ApiError";
    }
}
export class NodeApi {
    constructor(baseUrl, fetchImpl = (url, init) => fetch(url, init)) {
        this.baseUrl = baseUrl;
        this.fetchImpl = fetchImpl;
    }
    async request(path, init) {
        const response = await this.fetchImpl(this.baseUrl + path, init);
        let body;
        try {
            body = await response.json();
        }
        catch {
            throw new ApiError(response.status, `node returned non-JSON (HTTP ${response.status})`);
        }
        if (!response.ok) {
            const message = typeof body === "object" && body !== null && "error" in body
                ? String(body.error)
                : `HTTP ${response.status}`;
            throw new ApiError(response.status, message);
        }
        return body;
    }
    post(path, payload) {
        return this.request(path, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(payload),
        });
    }
    getChain() {
        return this.request("/api/chain");
    }
    getMempool() {
        return this.request("/api/mempool");
    }
    getTransaction(txId) {
        return this.request(`/api/transaction/${txId}`);
    }
    checkout(txId) {
        return this.request(`/api/checkout/${txId}`);
    }
    commit(body) {
        return this.post("/api/commit", body);
    }
    mine() {
        return this.post("/api/mine", {});
    }
}
