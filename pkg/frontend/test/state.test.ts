/**
 * ChainView store: selection model, poll reconciliation, action guards.
 * Driven entirely by recorded node responses (no chain logic in the UI).
 */

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ApiError, NodeApi } from "../src/api.js";
import { ChainViewStore, Poller } from "../src/state.js";
import fixtures from "./fixtures/api.json";

class FakeApi {
  // Loosely typed: fixtures with empty arrays infer as never[].
  chain: any = fixtures.chain_one_block;
  mempool: any = fixtures.mempool_empty;
  unreachable = false;
  chainCalls = 0;
  minePending: Promise<unknown> | null = null;
  private mineRelease: (() => void) | null = null;

  async getChain() {
    this.chainCalls += 1;
    if (this.unreachable) throw new TypeError("fetch failed");
    return this.chain;
  }

  async getMempool() {
    if (this.unreachable) throw new TypeError("fetch failed");
    return this.mempool;
  }

  async checkout(txId: string) {
    if (txId === fixtures.commit_tx.id) return fixtures.checkout;
    throw new ApiError(
      fixtures.error_unknown_checkout.status,
      fixtures.error_unknown_checkout.body.error,
    );
  }

  async commit() {
    return fixtures.commit_tx;
  }

  mine() {
    if (this.mineRelease) throw new Error("mine already pending");
    return new Promise((resolve) => {
      this.mineRelease = () => resolve(fixtures.mined_block);
    });
  }

  releaseMine() {
    this.mineRelease?.();
    this.mineRelease = null;
  }
}

function makeStore() {
  const api = new FakeApi();
  const store = new ChainViewStore(api as unknown as NodeApi);
  return { api, store };
}

const TIP = fixtures.chain_one_block.tip;

describe("refresh and selection", () => {
  it("populates chain and mempool from the node", async () => {
    const { api, store } = makeStore();
    api.mempool = fixtures.mempool_pending;
    await store.refresh();
    expect(store.getState().chain).toEqual(fixtures.chain_one_block);
    expect(store.getState().mempool).toEqual(fixtures.mempool_pending);
    expect(store.getState().banner).toBeNull();
  });

  it("keeps a still-valid selection across refreshes", async () => {
    const { api, store } = makeStore();
    await store.refresh();
    store.selectBlock(TIP);
    api.chain = fixtures.chain_two_blocks; // selected block still present
    await store.refresh();
    expect(store.getState().selectedBlock).toBe(TIP);
    expect(store.getState().notice).toBeNull();
  });

  it("clears the selection with a notice when the block leaves the chain", async () => {
    const { api, store } = makeStore();
    api.chain = fixtures.chain_two_blocks;
    await store.refresh();
    const secondBlock = fixtures.chain_two_blocks.blocks[2].hash;
    store.selectBlock(secondBlock);
    await store.selectTransaction(fixtures.chain_two_blocks.blocks[2].tx_ids[0]);
    api.chain = fixtures.chain_one_block; // "reorg" drops the block
    await store.refresh();
    const state = store.getState();
    expect(state.selectedBlock).toBeNull();
    expect(state.selectedTx).toBeNull();
    expect(state.preview).toBeNull();
    expect(state.notice).toContain("no longer on the active chain");
  });

  it("keeps stale data and shows a banner while the node is unreachable", async () => {
    const { api, store } = makeStore();
    await store.refresh();
    api.unreachable = true;
    await store.refresh();
    const state = store.getState();
    expect(state.chain).toEqual(fixtures.chain_one_block); // stale retained
    expect(state.banner).toContain("node unreachable");
    api.unreachable = false;
    await store.refresh();
    expect(store.getState().banner).toBeNull();
  });
});

describe("transaction preview", () => {
  it("only allows transactions of the selected block", async () => {
    const { store } = makeStore();
    await store.refresh();
    store.selectBlock(TIP);
    await store.selectTransaction("ab".repeat(32)); // not in the block
    expect(store.getState().selectedTx).toBeNull();
    expect(store.getState().preview).toBeNull();
  });

  it("previews the checkout with counts straight from the mesh payload", async () => {
    const { store } = makeStore();
    await store.refresh();
    store.selectBlock(TIP);
    await store.selectTransaction(fixtures.commit_tx.id);
    const preview = store.getState().preview;
    expect(preview).not.toBeNull();
    expect(preview!.objText).toBe(fixtures.checkout.obj_text);
    expect(preview!.vertexCount).toBe(fixtures.checkout.mesh.vertices.length);
    expect(preview!.faceCount).toBe(fixtures.checkout.mesh.faces.length);
    const download = store.checkoutDownload();
    expect(download!.text).toBe(fixtures.checkout.obj_text);
  });

  it("shows checkout errors inline", async () => {
    const { api, store } = makeStore();
    // Pretend the tip block lists an id the node cannot checkout.
    api.chain = JSON.parse(JSON.stringify(fixtures.chain_one_block));
    const fake = "ab".repeat(32);
    (api.chain as typeof fixtures.chain_one_block).blocks[1].tx_ids = [fake];
    await store.refresh();
    store.selectBlock(TIP);
    await store.selectTransaction(fake);
    expect(store.getState().previewError).toBe(
      fixtures.error_unknown_checkout.body.error,
    );
    expect(store.getState().preview).toBeNull();
  });
});

describe("actions", () => {
  it("commit highlights the new transaction and refreshes", async () => {
    const { api, store } = makeStore();
    await store.refresh();
    api.mempool = fixtures.mempool_pending;
    const tx = await store.commitObj("v 0 0 0\n", "ada");
    expect(tx!.id).toBe(fixtures.commit_tx.id);
    const state = store.getState();
    expect(state.highlightTx).toBe(fixtures.commit_tx.id);
    expect(state.mempool).toEqual(fixtures.mempool_pending);
    expect(state.committing).toBe(false);
  });

  it("mine sets progress state and highlights the block", async () => {
    const { api, store } = makeStore();
    await store.refresh();
    const pending = store.mine();
    expect(store.getState().mining).toBe(true);
    api.releaseMine();
    await pending;
    expect(store.getState().mining).toBe(false);
    expect(store.getState().highlightBlock).toBe(fixtures.mined_block.hash);
  });

  it("surfaces API errors verbatim", async () => {
    const { api, store } = makeStore();
    api.commit = async () => {
      throw new ApiError(400, "nothing changed: mesh is identical to its parent");
    };
    await store.commitObj("v 0 0 0\n", "ada");
    expect(store.getState().actionError).toBe(
      "nothing changed: mesh is identical to its parent",
    );
  });
});

describe("polling", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("refreshes every 2 s", async () => {
    const { api, store } = makeStore();
    const poller = new Poller(store, 2000);
    poller.start();
    expect(api.chainCalls).toBe(0);
    await vi.advanceTimersByTimeAsync(2000);
    expect(api.chainCalls).toBe(1);
    await vi.advanceTimersByTimeAsync(4000);
    expect(api.chainCalls).toBe(3);
    poller.stop();
    await vi.advanceTimersByTimeAsync(4000);
    expect(api.chainCalls).toBe(3);
  });

  it("suspends polls while a mine request is pending", async () => {
    const { api, store } = makeStore();
    const poller = new Poller(store, 2000);
    poller.start();
    const pending = store.mine();
    await vi.advanceTimersByTimeAsync(6000);
    expect(api.chainCalls).toBe(0); // all polls skipped during mining
    api.releaseMine();
    await pending;
    await vi.advanceTimersByTimeAsync(2000);
    expect(api.chainCalls).toBeGreaterThan(0);
    poller.stop();
  });
});
