/**
 * ChainView: the single store behind the UI.
 *
 * Selection invariant: a selected transaction always belongs to the
 * selected block, and the preview is either empty or the checkout of
 * the selected transaction. Polling refreshes chain and mempool every
 * 2 s, preserves a still-valid selection, clears it with a notice when
 * a reorg removed it, and keeps stale data (plus a banner) while the
 * node is unreachable. At most one request per action kind is in
 * flight; polls are suspended while a mine request is pending.
 */
import { ApiError, } from "./api.js";
export const POLL_INTERVAL_MS = 2000;
export class ChainViewStore {
    constructor(api) {
        this.api = api;
        this.state = {
            chain: null,
            mempool: null,
            selectedBlock: null,
            selectedTx: null,
            preview: null,
            previewError: null,
            banner: null,
            notice: null,
            highlightTx: null,
            highlightBlock: null,
            mining: false,
            committing: false,
            actionError: null,
        };
        this.listeners = [];
        this.refreshing = false;
        this.previewing = false;
    }
    getState() {
        return this.state;
    }
    subscribe(listener) {
        this.listeners.push(listener);
        return () => {
            this.listeners = this.listeners.filter((l) => l !== listener);
        };
    }
    update(patch) {
        this.state = { ...this.state, ...patch };
        for (const listener of this.listeners) {
            listener(this.state);
        }
    }
    selectedBlockSummary() {
        const { chain, selectedBlock } = this.state;
        if (!chain || !selectedBlock)
            return null;
        return chain.blocks.find((b) => b.hash === selectedBlock) ?? null;
    }
    /** Pull chain + mempool; reconcile the selection with the new chain. */
    async refresh() {
        if (this.refreshing || this.state.mining)
            return;
        this.refreshing = true;
        try {
            const [chain, mempool] = await Promise.all([
                this.api.getChain(),
                this.api.getMempool(),
            ]);
            const patch = { chain, mempool, banner: null };
            const selected = this.state.selectedBlock;
            if (selected && !chain.blocks.some((b) => b.hash === selected)) {
                patch.selectedBlock = null;
                patch.selectedTx = null;
                patch.preview = null;
                patch.previewError = null;
                patch.notice = "selected block is no longer on the active chain";
            }
            this.update(patch);
        }
        catch (err) {
            this.update({ banner: `node unreachable: ${message(err)}` });
        }
        finally {
            this.refreshing = false;
        }
    }
    selectBlock(hash) {
        const chain = this.state.chain;
        if (!chain || !chain.blocks.some((b) => b.hash === hash))
            return;
        if (this.state.selectedBlock === hash)
            return;
        this.update({
            selectedBlock: hash,
            selectedTx: null,
            preview: null,
            previewError: null,
            notice: null,
        });
    }
    /** Select one of the selected block's transactions and preview it. */
    async selectTransaction(txId) {
        const block = this.selectedBlockSummary();
        if (!block || !block.tx_ids.includes(txId))
            return;
        if (this.previewing)
            return;
        this.previewing = true;
        this.update({ selectedTx: txId, preview: null, previewError: null });
        try {
            const checkout = await this.api.checkout(txId);
            if (this.state.selectedTx !== txId)
                return; // selection moved on
            this.update({
                preview: {
                    txId,
                    mesh: checkout.mesh,
                    objText: checkout.obj_text,
                    vertexCount: checkout.mesh.vertices.length,
                    faceCount: checkout.mesh.faces.length,
                },
            });
        }
        catch (err) {
            this.update({ previewError: message(err) });
        }
        finally {
            this.previewing = false;
        }
    }
    async commitObj(objText, author) {
        if (this.state.committing)
            return null;
        this.update({ committing: true, actionError: null });
        try {
            const tx = await this.api.commit({ obj_text: objText, author });
            this.update({ highlightTx: tx.id });
            await this.refresh();
            return tx;
        }
        catch (err) {
            this.update({ actionError: message(err) });
            return null;
        }
        finally {
            this.update({ committing: false });
        }
    }
    async mine() {
        if (this.state.mining)
            return;
        this.update({ mining: true, actionError: null });
        try {
            const block = await this.api.mine();
            this.update({ mining: false, highlightBlock: block.hash });
            await this.refresh();
        }
        catch (err) {
            this.update({ mining: false, actionError: message(err) });
        }
    }
    /** OBJ download of the current preview (the checkout action). */
    checkoutDownload() {
        const preview = this.state.preview;
        if (!preview)
            return null;
        return { filename: `checkout-${preview.txId.slice(0, 12)}.obj`, text: preview.objText };
    }
}
function message(err) {
    if (err instanceof ApiError)
        return err.message;
    if (err instanceof Error)
        return err.message;
    return String(err);
}
/** Drives refresh() every POLL_INTERVAL_MS; mining suspends the polls. */
export class Poller {
    constructor(store, intervalMs = POLL_INTERVAL_MS) {
        this.store = store;
        this.intervalMs = intervalMs;
        this.timer = null;
    }
    start() {
        if (this.timer !== null)
            return;
        this.timer = setInterval(() => {
            void this.store.refresh();
        }, this.intervalMs);
    }
    stop() {
        if (this.timer !== null) {
            clearInterval(this.timer);
            this.timer = null;
        }
    }
}
