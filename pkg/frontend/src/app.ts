/**
 * DOM wiring: renders the store into the three panels (chain, mempool,
 * preview) and forwards user actions. All data shown comes from the
 * store, which in turn only holds node API responses.
 */

import { NodeApi } from "./api.js";
import { ChainViewStore, ChainViewState, Poller } from "./state.js";
import { Camera, defaultCamera, orbit, projectMesh, Scene, zoom } from "./render3d.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function shortHash(hash: string): string {
  return hash.slice(0, 12);
}

export class App {
  private readonly store: ChainViewStore;
  private readonly poller: Poller;
  private camera: Camera | null = null;
  private previewTx: string | null = null;
  private canvas!: HTMLCanvasElement;
  private dragging = false;
  private dragLast: [number, number] = [0, 0];

  constructor(private readonly root: HTMLElement, nodeUrl: string) {
    this.store = new ChainViewStore(new NodeApi(nodeUrl));
    this.poller = new Poller(this.store);
    this.buildLayout(nodeUrl);
    this.store.subscribe((state) => this.render(state));
  }

  start(): void {
    void this.store.refresh();
    this.poller.start();
  }

  // -- static layout ---------------------------------------------------

  private buildLayout(nodeUrl: string): void {
    this.root.innerHTML = `
      <header>
        <h1>meshchain</h1>
        <span class="node-url">${nodeUrl}</span>
        <span id="banner" class="banner" hidden></span>
        <span id="notice" class="notice" hidden></span>
      </header>
      <main>
        <section class="panel" id="chain-panel">
          <h2>chain</h2>
          <ul id="block-list"></ul>
          <h2>transactions in block</h2>
          <ul id="tx-list"></ul>
        </section>
        <section class="panel" id="mempool-panel">
          <h2>mempool</h2>
          <ul id="mempool-list"></ul>
          <h2>actions</h2>
          <form id="commit-form">
            <input type="file" id="obj-file" accept=".obj" />
            <input type="text" id="author" placeholder="author" value="anonymous" />
            <button type="submit" id="commit-btn">commit</button>
          </form>
          <button id="mine-btn">mine</button>
          <div id="action-error" class="error" hidden></div>
        </section>
        <section class="panel" id="preview-panel">
          <h2>preview</h2>
          <canvas id="preview-canvas" width="480" height="360"></canvas>
          <div id="preview-counts" class="counts"></div>
          <div id="preview-error" class="error" hidden></div>
          <button id="download-btn" hidden>download .obj</button>
        </section>
      </main>
    `;
    this.canvas = this.root.querySelector("#preview-canvas") as HTMLCanvasElement;
    this.wireEvents();
  }

  private wireEvents(): void {
    const form = this.root.querySelector("#commit-form") as HTMLFormElement;
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submitCommit();
    });
    (this.root.querySelector("#mine-btn") as HTMLButtonElement).addEventListener(
      "click",
      () => void this.store.mine(),
    );
    (this.root.querySelector("#download-btn") as HTMLButtonElement).addEventListener(
      "click",
      () => this.download(),
    );
    this.canvas.addEventListener("mousedown", (event) => {
      this.dragging = true;
      this.dragLast = [event.clientX, event.clientY];
    });
    window.addEventListener("mouseup", () => (this.dragging = false));
    window.addEventListener("mousemove", (event) => {
      if (!this.dragging || !this.camera) return;
      const dx = event.clientX - this.dragLast[0];
      const dy = event.clientY - this.dragLast[1];
      this.dragLast = [event.clientX, event.clientY];
      this.camera = orbit(this.camera, dx * 0.01, dy * 0.01);
      this.drawPreview(this.store.getState());
    });
    this.canvas.addEventListener("wheel", (event) => {
      if (!this.camera) return;
      event.preventDefault();
      this.camera = zoom(this.camera, event.deltaY > 0 ? 1.1 : 0.9);
      this.drawPreview(this.store.getState());
    });
  }

  private async submitCommit(): Promise<void> {
    const fileInput = this.root.querySelector("#obj-file") as HTMLInputElement;
    const author = (this.root.querySelector("#author") as HTMLInputElement).value;
    const file = fileInput.files?.[0];
    if (!file) return;
    const text = await file.text();
    await this.store.commitObj(text, author);
  }

  private download(): void {
    const payload = this.store.checkoutDownload();
    if (!payload) return;
    const blob = new Blob([payload.text], { type: "text/plain" });
    const link = el("a");
    link.href = URL.createObjectURL(blob);
    link.download = payload.filename;
    link.click();
    URL.revokeObjectURL(link.href);
  }

  // -- rendering ---------------------------------------------------------

  private render(state: ChainViewState): void {
    this.renderBanner(state);
    this.renderChain(state);
    this.renderTxList(state);
    this.renderMempool(state);
    this.renderActions(state);
    this.renderPreviewInfo(state);
    this.drawPreview(state);
  }

  private renderBanner(state: ChainViewState): void {
    const banner = this.root.querySelector("#banner") as HTMLElement;
    banner.hidden = !state.banner;
    banner.textContent = state.banner ?? "";
    const notice = this.root.querySelector("#notice") as HTMLElement;
    notice.hidden = !state.notice;
    notice.textContent = state.notice ?? "";
  }

  private renderChain(state: ChainViewState): void {
    const list = this.root.querySelector("#block-list") as HTMLElement;
    list.innerHTML = "";
    if (!state.chain) return;
    for (const block of [...state.chain.blocks].reverse()) {
      const item = el("li");
      const btn = el(
        "button",
        "block-btn",
        `#${block.height}  ${shortHash(block.hash)}  (${block.tx_count} tx)`,
      );
      if (block.hash === state.selectedBlock) btn.classList.add("selected");
      if (block.hash === state.highlightBlock) btn.classList.add("highlight");
      btn.addEventListener("click", () => this.store.selectBlock(block.hash));
      item.appendChild(btn);
      list.appendChild(item);
    }
  }

  private renderTxList(state: ChainViewState): void {
    const list = this.root.querySelector("#tx-list") as HTMLElement;
    list.innerHTML = "";
    const block = this.store.selectedBlockSummary();
    if (!block) {
      list.appendChild(el("li", "hint", "select a block"));
      return;
    }
    if (block.tx_ids.length === 0) {
      list.appendChild(el("li", "hint", "no transactions (genesis)"));
      return;
    }
    for (const txId of block.tx_ids) {
      const item = el("li");
      const btn = el("button", "tx-btn", shortHash(txId));
      if (txId === state.selectedTx) btn.classList.add("selected");
      btn.addEventListener("click", () => void this.store.selectTransaction(txId));
      item.appendChild(btn);
      list.appendChild(item);
    }
  }

  private renderMempool(state: ChainViewState): void {
    const list = this.root.querySelector("#mempool-list") as HTMLElement;
    list.innerHTML = "";
    const pending = state.mempool?.transactions ?? [];
    if (pending.length === 0) {
      list.appendChild(el("li", "hint", "empty"));
      return;
    }
    for (const tx of pending) {
      const item = el("li", "mempool-tx", `${shortHash(tx.id)}  by ${tx.author}`);
      if (tx.id === state.highlightTx) item.classList.add("highlight");
      list.appendChild(item);
    }
  }

  private renderActions(state: ChainViewState): void {
    const commit = this.root.querySelector("#commit-btn") as HTMLButtonElement;
    commit.disabled = state.committing;
    commit.textContent = state.committing ? "committing…" : "commit";
    const mine = this.root.querySelector("#mine-btn") as HTMLButtonElement;
    mine.disabled = state.mining;
    mine.textContent = state.mining ? "mining…" : "mine";
    const error = this.root.querySelector("#action-error") as HTMLElement;
    error.hidden = !state.actionError;
    error.textContent = state.actionError ?? "";
  }

  private renderPreviewInfo(state: ChainViewState): void {
    const counts = this.root.querySelector("#preview-counts") as HTMLElement;
    counts.textContent = state.preview
      ? `${state.preview.vertexCount} vertices, ${state.preview.faceCount} faces`
      : "";
    const error = this.root.querySelector("#preview-error") as HTMLElement;
    error.hidden = !state.previewError;
    error.textContent = state.previewError ?? "";
    const download = this.root.querySelector("#download-btn") as HTMLButtonElement;
    download.hidden = !state.preview;
  }

  private drawPreview(state: ChainViewState): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    ctx.fillStyle = "#10141c";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    if (!state.preview) {
      this.previewTx = null;
      this.camera = null;
      return;
    }
    if (this.previewTx !== state.preview.txId || !this.camera) {
      this.previewTx = state.preview.txId;
      this.camera = defaultCamera(state.preview.mesh);
    }
    const scene = projectMesh(
      state.preview.mesh,
      this.camera,
      this.canvas.width,
      this.canvas.height,
    );
    drawScene(ctx, scene);
  }
}

export function drawScene(ctx: CanvasRenderingContext2D, scene: Scene): void {
  for (const face of scene.faces) {
    ctx.beginPath();
    ctx.moveTo(face.points[0][0], face.points[0][1]);
    for (const [x, y] of face.points.slice(1)) ctx.lineTo(x, y);
    ctx.closePath();
    const c = Math.round(90 + 140 * face.shade);
    ctx.fillStyle = `rgb(${Math.round(c * 0.45)}, ${Math.round(c * 0.7)}, ${c})`;
    ctx.fill();
  }
  ctx.strokeStyle = "#dbe6ff";
  ctx.lineWidth = 1;
  for (const edge of scene.edges) {
    ctx.beginPath();
    ctx.moveTo(edge.a[0], edge.a[1]);
    ctx.lineTo(edge.b[0], edge.b[1]);
    ctx.stroke();
  }
  if (scene.faces.length === 0) {
    ctx.fillStyle = "#9fd0ff";
    for (const [x, y] of scene.points) ctx.fillRect(x - 2, y - 2, 4, 4);
  }
}
