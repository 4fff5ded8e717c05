/** Entry point: attach the app to the node named by ?node=, else the
 * origin that served these assets. */

import { App } from "./app.js";

const params = new URLSearchParams(window.location.search);
const nodeUrl = params.get("node") ?? window.location.origin;
const root = document.getElementById("app");
if (root) {
  const app = new App(root, nodeUrl);
  app.start();
}
