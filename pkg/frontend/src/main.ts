import { ApiClient } from "./api.js";
import { createApp } from "./app.js";
import { DraftStore } from "./drafts.js";

// Configuration arrives via query parameters so the same static bundle works
// for any session: ?session=<id>&reader=<id>[&base=<url>][&token=<tok>]
const params = new URLSearchParams(window.location.search);
const sessionId = params.get("session") ?? "";
const readerId = params.get("reader") ?? "";
const baseUrl = params.get("base") ?? window.location.origin;
const token = params.get("token") ?? undefined;

const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");

if (!sessionId || !readerId) {
  root.textContent = "Missing ?session= and ?reader= query parameters.";
} else {
  const api = new ApiClient(baseUrl, sessionId, readerId, token);
  const drafts = new DraftStore(window.localStorage, sessionId, readerId);
  void createApp({ root, api, drafts, readerId }).start();
}
