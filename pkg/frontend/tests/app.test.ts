// Scripted reader session against the real serve subcommand: round trip,
// blinding scan, draft persistence across a forced reload, and rejection
// surfacing. Requires the Python package installed (pip install -e ..).

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { createApp, type ReaderApp } from "../src/app.js";
import { DraftStore, type KeyValueStore } from "../src/drafts.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const MODELS = ["llama-ft", "mistral-ft", "biomistral-ft"];
const SESSION_ID = "ui-test";
const READER = "r1";

interface Server {
  proc: ChildProcess;
  base: string;
  sessionPath: string;
  scoresPath: string;
  dir: string;
}

async function startServer(port: number): Promise<Server> {
  const dir = mkdtempSync(join(tmpdir(), "chocosa-ui-"));
  execFileSync("python3", [join(HERE, "make_session.py"), dir]);
  const sessionPath = join(dir, "session.json");
  const scoresPath = join(dir, "scores.jsonl");
  const proc = spawn(
    "python3",
    [
      "-m", "hcsum.cli", "chocosa", "serve",
      "--session", sessionPath, "--scores", scoresPath,
      "--port", String(port),
    ],
    { stdio: "ignore" },
  );
  const base = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      const resp = await fetch(`${base}/api/sessions/${SESSION_ID}`);
      if (resp.ok) break;
    } catch {
      /* not up yet */
    }
    if (Date.now() > deadline) throw new Error("server did not come up");
    await new Promise((r) => setTimeout(r, 200));
  }
  return { proc, base, sessionPath, scoresPath, dir };
}

function memoryStore(): KeyValueStore {
  const map = new Map<string, string>();
  return {
    getItem: (k) => map.get(k) ?? null,
    setItem: (k, v) => void map.set(k, v),
    removeItem: (k) => void map.delete(k),
  };
}

function freshApp(base: string, storage: KeyValueStore): { app: ReaderApp; root: HTMLElement } {
  const root = document.createElement("div");
  document.body.innerHTML = "";
  document.body.append(root);
  const api = new ApiClient(base, SESSION_ID, READER);
  const drafts = new DraftStore(storage, SESSION_ID, READER);
  const app = createApp({ root, api, drafts, readerId: READER });
  return { app, root };
}

async function waitFor(predicate: () => boolean, what: string, timeoutMs = 10_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (!predicate()) {
    if (Date.now() > deadline) throw new Error(`timed out waiting for ${what}`);
    await new Promise((r) => setTimeout(r, 25));
  }
}

function scoreValue(itemIndex: number, labelIndex: number, subIndex: number): number {
  return [0, 0.5, 1][(itemIndex + labelIndex + subIndex) % 3];
}

function fillForm(root: HTMLElement, label: string, itemIndex: number, labelIndex: number): Record<string, number> {
  const form = root.querySelector<HTMLFormElement>(`form[data-label="${label}"]`);
  expect(form, `form for ${label}`).toBeTruthy();
  const entered: Record<string, number> = {};
  const rows = form!.querySelectorAll("tr");
  rows.forEach((row, subIndex) => {
    const value = scoreValue(itemIndex, labelIndex, subIndex);
    const input = row.querySelector<HTMLInputElement>(`input[value="${value}"]`);
    expect(input, `radio ${value} in row ${subIndex}`).toBeTruthy();
    input!.click();
    entered[input!.dataset.subsection!] = value;
  });
  return entered;
}

function submitForm(root: HTMLElement, label: string): void {
  const form = root.querySelector<HTMLFormElement>(`form[data-label="${label}"]`);
  const button = form!.querySelector<HTMLButtonElement>("button[type=submit]");
  expect(button!.disabled).toBe(false);
  button!.click();
}

describe("reader UI against the serve subcommand", () => {
  let readonlyServer: Server;
  let roundtripServer: Server;
  let resumeServer: Server;

  beforeAll(async () => {
    const basePort = 8840 + (process.pid % 100);
    readonlyServer = await startServer(basePort);
    roundtripServer = await startServer(basePort + 1);
    resumeServer = await startServer(basePort + 2);
  });

  afterAll(() => {
    readonlyServer?.proc.kill();
    roundtripServer?.proc.kill();
    resumeServer?.proc.kill();
  });

  it("loads an item with blinded panes and a DOM free of model names", async () => {
    const { app, root } = freshApp(readonlyServer.base, memoryStore());
    await app.start();
    await waitFor(() => root.querySelector("#input-pane") !== null, "item render");

    expect(root.querySelector("#input-pane")!.textContent).toContain("Admission day:");
    expect(root.querySelector("#reference-pane")!.textContent).toContain("Reference hospital course");
    const labels = [...root.querySelectorAll(".summary-card h3")].map((h) => h.textContent);
    expect(labels).toEqual(["Summary A", "Summary B", "Summary C"]);
    expect(root.querySelectorAll("#rubric li")).toHaveLength(6);

    for (let k = 0; k < 3; k++) {
      await app.loadItem(k);
      await waitFor(
        () => root.querySelector("#pager-label")?.textContent === `Item ${k + 1} of 3`,
        `item ${k}`,
      );
      const dom = document.body.innerHTML;
      for (const model of MODELS) {
        expect(dom).not.toContain(model);
      }
    }
  });

  it("disables submit until all six subsections are scored or the flag is set", async () => {
    const { app, root } = freshApp(readonlyServer.base, memoryStore());
    await app.start();
    await waitFor(() => root.querySelector("form[data-label='Summary A']") !== null, "form");
    const form = root.querySelector<HTMLFormElement>("form[data-label='Summary A']")!;
    const button = form.querySelector<HTMLButtonElement>("button[type=submit]")!;
    expect(button.disabled).toBe(true);

    const rows = [...form.querySelectorAll("tr")];
    rows.slice(0, 5).forEach((row) => row.querySelector<HTMLInputElement>("input[value='1']")!.click());
    expect(button.disabled).toBe(true); // five of six

    rows[5].querySelector<HTMLInputElement>("input[value='0.5']")!.click();
    expect(button.disabled).toBe(false);

    const flagForm = root.querySelector<HTMLFormElement>("form[data-label='Summary B']")!;
    const flagButton = flagForm.querySelector<HTMLButtonElement>("button[type=submit]")!;
    expect(flagButton.disabled).toBe(true);
    flagForm.querySelector<HTMLInputElement>(".insufficient-flag")!.click();
    expect(flagButton.disabled).toBe(false);
  });

  it("persists drafts across a forced reload", async () => {
    const storage = memoryStore();
    const first = freshApp(readonlyServer.base, storage);
    await first.app.start();
    await waitFor(() => first.root.querySelector("form[data-label='Summary A']") !== null, "form");
    const form = first.root.querySelector<HTMLFormElement>("form[data-label='Summary A']")!;
    const rows = [...form.querySelectorAll("tr")];
    rows[0].querySelector<HTMLInputElement>("input[value='0.5']")!.click();
    rows[1].querySelector<HTMLInputElement>("input[value='1']")!.click();
    const comment = form.querySelector<HTMLInputElement>(".comment")!;
    comment.value = "draft note";
    comment.dispatchEvent(new Event("input", { bubbles: true }));

    // forced reload: new DOM, new app instance, same storage
    const second = freshApp(readonlyServer.base, storage);
    await second.app.start();
    await waitFor(() => second.root.querySelector("form[data-label='Summary A']") !== null, "form");
    const restored = second.root.querySelector<HTMLFormElement>("form[data-label='Summary A']")!;
    const restoredRows = [...restored.querySelectorAll("tr")];
    expect(restoredRows[0].querySelector<HTMLInputElement>("input[value='0.5']")!.checked).toBe(true);
    expect(restoredRows[1].querySelector<HTMLInputElement>("input[value='1']")!.checked).toBe(true);
    expect(restored.querySelector<HTMLInputElement>(".comment")!.value).toBe("draft note");
  });

  it("surfaces a server rejection verbatim on duplicate submission", async () => {
    const { app, root } = freshApp(readonlyServer.base, memoryStore());
    await app.start();
    await waitFor(() => root.querySelector("form[data-label='Summary C']") !== null, "form");

    // another tab slips the same submission in first
    const scores: Record<string, number> = {};
    [...root.querySelectorAll("form[data-label='Summary C'] tr")].forEach((row) => {
      const input = row.querySelector<HTMLInputElement>("input[value='1']")!;
      scores[input.dataset.subsection!] = 1;
    });
    const direct = await fetch(
      `${readonlyServer.base}/api/sessions/${SESSION_ID}/items/0/scores`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ reader_id: READER, blinded_label: "Summary C", scores }),
      },
    );
    expect(direct.status).toBe(200);

    fillForm(root, "Summary C", 0, 2);
    submitForm(root, "Summary C");
    await waitFor(
      () => (root.querySelector("form[data-label='Summary C'] .submit-error")?.textContent ?? "") !== "",
      "rejection message",
    );
    const message = root.querySelector("form[data-label='Summary C'] .submit-error")!.textContent!;
    expect(message).toContain("duplicate submission for this reader, item, and summary");
  });

  it("shows an item-not-found state for unknown indexes", async () => {
    const { app, root } = freshApp(readonlyServer.base, memoryStore());
    await app.start();
    await waitFor(() => root.querySelector("#input-pane") !== null, "item render");
    await app.loadItem(99);
    await waitFor(() => root.querySelector("#not-found") !== null, "not-found state");
    expect(root.querySelector("#not-found")!.textContent).toContain("not found");
  });

  it("shows a retry banner when the server is unreachable", async () => {
    const { app, root } = freshApp("http://127.0.0.1:1", memoryStore());
    await app.start();
    await waitFor(() => !root.querySelector("#banner")!.classList.contains("hidden"), "banner");
    expect(root.querySelector("#banner")!.textContent).toContain("Cannot reach");
    expect(root.querySelector("#retry")).toBeTruthy();
  });

  it("resumes mid-session on the first unscored item, earlier items read-only", async () => {
    // another sitting already scored all of item 0
    const first = await fetch(`${resumeServer.base}/api/sessions/${SESSION_ID}/items/0?reader=${READER}`);
    const item = (await first.json()) as { summaries: { label: string }[]; rubric: { subsection: string }[] };
    for (const summary of item.summaries) {
      const scores = Object.fromEntries(item.rubric.map((r) => [r.subsection, 1]));
      const resp = await fetch(`${resumeServer.base}/api/sessions/${SESSION_ID}/items/0/scores`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ reader_id: READER, blinded_label: summary.label, scores }),
      });
      expect(resp.status).toBe(200);
    }

    const { app, root } = freshApp(resumeServer.base, memoryStore());
    await app.start();
    await waitFor(() => root.querySelector("#pager-label") !== null, "item render");
    expect(root.querySelector("#pager-label")!.textContent).toBe("Item 2 of 3");
    expect(root.querySelector("#progress-text")!.textContent).toContain("1 of 3");

    // revisiting the scored item shows read-only submitted forms
    await app.loadItem(0);
    await waitFor(
      () => root.querySelectorAll("form.submitted").length === 3,
      "read-only forms",
    );
    for (const input of root.querySelectorAll<HTMLInputElement>("form.submitted input[type=radio]")) {
      expect(input.disabled).toBe(true);
    }
    const checked = root.querySelectorAll<HTMLInputElement>(
      "form.submitted input[type=radio][value='1']:checked",
    );
    expect(checked).toHaveLength(18); // six subsections x three summaries
  });

  it("completes a 3-item study whose export matches the entered values", async () => {
    const { app, root } = freshApp(roundtripServer.base, memoryStore());
    await app.start();
    await waitFor(() => root.querySelector("#pager-label") !== null, "first item");

    const entered = new Map<string, Record<string, number>>();
    const comments = new Map<string, string>();
    for (let item = 0; item < 3; item++) {
      await waitFor(
        () => root.querySelector("#pager-label")?.textContent === `Item ${item + 1} of 3`,
        `arrival at item ${item}`,
      );
      for (const [labelIndex, label] of ["Summary A", "Summary B", "Summary C"].entries()) {
        const scores = fillForm(root, label, item, labelIndex);
        entered.set(`${item}:${label}`, scores);
        if (labelIndex === 0) {
          const comment = root.querySelector<HTMLInputElement>(
            `form[data-label="${label}"] .comment`,
          )!;
          comment.value = `checked item ${item}`;
          comment.dispatchEvent(new Event("input", { bubbles: true }));
          comments.set(`${item}:${label}`, `checked item ${item}`);
        }
        submitForm(root, label);
        const isLast = item === 2 && labelIndex === 2;
        await waitFor(
          () =>
            isLast || item < 2
              ? root.querySelector(`form[data-label="${label}"].submitted`) !== null ||
                root.querySelector("#pager-label")?.textContent !== `Item ${item + 1} of 3`
              : true,
          `acceptance of ${label} on item ${item}`,
        );
      }
    }
    await waitFor(
      () => root.querySelector("#progress-text")?.textContent?.includes("3 of 3") ?? false,
      "study completion",
    );
    expect(root.querySelector("#progress-text")!.textContent).toContain("ready for export");

    const exportPath = join(roundtripServer.dir, "export.json");
    execFileSync("python3", [
      "-m", "hcsum.cli", "chocosa", "export",
      "--session", roundtripServer.sessionPath,
      "--scores", roundtripServer.scoresPath,
      "--out", exportPath,
    ]);
    const exported = JSON.parse(readFileSync(exportPath, "utf-8"));
    expect(exported.n_records).toBe(9);
    for (const record of exported.records) {
      const key = `${record.item_index}:${record.blinded_label}`;
      expect(record.reader_id).toBe(READER);
      expect(record.scores).toEqual(entered.get(key));
      if (comments.has(key)) expect(record.comment).toBe(comments.get(key));
      expect(record.insufficient_input).toBe(false);
    }
    // every entered form has exactly one exported record
    expect(exported.records).toHaveLength(entered.size);
  });
});
