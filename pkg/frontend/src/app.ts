import { ApiClient } from "./api.js";
import { DraftStore } from "./drafts.js";
import type { Draft, ItemPayload, SubmittedRecord } from "./types.js";

export interface AppOptions {
  root: HTMLElement;
  api: ApiClient;
  drafts: DraftStore;
  readerId: string;
}

export interface ReaderApp {
  start(): Promise<void>;
  loadItem(index: number): Promise<void>;
  currentItem(): number;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

function slug(text: string): string {
  return text.toLowerCase().replace(/[^a-z0-9]+/g, "-");
}

function subsectionTitle(subsection: string): string {
  return subsection
    .split("_")
    .map((w) => w[0].toUpperCase() + w.slice(1))
    .join(" ");
}

export function createApp(options: AppOptions): ReaderApp {
  const { root, api, drafts, readerId } = options;
  let itemIndex = 0;
  let itemCount = 0;

  root.innerHTML = "";
  const banner = el("div", { id: "banner", class: "banner hidden" });
  const progressText = el("span", { id: "progress-text" });
  const progressBar = el("div", { id: "progress-bar" });
  const header = el("header", {}, [
    el("h1", {}, ["Hospital course reader study"]),
    el("div", { id: "progress" }, [progressText, el("div", { class: "bar-track" }, [progressBar])]),
    banner,
  ]);
  const main = el("main", { id: "item-root" });
  const pager = el("nav", { id: "pager" });
  root.append(header, main, pager);

  function showBanner(message: string, retry?: () => void): void {
    banner.innerHTML = "";
    banner.classList.remove("hidden");
    banner.append(message);
    if (retry) {
      const button = el("button", { id: "retry", type: "button" }, ["Retry"]);
      button.addEventListener("click", () => {
        banner.classList.add("hidden");
        retry();
      });
      banner.append(" ", button);
    }
  }

  async function refreshProgress(): Promise<number | null> {
    const progress = await api.progress();
    itemCount = progress.items_total;
    progressText.textContent =
      `${progress.items_done} of ${progress.items_total} items completed`;
    const pct = progress.items_total
      ? Math.round((100 * progress.items_done) / progress.items_total)
      : 0;
    progressBar.style.width = `${pct}%`;
    if (progress.next_item === null) {
      progressText.textContent += " — study complete, ready for export";
    }
    return progress.next_item;
  }

  function renderPager(): void {
    pager.innerHTML = "";
    const prev = el("button", { id: "prev-item", type: "button" }, ["Previous"]);
    const next = el("button", { id: "next-item", type: "button" }, ["Next"]);
    if (itemIndex === 0) prev.setAttribute("disabled", "");
    if (itemIndex >= itemCount - 1) next.setAttribute("disabled", "");
    prev.addEventListener("click", () => void loadItem(itemIndex - 1));
    next.addEventListener("click", () => void loadItem(itemIndex + 1));
    pager.append(prev, el("span", { id: "pager-label" }, [`Item ${itemIndex + 1} of ${itemCount}`]), next);
  }

  function renderRubric(item: ItemPayload): HTMLElement {
    const entries = item.rubric.map((entry) =>
      el("li", { class: "rubric-entry" }, [
        el("strong", {}, [subsectionTitle(entry.subsection)]),
        ": ",
        entry.guidance,
      ]),
    );
    return el("aside", { id: "rubric" }, [
      el("h2", {}, ["Scoring rubric"]),
      el("p", {}, ["Score each subsection 0 (incorrect), 0.5 (incomplete or partially correct), or 1 (complete and correct)."]),
      el("ul", {}, entries),
    ]);
  }

  function renderScoreForm(item: ItemPayload, label: string, submitted?: SubmittedRecord): HTMLElement {
    const form = el("form", { class: "score-form", "data-label": label });
    const table = el("table", { class: "score-table" });
    const selectors = new Map<string, () => number | null>();

    for (const entry of item.rubric) {
      const row = el("tr", {}, [
        el("td", { class: "subsection-name", title: entry.guidance }, [
          subsectionTitle(entry.subsection),
        ]),
      ]);
      const group = `score-${slug(label)}-${entry.subsection}`;
      for (const value of item.score_values) {
        const input = el("input", {
          type: "radio",
          name: group,
          value: String(value),
          "data-subsection": entry.subsection,
        });
        if (submitted && submitted.scores[entry.subsection] === value) {
          input.checked = true;
        }
        if (submitted) input.disabled = true;
        row.append(el("td", {}, [el("label", {}, [input, ` ${value}`])]));
      }
      selectors.set(entry.subsection, () => {
        const checked = form.querySelector<HTMLInputElement>(`input[name="${group}"]:checked`);
        return checked ? Number(checked.value) : null;
      });
      table.append(row);
    }

    const insufficient = el("input", { type: "checkbox", class: "insufficient-flag" });
    const comment = el("input", {
      type: "text",
      class: "comment",
      placeholder: "optional comment",
    });
    const submitButton = el("button", { type: "submit", class: "submit-scores" }, ["Submit scores"]);
    const error = el("div", { class: "submit-error", role: "alert" });

    if (submitted) {
      insufficient.checked = submitted.insufficient_input;
      insufficient.disabled = true;
      comment.value = submitted.comment ?? "";
      comment.readOnly = true;
      submitButton.disabled = true;
      submitButton.textContent = "Submitted";
      form.classList.add("submitted");
    }

    const currentDraft = (): Draft => {
      const scores: Record<string, number> = {};
      for (const [subsection, read] of selectors) {
        const value = read();
        if (value !== null) scores[subsection] = value;
      }
      return { scores, comment: comment.value, insufficient: insufficient.checked };
    };

    const refreshSubmitState = (): void => {
      if (submitted) return;
      const draft = currentDraft();
      const complete =
        draft.insufficient || Object.keys(draft.scores).length === item.rubric.length;
      submitButton.disabled = !complete;
    };

    if (!submitted) {
      const draft = drafts.load(item.item_index, label);
      if (draft) {
        for (const entry of item.rubric) {
          const value = draft.scores[entry.subsection];
          if (value !== undefined) {
            const group = `score-${slug(label)}-${entry.subsection}`;
            const input = table.querySelector<HTMLInputElement>(
              `input[name="${group}"][value="${value}"]`,
            );
            if (input) input.checked = true;
          }
        }
        comment.value = draft.comment;
        insufficient.checked = draft.insufficient;
      }
      form.addEventListener("change", () => {
        drafts.save(item.item_index, label, currentDraft());
        refreshSubmitState();
      });
      comment.addEventListener("input", () => {
        drafts.save(item.item_index, label, currentDraft());
      });
    }

    form.append(
      table,
      el("label", { class: "insufficient" }, [insufficient, " insufficient input to judge"]),
      comment,
      submitButton,
      error,
    );
    refreshSubmitState();

    form.addEventListener("submit", (event) => {
      event.preventDefault();
      if (submitted) return;
      const draft = currentDraft();
      void (async () => {
        try {
          const result = await api.submitScores(item.item_index, {
            reader_id: readerId,
            blinded_label: label,
            scores: draft.insufficient ? {} : draft.scores,
            comment: draft.comment || undefined,
            insufficient_input: draft.insufficient,
          });
          if (result.status === "accepted") {
            drafts.clear(item.item_index, label);
            await afterAccept();
          } else {
            error.textContent = result.reason;
          }
        } catch (exc) {
          error.textContent = `submission failed: ${String(exc)}`;
        }
      })();
    });

    return form;
  }

  async function afterAccept(): Promise<void> {
    const next = await refreshProgress();
    const current = await api.item(itemIndex);
    const allScored = current.summaries.every((s) =>
      current.submitted.some((r) => r.blinded_label === s.label),
    );
    if (allScored && next !== null) {
      await loadItem(next);
    } else {
      renderItem(current);
    }
  }

  function renderItem(item: ItemPayload): void {
    itemIndex = item.item_index;
    main.innerHTML = "";
    const submittedByLabel = new Map(item.submitted.map((r) => [r.blinded_label, r]));
    const cards = item.summaries.map((summary) => {
      const card = el("article", { class: "summary-card", "data-label": summary.label }, [
        el("h3", {}, [summary.label]),
        el("pre", { class: "summary-text" }, [summary.text]),
        renderScoreForm(item, summary.label, submittedByLabel.get(summary.label)),
      ]);
      return card;
    });
    main.append(
      el("section", { id: "input-pane", class: "pane" }, [
        el("h2", {}, ["Input clinical notes"]),
        el("pre", { class: "pane-text" }, [item.input_text]),
      ]),
      el("section", { id: "reference-pane", class: "pane" }, [
        el("h2", {}, ["Reference summary"]),
        el("pre", { class: "pane-text" }, [item.reference_summary]),
      ]),
      el("section", { id: "summaries-pane", class: "pane" }, [
        el("h2", {}, ["Blinded model summaries"]),
        ...cards,
      ]),
      renderRubric(item),
    );
    renderPager();
  }

  async function loadItem(index: number): Promise<void> {
    try {
      const item = await api.item(index);
      renderItem(item);
    } catch (exc) {
      const status = (exc as { status?: number }).status;
      if (status === 404) {
        main.innerHTML = "";
        main.append(el("p", { id: "not-found" }, [`Item ${index} not found.`]));
      } else {
        // keep whatever is on screen; in-progress form state stays intact
        showBanner("Network problem while loading the item.", () => void loadItem(index));
      }
      return;
    }
  }

  async function start(): Promise<void> {
    try {
      const next = await refreshProgress();
      await loadItem(next ?? 0);
    } catch {
      showBanner("Cannot reach the study server.", () => void start());
    }
  }

  return {
    start,
    loadItem,
    currentItem: () => itemIndex,
  };
}
