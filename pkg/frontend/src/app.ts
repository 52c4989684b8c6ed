/**
 * Single-page annotation client.
 *
 * Four views plus an inspector:
 *   A  document view — tokens of the current document, span highlighting
 *   B  suggestion list — candidate labeling functions from the last highlight
 *   C  selected-function table — active functions with their statistics
 *   D  model panel — aggregator status and dev metrics
 *   FP inspector — false positives of one function on the dev split
 *
 * All state shown on screen comes from API payloads; nothing is rendered
 * optimistically, so the page and the server project can never disagree.
 */

import {
  ApiClient,
  ApiError,
  Feedback,
  Lf,
  ModelState,
  NextDoc,
} from "./api.js";

export const MODEL_POLL_INTERVAL_MS = 500;

/** Snap an anchor/focus token pair to an ordered half-open range. */
export function snapRange(
  anchor: number,
  focus: number,
): { start: number; end: number } {
  const lo = Math.min(anchor, focus);
  const hi = Math.max(anchor, focus);
  return { start: lo, end: hi + 1 };
}

/** Human tag for the sampler strategy shown next to the document. */
export function strategyTag(strategy: string): string {
  return strategy === "fp-guided" ? "similar-to-error" : "uncertain";
}

export function formatStat(value: number | null | undefined): string {
  return value === null || value === undefined ? "–" : value.toFixed(3);
}

interface PendingSpan {
  start: number;
  end: number;
}

export class App {
  readonly api: ApiClient;
  private readonly root: HTMLElement;

  doc: NextDoc | null = null;
  exhausted = false;
  classes: string[] = [];
  suggestions: Lf[] = [];
  selected: Lf[] = [];
  model: ModelState | null = null;
  feedbackReport: Feedback | null = null;
  pendingSpan: PendingSpan | null = null;
  lastError: string | null = null;

  private anchorIndex: number | null = null;
  private pollTimer: ReturnType<typeof setInterval> | null = null;
  private mutationInFlight = false;

  constructor(root: HTMLElement, api: ApiClient) {
    this.root = root;
    this.api = api;
    this.root.innerHTML = `
      <header>
        <h1>spanweak</h1>
        <button data-testid="next-doc">Next document</button>
        <span data-testid="error-banner" hidden></span>
      </header>
      <main>
        <section data-testid="doc-view">
          <span data-testid="strategy-tag"></span>
          <div data-testid="tokens"></div>
          <div data-testid="popover" hidden></div>
        </section>
        <section data-testid="suggestions"><table><tbody></tbody></table></section>
        <section data-testid="selected"><table><tbody></tbody></table></section>
        <section data-testid="model-panel">
          <span data-testid="model-status"></span>
          <dl data-testid="model-metrics"></dl>
        </section>
        <section data-testid="fp-inspector" hidden></section>
      </main>`;
    this.query("next-doc").addEventListener("click", () => {
      void this.nextDoc();
    });
  }

  async start(): Promise<void> {
    const info = await this.api.projectInfo();
    this.classes = info.classes;
    await this.refreshLfs();
    await this.refreshModel();
    await this.nextDoc();
    this.pollTimer = setInterval(() => {
      void this.refreshModel();
    }, MODEL_POLL_INTERVAL_MS);
  }

  stop(): void {
    if (this.pollTimer !== null) {
      clearInterval(this.pollTimer);
      this.pollTimer = null;
    }
  }

  query(testId: string): HTMLElement {
    const el = this.root.querySelector(`[data-testid="${testId}"]`);
    if (!el) throw new Error(`missing element ${testId}`);
    return el as HTMLElement;
  }

  // ---- view A: document + span selection -------------------------------

  async nextDoc(): Promise<void> {
    try {
      this.doc = await this.api.nextDoc();
      this.exhausted = false;
      this.clearSpan();
      this.lastError = null;
    } catch (err) {
      if (err instanceof ApiError && err.code === "EXHAUSTED") {
        this.exhausted = true;
        this.doc = null;
      } else {
        this.showError(err);
      }
    }
    this.renderDoc();
  }

  /** Begin a highlight at a token (mouse-down in the real UI). */
  beginSpan(index: number): void {
    this.anchorIndex = index;
  }

  /** Finish a highlight at a token (mouse-up), snapping to token bounds. */
  finishSpan(index: number): void {
    if (this.anchorIndex === null || this.doc === null) return;
    const { start, end } = snapRange(this.anchorIndex, index);
    this.anchorIndex = null;
    if (end <= start || end > this.doc.tokens.length) {
      this.pendingSpan = null;
    } else {
      this.pendingSpan = { start, end };
    }
    this.renderDoc();
  }

  /** Shortcut used by tests and keyboard interaction. */
  selectSpan(start: number, end: number): void {
    if (end <= start) {
      this.clearSpan();
      this.renderDoc();
      return;
    }
    this.beginSpan(start);
    this.finishSpan(end - 1);
  }

  clearSpan(): void {
    this.anchorIndex = null;
    this.pendingSpan = null;
  }

  /** Confirm the popover: send the annotation, render suggestions. */
  async submitSpan(
    label: string,
    polarity: "positive" | "negative",
  ): Promise<void> {
    if (this.doc === null || this.pendingSpan === null) return;
    const span = this.pendingSpan;
    await this.mutate(async () => {
      try {
        this.suggestions = await this.api.submitAnnotation({
          doc_id: this.doc!.doc_id,
          start: span.start,
          end: span.end,
          label,
          polarity,
        });
        this.lastError = null;
      } catch (err) {
        this.showError(err);
      } finally {
        this.clearSpan();
      }
      this.renderDoc();
      this.renderSuggestions();
    });
  }

  private renderDoc(): void {
    const tokensEl = this.query("tokens");
    const tagEl = this.query("strategy-tag");
    tokensEl.textContent = "";
    if (this.exhausted) {
      tagEl.textContent = "";
      tokensEl.innerHTML =
        '<p data-testid="exhausted">All documents reviewed — export your labels.</p>';
      return;
    }
    if (this.doc === null) {
      tagEl.textContent = "";
      return;
    }
    tagEl.textContent = strategyTag(this.doc.strategy);
    this.doc.tokens.forEach((token, i) => {
      const el = document.createElement("span");
      el.className = "token";
      el.dataset.index = String(i);
      el.textContent = token.text;
      if (
        this.pendingSpan &&
        i >= this.pendingSpan.start &&
        i < this.pendingSpan.end
      ) {
        el.classList.add("highlight");
      }
      el.addEventListener("mousedown", () => this.beginSpan(i));
      el.addEventListener("mouseup", () => this.finishSpan(i));
      tokensEl.appendChild(el);
      tokensEl.appendChild(document.createTextNode(" "));
    });
    this.renderPopover();
  }

  private renderPopover(): void {
    const popover = this.query("popover");
    popover.textContent = "";
    if (this.pendingSpan === null) {
      popover.hidden = true;
      return;
    }
    popover.hidden = false;
    for (const cls of this.classes) {
      for (const polarity of ["positive", "negative"] as const) {
        const btn = document.createElement("button");
        btn.dataset.testid = `annotate-${cls}-${polarity}`;
        btn.textContent = polarity === "positive" ? `+ ${cls}` : `− ${cls}`;
        btn.addEventListener("click", () => {
          void this.submitSpan(cls, polarity);
        });
        popover.appendChild(btn);
      }
    }
  }

  // ---- views B and C: labeling functions -------------------------------

  async refreshLfs(): Promise<void> {
    const lists = await this.api.listLfs();
    this.suggestions = lists.suggested;
    this.selected = lists.selected;
    this.renderSuggestions();
    this.renderSelected();
  }

  async toggleLf(id: string): Promise<void> {
    await this.mutate(async () => {
      const isSelected = this.selected.some((lf) => lf.id === id);
      try {
        if (isSelected) {
          await this.api.deselectLf(id);
        } else {
          await this.api.selectLf(id);
        }
        this.lastError = null;
      } catch (err) {
        this.showError(err);
        return; // keep prior toggle state on failure
      }
      await this.refreshLfs();
      await this.refreshModel();
    });
  }

  private lfRow(lf: Lf, action: string): HTMLTableRowElement {
    const row = document.createElement("tr");
    row.dataset.lfId = lf.id;
    const stats = lf.stats;
    row.innerHTML = `
      <td class="lf-name">${escapeHtml(lf.name)}</td>
      <td class="lf-coverage">${formatStat(stats.coverage)}</td>
      <td class="lf-precision">${formatStat(stats.dev_precision)}</td>`;
    const actions = document.createElement("td");
    const toggle = document.createElement("button");
    toggle.className = "lf-toggle";
    toggle.textContent = action;
    toggle.addEventListener("click", () => {
      void this.toggleLf(lf.id);
    });
    actions.appendChild(toggle);
    const info = document.createElement("button");
    info.className = "lf-info";
    info.textContent = "ⓘ";
    info.addEventListener("click", () => {
      void this.inspectFps(lf.id);
    });
    actions.appendChild(info);
    row.appendChild(actions);
    return row;
  }

  private renderSuggestions(): void {
    const body = this.query("suggestions").querySelector("tbody")!;
    body.textContent = "";
    for (const lf of this.suggestions) {
      body.appendChild(this.lfRow(lf, "select"));
    }
  }

  private renderSelected(): void {
    const body = this.query("selected").querySelector("tbody")!;
    body.textContent = "";
    for (const lf of this.selected) {
      body.appendChild(this.lfRow(lf, "deselect"));
    }
  }

  // ---- view D: model panel ----------------------------------------------

  async refreshModel(): Promise<void> {
    this.model = await this.api.model();
    this.renderModel();
  }

  /** Poll until the fit settles; used after toggles and by tests. */
  async waitForFresh(timeoutMs = 15000): Promise<void> {
    const deadline = Date.now() + timeoutMs;
    while (Date.now() < deadline) {
      await this.refreshModel();
      if (this.model?.status === "fresh") return;
      await sleep(MODEL_POLL_INTERVAL_MS / 5);
    }
    throw new Error("model never became fresh");
  }

  private renderModel(): void {
    const statusEl = this.query("model-status");
    const metricsEl = this.query("model-metrics");
    const model = this.model;
    if (model === null) {
      statusEl.textContent = "";
      return;
    }
    statusEl.textContent = model.status;
    statusEl.className = `status-${model.status}`;
    metricsEl.textContent = "";
    if (model.metrics === null || model.status === "none") return;
    const entries: Array<[string, string, number]> = [
      ["micro-precision", "micro P", model.metrics.micro_precision],
      ["micro-recall", "micro R", model.metrics.micro_recall],
      ["micro-f1", "micro F1", model.metrics.micro_f1],
    ];
    for (const [cls, row] of Object.entries(model.metrics.per_class)) {
      entries.push([`f1-${cls}`, `${cls} F1`, row.f1]);
    }
    for (const [id, labelText, value] of entries) {
      const dt = document.createElement("dt");
      dt.textContent = labelText;
      const dd = document.createElement("dd");
      dd.dataset.metric = id;
      dd.textContent = formatStat(value);
      metricsEl.appendChild(dt);
      metricsEl.appendChild(dd);
    }
  }

  // ---- FP inspector -------------------------------------------------------

  async inspectFps(id: string): Promise<void> {
    try {
      this.feedbackReport = await this.api.feedback(id);
      this.lastError = null;
    } catch (err) {
      this.showError(err);
      return;
    }
    this.renderFeedback();
  }

  private renderFeedback(): void {
    const panel = this.query("fp-inspector");
    panel.textContent = "";
    const report = this.feedbackReport;
    if (report === null) {
      panel.hidden = true;
      return;
    }
    panel.hidden = false;
    const lf = [...this.selected, ...this.suggestions].find(
      (x) => x.id === report.lf_id,
    );
    const title = document.createElement("h2");
    title.textContent = lf ? lf.name : report.lf_id;
    panel.appendChild(title);
    const precision = document.createElement("p");
    precision.dataset.testid = "fp-precision";
    precision.textContent = `dev precision ${formatStat(report.dev_precision)}`;
    panel.appendChild(precision);
    const list = document.createElement("ul");
    list.dataset.testid = "fp-list";
    if (report.dev_false_positives.length === 0) {
      const li = document.createElement("li");
      li.dataset.testid = "fp-empty";
      li.textContent = "no false positives";
      list.appendChild(li);
    }
    for (const fp of report.dev_false_positives) {
      const li = document.createElement("li");
      li.className = "fp-item";
      const context = fp.context_tokens
        .map((text, i) => {
          const pos = fp.context_offset + i;
          return pos >= fp.start && pos < fp.end ? `[${text}]` : text;
        })
        .join(" ");
      li.textContent = `${fp.doc_id}: ${context} — voted ${fp.vote}, gold ${fp.gold.join("/")}`;
      list.appendChild(li);
    }
    panel.appendChild(list);
    const sample = document.createElement("p");
    sample.dataset.testid = "fp-train-sample";
    sample.textContent = `${report.train_sample.length} train matches sampled`;
    panel.appendChild(sample);
  }

  // ---- plumbing -----------------------------------------------------------

  /** Serialize mutations: at most one in flight, reads may overlap. */
  private async mutate(fn: () => Promise<void>): Promise<void> {
    if (this.mutationInFlight) return;
    this.mutationInFlight = true;
    try {
      await fn();
    } finally {
      this.mutationInFlight = false;
    }
  }

  private showError(err: unknown): void {
    this.lastError =
      err instanceof ApiError
        ? `${err.code}: ${err.message}`
        : String(err);
    const banner = this.query("error-banner");
    banner.hidden = false;
    banner.textContent = this.lastError;
  }
}

function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
