import { beforeEach, describe, expect, it } from "vitest";

import type { ApiClient, Feedback, Lf, ModelState, NextDoc } from "../src/api.js";
import { ApiError } from "../src/api.js";
import { App, formatStat, snapRange, strategyTag } from "../src/app.js";

const DOC: NextDoc = {
  doc_id: "t0",
  strategy: "fp-guided",
  split: "train",
  tokens: [
    { text: "took", pos: "VERB", dep: "ROOT", ner: "" },
    { text: "aspirin", pos: "NOUN", dep: "dobj", ner: "" },
    { text: "daily", pos: "ADV", dep: "advmod", ner: "" },
  ],
};

function lf(id: string, selected = false): Lf {
  return {
    id,
    name: `[text="${id}"] → Chemical`,
    target: "Chemical",
    polarity: "positive",
    vote: "Chemical",
    selected,
    stats: { coverage: 0.25, dev_precision: selected ? 1.0 : null },
  };
}

const EMPTY_MODEL: ModelState = {
  status: "none",
  model: "generative",
  fit_error: null,
  metrics: null,
  lf_stats: null,
  fit_seconds: null,
  selected_hash: null,
};

class FakeApi {
  doc: NextDoc = DOC;
  suggested: Lf[] = [];
  selected: Lf[] = [];
  modelState: ModelState = EMPTY_MODEL;
  feedbackReport: Feedback | null = null;
  calls: string[] = [];
  failNextToggle = false;

  async projectInfo() {
    return {
      classes: ["Chemical", "Disease"],
      model: "generative",
      tau_default: 0.85,
      docs: { train: 2, dev: 1, test: 1 },
      annotations: 0,
      suggested: this.suggested.length,
      selected: this.selected.map((x) => x.id),
    };
  }

  async nextDoc() {
    this.calls.push("next_doc");
    return this.doc;
  }

  async submitAnnotation(req: {
    doc_id: string;
    start: number;
    end: number;
    label: string;
    polarity: string;
  }) {
    this.calls.push(
      `annotate ${req.doc_id} [${req.start},${req.end}) ${req.label} ${req.polarity}`,
    );
    this.suggested = [lf("a"), lf("b")];
    return this.suggested;
  }

  async listLfs() {
    return { suggested: this.suggested, selected: this.selected };
  }

  async selectLf(id: string) {
    if (this.failNextToggle) {
      this.failNextToggle = false;
      throw new ApiError("UNKNOWN_LF", "nope", 404);
    }
    this.calls.push(`select ${id}`);
    const found = this.suggested.find((x) => x.id === id)!;
    this.suggested = this.suggested.filter((x) => x.id !== id);
    this.selected = [
      ...this.selected,
      {
        ...found,
        selected: true,
        stats: { ...found.stats, dev_precision: 1.0 },
      },
    ];
  }

  async deselectLf(id: string) {
    this.calls.push(`deselect ${id}`);
    this.selected = this.selected.filter((x) => x.id !== id);
  }

  async feedback(id: string): Promise<Feedback> {
    if (this.feedbackReport === null) {
      throw new ApiError("UNKNOWN_LF", `unknown function ${id}`, 404);
    }
    return this.feedbackReport;
  }

  async model() {
    return this.modelState;
  }

  async retrain() {}
  async save() {}
}

function makeApp(api: FakeApi): App {
  const root = document.createElement("div");
  document.body.appendChild(root);
  return new App(root, api as unknown as ApiClient);
}

describe("pure view helpers", () => {
  it("snaps ranges regardless of drag direction", () => {
    expect(snapRange(2, 5)).toEqual({ start: 2, end: 6 });
    expect(snapRange(5, 2)).toEqual({ start: 2, end: 6 });
    expect(snapRange(3, 3)).toEqual({ start: 3, end: 4 });
  });

  it("maps sampler strategies to display tags", () => {
    expect(strategyTag("fp-guided")).toBe("similar-to-error");
    expect(strategyTag("uncertainty")).toBe("uncertain");
    expect(strategyTag("uncertainty-cold-start")).toBe("uncertain");
  });

  it("formats missing statistics as a dash", () => {
    expect(formatStat(null)).toBe("–");
    expect(formatStat(0.5)).toBe("0.500");
  });
});

describe("App", () => {
  let api: FakeApi;
  let app: App;

  beforeEach(async () => {
    document.body.innerHTML = "";
    api = new FakeApi();
    app = makeApp(api);
    const info = await api.projectInfo();
    app.classes = info.classes;
    await app.nextDoc();
  });

  it("renders the document tokens and strategy tag", () => {
    const tokens = app.query("tokens").querySelectorAll(".token");
    expect(tokens).toHaveLength(3);
    expect(tokens[1].textContent).toBe("aspirin");
    expect(app.query("strategy-tag").textContent).toBe("similar-to-error");
  });

  it("shows the popover only for non-empty snapped ranges", () => {
    expect(app.query("popover").hidden).toBe(true);
    app.selectSpan(1, 2);
    expect(app.query("popover").hidden).toBe(false);
    const highlighted = app.query("tokens").querySelectorAll(".highlight");
    expect(highlighted).toHaveLength(1);
    app.clearSpan();
    app.selectSpan(1, 1); // empty range → suppressed
    expect(app.pendingSpan).toBeNull();
  });

  it("submits the snapped span with the chosen label and polarity", async () => {
    app.selectSpan(1, 2);
    await app.submitSpan("Chemical", "negative");
    expect(api.calls).toContain("annotate t0 [1,2) Chemical negative");
    const rows = app.query("suggestions").querySelectorAll("tr");
    expect(rows).toHaveLength(2);
    expect(app.query("popover").hidden).toBe(true);
  });

  it("moves rows between suggestion and selected tables on toggle", async () => {
    app.selectSpan(1, 2);
    await app.submitSpan("Chemical", "positive");
    await app.toggleLf("a");
    expect(api.calls).toContain("select a");
    expect(app.query("suggestions").querySelectorAll("tr")).toHaveLength(1);
    const selectedRows = app.query("selected").querySelectorAll("tr");
    expect(selectedRows).toHaveLength(1);
    expect(selectedRows[0].querySelector(".lf-precision")!.textContent).toBe(
      "1.000",
    );
    await app.toggleLf("a");
    expect(api.calls).toContain("deselect a");
    expect(app.query("selected").querySelectorAll("tr")).toHaveLength(0);
  });

  it("keeps the prior toggle state when the API rejects", async () => {
    app.selectSpan(1, 2);
    await app.submitSpan("Chemical", "positive");
    api.failNextToggle = true;
    await app.toggleLf("a");
    expect(app.lastError).toContain("UNKNOWN_LF");
    expect(app.query("suggestions").querySelectorAll("tr")).toHaveLength(2);
    expect(app.query("error-banner").hidden).toBe(false);
  });

  it("renders model metrics only when a snapshot exists", async () => {
    await app.refreshModel();
    expect(app.query("model-status").textContent).toBe("none");
    expect(app.query("model-metrics").textContent).toBe("");
    api.modelState = {
      ...EMPTY_MODEL,
      status: "fresh",
      metrics: {
        per_class: {
          Chemical: { precision: 1, recall: 0.5, f1: 2 / 3 },
          Disease: { precision: 0, recall: 0, f1: 0 },
        },
        micro_precision: 1,
        micro_recall: 0.5,
        micro_f1: 2 / 3,
      },
      fit_seconds: 0.02,
      selected_hash: "aa",
    };
    await app.refreshModel();
    expect(app.query("model-status").textContent).toBe("fresh");
    const f1 = app
      .query("model-metrics")
      .querySelector('[data-metric="micro-f1"]');
    expect(f1!.textContent).toBe((2 / 3).toFixed(3));
  });

  it("renders the false-positive inspector including the empty state", async () => {
    api.feedbackReport = {
      lf_id: "a",
      dev_precision: 0.5,
      dev_votes: 2,
      train_coverage: 0.1,
      dev_false_positives: [
        {
          doc_id: "d1",
          start: 2,
          end: 3,
          vote: "Chemical",
          gold: ["Disease"],
          context_tokens: ["aspirin", "cures", "headaches"],
          context_offset: 0,
        },
      ],
      train_sample: [],
    };
    await app.inspectFps("a");
    const items = app.query("fp-list").querySelectorAll(".fp-item");
    expect(items).toHaveLength(1);
    expect(items[0].textContent).toContain("[headaches]");
    expect(items[0].textContent).toContain("gold Disease");

    api.feedbackReport.dev_false_positives = [];
    await app.inspectFps("a");
    expect(
      app.query("fp-inspector").querySelector('[data-testid="fp-empty"]'),
    ).not.toBeNull();
  });

  it("shows the completion state when documents run out", async () => {
    api.nextDoc = async () => {
      throw new ApiError("EXHAUSTED", "all served", 400);
    };
    await app.nextDoc();
    expect(app.exhausted).toBe(true);
    expect(
      app.query("tokens").querySelector('[data-testid="exhausted"]'),
    ).not.toBeNull();
  });
});
