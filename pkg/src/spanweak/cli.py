"""Command line entry points: ingest, serve, apply, evaluate, simulate, synth.

Exit codes: 0 ok, 2 input error, 3 state error.
"""

from __future__ import annotations

import json
import sys

import click
import numpy as np

from . import synthetic
from .corpus import CorpusError, corpus_stats, ingest, load_label_set
from .labelmodel import ModelError, evaluate as evaluate_metrics
from .rules import RuleError, SpanAnnotation, coverage_mask
from .sampler import SessionComplete
from .session import MODELS, Project, SessionError

EXIT_INPUT = 2
EXIT_STATE = 3


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_project(path) -> Project:
    try:
        return Project.load(path)
    except FileNotFoundError as exc:
        _fail(EXIT_INPUT, str(exc))
    except (CorpusError, SessionError) as exc:
        _fail(EXIT_INPUT, f"{path}: {exc}")


@click.group()
def main():
    """Weak-supervision engine for span-level annotation."""


@main.command("ingest")
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--emb-a", "emb_a", required=True, type=click.Path())
@click.option("--emb-b", "emb_b", required=True, type=click.Path())
@click.option("--sent", "sent", required=True, type=click.Path())
@click.option("--labels", "labels", required=True, type=click.Path())
@click.option("--out", "out", required=True, type=click.Path())
@click.option("--model", default="generative", type=click.Choice(MODELS))
@click.option("--seed", default=0, type=int)
def cmd_ingest(corpus_path, emb_a, emb_b, sent, labels, out, model, seed):
    """Validate a corpus and write a fresh project file."""
    paths = {"corpus": corpus_path, "emb_a": emb_a, "emb_b": emb_b,
             "sent": sent, "labels": labels}
    try:
        corpus = ingest(corpus_path, emb_a, emb_b, sent, labels)
    except FileNotFoundError as exc:
        _fail(EXIT_INPUT, str(exc))
    except CorpusError as exc:
        _fail(EXIT_INPUT, str(exc))
    stats = corpus_stats(corpus)
    click.echo(f"documents: {stats['n_docs']}")
    for split, row in stats["splits"].items():
        mean = row["mean_tokens_per_doc"]
        mean_s = f"{mean:.1f}" if mean is not None else "-"
        click.echo(f"  {split:5s}: {row['docs']} docs, {mean_s} tokens/doc")
    if stats["no_gold"]:
        click.echo("class frequencies: no gold labels in dev/test")
    else:
        click.echo("class frequencies (dev+test gold tokens):")
        for name, freq in stats["class_frequencies"].items():
            click.echo(f"  {name}: {freq:.3f}")
    project = Project(corpus=corpus, corpus_paths=paths, model=model, seed=seed)
    project.save(out)
    click.echo(f"project written to {out}")


@main.command("serve")
@click.option("--project", "project_path", required=True, type=click.Path())
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def cmd_serve(project_path, host, port):
    """Serve the annotation API for one project."""
    import uvicorn

    from .service import create_app

    project = _load_project(project_path)
    app = create_app(project, project_path=project_path)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command("apply")
@click.option("--project", "project_path", required=True, type=click.Path())
@click.option("--split", default="train",
              type=click.Choice(["train", "dev", "test"]))
@click.option("--out", "out", required=True, type=click.Path())
@click.option("--force", is_flag=True)
def cmd_apply(project_path, split, out, force):
    """Apply the selected functions and write the label export stream.

    The project file stores no fitted parameters, so this refits the chosen
    model (deterministically) before exporting.
    """
    project = _load_project(project_path)
    if not project.selected:
        _fail(EXIT_STATE, "project has no selected labeling functions; "
                          "nothing to apply")
    try:
        project.retrain()
        with open(out, "w") as f:
            for row in project.export(split, force=force):
                f.write(json.dumps(row) + "\n")
    except (SessionError, ModelError) as exc:
        _fail(EXIT_STATE, str(exc))
    click.echo(f"export written to {out}")


@main.command("evaluate")
@click.option("--pred", "pred_path", required=True, type=click.Path())
@click.option("--gold", "gold_path", required=True, type=click.Path())
@click.option("--labels", "labels_path", required=True, type=click.Path())
def cmd_evaluate(pred_path, gold_path, labels_path):
    """Token-level micro F1 of an export stream against a gold corpus file."""
    try:
        label_set = load_label_set(labels_path)
        gold_by_id = {}
        with open(gold_path) as f:
            for line in f:
                line = line.strip()
                if line:
                    doc = json.loads(line)
                    if doc.get("gold") is not None:
                        gold_by_id[str(doc["id"])] = doc["gold"]
        pred, gold = [], []
        with open(pred_path) as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                if row["id"] not in gold_by_id:
                    _fail(EXIT_INPUT, f"doc {row['id']!r} has no gold labels")
                g = gold_by_id[row["id"]]
                if len(g) != len(row["hard"]):
                    _fail(EXIT_INPUT,
                          f"doc {row['id']!r}: {len(row['hard'])} predictions "
                          f"vs {len(g)} gold labels")
                pred.extend(row["hard"])
                gold.extend(g)
    except FileNotFoundError as exc:
        _fail(EXIT_INPUT, str(exc))
    if not pred:
        _fail(EXIT_INPUT, "no aligned predictions found")
    outputs = label_set.outputs
    K = len(outputs)
    P = np.zeros((len(pred), K))
    for i, name in enumerate(pred):
        P[i, label_set.output_index(name)] = 1.0
    gold_idx = np.asarray([label_set.output_index(g) for g in gold])
    metrics = evaluate_metrics(P, gold_idx, outputs)
    for name, row in metrics.per_class.items():
        click.echo(f"{name}: P={row['precision']:.4f} R={row['recall']:.4f} "
                   f"F1={row['f1']:.4f}")
    click.echo(f"micro: P={metrics.micro_precision:.4f} "
               f"R={metrics.micro_recall:.4f} F1={metrics.micro_f1:.4f}")


def gold_spans(doc) -> list[tuple[int, int, str]]:
    """Contiguous non-background gold runs of a document."""
    spans = []
    gold = doc.gold or ()
    i, n = 0, len(gold)
    while i < n:
        if gold[i] == "O":
            i += 1
            continue
        j = i
        while j < n and gold[j] == gold[i]:
            j += 1
        spans.append((i, j, gold[i]))
        i = j
    return spans


class DictionaryTagger:
    """Manual-labeling baseline: exact surface strings of the gold spans the
    annotator has seen so far, applied longest-match-first, case-insensitive."""

    def __init__(self):
        self.entries: dict[tuple[str, ...], str] = {}

    def learn(self, texts: list[str], label: str):
        key = tuple(t.casefold() for t in texts)
        self.entries.setdefault(key, label)

    def tag(self, texts: list[str], outputs: tuple[str, ...]) -> np.ndarray:
        o_idx = len(outputs) - 1
        out = np.full(len(texts), o_idx, dtype=np.int64)
        lower = [t.casefold() for t in texts]
        keys_by_len = sorted(self.entries, key=len, reverse=True)
        taken = np.zeros(len(texts), dtype=bool)
        for key in keys_by_len:
            k = len(key)
            label_idx = outputs.index(self.entries[key])
            for i in range(len(texts) - k + 1):
                if taken[i:i + k].any():
                    continue
                if tuple(lower[i:i + k]) == key:
                    out[i:i + k] = label_idx
                    taken[i:i + k] = True
        return out


def _split_eval(project: Project, snap, split: str):
    _, P = project._posteriors(list(snap.lfs), snap.params, split)
    gold = project.gold_indices(split)
    return evaluate_metrics(P, gold, project.corpus.label_set.outputs)


def run_simulation(project: Project, budget: int, seed: int,
                   max_spans_per_doc: int = 3,
                   min_dev_precision: float = 0.5) -> list[dict]:
    """Scripted annotator loop over the train split; returns curve rows."""
    corpus = project.corpus
    if not corpus.split_docs("dev") or not corpus.split_docs("test"):
        raise SessionError("simulation needs gold-labeled dev and test splits")
    project.sampler_state.seed = seed
    n_train = len(corpus.split_docs("train"))
    if budget > n_train:
        click.echo(f"warning: budget {budget} exceeds train size {n_train}; "
                   f"truncating", err=True)
        budget = n_train
    outputs = corpus.label_set.outputs
    gold_test = project.gold_indices("test")
    test_texts = [[t.text for t in d.tokens] for d in corpus.split_docs("test")]
    baseline = DictionaryTagger()
    preview_cache: dict[str, dict] = {}
    train_rows = corpus.split_token_rows("train")
    mask_cache: dict[str, np.ndarray] = {}
    covered = np.zeros(len(train_rows), dtype=bool)

    def train_mask(lf_id: str) -> np.ndarray:
        if lf_id not in mask_cache:
            mask_cache[lf_id] = coverage_mask(
                project.suggested[lf_id], corpus)[train_rows]
        return mask_cache[lf_id]

    rows = []
    n_submitted = 0
    for interaction in range(1, budget + 1):
        try:
            doc_id, _ = project.next_document()
        except SessionComplete:
            break
        doc = corpus.doc(doc_id)
        spans = sorted(gold_spans(doc), key=lambda s: (-(s[1] - s[0]), s[0]))
        for start, end, label in spans[:max_spans_per_doc]:
            ann = SpanAnnotation(doc_id=doc_id, start=start, end=end,
                                 label=label, polarity="positive")
            for lf, stats in project.submit_annotation(ann):
                preview_cache.setdefault(lf.id, stats)
            n_submitted += 1
            baseline.learn([t.text for t in doc.tokens[start:end]], label)
        # auto-select the strongest unselected suggestion (stand-in for the
        # human choice): highest dev precision, floor 0.5; precision ties go
        # to the candidate covering the most not-yet-covered train tokens, so
        # redundant near-duplicates don't crowd out the other classes
        best_id, best_key = None, None
        for lf_id in project.suggested:
            if lf_id in project.selected:
                continue
            stats = preview_cache.get(lf_id) or project.preview_stats(
                project.suggested[lf_id])
            prec = stats["dev_precision"]
            if prec is None or prec < min_dev_precision:
                continue
            marginal = int((train_mask(lf_id) & ~covered).sum())
            key = (prec, marginal, lf_id)
            if best_key is None or key > best_key:
                best_id, best_key = lf_id, key
        if best_id is not None:
            project.set_selected(best_id, True)
            covered |= train_mask(best_id)
        if project.selected:
            snap = project.retrain()
            dev_f1 = snap.dev_metrics.micro_f1
            test_f1 = _split_eval(project, snap, "test").micro_f1
        else:
            dev_f1 = test_f1 = 0.0
        base_pred = np.concatenate(
            [baseline.tag(texts, outputs) for texts in test_texts])
        base_P = np.zeros((len(base_pred), len(outputs)))
        base_P[np.arange(len(base_pred)), base_pred] = 1.0
        base_f1 = evaluate_metrics(base_P, gold_test, outputs).micro_f1
        rows.append({
            "interaction": interaction,
            "elapsed_proxy": n_submitted,
            "n_lfs": len(project.selected),
            "dev_f1": dev_f1,
            "test_f1": test_f1,
            "baseline_f1": base_f1,
        })
    return rows


@main.command("simulate")
@click.option("--project", "project_path", required=True, type=click.Path())
@click.option("--budget", required=True, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--model", default=None, type=click.Choice(MODELS))
@click.option("--out", "out", required=True, type=click.Path())
def cmd_simulate(project_path, budget, seed, model, out):
    """Replay a scripted annotation session and record the F1-vs-budget curve."""
    project = _load_project(project_path)
    if model is not None:
        project.model = model
    try:
        rows = run_simulation(project, budget, seed)
    except SessionError as exc:
        _fail(EXIT_INPUT, str(exc))
    with open(out, "w") as f:
        f.write("interaction,elapsed_proxy,n_lfs,dev_f1,test_f1,baseline_f1\n")
        for r in rows:
            f.write(f"{r['interaction']},{r['elapsed_proxy']},{r['n_lfs']},"
                    f"{r['dev_f1']:.6f},{r['test_f1']:.6f},"
                    f"{r['baseline_f1']:.6f}\n")
    click.echo(f"curve written to {out}")


@main.command("synth")
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--seed", default=0, type=int)
@click.option("--train", "n_train", default=800, type=int)
@click.option("--dev", "n_dev", default=100, type=int)
@click.option("--test", "n_test", default=100, type=int)
def cmd_synth(out_dir, seed, n_train, n_dev, n_test):
    """Generate a synthetic planted corpus (for demos and tests)."""
    spec = synthetic.SyntheticSpec(n_train=n_train, n_dev=n_dev, n_test=n_test)
    paths = synthetic.generate(out_dir, seed=seed, spec=spec)
    for key, path in paths.items():
        click.echo(f"{key}: {path}")


if __name__ == "__main__":
    main()
