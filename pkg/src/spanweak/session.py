"""Project state: annotation log, function registry, retraining lifecycle,
false-positive feedback, export, and persistence.

A project owns one corpus and one mutable session. Retraining publishes an
immutable ModelSnapshot; selection changes only mark the snapshot stale.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass

import numpy as np

from . import labelmodel, rules, sampler
from .corpus import Corpus, ingest
from .labelmodel import (FitConfig, LabelMatrix, ModelError, ModelMetrics,
                         apply_generative, apply_hmm, build_matrix, evaluate,
                         fit_generative, fit_hmm, fit_majority, hard_labels,
                         lf_stats, to_bio)
from .rules import LabelingFunction, MatchSpan, SpanAnnotation, apply_lf
from .sampler import ModelView, SamplerState

SCHEMA_VERSION = 1
MODELS = ("majority", "generative", "hmm")
CONTEXT_WINDOW = 5
TRAIN_SAMPLE_LIMIT = 10


class SessionError(ValueError):
    pass


def selection_hash(ids) -> str:
    return hashlib.sha256(",".join(sorted(ids)).encode()).hexdigest()


@dataclass(frozen=True)
class ModelSnapshot:
    selected_hash: str
    model: str
    lfs: tuple[LabelingFunction, ...]
    params: object | None  # GenerativeParams | HmmParams | None (majority)
    matrix_train: LabelMatrix
    posteriors_train: np.ndarray
    matrix_dev: LabelMatrix | None
    posteriors_dev: np.ndarray | None
    dev_metrics: ModelMetrics | None
    stats: list[labelmodel.LFStats]
    fit_seconds: float


@dataclass(frozen=True)
class FPReport:
    lf_id: str
    dev_false_positives: list[dict]
    dev_precision: float | None
    dev_votes: int
    train_coverage: float
    train_sample: list[dict]

    def to_json(self) -> dict:
        return {"lf_id": self.lf_id,
                "dev_false_positives": self.dev_false_positives,
                "dev_precision": self.dev_precision,
                "dev_votes": self.dev_votes,
                "train_coverage": self.train_coverage,
                "train_sample": self.train_sample}


class Project:
    def __init__(self, corpus: Corpus, corpus_paths: dict, model: str = "generative",
                 tau_default: float = rules.DEFAULT_TAU, seed: int = 0,
                 fit_config: FitConfig = FitConfig()):
        if model not in MODELS:
            raise SessionError(f"unknown model {model!r}; pick one of {MODELS}")
        self.corpus = corpus
        self.corpus_paths = dict(corpus_paths)
        self.model = model
        self.tau_default = tau_default
        self.fit_config = fit_config
        self.annotations: list[SpanAnnotation] = []
        self.suggested: dict[str, LabelingFunction] = {}
        self.selected: list[str] = []
        self.snapshot: ModelSnapshot | None = None
        self.sampler_state = SamplerState(seed=seed)

    # -- registry -----------------------------------------------------------

    def submit_annotation(self, ann: SpanAnnotation):
        """Record a demonstration and return (candidate, preview-stats) pairs."""
        candidates = rules.synthesize(ann, self.corpus, tau=self.tau_default)
        self.annotations.append(ann)
        out = []
        for lf in candidates:
            self.suggested.setdefault(lf.id, lf)
            out.append((lf, self.preview_stats(lf)))
        return out

    def preview_stats(self, lf: LabelingFunction) -> dict:
        covered = rules.coverage_mask(lf, self.corpus)
        train_rows = self.corpus.split_token_rows("train")
        coverage = float(covered[train_rows].mean()) if len(train_rows) else 0.0
        doc_cov = rules.doc_coverage(lf, self.corpus, "train")
        dev_precision = None
        dev_votes = 0
        dev_rows = self.corpus.split_token_rows("dev")
        if len(dev_rows):
            fired = covered[dev_rows]
            dev_votes = int(fired.sum())
            if dev_votes:
                gold = self.gold_indices("dev")
                vote_idx = self.corpus.label_set.output_index(lf.vote)
                dev_precision = float((gold[fired] == vote_idx).mean())
        return {"coverage": coverage, "doc_coverage": doc_cov,
                "dev_precision": dev_precision, "dev_votes": dev_votes}

    def lf(self, lf_id: str) -> LabelingFunction:
        try:
            return self.suggested[lf_id]
        except KeyError:
            raise SessionError(f"unknown labeling function id {lf_id!r}")

    def set_selected(self, lf_id: str, selected: bool) -> list[str]:
        self.lf(lf_id)  # raises on unknown id
        if selected and lf_id not in self.selected:
            self.selected.append(lf_id)
        elif not selected and lf_id in self.selected:
            self.selected.remove(lf_id)
        return list(self.selected)

    @property
    def stale(self) -> bool:
        if self.snapshot is None:
            return True
        return self.snapshot.selected_hash != selection_hash(self.selected)

    def status(self) -> str:
        if self.snapshot is None:
            return "none"
        return "stale" if self.stale else "fresh"

    # -- fitting ------------------------------------------------------------

    def gold_indices(self, split: str) -> np.ndarray:
        idx = []
        for d in self.corpus.split_docs(split):
            if d.gold is None:
                raise SessionError(f"doc {d.id!r} in split {split!r} has no gold labels")
            idx.extend(self.corpus.label_set.output_index(g) for g in d.gold)
        return np.asarray(idx, dtype=np.int64)

    def _posteriors(self, lfs, params, split: str):
        M = build_matrix(self.corpus, lfs, split)
        if self.model == "majority":
            return M, fit_majority(M)
        if self.model == "generative":
            return M, apply_generative(params, M)
        return M, apply_hmm(params, M)

    def retrain(self) -> ModelSnapshot:
        if not self.selected:
            raise ModelError("no labeling functions selected")
        t0 = time.perf_counter()
        lfs = tuple(self.suggested[i] for i in self.selected)
        M = build_matrix(self.corpus, list(lfs), "train")
        if self.model == "majority":
            params, P = None, fit_majority(M)
        elif self.model == "generative":
            params, P = fit_generative(M, self.fit_config)
        else:
            params, P = fit_hmm(M, self.fit_config)
        M_dev = P_dev = dev_metrics = None
        gold_dev = None
        if self.corpus.split_docs("dev"):
            M_dev, P_dev = self._posteriors(list(lfs), params, "dev")
            gold_dev = self.gold_indices("dev")
            dev_metrics = evaluate(P_dev, gold_dev, self.corpus.label_set.outputs)
        stats = lf_stats(M, M_dev, gold_dev)
        self.snapshot = ModelSnapshot(
            selected_hash=selection_hash(self.selected), model=self.model,
            lfs=lfs, params=params, matrix_train=M, posteriors_train=P,
            matrix_dev=M_dev, posteriors_dev=P_dev, dev_metrics=dev_metrics,
            stats=stats, fit_seconds=time.perf_counter() - t0)
        return self.snapshot

    # -- sampling -----------------------------------------------------------

    def model_view(self) -> ModelView | None:
        snap = self.snapshot
        if snap is None:
            return None

        def by_doc(matrix, posteriors):
            out = {}
            if matrix is None:
                return out
            for doc_id, offset, length in matrix.boundaries:
                out[doc_id] = posteriors[offset:offset + length]
            return out

        return ModelView(
            train_posteriors=by_doc(snap.matrix_train, snap.posteriors_train),
            dev_posteriors=by_doc(snap.matrix_dev, snap.posteriors_dev))

    def next_document(self) -> tuple[str, str]:
        return sampler.next_document(self.sampler_state, self.model_view(), self.corpus)

    # -- feedback -----------------------------------------------------------

    def _context(self, doc, span: MatchSpan) -> dict:
        lo = max(0, span.start - CONTEXT_WINDOW)
        hi = min(len(doc.tokens), span.end + CONTEXT_WINDOW)
        return {
            "doc_id": span.doc_id, "start": span.start, "end": span.end,
            "vote": span.vote,
            "gold": list(doc.gold[span.start:span.end]) if doc.gold else None,
            "context_tokens": [t.text for t in doc.tokens[lo:hi]],
            "context_offset": lo,
        }

    def fp_feedback(self, lf_id: str) -> FPReport:
        lf = self.lf(lf_id)
        vote = lf.vote
        fps = []
        dev_votes = 0
        dev_hits = 0
        for doc in self.corpus.split_docs("dev"):
            for span in apply_lf(lf, doc, self.corpus):
                wrong = any(g != vote for g in doc.gold[span.start:span.end])
                dev_votes += span.end - span.start
                dev_hits += sum(1 for g in doc.gold[span.start:span.end] if g == vote)
                if wrong:
                    fps.append(self._context(doc, span))
        fps.sort(key=lambda d: (d["doc_id"], d["start"]))
        sample = []
        for doc in self.corpus.split_docs("train"):
            if len(sample) >= TRAIN_SAMPLE_LIMIT:
                break
            for span in apply_lf(lf, doc, self.corpus):
                sample.append(self._context(doc, span))
                if len(sample) >= TRAIN_SAMPLE_LIMIT:
                    break
        preview = self.preview_stats(lf)
        return FPReport(
            lf_id=lf_id, dev_false_positives=fps,
            dev_precision=(dev_hits / dev_votes) if dev_votes else None,
            dev_votes=dev_votes, train_coverage=preview["coverage"],
            train_sample=sample)

    # -- export -------------------------------------------------------------

    def export(self, split: str, force: bool = False):
        """Yield one export row per document of the split (see CLI `apply`)."""
        if self.snapshot is None:
            raise SessionError("no model snapshot; retrain first")
        if self.stale and not force:
            raise SessionError("snapshot is stale; retrain or pass force")
        snap = self.snapshot
        if split == "train":
            M, P = snap.matrix_train, snap.posteriors_train
        elif split == "dev" and snap.matrix_dev is not None:
            M, P = snap.matrix_dev, snap.posteriors_dev
        else:
            M, P = self._posteriors(list(snap.lfs), snap.params, split)
        outputs = self.corpus.label_set.outputs
        for doc_id, offset, length in M.boundaries:
            doc = self.corpus.doc(doc_id)
            rows = P[offset:offset + length]
            hard = hard_labels(rows)
            yield {
                "id": doc_id,
                "tokens": [t.text for t in doc.tokens],
                "p": [[float(x) for x in r] for r in rows],
                "hard": [outputs[i] for i in hard],
                "bio": to_bio(hard, outputs),
            }

    # -- persistence --------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "version": SCHEMA_VERSION,
            "labels": list(self.corpus.label_set.classes),
            "model": self.model,
            "tau_default": self.tau_default,
            "corpus_paths": self.corpus_paths,
            "annotations": [a.to_json() for a in self.annotations],
            "lfs": {
                "suggested": [
                    {"lf": lf.to_json(), "provenance": lf.provenance}
                    for lf in self.suggested.values()],
                "selected": list(self.selected),
            },
            "sampler": self.sampler_state.to_json(),
        }

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f)

    @classmethod
    def load(cls, path, corpus: Corpus | None = None) -> "Project":
        with open(path) as f:
            payload = json.load(f)
        if payload.get("version") != SCHEMA_VERSION:
            raise SessionError(
                f"project schema version {payload.get('version')!r} is not "
                f"supported (expected {SCHEMA_VERSION})")
        paths = payload["corpus_paths"]
        if corpus is None:
            corpus = ingest(paths["corpus"], paths["emb_a"], paths["emb_b"],
                            paths["sent"], paths["labels"])
        project = cls(corpus=corpus, corpus_paths=paths, model=payload["model"],
                      tau_default=payload["tau_default"],
                      seed=payload["sampler"].get("seed", 0))
        project.annotations = [
            SpanAnnotation.from_json(a) for a in payload["annotations"]]
        for entry in payload["lfs"]["suggested"]:
            lf = LabelingFunction.from_json(entry["lf"], entry.get("provenance", ""))
            project.suggested[lf.id] = lf
        project.selected = list(payload["lfs"]["selected"])
        for lf_id in project.selected:
            if lf_id not in project.suggested:
                raise SessionError(f"selected id {lf_id!r} missing from registry")
        project.sampler_state = SamplerState.from_json(payload["sampler"])
        return project
