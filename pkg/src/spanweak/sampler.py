"""Active document sampling: alternates a false-positive-guided pick (train
doc most similar to the dev doc the model gets most wrong) with an
uncertainty pick (highest mean token-posterior entropy). Cold starts fall
back to a seeded random pick so the annotator is never blocked.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus


class SessionComplete(Exception):
    """All train documents have been served."""


@dataclass
class SamplerState:
    seed: int = 0
    parity: int = 0
    served: set[str] = field(default_factory=set)

    def to_json(self) -> dict:
        return {"parity": self.parity, "served": sorted(self.served),
                "seed": self.seed}

    @classmethod
    def from_json(cls, d: dict) -> "SamplerState":
        return cls(seed=d.get("seed", 0), parity=d.get("parity", 0),
                   served=set(d.get("served", [])))


@dataclass(frozen=True)
class ModelView:
    """The slice of a fitted snapshot the sampler needs: posteriors per doc."""

    train_posteriors: dict[str, np.ndarray]  # doc_id -> (len, K)
    dev_posteriors: dict[str, np.ndarray]


def _unserved(state: SamplerState, corpus: Corpus) -> list[str]:
    return sorted(d.id for d in corpus.split_docs("train") if d.id not in state.served)


def dev_error_score(model: ModelView, dev_doc, corpus: Corpus) -> float:
    """Mean posterior mass on the gold label; low = model disbelieves truth."""
    if model is None:
        raise ValueError("no fitted model")
    P = model.dev_posteriors[dev_doc.id]
    gold_idx = [corpus.label_set.output_index(g) for g in dev_doc.gold]
    return float(P[np.arange(len(gold_idx)), gold_idx].mean())


def fp_guided_pick(state: SamplerState, model: ModelView, corpus: Corpus) -> str:
    candidates = _unserved(state, corpus)
    if not candidates:
        raise SessionComplete
    dev_docs = corpus.split_docs("dev")
    if model is None or not dev_docs or not model.dev_posteriors:
        raise ValueError("fp-guided sampling needs a fitted model and a dev set")
    worst = min(dev_docs, key=lambda d: (dev_error_score(model, d, corpus), d.id))
    sent = corpus.stores["sent"].rows.astype(np.float64)
    anchor = sent[corpus.doc(worst.id).sent_emb]
    # stores are unit vectors, so cosine is a dot; ties resolve to lowest doc id
    best = min(
        candidates,
        key=lambda did: (-float(sent[corpus.doc(did).sent_emb] @ anchor), did))
    state.served.add(best)
    return best


def _mean_entropy(P: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log(P), 0.0)
    return float(-terms.sum(axis=1).mean())


def uncertainty_pick(state: SamplerState, model: ModelView | None,
                     corpus: Corpus) -> str:
    candidates = _unserved(state, corpus)
    if not candidates:
        raise SessionComplete
    if model is None:
        # cold start: seeded uniform pick, deterministic for a given state
        rng = random.Random(f"{state.seed}:{state.parity}")
        pick = rng.choice(candidates)
    else:
        pick = min(
            candidates,
            key=lambda did: (-_mean_entropy(model.train_posteriors[did]), did))
    state.served.add(pick)
    return pick


def next_document(state: SamplerState, model: ModelView | None,
                  corpus: Corpus) -> tuple[str, str]:
    """Pick the next train doc; returns (doc_id, strategy). Even parity tries
    the FP-guided strategy, falling back to uncertainty when it cannot run."""
    if not _unserved(state, corpus):
        raise SessionComplete
    if state.parity % 2 == 0:
        try:
            doc_id = fp_guided_pick(state, model, corpus)
            strategy = "fp-guided"
        except ValueError:
            strategy = "uncertainty-cold-start" if model is None else "uncertainty"
            doc_id = uncertainty_pick(state, model, corpus)
    else:
        strategy = "uncertainty-cold-start" if model is None else "uncertainty"
        doc_id = uncertainty_pick(state, model, corpus)
    state.parity += 1
    return doc_id, strategy
