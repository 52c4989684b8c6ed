"""Synthetic corpus generation for tests, benchmarks, and demo sessions.

Entities are planted by known rules (per class: two surface lexicons and a
class-specific NER tag), so an end-to-end session has a recoverable target.
Token embeddings cluster by class around a shared centroid per channel, which
makes similarity rules generalize beyond the surfaces the annotator has seen.
Train-split gold labels carry a configurable amount of flip-to-background
noise, modeling an imperfect annotator; dev/test gold stays clean so that the
evaluation targets are exact.
"""

from __future__ import annotations

import json
import os
import random
from dataclasses import dataclass

import numpy as np

from .corpus import write_embeddings


@dataclass(frozen=True)
class SyntheticSpec:
    classes: tuple[str, ...] = ("Chemical", "Disease")
    n_train: int = 800
    n_dev: int = 100
    n_test: int = 100
    doc_len: tuple[int, int] = (20, 40)
    lexicon_size: int = 40  # per class, split into two surface lexicons
    n_background: int = 300
    entity_rate: float = 0.18
    ner_tag_rate: float = 0.8  # share of entity tokens carrying the class NER tag
    label_noise: float = 0.10  # train gold flipped to "O" (annotator noise)
    dim: int = 32
    zipf_exponent: float = 1.2


def _zipf_weights(n: int, s: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** s
    return w / w.sum()


def _word_vectors(words, centroid, spread, rng: np.random.Generator, dim: int):
    vecs = {}
    for w in words:
        g = rng.normal(size=dim)
        g /= np.linalg.norm(g)
        v = centroid + spread * g if centroid is not None else g
        vecs[w] = v / np.linalg.norm(v)
    return vecs


def generate(out_dir, seed: int = 0, spec: SyntheticSpec = SyntheticSpec()) -> dict:
    """Write corpus.jsonl, labels.json, and the three embedding sidecars under
    out_dir; returns the path dict expected by Project.corpus_paths."""
    rng = np.random.default_rng(seed)
    pyrng = random.Random(seed)
    os.makedirs(out_dir, exist_ok=True)

    background = [f"w{i}" for i in range(spec.n_background)]
    lexicons = {c: [f"{c.lower()}{i:02d}" for i in range(spec.lexicon_size)]
                for c in spec.classes}
    ner_tag = {c: c.upper()[:4] for c in spec.classes}

    vec_a: dict[str, np.ndarray] = {}
    vec_b: dict[str, np.ndarray] = {}
    for words, centroided in [(background, False)] + [
            (lexicons[c], True) for c in spec.classes]:
        for channel_vecs in (vec_a, vec_b):
            if centroided:
                centroid = rng.normal(size=spec.dim)
                centroid /= np.linalg.norm(centroid)
                channel_vecs.update(
                    _word_vectors(words, centroid, 0.3, rng, spec.dim))
            else:
                channel_vecs.update(_word_vectors(words, None, 1.0, rng, spec.dim))

    bg_weights = _zipf_weights(spec.n_background, spec.zipf_exponent)
    lex_weights = _zipf_weights(spec.lexicon_size, spec.zipf_exponent)
    pos_bg = ["NOUN", "VERB", "ADJ", "DET", "ADP"]
    deps = ["nsubj", "dobj", "amod", "det", "prep", "pobj"]

    docs = []
    rows_a, rows_b, rows_sent = [], [], []
    splits = (["train"] * spec.n_train + ["dev"] * spec.n_dev
              + ["test"] * spec.n_test)
    for d, split in enumerate(splits):
        length = pyrng.randint(*spec.doc_len)
        tokens, gold = [], []
        doc_vecs = []
        for _ in range(length):
            if pyrng.random() < spec.entity_rate:
                cls = pyrng.choice(spec.classes)
                word = lexicons[cls][rng.choice(spec.lexicon_size, p=lex_weights)]
                ner = ner_tag[cls] if pyrng.random() < spec.ner_tag_rate else ""
                tokens.append({"text": word, "pos": "PROPN",
                               "dep": pyrng.choice(deps), "ner": ner})
                noisy = pyrng.random() < spec.label_noise and split == "train"
                gold.append("O" if noisy else cls)
            else:
                word = background[rng.choice(spec.n_background, p=bg_weights)]
                ner = "MISC" if pyrng.random() < 0.02 else ""
                tokens.append({"text": word, "pos": pyrng.choice(pos_bg),
                               "dep": pyrng.choice(deps), "ner": ner})
                gold.append("O")
            rows_a.append(vec_a[word])
            rows_b.append(vec_b[word])
            doc_vecs.append(vec_a[word])
        sent = np.mean(doc_vecs, axis=0)
        rows_sent.append(sent / np.linalg.norm(sent))
        docs.append({"id": f"doc{d:04d}", "split": split, "tokens": tokens,
                     "gold": gold})

    paths = {
        "corpus": os.path.join(out_dir, "corpus.jsonl"),
        "labels": os.path.join(out_dir, "labels.json"),
        "emb_a": os.path.join(out_dir, "emb_a.bin"),
        "emb_b": os.path.join(out_dir, "emb_b.bin"),
        "sent": os.path.join(out_dir, "sent.bin"),
    }
    with open(paths["corpus"], "w") as f:
        for doc in docs:
            f.write(json.dumps(doc) + "\n")
    with open(paths["labels"], "w") as f:
        json.dump({"classes": list(spec.classes)}, f)
    write_embeddings(paths["emb_a"], "emb_a", np.asarray(rows_a))
    write_embeddings(paths["emb_b"], "emb_b", np.asarray(rows_b))
    write_embeddings(paths["sent"], "sent", np.asarray(rows_sent))
    return paths
