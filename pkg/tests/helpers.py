"""Shared corpus-building helpers for the test suite."""

import json
import os

import numpy as np

from spanweak.corpus import ingest, write_embeddings


def build_corpus(tmp_path, docs, classes=("Chemical", "Disease"), dim=4,
                 seed=0, word_vectors=None):
    """Write corpus/label/embedding files from a compact doc spec and ingest.

    docs: list of dicts {"id", "split", "tokens": [(text, pos, dep, ner)],
    "gold": [..] or None}. Token embeddings default to seeded random unit
    vectors shared per surface form; word_vectors overrides specific words.
    """
    rng = np.random.default_rng(seed)
    vectors = {}

    def vec(word):
        key = word.casefold()
        if word_vectors and key in word_vectors:
            v = np.asarray(word_vectors[key], dtype=float)
            return v / np.linalg.norm(v)
        if key not in vectors:
            g = rng.normal(size=dim)
            vectors[key] = g / np.linalg.norm(g)
        return vectors[key]

    rows_a, rows_b, rows_sent = [], [], []
    lines = []
    for doc in docs:
        tokens = [{"text": t[0], "pos": t[1] if len(t) > 1 else "",
                   "dep": t[2] if len(t) > 2 else "",
                   "ner": t[3] if len(t) > 3 else ""}
                  for t in doc["tokens"]]
        doc_vecs = [vec(t["text"]) for t in tokens]
        rows_a.extend(doc_vecs)
        rows_b.extend(doc_vecs)
        if "sent_vec" in doc:
            s = np.asarray(doc["sent_vec"], dtype=float)
        else:
            s = np.mean(doc_vecs, axis=0)
            if np.linalg.norm(s) == 0:
                s = np.ones(dim)
        rows_sent.append(s / np.linalg.norm(s))
        line = {"id": doc["id"], "split": doc["split"], "tokens": tokens}
        if doc.get("gold") is not None:
            line["gold"] = doc["gold"]
        lines.append(line)

    paths = {
        "corpus": os.path.join(tmp_path, "corpus.jsonl"),
        "labels": os.path.join(tmp_path, "labels.json"),
        "emb_a": os.path.join(tmp_path, "emb_a.bin"),
        "emb_b": os.path.join(tmp_path, "emb_b.bin"),
        "sent": os.path.join(tmp_path, "sent.bin"),
    }
    with open(paths["corpus"], "w") as f:
        for line in lines:
            f.write(json.dumps(line) + "\n")
    with open(paths["labels"], "w") as f:
        json.dump({"classes": list(classes)}, f)
    write_embeddings(paths["emb_a"], "emb_a", np.asarray(rows_a))
    write_embeddings(paths["emb_b"], "emb_b", np.asarray(rows_b))
    write_embeddings(paths["sent"], "sent", np.asarray(rows_sent))
    corpus = ingest(paths["corpus"], paths["emb_a"], paths["emb_b"],
                    paths["sent"], paths["labels"])
    return corpus, paths


def random_docs(rng, n_docs, classes, vocab=None, max_len=12, split="train",
                with_gold=False, pos_tags=("NOUN", "VERB", "ADJ"),
                ner_tags=("", "", "PER", "LOC")):
    """Random doc specs for property-style tests."""
    vocab = vocab or [f"w{i}" for i in range(20)]
    docs = []
    for d in range(n_docs):
        length = rng.integers(1, max_len + 1)
        tokens = []
        gold = []
        for _ in range(length):
            tokens.append((
                str(rng.choice(vocab)),
                str(rng.choice(pos_tags)),
                str(rng.choice(["nsubj", "dobj", "amod"])),
                str(rng.choice(ner_tags)),
            ))
            gold.append(str(rng.choice(list(classes) + ["O", "O"])))
        docs.append({"id": f"{split}{d:03d}", "split": split,
                     "tokens": tokens, "gold": gold if with_gold else None})
    return docs
