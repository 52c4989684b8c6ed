"""Corpus loading and validation.

The engine never runs encoder inference: token tags and embeddings arrive as
precomputed files (JSON-lines corpus + binary embedding sidecars) and are
validated once at ingest. Everything here is immutable after ingest.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

SPLITS = ("train", "dev", "test")
BACKGROUND = "O"
EMB_MAGIC = b"SWEMB1"
CHANNEL_TAGS = {"emb_a": 0, "emb_b": 1, "sent": 2}


class CorpusError(ValueError):
    """Raised for any ingest-time validation failure."""


@dataclass(frozen=True)
class LabelSet:
    """Ordered entity classes; "O" (background) and ABSTAIN are reserved."""

    classes: tuple[str, ...]

    def __post_init__(self):
        if len(self.classes) < 1:
            raise CorpusError("label set needs at least one class")
        if len(set(self.classes)) != len(self.classes):
            raise CorpusError("class names must be unique")
        for name in self.classes:
            if not name or name in (BACKGROUND, "ABSTAIN"):
                raise CorpusError(f"invalid class name: {name!r}")

    @property
    def outputs(self) -> tuple[str, ...]:
        """Token output space: classes followed by the background class."""
        return self.classes + (BACKGROUND,)

    @property
    def o_index(self) -> int:
        return len(self.classes)

    def class_index(self, name: str) -> int:
        return self.classes.index(name)

    def output_index(self, name: str) -> int:
        if name == BACKGROUND:
            return self.o_index
        return self.classes.index(name)


@dataclass(frozen=True)
class Token:
    text: str
    pos: str
    dep: str
    ner: str  # empty string = no entity tag
    emb_a: int  # row in channel-A store
    emb_b: int  # row in channel-B store


@dataclass(frozen=True)
class Document:
    id: str
    tokens: tuple[Token, ...]
    sent_emb: int  # row in sentence store
    split: str
    gold: tuple[str, ...] | None  # over classes + "O"; required on dev/test


@dataclass(frozen=True)
class EmbeddingStore:
    channel: str
    rows: np.ndarray  # (n, dim) float32, L2-normalized at ingest

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def vector(self, row: int) -> np.ndarray:
        return self.rows[row]


@dataclass(frozen=True)
class Corpus:
    label_set: LabelSet
    documents: tuple[Document, ...]
    stores: dict[str, EmbeddingStore]
    # flattened per-token views in file order, built once for fast rule evaluation
    texts_lower: np.ndarray = field(repr=False)
    pos_tags: np.ndarray = field(repr=False)
    dep_tags: np.ndarray = field(repr=False)
    ner_tags: np.ndarray = field(repr=False)
    doc_of_token: np.ndarray = field(repr=False)  # doc index per global token row
    doc_offsets: np.ndarray = field(repr=False)  # (n_docs + 1,) token offsets

    @property
    def n_tokens(self) -> int:
        return len(self.texts_lower)

    def doc(self, doc_id: str) -> Document:
        return self._by_id[doc_id]

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {d.id: d for d in self.documents})
        object.__setattr__(
            self, "_doc_index", {d.id: i for i, d in enumerate(self.documents)})

    def doc_index(self, doc_id: str) -> int:
        return self._doc_index[doc_id]

    def token_range(self, doc_id: str) -> tuple[int, int]:
        i = self.doc_index(doc_id)
        return int(self.doc_offsets[i]), int(self.doc_offsets[i + 1])

    def split_docs(self, split: str) -> list[Document]:
        return [d for d in self.documents if d.split == split]

    def split_token_rows(self, split: str) -> np.ndarray:
        """Global token row indices for one split, in file order."""
        keep = [i for i, d in enumerate(self.documents) if d.split == split]
        if not keep:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(
            [np.arange(self.doc_offsets[i], self.doc_offsets[i + 1]) for i in keep]
        )


def cosine(u, v) -> float:
    """Plain cosine similarity; raises on dimension mismatch."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise CorpusError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise CorpusError("cosine undefined for zero vectors")
    return float(np.dot(u, v) / (nu * nv))


def write_embeddings(path, channel: str, rows: np.ndarray) -> None:
    """Write a binary embedding sidecar (little-endian SWEMB1 format)."""
    rows = np.ascontiguousarray(rows, dtype="<f4")
    with open(path, "wb") as f:
        f.write(EMB_MAGIC)
        f.write(struct.pack("<B", CHANNEL_TAGS[channel]))
        f.write(struct.pack("<I", rows.shape[1]))
        f.write(struct.pack("<Q", rows.shape[0]))
        f.write(rows.tobytes())


def read_embeddings(path, expect_channel: str) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.read(6)
        if magic != EMB_MAGIC:
            raise CorpusError(f"{path}: bad magic {magic!r} (offset 0)")
        tag = struct.unpack("<B", f.read(1))[0]
        if tag != CHANNEL_TAGS[expect_channel]:
            raise CorpusError(
                f"{path}: channel tag {tag} does not match expected "
                f"{expect_channel!r} (offset 6)"
            )
        dim = struct.unpack("<I", f.read(4))[0]
        count = struct.unpack("<Q", f.read(8))[0]
        if dim == 0:
            raise CorpusError(f"{path}: zero dimension (offset 7)")
        data = np.frombuffer(f.read(), dtype="<f4")
    if data.size != dim * count:
        raise CorpusError(
            f"{path}: payload has {data.size} floats, header promises "
            f"{count} rows x {dim} (offset 19)"
        )
    rows = data.reshape(count, dim)
    if not np.all(np.isfinite(rows)):
        bad = int(np.argwhere(~np.isfinite(rows).all(axis=1))[0][0])
        raise CorpusError(f"{path}: non-finite value in row {bad}")
    norms = np.linalg.norm(rows.astype(np.float64), axis=1)
    if np.any(norms == 0.0):
        bad = int(np.argmin(norms))
        raise CorpusError(f"{path}: zero vector at row {bad}")
    return rows


def load_label_set(path) -> LabelSet:
    with open(path) as f:
        payload = json.load(f)
    if not isinstance(payload, dict) or "classes" not in payload:
        raise CorpusError(f"{path}: expected JSON object with a 'classes' list")
    return LabelSet(classes=tuple(payload["classes"]))


def _parse_document(line: str, lineno: int, label_set: LabelSet,
                    tok_base: int, doc_index: int) -> Document:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"corpus line {lineno}: invalid JSON ({exc})") from exc
    where = f"corpus line {lineno} (doc {raw.get('id', '?')})"
    if raw.get("split") not in SPLITS:
        raise CorpusError(f"{where}: split must be one of {SPLITS}")
    toks = raw.get("tokens") or []
    if not toks:
        raise CorpusError(f"{where}: document has no tokens")
    tokens = []
    for k, t in enumerate(toks):
        text = t.get("text", "")
        if not text:
            raise CorpusError(f"{where}: token {k} has empty text")
        tokens.append(Token(
            text=text, pos=t.get("pos", ""), dep=t.get("dep", ""),
            ner=t.get("ner", ""), emb_a=tok_base + k, emb_b=tok_base + k,
        ))
    gold = raw.get("gold")
    if raw["split"] in ("dev", "test") and gold is None:
        raise CorpusError(f"{where}: gold labels required for {raw['split']} split")
    if gold is not None:
        if len(gold) != len(tokens):
            raise CorpusError(
                f"{where}: gold length {len(gold)} != token count {len(tokens)}"
            )
        allowed = set(label_set.outputs)
        for k, g in enumerate(gold):
            if g not in allowed:
                raise CorpusError(f"{where}: unknown gold label {g!r} at token {k}")
        gold = tuple(gold)
    return Document(
        id=str(raw["id"]), tokens=tuple(tokens), sent_emb=doc_index,
        split=raw["split"], gold=gold,
    )


def ingest(corpus_path, emb_a_path, emb_b_path, sent_path, labels) -> Corpus:
    """Load and validate a corpus with its three embedding channels.

    `labels` is either a LabelSet or a path to a label-set JSON file.
    Token embedding row i corresponds to the i-th token in file order.
    """
    label_set = labels if isinstance(labels, LabelSet) else load_label_set(labels)
    documents: list[Document] = []
    seen_ids: set[str] = set()
    tok_base = 0
    with open(corpus_path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            doc = _parse_document(line, lineno, label_set, tok_base, len(documents))
            if doc.id in seen_ids:
                raise CorpusError(f"corpus line {lineno}: duplicate doc id {doc.id!r}")
            seen_ids.add(doc.id)
            documents.append(doc)
            tok_base += len(doc.tokens)
    if not documents:
        raise CorpusError(f"{corpus_path}: empty corpus")

    n_tokens = tok_base
    stores = {}
    for channel, path, expect in (
        ("emb_a", emb_a_path, n_tokens),
        ("emb_b", emb_b_path, n_tokens),
        ("sent", sent_path, len(documents)),
    ):
        rows = read_embeddings(path, channel)
        if rows.shape[0] != expect:
            raise CorpusError(
                f"{path}: channel {channel!r} has {rows.shape[0]} rows but the "
                f"corpus has {expect} {'tokens' if channel != 'sent' else 'documents'}"
            )
        # normalize once so cosine reduces to a dot product in the hot path
        normed = rows / np.linalg.norm(rows.astype(np.float64), axis=1, keepdims=True)
        stores[channel] = EmbeddingStore(channel=channel, rows=normed.astype(np.float32))

    texts_lower = np.array(
        [t.text.casefold() for d in documents for t in d.tokens], dtype=object)
    pos_tags = np.array([t.pos for d in documents for t in d.tokens], dtype=object)
    dep_tags = np.array([t.dep for d in documents for t in d.tokens], dtype=object)
    ner_tags = np.array([t.ner for d in documents for t in d.tokens], dtype=object)
    lengths = np.array([len(d.tokens) for d in documents], dtype=np.int64)
    doc_offsets = np.concatenate([[0], np.cumsum(lengths)])
    doc_of_token = np.repeat(np.arange(len(documents)), lengths)

    corpus = Corpus(
        label_set=label_set, documents=tuple(documents), stores=stores,
        texts_lower=texts_lower, pos_tags=pos_tags, dep_tags=dep_tags,
        ner_tags=ner_tags, doc_of_token=doc_of_token, doc_offsets=doc_offsets,
    )
    return corpus


def corpus_stats(corpus: Corpus) -> dict:
    """Per-split document counts, mean tokens/doc, and gold class frequencies
    over dev+test tokens."""
    report: dict = {"splits": {}, "n_docs": len(corpus.documents)}
    for split in SPLITS:
        docs = corpus.split_docs(split)
        report["splits"][split] = {
            "docs": len(docs),
            "mean_tokens_per_doc":
                (sum(len(d.tokens) for d in docs) / len(docs)) if docs else None,
        }
    counts: dict[str, int] = {name: 0 for name in corpus.label_set.outputs}
    total = 0
    for d in corpus.documents:
        if d.split in ("dev", "test") and d.gold is not None:
            for g in d.gold:
                counts[g] += 1
                total += 1
    if total == 0:
        report["class_frequencies"] = None
        report["no_gold"] = True
    else:
        report["class_frequencies"] = {k: v / total for k, v in counts.items()}
        report["no_gold"] = False
    return report
