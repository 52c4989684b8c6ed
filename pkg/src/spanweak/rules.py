"""Atomic conditions, labeling functions, and function synthesis.

A labeling function is a window pattern: one set of 1-2 conjoined atomic
conditions per span position. Applying it slides the window over each
document and votes its target class (or "O" for negative-polarity functions)
on every matching span. Synthesis turns a single demonstrated span into a
ranked menu of candidate functions.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import BACKGROUND, Corpus, Document, Token

KINDS = ("TOKEN_EXACT", "SIMILAR_A", "SIMILAR_B", "POS_MATCH", "DEP_MATCH", "NER_MATCH")
TAG_KINDS = ("POS_MATCH", "DEP_MATCH", "NER_MATCH")
LEXSEM_KINDS = ("TOKEN_EXACT", "SIMILAR_A", "SIMILAR_B")
SIMILAR_CHANNEL = {"SIMILAR_A": "emb_a", "SIMILAR_B": "emb_b"}

MAX_SPAN_LEN = 5
MAX_CANDIDATES = 24
DEFAULT_TAU = 0.85


class RuleError(ValueError):
    pass


@dataclass(frozen=True)
class AtomicCondition:
    kind: str
    anchor: str | None = None  # anchor string (token text or tag)
    vec_ref: tuple[str, int] | None = None  # (channel, row) for SIMILAR_*
    tau: float | None = None
    negated: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise RuleError(f"unknown condition kind {self.kind!r}")
        if self.kind in SIMILAR_CHANNEL:
            if self.vec_ref is None or self.tau is None:
                raise RuleError(f"{self.kind} needs vec_ref and tau")
            if not (0.0 < self.tau <= 1.0):
                raise RuleError(f"tau must be in (0, 1], got {self.tau}")
        else:
            if not self.anchor:
                raise RuleError(f"{self.kind} needs a non-empty anchor")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "anchor": self.anchor,
            "vec_ref": None if self.vec_ref is None
            else {"channel": self.vec_ref[0], "row": self.vec_ref[1]},
            "tau": self.tau,
            "negated": self.negated,
        }

    @classmethod
    def from_json(cls, d: dict) -> "AtomicCondition":
        ref = d.get("vec_ref")
        return cls(
            kind=d["kind"], anchor=d.get("anchor"),
            vec_ref=None if ref is None else (ref["channel"], ref["row"]),
            tau=d.get("tau"), negated=bool(d.get("negated", False)),
        )


@dataclass(frozen=True)
class LabelingFunction:
    pattern: tuple[tuple[AtomicCondition, ...], ...]  # per-position conjunctions
    target: str
    polarity: str  # "positive" | "negative"
    provenance: str = ""
    id: str = field(init=False)
    name: str = field(init=False)

    def __post_init__(self):
        if len(self.pattern) < 1:
            raise RuleError("pattern must cover at least one position")
        for conds in self.pattern:
            if not (1 <= len(conds) <= 2):
                raise RuleError("each position takes 1-2 conditions")
        if self.polarity not in ("positive", "negative"):
            raise RuleError(f"bad polarity {self.polarity!r}")
        object.__setattr__(self, "id", lf_id(self))
        object.__setattr__(self, "name", describe(self))

    @property
    def k(self) -> int:
        return len(self.pattern)

    @property
    def vote(self) -> str:
        """Emitted label: the target for positive functions, "O" for negative."""
        return self.target if self.polarity == "positive" else BACKGROUND

    def to_json(self) -> dict:
        return {
            "pattern": [[c.to_json() for c in conds] for conds in self.pattern],
            "target": self.target,
            "polarity": self.polarity,
        }

    @classmethod
    def from_json(cls, d: dict, provenance: str = "") -> "LabelingFunction":
        return cls(
            pattern=tuple(
                tuple(AtomicCondition.from_json(c) for c in conds)
                for conds in d["pattern"]),
            target=d["target"], polarity=d["polarity"], provenance=provenance,
        )


def lf_id(lf: LabelingFunction) -> str:
    """Content hash of the canonical serialization (stable across sessions)."""
    canon = json.dumps(lf.to_json(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _cond_str(c: AtomicCondition) -> str:
    if c.kind == "TOKEN_EXACT":
        body = f'text="{c.anchor}"'
    elif c.kind == "POS_MATCH":
        body = f"pos={c.anchor}"
    elif c.kind == "DEP_MATCH":
        body = f"dep={c.anchor}"
    elif c.kind == "NER_MATCH":
        body = f"ner={c.anchor}"
    else:
        chan = "a" if c.kind == "SIMILAR_A" else "b"
        body = f'sim_{chan}("{c.anchor}")>={c.tau:g}'
    return f"NOT {body}" if c.negated else body


def describe(lf: LabelingFunction) -> str:
    """Deterministic human-readable rendering, e.g. `[text="aspirin"] → Chemical`."""
    positions = "".join(
        "[" + " & ".join(_cond_str(c) for c in conds) + "]" for conds in lf.pattern)
    if lf.polarity == "positive":
        return f"{positions} → {lf.target}"
    return f"{positions} → NOT {lf.target} (O)"


@dataclass(frozen=True)
class SpanAnnotation:
    doc_id: str
    start: int
    end: int  # exclusive
    label: str
    polarity: str = "positive"

    def to_json(self) -> dict:
        return {"doc_id": self.doc_id, "start": self.start, "end": self.end,
                "label": self.label, "polarity": self.polarity}

    @classmethod
    def from_json(cls, d: dict) -> "SpanAnnotation":
        return cls(d["doc_id"], d["start"], d["end"], d["label"],
                   d.get("polarity", "positive"))


@dataclass(frozen=True)
class MatchSpan:
    doc_id: str
    start: int
    end: int
    lf_id: str
    vote: str


def eval_condition(cond: AtomicCondition, token: Token, stores) -> bool:
    """Evaluate one condition on one token. Total: never raises on valid input."""
    if cond.kind == "TOKEN_EXACT":
        base = token.text.casefold() == cond.anchor.casefold()
    elif cond.kind == "POS_MATCH":
        base = token.pos == cond.anchor
    elif cond.kind == "DEP_MATCH":
        base = token.dep == cond.anchor
    elif cond.kind == "NER_MATCH":
        base = bool(token.ner) and token.ner == cond.anchor
    else:
        channel, row = cond.vec_ref
        anchor_vec = stores[channel].vector(row).astype(np.float64)
        tok_row = token.emb_a if channel == "emb_a" else token.emb_b
        tok_vec = stores[channel].vector(tok_row).astype(np.float64)
        # stores are unit-normalized at ingest, so cosine is a dot product
        base = float(np.dot(tok_vec, anchor_vec)) >= cond.tau
    return (not base) if cond.negated else base


def condition_mask(cond: AtomicCondition, corpus: Corpus) -> np.ndarray:
    """Boolean mask over all corpus tokens (file order); vectorized twin of
    eval_condition."""
    if cond.kind == "TOKEN_EXACT":
        base = corpus.texts_lower == cond.anchor.casefold()
    elif cond.kind == "POS_MATCH":
        base = corpus.pos_tags == cond.anchor
    elif cond.kind == "DEP_MATCH":
        base = corpus.dep_tags == cond.anchor
    elif cond.kind == "NER_MATCH":
        base = (corpus.ner_tags != "") & (corpus.ner_tags == cond.anchor)
    else:
        channel, row = cond.vec_ref
        store = corpus.stores[channel]
        sims = store.rows.astype(np.float64) @ store.vector(row).astype(np.float64)
        base = sims >= cond.tau
    base = np.asarray(base, dtype=bool)
    return ~base if cond.negated else base


def start_mask(lf: LabelingFunction, corpus: Corpus) -> np.ndarray:
    """Mask over global token rows: True where a length-k match starts."""
    n = corpus.n_tokens
    k = lf.k
    pos_masks = []
    for conds in lf.pattern:
        m = condition_mask(conds[0], corpus)
        for extra in conds[1:]:
            m &= condition_mask(extra, corpus)
        pos_masks.append(m)
    if k > n:
        return np.zeros(n, dtype=bool)
    starts = np.ones(n, dtype=bool)
    for p, m in enumerate(pos_masks):
        shifted = np.zeros(n, dtype=bool)
        shifted[: n - p] = m[p:] if p else m
        starts &= shifted
    if k > 1:
        # window must not cross a document boundary
        ok = np.zeros(n, dtype=bool)
        ok[: n - (k - 1)] = (
            corpus.doc_of_token[: n - (k - 1)] == corpus.doc_of_token[k - 1:])
        starts &= ok
    return starts


def coverage_mask(lf: LabelingFunction, corpus: Corpus) -> np.ndarray:
    """True for every token covered by at least one match of lf."""
    starts = start_mask(lf, corpus)
    n = corpus.n_tokens
    covered = np.zeros(n, dtype=bool)
    for p in range(lf.k):
        covered[p:] |= starts[: n - p] if p else starts
    return covered


def apply_lf(lf: LabelingFunction, doc: Document, corpus: Corpus) -> list[MatchSpan]:
    """All (possibly overlapping) matches of lf in one document."""
    lo, hi = corpus.token_range(doc.id)
    starts = start_mask(lf, corpus)
    out = []
    for i in range(lo, hi - lf.k + 1):
        if starts[i]:
            out.append(MatchSpan(doc_id=doc.id, start=i - lo, end=i - lo + lf.k,
                                 lf_id=lf.id, vote=lf.vote))
    return out


def doc_coverage(lf: LabelingFunction, corpus: Corpus, split: str = "train") -> int:
    """Number of split documents with at least one match."""
    starts = start_mask(lf, corpus)
    hit_docs = set(corpus.doc_of_token[starts].tolist())
    return sum(1 for i, d in enumerate(corpus.documents)
               if d.split == split and i in hit_docs)


def _condition_menu(token: Token, tau: float) -> list[AtomicCondition]:
    menu = [
        AtomicCondition("TOKEN_EXACT", anchor=token.text),
        AtomicCondition("POS_MATCH", anchor=token.pos) if token.pos else None,
        AtomicCondition("DEP_MATCH", anchor=token.dep) if token.dep else None,
        AtomicCondition("NER_MATCH", anchor=token.ner) if token.ner else None,
        AtomicCondition("SIMILAR_A", anchor=token.text,
                        vec_ref=("emb_a", token.emb_a), tau=tau),
        AtomicCondition("SIMILAR_B", anchor=token.text,
                        vec_ref=("emb_b", token.emb_b), tau=tau),
    ]
    return [c for c in menu if c is not None]


def synthesize(ann: SpanAnnotation, corpus: Corpus,
               tau: float = DEFAULT_TAU) -> list[LabelingFunction]:
    """Candidate labeling functions for one demonstrated span, deduplicated and
    ranked by train-document coverage (desc), ties by name, capped at 24."""
    doc = corpus.doc(ann.doc_id)
    if not (0 <= ann.start < ann.end <= len(doc.tokens)):
        raise RuleError(
            f"span [{ann.start}, {ann.end}) out of bounds for doc {ann.doc_id!r} "
            f"({len(doc.tokens)} tokens)")
    k = ann.end - ann.start
    if k > MAX_SPAN_LEN:
        raise RuleError(
            f"span of {k} tokens exceeds the {MAX_SPAN_LEN}-token limit; "
            "annotate a shorter span")
    if ann.label not in corpus.label_set.classes:
        raise RuleError(f"unknown label {ann.label!r}")
    span_tokens = doc.tokens[ann.start:ann.end]
    menus = [_condition_menu(t, tau) for t in span_tokens]

    candidates: list[LabelingFunction] = []

    def add(pattern):
        candidates.append(LabelingFunction(
            pattern=tuple(tuple(conds) for conds in pattern),
            target=ann.label, polarity=ann.polarity,
            provenance=f"{ann.doc_id}:{ann.start}-{ann.end}"))

    if k == 1:
        menu = menus[0]
        for c in menu:
            add([[c]])
        lexsem = [c for c in menu if c.kind in LEXSEM_KINDS]
        tags = [c for c in menu if c.kind in TAG_KINDS]
        for a in lexsem:
            for b in tags:
                add([[a, b]])
    else:
        by_kind = [{c.kind: c for c in menu} for menu in menus]
        common = set.intersection(*(set(d) for d in by_kind))
        for kind in sorted(common):
            add([[d[kind]] for d in by_kind])
        if "TOKEN_EXACT" not in common:  # guaranteed present, kept for clarity
            add([[d["TOKEN_EXACT"]] for d in by_kind])

    unique: dict[str, LabelingFunction] = {}
    for lf in candidates:
        unique.setdefault(lf.id, lf)
    ranked = sorted(
        unique.values(),
        key=lambda lf: (-doc_coverage(lf, corpus, "train"), lf.name))
    return ranked[:MAX_CANDIDATES]
