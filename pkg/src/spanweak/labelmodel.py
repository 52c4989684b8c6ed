"""Label-matrix construction and vote aggregation.

Three aggregators share one vote alphabet (classes + "O" + ABSTAIN) and one
conditionally-independent emission model per labeling function j: when the
true token label equals the function's vote label, the function fires with
probability theta_j, otherwise with probability phi_j. The generative fitter
treats tokens as independent; the HMM fitter links them through a
document-level state chain fitted by Baum-Welch.

Fitting is MAP-EM with Beta(2,2) smoothing on theta/phi and Dirichlet(2) on
the distributions; the recorded trace is the penalized log-likelihood
(log-likelihood + log-prior), which EM never decreases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .corpus import BACKGROUND, Corpus
from .kernels import forward_backward
from .rules import LabelingFunction, coverage_mask

ABSTAIN = -1


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class FitConfig:
    max_iter: int = 100
    tol: float = 1e-6
    init_theta: float = 0.7
    init_phi: float = 0.05
    self_transition: float = 0.9


@dataclass(frozen=True)
class LabelMatrix:
    """Votes of l functions on n tokens: output-space index or ABSTAIN (-1)."""

    entries: np.ndarray  # (n, l) int16
    outputs: tuple[str, ...]  # class names + "O"
    votes: tuple[int, ...]  # fixed vote of each function (output index)
    boundaries: tuple[tuple[str, int, int], ...]  # (doc_id, offset, length)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def l(self) -> int:
        return self.entries.shape[1]

    @property
    def offsets(self) -> np.ndarray:
        offs = [0]
        for _, _, length in self.boundaries:
            offs.append(offs[-1] + length)
        return np.asarray(offs, dtype=np.int64)


def matrix_from_entries(entries, outputs, boundaries=None,
                        strict: bool = True) -> LabelMatrix:
    """Wrap a raw vote array; function votes are inferred per column and must
    be constant (each function emits one fixed label when it fires). With
    strict=False, mixed columns are tolerated (majority voting ignores the
    per-function vote)."""
    entries = np.asarray(entries, dtype=np.int16)
    n, l = entries.shape
    votes = []
    for j in range(l):
        col = entries[:, j]
        fired = np.unique(col[col != ABSTAIN])
        if len(fired) > 1 and strict:
            raise ModelError(f"column {j} mixes votes {fired.tolist()}")
        votes.append(int(fired[0]) if len(fired) else len(outputs) - 1)
    if boundaries is None:
        boundaries = (("doc", 0, n),)
    return LabelMatrix(entries=entries, outputs=tuple(outputs),
                       votes=tuple(votes), boundaries=tuple(boundaries))


def build_matrix(corpus: Corpus, selected_lfs: list[LabelingFunction],
                 split: str = "train") -> LabelMatrix:
    """M[i][j] = vote of function j wherever one of its matches covers token i."""
    if not selected_lfs:
        raise ModelError("no labeling functions selected")
    outputs = corpus.label_set.outputs
    docs = [(i, d) for i, d in enumerate(corpus.documents) if d.split == split]
    rows = corpus.split_token_rows(split)
    n = len(rows)
    entries = np.full((n, len(selected_lfs)), ABSTAIN, dtype=np.int16)
    votes = []
    for j, lf in enumerate(selected_lfs):
        vote_idx = corpus.label_set.output_index(lf.vote)
        votes.append(vote_idx)
        covered = coverage_mask(lf, corpus)[rows]
        entries[covered, j] = vote_idx
    boundaries = []
    offset = 0
    for _, d in docs:
        boundaries.append((d.id, offset, len(d.tokens)))
        offset += len(d.tokens)
    return LabelMatrix(entries=entries, outputs=outputs, votes=tuple(votes),
                       boundaries=tuple(boundaries))


def fit_majority(M: LabelMatrix) -> np.ndarray:
    """Posterior = empirical distribution of non-abstain votes per token;
    all-abstain tokens put full mass on the background class."""
    K = len(M.outputs)
    counts = np.zeros((M.n, K))
    for y in range(K):
        counts[:, y] = (M.entries == y).sum(axis=1)
    total = counts.sum(axis=1)
    P = np.zeros((M.n, K))
    silent = total == 0
    P[silent, K - 1] = 1.0
    if np.any(~silent):
        P[~silent] = counts[~silent] / total[~silent, None]
    return P


def _derive_fires(M: LabelMatrix):
    F = np.asarray(M.entries != ABSTAIN)
    votes = np.asarray(M.votes, dtype=np.int64)
    fired = M.entries[F]
    expect = np.broadcast_to(votes, M.entries.shape)[F]
    if fired.size and not np.array_equal(fired, expect):
        raise ModelError("matrix entries disagree with per-function votes")
    return F.astype(np.float64), votes


def _emission_loglik(F, votes, theta, phi, K):
    """(n, K) log P(fire pattern of token i | Y = y) under the per-function
    two-rate model."""
    a1, a0 = np.log(theta), np.log1p(-theta)
    b1, b0 = np.log(phi), np.log1p(-phi)
    notF = 1.0 - F
    base = F @ b1 + notF @ b0
    L = np.repeat(base[:, None], K, axis=1)
    for y in range(K):
        js = votes == y
        if js.any():
            L[:, y] += F[:, js] @ (a1[js] - b1[js]) + notF[:, js] @ (a0[js] - b0[js])
    return L


def _rate_logprior(theta, phi):
    # Beta(2,2) on every rate
    return float(np.log(theta).sum() + np.log1p(-theta).sum()
                 + np.log(phi).sum() + np.log1p(-phi).sum())


def _update_rates(F, votes, gamma):
    """MAP M-step for per-function hit and false-fire rates."""
    l = F.shape[1]
    theta = np.empty(l)
    phi = np.empty(l)
    for j in range(l):
        g = gamma[:, votes[j]]
        fj = F[:, j]
        theta[j] = (1.0 + g @ fj) / (2.0 + g.sum())
        phi[j] = (1.0 + (1.0 - g) @ fj) / (2.0 + (1.0 - g).sum())
    return theta, phi


@dataclass
class GenerativeParams:
    outputs: tuple[str, ...]
    votes: tuple[int, ...]
    theta: np.ndarray
    phi: np.ndarray
    pi: np.ndarray
    trace: list[float] = field(default_factory=list)


def fit_generative(M: LabelMatrix,
                   config: FitConfig = FitConfig()) -> tuple[GenerativeParams, np.ndarray]:
    F, votes = _derive_fires(M)
    K = len(M.outputs)
    n = M.n
    theta = np.full(M.l, config.init_theta)
    phi = np.full(M.l, config.init_phi)
    pi = np.full(K, 1.0 / K)
    trace: list[float] = []

    def e_step():
        L = _emission_loglik(F, votes, theta, phi, K) + np.log(pi)
        ll = logsumexp(L, axis=1)
        gamma = np.exp(L - ll[:, None])
        obj = float(ll.sum()) + _rate_logprior(theta, phi) + float(np.log(pi).sum())
        return gamma, obj

    for _ in range(config.max_iter):
        gamma, obj = e_step()
        if trace and obj - trace[-1] < config.tol:
            trace.append(obj)
            break
        trace.append(obj)
        theta, phi = _update_rates(F, votes, gamma)
        pi = (1.0 + gamma.sum(axis=0)) / (K + n)
    else:
        # keep the published posterior consistent with the final parameters
        gamma, obj = e_step()
        trace.append(obj)
    params = GenerativeParams(outputs=M.outputs, votes=M.votes,
                              theta=theta, phi=phi, pi=pi, trace=trace)
    return params, gamma


def apply_generative(params: GenerativeParams, M: LabelMatrix) -> np.ndarray:
    """Posterior over a new matrix (same functions) with frozen parameters."""
    F, votes = _derive_fires(M)
    K = len(params.outputs)
    L = _emission_loglik(F, votes, params.theta, params.phi, K) + np.log(params.pi)
    return np.exp(L - logsumexp(L, axis=1)[:, None])


@dataclass
class HmmParams:
    outputs: tuple[str, ...]
    votes: tuple[int, ...]
    mu: np.ndarray
    T: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    trace: list[float] = field(default_factory=list)


def _init_transitions(K: int, self_transition: float) -> np.ndarray:
    if K == 1:
        return np.ones((1, 1))
    T = np.full((K, K), (1.0 - self_transition) / (K - 1))
    np.fill_diagonal(T, self_transition)
    return T


def posterior_marginals(mu, T, logB, offsets) -> tuple[np.ndarray, float]:
    """Per-token state posteriors and total log-likelihood for fixed
    parameters, via scaled forward-backward."""
    logB = np.asarray(logB, dtype=np.float64)
    shift = logB.max(axis=1)
    b = np.exp(logB - shift[:, None])
    gamma, _, ll = forward_backward(b, mu, T, np.asarray(offsets, dtype=np.int64))
    return gamma, float(ll + shift.sum())


def fit_hmm(M: LabelMatrix, config: FitConfig = FitConfig()) -> tuple[HmmParams, np.ndarray]:
    F, votes = _derive_fires(M)
    K = len(M.outputs)
    offsets = M.offsets
    n_segments = len(offsets) - 1
    mu = np.full(K, 1.0 / K)
    T = _init_transitions(K, config.self_transition)
    theta = np.full(M.l, config.init_theta)
    phi = np.full(M.l, config.init_phi)
    trace: list[float] = []

    def e_step():
        logB = _emission_loglik(F, votes, theta, phi, K)
        shift = logB.max(axis=1)
        b = np.exp(logB - shift[:, None])
        gamma, xi_sum, ll = forward_backward(b, mu, T, offsets)
        obj = (float(ll + shift.sum()) + _rate_logprior(theta, phi)
               + float(np.log(mu).sum() + np.log(T).sum()))
        return gamma, xi_sum, obj

    for _ in range(config.max_iter):
        gamma, xi_sum, obj = e_step()
        if trace and obj - trace[-1] < config.tol:
            trace.append(obj)
            break
        trace.append(obj)
        first = gamma[offsets[:-1]]
        mu = (1.0 + first.sum(axis=0)) / (K + n_segments)
        if xi_sum.sum() > 0:
            T = (1.0 + xi_sum) / (K + xi_sum.sum(axis=1))[:, None]
        theta, phi = _update_rates(F, votes, gamma)
    else:
        gamma, xi_sum, obj = e_step()
        trace.append(obj)
    params = HmmParams(outputs=M.outputs, votes=M.votes, mu=mu, T=T,
                       theta=theta, phi=phi, trace=trace)
    return params, gamma


def apply_hmm(params: HmmParams, M: LabelMatrix) -> np.ndarray:
    F, votes = _derive_fires(M)
    K = len(params.outputs)
    logB = _emission_loglik(F, votes, params.theta, params.phi, K)
    gamma, _ = posterior_marginals(params.mu, params.T, logB, M.offsets)
    return gamma


def hard_labels(P: np.ndarray) -> np.ndarray:
    """Argmax labels with deterministic ties: background ("O", last column)
    wins any tie it is part of; otherwise the lowest class index wins."""
    P = np.asarray(P, dtype=np.float64)
    top = P.max(axis=1)
    tied = P >= top[:, None] - 1e-12
    out = tied.argmax(axis=1)
    out[tied[:, -1]] = P.shape[1] - 1
    return out


@dataclass(frozen=True)
class ModelMetrics:
    per_class: dict[str, dict[str, float]]
    micro_precision: float
    micro_recall: float
    micro_f1: float

    def to_json(self) -> dict:
        return {"per_class": self.per_class,
                "micro_precision": self.micro_precision,
                "micro_recall": self.micro_recall,
                "micro_f1": self.micro_f1}


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def evaluate(P: np.ndarray, gold: np.ndarray, outputs: tuple[str, ...]) -> ModelMetrics:
    """Token-level precision/recall/F1 per entity class and micro-averaged
    over the non-background classes."""
    pred = hard_labels(P)
    gold = np.asarray(gold, dtype=np.int64)
    if pred.shape != gold.shape:
        raise ModelError(f"prediction/gold length mismatch: {pred.shape} vs {gold.shape}")
    per_class = {}
    tp_sum = fp_sum = fn_sum = 0
    for c, name in enumerate(outputs[:-1]):
        tp = int(np.sum((pred == c) & (gold == c)))
        fp = int(np.sum((pred == c) & (gold != c)))
        fn = int(np.sum((pred != c) & (gold == c)))
        prec = _safe_div(tp, tp + fp)
        rec = _safe_div(tp, tp + fn)
        per_class[name] = {
            "precision": prec, "recall": rec,
            "f1": _safe_div(2 * prec * rec, prec + rec),
        }
        tp_sum += tp
        fp_sum += fp
        fn_sum += fn
    mp = _safe_div(tp_sum, tp_sum + fp_sum)
    mr = _safe_div(tp_sum, tp_sum + fn_sum)
    return ModelMetrics(per_class=per_class, micro_precision=mp, micro_recall=mr,
                        micro_f1=_safe_div(2 * mp * mr, mp + mr))


@dataclass(frozen=True)
class LFStats:
    coverage: float
    dev_precision: float | None  # None = no dev votes ("no dev evidence")
    dev_votes: int
    conflict_rate: float

    def to_json(self) -> dict:
        return {"coverage": self.coverage, "dev_precision": self.dev_precision,
                "dev_votes": self.dev_votes, "conflict_rate": self.conflict_rate}


def lf_stats(M: LabelMatrix, M_dev: LabelMatrix | None,
             gold_dev: np.ndarray | None) -> list[LFStats]:
    """Per-function train coverage, dev precision, and conflict rate against
    the other functions in M."""
    F = M.entries != ABSTAIN
    out = []
    for j in range(M.l):
        coverage = float(F[:, j].mean()) if M.n else 0.0
        fired = F[:, j]
        conflicts = 0
        if fired.any():
            others = np.delete(M.entries[fired], j, axis=1)
            disagree = (others != ABSTAIN) & (others != M.votes[j])
            conflicts = int(disagree.any(axis=1).sum())
        conflict_rate = _safe_div(conflicts, int(fired.sum()))
        dev_precision = None
        dev_votes = 0
        if M_dev is not None and gold_dev is not None:
            fd = M_dev.entries[:, j] != ABSTAIN
            dev_votes = int(fd.sum())
            if dev_votes:
                hits = int(np.sum(np.asarray(gold_dev)[fd] == M_dev.votes[j]))
                dev_precision = hits / dev_votes
        out.append(LFStats(coverage=coverage, dev_precision=dev_precision,
                           dev_votes=dev_votes, conflict_rate=conflict_rate))
    return out


def to_bio(hard: np.ndarray, outputs: tuple[str, ...]) -> list[str]:
    """B-/I-/O encoding of hard labels, merging contiguous same-class runs."""
    o_idx = len(outputs) - 1
    bio = []
    prev = o_idx
    for idx in hard:
        idx = int(idx)
        if idx == o_idx:
            bio.append(BACKGROUND)
        elif idx == prev:
            bio.append(f"I-{outputs[idx]}")
        else:
            bio.append(f"B-{outputs[idx]}")
        prev = idx
    return bio


def bio_to_hard(bio: list[str], outputs: tuple[str, ...]) -> np.ndarray:
    """Inverse of to_bio (up to the B/I distinction)."""
    name_to_idx = {name: i for i, name in enumerate(outputs)}
    out = []
    for tag in bio:
        if tag == BACKGROUND:
            out.append(len(outputs) - 1)
        else:
            out.append(name_to_idx[tag[2:]])
    return np.asarray(out, dtype=np.int64)
