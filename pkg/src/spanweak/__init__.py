"""spanweak: interactive weak supervision for span-level text annotation."""

from .corpus import (Corpus, CorpusError, Document, EmbeddingStore, LabelSet,
                     Token, corpus_stats, cosine, ingest)
from .labelmodel import (ABSTAIN, FitConfig, LabelMatrix, ModelMetrics,
                         build_matrix, evaluate, fit_generative, fit_hmm,
                         fit_majority, hard_labels, lf_stats)
from .rules import (AtomicCondition, LabelingFunction, MatchSpan, RuleError,
                    SpanAnnotation, apply_lf, describe, eval_condition,
                    synthesize)
from .sampler import SamplerState, SessionComplete, next_document
from .session import FPReport, ModelSnapshot, Project, SessionError

__version__ = "0.1.0"
