import json

import numpy as np
import pytest

from spanweak.labelmodel import ModelError, bio_to_hard
from spanweak.rules import SpanAnnotation, apply_lf, coverage_mask
from spanweak.session import Project, SessionError

from helpers import build_corpus


@pytest.fixture
def project(tmp_path):
    docs = [
        {"id": "t1", "split": "train",
         "tokens": [("took", "VERB", "ROOT", ""), ("aspirin", "NOUN", "dobj", ""),
                    ("daily", "ADV", "advmod", "")]},
        {"id": "t2", "split": "train",
         "tokens": [("aspirin", "NOUN", "nsubj", ""), ("helps", "VERB", "ROOT", "")]},
        {"id": "t3", "split": "train",
         "tokens": [("cats", "NOUN", "nsubj", ""), ("sleep", "VERB", "ROOT", "")]},
        {"id": "d1", "split": "dev",
         "tokens": [("aspirin", "NOUN", "nsubj", ""), ("cures", "VERB", "ROOT", ""),
                    ("headaches", "NOUN", "dobj", "")],
         "gold": ["Chemical", "O", "Disease"]},
        {"id": "d2", "split": "dev",
         "tokens": [("dogs", "NOUN", "nsubj", ""), ("bark", "VERB", "ROOT", "")],
         "gold": ["O", "O"]},
        {"id": "e1", "split": "test",
         "tokens": [("aspirin", "NOUN", "nsubj", ""), ("works", "VERB", "ROOT", "")],
         "gold": ["Chemical", "O"]},
    ]
    corpus, paths = build_corpus(tmp_path, docs)
    return Project(corpus=corpus, corpus_paths=paths, model="majority", seed=1)


def ann_aspirin():
    return SpanAnnotation("t1", 1, 2, "Chemical")


def test_submit_annotation_suggests(project):
    out = project.submit_annotation(ann_aspirin())
    assert 0 < len(out) <= 24
    assert project.annotations == [ann_aspirin()]
    assert not project.selected
    ids = [lf.id for lf, _ in out]
    assert len(set(ids)) == len(ids)


def test_submit_idempotent_suggestions(project):
    first = [lf.id for lf, _ in project.submit_annotation(ann_aspirin())]
    second = [lf.id for lf, _ in project.submit_annotation(ann_aspirin())]
    assert first == second
    assert len(project.annotations) == 2  # log is append-only


def test_preview_coverage_matches_brute_force(project):
    for lf, stats in project.submit_annotation(ann_aspirin()):
        brute = 0
        for doc in project.corpus.split_docs("train"):
            for span in apply_lf(lf, doc, project.corpus):
                brute += span.end - span.start
        # token coverage fraction over the train split
        n_train = sum(len(d.tokens) for d in project.corpus.split_docs("train"))
        covered = coverage_mask(lf, project.corpus)
        rows = project.corpus.split_token_rows("train")
        assert stats["coverage"] == pytest.approx(covered[rows].mean())
        assert covered[rows].sum() <= brute  # overlaps can double-count spans


def test_set_selected(project):
    out = project.submit_annotation(ann_aspirin())
    lf_id = out[0][0].id
    with pytest.raises(SessionError):
        project.set_selected("deadbeef", True)
    project.set_selected(lf_id, True)
    assert project.selected == [lf_id]
    assert project.status() == "none"
    project.set_selected(lf_id, False)
    assert project.selected == []


def test_retrain_and_staleness(project):
    out = project.submit_annotation(ann_aspirin())
    token_lf = next(lf for lf, _ in out if 'text="aspirin"' in lf.name)
    project.set_selected(token_lf.id, True)
    snap = project.retrain()
    assert project.status() == "fresh"
    # aspirin fires on d1 token 0 (gold Chemical): precision 1, recall 1/2
    m = snap.dev_metrics
    assert m.micro_precision == pytest.approx(1.0)
    assert m.micro_recall == pytest.approx(0.5)
    # selecting anything marks the snapshot stale
    other = out[1][0] if out[1][0].id != token_lf.id else out[2][0]
    project.set_selected(other.id, True)
    assert project.status() == "stale"


def test_retrain_empty_selection(project):
    with pytest.raises(ModelError):
        project.retrain()
    assert project.snapshot is None


def test_retrain_deterministic(project):
    out = project.submit_annotation(ann_aspirin())
    project.set_selected(out[0][0].id, True)
    s1 = project.retrain()
    s2 = project.retrain()
    np.testing.assert_array_equal(s1.posteriors_train, s2.posteriors_train)
    assert s1.selected_hash == s2.selected_hash
    assert s1.dev_metrics.to_json() == s2.dev_metrics.to_json()


def test_fp_feedback(project):
    out = project.submit_annotation(ann_aspirin())
    token_lf = next(lf for lf, _ in out if 'text="aspirin"' in lf.name)
    report = project.fp_feedback(token_lf.id)
    assert report.dev_precision == pytest.approx(1.0)
    assert report.dev_false_positives == []
    assert 0 < len(report.train_sample) <= 10
    # a NOUN-matching function votes Chemical on gold-O tokens -> FPs listed
    noun_lf = next(lf for lf, _ in out if lf.name == "[pos=NOUN] → Chemical")
    report = project.fp_feedback(noun_lf.id)
    assert report.dev_false_positives, "expected dev false positives"
    # oracle: brute-force scan of dev matches vs gold
    expect = []
    for doc in project.corpus.split_docs("dev"):
        for span in apply_lf(noun_lf, doc, project.corpus):
            if any(g != noun_lf.vote for g in doc.gold[span.start:span.end]):
                expect.append((doc.id, span.start))
    got = [(fp["doc_id"], fp["start"]) for fp in report.dev_false_positives]
    assert got == sorted(expect)
    with pytest.raises(SessionError):
        project.fp_feedback("nope")


def test_export_contracts(project):
    out = project.submit_annotation(ann_aspirin())
    project.set_selected(out[0][0].id, True)
    with pytest.raises(SessionError, match="retrain"):
        list(project.export("train"))
    project.retrain()
    rows = list(project.export("train"))
    assert len(rows) == len(project.corpus.split_docs("train"))
    outputs = project.corpus.label_set.outputs
    for row in rows:
        for p in row["p"]:
            assert sum(p) == pytest.approx(1.0, abs=1e-6)
        hard_idx = [outputs.index(h) for h in row["hard"]]
        np.testing.assert_array_equal(
            bio_to_hard(row["bio"], outputs), hard_idx)
    # stale export rejected unless forced
    other = out[1][0]
    project.set_selected(other.id, True)
    with pytest.raises(SessionError, match="stale"):
        list(project.export("train"))
    assert list(project.export("train", force=True))


def test_save_load_round_trip(project, tmp_path):
    out = project.submit_annotation(ann_aspirin())
    project.set_selected(out[0][0].id, True)
    project.next_document()
    path = tmp_path / "proj.json"
    project.save(path)
    again = Project.load(path)
    assert again.selected == project.selected
    assert list(again.suggested) == list(project.suggested)
    assert again.annotations == project.annotations
    assert again.sampler_state == project.sampler_state
    assert again.model == project.model
    # deterministic pipelines: metrics equal after reload
    m1 = project.retrain().dev_metrics
    m2 = again.retrain().dev_metrics
    assert m1.to_json() == m2.to_json()


def test_load_version_mismatch(project, tmp_path):
    path = tmp_path / "proj.json"
    project.save(path)
    payload = json.loads(path.read_text())
    payload["version"] = 99
    path.write_text(json.dumps(payload))
    with pytest.raises(SessionError, match="version"):
        Project.load(path)
