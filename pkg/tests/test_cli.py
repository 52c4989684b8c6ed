import json

import pytest
from click.testing import CliRunner

from spanweak import synthetic
from spanweak.cli import DictionaryTagger, gold_spans, main
from spanweak.corpus import Document, Token
from spanweak.rules import SpanAnnotation
from spanweak.session import Project

from helpers import build_corpus


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def small(tmp_path):
    docs = [
        {"id": "t0", "split": "train",
         "tokens": [("took", "VERB", "ROOT", ""), ("aspirin", "NOUN", "dobj", "")]},
        {"id": "t1", "split": "train",
         "tokens": [("aspirin", "NOUN", "nsubj", ""), ("helps", "VERB", "ROOT", "")]},
        {"id": "d0", "split": "dev",
         "tokens": [("aspirin", "NOUN", "nsubj", ""), ("cures", "VERB", "ROOT", ""),
                    ("headaches", "NOUN", "dobj", "")],
         "gold": ["Chemical", "O", "Disease"]},
        {"id": "e0", "split": "test",
         "tokens": [("aspirin", "NOUN", "nsubj", ""), ("works", "VERB", "ROOT", "")],
         "gold": ["Chemical", "O"]},
    ]
    corpus, paths = build_corpus(tmp_path, docs)
    return corpus, paths


def ingest_args(paths, out):
    return ["ingest", "--corpus", paths["corpus"], "--emb-a", paths["emb_a"],
            "--emb-b", paths["emb_b"], "--sent", paths["sent"],
            "--labels", paths["labels"], "--out", str(out)]


def test_ingest_writes_project_and_stats(runner, small, tmp_path):
    _, paths = small
    out = tmp_path / "proj.json"
    result = runner.invoke(main, ingest_args(paths, out))
    assert result.exit_code == 0, result.output
    assert "documents: 4" in result.output
    assert "train: 2 docs" in result.output.replace("  ", " ")
    assert "class frequencies" in result.output
    payload = json.loads(out.read_text())
    assert payload["version"] == 1
    assert payload["labels"] == ["Chemical", "Disease"]


def test_ingest_missing_file(runner, small, tmp_path):
    _, paths = small
    bad = dict(paths, corpus=str(tmp_path / "nope.jsonl"))
    result = runner.invoke(main, ingest_args(bad, tmp_path / "p.json"))
    assert result.exit_code == 2


def project_with_selection(small, model="majority"):
    corpus, paths = small
    project = Project(corpus=corpus, corpus_paths=paths, model=model, seed=1)
    out = project.submit_annotation(SpanAnnotation("t0", 1, 2, "Chemical"))
    lf = next(l for l, _ in out if l.name == '[text="aspirin"] → Chemical')
    project.set_selected(lf.id, True)
    return project


def test_apply_without_selection(runner, small, tmp_path):
    corpus, paths = small
    proj_path = tmp_path / "p.json"
    Project(corpus=corpus, corpus_paths=paths, model="majority").save(proj_path)
    result = runner.invoke(main, ["apply", "--project", str(proj_path),
                                  "--out", str(tmp_path / "out.jsonl")])
    assert result.exit_code == 3
    assert "no selected" in result.output


def test_apply_and_evaluate(runner, small, tmp_path):
    _, paths = small
    project = project_with_selection(small)
    proj_path = tmp_path / "p.json"
    project.save(proj_path)
    snap = project.retrain()

    export = tmp_path / "dev.jsonl"
    result = runner.invoke(main, ["apply", "--project", str(proj_path),
                                  "--split", "dev", "--out", str(export)])
    assert result.exit_code == 0, result.output
    rows = [json.loads(l) for l in export.read_text().splitlines()]
    assert len(rows) == 1 and rows[0]["id"] == "d0"

    result = runner.invoke(main, [
        "evaluate", "--pred", str(export), "--gold", paths["corpus"],
        "--labels", paths["labels"]])
    assert result.exit_code == 0, result.output
    # CLI evaluation of the export reproduces the snapshot's dev metrics
    m = snap.dev_metrics
    assert f"micro: P={m.micro_precision:.4f} R={m.micro_recall:.4f} " \
           f"F1={m.micro_f1:.4f}" in result.output


def test_evaluate_identical_and_all_background(runner, small, tmp_path):
    _, paths = small
    perfect = tmp_path / "perfect.jsonl"
    allo = tmp_path / "allo.jsonl"
    with open(paths["corpus"]) as f:
        docs = [json.loads(l) for l in f if l.strip()]
    with open(perfect, "w") as fp, open(allo, "w") as fo:
        for doc in docs:
            if "gold" not in doc:
                continue
            texts = [t["text"] for t in doc["tokens"]]
            fp.write(json.dumps({"id": doc["id"], "tokens": texts,
                                 "hard": doc["gold"]}) + "\n")
            fo.write(json.dumps({"id": doc["id"], "tokens": texts,
                                 "hard": ["O"] * len(texts)}) + "\n")
    args = ["evaluate", "--gold", paths["corpus"], "--labels", paths["labels"]]
    result = runner.invoke(main, args + ["--pred", str(perfect)])
    assert result.exit_code == 0
    assert "micro: P=1.0000 R=1.0000 F1=1.0000" in result.output
    result = runner.invoke(main, args + ["--pred", str(allo)])
    assert result.exit_code == 0
    assert "F1=0.0000" in result.output


def test_evaluate_length_mismatch(runner, small, tmp_path):
    _, paths = small
    bad = tmp_path / "bad.jsonl"
    bad.write_text(json.dumps({"id": "d0", "tokens": ["x"],
                               "hard": ["O"]}) + "\n")
    result = runner.invoke(main, ["evaluate", "--pred", str(bad),
                                  "--gold", paths["corpus"],
                                  "--labels", paths["labels"]])
    assert result.exit_code == 2


def test_gold_spans():
    doc = Document(id="x", split="dev",
                   tokens=tuple(Token(t, "", "", "", i, i)
                                for i, t in enumerate("abcdef")),
                   gold=("O", "Chemical", "Chemical", "O", "Disease", "Chemical"),
                   sent_emb=0)
    assert gold_spans(doc) == [(1, 3, "Chemical"), (4, 5, "Disease"),
                               (5, 6, "Chemical")]


def test_dictionary_tagger_longest_match_first():
    tagger = DictionaryTagger()
    tagger.learn(["lung", "cancer"], "Disease")
    tagger.learn(["cancer"], "Disease")
    tagger.learn(["aspirin"], "Chemical")
    outputs = ("Chemical", "Disease", "O")
    tags = tagger.tag(["Lung", "Cancer", "loves", "Aspirin"], outputs)
    assert list(tags) == [1, 1, 2, 0]


@pytest.fixture(scope="module")
def synth_project(tmp_path_factory):
    root = tmp_path_factory.mktemp("synthcli")
    spec = synthetic.SyntheticSpec(n_train=40, n_dev=12, n_test=12)
    paths = synthetic.generate(root, seed=5, spec=spec)
    return root, paths


def test_simulate_budget_and_determinism(runner, synth_project, tmp_path):
    root, paths = synth_project
    proj_path = tmp_path / "p.json"
    result = runner.invoke(main, ingest_args(paths, proj_path) +
                           ["--model", "majority"])
    assert result.exit_code == 0, result.output

    empty = tmp_path / "empty.csv"
    result = runner.invoke(main, ["simulate", "--project", str(proj_path),
                                  "--budget", "0", "--out", str(empty)])
    assert result.exit_code == 0, result.output
    assert empty.read_text() == \
        "interaction,elapsed_proxy,n_lfs,dev_f1,test_f1,baseline_f1\n"

    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        result = runner.invoke(main, [
            "simulate", "--project", str(proj_path), "--budget", "5",
            "--seed", "11", "--out", str(out)])
        assert result.exit_code == 0, result.output
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    lines = outs[0].decode().splitlines()
    assert len(lines) == 6
    last = lines[-1].split(",")
    assert int(last[0]) == 5
    assert float(last[4]) > 0.0  # test F1 after 5 interactions


def test_synth_command(runner, tmp_path):
    result = runner.invoke(main, ["synth", "--out-dir", str(tmp_path / "s"),
                                  "--seed", "2", "--train", "6",
                                  "--dev", "3", "--test", "3"])
    assert result.exit_code == 0, result.output
    corpus_line = next(l for l in result.output.splitlines()
                       if l.startswith("corpus:"))
    path = corpus_line.split(": ", 1)[1]
    docs = [json.loads(l) for l in open(path) if l.strip()]
    assert len(docs) == 12
