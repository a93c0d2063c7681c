import json
import os
import subprocess

import pytest

import egcr


@pytest.fixture(scope="module")
def planted(tmp_path_factory):
    root = tmp_path_factory.mktemp("planted")
    corpus = root / "corpus"
    egcr.synth(corpus, dialogs=80, seed=7)
    summary = egcr.ingest(corpus / "triples.tsv", corpus / "entities.jsonl", root / "model",
                          reviews=corpus / "reviews.jsonl")
    assert summary["items"] == 50
    fitted = egcr.fit(root / "model", corpus / "train.jsonl", root / "fitted")
    assert fitted["used_examples"] > 0
    return corpus, root / "fitted"


def first_item_name(corpus):
    with open(corpus / "entities.jsonl") as f:
        for line in f:
            e = json.loads(line)
            if e["id"] == 1:
                return e["name"]
    raise AssertionError("item 1 missing")


def test_metrics():
    assert egcr.tokenize("Hello, World!") == ["hello", ",", "world", "!"]
    assert egcr.distinct_n([["a", "b", "a", "b"]], 2) == pytest.approx(2 / 3)
    same = [["the", "cat", "sat", "on", "the", "mat"]]
    assert egcr.bleu(same, same) == pytest.approx(1.0)
    assert egcr.corpus_recall([1, 0, 1, 0]) == pytest.approx(0.5)


def test_evaluate_recovers_planted_pairs(planted):
    corpus, model = planted
    report = egcr.evaluate(model, corpus / "test.jsonl", ks=[1, 10])
    assert report["recall_1"] >= 0.9
    assert report["recall_1"] <= report["recall_10"]


def test_engine_recommend_and_act(planted):
    corpus, model = planted
    engine = egcr.Engine.load(model)
    name = first_item_name(corpus)
    turns = [("seeker", f"I really liked {name}.")]
    ranked = engine.recommend(turns, k=5)
    assert len(ranked) == 5
    scores = [s for _, _, s in ranked]
    assert scores == sorted(scores, reverse=True)
    assert 1 not in [i for i, _, _ in ranked]

    action = engine.act(turns)
    assert action["source"] == "fallback"
    assert action["explanation"]
    assert action["recommendations"][0][0] == ranked[0][0]


def test_service_round_trip(planted, tmp_path):
    corpus, model = planted
    service = egcr.Service(egcr.Engine.load(model), sessions=tmp_path)
    sid = service.create_session()
    result = service.post_turn(sid, f"Anything like {first_item_name(corpus)}?")
    assert result["turn_index"] == 1
    assert len(service.transcript(sid)) == 2
    with pytest.raises(egcr.ValidationError):
        service.post_turn(sid, "   ")
    with pytest.raises(egcr.NotFoundError):
        service.post_turn("missing", "hi")

    empty = egcr.Service(None)
    with pytest.raises(egcr.ModelNotLoadedError):
        empty.post_turn(empty.create_session(), "hi")


def test_cli_help():
    cli = os.environ.get("EGCR_CLI")
    if not cli:
        pytest.skip("EGCR_CLI not set")
    out = subprocess.run([cli, "--help"], capture_output=True, text=True, check=True).stdout
    for command in ("ingest", "fit", "eval", "serve"):
        assert command in out
