import math

import pytest

import newsvec as nv


def test_tfidf_hand_example():
    scores = nv.tfidf([["a", "a", "b"], ["b", "c"]])
    assert scores[0]["a"] == pytest.approx(2 / 3 * math.log(2), abs=1e-15)
    assert scores[0]["b"] == 0.0
    assert nv.tokenize("Rates, rise!") == ["rates", "rise"]


def test_transition_distribution_sums_to_one():
    g = nv.Graph()
    k = [g.add_node(f"k{i}", "news", {"month:1"}) for i in range(2)]
    e = [g.add_node(f"elem:e{i}", "element") for i in range(2)]
    g.add_edge(k[0], e[0], 1.0)
    g.add_edge(k[0], e[1], 3.0)
    g.add_edge(k[1], e[0], 2.0)
    g.finalize()
    probs = nv.transition_distribution(g, e[0], k[0], p=4.0, q=1.0)
    # Return to e0 costs 1/p; e1 is two hops from e0.
    assert probs == pytest.approx([0.25 / 3.25, 3.0 / 3.25])
    walks = nv.sample_walks(g, length=5, walks_per_node=2, seed=3)
    assert len(walks) == 8
    assert walks == nv.sample_walks(g, length=5, walks_per_node=2, seed=3)


def test_swarch_round_trip():
    truth = {"alpha0": 1e-4, "alpha1": 0.1, "gamma_ratio": 3.0, "p11": 0.98, "p22": 0.95}
    returns, regimes = nv.simulate_swarch(truth, 300, seed=5)
    assert set(regimes) <= {1, 2}
    high, low, ll = nv.hamilton_filter(returns, truth)
    assert all(abs(h + l - 1.0) < 1e-12 for h, l in zip(high, low))
    assert math.isfinite(ll)
    assert nv.label_crises([0.2, 0.7, 0.5]) == [0, 1, 1]


def test_metrics():
    assert nv.accuracy([[3, 1], [1, 3]]) == 0.75
    assert nv.mcc([[3, 1], [1, 3]]) == pytest.approx(0.5)
    r = nv.onset_metrics([0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0, 1, 1, 0],
                         [0, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0, 0, 1, 0], 5)
    assert r["avg_days_ahead"] == 2.5
    assert r["percent_forewarned"] == 100.0
    lo, hi = nv.binomial_interval(50, 100)
    assert lo == pytest.approx(0.3983, abs=1e-3) and hi == pytest.approx(0.6017, abs=1e-3)


def test_errors_carry_their_kind(tmp_path):
    c = nv.Config()
    with pytest.raises(nv.NewsvecError) as err:
        c.set("walk.nope", "1")
    assert err.value.kind == "invalid_argument"
    c.set("paths.artifacts", str(tmp_path / "artifacts"))
    with pytest.raises(nv.NewsvecError) as err:
        nv.run_stage("evaluate", c)
    assert err.value.kind == "missing_artifact"


def test_small_pipeline(tmp_path):
    c = nv.Config()
    for key, value in {
        "paths.synth_dir": tmp_path / "data",
        "paths.corpus": tmp_path / "data/corpus.jsonl",
        "paths.returns": tmp_path / "data/returns.csv",
        "paths.lexicon_positive": tmp_path / "data/positive.txt",
        "paths.lexicon_negative": tmp_path / "data/negative.txt",
        "paths.artifacts": tmp_path / "artifacts",
        "synth.docs_per_topic": 40,
        "walk.length": 20,
        "walk.walks_per_node": 2,
        "embed.dim": 8,
        "embed.epochs": 1,
        "swarch.starts": 2,
        "samples.window": 5,
        "predictor.attention_size": 4,
        "predictor.news_hidden": 4,
        "predictor.market_hidden": 4,
        "predictor.epochs": 2,
    }.items():
        c.set(key, str(value))
    reports = nv.run_pipeline(c)
    assert [r["stage"] for r in reports][0] == "synth"
    assert len(reports) == len(nv.stage_names())
    evaluate = next(r for r in reports if r["stage"] == "evaluate")
    assert 0.0 <= evaluate["info"]["accuracy"] <= 1.0
    assert (tmp_path / "artifacts" / "metrics.json").exists()
