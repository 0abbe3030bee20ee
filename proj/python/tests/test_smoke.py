import todforge


def test_normalize_value():
    assert todforge.normalize_value("  Do Not Care ") == "dontcare"
    assert todforge.normalize_value("None") == ""
    assert todforge.normalize_value("Centre  \t Hotel") == "centre hotel"


def test_dedup():
    assert todforge.dedup("cheap cheap cheap cheap ") == "cheap "
    assert todforge.dedup("no repetition here .") == "no repetition here ."


def test_parsers():
    assert todforge.parse_domains('["hotel","train"]') == ["hotel", "train"]
    assert todforge.parse_domains("not json") == []
    assert todforge.parse_state('{"hotel": {"area": "Centre"}}') == {
        "hotel": {"area": "centre"}
    }
    acts = todforge.parse_acts("[hotel] [recommend] name [inform] type stars")
    assert acts == [
        ("hotel", "recommend", ["name"]),
        ("hotel", "inform", ["type", "stars"]),
    ]


def test_metrics():
    refs = ["the cat sat on the mat .", "there are two hotels ."]
    assert todforge.corpus_bleu(refs, refs) == 100.0
    assert todforge.combined(21.41, 94.40, 87.50) == 112.36


def test_pipeline(tmp_path):
    bundle = tmp_path / "bundle"
    todforge.synth_fixtures_to(str(bundle), n=6, seed=7)

    stats = todforge.build_corpus(str(bundle), str(tmp_path / "corpus.jsonl"))
    assert stats["num_samples"] >= 6
    assert stats["total_tokens"] > 0
    again = todforge.corpus_stats_file(str(tmp_path / "corpus.jsonl"))
    assert again == stats

    report = todforge.run_gold_eval(str(bundle))
    assert report["jga"] == 100.0
    assert report["bleu"] == 100.0
    assert report["inform"] == 100.0
    assert report["success"] == 100.0
    assert report["combined"] == 200.0


def test_data_error(tmp_path):
    try:
        todforge.run_gold_eval(str(tmp_path / "nope"))
    except ValueError as e:
        assert "missing file" in str(e)
    else:
        raise AssertionError("expected a DataError")
