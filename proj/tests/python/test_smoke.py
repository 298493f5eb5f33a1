import os
import subprocess

import pytest

import mbrkit


def test_metrics_identity():
    assert mbrkit.chrf_sentence("the cat sat", "the cat sat") == pytest.approx(100.0)
    assert mbrkit.bleu_sentence("the cat sat", "the cat sat") == pytest.approx(100.0)
    corpus = mbrkit.chrf_corpus(["a b c", "d e"], ["a b c", "d e"])
    assert corpus["score"] == pytest.approx(100.0)
    assert corpus["signature"].startswith("chrF2|")
    assert len(corpus["sentences"]) == 2


def test_metrics_match_sacrebleu():
    sacrebleu = pytest.importorskip("sacrebleu")
    hyp, ref = "the quick brown fox jumped", "a quick brown fox jumps over"
    assert mbrkit.chrf_sentence(hyp, ref) == pytest.approx(
        sacrebleu.sentence_chrf(hyp, [ref]).score, abs=1e-9)


def test_mbr_select_picks_consensus():
    result = mbrkit.mbr_select(["the cat sat", "the cat sat down", "zzz"])
    assert result["selected_index"] in (0, 1)
    assert len(result["expected_utilities"]) == 3
    assert result["expected_utilities"][2] < result["expected_utilities"][0]


def test_mbr_decode_and_sweep():
    targets = ["the small cat sat on the mat", "we walked to the old bridge"]
    lists = mbrkit.mock_translate(targets, n=12, noise_rate=0.2, seed=3)
    assert [len(c) for c in lists] == [12, 12]
    assert lists == mbrkit.mock_translate(targets, n=12, noise_rate=0.2, seed=3)
    single = mbrkit.mbr_decode(lists, threads=1)
    multi = mbrkit.mbr_decode(lists, threads=2)
    assert [r["selected_index"] for r in single] == [r["selected_index"] for r in multi]
    rows = mbrkit.sweep(lists, targets, counts=[0, 5, 12])
    assert [r["k"] for r in rows] == [0, 5, 12]
    assert rows[0]["mean_expected_utility"] is None


def test_filter_corpus():
    out = mbrkit.filter_corpus(
        ["hello there friend", "hello there friend", "hi"],
        ["bonjour mon ami", "bonjour mon ami", "salut"],
    )
    assert out["report"]["total"] == 3
    assert out["report"]["dedup_removed"] == 1
    assert out["origin_ids"] == [0]
    with pytest.raises(KeyError):
        mbrkit.filter_corpus(["a"], ["b"], options={"colour": 1})


def test_bootstrap():
    same = [1.0, 2.0, 3.0]
    assert mbrkit.paired_bootstrap(same, same)["p_value"] == 1.0
    better = mbrkit.paired_bootstrap([1.0] * 20, [2.0] * 20, trials=1000)
    assert better["p_value"] == pytest.approx(1 / 1001)
    assert better["generator"] == "mt19937_64"
    results = mbrkit.compare(["a cat"], ["the cat sat"], ["the cat sat"], trials=50)
    assert {r["metric"] for r in results} == {"chrF", "BLEU"}


def test_errors_carry_codes():
    with pytest.raises(mbrkit.MbrkitError) as info:
        mbrkit.chrf_corpus(["a"], ["a", "b"])
    assert info.value.code == "alignment"
    with pytest.raises(mbrkit.MbrkitError) as info:
        mbrkit.mbr_select(["a"], utility="meteor")
    assert info.value.code == "configuration"


def test_run_loop(tmp_path):
    cli = os.environ.get("MBRKIT_CLI")
    if not cli:
        pytest.skip("MBRKIT_CLI not set")
    refs = ["the small cat sat on the mat", "we walked to the old bridge", "it is cold"]
    (tmp_path / "train.src").write_text("".join(f"src {i}\n" for i in range(len(refs))))
    (tmp_path / "refs.tgt").write_text("".join(r + "\n" for r in refs))
    (tmp_path / "train.sh").write_text(
        "while [ $# -gt 0 ]; do [ \"$1\" = --out-dir ] && out=$2; shift 2; done\n"
        "k=$MBRKIT_ITERATION\n"
        "printf 'ckpt-%s\\tchrF\\t5%s\\nckpt-%s\\tscore\\t0.%s\\n' $k $k $k $k > \"$out/checkpoints.tsv\"\n"
    )
    (tmp_path / "loop.conf").write_text(
        "max_iterations = 2\nselection_metric = score\nmonitored_metrics = chrF\n"
        "candidates = 6\ntrain_src = train.src\nbaseline_model = base\n"
        "baseline.chrF = 50\nbaseline.score = 0.5\n"
        "trainer_cmd = sh train.sh\n"
        f"translator_cmd = {cli} mock-translate --target refs.tgt\n"
    )
    result = mbrkit.run_loop(str(tmp_path / "loop.conf"))
    assert result["finished"]
    assert result["iteration"] == 2
    assert result["final_model"] == "ckpt-2"
    assert result["history"]["chrF"] == [50.0, 51.0, 52.0]
    assert (tmp_path / "work" / "iter-2" / "record.json").exists()
