import itertools
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_split
from oracles import (
    bertscore_dense,
    bleu_brute,
    lcs_brute,
    rouge_l_brute,
    rouge_n_brute,
    token_f1_brute,
)
from slmadapt.errors import BackendError
from slmadapt.metrics import (
    HashEmbedder,
    HeldOutGold,
    MetricReport,
    OrthogonalEmbedder,
    PredictionMismatch,
    bert_score,
    bleu,
    evaluate_split,
    lcs_length,
    qa_f1,
    read_predictions,
    rouge_l,
    rouge_n,
    token_f1,
    write_predictions,
)
from slmadapt.metrics.bertscore import pair_bert_score
from slmadapt.metrics.evaluate import per_example_csv, per_example_jsonl
from slmadapt.metrics.lexical import BleuStats, bleu_from_stats, bleu_stats

seqs = st.lists(st.sampled_from("abcd"), max_size=8)


# --- ROUGE ------------------------------------------------------------------


def test_rouge_l_hand_example():
    s = rouge_l("a b c d".split(), "a c b d".split())
    assert s.fmeasure == pytest.approx(0.75, abs=1e-12)
    assert (s.precision, s.recall) == (0.75, 0.75)


def test_rouge_n_hand_examples():
    assert rouge_n("the cat sat".split(), "the cat".split(), 1) == (2 / 3, 1.0, 0.8)
    s = rouge_n("a a a".split(), "a b".split(), 1)
    assert s.precision == pytest.approx(1 / 3)
    assert rouge_n("a b".split(), "b a".split(), 2).fmeasure == 0.0


def test_rouge_empty_and_bad_order():
    assert tuple(rouge_l([], ["a"])) == (0.0, 0.0, 0.0)
    assert tuple(rouge_n(["a"], ["a"], 2)) == (0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        rouge_n(["a"], ["a"], 0)


def test_lcs_exhaustive_small():
    # every pair of sequences over {a,b,c} with combined length <= 6
    by_len = {n: list(itertools.product("abc", repeat=n)) for n in range(7)}
    for la in range(7):
        for lb in range(7 - la):
            for a in by_len[la]:
                for b in by_len[lb]:
                    assert lcs_length(a, b) == lcs_brute(a, b)


@settings(max_examples=300, deadline=None)
@given(seqs, seqs)
def test_rouge_matches_oracles(a, b):
    assert tuple(rouge_l(a, b)) == rouge_l_brute(a, b)
    for n in (1, 2, 3):
        assert tuple(rouge_n(a, b, n)) == rouge_n_brute(a, b, n)


@settings(max_examples=200, deadline=None)
@given(seqs, seqs)
def test_rouge_bounds_and_symmetry(a, b):
    for s in (rouge_l(a, b), rouge_n(a, b, 1), rouge_n(a, b, 2)):
        assert all(0.0 <= x <= 1.0 for x in s)
    assert rouge_l(a, b).fmeasure == pytest.approx(rouge_l(b, a).fmeasure)
    assert rouge_n(a, b, 1).fmeasure == pytest.approx(rouge_n(b, a, 1).fmeasure)
    if a:
        assert rouge_l(a, a).fmeasure == 1.0


# --- BLEU -------------------------------------------------------------------


def test_bleu_unigram_brevity_rule():
    # prediction longer than reference: no brevity penalty, clipped precision 1/3
    assert bleu([["the"] * 3], [["the", "cat"]], max_n=1) == pytest.approx(1 / 3, abs=1e-12)
    # prediction shorter than reference is penalised
    assert bleu([["the"]], [["the", "cat"]], max_n=1) == pytest.approx(math.exp(1 - 2), abs=1e-12)


def test_bleu_identity_and_zero():
    corpus = ["a b c d e".split(), "x y z w".split()]
    assert bleu(corpus, corpus) == pytest.approx(1.0)
    assert bleu([["a", "b"]], [["c", "d"]]) == 0.0
    # too short for 4-grams and unsmoothed
    assert bleu([["a", "b"]], [["a", "b"]]) == 0.0


def test_bleu_epsilon_smoothing():
    stats = bleu_stats("a b c".split(), "a b d".split(), 4)
    assert stats.matches == (2, 1, 0, 0)
    assert bleu_from_stats(stats) == 0.0
    # the 4-gram order has zero candidates, so even smoothing cannot rescue it
    assert bleu_from_stats(stats, "epsilon") == 0.0
    s3 = BleuStats(3, 3, stats.matches[:3], stats.totals[:3])
    expected = ((2 / 3) * (1 / 2) * (0.1 / 1)) ** (1 / 3)
    assert bleu_from_stats(s3, "epsilon") == pytest.approx(expected, abs=1e-12)
    with pytest.raises(ValueError):
        bleu_from_stats(stats, "laplace")


def test_bleu_pools_counts_rather_than_averaging():
    preds = [["a", "b"], ["c", "x", "y", "z"]]
    refs = [["a", "b"], ["c", "d", "e", "f"]]
    pooled = bleu(preds, refs, max_n=1)
    assert pooled == pytest.approx(3 / 6)
    mean_of_sentences = (bleu(preds[:1], refs[:1], max_n=1) + bleu(preds[1:], refs[1:], max_n=1)) / 2
    assert pooled != pytest.approx(mean_of_sentences)


def test_bleu_input_errors():
    with pytest.raises(ValueError):
        bleu([["a"]], [])
    with pytest.raises(ValueError):
        bleu([], [])


def test_bleu_random_corpora_against_oracle():
    rng = random.Random(7)
    for _ in range(200):
        n_sent = rng.randint(1, 5)
        preds = [[rng.choice("abcde") for _ in range(rng.randint(0, 9))] for _ in range(n_sent)]
        refs = [[rng.choice("abcde") for _ in range(rng.randint(1, 9))] for _ in range(n_sent)]
        for max_n in (1, 2, 4):
            assert bleu(preds, refs, max_n=max_n) == pytest.approx(bleu_brute(preds, refs, max_n), abs=1e-12)


# --- QA-F1 ------------------------------------------------------------------


def test_qa_f1_examples():
    assert qa_f1("नई दिल्ली", ["दिल्ली"]) == pytest.approx(2 / 3, abs=1e-12)
    assert qa_f1("दिल्ली।", ["दिल्ली"]) == 1.0
    assert qa_f1("", [""]) == 1.0
    assert qa_f1("कुछ", [""]) == 0.0
    assert qa_f1("", ["कुछ"]) == 0.0
    assert qa_f1("गंगा नदी", ["यमुना", "गंगा नदी"]) == 1.0
    with pytest.raises(ValueError):
        qa_f1("x", [])


def test_qa_f1_naive_tokenization_differs():
    assert qa_f1("दिल्ली।", ["दिल्ली"], naive=True) == 0.0


@settings(max_examples=300, deadline=None)
@given(seqs, seqs)
def test_token_f1_oracle_and_properties(a, b):
    f = token_f1(a, b)
    assert f == pytest.approx(token_f1_brute(a, b))
    assert 0.0 <= f <= 1.0
    assert f == token_f1(b, a)
    rng = random.Random(len(a))
    shuffled = list(a)
    rng.shuffle(shuffled)
    assert token_f1(shuffled, b) == f


# --- BERTScore --------------------------------------------------------------


def test_bertscore_identity_is_one():
    s = bert_score(["गंगा घाट पर आरती"], ["गंगा घाट पर आरती"], HashEmbedder())
    assert s.f1 == pytest.approx(1.0, abs=1e-12)


def test_bertscore_disjoint_orthogonal_is_zero():
    s = bert_score(["a b"], ["c d e"], OrthogonalEmbedder())
    assert tuple(s) == (0.0, 0.0, 0.0)


def test_bertscore_orthogonal_partial_overlap():
    # one of two prediction tokens matches, one of three reference tokens matches
    s = pair_bert_score(["a", "x"], ["a", "b", "c"], OrthogonalEmbedder())
    assert s.precision == pytest.approx(1 / 2)
    assert s.recall == pytest.approx(1 / 3)
    assert s.f1 == pytest.approx(0.4)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from("abcdef"), min_size=1, max_size=6), st.lists(st.sampled_from("abcdef"), min_size=1, max_size=6))
def test_bertscore_matches_dense_oracle(a, b):
    emb = HashEmbedder(dim=16, salt="t")
    got = pair_bert_score(a, b, emb)
    want = bertscore_dense(emb.embed(a).tolist(), emb.embed(b).tolist())
    assert tuple(got) == pytest.approx(want, abs=1e-12)
    assert all(0.0 <= x <= 1.0 + 1e-12 for x in got)


def test_embedder_errors_are_backend_errors():
    class Broken:
        dim = 4

        def embed(self, tokens):
            raise RuntimeError("gpu on fire")

    class WrongShape:
        dim = 4

        def embed(self, tokens):
            return np.zeros((len(tokens), 3))

    for emb in (Broken(), WrongShape()):
        with pytest.raises(BackendError):
            pair_bert_score(["a"], ["b"], emb)
    with pytest.raises(BackendError):
        OrthogonalEmbedder(dim=2).embed(["a", "b", "c"])


def test_hash_embedder_is_deterministic():
    a, b = HashEmbedder(salt="s"), HashEmbedder(salt="s")
    assert np.array_equal(a.embed(["घाट"]), b.embed(["घाट"]))
    assert not np.array_equal(a.embed(["घाट"]), HashEmbedder(salt="other").embed(["घाट"]))


# --- evaluate_split ---------------------------------------------------------


@pytest.fixture
def gold():
    return make_split(
        "val",
        {
            "c1": ("पाठ", [("भगीरथ कुंड कितनी दूर है?", "भगीरथ कुंड स्टेशन से 14 किलोमीटर दूर है।"),
                           ("आरती कब होती है?", "आरती हर शाम होती है।")]),
            "c2": ("पाठ दो", [("मंदिर किसे समर्पित है?", "मंदिर भगवान शिव को समर्पित है।")]),
        },
    )


def test_identity_predictions_score_one(gold):
    preds = {p.pair_id: p.answer for p in gold.pairs}
    rep = evaluate_split(preds, gold)
    for value in (rep.rouge1_f, rep.rouge2_f, rep.rougeL_f, rep.bleu, rep.qa_f1, rep.bertscore_f):
        assert value == pytest.approx(1.0, abs=1e-9)
    assert rep.bleu1 == pytest.approx(100.0)
    assert rep.n_examples == 3


def test_mismatch_names_ids(gold):
    preds = {p.pair_id: "x" for p in gold.pairs[1:]}
    preds["ghost"] = "y"
    with pytest.raises(PredictionMismatch) as info:
        evaluate_split(preds, gold)
    assert info.value.missing == [gold.pairs[0].pair_id]
    assert info.value.extra == ["ghost"]
    assert info.value.exit_code == 1


def test_held_out_gold_rejected():
    heldout = make_split("t2", {"c": ("पाठ", [("प्रश्न?", None)])}, answered=False)
    with pytest.raises(HeldOutGold):
        evaluate_split({heldout.pairs[0].pair_id: "x"}, heldout)


def test_unknown_metric_rejected(gold):
    with pytest.raises(Exception):
        evaluate_split({p.pair_id: p.answer for p in gold.pairs}, gold, ["meteor"])


def test_subset_of_metrics(gold):
    rep = evaluate_split({p.pair_id: "हर शाम" for p in gold.pairs}, gold, ["qa_f1"])
    assert rep.rouge1_f is None and rep.bleu is None and rep.bertscore_f is None
    assert rep.qa_f1 is not None


def test_workers_do_not_change_results(gold):
    preds = {p.pair_id: "मंदिर हर शाम 14 किलोमीटर" for p in gold.pairs}
    assert evaluate_split(preds, gold, workers=1) == evaluate_split(preds, gold, workers=4)


def test_aggregation_rules(gold):
    preds = {gold.pairs[0].pair_id: gold.pairs[0].answer, gold.pairs[1].pair_id: "कुछ नहीं", gold.pairs[2].pair_id: "शिव"}
    rep = evaluate_split(preds, gold, ["rouge", "qa_f1", "bleu"], model="m")
    means = [e.rouge1_f for e in rep.per_example]
    assert rep.rouge1_f == pytest.approx(sum(means) / 3)
    total = rep.per_example[0].bleu_stats + rep.per_example[1].bleu_stats + rep.per_example[2].bleu_stats
    assert rep.bleu == bleu_from_stats(total)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.lists(st.sampled_from("abc"), min_size=1, max_size=5),
                          st.lists(st.sampled_from("abc"), min_size=1, max_size=5)), min_size=1, max_size=5))
def test_adding_exact_pairs_never_lowers_qa_f1_or_rouge(items):
    spec = {f"c{i}": ("ctx", [("q?", " ".join(ref))]) for i, (_, ref) in enumerate(items)}
    base_gold = make_split("g", spec)
    preds = {p.pair_id: " ".join(pr) for p, (pr, _) in zip(base_gold.pairs, items)}
    before = evaluate_split(preds, base_gold, ["rouge", "qa_f1"])
    spec["extra"] = ("ctx", [("q?", "a b c")])
    grown = make_split("g", spec)
    preds[grown.pairs[-1].pair_id] = "a b c"
    after = evaluate_split(preds, grown, ["rouge", "qa_f1"])
    assert after.qa_f1 >= before.qa_f1 - 1e-12
    assert after.rougeL_f >= before.rougeL_f - 1e-12


def test_report_and_prediction_round_trip(tmp_path, gold):
    preds = {p.pair_id: "हर शाम" for p in gold.pairs}
    path = write_predictions(tmp_path / "p.jsonl", preds)
    assert read_predictions(path) == preds
    rep = evaluate_split(path, gold, model="toy")
    again = MetricReport.load(rep.save(tmp_path / "r.json"))
    assert again == rep
    assert len(again.per_example) == 3
    assert per_example_csv(rep).splitlines()[0].startswith("pair_id")
    assert len(per_example_jsonl(rep).splitlines()) == 3
