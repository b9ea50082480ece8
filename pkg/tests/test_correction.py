import json
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from histread.errors import LMUnavailable
from histread.correction import (
    CorrectionConfig,
    MockMaskedLM,
    apply_corrections,
    char_sim,
    flag_low_confidence,
    levenshtein,
    masked_context,
    propose_candidates,
    select_replacement,
)
from histread.document import Candidate, serialize_manifest, validate_document

from conftest import one_line_doc, word

HAND = [("hand", 0.80), ("hands", 0.10), ("arm", 0.05)]


def sentence_doc(texts, confs):
    words = [
        word(f"w-{i}", t, (0.05 + 0.1 * i, 0.1, 0.13 + 0.1 * i, 0.12), c)
        for i, (t, c) in enumerate(zip(texts, confs))
    ]
    return one_line_doc(words)


@pytest.fixture
def letter():
    return sentence_doc(["I", "shake", "your", "fund", "warmly"], [0.99, 0.98, 0.97, 0.6679, 0.95])


def lev_oracle(a, b):
    """Full dynamic-programming table, no row reuse."""
    t = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        t[i][0] = i
    for j in range(len(b) + 1):
        t[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            t[i][j] = min(t[i - 1][j] + 1, t[i][j - 1] + 1, t[i - 1][j - 1] + (a[i - 1] != b[j - 1]))
    return t[-1][-1]


@given(st.text("abcd", max_size=8), st.text("abcd", max_size=8))
def test_levenshtein_matches_table(a, b):
    assert levenshtein(a, b) == lev_oracle(a, b)
    assert 0.0 <= char_sim(a, b) <= 1.0


def test_char_sim_examples():
    assert char_sim("fund", "hand") == 0.5
    assert char_sim("hand", "hand") == 1.0
    assert char_sim("", "") == 1.0


class TestFlag:
    def test_paper_confidence_is_flagged(self, letter):
        assert flag_low_confidence(letter, 0.90) == ["w-3"]

    def test_zero_threshold_flags_nothing(self, letter):
        assert flag_low_confidence(letter, 0.0) == []

    def test_all_confident(self):
        doc = sentence_doc(["a", "b"], [1.0, 1.0])
        assert flag_low_confidence(doc, 0.99) == []

    def test_reading_order(self):
        doc = sentence_doc(["a", "b", "c"], [0.5, 0.99, 0.4])
        assert flag_low_confidence(doc, 0.9) == ["w-0", "w-2"]


class TestCandidates:
    lm = MockMaskedLM({"I shake your [MASK] warmly": HAND})

    def test_lookup(self):
        got = propose_candidates("I shake your [MASK] warmly", 3, self.lm)
        assert got == [Candidate("hand", 0.8), Candidate("hands", 0.1), Candidate("arm", 0.05)]

    def test_k_truncates(self):
        assert propose_candidates("I shake your [MASK] warmly", 1, self.lm) == [Candidate("hand", 0.8)]

    def test_unknown_context(self):
        assert propose_candidates("nothing [MASK] here", 3, self.lm) == []

    @pytest.mark.parametrize("text", ["no mask", "[MASK] and [MASK]"])
    def test_exactly_one_mask(self, text):
        with pytest.raises(ValueError):
            propose_candidates(text, 3, self.lm)

    def test_masked_context_window(self):
        toks = list("abcdefg")
        assert masked_context(toks, 3, 25) == "a b c [MASK] e f g"
        assert masked_context(toks, 3, 1) == "c [MASK] e"
        assert masked_context(toks, 0, 2) == "[MASK] b c"


class TestSelect:
    def test_fund_to_hand(self):
        cands = [Candidate(t, p) for t, p in HAND]
        rec = select_replacement("fund", 0.6679, cands, CorrectionConfig(), word_id="w-3")
        # 0.7 * 0.8 + 0.3 * (1 - 2/4)
        assert rec.combined_score == pytest.approx(0.71)
        assert (rec.action, rec.chosen, rec.original, rec.original_confidence) == ("replaced", "hand", "fund", 0.6679)

    def test_original_on_top_is_kept(self):
        rec = select_replacement("hand", 0.7, [Candidate("hand", 0.9), Candidate("band", 0.05)])
        assert (rec.action, rec.chosen) == ("kept", "hand")

    def test_below_floor_is_kept(self):
        # best: 0.7 * 0.2 + 0.3 * 0 = 0.14 < 0.5
        rec = select_replacement("fund", 0.6, [Candidate("xyzq", 0.2), Candidate("pqrs", 0.1)])
        assert rec.combined_score == pytest.approx(0.14)
        assert (rec.action, rec.chosen, rec.reason) == ("kept", "fund", "below acceptance floor")

    def test_empty_is_kept(self):
        rec = select_replacement("fund", 0.6, [])
        assert (rec.action, rec.chosen, rec.candidates) == ("kept", "fund", ())

    def test_ties_prefer_probability_then_lexicographic(self):
        # lambda 0 makes the score pure similarity; both are one edit from "cat"
        cfg = CorrectionConfig(lm_weight_lambda=0.0)
        rec = select_replacement("cat", 0.5, [Candidate("cut", 0.3), Candidate("bat", 0.6)], cfg)
        assert rec.chosen == "bat"
        rec = select_replacement("cat", 0.5, [Candidate("cut", 0.3), Candidate("bat", 0.3)], cfg)
        assert rec.chosen == "bat"


class FlakyLM:
    def predict(self, text, k):
        raise LMUnavailable("service down")


class TestApply:
    def test_fund_becomes_hand(self, letter):
        lm = MockMaskedLM({"I shake your [MASK] warmly": HAND})
        out = apply_corrections(letter, CorrectionConfig(), lm)
        w = out.words["w-3"]
        assert (w.text, w.corrected_from, w.confidence) == ("hand", "fund", pytest.approx(0.71))
        (rec,) = out.corrections
        assert rec.word_id == "w-3" and rec.original_confidence == 0.6679
        assert letter.words["w-3"].text == "fund"  # input untouched
        for wid in ("w-0", "w-1", "w-2", "w-4"):
            assert out.words[wid] is letter.words[wid]
        assert validate_document(out) == []

    def test_nothing_flagged(self, letter):
        out = apply_corrections(letter, CorrectionConfig(confidence_threshold=0.5), MockMaskedLM())
        assert out.words == letter.words and out.corrections == ()
        assert serialize_manifest(out) == serialize_manifest(letter)

    def test_three_flagged_two_covered(self):
        doc = sentence_doc(["dcar", "wife", "tirne", "is", "shorl"], [0.6, 0.99, 0.6, 0.99, 0.6])
        lm = MockMaskedLM({
            "[MASK] wife tirne is shorl": [("dear", 0.8)],
            "dear wife [MASK] is shorl": [("time", 0.8)],
        })
        out = apply_corrections(doc, CorrectionConfig(), lm)
        assert [r.action for r in out.corrections] == ["replaced", "replaced", "kept"]
        assert out.corrections[2].reason == "no candidates"
        assert [out.words[f"w-{i}"].text for i in range(5)] == ["dear", "wife", "time", "is", "shorl"]
        # the later query saw the earlier correction
        assert lm.calls[1] == "dear wife [MASK] is shorl"

    def test_lm_failure_keeps_word_with_reason(self, letter):
        out = apply_corrections(letter, CorrectionConfig(), FlakyLM())
        (rec,) = out.corrections
        assert rec.action == "kept" and rec.reason.startswith("lm error")
        assert out.words == letter.words

    def test_idempotent(self, letter):
        lm = MockMaskedLM({"I shake your [MASK] warmly": HAND})
        once = apply_corrections(letter, CorrectionConfig(), lm)
        twice = apply_corrections(once, CorrectionConfig(), lm)
        assert twice.words == once.words

    def test_confident_words_never_touched(self):
        doc = sentence_doc(["fund", "fund"], [0.95, 0.5])
        lm = MockMaskedLM({"fund [MASK]": HAND, "[MASK] fund": HAND})
        out = apply_corrections(doc, CorrectionConfig(), lm)
        assert out.words["w-0"] == doc.words["w-0"]
        assert out.words["w-1"].text == "hand"


def test_mock_table_round_trip(tmp_path):
    lm = MockMaskedLM({"a [MASK]": HAND})
    path = tmp_path / "lm.json"
    path.write_text(json.dumps(lm.to_json()))
    assert MockMaskedLM.from_file(path).table == lm.table


def test_config_ranges():
    with pytest.raises(ValueError):
        CorrectionConfig(confidence_threshold=1.5)
    with pytest.raises(ValueError):
        CorrectionConfig(k=0)
    assert replace(CorrectionConfig(), k=1).k == 1
