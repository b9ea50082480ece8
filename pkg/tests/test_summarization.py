import pytest
from hypothesis import given
from hypothesis import strategies as st

from histread.errors import LMUnavailable, SummarizationFailed
from histread.summarization import (
    MAX_REDUCE_DEPTH,
    FirstSentenceSummarizer,
    SummaryConfig,
    chunk_text,
    summarize,
)


def sentence(i, length=100):
    """A ``length``-character sentence ending in a full stop."""
    body = f"Sentence {i} "
    return body + "x" * (length - len(body) - 1) + "."


def first_sentence(s):
    """Mock rule restated for the trace: text up to the first terminator followed by space or end."""
    s = s.strip()
    for i, ch in enumerate(s):
        if ch in ".?!" and (i + 1 == len(s) or s[i + 1].isspace()):
            return s[: i + 1]
    return s


class TestChunk:
    def test_short_text_is_one_chunk(self):
        assert chunk_text("Dear wife. I am well.", 100) == ["Dear wife. I am well."]

    def test_empty(self):
        assert chunk_text("", 10) == []

    def test_ten_sentences_limit_350(self):
        sents = [sentence(i) for i in range(10)]
        text = " ".join(sents)
        chunks = chunk_text(text, 350)
        assert [c.count(".") for c in chunks] == [3, 3, 3, 1]
        assert "".join(chunks) == text
        assert all(len(c) <= 350 for c in chunks)

    def test_long_sentence_is_hard_split(self):
        text = "a" * 25
        assert chunk_text(text, 10) == ["a" * 10, "a" * 10, "a" * 5]

    def test_terminator_needs_whitespace(self):
        # "3.5" is not a sentence end
        assert chunk_text("Pay was 3.5 dollars. Good.", 21) == ["Pay was 3.5 dollars. ", "Good."]

    def test_limit_must_be_positive(self):
        with pytest.raises(ValueError):
            chunk_text("a", 0)


@given(st.text(alphabet=st.sampled_from("ab .?!\n\t"), max_size=300), st.integers(1, 60))
def test_chunk_reconstruction(text, limit):
    chunks = chunk_text(text, limit)
    assert "".join(chunks) == text
    assert all(0 < len(c) <= limit for c in chunks)


class TestSummarize:
    cfg = SummaryConfig(max_chunk_chars=350, max_summary_chars=200)

    def test_one_chunk(self):
        client = FirstSentenceSummarizer()
        text = "My dear wife. The river rose. We march soon."
        assert summarize(text, self.cfg, client) == "My dear wife."
        assert client.calls == [text]

    def test_two_chunks_no_reduce(self):
        text = " ".join(sentence(i) for i in range(6))
        chunks = chunk_text(text, 350)
        assert len(chunks) == 2
        client = FirstSentenceSummarizer()
        cfg = SummaryConfig(max_chunk_chars=350, max_summary_chars=300)
        want = " ".join(first_sentence(c) for c in chunks)
        assert summarize(text, cfg, client) == want == f"{sentence(0)} {sentence(3)}"
        assert len(client.calls) == 2

    def test_five_chunks_reduce(self):
        text = " ".join(sentence(i, 60) for i in range(25))
        cfg = SummaryConfig(max_chunk_chars=350, max_summary_chars=200, reduce_threshold_chunks=2)
        chunks = chunk_text(text, 350)
        assert len(chunks) == 5
        mapped = " ".join(first_sentence(c)[:200] for c in chunks)
        want = first_sentence(mapped)[:200]
        client = FirstSentenceSummarizer()
        assert summarize(text, cfg, client) == want == sentence(0, 60)
        assert client.calls[:5] == chunks and client.calls[5] == mapped

    def test_output_bounded(self):
        text = "y" * 900 + "."
        cfg = SummaryConfig(max_chunk_chars=1000, max_summary_chars=50)
        assert len(summarize(text, cfg, FirstSentenceSummarizer())) <= 50

    def test_workers_keep_chunk_order(self):
        text = " ".join(sentence(i, 60) for i in range(25))
        one = summarize(text, SummaryConfig(350, 200), FirstSentenceSummarizer())
        many = summarize(text, SummaryConfig(350, 200, workers=4), FirstSentenceSummarizer())
        assert one == many

    def test_failure_carries_partial(self):
        class DiesOnThird:
            def __init__(self):
                self.n = 0

            def summarize(self, instruction, text, max_chars):
                self.n += 1
                if self.n == 3:
                    raise LMUnavailable("gone")
                return f"S{self.n}."

        text = " ".join(sentence(i, 60) for i in range(25))
        with pytest.raises(SummarizationFailed) as exc:
            summarize(text, SummaryConfig(350, 200), DiesOnThird())
        assert exc.value.partial == ["S1.", "S2."]

    def test_no_shrink_fails(self):
        class Echo:
            def summarize(self, instruction, text, max_chars):
                return text[:max_chars]

        text = " ".join(sentence(i, 60) for i in range(25))
        with pytest.raises(SummarizationFailed):
            summarize(text, SummaryConfig(350, 340), Echo())

    def test_empty_text(self):
        with pytest.raises(ValueError):
            summarize("  ", self.cfg, FirstSentenceSummarizer())


def test_config_invariants():
    with pytest.raises(ValueError):
        SummaryConfig(max_chunk_chars=100, max_summary_chars=100)
    assert MAX_REDUCE_DEPTH == 10
