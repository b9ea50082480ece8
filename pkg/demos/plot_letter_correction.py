"""
Fixing a misread letter and summarizing it
==========================================

A faded scan reads "hand" as "fund" at 66.79% confidence. Words under
the threshold are masked and a language model proposes replacements;
each proposal is weighed against how close it is to what the scan shows.
The corrected letter is then summarized.
"""

from histread.correction import CorrectionConfig, MockMaskedLM, apply_corrections, select_replacement
from histread.document import Candidate, LineBlock, Provenance, WordBlock, build_page_document
from histread.geometry import BBox, Dims
from histread.layout import linearize_text
from histread.summarization import FirstSentenceSummarizer, SummaryConfig, summarize

text = "I shake your fund warmly and hope this finds you well ."
confidence = {"fund": 0.6679}
words = []
for i, token in enumerate(text.split()):
    box = BBox(0.02 + 0.08 * i, 0.1, 0.09 + 0.08 * i, 0.12)
    words.append(WordBlock(f"w-{i}", token, box, confidence.get(token, 0.98), Provenance(0.0, 0, 0, "scan")))
line = LineBlock("l-0", BBox(0.02, 0.1, 0.09 + 0.08 * (len(words) - 1), 0.12), tuple(w.id for w in words), 0)
doc = build_page_document("d-0", "letter.png", Dims(1200, 900), words, [line], "p-0")

# the score blends LM probability with spelling closeness
cands = [Candidate("hand", 0.80), Candidate("hands", 0.10), Candidate("arm", 0.05)]
print(select_replacement("fund", 0.6679, cands))

lm = MockMaskedLM({"I shake your [MASK] warmly and hope this finds you well .": cands})
fixed = apply_corrections(doc, CorrectionConfig(), lm)
print(linearize_text(fixed))
for rec in fixed.corrections:
    print(rec.original, "->", rec.chosen, round(rec.combined_score, 2), rec.action)

# a longer letter goes through map-reduce; the stand-in keeps first sentences
letter = linearize_text(fixed) + (
    " The corn is in and the mill is running again."
    " Tell mother the army pays in spring."
    " Write soon, the camp is cold."
)
client = FirstSentenceSummarizer()
summary = summarize(letter, SummaryConfig(max_chunk_chars=120, max_summary_chars=100), client)
print("summary:", summary)
print("model calls:", len(client.calls))
