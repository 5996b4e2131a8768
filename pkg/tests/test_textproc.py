from __future__ import annotations

import pytest

from corpaforge.textproc import (
    CleanedReport,
    clean_report,
    clean_sentences,
    find_subsequence,
    normalize,
    split_sentences,
)


class TestSplitSentences:
    def test_period_split(self):
        assert split_sentences("Lungs are clear. No effusion.") == [
            "Lungs are clear.", "No effusion.",
        ]

    def test_empty(self):
        assert split_sentences("") == []

    def test_abbreviation_corpus(self):
        # hand-built corpus; expected counts derived by hand
        cases = [
            ("Dr. Smith reviewed.", 1),
            ("Discussed with Dr. Lee. Plan unchanged.", 2),
            ("Seen at 3 a.m. by the team.", 1),
            ("The lesion measures 3.5 cm.", 1),
            ("Compare e.g. the prior study. It is stable.", 2),
            ("Was it stable? Yes. Mostly.", 3),
            ("Findings communicated!", 1),
            ("Measures 1.2 x 3.4 cm. Stable vs. prior.", 2),
        ]
        for text, expected in cases:
            assert len(split_sentences(text)) == expected, text

    def test_newlines_are_not_boundaries(self):
        assert split_sentences("a finding\nspanning lines. second one.") == [
            "a finding\nspanning lines.", "second one.",
        ]

    def test_every_character_accounted_for(self):
        text = "One sentence here. Another! And a tail without period"
        pieces = split_sentences(text)
        assert "".join(pieces).replace(" ", "") == text.replace(" ", "")


class TestNormalize:
    def test_punctuation_and_case(self):
        assert normalize("Nodular Opacity,\n right lung.") == [
            "nodular", "opacity", "right", "lung",
        ]

    def test_hyphen_split(self):
        assert normalize("ground-glass opacities") == ["ground", "glass", "opacities"]

    def test_slash_split(self):
        assert normalize("opacities/opacity") == ["opacities", "opacity"]

    def test_whitespace_only(self):
        assert normalize("   ") == []

    def test_tabs_and_underscores(self):
        assert normalize("stable\tchest ___ radiograph") == [
            "stable", "chest", "radiograph",
        ]


class TestCleanReport:
    def run_rules(self, text, lexicon):
        return clean_report("r", text, lexicon)

    def test_r1_short_sentences(self, lexicon):
        fixtures = ["Stable.", "Unchanged.", "Clear.", "Normal.", "None."]
        for text in fixtures:
            report = self.run_rules(text, lexicon)
            assert not report.sentences
            assert [r.rule for r in report.removed] == ["R1"], text

    def test_r2_negation_prefixes(self, lexicon):
        fixtures = [
            "No pneumothorax is seen.",
            "There is no consolidation concerning for pneumonia.",
            "No evidence of effusion remains.",
            "No acute osseous abnormality identified.",
            "There is no pleural fluid.",
        ]
        for text in fixtures:
            report = self.run_rules(text, lexicon)
            assert not report.sentences, text
            assert [r.rule for r in report.removed] == ["R2"], text

    def test_r3_false_positive_terms(self, lexicon):
        fixtures = [
            "nodular opacity is likely a nipple shadow",
            "Evaluate for pneumonia.",
            "Recommend CT to evaluate the nodule.",
            "Probable nipple shadow at the left base.",
            "Please evaluate for effusion on follow up.",
        ]
        for text in fixtures:
            report = self.run_rules(text, lexicon)
            assert not report.sentences, text
            assert [r.rule for r in report.removed] == ["R3"], text

    def test_r4_truncation_keeps_prefix(self, lexicon):
        report = self.run_rules("lungs are clear of effusion today", lexicon)
        assert [s.words for s in report.sentences] == [("lungs", "are", "clear")]
        assert not report.removed

    def test_r4_fixtures(self, lexicon):
        # (text, retained words or None when dropped under R4)
        fixtures = [
            ("lungs are clear of effusion today", ("lungs", "are", "clear")),
            ("the heart is stable without effusion", ("the", "heart", "is", "stable")),
            ("this should not be mistaken for a mass", None),
            ("costophrenic angles are sharp without blunting",
             ("costophrenic", "angles", "are", "sharp")),
            ("without significant change", None),
        ]
        for text, expected in fixtures:
            report = self.run_rules(text, lexicon)
            if expected is None:
                assert not report.sentences, text
                assert [r.rule for r in report.removed] == ["R4"], text
            else:
                assert [s.words for s in report.sentences] == [expected], text

    def test_rule_order_r2_before_r3(self, lexicon):
        # starts with a negation prefix and contains a false-positive term
        report = self.run_rules("No nipple shadow is seen.", lexicon)
        assert [r.rule for r in report.removed] == ["R2"]

    def test_fig2_style_report(self, lexicon):
        text = (
            "There is no focal consolidation concerning for pneumonia.\n"
            "Hilar adenopathy is present."
        )
        report = self.run_rules(text, lexicon)
        assert [s.words for s in report.sentences] == [
            ("hilar", "adenopathy", "is", "present"),
        ]
        assert [r.rule for r in report.removed] == ["R2"]

    def test_origin_indices_preserved(self, lexicon):
        text = "Stable. A mass is seen. No effusion. Nodule noted."
        report = self.run_rules(text, lexicon)
        assert [s.origin_index for s in report.sentences] == [1, 3]
        assert [(r.origin_index, r.rule) for r in report.removed] == [
            (0, "R1"), (2, "R2"),
        ]

    def test_idempotent_on_own_output(self, lexicon):
        texts = [
            "lungs are clear of effusion today",
            "A mass is seen. No effusion. Evaluate for pneumonia.",
            "the heart is stable without enlargement",
        ]
        for text in texts:
            first, _ = clean_sentences(split_sentences(text), lexicon)
            again, removed = clean_sentences(
                [" ".join(s.words) for s in first], lexicon
            )
            assert [s.words for s in again] == [s.words for s in first]
            assert not removed

    def test_no_retained_sentence_violates_rules(self, lexicon, corpus_dir):
        # sweep the bundled corpus: retained sentences never start with a
        # negation prefix nor contain a false-positive term
        for path in sorted((corpus_dir / "reports").glob("r*.txt")):
            report = clean_report(
                path.stem, path.read_text(encoding="utf-8"), lexicon
            )
            for sentence in report.sentences:
                words = sentence.words
                assert len(words) >= 2
                for prefix in lexicon.negation_prefixes:
                    assert tuple(words[:len(prefix)]) != prefix
                for term in lexicon.false_positive_terms:
                    assert find_subsequence(words, term) < 0

    def test_audit_completeness(self, lexicon):
        text = (
            "Stable. A mass is seen. No effusion. "
            "Lungs are clear of effusion today. Nodule noted."
        )
        raw = split_sentences(text)
        report = clean_report("r", text, lexicon)
        # truncation occurred but the truncated sentence was retained
        assert len(report.sentences) + len(report.removed) == len(raw)

    def test_truncated_then_dropped_audited_once(self, lexicon):
        text = "A mass is seen. Without change."
        raw = split_sentences(text)
        report = clean_report("r", text, lexicon)
        assert len(raw) == 2
        assert len(report.sentences) == 1
        assert [r.rule for r in report.removed] == ["R4"]

    def test_empty_report(self, lexicon):
        report = clean_report("r", "", lexicon)
        assert report == CleanedReport("r", [], [])
