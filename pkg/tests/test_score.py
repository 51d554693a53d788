"""Tests for WER, breakdowns, significance tests and report rendering."""

import functools
import math

import numpy as np
import pytest

from dysasr.core.models import GroupScore, ScoreReport
from dysasr.score import (
    ReportTemplate,
    ScoredUtterance,
    compare_systems,
    edit_distance_wer,
    group_breakdown,
    mapsswe_test,
    oracle_counts,
    oracle_wer,
    paired_sign_test,
    read_report_json,
    render_summary,
    tokenize_chars,
    write_report_json,
    write_report_tsv,
)


def levenshtein(ref: tuple, hyp: tuple) -> int:
    @functools.cache
    def dist(i: int, j: int) -> int:
        if i == 0 or j == 0:
            return i + j
        return min(
            dist(i - 1, j - 1) + (ref[i - 1] != hyp[j - 1]),
            dist(i - 1, j) + 1,
            dist(i, j - 1) + 1,
        )

    return dist(len(ref), len(hyp))


def utt(utt_id, speaker, ref, hyp, nbest=None):
    return ScoredUtterance(utt_id, speaker, ref, hyp, nbest or [])


class TestWer:
    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            ref = tuple(rng.choice(list("abc"), rng.integers(0, 7)))
            hyp = tuple(rng.choice(list("abcd"), rng.integers(0, 7)))
            counts = edit_distance_wer(ref, hyp)
            assert counts.errors == levenshtein(ref, hyp)
            assert len(hyp) == counts.ref_len - counts.dels + counts.ins

    def test_substitution_preferred(self):
        counts = edit_distance_wer(("a", "b"), ("a", "c"))
        assert (counts.subs, counts.dels, counts.ins) == (1, 0, 0)
        assert counts.wer == 50.0

    def test_empty_reference(self):
        assert edit_distance_wer((), ("x", "y")).wer == 200.0
        assert edit_distance_wer((), ()).wer == 0.0

    def test_character_tokens(self):
        assert tokenize_chars("ab c") == ("a", "b", "c")


class TestOracle:
    def test_never_worse_than_first_entry(self):
        rng = np.random.default_rng(1)
        words = ["up", "down", "left", "right"]
        for _ in range(50):
            ref = " ".join(rng.choice(words, 2))
            nbest = [" ".join(rng.choice(words, rng.integers(1, 3))) for _ in range(4)]
            best = oracle_counts(nbest, ref)
            assert best.errors <= edit_distance_wer(ref.split(), nbest[0].split()).errors

    def test_pooled(self):
        nbests = {"u1": ["no", "yes"], "u2": ["left"]}
        refs = {"u1": "yes", "u2": "right"}
        assert oracle_wer(nbests, refs) == pytest.approx(50.0)

    def test_needs_hypotheses(self):
        with pytest.raises(ValueError, match="at least one"):
            oracle_counts([], "yes")


class TestBreakdown:
    def test_bands_and_seen(self, profiles):
        report = group_breakdown(
            [
                utt("u1", "D02", "yes", "yes", ["yes"]),
                utt("u2", "D01", "zebra", "zero", ["zero", "zebra"]),
                utt("u3", "C01", "go", "no", ["no"]),
                utt("u4", "D01", "go", "go", ["go"]),
            ],
            profiles,
            train_vocabulary={"yes", "go"},
            system="base",
        )
        assert report.utterances == 4
        assert list(report.bands) == ["low", "high", "control"]
        assert report.bands["low"].wer == 50.0
        assert report.bands["high"].wer == 0.0
        assert report.seen.utterances == 3
        assert report.unseen.wer == 100.0
        assert report.wer == 50.0
        assert report.oracle_wer == 25.0

    def test_oracle_missing_without_nbest(self, profiles):
        report = group_breakdown(
            [utt("u1", "D01", "yes", "yes", ["yes"]), utt("u2", "D01", "go", "go")],
            profiles,
            set(),
        )
        assert report.oracle is None

    def test_unknown_speaker(self, profiles):
        with pytest.raises(KeyError, match="no band"):
            group_breakdown([utt("u1", "X99", "yes", "yes")], profiles, set())

    def test_counts_reaggregate(self):
        a = GroupScore(utterances=1, words=2, subs=1)
        b = GroupScore(utterances=2, words=3, ins=1, dels=1)
        assert a.add(b).wer == pytest.approx(100.0 * 3 / 5)


class TestSignificance:
    def test_worked_example(self):
        d = [2, -1, 1, 0, 2, 1]
        result = mapsswe_test(d, [0] * 6, alpha=0.05)
        assert result.mean_difference == pytest.approx(0.8333, abs=1e-4)
        assert result.z == pytest.approx(1.746, abs=1e-3)
        assert not result.significant
        assert result.p_value == pytest.approx(0.0808, abs=1e-3)

    def test_large_consistent_gain_is_significant(self):
        a = [3, 2, 3, 4, 2, 3, 3, 2, 4, 3]
        b = [0, 1, 0, 1, 0, 0, 1, 0, 1, 0]
        assert mapsswe_test(a, b).significant

    def test_zero_variance(self):
        assert mapsswe_test([1, 1, 1], [1, 1, 1]).z == 0.0
        same_gain = mapsswe_test([2, 2, 2], [1, 1, 1])
        assert math.isinf(same_gain.z)
        assert same_gain.significant

    def test_errors(self):
        with pytest.raises(ValueError, match="differ"):
            mapsswe_test([1, 2], [1])
        with pytest.raises(ValueError, match="two segments"):
            mapsswe_test([1], [0])

    def test_compare_uses_common_utterances(self):
        a = [utt("u1", "D01", "a b", "a c"), utt("u2", "D01", "a", "b"), utt("u3", "D01", "a", "")]
        b = [utt("u2", "D01", "a", "a"), utt("u1", "D01", "a b", "a b")]
        result = compare_systems(a, b, system_a="base", system_b="adapted")
        assert result.n_segments == 2
        assert result.mean_difference == 1.0
        assert result.system_b == "adapted"

    def test_sign_test(self):
        assert paired_sign_test([1, 1], [1, 1]) == 1.0
        assert paired_sign_test([2] * 8, [1] * 8) == pytest.approx(0.5**8)
        assert paired_sign_test([1] * 8, [2] * 8) == pytest.approx(1.0)
        with pytest.raises(ValueError):
            paired_sign_test([1], [1, 2])


class TestReports:
    @pytest.fixture
    def report(self):
        return ScoreReport(
            system="base",
            utterances=3,
            overall=GroupScore(utterances=3, words=3, subs=1),
            bands={"low": GroupScore(utterances=2, words=2, subs=1)},
            seen=GroupScore(utterances=3, words=3, subs=1),
            significance=[mapsswe_test([2, -1, 1, 0, 2, 1], [0] * 6, system_a="base")],
        )

    def test_json(self, tmp_path, report):
        write_report_json(tmp_path / "score.json", report)
        assert read_report_json(tmp_path / "score.json") == report

    def test_tsv(self, tmp_path, report):
        write_report_tsv(tmp_path / "score.tsv", [report])
        lines = (tmp_path / "score.tsv").read_text().splitlines()
        assert lines[0].split("\t")[:2] == ["system", "group"]
        assert lines[1].split("\t") == ["base", "overall", "3", "3", "1", "0", "0", "33.33"]
        assert [line.split("\t")[1] for line in lines[1:]] == [
            "overall",
            "band:low",
            "seen",
            "unseen",
        ]

    def test_summary(self, report):
        text = render_summary([report])
        assert "33.33" in text
        assert "low" in text
        assert "Z=1.746" in text
        assert "not significant" in text

    def test_missing_template(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="Report template not found"):
            ReportTemplate.load("absent", tmp_path)
