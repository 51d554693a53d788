"""Tests for decode graphs, Viterbi N-best, forced alignment and the recognizer."""

import itertools
import math

import numpy as np
import pytest

from dysasr.core.errors import AlignmentError
from dysasr.core.models import DecodeConfig
from dysasr.decode import (
    DecodeGraph,
    DecodeItem,
    Hypothesis,
    Lexicon,
    NBest,
    Recognizer,
    decode_utterances,
    forced_align,
    read_hypotheses,
    read_nbest,
    state_priors,
    uniform_alignment,
    viterbi_decode,
    write_hypotheses,
    write_nbest,
)

PHONES = ["a", "b", "c"]


@pytest.fixture
def graph():
    lexicon = Lexicon({"z": ["c", "b"], "x": ["a"], "y": ["a", "b"]})
    return DecodeGraph.build(lexicon, PHONES, DecodeConfig(states_per_phone=2, self_loop_prob=0.6))


def best_path(graph: DecodeGraph, word: str, scores: np.ndarray) -> tuple[float, list[int]]:
    """Exhaustive search over every monotone path through ``word``'s chain."""
    states = graph.chain(word).states
    n_frames, n_chain = len(scores), len(states)
    best, path = -math.inf, []
    for cuts in itertools.combinations(range(1, n_frames), n_chain - 1):
        bounds = (0, *cuts, n_frames)
        candidate = [
            states[j] for j in range(n_chain) for _ in range(bounds[j + 1] - bounds[j])
        ]
        score = (
            graph.log_word_entry
            + sum(scores[t, s] for t, s in enumerate(candidate))
            + (n_frames - n_chain) * graph.log_self
            + (n_chain - 1) * graph.log_next
            + graph.log_exit_end
        )
        if score > best:
            best, path = score, candidate
    return best, path


class TestGraph:
    def test_build_orders_words(self, graph):
        assert graph.words == ["x", "y", "z"]
        assert graph.n_states == 6
        assert graph.chain("y").states == [0, 1, 2, 3]
        assert graph.chain("z").states == [4, 5, 2, 3]
        assert graph.phone_of_state(5) == 2

    def test_unknown_phone(self):
        with pytest.raises(KeyError, match="not in the inventory"):
            DecodeGraph.build(Lexicon({"w": ["q"]}), PHONES)

    def test_unknown_word(self, graph):
        with pytest.raises(KeyError, match="Word not in decode graph"):
            graph.chain("nope")

    def test_restrict(self, graph):
        single = graph.restrict("y")
        assert single.words == ["y"]
        assert single.log_word_entry == 0.0

    def test_transitions_sum_to_one(self, graph):
        assert math.exp(graph.log_self) + math.exp(graph.log_next) == pytest.approx(1.0)
        looped = DecodeGraph.build(
            Lexicon({"x": ["a"], "y": ["b"]}), PHONES, DecodeConfig(loop_prob=0.3)
        )
        exits = math.exp(looped.log_exit_end) + 2 * math.exp(looped.log_exit_loop)
        assert math.exp(looped.log_self) + exits == pytest.approx(1.0)


class TestViterbi:
    def test_matches_exhaustive_search(self, graph):
        rng = np.random.default_rng(0)
        for _ in range(5):
            scores = rng.normal(0.0, 2.0, (7, 6))
            nbest = viterbi_decode(graph, scores, n=3)
            expected = sorted(
                ((best_path(graph, w, scores)[0], w) for w in graph.words), reverse=True
            )
            assert [h.words for h in nbest] == [(w,) for _, w in expected]
            for hyp, (score, _) in zip(nbest, expected, strict=True):
                assert hyp.score == pytest.approx(score)

    def test_short_utterance_skips_long_words(self, graph):
        nbest = viterbi_decode(graph, np.zeros((3, 6)), n=5)
        assert [h.words for h in nbest] == [("x",)]

    def test_too_short_for_every_word(self, graph):
        assert len(viterbi_decode(graph, np.zeros((1, 6)))) == 0

    def test_acoustic_scale(self, graph):
        scores = np.random.default_rng(1).normal(size=(6, 6))
        plain = viterbi_decode(graph, scores * 0.5)
        scaled = viterbi_decode(graph, scores, acoustic_scale=0.5)
        assert plain.best.score == pytest.approx(scaled.best.score)

    def test_word_loop_chains_words(self):
        lexicon = Lexicon({"x": ["a"], "y": ["b"]})
        graph = DecodeGraph.build(lexicon, PHONES, DecodeConfig(states_per_phone=1, loop_prob=0.5))
        scores = np.full((6, 3), -20.0)
        scores[:3, 0] = 0.0
        scores[3:, 1] = 0.0
        assert viterbi_decode(graph, scores, n=2).best.words == ("x", "y")

    def test_errors(self, graph):
        with pytest.raises(ValueError, match="empty"):
            viterbi_decode(graph, np.zeros((0, 6)))
        with pytest.raises(ValueError, match="columns"):
            viterbi_decode(graph, np.zeros((4, 5)))
        with pytest.raises(ValueError, match="n must be"):
            viterbi_decode(graph, np.zeros((4, 6)), n=0)

    def test_nbest_must_be_ranked(self):
        with pytest.raises(ValueError, match="non-increasing"):
            NBest([Hypothesis(("a",), -2.0), Hypothesis(("b",), -1.0)])
        with pytest.raises(ValueError, match="empty N-best"):
            _ = NBest([], "u1").best


class TestAlignment:
    def test_matches_exhaustive_search(self, graph):
        rng = np.random.default_rng(2)
        for word in ("y", "z"):
            scores = rng.normal(0.0, 2.0, (8, 6))
            _, expected = best_path(graph, word, scores)
            np.testing.assert_array_equal(forced_align(graph, word, scores), expected)

    def test_ties_move_early(self):
        even = DecodeGraph.build(Lexicon({"x": ["a"]}), PHONES, DecodeConfig(states_per_phone=2))
        np.testing.assert_array_equal(forced_align(even, "x", np.zeros((4, 6))), [0, 1, 1, 1])

    def test_every_state_visited(self, graph):
        path = forced_align(graph, "z", np.random.default_rng(3).normal(size=(4, 6)))
        np.testing.assert_array_equal(path, [4, 5, 2, 3])

    def test_too_few_frames(self, graph):
        with pytest.raises(AlignmentError, match="cannot cover"):
            forced_align(graph, "y", np.zeros((3, 6)))

    def test_uniform(self, graph):
        np.testing.assert_array_equal(uniform_alignment(graph, "y", 6), [0, 0, 1, 2, 2, 3])
        with pytest.raises(AlignmentError):
            uniform_alignment(graph, "y", 2)

    def test_priors(self):
        priors = state_priors([np.array([0, 0, 1]), np.array([1, 2])], 4, floor=1e-8)
        assert priors.sum() == pytest.approx(1.0)
        assert priors[3] == 1e-8
        np.testing.assert_allclose(priors[:3], np.array([2, 2, 1]) / 5 * (1 - 1e-8))

    def test_priors_need_frames(self):
        with pytest.raises(ValueError, match="empty alignments"):
            state_priors([], 3)


class FrameEcho:
    """Acoustic model whose log posteriors are its input frames."""

    n_states = 3

    def log_posteriors(self, x, hooks=None):
        return x if hooks is None else x + hooks


class TestRecognizer:
    @pytest.fixture
    def recognizer(self):
        lexicon = Lexicon({"sil": ["c"], "x": ["a"], "y": ["b"]})
        config = DecodeConfig(states_per_phone=1, loop_prob=0.5, silence_word="sil", nbest=3)
        graph = DecodeGraph.build(lexicon, PHONES, config)
        return Recognizer(FrameEcho(), np.full(3, 1 / 3), graph, config, splice=(0, 0))

    @staticmethod
    def frames(*states: int) -> np.ndarray:
        out = np.full((len(states), 3), -20.0)
        out[np.arange(len(states)), list(states)] = 0.0
        return out

    def test_silence_is_stripped(self, recognizer):
        nbest = recognizer.recognize(DecodeItem("u1", "D01", self.frames(2, 2, 0, 0, 2)))
        assert nbest.utt_id == "u1"
        assert nbest.best.words == ("x",)
        assert len({h.words for h in nbest}) == len(nbest)

    def test_speaker_hooks_shift_scores(self, recognizer):
        recognizer.transforms = {"D02": np.array([-50.0, 50.0, 0.0])}
        item = self.frames(0, 0, 0)
        assert recognizer.recognize(DecodeItem("u", "D01", item)).best.words == ("x",)
        assert recognizer.recognize(DecodeItem("u", "D02", item)).best.words == ("y",)

    def test_parallel_keeps_order(self, recognizer):
        items = [
            DecodeItem(f"u{i}", "D01", self.frames(*([i % 2] * 3))) for i in range(6)
        ]
        serial = decode_utterances(recognizer, items)
        parallel = decode_utterances(recognizer, items, jobs=3)
        assert [n.utt_id for n in parallel] == [f"u{i}" for i in range(6)]
        assert [n.best for n in serial] == [n.best for n in parallel]

    def test_prior_count_mismatch(self, recognizer):
        with pytest.raises(ValueError, match="priors"):
            Recognizer(FrameEcho(), np.ones(4) / 4, recognizer.graph)


class TestHypothesisFiles:
    def test_write_then_read(self, tmp_path):
        nbests = [
            NBest([Hypothesis(("x",), -1.5), Hypothesis(("y", "x"), -2.25)], "u1"),
            NBest([Hypothesis((), -3.0)], "u2"),
        ]
        write_hypotheses(tmp_path / "hyp.txt", nbests)
        write_nbest(tmp_path / "nbest.txt", nbests)
        hyps = read_hypotheses(tmp_path / "hyp.txt")
        assert hyps["u1"] == Hypothesis(("x",), -1.5)
        assert hyps["u2"].words == ()
        back = read_nbest(tmp_path / "nbest.txt")
        assert [h.words for h in back["u1"]] == [("x",), ("y", "x")]

    def test_malformed(self, tmp_path):
        path = tmp_path / "hyp.txt"
        path.write_text("u1\tx\n")
        with pytest.raises(ValueError, match="expected 3"):
            read_hypotheses(path)
