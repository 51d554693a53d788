"""
Dysasr Viterbi Decoder

Token passing over a DecodeGraph. Every HMM state keeps up to ``n`` tokens
with distinct word histories, which makes the 1-best exact and, for the
single-word grammar, the whole N-best list exact.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from dysasr.decode.graph import DecodeGraph

Words = tuple[str, ...]


@dataclass(frozen=True)
class Hypothesis:
    words: Words
    score: float

    @property
    def text(self) -> str:
        return " ".join(self.words)


@dataclass
class NBest:
    """Hypotheses ranked by score, best first."""

    hypotheses: list[Hypothesis] = field(default_factory=list)
    utt_id: str = ""

    def __post_init__(self) -> None:
        scores = [h.score for h in self.hypotheses]
        if any(b > a for a, b in zip(scores, scores[1:], strict=False)):
            raise ValueError("N-best scores must be non-increasing")

    @property
    def best(self) -> Hypothesis:
        if not self.hypotheses:
            raise ValueError(f"{self.utt_id or 'utterance'}: empty N-best list")
        return self.hypotheses[0]

    def __len__(self) -> int:
        return len(self.hypotheses)

    def __iter__(self):
        return iter(self.hypotheses)


def _rank(tokens: dict[Words, float], n: int) -> dict[Words, float]:
    """Top ``n`` by score; ties broken by word order."""
    if len(tokens) <= n:
        return tokens
    ranked = sorted(tokens.items(), key=lambda item: (-item[1], item[0]))[:n]
    return dict(ranked)


def _offer(tokens: dict[Words, float], history: Words, score: float) -> None:
    if score > tokens.get(history, -math.inf):
        tokens[history] = score


def viterbi_decode(
    graph: DecodeGraph,
    frame_scores: np.ndarray,
    n: int = 1,
    acoustic_scale: float = 1.0,
) -> NBest:
    """
    Decode one utterance.

    Args:
        graph: Word grammar and HMM topology
        frame_scores: (T, n_states) per-frame acoustic log scores, e.g.
            log posteriors minus log state priors
        n: Number of hypotheses to return
        acoustic_scale: Multiplier on the frame scores

    Returns:
        NBest with at most ``n`` distinct word sequences

    Raises:
        ValueError: no frames, or fewer score columns than graph states
    """
    scores = np.asarray(frame_scores, dtype=np.float64)
    if scores.ndim != 2 or len(scores) == 0:
        raise ValueError("cannot decode an empty utterance")
    if scores.shape[1] < graph.n_states:
        raise ValueError(
            f"frame scores have {scores.shape[1]} columns, graph needs {graph.n_states}"
        )
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    scores = scores * acoustic_scale

    log_self, log_next = graph.log_self, graph.log_next
    log_loop = graph.log_exit_loop
    chains = graph.chains

    active: list[list[dict[Words, float]]] = []
    for c in chains:
        nodes: list[dict[Words, float]] = [{} for _ in c.states]
        nodes[0][(c.word,)] = graph.log_word_entry + scores[0, c.states[0]]
        active.append(nodes)

    for t in range(1, len(scores)):
        row = scores[t]
        loop_entries: dict[Words, float] = {}
        if log_loop > -math.inf:
            for nodes in active:
                for history, s in nodes[-1].items():
                    _offer(loop_entries, history, s + log_loop)
            loop_entries = _rank(loop_entries, n)

        step: list[list[dict[Words, float]]] = []
        for c, nodes in zip(chains, active, strict=True):
            new_nodes = []
            for j, state in enumerate(c.states):
                tokens: dict[Words, float] = {}
                for history, s in nodes[j].items():
                    _offer(tokens, history, s + log_self)
                if j > 0:
                    for history, s in nodes[j - 1].items():
                        _offer(tokens, history, s + log_next)
                else:
                    for history, s in loop_entries.items():
                        _offer(tokens, history + (c.word,), s)
                emit = row[state]
                new_nodes.append(_rank({h: s + emit for h, s in tokens.items()}, n))
            step.append(new_nodes)
        active = step

    final: dict[Words, float] = {}
    for nodes in active:
        for history, s in nodes[-1].items():
            _offer(final, history, s + graph.log_exit_end)
    ranked = sorted(final.items(), key=lambda item: (-item[1], item[0]))[:n]
    return NBest([Hypothesis(words, score) for words, score in ranked])
