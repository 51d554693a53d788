"""
Dysasr Alignment

Forced alignment of a reference word, flat-start segmentation and state
priors for the hybrid scaled-likelihood conversion.
"""

import logging
import math
from collections.abc import Iterable

import numpy as np

from dysasr.core.errors import AlignmentError
from dysasr.decode.graph import DecodeGraph

logger = logging.getLogger(__name__)


def forced_align(graph: DecodeGraph, word: str, frame_scores: np.ndarray) -> np.ndarray:
    """
    Best monotone path through ``word``'s HMM chain.

    Every chain state gets at least one frame. Among equal-scoring paths
    the one whose transitions happen earliest wins.

    Returns:
        (T,) model state indices

    Raises:
        KeyError: word not in the graph
        AlignmentError: fewer frames than chain states
    """
    states = graph.chain(word).states
    scores = np.asarray(frame_scores, dtype=np.float64)
    n_frames, n_chain = len(scores), len(states)
    if n_frames < n_chain:
        raise AlignmentError(
            f"{word!r}: {n_frames} frames cannot cover {n_chain} HMM states"
        )
    emit = scores[:, states]
    log_self, log_next = graph.log_self, graph.log_next

    delta = np.full((n_frames, n_chain), -math.inf)
    moved = np.zeros((n_frames, n_chain), dtype=bool)
    delta[0, 0] = emit[0, 0]
    for t in range(1, n_frames):
        stay = delta[t - 1] + log_self
        advance = np.full(n_chain, -math.inf)
        advance[1:] = delta[t - 1, :-1] + log_next
        # Staying on ties pushes the transitions toward earlier frames.
        moved[t] = advance > stay
        delta[t] = np.where(moved[t], advance, stay) + emit[t]

    path = np.empty(n_frames, dtype=np.int64)
    j = n_chain - 1
    for t in range(n_frames - 1, -1, -1):
        path[t] = j
        if t > 0 and moved[t, j]:
            j -= 1
    return np.asarray(states, dtype=np.int64)[path]


def uniform_alignment(graph: DecodeGraph, word: str, n_frames: int) -> np.ndarray:
    """Flat start: frames split evenly across the chain states."""
    states = graph.chain(word).states
    if n_frames < len(states):
        raise AlignmentError(
            f"{word!r}: {n_frames} frames cannot cover {len(states)} HMM states"
        )
    index = (np.arange(n_frames) * len(states)) // n_frames
    return np.asarray(states, dtype=np.int64)[index]


def state_priors(
    alignments: Iterable[np.ndarray], n_states: int, floor: float = 1e-8
) -> np.ndarray:
    """
    Relative state frequencies over ``alignments``.

    States never observed get ``floor`` (with a warning); the observed
    ones share the remaining mass so the priors sum to 1.

    Raises:
        ValueError: no aligned frames
    """
    counts = np.zeros(n_states, dtype=np.float64)
    for states in alignments:
        counts += np.bincount(np.asarray(states, dtype=np.int64), minlength=n_states)[:n_states]
    total = counts.sum()
    if total == 0:
        raise ValueError("cannot estimate state priors from empty alignments")
    priors = counts / total
    missing = counts == 0
    if missing.any():
        logger.warning(
            "%d of %d states never observed; prior floored to %g",
            int(missing.sum()),
            n_states,
            floor,
        )
        priors *= 1.0 - floor * missing.sum()
        priors[missing] = floor
    return priors
