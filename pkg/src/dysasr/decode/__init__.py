"""
Dysasr Decode Module

Lexicon, word-grammar decode graphs, Viterbi N-best decoding, forced
alignment, state priors and the hybrid recognizer.
"""

from dysasr.decode.align import forced_align, state_priors, uniform_alignment
from dysasr.decode.graph import DecodeGraph, WordChain
from dysasr.decode.hyp import read_hypotheses, read_nbest, write_hypotheses, write_nbest
from dysasr.decode.lexicon import Lexicon
from dysasr.decode.recognizer import DecodeItem, Recognizer, decode_utterances
from dysasr.decode.viterbi import Hypothesis, NBest, viterbi_decode

__all__ = [
    "DecodeGraph",
    "DecodeItem",
    "Hypothesis",
    "Lexicon",
    "NBest",
    "Recognizer",
    "WordChain",
    "decode_utterances",
    "forced_align",
    "read_hypotheses",
    "read_nbest",
    "state_priors",
    "uniform_alignment",
    "viterbi_decode",
    "write_hypotheses",
    "write_nbest",
]
