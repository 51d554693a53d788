"""
Dysasr Decode Graph

Uniform word grammar over monophone HMM chains. Every phone expands to
``states_per_phone`` left-to-right emitting states with a self-loop; acoustic
state ``k`` of phone ``p`` has model output index ``p * states_per_phone + k``.

With ``loop_prob == 0`` the grammar is start -> one word -> end. With
``loop_prob > 0`` a finished word returns to the start with that
probability, so several words (e.g. optional silence) may be chained.
"""

import math
from dataclasses import dataclass, field

from dysasr.core.models import DecodeConfig
from dysasr.decode.lexicon import Lexicon


@dataclass
class WordChain:
    word: str
    states: list[int]


@dataclass
class DecodeGraph:
    """
    Flattened word chains plus transition log probabilities.

    ``words`` is in lexicographic order, which fixes the tie-break between
    equal-scoring hypotheses.
    """

    phones: list[str]
    states_per_phone: int
    self_loop_prob: float
    loop_prob: float
    chains: list[WordChain] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.chains:
            raise ValueError("decode graph needs at least one word")
        words = [c.word for c in self.chains]
        if words != sorted(set(words)):
            raise ValueError("word chains must be unique and sorted")

    @classmethod
    def build(
        cls,
        lexicon: Lexicon,
        phones: list[str],
        config: DecodeConfig | None = None,
        words: list[str] | None = None,
    ) -> "DecodeGraph":
        """
        Expand ``lexicon`` (or its ``words`` subset) into HMM chains.

        Args:
            lexicon: Pronunciations
            phones: Phone inventory in model output order
            config: Topology settings (defaults to DecodeConfig())
            words: Restrict the grammar to these words

        Raises:
            KeyError: a word or phone is unknown
        """
        config = config or DecodeConfig()
        index = {p: i for i, p in enumerate(phones)}
        s = config.states_per_phone
        chains = []
        for word in sorted(set(words) if words is not None else lexicon.words):
            states = []
            for phone in lexicon.pronunciation(word):
                if phone not in index:
                    raise KeyError(f"phone {phone!r} of {word!r} is not in the inventory {phones}")
                states.extend(index[phone] * s + k for k in range(s))
            chains.append(WordChain(word, states))
        return cls(
            phones=list(phones),
            states_per_phone=s,
            self_loop_prob=config.self_loop_prob,
            loop_prob=config.loop_prob,
            chains=chains,
        )

    @property
    def words(self) -> list[str]:
        return [c.word for c in self.chains]

    @property
    def n_states(self) -> int:
        return len(self.phones) * self.states_per_phone

    def chain(self, word: str) -> WordChain:
        for c in self.chains:
            if c.word == word:
                return c
        raise KeyError(f"Word not in decode graph: {word}")

    def restrict(self, word: str) -> "DecodeGraph":
        """Single-word graph used for forced alignment."""
        return DecodeGraph(
            phones=self.phones,
            states_per_phone=self.states_per_phone,
            self_loop_prob=self.self_loop_prob,
            loop_prob=0.0,
            chains=[self.chain(word)],
        )

    def phone_of_state(self, state: int) -> int:
        return state // self.states_per_phone

    # Transition log probabilities; each state's outgoing mass sums to 1.

    @property
    def log_self(self) -> float:
        return math.log(self.self_loop_prob)

    @property
    def log_next(self) -> float:
        return math.log(1.0 - self.self_loop_prob)

    @property
    def log_word_entry(self) -> float:
        return -math.log(len(self.chains))

    @property
    def log_exit_end(self) -> float:
        return self.log_next + math.log(1.0 - self.loop_prob)

    @property
    def log_exit_loop(self) -> float:
        """Exit of a word followed by entry into a specific word."""
        if self.loop_prob <= 0.0:
            return -math.inf
        return self.log_next + math.log(self.loop_prob) + self.log_word_entry
