"""
Word to phone-sequence lexicon.
"""

from collections.abc import Iterable

from dysasr.core.models import UtteranceRecord


class Lexicon:
    """Maps each word to one pronunciation."""

    def __init__(self, entries: dict[str, list[str]], inventory: Iterable[str] | None = None):
        allowed = set(inventory) if inventory is not None else None
        self._entries: dict[str, tuple[str, ...]] = {}
        for word, phones in entries.items():
            if not phones:
                raise ValueError(f"word {word!r} has an empty pronunciation")
            if allowed is not None:
                unknown = sorted(set(phones) - allowed)
                if unknown:
                    raise ValueError(f"word {word!r} uses phones outside the inventory: {unknown}")
            self._entries[word] = tuple(phones)

    @classmethod
    def from_records(cls, records: Iterable[UtteranceRecord]) -> "Lexicon":
        """Collect pronunciations from manifest rows; one word may not have two."""
        entries: dict[str, list[str]] = {}
        for record in records:
            known = entries.get(record.word)
            if known is None:
                entries[record.word] = list(record.phones)
            elif known != list(record.phones):
                raise ValueError(
                    f"word {record.word!r} has conflicting pronunciations: "
                    f"{' '.join(known)} vs {' '.join(record.phones)}"
                )
        return cls(entries)

    def pronunciation(self, word: str) -> tuple[str, ...]:
        if word not in self._entries:
            raise KeyError(f"Word not in lexicon: {word}")
        return self._entries[word]

    def with_word(self, word: str, phones: list[str]) -> "Lexicon":
        entries = {w: list(p) for w, p in self._entries.items()}
        entries[word] = list(phones)
        return Lexicon(entries)

    @property
    def words(self) -> list[str]:
        """Words in lexicographic order."""
        return sorted(self._entries)

    @property
    def phone_inventory(self) -> list[str]:
        return sorted({p for phones in self._entries.values() for p in phones})

    def __contains__(self, word: str) -> bool:
        return word in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __repr__(self) -> str:
        return f"Lexicon({len(self._entries)} words, {len(self.phone_inventory)} phones)"
