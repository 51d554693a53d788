"""
Dysasr Corpus Module

Manifest I/O, block splitting, lexicon building and the synthetic corpus.
"""

from collections.abc import Iterable

from dysasr.core.models import UtteranceRecord
from dysasr.corpus.manifest import (
    load_manifest,
    profiles_by_id,
    resolve_audio_path,
    write_manifest,
)
from dysasr.corpus.split import split_blocks
from dysasr.corpus.synthetic import MANIFEST_NAME, generate_synthetic_corpus
from dysasr.decode.lexicon import Lexicon


def build_lexicon(records: Iterable[UtteranceRecord]) -> Lexicon:
    """Word -> phones lexicon from manifest rows."""
    return Lexicon.from_records(records)


__all__ = [
    "MANIFEST_NAME",
    "Lexicon",
    "build_lexicon",
    "generate_synthetic_corpus",
    "load_manifest",
    "profiles_by_id",
    "resolve_audio_path",
    "split_blocks",
    "write_manifest",
]
