"""Tests for manifests, block splitting, the lexicon and the synthetic corpus."""

import json

import pytest

from dysasr.core.errors import ManifestError
from dysasr.core.models import (
    Block,
    CorpusConfig,
    CustomSplit,
    PerturbationMethod,
    Provenance,
    ProvenanceKind,
    SpeakerKind,
    SplitProtocol,
    SyntheticCorpusConfig,
)
from dysasr.corpus import (
    build_lexicon,
    generate_synthetic_corpus,
    load_manifest,
    split_blocks,
    write_manifest,
)
from dysasr.dsp import read_wav
from tests.conftest import make_record


class TestManifest:
    def test_write_then_load_is_field_equal(self, tmp_path, profiles):
        records = [
            make_record("D01_B1_ma_0", "D01"),
            make_record("C01_B2_ma_0", "C01", block=Block.B2),
        ]
        path = tmp_path / "manifest.jsonl"
        write_manifest(records, profiles.values(), path)
        loaded, loaded_profiles = load_manifest(path)
        assert loaded == records
        assert {p.speaker_id for p in loaded_profiles} == set(profiles)

    def test_duplicate_utt_id_reports_line(self, tmp_path, profiles):
        path = tmp_path / "manifest.jsonl"
        write_manifest([make_record("D01_B1_ma_0", "D01")], profiles.values(), path)
        first = path.read_text().splitlines()[-1]
        path.write_text(path.read_text() + first + "\n")
        with pytest.raises(ManifestError) as exc:
            load_manifest(path)
        assert "duplicate utt_id" in str(exc.value)
        assert exc.value.line == len(path.read_text().splitlines())

    def test_unknown_speaker(self, tmp_path):
        path = tmp_path / "manifest.jsonl"
        row = {"type": "utterance", **make_record("X_0", "X99").model_dump(mode="json")}
        path.write_text(json.dumps(row) + "\n")
        with pytest.raises(ManifestError, match="unknown speaker X99"):
            load_manifest(path)

    def test_parse_error_names_line(self, tmp_path, profiles):
        path = tmp_path / "manifest.jsonl"
        write_manifest([], profiles.values(), path)
        path.write_text(path.read_text() + "{not json\n")
        with pytest.raises(ManifestError, match="parse error"):
            load_manifest(path)

    def test_inline_speaker_keys(self, tmp_path):
        row = {
            "type": "utterance",
            **make_record("D01_B1_ma_0", "D01").model_dump(mode="json"),
            "speaker_kind": "dysarthric",
            "speaker_band": "mild",
        }
        path = tmp_path / "manifest.jsonl"
        path.write_text(json.dumps(row) + "\n")
        records, profiles = load_manifest(path)
        assert len(records) == 1
        assert profiles[0].kind == SpeakerKind.DYSARTHRIC

    def test_strict_checks_audio(self, tmp_path, profiles):
        path = tmp_path / "manifest.jsonl"
        write_manifest([make_record("D01_B1_ma_0", "D01")], profiles.values(), path)
        load_manifest(path)
        with pytest.raises(ManifestError, match="audio not found"):
            load_manifest(path, strict=True)

    def test_strict_rejects_unknown_keys(self, tmp_path, profiles):
        record = make_record("D01_B1_ma_0", "D01", duration_s=0.5)
        (tmp_path / "wav").mkdir()
        (tmp_path / record.audio_path).write_bytes(b"")
        path = tmp_path / "manifest.jsonl"
        write_manifest([record], profiles.values(), path)
        lines = path.read_text().splitlines()
        row = json.loads(lines[-1])
        row["speeker_id"] = "D01"
        path.write_text("\n".join([*lines[:-1], json.dumps(row)]) + "\n")

        assert load_manifest(path)[0] == [record]
        with pytest.raises(ManifestError, match="unknown keys: speeker_id") as exc:
            load_manifest(path, strict=True)
        assert exc.value.line == len(lines)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_manifest(tmp_path / "absent.jsonl")


class TestSplit:
    def test_paper_protocol(self, profiles):
        records = [
            make_record("D01_B1", "D01", Block.B1),
            make_record("D01_B2", "D01", Block.B2),
            make_record("D01_B3", "D01", Block.B3),
            make_record("C01_B2", "C01", Block.B2),
            make_record("C01_B3", "C01", Block.B3),
        ]
        split = split_blocks(records, profiles, SplitProtocol.PAPER)
        assert split.train == ["D01_B1", "D01_B3", "C01_B3"]
        assert split.test == ["D01_B2"]
        assert split.discarded == ["C01_B2"]
        assert split_blocks(records, profiles) == split

    def test_protocol_names_in_config(self):
        config = CorpusConfig.model_validate({"manifest": "m.jsonl", "protocol": "paper"})
        assert config.protocol is SplitProtocol.PAPER
        assert CorpusConfig(manifest="m.jsonl").protocol is SplitProtocol.PAPER
        with pytest.raises(ValueError, match="custom"):
            CorpusConfig.model_validate({"manifest": "m.jsonl", "protocol": "standard"})

    def test_augmented_rows_never_tested(self, profiles):
        aug = make_record("D01_B2_speed", "D01", Block.B2).model_copy(
            update={
                "provenance": Provenance(
                    kind=ProvenanceKind.AUGMENTED,
                    method=PerturbationMethod.SPEED,
                    factor=0.9,
                    source_utt_id="D01_B2",
                )
            }
        )
        split = split_blocks([aug], profiles)
        assert split.test == []

    def test_custom_protocol(self, profiles):
        records = [make_record("C01_B2", "C01", Block.B2), make_record("D01_B1", "D01")]
        custom = CustomSplit(
            train_blocks=[Block.B1],
            test_blocks=[Block.B2],
            test_kinds=[SpeakerKind.CONTROL],
        )
        split = split_blocks(records, profiles, SplitProtocol.CUSTOM, custom)
        assert split.test == ["C01_B2"]
        assert split.train == ["D01_B1"]

    def test_unknown_speaker(self, profiles):
        with pytest.raises(KeyError):
            split_blocks([make_record("Z_B1", "Z09")], profiles)


class TestLexicon:
    def test_from_records(self):
        lexicon = build_lexicon(
            [
                make_record("a", "D01", word="ma"),
                make_record("b", "D01", word="sa", phones=["s", "aa"]),
            ]
        )
        assert lexicon.words == ["ma", "sa"]
        assert lexicon.phone_inventory == ["aa", "m", "s"]
        assert lexicon.pronunciation("sa") == ("s", "aa")

    def test_conflicting_pronunciations(self):
        with pytest.raises(ValueError, match="conflicting"):
            build_lexicon(
                [
                    make_record("a", "D01", word="ma"),
                    make_record("b", "D01", word="ma", phones=["n", "aa"]),
                ]
            )


class TestSyntheticCorpus:
    def test_layout_and_unseen_words(self, tmp_path):
        config = SyntheticCorpusConfig(
            n_control=1, n_dysarthric=1, common_words=2, uncommon_words_per_block=1, repetitions=1
        )
        records, profiles = generate_synthetic_corpus(tmp_path, config)
        assert len(records) == 2 * 3 * 3
        assert {p.kind for p in profiles} == {SpeakerKind.CONTROL, SpeakerKind.DYSARTHRIC}
        assert (tmp_path / "manifest.jsonl").exists()

        loaded, _ = load_manifest(tmp_path / "manifest.jsonl", strict=True)
        assert loaded == records

        split = split_blocks(records, profiles)
        by_id = {r.utt_id: r for r in records}
        train_words = {by_id[u].word for u in split.train}
        test_words = {by_id[u].word for u in split.test}
        assert test_words - train_words

        audio = read_wav(tmp_path / records[0].audio_path)
        assert audio.sample_rate_hz == 16000
        assert audio.duration_s == pytest.approx(records[0].duration_s)

    def test_deterministic(self, tmp_path):
        config = SyntheticCorpusConfig(common_words=2, uncommon_words_per_block=0, repetitions=1)
        first, _ = generate_synthetic_corpus(tmp_path / "a", config)
        second, _ = generate_synthetic_corpus(tmp_path / "b", config)
        assert first == second
        for a, b in zip(first, second, strict=True):
            assert (tmp_path / "a" / a.audio_path).read_bytes() == (
                tmp_path / "b" / b.audio_path
            ).read_bytes()
