"""
Dysasr Pipeline

Stage runners behind the command line. Every stage owns
``<output_dir>/<name>/<stage>/`` holding its outputs, a ``status.json``
(config hash, input hashes, tool version, seed) and a ``log.txt``. A stage
whose status still matches its config and inputs is skipped.
"""

import hashlib
import json
import logging
from collections.abc import Callable, Iterator
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Any

import numpy as np

from dysasr import __version__
from dysasr.adapt import (
    SpeakerTransform,
    adapt_speakers,
    load_transform_store,
    sat_train,
    save_transform_store,
    select_adaptation_subset,
    write_adaptation_log,
)
from dysasr.augment import (
    PresetRegistry,
    build_augmented_manifest,
    clip_speaker_factors,
    estimate_phone_durations,
    estimate_speaker_factor,
    get_preset_registry,
    profiles_with_durations,
    speaker_mean_durations,
)
from dysasr.core.container import read_container, write_container
from dysasr.core.errors import AlignmentError, ConfigError, MissingStageError
from dysasr.core.models import (
    CorpusSplit,
    ExperimentConfig,
    ModelSource,
    PerturbationMethod,
    PolicyScope,
    ProvenanceKind,
    SearchSpace,
    SpeakerProfile,
    SyntheticCorpusConfig,
    UtteranceRecord,
)
from dysasr.corpus import (
    MANIFEST_NAME,
    build_lexicon,
    generate_synthetic_corpus,
    load_manifest,
    profiles_by_id,
    resolve_audio_path,
    split_blocks,
    write_manifest,
)
from dysasr.decode import (
    DecodeGraph,
    DecodeItem,
    Lexicon,
    Recognizer,
    decode_utterances,
    forced_align,
    read_hypotheses,
    read_nbest,
    state_priors,
    uniform_alignment,
    write_hypotheses,
    write_nbest,
)
from dysasr.dsp import (
    FeatureMatrix,
    FeatureNormalizer,
    extract_features,
    read_feature_archive,
    read_wav,
    write_feature_archive,
)
from dysasr.nas import search, write_architecture
from dysasr.net import (
    FrameDataset,
    HybridDnn,
    UtteranceFrames,
    load_checkpoint,
    save_checkpoint,
    train_model,
)
from dysasr.score import (
    ScoredUtterance,
    compare_systems,
    group_breakdown,
    render_summary,
    tokenize_chars,
    tokenize_words,
    write_report_json,
    write_report_tsv,
)

logger = logging.getLogger(__name__)

STAGES = ["prepare", "augment", "train", "search", "adapt", "decode", "score"]

STATUS_FILE = "status.json"
LOG_FILE = "log.txt"
LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"

ALIGNMENT_MAGIC = b"DYSA"
NORMALIZER_MAGIC = b"DYSN"

# What a downstream stage reports missing when an upstream stage never ran
STAGE_ARTIFACTS = {
    "prepare": "manifest",
    "augment": "training manifest",
    "train": "checkpoint",
    "search": "searched checkpoint",
    "adapt": "transform store",
    "decode": "hypotheses",
    "score": "report",
}

# Config sections each stage depends on (the experiment seed is always included)
STAGE_SECTIONS: dict[str, tuple[str, ...]] = {
    "prepare": ("corpus", "features"),
    "augment": ("augmentation",),
    "train": ("model", "training", "decoding"),
    "search": ("search", "training"),
    "adapt": ("adaptation", "training", "decoding"),
    "decode": ("decoding",),
    "score": ("scoring",),
}


def file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, payload: Any) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_json(path: Path) -> Any:
    return json.loads(path.read_text(encoding="utf-8"))


@contextmanager
def stage_log(path: Path) -> Iterator[None]:
    """Mirror every log record into ``path`` while the block runs."""
    handler = logging.FileHandler(path, mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root = logging.getLogger()
    root.addHandler(handler)
    try:
        yield
    finally:
        root.removeHandler(handler)
        handler.close()


class Pipeline:
    """
    Runs experiment stages for one ExperimentConfig.

    Args:
        config: The experiment
        force: Rerun stages even when their status is current
    """

    def __init__(self, config: ExperimentConfig, force: bool = False):
        self.config = config
        self.force = force
        self.root = config.experiment_dir
        self._presets: PresetRegistry | None = None
        self._check_presets()

    # =========================================================================
    # Stage bookkeeping
    # =========================================================================

    def stage_dir(self, stage: str) -> Path:
        if stage not in STAGES:
            raise KeyError(f"Unknown stage: {stage}. Available: {', '.join(STAGES)}")
        return self.root / stage

    def upstream(self, stage: str) -> list[str]:
        """Stages whose outputs ``stage`` reads."""
        if stage == "prepare":
            return []
        if stage == "augment":
            return ["prepare"]
        if stage == "train":
            return ["prepare", "augment"]
        if stage == "search":
            return ["prepare", "augment", "train"]
        if stage == "adapt":
            return ["prepare", "augment", "train", *self._model_stages(self._adapt_base())]
        if stage == "decode":
            return ["train", *self._model_stages(self.config.decoding.model), "prepare"]
        return ["prepare", "augment", "decode"]

    @staticmethod
    def _model_stages(source: ModelSource) -> list[str]:
        return [] if source == ModelSource.TRAIN else [source.value]

    def _adapt_base(self) -> ModelSource:
        base = self.config.adaptation.base
        if base == ModelSource.ADAPT:
            raise ConfigError("adaptation.base must be 'train' or 'search'")
        return base

    def _status(self, stage: str) -> dict[str, Any] | None:
        path = self.stage_dir(stage) / STATUS_FILE
        return _read_json(path) if path.exists() else None

    def _require(self, stage: str, artifact: str) -> Path:
        """Path of an upstream output; raises MissingStageError when it is absent."""
        path = self.stage_dir(stage) / artifact
        if self._status(stage) is None or not path.exists():
            raise MissingStageError(stage, artifact)
        return path

    def _expected_status(self, stage: str) -> dict[str, Any]:
        inputs = {}
        for up in self.upstream(stage):
            status = self._status(up)
            if status is None:
                raise MissingStageError(up, STAGE_ARTIFACTS[up])
            inputs[up] = hashlib.sha256(
                json.dumps(status["outputs"], sort_keys=True).encode("utf-8")
            ).hexdigest()
        return {
            "stage": stage,
            "version": __version__,
            "seed": self.config.seed,
            "config_hash": self.config.section_hash(*STAGE_SECTIONS[stage]),
            "inputs": inputs,
        }

    def is_current(self, stage: str) -> bool:
        status = self._status(stage)
        if status is None:
            return False
        expected = self._expected_status(stage)
        return all(status.get(k) == v for k, v in expected.items())

    def run_stage(self, stage: str) -> Path:
        """Run one stage unless it is up to date; returns its directory."""
        runners: dict[str, Callable[[Path], list[Path]]] = {
            "prepare": self._prepare,
            "augment": self._augment,
            "train": self._train,
            "search": self._search,
            "adapt": self._adapt,
            "decode": self._decode,
            "score": self._score,
        }
        out = self.stage_dir(stage)
        expected = self._expected_status(stage)
        if not self.force and self.is_current(stage):
            logger.info("stage=%s up to date, skipping", stage)
            return out
        out.mkdir(parents=True, exist_ok=True)
        status_path = out / STATUS_FILE
        if status_path.exists():
            status_path.unlink()
        with stage_log(out / LOG_FILE):
            logger.info("stage=%s start dir=%s", stage, out)
            outputs = runners[stage](out)
            expected["outputs"] = {
                p.relative_to(out).as_posix(): file_digest(p) for p in sorted(outputs)
            }
            _write_json(status_path, expected)
            logger.info("stage=%s done outputs=%d", stage, len(outputs))
        return out

    def stages_for_run(self) -> list[str]:
        """Stages ``run`` executes, in order."""
        needed = {"prepare", "augment", "train", "decode", "score"}
        if self.config.decoding.model == ModelSource.ADAPT:
            needed.add("adapt")
            if self._adapt_base() == ModelSource.SEARCH:
                needed.add("search")
        if self.config.decoding.model == ModelSource.SEARCH:
            needed.add("search")
        return [s for s in STAGES if s in needed]

    def run(self, stages: list[str] | None = None) -> None:
        for stage in stages or self.stages_for_run():
            self.run_stage(stage)

    # =========================================================================
    # Shared helpers
    # =========================================================================

    @property
    def frame_shift_s(self) -> float:
        return self.config.features.filterbank.shift_s

    @property
    def splice(self) -> tuple[int, int]:
        return self.config.features.splice_left, self.config.features.splice_right

    def _seed(self, section_seed: int) -> int:
        return section_seed + self.config.seed

    def _preset_registry(self) -> PresetRegistry:
        if self._presets is None:
            self._presets = get_preset_registry(self.config.augmentation.preset_file)
        return self._presets

    def _check_presets(self) -> None:
        names = self.config.augmentation.presets
        if not names:
            return
        registry = self._preset_registry()
        missing = [n for n in names if n not in registry.list_presets()]
        if missing:
            available = ", ".join(registry.list_presets())
            raise ConfigError(f"Unknown augmentation presets: {missing}. Available: {available}")

    def _corpus(self) -> tuple[list[UtteranceRecord], dict[str, SpeakerProfile], CorpusSplit]:
        records, profiles = load_manifest(self._require("prepare", MANIFEST_NAME))
        split = CorpusSplit.model_validate(_read_json(self._require("prepare", "split.json")))
        return records, profiles_by_id(profiles), split

    def _train_records(self) -> list[UtteranceRecord]:
        records, _ = load_manifest(self._require("augment", MANIFEST_NAME))
        return records

    def _features(self, record: UtteranceRecord) -> FeatureMatrix:
        stage = "augment" if record.is_augmented else "prepare"
        return read_feature_archive(self._require(stage, f"features/{record.utt_id}.fea"))

    def _normalizer(self) -> FeatureNormalizer:
        tensors, _ = read_container(self._require("prepare", "normalizer.bin"), NORMALIZER_MAGIC)
        return FeatureNormalizer(mean=tensors["mean"], std=tensors["std"])

    def _extract_all(self, records: list[UtteranceRecord], out: Path) -> list[Path]:
        """Feature archives for ``records`` under ``out/features``."""

        def _one(record: UtteranceRecord) -> Path:
            vtlp = 1.0
            if record.provenance.method == PerturbationMethod.VTLP:
                vtlp = float(record.provenance.factor)
            m = extract_features(read_wav(record.audio_path), self.config.features, vtlp)
            path = out / "features" / f"{record.utt_id}.fea"
            write_feature_archive(path, m)
            return path

        with ThreadPoolExecutor(max_workers=self.config.jobs) as pool:
            return list(pool.map(_one, records))

    def _lexicon(self, records: list[UtteranceRecord]) -> tuple[Lexicon, list[str]]:
        lexicon = build_lexicon(records)
        phones = lexicon.phone_inventory
        silence = self.config.decoding.silence_word
        if silence is not None:
            lexicon = lexicon.with_word(silence, [self.config.decoding.silence_phone])
            phones = lexicon.phone_inventory
        return lexicon, phones

    def _graph(self, meta: dict[str, Any]) -> DecodeGraph:
        lexicon = Lexicon(meta["lexicon"])
        return DecodeGraph.build(lexicon, meta["phones"], self.config.decoding)

    def _load_model(self, source: ModelSource) -> tuple[HybridDnn, FeatureNormalizer, dict]:
        stage = source.value
        model, normalizer, meta = load_checkpoint(self._require(stage, "model.ckpt"))
        if normalizer is None:
            normalizer = self._normalizer()
        return model, normalizer, meta

    def _alignments(self) -> tuple[dict[str, np.ndarray], np.ndarray]:
        tensors, _ = read_container(self._require("train", "alignments.bin"), ALIGNMENT_MAGIC)
        aligned = {
            k.removeprefix("align/"): v for k, v in tensors.items() if k.startswith("align/")
        }
        return aligned, tensors["priors"]

    def _training_dataset(
        self, graph: DecodeGraph, normalizer: FeatureNormalizer
    ) -> FrameDataset:
        alignments, _ = self._alignments()
        utterances = []
        for record in self._train_records():
            if record.utt_id not in alignments:
                continue
            states = alignments[record.utt_id]
            utterances.append(
                UtteranceFrames(
                    record.utt_id,
                    record.speaker_id,
                    self._features(record).frames,
                    states,
                    states // graph.states_per_phone,
                )
            )
        return FrameDataset.from_utterances(utterances, *self.splice, normalizer)

    # =========================================================================
    # Stages
    # =========================================================================

    def _prepare(self, out: Path) -> list[Path]:
        corpus = self.config.corpus
        if corpus.manifest is not None:
            records, profiles = load_manifest(corpus.manifest, strict=self.config.strict)
            audio_root = corpus.manifest.parent
        else:
            synthetic = corpus.synthetic.model_copy(
                update={"seed": self._seed(corpus.synthetic.seed)}
            )
            audio_root = out / "corpus"
            records, profiles = generate_synthetic_corpus(audio_root, synthetic)

        records = [
            r.model_copy(update={"audio_path": str(resolve_audio_path(r, audio_root).resolve())})
            for r in records
        ]
        split = split_blocks(records, profiles, corpus.protocol, corpus.custom)
        write_manifest(records, profiles, out / MANIFEST_NAME)
        _write_json(out / "split.json", split.model_dump(mode="json"))

        features = self._extract_all(records, out)
        train_ids = set(split.train)
        normalizer = FeatureNormalizer.fit(
            [
                read_feature_archive(p).frames
                for r, p in zip(records, features, strict=True)
                if r.utt_id in train_ids
            ]
        )
        write_container(
            out / "normalizer.bin",
            NORMALIZER_MAGIC,
            {"mean": normalizer.mean, "std": normalizer.std},
        )
        logger.info(
            "prepared utterances=%d train=%d test=%d",
            len(records),
            len(split.train),
            len(split.test),
        )
        return [out / MANIFEST_NAME, out / "split.json", out / "normalizer.bin", *features]

    def _augment(self, out: Path) -> list[Path]:
        records, profiles, split = self._corpus()
        train_ids = set(split.train)
        train_records = [r for r in records if r.utt_id in train_ids]
        aug = self.config.augmentation
        seed = self._seed(0)

        durations = estimate_phone_durations(train_records)
        means = speaker_mean_durations(durations, train_records)
        policies = []
        speaker_factors: dict[str, float] = {}
        if aug.presets:
            registry = self._preset_registry()
            templates = [t for name in aug.presets for t in registry.get(name).policies]
            if any(t.scope == PolicyScope.CONTROL_TO_DYS for t in templates):
                factors = estimate_speaker_factor(durations, train_records, profiles.values())
                jitter = {j for t in templates for j in t.jitter}
                if aug.clip_speaker_factors:
                    speaker_factors = clip_speaker_factors(factors, sorted(jitter))
                else:
                    speaker_factors = {f.speaker_id: f.value for f in factors}
                _write_json(
                    out / "factors.json",
                    {
                        "estimated": {f.speaker_id: f.value for f in factors},
                        "applied": speaker_factors,
                    },
                )
            for name in aug.presets:
                policies.extend(registry.resolve(name, speaker_factors))

        augmented = build_augmented_manifest(
            train_records,
            profiles,
            policies,
            rng_seed=seed,
            out_dir=out / "audio",
            jobs=self.config.jobs,
        )
        added = [r for r in augmented if r.provenance.kind == ProvenanceKind.AUGMENTED]
        features = self._extract_all(added, out)
        write_manifest(
            augmented, profiles_with_durations(profiles.values(), means), out / MANIFEST_NAME
        )
        logger.info("augmented original=%d added=%d", len(train_records), len(added))
        outputs = [out / MANIFEST_NAME, *features]
        if (out / "factors.json").exists():
            outputs.append(out / "factors.json")
        return outputs

    def _train(self, out: Path) -> list[Path]:
        records, _, _ = self._corpus()
        train_records = self._train_records()
        lexicon, phones = self._lexicon(records)
        graph = DecodeGraph.build(lexicon, phones, self.config.decoding)
        normalizer = self._normalizer()
        training = self.config.training.model_copy(
            update={"seed": self._seed(self.config.training.seed)}
        )

        frames: dict[str, np.ndarray] = {}
        alignments: dict[str, np.ndarray] = {}
        for record in train_records:
            m = self._features(record)
            try:
                alignments[record.utt_id] = uniform_alignment(graph, record.word, m.n_frames)
            except AlignmentError as exc:
                logger.warning("skipping utt=%s: %s", record.utt_id, exc)
                continue
            frames[record.utt_id] = m.frames
        if not alignments:
            raise AlignmentError("no training utterance is long enough to align")

        frame_dim = next(iter(frames.values())).shape[1]
        input_dim = frame_dim * (sum(self.splice) + 1)
        spec = self.config.model.build_spec(input_dim, graph.n_states, len(phones))
        model = HybridDnn(spec, seed=training.seed)
        by_id = {r.utt_id: r for r in train_records}
        losses_log = []
        floor = self.config.decoding.prior_floor
        for pass_id in range(training.realign_passes + 1):
            utterances = [
                UtteranceFrames(
                    utt_id,
                    by_id[utt_id].speaker_id,
                    frames[utt_id],
                    states,
                    states // graph.states_per_phone,
                )
                for utt_id, states in alignments.items()
            ]
            dataset = FrameDataset.from_utterances(utterances, *self.splice, normalizer)
            model, losses = train_model(model, dataset, training)
            losses_log.extend(
                {"pass": pass_id, "epoch": e, "loss": loss} for e, loss in enumerate(losses)
            )
            if pass_id == training.realign_passes:
                break
            priors = state_priors(alignments.values(), graph.n_states, floor)
            scorer = Recognizer(model, priors, graph, self.config.decoding, normalizer, self.splice)
            alignments = {
                utt_id: forced_align(graph, by_id[utt_id].word, scorer.frame_scores(frames[utt_id]))
                for utt_id in alignments
            }
            logger.info("realigned pass=%d utterances=%d", pass_id, len(alignments))

        priors = state_priors(alignments.values(), graph.n_states, floor)
        tensors = {f"align/{k}": v for k, v in alignments.items()}
        tensors["priors"] = priors
        write_container(out / "alignments.bin", ALIGNMENT_MAGIC, tensors, {"seed": training.seed})
        meta = {
            "lexicon": {w: list(lexicon.pronunciation(w)) for w in lexicon.words},
            "phones": phones,
            "seed": training.seed,
        }
        save_checkpoint(out / "model.ckpt", model, normalizer, meta)
        with open(out / "train_log.jsonl", "w", encoding="utf-8") as f:
            for record in losses_log:
                f.write(json.dumps(record, sort_keys=True) + "\n")
        logger.info("trained params=%d states=%d", model.parameter_count(), graph.n_states)
        return [out / "model.ckpt", out / "alignments.bin", out / "train_log.jsonl"]

    def _search(self, out: Path) -> list[Path]:
        settings = self.config.search
        if not settings.enabled:
            raise ConfigError("search stage requested but search.enabled is false")
        base, normalizer, meta = self._load_model(ModelSource.TRAIN)
        graph = self._graph(meta)
        dataset = self._training_dataset(graph, normalizer)
        nas = settings.nas.model_copy(update={"seed": self._seed(settings.nas.seed)})
        training = self.config.training.model_copy(
            update={"seed": self._seed(self.config.training.seed)}
        )
        candidates = settings.resolve_candidates(self.config.model.hidden_width)
        space = SearchSpace.build(base.spec, candidates, settings.layers, nas.count_scale)
        result = search(
            dataset,
            base.spec,
            space,
            nas,
            training,
            retrain_config=settings.retrain,
            inherit_weights=settings.inherit_weights,
            log_path=out / "search_log.jsonl",
        )
        write_architecture(out / "architecture.json", result.widths, result.spec)
        meta = {**meta, "widths": {str(k): v for k, v in result.widths.items()}}
        save_checkpoint(out / "model.ckpt", result.model, normalizer, meta)
        logger.info(
            "searched params=%d base_params=%d",
            result.model.parameter_count(),
            base.parameter_count(),
        )
        return [out / "architecture.json", out / "search_log.jsonl", out / "model.ckpt"]

    def _adapt(self, out: Path) -> list[Path]:
        settings = self.config.adaptation.model_copy(
            update={"seed": self._seed(self.config.adaptation.seed)}
        )
        model, normalizer, meta = self._load_model(self._adapt_base())
        graph = self._graph(meta)
        _, priors = self._alignments()

        init: dict[str, SpeakerTransform] = {}
        if settings.sat:
            training = self.config.training.model_copy(
                update={"seed": self._seed(self.config.training.seed)}
            )
            dataset = self._training_dataset(graph, normalizer)
            model, init = sat_train(model, dataset, settings, training)

        # 1-best supervision from the system before test-time adaptation
        recognizer = Recognizer(
            model,
            priors,
            graph,
            self.config.decoding,
            normalizer,
            self.splice,
            {s: t.hooks() for s, t in init.items()},
        )
        records, _, split = self._corpus()
        by_id = {r.utt_id: r for r in records}
        by_speaker: dict[str, list[str]] = {}
        for utt_id in split.test:
            by_speaker.setdefault(by_id[utt_id].speaker_id, []).append(utt_id)

        datasets: dict[str, FrameDataset] = {}
        chosen: dict[str, list[str]] = {}
        for speaker in sorted(by_speaker):
            subset = select_adaptation_subset(by_speaker[speaker], settings.budget, settings.seed)
            utterances = []
            for utt_id in subset:
                frames = self._features(by_id[utt_id]).frames
                words = recognizer.recognize(DecodeItem(utt_id, speaker, frames)).best.words
                if len(words) != 1:
                    logger.warning("no single-word supervision for utt=%s: %s", utt_id, words)
                    continue
                states = forced_align(graph, words[0], recognizer.frame_scores(frames, speaker))
                utterances.append(
                    UtteranceFrames(
                        utt_id, speaker, frames, states, states // graph.states_per_phone
                    )
                )
            if utterances:
                chosen[speaker] = [u.utt_id for u in utterances]
                datasets[speaker] = FrameDataset.from_utterances(
                    utterances, *self.splice, normalizer
                )

        adapted, log = adapt_speakers(
            model, datasets, settings, init, self.config.jobs, self.frame_shift_s
        )
        transforms = {**init, **adapted}
        save_transform_store(out / "transforms.bin", transforms)
        write_adaptation_log(out / "adapt_log.jsonl", log)
        _write_json(out / "subset.json", chosen)
        save_checkpoint(out / "model.ckpt", model, normalizer, meta)
        logger.info("adapted speakers=%d method=%s", len(adapted), settings.method.value)
        return [
            out / "transforms.bin",
            out / "adapt_log.jsonl",
            out / "subset.json",
            out / "model.ckpt",
        ]

    def _decode(self, out: Path) -> list[Path]:
        source = self.config.decoding.model
        model, normalizer, meta = self._load_model(source)
        graph = self._graph(meta)
        _, priors = self._alignments()
        hooks = {}
        if source == ModelSource.ADAPT and self.config.decoding.use_transforms:
            store = load_transform_store(self._require("adapt", "transforms.bin"))
            hooks = {s: t.hooks() for s, t in store.items()}

        records, _, split = self._corpus()
        by_id = {r.utt_id: r for r in records}
        items = [
            DecodeItem(u, by_id[u].speaker_id, self._features(by_id[u]).frames)
            for u in split.test
        ]
        recognizer = Recognizer(
            model, priors, graph, self.config.decoding, normalizer, self.splice, hooks
        )
        nbests = decode_utterances(recognizer, items, self.config.jobs)
        write_hypotheses(out / "hyp.txt", nbests)
        write_nbest(out / "nbest.txt", nbests)
        logger.info("decoded utterances=%d model=%s", len(nbests), source.value)
        return [out / "hyp.txt", out / "nbest.txt"]

    def _scored(
        self, decode_dir: Path, records: dict[str, UtteranceRecord]
    ) -> list[ScoredUtterance]:
        for name in ("hyp.txt", "nbest.txt"):
            if not (decode_dir / name).exists():
                raise MissingStageError("decode", str(decode_dir / name))
        hyps = read_hypotheses(decode_dir / "hyp.txt")
        nbests = read_nbest(decode_dir / "nbest.txt")
        return [
            ScoredUtterance(
                utt_id=u,
                speaker_id=records[u].speaker_id,
                reference=records[u].word,
                hypothesis=h.text,
                nbest=[x.text for x in nbests[u]] if u in nbests else [],
            )
            for u, h in sorted(hyps.items())
        ]

    def _score(self, out: Path) -> list[Path]:
        scoring = self.config.scoring
        tokenize = tokenize_chars if scoring.characters else tokenize_words
        records, profiles, _ = self._corpus()
        by_id = {r.utt_id: r for r in records}
        vocabulary = {r.word for r in self._train_records()}

        self._require("decode", "hyp.txt")
        ours = self._scored(self.stage_dir("decode"), by_id)
        report = group_breakdown(ours, profiles, vocabulary, self.config.name, tokenize)
        others = []
        for path in scoring.compare_with:
            decode_dir = path / "decode" if (path / "decode").is_dir() else path
            label = path.name
            theirs = self._scored(decode_dir, by_id)
            others.append(group_breakdown(theirs, profiles, vocabulary, label, tokenize))
            report.significance.append(
                compare_systems(ours, theirs, scoring.alpha, self.config.name, label, tokenize)
            )

        write_report_json(out / "report.json", report)
        write_report_tsv(out / "report.tsv", [report, *others])
        (out / "summary.txt").write_text(render_summary([report, *others]), encoding="utf-8")
        logger.info("scored system=%s wer=%.2f", report.system, report.wer)
        return [out / "report.json", out / "report.tsv", out / "summary.txt"]


def synthesize(out_dir: Path, seed: int = 0, **overrides: Any) -> list[UtteranceRecord]:
    """Write the bundled synthetic corpus to ``out_dir``."""
    config = SyntheticCorpusConfig(seed=seed, **overrides)
    records, _ = generate_synthetic_corpus(out_dir, config)
    return records
