"""
Dysasr Augmentation Engine

Turns perturbation policies into augmentation jobs and runs them. Jobs
are planned first (pure, deterministic per seed) and then executed on a
thread pool; results keep job order.
"""

import logging
from collections.abc import Iterable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dysasr.core.errors import AugmentationError
from dysasr.core.models import (
    PerturbationMethod,
    PerturbationPolicy,
    PolicyScope,
    Provenance,
    ProvenanceKind,
    SpeakerKind,
    SpeakerProfile,
    UtteranceRecord,
)
from dysasr.corpus.manifest import resolve_audio_path
from dysasr.dsp.audio import read_wav, write_wav
from dysasr.dsp.perturb import speed_perturb, tempo_perturb

logger = logging.getLogger(__name__)

_PERTURBATIONS = {
    PerturbationMethod.SPEED: speed_perturb,
    PerturbationMethod.TEMPO: tempo_perturb,
}


@dataclass(frozen=True)
class AugmentationJob:
    """One perturbed copy of one source utterance."""

    source: UtteranceRecord
    method: PerturbationMethod
    factor: float
    target_speaker: str | None = None

    @property
    def utt_id(self) -> str:
        return f"{self.method.value}{self.factor:.4f}-{self.source.utt_id}"

    @property
    def key(self) -> tuple[str, str, float]:
        return (self.source.utt_id, self.method.value, round(self.factor, 4))


@dataclass
class AugmentationFailure:
    utt_id: str
    method: str
    factor: float
    reason: str


def plan_jobs(
    records: Iterable[UtteranceRecord],
    profiles: Mapping[str, SpeakerProfile],
    policy: PerturbationPolicy,
    rng_seed: int,
) -> list[AugmentationJob]:
    """
    Expand a policy into jobs over the original rows of ``records``.

    Global scope: every dysarthric utterance once per factor. Control-to-
    dysarthric scope: control utterances are assigned round-robin to the
    dysarthric speakers (sorted by id) and perturbed once per jitter
    offset around that speaker's factor; the sign of each nonzero offset
    is drawn from ``rng_seed``.
    """
    rng = np.random.default_rng(rng_seed)
    originals = [r for r in records if not r.is_augmented]
    jobs = []
    if policy.scope == PolicyScope.DYS_GLOBAL:
        for record in originals:
            if profiles[record.speaker_id].kind != SpeakerKind.DYSARTHRIC:
                continue
            for factor in policy.factors:
                jobs.append(AugmentationJob(record, policy.method, round(factor, 4)))
        return jobs

    targets = sorted(policy.speaker_factors)
    controls = [r for r in originals if profiles[r.speaker_id].kind == SpeakerKind.CONTROL]
    for index, record in enumerate(controls):
        target = targets[index % len(targets)]
        base = policy.speaker_factors[target]
        for offset in policy.jitter:
            sign = 1.0 if offset == 0 or rng.random() < 0.5 else -1.0
            factor = round(base + sign * abs(offset), 4)
            jobs.append(AugmentationJob(record, policy.method, factor, target))
    return jobs


def check_unique(
    jobs: Iterable[AugmentationJob], existing: Iterable[UtteranceRecord] = ()
) -> None:
    """Raise AugmentationError if two jobs (or a job and an existing row) share a key."""
    seen = {r.augmentation_key for r in existing if r.is_augmented}
    for job in jobs:
        if job.key in seen:
            utt, method, factor = job.key
            raise AugmentationError(
                f"duplicate augmentation key: utterance={utt} method={method} factor={factor}"
            )
        seen.add(job.key)


class AugmentationEngine:
    """
    Executes augmentation jobs.

    Speed and tempo jobs read the source audio and write a new WAV under
    ``out_dir/<method>/``. VTLP jobs write nothing: the new row points at
    the source audio and the warp is applied at feature extraction.
    Per-utterance failures are logged, collected in ``failures`` and do
    not stop the run.
    """

    def __init__(self, audio_root: Path | str, out_dir: Path | str, jobs: int = 1):
        self._audio_root = Path(audio_root)
        self._out_dir = Path(out_dir)
        self._jobs = max(1, jobs)
        self.failures: list[AugmentationFailure] = []

    @property
    def out_dir(self) -> Path:
        return self._out_dir

    def run(self, jobs: list[AugmentationJob]) -> list[UtteranceRecord]:
        if self._jobs == 1:
            results = [self._run_one(job) for job in jobs]
        else:
            with ThreadPoolExecutor(max_workers=self._jobs) as pool:
                results = list(pool.map(self._run_one, jobs))
        return [r for r in results if r is not None]

    def _run_one(self, job: AugmentationJob) -> UtteranceRecord | None:
        source_path = resolve_audio_path(job.source, self._audio_root)
        provenance = Provenance(
            kind=ProvenanceKind.AUGMENTED,
            method=job.method,
            factor=job.factor,
            source_utt_id=job.source.utt_id,
            target_speaker=job.target_speaker,
        )
        if job.method == PerturbationMethod.VTLP:
            return job.source.model_copy(
                update={
                    "utt_id": job.utt_id,
                    "audio_path": str(source_path),
                    "provenance": provenance,
                }
            )
        try:
            audio = _PERTURBATIONS[job.method](read_wav(source_path), job.factor)
            out_path = self._out_dir / job.method.value / f"{job.utt_id}.wav"
            write_wav(out_path, audio)
        except (OSError, ValueError, RuntimeError) as exc:
            logger.warning("augment failed utt=%s method=%s: %s", job.utt_id, job.method.value, exc)
            self.failures.append(
                AugmentationFailure(job.source.utt_id, job.method.value, job.factor, str(exc))
            )
            return None
        return job.source.model_copy(
            update={
                "utt_id": job.utt_id,
                "audio_path": str(out_path),
                "duration_s": audio.duration_s,
                "provenance": provenance,
            }
        )

    def apply_policy(
        self,
        records: list[UtteranceRecord],
        profiles: Mapping[str, SpeakerProfile],
        policy: PerturbationPolicy,
        rng_seed: int = 0,
    ) -> list[UtteranceRecord]:
        jobs = plan_jobs(records, profiles, policy, rng_seed)
        check_unique(jobs)
        added = self.run(jobs)
        logger.info(
            "policy method=%s scope=%s jobs=%d added=%d",
            policy.method.value,
            policy.scope.value,
            len(jobs),
            len(added),
        )
        return added

    def build_augmented_manifest(
        self,
        records: list[UtteranceRecord],
        profiles: Mapping[str, SpeakerProfile],
        policies: list[PerturbationPolicy],
        rng_seed: int = 0,
    ) -> list[UtteranceRecord]:
        """Originals followed by every policy's additions, in policy order."""
        planned = [
            plan_jobs(records, profiles, policy, rng_seed + index)
            for index, policy in enumerate(policies)
        ]
        check_unique([job for jobs in planned for job in jobs], existing=records)
        out = list(records)
        for policy, jobs in zip(policies, planned, strict=True):
            added = self.run(jobs)
            logger.info(
                "policy method=%s scope=%s jobs=%d added=%d",
                policy.method.value,
                policy.scope.value,
                len(jobs),
                len(added),
            )
            out.extend(added)
        return out


def apply_policy(
    records: list[UtteranceRecord],
    profiles: Mapping[str, SpeakerProfile] | Iterable[SpeakerProfile],
    policy: PerturbationPolicy,
    rng_seed: int = 0,
    audio_root: Path | str | None = None,
    out_dir: Path | str | None = None,
) -> list[UtteranceRecord]:
    """
    Convenience function: augmented additions for one policy.

    Args:
        records: Source rows (only original rows are perturbed)
        profiles: Speaker profiles, as a list or keyed by id
        policy: The policy to apply
        rng_seed: Seed for jitter signs
        audio_root: Folder relative audio paths resolve against
        out_dir: Folder for new audio (defaults to ``audio_root/augmented``)
    """
    root = Path(audio_root) if audio_root is not None else Path.cwd()
    engine = AugmentationEngine(root, out_dir if out_dir is not None else root / "augmented")
    return engine.apply_policy(records, _as_mapping(profiles), policy, rng_seed)


def build_augmented_manifest(
    records: list[UtteranceRecord],
    profiles: Mapping[str, SpeakerProfile] | Iterable[SpeakerProfile],
    policies: list[PerturbationPolicy],
    rng_seed: int = 0,
    audio_root: Path | str | None = None,
    out_dir: Path | str | None = None,
    jobs: int = 1,
) -> list[UtteranceRecord]:
    """Convenience function: originals plus every policy's additions."""
    root = Path(audio_root) if audio_root is not None else Path.cwd()
    engine = AugmentationEngine(
        root, out_dir if out_dir is not None else root / "augmented", jobs=jobs
    )
    return engine.build_augmented_manifest(records, _as_mapping(profiles), policies, rng_seed)


def _as_mapping(
    profiles: Mapping[str, SpeakerProfile] | Iterable[SpeakerProfile],
) -> Mapping[str, SpeakerProfile]:
    if isinstance(profiles, Mapping):
        return profiles
    return {p.speaker_id: p for p in profiles}
