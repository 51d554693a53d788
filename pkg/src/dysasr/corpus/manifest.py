"""
Dysasr Manifest I/O

Line-delimited JSON manifests holding speaker profiles and utterance rows.

The first line is a schema header::

    {"schema": "dysasr-manifest", "version": 1}

followed by one object per line, tagged ``"type": "speaker"`` or
``"type": "utterance"``. An utterance line may carry ``speaker_kind`` and
``speaker_band`` to define its speaker inline. The header is optional on
read; files without it are treated as version 1.
"""

import json
import logging
from collections.abc import Iterable
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ValidationError

from dysasr.core.errors import ManifestError
from dysasr.core.models import SpeakerProfile, UtteranceRecord

logger = logging.getLogger(__name__)

MANIFEST_SCHEMA = "dysasr-manifest"
MANIFEST_VERSION = 1

_INLINE_SPEAKER_KEYS = ("speaker_kind", "speaker_band")


def _first_error(exc: ValidationError) -> str:
    err = exc.errors()[0]
    where = ".".join(str(p) for p in err["loc"])
    return f"{where}: {err['msg']}" if where else err["msg"]


def load_manifest(
    path: Path | str, strict: bool = False
) -> tuple[list[UtteranceRecord], list[SpeakerProfile]]:
    """
    Load and validate a manifest.

    Args:
        path: Manifest file
        strict: Reject keys the row models do not define and check that
            every referenced audio file exists (relative paths resolve
            against the manifest's folder)

    Returns:
        (records, profiles) in file order

    Raises:
        FileNotFoundError: the manifest itself is missing
        ManifestError: parse error, duplicate utt_id, unknown speaker,
            unsupported schema, or (strict) unknown keys and missing audio
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Manifest not found: {path}")

    records: list[UtteranceRecord] = []
    record_lines: list[int] = []
    profiles: dict[str, SpeakerProfile] = {}
    seen_utts: set[str] = set()

    with open(path, encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            text = raw.strip()
            if not text:
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"parse error: {exc.msg}", str(path), line_no) from exc
            if not isinstance(obj, dict):
                raise ManifestError("expected a JSON object", str(path), line_no)

            if "schema" in obj:
                if line_no != 1 or obj["schema"] != MANIFEST_SCHEMA:
                    raise ManifestError(f"unexpected header {obj}", str(path), line_no)
                if obj.get("version") != MANIFEST_VERSION:
                    raise ManifestError(
                        f"unsupported manifest version {obj.get('version')}", str(path), line_no
                    )
                continue

            kind = obj.pop("type", "utterance")
            try:
                if kind == "speaker":
                    if strict:
                        _check_keys(obj, SpeakerProfile, path, line_no)
                    _add_profile(profiles, SpeakerProfile.model_validate(obj), path, line_no)
                elif kind == "utterance":
                    inline = {k: obj.pop(k) for k in _INLINE_SPEAKER_KEYS if k in obj}
                    if strict:
                        _check_keys(obj, UtteranceRecord, path, line_no)
                    record = UtteranceRecord.model_validate(obj)
                    if inline:
                        profile = SpeakerProfile(
                            speaker_id=record.speaker_id,
                            kind=inline.get("speaker_kind"),
                            band=inline.get("speaker_band"),
                        )
                        _add_profile(profiles, profile, path, line_no, inline=True)
                    if record.utt_id in seen_utts:
                        raise ManifestError(
                            f"duplicate utt_id {record.utt_id}", str(path), line_no
                        )
                    seen_utts.add(record.utt_id)
                    records.append(record)
                    record_lines.append(line_no)
                else:
                    raise ManifestError(f"unknown line type {kind!r}", str(path), line_no)
            except ValidationError as exc:
                raise ManifestError(_first_error(exc), str(path), line_no) from exc

    for record, line_no in zip(records, record_lines, strict=True):
        if record.speaker_id not in profiles:
            raise ManifestError(f"unknown speaker {record.speaker_id}", str(path), line_no)
        if strict:
            audio = resolve_audio_path(record, path.parent)
            if not audio.exists():
                raise ManifestError(f"audio not found: {audio}", str(path), line_no)

    logger.debug("manifest=%s records=%d speakers=%d", path, len(records), len(profiles))
    return records, list(profiles.values())


def _check_keys(obj: dict[str, Any], model: type[BaseModel], path: Path, line_no: int) -> None:
    unknown = sorted(set(obj) - set(model.model_fields))
    if unknown:
        raise ManifestError(f"unknown keys: {', '.join(unknown)}", str(path), line_no)


def _add_profile(
    profiles: dict[str, SpeakerProfile],
    profile: SpeakerProfile,
    path: Path,
    line_no: int,
    inline: bool = False,
) -> None:
    existing = profiles.get(profile.speaker_id)
    if existing is None:
        profiles[profile.speaker_id] = profile
        return
    if inline and existing.kind == profile.kind and existing.band == profile.band:
        return
    raise ManifestError(f"conflicting profile for speaker {profile.speaker_id}", str(path), line_no)


def write_manifest(
    records: Iterable[UtteranceRecord],
    profiles: Iterable[SpeakerProfile],
    path: Path | str,
) -> None:
    """
    Write a manifest that :func:`load_manifest` reads back field-equal.

    Speakers are written first, then utterances, each in the given order.
    """
    records = list(records)
    profiles = list(profiles)
    known = {p.speaker_id for p in profiles}
    for record in records:
        if record.speaker_id not in known:
            raise ManifestError(f"unknown speaker {record.speaker_id} in {record.utt_id}")
    ids = [r.utt_id for r in records]
    if len(ids) != len(set(ids)):
        raise ManifestError("duplicate utt_id in records")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(_dumps({"schema": MANIFEST_SCHEMA, "version": MANIFEST_VERSION}))
        for profile in profiles:
            f.write(_dumps({"type": "speaker", **profile.model_dump(mode="json")}))
        for record in records:
            f.write(_dumps({"type": "utterance", **record.model_dump(mode="json")}))


def _dumps(obj: dict[str, Any]) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True) + "\n"


def resolve_audio_path(record: UtteranceRecord, root: Path | str) -> Path:
    """Absolute audio path of ``record`` (relative paths are under ``root``)."""
    audio = Path(record.audio_path)
    return audio if audio.is_absolute() else Path(root) / audio


def profiles_by_id(profiles: Iterable[SpeakerProfile]) -> dict[str, SpeakerProfile]:
    return {p.speaker_id: p for p in profiles}
