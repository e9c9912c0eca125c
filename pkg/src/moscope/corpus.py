"""Corpus manifests and PCM WAV audio.

A manifest is a comma-separated file with the fixed header
``utt_id,speaker_id,system_id,mos,split,audio_path``. An empty ``mos`` field
means the utterance is unlabeled.
"""
from __future__ import annotations

import csv
import io
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

log = logging.getLogger(__name__)

MANIFEST_COLUMNS = ("utt_id", "speaker_id", "system_id", "mos", "split", "audio_path")
SPLITS = ("train", "val", "test")
DEFAULT_SCALE = (1.0, 10.0)


class CorpusError(ValueError):
    """Raised for malformed manifests."""


class WavFormatError(ValueError):
    """Raised for WAV files outside the supported PCM subset."""


@dataclass(frozen=True)
class UtteranceRecord:
    utt_id: str
    speaker_id: str
    system_id: str
    mos: Optional[float]
    split: str
    audio_path: str


@dataclass(frozen=True)
class CorpusManifest:
    records: tuple[UtteranceRecord, ...] = ()
    scale_min: float = DEFAULT_SCALE[0]
    scale_max: float = DEFAULT_SCALE[1]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        _validate(self.records, self.scale_min, self.scale_max)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def by_id(self) -> dict[str, UtteranceRecord]:
        return {r.utt_id: r for r in self.records}

    def split(self, name: str) -> list[UtteranceRecord]:
        return [r for r in self.records if r.split == name]

    def labeled(self) -> list[UtteranceRecord]:
        return [r for r in self.records if r.mos is not None]


def _validate(records: Iterable[UtteranceRecord], lo: float, hi: float) -> None:
    if not lo < hi:
        raise CorpusError(f"scale_min ({lo}) must be below scale_max ({hi})")
    seen: set[str] = set()
    for r in records:
        if not r.utt_id:
            raise CorpusError("empty utt_id")
        if r.utt_id in seen:
            raise CorpusError(f"duplicate utt_id {r.utt_id!r}")
        seen.add(r.utt_id)
        if r.split not in SPLITS:
            raise CorpusError(f"{r.utt_id}: unknown split {r.split!r}")
        if r.mos is not None and not (lo <= r.mos <= hi):
            raise CorpusError(f"{r.utt_id}: mos {r.mos} outside [{lo}, {hi}]")


def load_manifest(path, scale_min: float = DEFAULT_SCALE[0],
                  scale_max: float = DEFAULT_SCALE[1]) -> CorpusManifest:
    """Parse and validate a manifest file.

    Errors name the offending ``utt_id`` when one is available, otherwise the
    line number.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CorpusError(f"{path}: empty manifest (no header)") from None
        header = [h.strip() for h in header]
        missing = [c for c in MANIFEST_COLUMNS if c not in header]
        if missing:
            raise CorpusError(f"{path}: missing column(s) {', '.join(missing)}")
        idx = {c: header.index(c) for c in MANIFEST_COLUMNS}
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                raise CorpusError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            get = lambda c: row[idx[c]].strip()  # noqa: E731
            utt_id = get("utt_id")
            where = utt_id or f"line {lineno}"
            raw_mos = get("mos")
            if raw_mos:
                try:
                    mos = float(raw_mos)
                except ValueError:
                    raise CorpusError(f"{path}: {where}: mos {raw_mos!r} is not a number") from None
            else:
                mos = None
            records.append(UtteranceRecord(utt_id, get("speaker_id"), get("system_id"),
                                           mos, get("split"), get("audio_path")))
            if not utt_id:
                raise CorpusError(f"{path}:{lineno}: empty utt_id")
    try:
        return CorpusManifest(tuple(records), scale_min, scale_max)
    except CorpusError as exc:
        raise CorpusError(f"{path}: {exc}") from None


def _format_mos(mos: Optional[float]) -> str:
    return "" if mos is None else repr(float(mos))


def manifest_to_text(manifest: CorpusManifest) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MANIFEST_COLUMNS)
    for r in manifest.records:
        writer.writerow([r.utt_id, r.speaker_id, r.system_id, _format_mos(r.mos),
                         r.split, r.audio_path])
    return buf.getvalue()


def write_manifest(path, manifest: CorpusManifest) -> None:
    Path(path).write_text(manifest_to_text(manifest), encoding="utf-8", newline="")


def validate_speaker_disjointness(manifest: CorpusManifest) -> list[str]:
    """Return the sorted speakers that occur in more than one split.

    A non-empty result is logged as a warning; overlapping splits are legal.
    """
    splits_of: dict[str, set[str]] = {}
    for r in manifest.records:
        splits_of.setdefault(r.speaker_id, set()).add(r.split)
    overlap = sorted(s for s, sp in splits_of.items() if len(sp) > 1)
    if overlap:
        log.warning("speakers present in more than one split: %s", ", ".join(overlap))
    return overlap


# --------------------------------------------------------------------------
# audio

@dataclass(frozen=True)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("audio samples must be one-dimensional (mono)")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if samples.size and (np.abs(samples).max() > 1.0 or not np.isfinite(samples).all()):
            raise ValueError("audio samples must be finite and within [-1, 1]")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


_WAVE_FORMAT_PCM = 1


def read_wav(path) -> AudioBuffer:
    """Read a 16-bit mono little-endian PCM WAV file.

    Samples are scaled by 1/32768, so -32768 maps to -1.0 exactly.
    """
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")
    pos = 12
    fmt = None
    pcm = None
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        size = struct.unpack_from("<I", data, pos + 4)[0]
        body = data[pos + 8:pos + 8 + size]
        if cid == b"fmt ":
            if size < 16 or len(body) < 16:
                raise WavFormatError(f"{path}: truncated fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data":
            if len(body) < size:
                raise WavFormatError(f"{path}: truncated data chunk")
            pcm = body
            break
        pos += 8 + size + (size & 1)
    if fmt is None:
        raise WavFormatError(f"{path}: missing fmt chunk")
    if pcm is None:
        raise WavFormatError(f"{path}: missing data chunk")
    tag, channels, rate, _, _, bits = fmt
    if tag != _WAVE_FORMAT_PCM:
        raise WavFormatError(f"{path}: unsupported format tag {tag} (only PCM)")
    if channels != 1:
        raise WavFormatError(f"{path}: multichannel audio ({channels} channels) is not supported")
    if bits != 16:
        raise WavFormatError(f"{path}: bit depth {bits} is not supported (16 only)")
    if len(pcm) % 2:
        raise WavFormatError(f"{path}: odd data chunk length")
    ints = np.frombuffer(pcm, dtype="<i2")
    return AudioBuffer(ints.astype(np.float64) / 32768.0, rate)


def write_wav(path, audio: AudioBuffer) -> None:
    """Write 16-bit mono PCM; samples are rounded and saturated to int16."""
    ints = np.clip(np.round(audio.samples * 32768.0), -32768, 32767).astype("<i2")
    payload = ints.tobytes()
    header = struct.pack("<4sI4s4sIHHIIHH4sI", b"RIFF", 36 + len(payload), b"WAVE",
                         b"fmt ", 16, _WAVE_FORMAT_PCM, 1, audio.sample_rate,
                         audio.sample_rate * 2, 2, 16, b"data", len(payload))
    Path(path).write_bytes(header + payload)
