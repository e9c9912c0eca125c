"""Spectrogram frames, utterance embeddings and the FEAT binary format."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .corpus import AudioBuffer

KINDS = ("spectrogram", "embedding")
WINDOWS = ("hann", "hamming", "rect")

FEAT_MAGIC = b"FEAT"
FEAT_VERSION = 1
_FEAT_HEADER = struct.Struct("<4sIBII")


class FeatureError(ValueError):
    """Raised for malformed feature files or inconsistent feature shapes."""


@dataclass(frozen=True)
class FeatureMatrix:
    kind: str
    data: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FeatureError(f"unknown feature kind {self.kind!r}")
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise FeatureError(f"feature matrix must be 2-D and non-empty, got shape {data.shape}")
        if self.kind == "embedding" and data.shape[1] != 1:
            raise FeatureError(f"embedding must have one column, got {data.shape[1]}")
        if not np.isfinite(data).all():
            raise FeatureError("feature matrix contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class StftConfig:
    fft_size: int = 512
    hop: int = 256
    window: str = "hann"
    log_magnitude: bool = False

    def __post_init__(self):
        if self.fft_size < 1 or self.fft_size & (self.fft_size - 1):
            raise FeatureError(f"fft_size must be a power of two, got {self.fft_size}")
        if not 0 < self.hop <= self.fft_size:
            raise FeatureError(f"hop must be in (0, fft_size], got {self.hop}")
        if self.window not in WINDOWS:
            raise FeatureError(f"unknown window {self.window!r}")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1


def window_coefficients(name: str, n: int) -> np.ndarray:
    # periodic windows, as used for spectral analysis
    if name == "rect":
        return np.ones(n)
    k = np.arange(n)
    if name == "hann":
        return 0.5 - 0.5 * np.cos(2 * np.pi * k / n)
    if name == "hamming":
        return 0.54 - 0.46 * np.cos(2 * np.pi * k / n)
    raise FeatureError(f"unknown window {name!r}")


def frame_count(n_samples: int, fft_size: int, hop: int) -> int:
    if n_samples < fft_size:
        return 0
    return 1 + (n_samples - fft_size) // hop


def stft_magnitude(audio: AudioBuffer, cfg: StftConfig = StftConfig()) -> FeatureMatrix:
    """One-sided magnitude spectrogram, frames as rows.

    No padding is applied, so the frame count is ``1 + (N - fft_size) // hop``.
    """
    x = np.asarray(audio.samples, dtype=np.float64)
    n_frames = frame_count(x.size, cfg.fft_size, cfg.hop)
    if n_frames == 0:
        raise FeatureError(f"audio of {x.size} samples is shorter than one frame ({cfg.fft_size})")
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.fft_size)[::cfg.hop][:n_frames]
    mag = np.abs(np.fft.rfft(frames * window_coefficients(cfg.window, cfg.fft_size), axis=1))
    if cfg.log_magnitude:
        mag = np.log(mag + 1e-6)
    return FeatureMatrix("spectrogram", mag)


def mean_log_spectrum(audio: AudioBuffer, cfg: StftConfig = StftConfig()) -> FeatureMatrix:
    """Utterance embedding: the time-averaged log-magnitude spectrum.

    A stand-in for externally computed embeddings when only audio is at hand.
    """
    mag = stft_magnitude(audio, StftConfig(cfg.fft_size, cfg.hop, cfg.window)).data
    return FeatureMatrix("embedding", np.log(mag + 1e-6).mean(axis=0))


# --------------------------------------------------------------------------
# FEAT binary format

def features_to_bytes(m: FeatureMatrix) -> bytes:
    header = _FEAT_HEADER.pack(FEAT_MAGIC, FEAT_VERSION, KINDS.index(m.kind), m.rows, m.cols)
    return header + np.ascontiguousarray(m.data, dtype="<f4").tobytes()


def features_from_bytes(buf: bytes, source="<bytes>") -> FeatureMatrix:
    if len(buf) < _FEAT_HEADER.size:
        raise FeatureError(f"{source}: truncated header")
    magic, version, kind, rows, cols = _FEAT_HEADER.unpack_from(buf, 0)
    if magic != FEAT_MAGIC:
        raise FeatureError(f"{source}: bad magic {magic!r}")
    if version != FEAT_VERSION:
        raise FeatureError(f"{source}: unsupported version {version}")
    if kind >= len(KINDS):
        raise FeatureError(f"{source}: unknown kind code {kind}")
    expected = rows * cols * 4
    payload = buf[_FEAT_HEADER.size:]
    if len(payload) < expected:
        raise FeatureError(f"{source}: truncated payload ({len(payload)} of {expected} bytes)")
    if len(payload) > expected:
        raise FeatureError(f"{source}: {len(payload) - expected} trailing bytes")
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, cols).astype(np.float64)
    try:
        return FeatureMatrix(KINDS[kind], data)
    except FeatureError as exc:
        raise FeatureError(f"{source}: {exc}") from None


def write_features(path, m: FeatureMatrix) -> None:
    Path(path).write_bytes(features_to_bytes(m))


def read_features(path) -> FeatureMatrix:
    return features_from_bytes(Path(path).read_bytes(), source=path)


def load_embedding(path, expected_dim: Optional[int] = None) -> FeatureMatrix:
    m = read_features(path)
    if m.kind != "embedding":
        raise FeatureError(f"{path}: expected an embedding, found {m.kind}")
    if expected_dim is not None and m.rows != expected_dim:
        raise FeatureError(f"{path}: embedding dimension {m.rows}, expected {expected_dim}")
    return m


# --------------------------------------------------------------------------
# normalization

@dataclass(frozen=True)
class Normalizer:
    """Per-column standardization fitted on training features."""

    kind: str
    mean: np.ndarray
    sd: np.ndarray

    def apply(self, m: FeatureMatrix) -> FeatureMatrix:
        return apply_normalizer(self, m)


def fit_normalizer(train_features: Sequence[FeatureMatrix]) -> Normalizer:
    if not train_features:
        raise FeatureError("cannot fit a normalizer on no features")
    kinds = {m.kind for m in train_features}
    if len(kinds) > 1:
        raise FeatureError(f"mixed feature kinds: {sorted(kinds)}")
    cols = {m.cols for m in train_features}
    if len(cols) > 1:
        raise FeatureError(f"mismatched column counts: {sorted(cols)}")
    stacked = np.concatenate([m.data for m in train_features], axis=0)
    if stacked.shape[0] < 2:
        raise FeatureError("need at least 2 rows to fit a normalizer")
    mean = stacked.mean(axis=0)
    sd = stacked.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return Normalizer(kinds.pop(), mean, sd)


def apply_normalizer(n: Normalizer, m: FeatureMatrix) -> FeatureMatrix:
    if m.kind != n.kind:
        raise FeatureError(f"normalizer fitted on {n.kind}, got {m.kind}")
    if m.cols != n.mean.size:
        raise FeatureError(f"normalizer has {n.mean.size} columns, got {m.cols}")
    return FeatureMatrix(m.kind, (m.data - n.mean) / n.sd)
