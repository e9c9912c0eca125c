"""Synthetic multi-speaker, multi-system corpus with known quality.

Every utterance is a harmonic tone sequence in a speaker-specific voice,
degraded by single-pole lowpass smoothing and additive white noise. Both get
stronger with a scalar severity

    q = clamp(b_system + c_speaker + jitter, 0, 1)

and the label is ``clamp(10 - 9 q + noise, 1, 10)``. System severities are
equally spaced on [0, 1]; speaker clarity offsets lie in [-0.1, 0.1].
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .corpus import AudioBuffer, CorpusManifest, UtteranceRecord, write_manifest, write_wav

MANIFEST_NAME = "manifest.csv"
JITTER = 0.05
CLARITY = 0.1
F0_RANGE = (90.0, 280.0)
CLEAN_RMS = 0.1
MAX_HARMONIC_HZ = 4000.0
NOTES_PER_SECOND = 2.0


@dataclass(frozen=True)
class SynthSpec:
    n_speakers: int = 10
    n_systems: int = 5
    utts_per_pair: int = 20
    seed: int = 0
    duration_s: float = 2.0
    sample_rate: int = 16000
    label_noise_sd: float = 0.3

    def __post_init__(self):
        if self.n_speakers < 2:
            raise ValueError("n_speakers must be >= 2")
        if self.n_systems < 2:
            raise ValueError("n_systems must be >= 2")
        if self.utts_per_pair < 1:
            raise ValueError("utts_per_pair must be >= 1")
        if self.duration_s <= 0 or self.sample_rate <= 0:
            raise ValueError("duration_s and sample_rate must be positive")
        if self.label_noise_sd < 0:
            raise ValueError("label_noise_sd must be >= 0")


@dataclass(frozen=True)
class Speaker:
    speaker_id: str
    f0: float
    clarity: float
    harmonic_tilt: float
    harmonic_weights: tuple
    split: str


def speaker_id(i):
    return f"spk{i:03d}"


def system_id(k):
    return f"sys{k:02d}"


def system_severities(n_systems):
    return np.linspace(0.0, 1.0, n_systems)


def split_sizes(n):
    """Speaker counts for (train, val, test) on a 60/20/20 partition."""
    n_test = max(1, round(0.2 * n))
    n_val = max(1, round(0.2 * n)) if n >= 3 else 0
    return n - n_val - n_test, n_val, n_test


def speakers(spec: SynthSpec) -> list[Speaker]:
    rng = np.random.default_rng([spec.seed, 0])
    n_train, n_val, _ = split_sizes(spec.n_speakers)
    order = rng.permutation(spec.n_speakers)
    split_of = {}
    for pos, i in enumerate(order):
        split_of[int(i)] = "train" if pos < n_train else "val" if pos < n_train + n_val else "test"
    out = []
    for i in range(spec.n_speakers):
        f0 = rng.uniform(*F0_RANGE)
        clarity = rng.uniform(-CLARITY, CLARITY)
        tilt = rng.uniform(0.05, 0.3)
        weights = tuple(rng.uniform(0.4, 1.0, size=64))
        out.append(Speaker(speaker_id(i), f0, clarity, tilt, weights, split_of[i]))
    return out


def render_clean(spk: Speaker, rng, duration_s, sample_rate):
    n = int(round(duration_s * sample_rate))
    n_notes = max(1, int(round(duration_s * NOTES_PER_SECOND)))
    bounds = np.linspace(0, n, n_notes + 1).astype(int)
    nyquist = sample_rate / 2
    out = np.zeros(n)
    for a, b in zip(bounds[:-1], bounds[1:]):
        f = spk.f0 * 2.0 ** (rng.uniform(-2.0, 2.0) / 12.0)
        t = np.arange(b - a) / sample_rate
        seg = np.zeros(b - a)
        h = 1
        while h * f < min(MAX_HARMONIC_HZ, nyquist) and h <= len(spk.harmonic_weights):
            amp = spk.harmonic_weights[h - 1] * math.exp(-spk.harmonic_tilt * (h - 1))
            seg += amp * np.sin(2 * np.pi * h * f * t + rng.uniform(0, 2 * np.pi))
            h += 1
        ramp = min(len(seg) // 2, int(0.01 * sample_rate))
        if ramp:
            env = np.ones(len(seg))
            fade = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
            env[:ramp] = fade
            env[-ramp:] = fade[::-1]
            seg *= env
        out[a:b] = seg
    rms = np.sqrt(np.mean(out ** 2))
    return out * (CLEAN_RMS / rms) if rms > 0 else out


def degrade(clean, q, rng):
    """Lowpass then white noise, both monotone in severity ``q`` in [0, 1]."""
    pole = 0.9 * q
    y = lfilter([1.0 - pole], [1.0, -pole], clean)
    rms = np.sqrt(np.mean(y ** 2))
    if rms > 0:
        y *= CLEAN_RMS / rms
    snr_db = 35.0 - 35.0 * q
    noise_rms = CLEAN_RMS * 10.0 ** (-snr_db / 20.0)
    y = y + rng.normal(0.0, noise_rms, size=y.size)
    return np.clip(y, -1.0, 1.0)


def severity(b, c, jitter):
    return min(1.0, max(0.0, b + c + jitter))


def mos_from_severity(q, noise=0.0):
    return min(10.0, max(1.0, 10.0 - 9.0 * q + noise))


def utterance_rng(spec, s, k, u):
    return np.random.default_rng([spec.seed, 1, s, k, u])


def generate_corpus(spec: SynthSpec, out_dir) -> CorpusManifest:
    """Write ``manifest.csv`` and ``wav/*.wav`` under ``out_dir``.

    Each utterance draws from its own stream keyed by (seed, speaker, system,
    utterance), so output does not depend on generation order.
    """
    out_dir = Path(out_dir)
    (out_dir / "wav").mkdir(parents=True, exist_ok=True)
    spks = speakers(spec)
    sev = system_severities(spec.n_systems)
    records = []
    for s, spk in enumerate(spks):
        for k in range(spec.n_systems):
            for u in range(spec.utts_per_pair):
                rng = utterance_rng(spec, s, k, u)
                jitter = rng.uniform(-JITTER, JITTER)
                label_noise = rng.normal(0.0, spec.label_noise_sd) if spec.label_noise_sd else 0.0
                q = severity(sev[k], spk.clarity, jitter)
                clean = render_clean(spk, rng, spec.duration_s, spec.sample_rate)
                audio = degrade(clean, q, rng)
                uid = f"{spk.speaker_id}_{system_id(k)}_{u:03d}"
                rel = f"wav/{uid}.wav"
                write_wav(out_dir / rel, AudioBuffer(audio, spec.sample_rate))
                records.append(UtteranceRecord(uid, spk.speaker_id, system_id(k),
                                               round(mos_from_severity(q, label_noise), 6),
                                               spk.split, rel))
    manifest = CorpusManifest(records)
    write_manifest(out_dir / MANIFEST_NAME, manifest)
    return manifest


# --------------------------------------------------------------------------
# oracle

def _clamped_normal_mean(mu, sd, lo=1.0, hi=10.0):
    """E[clamp(mu + N(0, sd^2), lo, hi)]."""
    if sd == 0:
        return min(hi, max(lo, mu))
    a = (lo - mu) / sd
    b = (hi - mu) / sd
    pdf = lambda z: math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)  # noqa: E731
    cdf = lambda z: 0.5 * (1 + math.erf(z / math.sqrt(2)))  # noqa: E731
    inside = mu * (cdf(b) - cdf(a)) + sd * (pdf(a) - pdf(b))
    return lo * cdf(a) + inside + hi * (1 - cdf(b))


_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(24)


def expected_cell_mos(b, c, label_noise_sd):
    """Expected label for one (system, speaker) cell, jitter and noise integrated out."""
    m = b + c
    # the clamp on q has kinks where m + j hits 0 or 1; integrate piecewise
    cuts = sorted({-JITTER, JITTER} | {v for v in (-m, 1.0 - m) if -JITTER < v < JITTER})
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        half = (hi - lo) / 2
        for x, w in zip(_NODES, _WEIGHTS):
            j = lo + half * (x + 1)
            q = severity(b, c, j)
            total += w * half * _clamped_normal_mean(10.0 - 9.0 * q, label_noise_sd)
    return total / (2 * JITTER)


@dataclass(frozen=True)
class OracleTables:
    speaker: dict
    system: dict
    cell: dict


def oracle_tables(spec: SynthSpec) -> OracleTables:
    """Expected MOS per speaker, per system, and per (system, speaker) cell."""
    spks = speakers(spec)
    sev = system_severities(spec.n_systems)
    cell = {(system_id(k), spk.speaker_id): expected_cell_mos(sev[k], spk.clarity,
                                                               spec.label_noise_sd)
            for k in range(spec.n_systems) for spk in spks}
    speaker = {spk.speaker_id: float(np.mean([cell[(system_id(k), spk.speaker_id)]
                                              for k in range(spec.n_systems)])) for spk in spks}
    system = {system_id(k): float(np.mean([cell[(system_id(k), spk.speaker_id)] for spk in spks]))
              for k in range(spec.n_systems)}
    return OracleTables(speaker, system, cell)
