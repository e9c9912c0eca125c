import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from moscope.corpus import AudioBuffer
from moscope.features import (FeatureError, FeatureMatrix, StftConfig, apply_normalizer,
                              features_from_bytes, features_to_bytes, fit_normalizer,
                              frame_count, load_embedding, mean_log_spectrum, read_features,
                              stft_magnitude, window_coefficients, write_features)


def audio(x, rate=16000):
    return AudioBuffer(np.asarray(x, dtype=np.float64), rate)


def direct_dft_magnitude(frame):
    n = len(frame)
    k = np.arange(n // 2 + 1)[:, None]
    t = np.arange(n)[None, :]
    return np.abs((frame[None, :] * np.exp(-2j * np.pi * k * t / n)).sum(axis=1))


def test_zero_audio_gives_zero_matrix():
    m = stft_magnitude(audio(np.zeros(1024)), StftConfig(512, 256))
    assert m.data.shape == (3, 257)
    assert not m.data.any()
    assert m.kind == "spectrogram"


def test_single_frame():
    assert stft_magnitude(audio(np.zeros(512))).rows == 1
    with pytest.raises(FeatureError, match="shorter than one frame"):
        stft_magnitude(audio(np.zeros(511)))


@pytest.mark.parametrize("k", [1, 7, 64, 200])
def test_pure_sine_peaks_at_its_bin(k):
    n = 512
    x = 0.5 * np.sin(2 * np.pi * k * np.arange(n) / n + 0.3)
    m = stft_magnitude(audio(x), StftConfig(n, n, "rect"))
    oracle = direct_dft_magnitude(x)
    assert int(np.argmax(m.data[0])) == k == int(np.argmax(oracle))
    np.testing.assert_allclose(m.data[0], oracle, atol=1e-9)


@pytest.mark.parametrize("window", ["hann", "hamming", "rect"])
def test_matches_direct_dft_on_every_frame(window):
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, 700)
    cfg = StftConfig(64, 48, window)
    m = stft_magnitude(audio(x), cfg)
    w = window_coefficients(window, 64)
    for i in range(m.rows):
        np.testing.assert_allclose(m.data[i], direct_dft_magnitude(x[i * 48:i * 48 + 64] * w),
                                   atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=64, max_size=64))
def test_parseval_single_rect_frame(samples):
    x = np.array(samples)
    mag = stft_magnitude(audio(x), StftConfig(64, 64, "rect")).data[0]
    power = mag ** 2
    one_sided = power[0] + power[-1] + 2 * power[1:-1].sum()
    energy = 64 * (x ** 2).sum()
    assert abs(one_sided - energy) <= 1e-6 * max(energy, 1e-300)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 3000), st.sampled_from([16, 64, 256]), st.integers(1, 256))
def test_frame_count_formula(n, fft, hop):
    hop = min(hop, fft)
    x = np.zeros(n)
    expected = 0 if n < fft else 1 + (n - fft) // hop
    assert frame_count(n, fft, hop) == expected
    if expected:
        assert stft_magnitude(audio(x), StftConfig(fft, hop)).rows == expected


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1), st.integers(0, 2 ** 31))
def test_positive_homogeneity(c, seed):
    x = np.random.default_rng(seed).uniform(-1, 1, 600)
    cfg = StftConfig(128, 64)
    base = stft_magnitude(audio(x), cfg).data
    np.testing.assert_allclose(stft_magnitude(audio(c * x), cfg).data, c * base,
                               rtol=1e-12, atol=1e-12)


def test_mean_log_spectrum_is_an_embedding():
    x = np.random.default_rng(1).uniform(-0.5, 0.5, 2048)
    e = mean_log_spectrum(audio(x))
    assert e.kind == "embedding" and e.data.shape == (257, 1)
    spec = stft_magnitude(audio(x)).data
    np.testing.assert_allclose(e.data[:, 0], np.log(spec + 1e-6).mean(axis=0))


def test_stft_config_validation():
    for bad in (dict(fft_size=500), dict(hop=0), dict(hop=1024), dict(window="kaiser")):
        with pytest.raises(FeatureError):
            StftConfig(**bad)
    assert StftConfig().n_bins == 257


# --------------------------------------------------------------------------
# FEAT files

def test_embedding_load(tmp_path):
    p = tmp_path / "e.feat"
    write_features(p, FeatureMatrix("embedding", np.arange(512.0)))
    assert load_embedding(p, 512).data.shape == (512, 1)
    assert load_embedding(p).rows == 512
    with pytest.raises(FeatureError, match="expected 4096"):
        load_embedding(p, 4096)


def test_embedding_with_nan(tmp_path):
    p = tmp_path / "e.feat"
    buf = bytearray(features_to_bytes(FeatureMatrix("embedding", np.ones(4))))
    buf[-4:] = np.array([np.nan], dtype="<f4").tobytes()
    p.write_bytes(bytes(buf))
    with pytest.raises(FeatureError, match="non-finite"):
        load_embedding(p)


def test_embedding_rejects_spectrogram(tmp_path):
    p = tmp_path / "s.feat"
    write_features(p, FeatureMatrix("spectrogram", np.ones((3, 2))))
    with pytest.raises(FeatureError, match="expected an embedding"):
        load_embedding(p)


def test_round_trip_identical_bytes(tmp_path):
    m = FeatureMatrix("spectrogram", np.random.default_rng(0).normal(size=(3, 257)))
    p, q = tmp_path / "a.feat", tmp_path / "b.feat"
    write_features(p, m)
    write_features(q, read_features(p))
    assert p.read_bytes() == q.read_bytes()
    assert read_features(p).data.shape == (3, 257)


def test_one_by_one_round_trip():
    m = FeatureMatrix("embedding", np.array([[0.25]]))
    assert np.array_equal(features_from_bytes(features_to_bytes(m)).data, m.data)


@pytest.mark.parametrize("mutate, message", [
    (lambda b: b"XXXX" + b[4:], "bad magic"),
    (lambda b: b[:4] + (2).to_bytes(4, "little") + b[8:], "unsupported version"),
    (lambda b: b[:8] + bytes([7]) + b[9:], "unknown kind"),
    (lambda b: b[:-1], "truncated payload"),
    (lambda b: b + b"\0", "trailing"),
    (lambda b: b[:10], "truncated header"),
])
def test_format_errors(mutate, message):
    good = features_to_bytes(FeatureMatrix("spectrogram", np.ones((2, 3))))
    with pytest.raises(FeatureError, match=message):
        features_from_bytes(mutate(good))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 20), st.integers(1, 20), st.integers(0, 2 ** 31))
def test_feature_bytes_bit_exact(rows, cols, seed):
    data = np.random.default_rng(seed).normal(size=(rows, cols)).astype(np.float32)
    buf = features_to_bytes(FeatureMatrix("spectrogram", data))
    back = features_from_bytes(buf)
    assert back.data.astype(np.float32).tobytes() == data.tobytes()
    assert features_to_bytes(back) == buf


def test_matrix_invariants():
    with pytest.raises(FeatureError):
        FeatureMatrix("mfcc", np.ones((2, 2)))
    with pytest.raises(FeatureError):
        FeatureMatrix("embedding", np.ones((2, 2)))
    with pytest.raises(FeatureError):
        FeatureMatrix("spectrogram", np.ones((0, 3)))
    with pytest.raises(FeatureError):
        FeatureMatrix("spectrogram", np.array([[np.inf]]))


# --------------------------------------------------------------------------
# normalization

def test_two_point_normalizer():
    n = fit_normalizer([FeatureMatrix("embedding", np.array([1.0, 3.0]))])
    assert n.mean.tolist() == [2.0] and n.sd.tolist() == [1.0]
    out = apply_normalizer(n, FeatureMatrix("embedding", np.array([1.0, 3.0])))
    assert out.data[:, 0].tolist() == [-1.0, 1.0]


def test_constant_column_uses_clamped_divisor():
    m = FeatureMatrix("embedding", np.array([5.0, 5.0, 5.0]))
    assert apply_normalizer(fit_normalizer([m]), m).data[:, 0].tolist() == [0.0, 0.0, 0.0]


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(1, 6), st.integers(0, 2 ** 31))
def test_normalized_fitting_set_has_zero_mean(n_mats, cols, seed):
    rng = np.random.default_rng(seed)
    mats = [FeatureMatrix("spectrogram", rng.normal(3, 10, size=(int(rng.integers(2, 9)), cols)))
            for _ in range(n_mats)]
    norm = fit_normalizer(mats)
    stacked = np.concatenate([norm.apply(m).data for m in mats])
    assert np.abs(stacked.mean(axis=0)).max() < 1e-9


def test_normalizer_errors():
    e = FeatureMatrix("embedding", np.ones(3))
    s = FeatureMatrix("spectrogram", np.ones((3, 2)))
    with pytest.raises(FeatureError):
        fit_normalizer([])
    with pytest.raises(FeatureError, match="mixed"):
        fit_normalizer([e, s])
    with pytest.raises(FeatureError, match="at least 2 rows"):
        fit_normalizer([FeatureMatrix("embedding", np.ones(1))])
    with pytest.raises(FeatureError):
        apply_normalizer(fit_normalizer([s]), e)
