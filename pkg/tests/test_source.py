import wave

import numpy as np
import pytest

from radioforge.errors import SourceError
from radioforge.source import (
    LFSR_TAPS,
    MessageSource,
    generate_bits,
    generate_multitone,
    load_audio,
    message_for,
)


def _wav(path, samples, rate=8000, width=2):
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(width)
        w.setframerate(rate)
        w.writeframes(np.asarray(samples, dtype="<i2").tobytes())
    return path


def _period(bits):
    n = bits.size // 2
    for p in range(1, n):
        if np.array_equal(bits[:n], bits[p:p + n]):
            return p
    return None


@pytest.mark.parametrize("L", [3, 5, 7, 9, 10])
def test_lfsr_maximal_period(L):
    bits = generate_bits(MessageSource(register_length=L), 4 * (2 ** L), np.random.default_rng(L))
    assert _period(bits) == 2 ** L - 1


def test_lfsr_period_127():
    bits = generate_bits(MessageSource(register_length=7), 1000, np.random.default_rng(0))
    assert _period(bits) == 127


def test_all_register_lengths_nonzero():
    for L in LFSR_TAPS:
        bits = generate_bits(MessageSource(register_length=L), 256, np.random.default_rng(L))
        assert bits.any()


def test_uniform_ones_fraction():
    bits = generate_bits(MessageSource(register_length=None), 10 ** 5, np.random.default_rng(3))
    assert 0.49 <= bits.mean() <= 0.51


def test_prbs23_balance():
    bits = generate_bits(MessageSource(register_length=23), 10 ** 5, np.random.default_rng(4))
    assert 0.49 <= bits.mean() <= 0.51


def test_same_stream_same_bits():
    src = MessageSource()
    a = generate_bits(src, 500, np.random.default_rng(9))
    b = generate_bits(src, 500, np.random.default_rng(9))
    assert np.array_equal(a, b)


def test_bad_sources():
    with pytest.raises(SourceError):
        MessageSource(register_length=2)
    with pytest.raises(SourceError):
        MessageSource(kind="audio-file")
    with pytest.raises(SourceError):
        generate_bits(MessageSource(), 0, np.random.default_rng(0))


def test_audio_fixed_point_scale(tmp_path):
    x, rate = load_audio(_wav(tmp_path / "a.wav", [32767, -32768]))
    # mean removal shifts both by the same constant; the step keeps the scale
    assert x[0] - x[1] == pytest.approx(32767 / 32768 + 1)
    assert rate == 8000


def test_audio_constant_is_zero(tmp_path):
    x, _ = load_audio(_wav(tmp_path / "c.wav", np.full(100, 1234)))
    assert np.allclose(x, 0)


def test_audio_length(tmp_path):
    x, rate = load_audio(_wav(tmp_path / "s.wav", np.zeros(8000)))
    assert x.size == 8000 and rate == 8000


def test_audio_corrupt(tmp_path):
    p = tmp_path / "bad.wav"
    p.write_bytes(b"RIFF0000WAVEjunk")
    with pytest.raises(SourceError):
        load_audio(p)


def test_audio_message_band_and_length(tmp_path):
    t = np.arange(8000) / 8000
    p = _wav(tmp_path / "t.wav", 20000 * np.sin(2 * np.pi * 440 * t))
    m = message_for(MessageSource("audio-file", path=str(p)), 5000, 16000.0, 4000.0, np.random.default_rng(0))
    assert m.size == 5000 and np.max(np.abs(m)) <= 1 + 1e-12


def test_single_tone_peak():
    x = generate_multitone(MessageSource("multitone", tones=(1000.0,)), 0.1, 48000.0)
    assert np.max(np.abs(x)) == pytest.approx(1.0)


def test_two_tones_two_peaks():
    fs = 48000.0
    x = generate_multitone(MessageSource("multitone", tones=(1000.0, 3000.0)), 0.1, fs)
    X = np.abs(np.fft.rfft(x))
    peaks = [k for k in range(1, X.size - 1) if X[k] > X[k - 1] and X[k] > X[k + 1] and X[k] > 0.1 * X.max()]
    f = np.fft.rfftfreq(x.size, 1 / fs)
    assert sorted(f[peaks]) == [1000.0, 3000.0]


def test_empty_tones_error():
    with pytest.raises(SourceError):
        generate_multitone(MessageSource("multitone"), 0.1, 48000.0)
