"""Information sources: PRBS bits for digital schemes, real messages for
analog ones."""

import wave
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .errors import SourceError
from .kernels import lfsr_bits

# Maximal-length Fibonacci taps (Xilinx XAPP052), keyed by register length.
# Feedback: a[n + L] = XOR over t of a[n + L - t].
LFSR_TAPS = {
    3: (3, 2), 4: (4, 3), 5: (5, 3), 6: (6, 5), 7: (7, 6), 8: (8, 6, 5, 4),
    9: (9, 5), 10: (10, 7), 11: (11, 9), 12: (12, 6, 4, 1), 13: (13, 4, 3, 1),
    14: (14, 5, 3, 1), 15: (15, 14), 16: (16, 15, 13, 4), 17: (17, 14),
    18: (18, 11), 19: (19, 6, 2, 1), 20: (20, 17), 21: (21, 19), 22: (22, 21),
    23: (23, 18), 24: (24, 23, 22, 17), 25: (25, 22), 26: (26, 6, 2, 1),
    27: (27, 5, 2, 1), 28: (28, 25), 29: (29, 27), 30: (30, 6, 4, 1),
    31: (31, 28), 32: (32, 22, 2, 1),
}

KINDS = ("prbs", "audio-file", "multitone")


@dataclass(frozen=True)
class MessageSource:
    kind: str = "prbs"
    register_length: int | None = 23
    path: str | None = None
    tones: tuple = ()
    amplitudes: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SourceError(f"unknown source kind {self.kind!r}")
        if self.kind == "prbs" and self.register_length is not None:
            if self.register_length not in LFSR_TAPS:
                raise SourceError(f"register length {self.register_length} outside [3, 32]")
        if self.kind == "audio-file" and not self.path:
            raise SourceError("audio source needs a path")
        if self.kind == "multitone" and self.amplitudes and len(self.amplitudes) != len(self.tones):
            raise SourceError("one amplitude per tone")


def generate_bits(src, n, stream):
    """``n`` bits from a maximal-length LFSR with a stream-drawn nonzero
    seed, or i.i.d. uniform bits when the register length is unset."""
    if n < 1:
        raise SourceError(f"bit count must be >= 1, got {n}")
    L = src.register_length
    if L is None:
        return stream.integers(0, 2, n, dtype=np.uint8)
    state = int(stream.integers(1, 1 << L, dtype=np.uint64))
    taps = np.asarray(LFSR_TAPS[L], dtype=np.int64)
    return lfsr_bits(taps, L, state, int(n))


def _pcm_to_float(raw, width):
    if width == 1:
        return (np.frombuffer(raw, dtype=np.uint8).astype(float) - 128.0) / 128.0
    if width == 2:
        return np.frombuffer(raw, dtype="<i2").astype(float) / 32768.0
    if width == 3:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v = np.where(v >= 1 << 23, v - (1 << 24), v)
        return v.astype(float) / float(1 << 23)
    raise SourceError(f"unsupported sample width {8 * width} bits")


def load_audio(src):
    """PCM WAV -> (first channel in [-1, 1] with the mean removed, rate)."""
    path = Path(src.path if isinstance(src, MessageSource) else src)
    try:
        with wave.open(str(path), "rb") as w:
            n_ch, width, rate, n = w.getnchannels(), w.getsampwidth(), w.getframerate(), w.getnframes()
            raw = w.readframes(n)
    except (wave.Error, EOFError) as exc:
        raise SourceError(f"{path}: unsupported or corrupt WAV ({exc})") from exc
    except OSError as exc:
        raise SourceError(f"{path}: {exc}") from exc
    if len(raw) != n * n_ch * width:
        raise SourceError(f"{path}: truncated, expected {n} frames")
    x = _pcm_to_float(raw, width).reshape(-1, n_ch)[:, 0]
    return x - x.mean(), rate


def generate_multitone(src, duration, fs):
    """Sum of the configured tones, mean removed and peak-normalised to 1."""
    if duration <= 0:
        raise SourceError("duration must be positive")
    if not src.tones:
        raise SourceError("multitone source has no tones")
    f = np.asarray(src.tones, dtype=float)
    if np.any(f >= fs / 2) or np.any(f <= 0):
        raise SourceError(f"tones must lie in (0, fs/2) = (0, {fs / 2:g}) Hz")
    a = np.asarray(src.amplitudes or np.ones(f.size), dtype=float)
    t = np.arange(int(round(duration * fs))) / fs
    x = (a[:, None] * np.sin(2 * np.pi * f[:, None] * t)).sum(axis=0)
    x -= x.mean()
    peak = np.max(np.abs(x))
    return x / peak if peak > 0 else x


def resample_message(x, fs_in, fs_out, max_denominator=1000):
    """Polyphase (Kaiser-windowed sinc) rate change, then re-centred and
    clipped back to peak 1 so analog modulators stay in range."""
    if fs_in == fs_out:
        return np.asarray(x, dtype=float)
    r = Fraction(fs_out / fs_in).limit_denominator(max_denominator)
    y = resample_poly(x, r.numerator, r.denominator)
    y -= y.mean()
    peak = np.max(np.abs(y)) if y.size else 0.0
    return y / peak if peak > 1 else y


def message_for(src, n, fs, bandwidth, stream):
    """Analog message of exactly ``n`` samples at ``fs``, band-limited to
    ``bandwidth`` Hz.

    Audio is resampled (through ``2 * bandwidth`` so the polyphase filter
    does the band-limiting) and taken from a stream-drawn offset, looped if
    short. A non-audio source without tones draws three random tones in
    the message band.
    """
    if src.kind == "audio-file":
        x, rate = load_audio(src)
        x = resample_message(resample_message(x, rate, 2 * bandwidth), 2 * bandwidth, fs)
        if x.size == 0:
            raise SourceError(f"{src.path}: empty audio")
        start = int(stream.integers(0, x.size))
        idx = (start + np.arange(n)) % x.size
        y = x[idx]
    else:
        if src.kind != "multitone" or not src.tones:
            tones = tuple(stream.uniform(0.05, 0.95, 3) * bandwidth)
            src = MessageSource("multitone", None, tones=tones, amplitudes=tuple(stream.uniform(0.3, 1.0, 3)))
        y = generate_multitone(src, n / fs, fs)
    y = y - y.mean()
    peak = np.max(np.abs(y))
    return y / peak if peak > 0 else y
