"""Analog modulation: AM (DSB, SSB, VSB), FM and PM.

Every output is shifted so its occupied band is centred on 0 Hz; for SSB
and VSB the (suppressed or partial) carrier therefore sits below centre.
"""

import numpy as np
from scipy.signal import hilbert

from .spec import ANALOG, BasebandWaveform, unit_power
from ..errors import ModulationError

VSB_VESTIGE = 0.25


def vsb_response(f, w):
    """Vestigial sideband mask: full upper sideband, raised-cosine vestige
    of ``VSB_VESTIGE * w`` below the carrier; ``H(f) + H(-f) = 1`` there."""
    fv = VSB_VESTIGE * w
    H = np.where(f >= fv, 1.0, 0.0)
    edge = np.abs(f) < fv
    H[edge] = 0.5 * (1 + np.sin(np.pi * f[edge] / (2 * fv)))
    return H


def band_offset(spec):
    """Frequency (Hz) that moves the carrier-referenced spectrum to centre."""
    w = spec.message_bandwidth
    if spec.family == "AM-SSB":
        return -w / 2
    if spec.family == "AM-VSB":
        return -(1 - VSB_VESTIGE) * w / 2
    return 0.0


def modulate_analog(message, spec):
    if spec.family not in ANALOG:
        raise ModulationError(f"{spec.family} is not an analog family")
    m = np.asarray(message, dtype=float)
    if m.size and np.max(np.abs(m)) > 1 + 1e-12:
        raise ModulationError("message peak exceeds 1")
    fs, w = spec.sample_rate, spec.message_bandwidth
    fam = spec.family
    if fam in ("AM-DSB", "AM-VSB") and not 0 <= spec.am_index <= 1:
        raise ModulationError(f"AM index {spec.am_index} > 1 overmodulates")
    if fam == "AM-DSB":
        x = (1 + spec.am_index * m).astype(complex)
    elif fam == "AM-SSB":
        x = hilbert(m)
    elif fam == "AM-VSB":
        X = np.fft.fft(1 + spec.am_index * m)
        X *= vsb_response(np.fft.fftfreq(m.size, 1 / fs), w)
        x = np.fft.ifft(X)
    elif fam == "FM":
        x = np.exp(2j * np.pi * spec.fm_deviation_ratio * w * np.cumsum(m) / fs)
    else:
        x = np.exp(1j * spec.pm_index * m)
    off = band_offset(spec)
    if off:
        x = x * np.exp(2j * np.pi * off * np.arange(m.size) / fs)
    y, scale = unit_power(np.repeat(x[None, :], spec.n_antennas, axis=0))
    return BasebandWaveform(y, fs, spec.occupied_bandwidth, m.size, spec, scale)
