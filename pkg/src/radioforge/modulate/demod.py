"""Reference demodulators for loopback checks (no synchronisation, no noise
handling beyond nearest-point decisions)."""

import numpy as np
from scipy.linalg import solve_banded

from .constellation import build_constellation
from .cpm import cpm_levels, frequency_pulse
from .multicarrier import sfft, subcarrier_bins
from .ostbc import block_size
from .pulses import rrc_taps
from .spec import ANALOG, CPM, LINEAR, MULTICARRIER
from ..errors import ModulationError


def _labels_to_bits(labels, k):
    return ((labels[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.uint8).ravel()


def demodulate_linear(x, spec, n_symbols, scale=1.0):
    taps = rrc_taps(spec.rolloff, spec.span, spec.sps)
    z = np.convolve(np.asarray(x) / scale, taps)
    idx = taps.size - 1 + np.arange(n_symbols) * spec.sps
    const = build_constellation(*spec.constellation_key)
    return const.demap(z[idx])


def demodulate_cpm(x, spec, n_symbols):
    h = spec.cpm_index
    x = np.asarray(x)
    prev = np.concatenate([[1.0 + 0j], x[:-1]])
    freq = np.angle(x * np.conj(prev)) / (np.pi * h)
    p = frequency_pulse(spec)
    # matched filter at symbol spacing, then undo the pulse overlap exactly
    z = np.correlate(freq, p, mode="full")[p.size - 1:][::spec.sps][:n_symbols]
    r = np.array([np.dot(p[: p.size - d * spec.sps], p[d * spec.sps:]) for d in range(-(-p.size // spec.sps))])
    bw = r.size - 1
    ab = np.zeros((2 * bw + 1, n_symbols))
    for d in range(-bw, bw + 1):
        if d >= 0:
            ab[bw - d, d:] = r[d]
        else:
            ab[bw - d, :d] = r[-d]
    a = solve_banded((bw, bw), ab, z)
    levels = cpm_levels(spec.order)
    labels = np.abs(a[:, None] - levels[None, :]).argmin(axis=1)
    return _labels_to_bits(labels, int(np.log2(spec.order)))


def _ofdm_grid(x, spec, n_blocks):
    t = np.asarray(x).reshape(n_blocks, spec.n_fft + spec.cp)[:, spec.cp:]
    X = np.fft.fft(t, axis=-1) / np.sqrt(spec.n_fft)
    return X[:, subcarrier_bins(spec.n_fft, spec.n_used)]


def demodulate_multicarrier(x, spec, n_symbols, scale=1.0):
    if spec.n_antennas != 1:
        raise ModulationError("loopback demodulation covers single-antenna waveforms only")
    x = np.asarray(x) / scale
    if spec.family == "OTFS":
        M, N = spec.otfs_delay, spec.otfs_doppler
        cols = x.reshape(-1, N, M + spec.cp)[:, :, spec.cp:]
        x_tf = np.swapaxes(np.fft.fft(cols, axis=-1) / np.sqrt(M), -1, -2)
        sym = sfft(x_tf).reshape(-1)
    else:
        grid = _ofdm_grid(x, spec, x.size // (spec.n_fft + spec.cp))
        if spec.family == "SCFDMA":
            grid = np.fft.ifft(grid, axis=-1) * np.sqrt(spec.n_used)
        sym = grid.reshape(-1)
    const = build_constellation(*spec.constellation_key)
    return const.demap(sym[:n_symbols])


def demodulate(waveform, antenna=0):
    """Bits recovered from an unimpaired single-antenna BasebandWaveform."""
    spec = waveform.spec
    if spec.family in ANALOG:
        raise ModulationError("analog waveforms carry no bits")
    x = waveform.samples[antenna]
    scale = np.atleast_1d(waveform.scale)[antenna]
    if spec.family in LINEAR:
        if block_size(spec.n_antennas)[0] != 1:
            raise ModulationError("loopback demodulation covers single-antenna waveforms only")
        return demodulate_linear(x, spec, waveform.n_symbols, scale)
    if spec.family in CPM:
        return demodulate_cpm(x, spec, waveform.n_symbols)
    if spec.family in MULTICARRIER:
        return demodulate_multicarrier(x, spec, waveform.n_symbols, scale)
    raise ModulationError(f"no demodulator for {spec.family}")
