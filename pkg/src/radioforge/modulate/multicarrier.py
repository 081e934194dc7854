"""OFDM, DFT-spread OFDM (SC-FDMA) and OTFS."""

import numpy as np

from .constellation import build_constellation
from .ostbc import block_size, ostbc_encode
from .spec import BasebandWaveform, unit_power
from ..errors import ModulationError


def subcarrier_bins(n_fft, n_used):
    """FFT bin indices of the contiguous used band centred on DC."""
    return np.arange(-(n_used // 2), n_used - n_used // 2) % n_fft


def _check(spec):
    if spec.cp >= spec.n_fft and spec.family != "OTFS":
        raise ModulationError("cyclic prefix must be shorter than the symbol")
    if spec.family == "OTFS" and spec.cp >= spec.otfs_delay:
        raise ModulationError("cyclic prefix must be shorter than the symbol")


def _stream_symbols(bits, spec, per_block):
    const = build_constellation(*spec.constellation_key)
    symbols = const.map_bits(bits)
    k, slots = block_size(spec.n_antennas)
    streams = ostbc_encode(symbols, spec.n_antennas) if symbols.size % k == 0 else None
    if streams is None or streams.shape[1] % per_block:
        raise ModulationError(f"{symbols.size} symbols do not fill whole blocks of {per_block}")
    return symbols, streams


def _ofdm_symbols(grid, spec):
    """grid: (n_ant, n_blocks, n_used) -> (n_ant, n_blocks * (n_fft + cp))."""
    n_ant, n_blocks, _ = grid.shape
    X = np.zeros((n_ant, n_blocks, spec.n_fft), dtype=complex)
    X[..., subcarrier_bins(spec.n_fft, spec.n_used)] = grid
    t = np.fft.ifft(X, axis=-1) * np.sqrt(spec.n_fft)
    if spec.cp:
        t = np.concatenate([t[..., -spec.cp:], t], axis=-1)
    return t.reshape(n_ant, -1)


def modulate_ofdm(bits, spec):
    symbols, streams = _stream_symbols(bits, spec, spec.n_used)
    _check(spec)
    grid = streams.reshape(spec.n_antennas, -1, spec.n_used)
    x = _ofdm_symbols(grid, spec)
    y, scale = unit_power(x)
    return BasebandWaveform(y, spec.sample_rate, spec.occupied_bandwidth, symbols.size, spec, scale)


def modulate_scfdma(bits, spec):
    symbols, streams = _stream_symbols(bits, spec, spec.n_used)
    _check(spec)
    grid = streams.reshape(spec.n_antennas, -1, spec.n_used)
    spread = np.fft.fft(grid, axis=-1) / np.sqrt(spec.n_used)
    x = _ofdm_symbols(spread, spec)
    y, scale = unit_power(x)
    return BasebandWaveform(y, spec.sample_rate, spec.occupied_bandwidth, symbols.size, spec, scale)


def isfft(x_dd):
    """Delay-Doppler (M x N) to time-frequency (M x N), unitary."""
    M, N = x_dd.shape[-2:]
    return np.fft.fft(np.fft.ifft(x_dd, axis=-1), axis=-2) * np.sqrt(N / M)


def sfft(x_tf):
    M, N = x_tf.shape[-2:]
    return np.fft.ifft(np.fft.fft(x_tf, axis=-1), axis=-2) * np.sqrt(M / N)


def otfs_time(x_dd, cp):
    """Rectangular-pulse Heisenberg transform of one or more DD frames.

    ``x_dd`` is ``(..., M, N)``; each of the N columns becomes an M-sample
    OFDM symbol with a ``cp``-sample prefix.
    """
    M = x_dd.shape[-2]
    cols = np.fft.ifft(isfft(x_dd), axis=-2) * np.sqrt(M)
    if cp:
        cols = np.concatenate([cols[..., -cp:, :], cols], axis=-2)
    # column-major: symbol n occupies samples n*(M+cp) ... (n+1)*(M+cp)-1
    return np.swapaxes(cols, -1, -2).reshape(*x_dd.shape[:-2], -1)


def modulate_otfs(bits, spec):
    M, N = spec.otfs_delay, spec.otfs_doppler
    symbols, streams = _stream_symbols(bits, spec, M * N)
    _check(spec)
    x_dd = streams.reshape(spec.n_antennas, -1, M, N)
    x = otfs_time(x_dd, spec.cp).reshape(spec.n_antennas, -1)
    y, scale = unit_power(x)
    return BasebandWaveform(y, spec.sample_rate, spec.occupied_bandwidth, symbols.size, spec, scale)
