"""Continuous-phase modulation: FSK, GFSK, MSK, GMSK, CPFSK."""

import numpy as np
from scipy.signal import upfirdn

from .constellation import gray
from .pulses import gaussian_frequency_pulse, rect_frequency_pulse
from .spec import CPM, BasebandWaveform
from ..errors import ModulationError

GAUSSIAN_SPAN = 4


def cpm_levels(order):
    """Gray-labelled odd-integer frequency levels, indexed by label."""
    k = np.arange(order)
    levels = np.empty(order)
    levels[gray(k)] = 2 * k - order + 1
    return levels


def frequency_pulse(spec):
    if spec.family == "GMSK" or spec.variant == "G":
        return gaussian_frequency_pulse(spec.bt, spec.sps, GAUSSIAN_SPAN)
    return rect_frequency_pulse(spec.sps)


def modulate_cpm(bits, spec):
    """Constant-envelope waveform by integrating the shaped frequency train.

    The phase advances by ``pi * h * a_k`` over symbol k, with ``a_k`` the
    odd-integer level of the symbol; FSK tone spacing is ``h * symbol_rate``.
    """
    if spec.family not in CPM:
        raise ModulationError(f"{spec.family} is not a CPM family")
    h = spec.cpm_index
    if not 0 < h <= 2:
        raise ModulationError(f"modulation index {h} outside (0, 2]")
    if (spec.order - 1) * h >= spec.sps:
        raise ModulationError("sps too low for the peak frequency deviation")
    k = int(np.log2(spec.order))
    bits = np.asarray(bits, dtype=np.int64)
    if bits.size % k:
        raise ModulationError(f"{bits.size} bits is not a multiple of {k}")
    labels = bits.reshape(-1, k) @ (1 << np.arange(k - 1, -1, -1))
    a = cpm_levels(spec.order)[labels]
    freq = upfirdn(frequency_pulse(spec), a, up=spec.sps)
    phase = np.pi * h * np.cumsum(freq)
    x = np.exp(1j * phase)
    samples = np.repeat(x[None, :], spec.n_antennas, axis=0)
    return BasebandWaveform(samples, spec.sample_rate, spec.occupied_bandwidth, a.size, spec, np.ones(spec.n_antennas))
