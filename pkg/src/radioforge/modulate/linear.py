"""Single-carrier linear modulation: ASK, OOK, PSK, QAM with RRC shaping."""

from scipy.signal import upfirdn

from .constellation import build_constellation
from .ostbc import block_size, ostbc_encode
from .pulses import rrc_taps
from .spec import LINEAR, BasebandWaveform, unit_power
from ..errors import ModulationError


def modulate_linear(bits, spec):
    """Gray map, OSTBC across antennas, RRC pulse shape, unit-power normalise."""
    if spec.family not in LINEAR:
        raise ModulationError(f"{spec.family} is not a linear family")
    const = build_constellation(*spec.constellation_key)
    symbols = const.map_bits(bits)
    k, _ = block_size(spec.n_antennas)
    if symbols.size % k:
        raise ModulationError(f"{symbols.size} symbols do not fill whole OSTBC blocks of {k}")
    streams = ostbc_encode(symbols, spec.n_antennas)
    taps = rrc_taps(spec.rolloff, spec.span, spec.sps)
    x = upfirdn(taps, streams, up=spec.sps, axis=1)
    y, scale = unit_power(x)
    return BasebandWaveform(y, spec.sample_rate, spec.occupied_bandwidth, symbols.size, spec, scale)
