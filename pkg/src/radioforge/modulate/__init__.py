"""Modulation library: constellations, pulse shaping, and every family in
the 100-class catalogue."""

from typing import NamedTuple

from .analog import modulate_analog
from .constellation import ConstellationMap, build_constellation
from .cpm import frequency_pulse, modulate_cpm
from .demod import demodulate
from .linear import modulate_linear
from .multicarrier import isfft, modulate_ofdm, modulate_otfs, modulate_scfdma, sfft
from .ostbc import block_size, ostbc_decode, ostbc_encode
from .pulses import rrc_taps
from .registry import REGISTRY, RegistryEntry, build_spec, list_registry, lookup
from .spec import ANALOG, CPM, FAMILIES, LINEAR, MULTICARRIER, BasebandWaveform, ModulationSpec
from ..errors import ModulationError

__all__ = [
    "ANALOG", "CPM", "FAMILIES", "LINEAR", "MULTICARRIER", "REGISTRY",
    "BasebandWaveform", "ConstellationMap", "ModulationSpec", "RegistryEntry",
    "build_constellation", "build_spec", "demodulate", "isfft", "list_registry", "lookup",
    "modulate", "modulate_analog", "modulate_cpm", "modulate_linear", "modulate_ofdm",
    "modulate_otfs", "modulate_scfdma", "ostbc_decode", "ostbc_encode", "rrc_taps",
    "SegmentLayout", "segment_layout", "sfft", "time_quantum",
]


class SegmentLayout(NamedTuple):
    """Sizes of one segment.

    ``payload``: bits (digital) or message samples (analog) to feed the
    modulator. ``n_samples``: modulator output length. ``body``: the
    nominal extent, ``n_slots * sps`` samples, which starts ``lead`` samples
    into the output; the rest is pulse-shaping tail.
    """

    payload: int
    n_samples: int
    lead: int
    body: int


def time_quantum(spec):
    """Smallest segment length, in symbol periods, that the family can
    fill exactly (OSTBC block or multicarrier frame)."""
    if spec.family in LINEAR:
        return block_size(spec.n_antennas)[1]
    if spec.family in MULTICARRIER:
        if spec.family == "OTFS":
            per, n = spec.otfs_delay * spec.otfs_doppler, spec.otfs_doppler * (spec.otfs_delay + spec.cp)
        else:
            per, n = spec.n_used, spec.n_fft + spec.cp
        k, slots = block_size(spec.n_antennas)
        if n % spec.sps or (per * k) % slots:
            raise ModulationError(f"{spec.name or spec.family}: frame does not align with sps/OSTBC")
        return n // spec.sps
    return 1


def segment_layout(spec, n_slots):
    """Layout of a segment lasting ``n_slots`` symbol periods (a multiple
    of :func:`time_quantum`)."""
    q = time_quantum(spec)
    n_slots = int(n_slots)
    if n_slots < q or n_slots % q:
        raise ModulationError(f"segment of {n_slots} symbols is not a positive multiple of {q}")
    sps, body = spec.sps, n_slots * spec.sps
    if spec.family in LINEAR:
        k, slots = block_size(spec.n_antennas)
        bits = n_slots // slots * k * spec.bits_per_symbol
        lead = spec.span * sps // 2 - sps // 2
        return SegmentLayout(bits, body + spec.span * sps + 1 - sps, lead, body)
    if spec.family in CPM:
        p = frequency_pulse(spec).size
        return SegmentLayout(n_slots * spec.bits_per_symbol, body + p - sps, (p - sps) // 2, body)
    if spec.family in ANALOG:
        return SegmentLayout(body, body, 0, body)
    k, slots = block_size(spec.n_antennas)
    if spec.family == "OTFS":
        per, blk = spec.otfs_delay * spec.otfs_doppler, spec.otfs_doppler * (spec.otfs_delay + spec.cp)
    else:
        per, blk = spec.n_used, spec.n_fft + spec.cp
    n_sym = body // blk * per * k // slots
    return SegmentLayout(n_sym * spec.bits_per_symbol, body, 0, body)


def modulate(spec, payload):
    """Dispatch on family: bits for digital families, message for analog."""
    fam = spec.family
    if fam in LINEAR:
        return modulate_linear(payload, spec)
    if fam in CPM:
        return modulate_cpm(payload, spec)
    if fam in ANALOG:
        return modulate_analog(payload, spec)
    if fam == "OFDM":
        return modulate_ofdm(payload, spec)
    if fam == "SCFDMA":
        return modulate_scfdma(payload, spec)
    return modulate_otfs(payload, spec)
