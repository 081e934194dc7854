"""Modulation parameter sets and the waveform container."""

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ModulationError

LINEAR = ("ASK", "OOK", "PSK", "QAM")
CPM = ("FSK", "MSK", "GMSK", "CPFSK")
ANALOG = ("AM-DSB", "AM-SSB", "AM-VSB", "FM", "PM")
MULTICARRIER = ("OFDM", "SCFDMA", "OTFS")
FAMILIES = LINEAR + CPM + ANALOG + MULTICARRIER


@dataclass(frozen=True)
class ModulationSpec:
    """Everything a modulator needs for one signal.

    ``inner``/``inner_order`` give the per-subcarrier constellation of the
    multicarrier families. ``variant`` is ``"G"`` for Gaussian-pulse FSK and
    ``"MIL"`` for the ring-structured MIL-STD-188 style QAM placeholders.
    """

    family: str
    order: int = 2
    symbol_rate: float = 40e3
    sps: int = 4
    name: str = ""
    class_id: int = 0
    variant: str = ""
    inner: str = ""
    inner_order: int = 0
    rolloff: float = 0.35
    span: int = 16
    bt: float = 0.3
    h: float = 0.5
    n_fft: int = 64
    n_used: int = 48
    cp: int = 16
    otfs_delay: int = 64
    otfs_doppler: int = 16
    am_index: float = 0.5
    fm_deviation_ratio: float = 1.0
    pm_index: float = 1.0
    n_antennas: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ModulationError(f"unknown modulation family {self.family!r}")
        if self.sps < 2 or int(self.sps) != self.sps:
            raise ModulationError(f"samples per symbol must be an integer >= 2, got {self.sps}")
        if self.symbol_rate <= 0:
            raise ModulationError("symbol rate must be positive")
        if self.family in LINEAR + CPM or self.inner:
            m = self.inner_order if self.family in MULTICARRIER else self.order
            if m < 2 or m & (m - 1):
                raise ModulationError(f"modulation order {m} is not a power of two")

    @property
    def sample_rate(self):
        return self.sps * self.symbol_rate

    @property
    def is_digital(self):
        return self.family not in ANALOG

    @property
    def constellation_key(self):
        if self.family in MULTICARRIER:
            return self.inner, self.inner_order
        if self.variant == "MIL":
            return "MILQAM", self.order
        return self.family, self.order

    @property
    def bits_per_symbol(self):
        if self.family in MULTICARRIER:
            return int(np.log2(self.inner_order))
        return int(np.log2(self.order)) if self.is_digital else 0

    @property
    def message_bandwidth(self):
        """Analog message bandwidth W (half the nominal symbol rate)."""
        return self.symbol_rate / 2

    @property
    def occupied_bandwidth(self):
        """Two-sided occupied bandwidth in Hz, centred on the waveform's 0 Hz."""
        rs, fam = self.symbol_rate, self.family
        if fam in LINEAR:
            return (1 + self.rolloff) * rs
        if fam in CPM:
            h = self.cpm_index
            if fam == "GMSK" or self.variant == "G":
                return ((self.order - 1) * h + 0.9 * min(1.0, self.bt / 0.3) ** 0.5) * rs
            return ((self.order - 1) * h + 1.6) * rs
        w = self.message_bandwidth
        if fam == "AM-DSB":
            return 2 * w
        if fam == "AM-SSB":
            return w
        if fam == "AM-VSB":
            return 1.25 * w
        if fam == "FM":
            return 2 * (self.fm_deviation_ratio + 1) * w
        if fam == "PM":
            return 2 * (self.pm_index + 1) * w
        if fam == "OTFS":
            return self.sample_rate
        # two guard bins each side hold the sinc skirts of the CP symbols
        return (self.n_used + 4) / self.n_fft * self.sample_rate

    @property
    def cpm_index(self):
        return 0.5 if self.family in ("MSK", "GMSK") else self.h

    def with_antennas(self, n):
        return replace(self, n_antennas=int(n))


@dataclass
class BasebandWaveform:
    """Per-antenna unit-power complex baseband samples.

    ``samples`` has shape ``(n_antennas, n)``. ``scale`` is the amplitude
    factor the modulator applied to reach unit power; demodulators divide it
    back out.
    """

    samples: np.ndarray
    sample_rate: float
    bandwidth: float
    n_symbols: int
    spec: ModulationSpec
    scale: float = 1.0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.complex128))

    @property
    def n_antennas(self):
        return self.samples.shape[0]

    def __len__(self):
        return self.samples.shape[1]

    @property
    def duration(self):
        return len(self) / self.sample_rate


def unit_power(x):
    """Scale each row to unit mean power; returns ``(y, scale)``.

    A row of zeros is left untouched (scale 1).
    """
    x = np.atleast_2d(x)
    p = np.mean(np.abs(x) ** 2, axis=1, keepdims=True)
    g = np.where(p > 0, 1.0 / np.sqrt(np.where(p > 0, p, 1.0)), 1.0)
    return x * g, g.ravel()
