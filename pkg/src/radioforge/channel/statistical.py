"""Path loss, Rayleigh/Rician sum-of-sinusoids fading, MIMO tap mixing."""

import math
from dataclasses import dataclass, field

import numpy as np

from ..constants import SPEED_OF_LIGHT
from ..errors import ChannelError
from ..kernels import sum_of_sinusoids, tv_accumulate

N_SINUSOIDS = 256
# tap processes are synthesised at >= this many samples per Doppler period
# and linearly interpolated up to the waveform rate
COARSE_OVERSAMPLE = 32
FRACTIONAL_HALF_LENGTH = 8


@dataclass(frozen=True)
class PathLossSpec:
    distance: float
    carrier_frequency: float
    model: str = "free-space"
    exponent: float = 2.0
    reference_distance: float = 1.0


def free_space_db(d, fc):
    return 20 * math.log10(4 * math.pi * d * fc / SPEED_OF_LIGHT)


def path_loss_db(spec):
    """Free space ``20 log10(4 pi d f / c)`` or log-distance anchored at d0."""
    if spec.distance <= 0:
        raise ChannelError("distance must be positive")
    if spec.model == "free-space":
        return free_space_db(spec.distance, spec.carrier_frequency)
    if spec.model == "log-distance":
        d0 = spec.reference_distance
        return free_space_db(d0, spec.carrier_frequency) + 10 * spec.exponent * math.log10(spec.distance / d0)
    raise ChannelError(f"unknown path-loss model {spec.model!r}")


def doppler_from_speed(speed, fc):
    if speed < 0:
        raise ChannelError("speed must be non-negative")
    return speed * fc / SPEED_OF_LIGHT


@dataclass(frozen=True)
class FadingSpec:
    """``distribution`` is ``rayleigh``, ``rician`` or ``static`` (no fading).

    ``path_gains_db`` are relative average powers; they are normalised to
    unit total so path loss alone sets the mean link gain.
    """

    distribution: str = "rayleigh"
    k_factor: float = 0.0
    path_delays: tuple = (0.0,)
    path_gains_db: tuple = (0.0,)
    max_doppler: float = 0.0
    n_tx: int = 1
    n_rx: int = 1
    n_sinusoids: int = N_SINUSOIDS

    def __post_init__(self):
        if self.distribution not in ("rayleigh", "rician", "static"):
            raise ChannelError(f"unknown fading distribution {self.distribution!r}")
        d = np.asarray(self.path_delays, dtype=float)
        if d.size == 0 or d[0] != 0 or np.any(np.diff(d) < 0):
            raise ChannelError("path delays must start at 0 and ascend")
        if len(self.path_gains_db) != d.size:
            raise ChannelError("one gain per path delay")
        if self.distribution == "rician" and self.k_factor < 0:
            raise ChannelError("K-factor must be non-negative")


def sample_multipath(n_extra, stream, delay_range=(50e-9, 5e-6), decay=1e-6):
    """Tap 0 at zero delay plus ``n_extra`` log-uniform delays; average
    power decays as exp(-tau / decay)."""
    lo, hi = delay_range
    extra = np.sort(np.exp(stream.uniform(math.log(lo), math.log(hi), int(n_extra))))
    delays = np.concatenate([[0.0], extra])
    gains_db = 10 * np.log10(np.exp(-delays / decay))
    return tuple(float(v) for v in delays), tuple(float(v) for v in gains_db)


@dataclass
class ChannelRealization:
    """Per (rx antenna, tx antenna, path) complex tap processes.

    ``gains`` has shape ``(n_rx, n_tx, n_paths, n_coarse)``: coarse sample
    ``k`` is the tap value at waveform sample ``k * step``. Path loss is
    already folded into the gains.
    """

    delays: np.ndarray
    gains: np.ndarray
    step: int
    fs: float
    path_loss_db: float = 0.0
    doppler: float = 0.0
    provenance: str = "statistical"
    outage: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def n_rx(self):
        return self.gains.shape[0]

    @property
    def n_tx(self):
        return self.gains.shape[1]

    @property
    def n_samples(self):
        return (self.gains.shape[-1] - 1) * self.step + 1

    def tap(self, rx=0, tx=0, path=0, n=None):
        """Tap process interpolated to the waveform rate."""
        n = self.n_samples if n is None else n
        out = np.zeros(n, dtype=complex)
        tv_accumulate(out, np.ones(n, dtype=complex), self.gains[rx, tx, path], self.step)
        return out


def sos_tap(fd, t, n_sin, stream):
    """Unit-power Jakes tap at times ``t``: Zheng-Xiao style sum of
    ``n_sin`` sinusoids with a random angle offset and random phases."""
    theta = stream.uniform(-np.pi, np.pi)
    alpha = (2 * np.pi * np.arange(1, n_sin + 1) + theta) / n_sin
    return sum_of_sinusoids(fd * np.cos(alpha), stream.uniform(-np.pi, np.pi, n_sin), t)


def generate_tap_process(spec, n_samples, fs, stream, path_loss=0.0):
    """Jakes-spectrum taps, sampled every ``step`` waveform samples."""
    fd = spec.max_doppler
    if fd >= fs / 2:
        raise ChannelError(f"Doppler {fd:g} Hz >= fs/2")
    if spec.distribution == "static" or fd == 0:
        step = max(1, int(n_samples))
    else:
        step = max(1, int(fs / (COARSE_OVERSAMPLE * fd)))
    n_coarse = max(2, -(-(int(n_samples) - 1) // step) + 1)
    t = np.arange(n_coarse) * step / fs
    p = 10 ** (np.asarray(spec.path_gains_db) / 10)
    amp = np.sqrt(p / p.sum() * 10 ** (-path_loss / 10))
    n_paths = amp.size
    gains = np.empty((spec.n_rx, spec.n_tx, n_paths, n_coarse), dtype=complex)
    for r in range(spec.n_rx):
        for s in range(spec.n_tx):
            for k in range(n_paths):
                if spec.distribution == "static":
                    gains[r, s, k] = np.sqrt(10 ** (-path_loss / 10)) if k == 0 else 0.0
                    continue
                g = sos_tap(fd, t, spec.n_sinusoids, stream)
                if k == 0 and spec.distribution == "rician":
                    K = spec.k_factor
                    los = np.exp(1j * stream.uniform(-np.pi, np.pi))
                    g = np.sqrt(K / (K + 1)) * los + np.sqrt(1 / (K + 1)) * g
                gains[r, s, k] = amp[k] * g
    return ChannelRealization(
        delays=np.asarray(spec.path_delays, dtype=float),
        gains=gains,
        step=step,
        fs=fs,
        path_loss_db=path_loss,
        doppler=fd,
        provenance="statistical",
        meta={
            "FadingDistribution": spec.distribution,
            "PathDelays": list(spec.path_delays),
            "AveragePathGains": list(spec.path_gains_db),
            "KFactor": spec.k_factor if spec.distribution == "rician" else None,
            "MaximumDopplerShift": fd,
        },
    )


def fractional_delay_taps(mu, half=FRACTIONAL_HALF_LENGTH):
    """Blackman-windowed sinc for a delay of ``mu`` in [0, 1) samples;
    tap ``i`` sits at offset ``i - half``."""
    u = np.arange(-half, half + 1) - mu
    a = np.pi * u / (half + 1)
    w = 0.42 + 0.5 * np.cos(a) + 0.08 * np.cos(2 * a)
    h = np.sinc(u) * w
    return h / h.sum()


def delay_signal(x, delay_samples):
    """``x`` delayed by a real number of samples; output starts at time 0
    and runs to the end of the delayed signal (pre-ringing before 0 is
    dropped)."""
    D = int(math.floor(delay_samples))
    mu = delay_samples - D
    if mu < 1e-9:
        return np.concatenate([np.zeros(D, dtype=complex), x])
    h = fractional_delay_taps(mu)
    half = FRACTIONAL_HALF_LENGTH
    y = np.convolve(x, h)  # y[j] is x delayed by mu at sample j - half
    start = D - half
    if start >= 0:
        return np.concatenate([np.zeros(start, dtype=complex), y])
    return y[-start:]


def apply_channel(x, h, start=0, out=None):
    """Propagate ``x`` (``(n_tx, n)``) through ``h``.

    ``start`` is the frame sample at which ``x`` begins, so a segment sees
    the part of the tap process that is live at its time. Returns (or
    accumulates into) ``(n_rx, m)``, ``m = n + ceil(max delay) + half``,
    aligned with ``x``'s first sample.
    """
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    if x.shape[0] != h.n_tx:
        raise ChannelError(f"{x.shape[0]} tx antennas, channel has {h.n_tx}")
    n = x.shape[1]
    dmax = h.delays.max() * h.fs if h.delays.size else 0.0
    m = n + int(math.ceil(dmax)) + FRACTIONAL_HALF_LENGTH
    if start + m > h.n_samples + h.step:
        raise ChannelError("tap process shorter than the signal it must cover")
    if out is None:
        out = np.zeros((h.n_rx, m), dtype=complex)
    if h.outage:
        return out
    k0 = start // h.step
    lead = start - k0 * h.step
    buf = np.zeros(lead + m, dtype=complex)
    for p, tau in enumerate(h.delays):
        shifted = [delay_signal(x[s], tau * h.fs) for s in range(h.n_tx)]
        for r in range(h.n_rx):
            acc = np.zeros(lead + m, dtype=complex)
            for s in range(h.n_tx):
                g = h.gains[r, s, p, k0:]
                if not np.any(g):
                    continue
                y = shifted[s][:m]
                buf[:] = 0
                buf[lead:lead + y.size] = y
                tv_accumulate(acc, buf, g, h.step)
            out[r, :m] += acc[lead:]
    return out
