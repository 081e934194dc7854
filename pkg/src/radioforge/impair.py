"""RF front-end impairments, thermal noise and ground-truth SNR.

Each ``apply_*`` function is the exact identity when its spec is ``None``
or carries its "disabled" value (0 dB / 0 deg imbalance, ``-inf`` dB DC or
phase-noise level, model ``"none"``, zero temperature).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import BOLTZMANN, T0
from .errors import ImpairmentError

PHASE_NOISE_OFFSET = 1e4

MODELS = ("none", "cubic", "tanh", "saleh", "ghorbani", "rapp")

# Saleh (1981) TWT fit and the Ghorbani defaults used by common toolboxes.
SALEH_DEFAULT = {"alpha_a": 2.1587, "beta_a": 1.1517, "alpha_p": 4.0033, "beta_p": 9.1040}
GHORBANI_DEFAULT = {
    "am": (8.1081, 1.5413, 6.5202, -0.0718),
    "pm": (4.6645, 2.0965, 10.88, -0.003),
}


@dataclass(frozen=True)
class IqImbalanceSpec:
    amplitude_db: float = 0.0
    phase_deg: float = 0.0

    def coefficients(self):
        """(alpha, beta) of y = alpha * x + beta * conj(x)."""
        ge = 10 ** (self.amplitude_db / 20) * np.exp(1j * np.deg2rad(self.phase_deg))
        return (ge + 1) / 2, (ge - 1) / 2

    def image_rejection_db(self):
        a, b = self.coefficients()
        return math.inf if b == 0 else 20 * math.log10(abs(a) / abs(b))


@dataclass(frozen=True)
class NonlinearitySpec:
    """Memoryless AM/AM, AM/PM model.

    ``params`` by model: cubic ``gain_db, iip3_dbm``; tanh and rapp
    ``gain, saturation`` (+ rapp ``smoothness``); saleh ``alpha_a, beta_a,
    alpha_p, beta_p``; ghorbani ``am, pm`` 4-tuples. The envelope is taken
    in units of ``input_scale`` (amplitude), so the same normalised model
    can be referenced to an absolute power level.
    """

    model: str = "none"
    params: dict = field(default_factory=dict)
    input_scale: float = 1.0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ImpairmentError(f"unknown nonlinearity model {self.model!r}")
        p = self.params
        if self.model == "rapp" and p.get("smoothness", 1.0) < 0.5:
            raise ImpairmentError("rapp smoothness must be >= 0.5")
        if self.model in ("rapp", "tanh") and p.get("saturation", 1.0) <= 0:
            raise ImpairmentError("saturation level must be positive")
        if self.input_scale <= 0:
            raise ImpairmentError("input scale must be positive")


@dataclass(frozen=True)
class PhaseNoiseSpec:
    level_dbc: float = -math.inf
    offset_hz: float = PHASE_NOISE_OFFSET


@dataclass(frozen=True)
class DcOffsetSpec:
    level_db: float = -math.inf


@dataclass(frozen=True)
class ThermalNoiseSpec:
    temperature: float = 0.0

    @classmethod
    def from_noise_figure(cls, nf_db):
        return cls(noise_figure_to_temperature(nf_db))

    def noise_power(self, bandwidth):
        return BOLTZMANN * self.temperature * bandwidth


def noise_figure_to_temperature(nf_db):
    """T = T0 (F - 1), T0 = 290 K."""
    return T0 * (10 ** (nf_db / 10) - 1)


def dbm_to_watts(dbm):
    return 10 ** ((dbm - 30) / 10)


def watts_to_dbm(w):
    return 10 * np.log10(w) + 30


# --------------------------------------------------------------------------


def apply_iq_imbalance(x, spec):
    if spec is None or (spec.amplitude_db == 0 and spec.phase_deg == 0):
        return x
    a, b = spec.coefficients()
    return a * x + b * np.conj(x)


def apply_dc_offset(x, spec, stream):
    if spec is None or spec.level_db == -math.inf:
        return x
    if np.size(x) == 0:
        raise ImpairmentError("DC offset needs a non-empty signal")
    p = np.mean(np.abs(x) ** 2, axis=-1, keepdims=True)
    c = np.sqrt(10 ** (spec.level_db / 10) * p) * np.exp(2j * np.pi * stream.random())
    return x + c


def phase_noise_step_variance(level_dbc, offset_hz, fs):
    """Per-sample increment variance of the random-walk phase whose
    two-sided PSD, ``s2 / (4 fs sin^2(pi f / fs))``, equals the level at the
    anchor offset (about 1/f^2, i.e. -20 dB/decade)."""
    L = 10 ** (level_dbc / 10)
    return L * fs * 4 * np.sin(np.pi * offset_hz / fs) ** 2


def apply_phase_noise(x, spec, fs, stream):
    if spec is None or spec.level_dbc == -math.inf:
        return x
    if spec.offset_hz >= fs / 2:
        raise ImpairmentError(f"phase-noise anchor {spec.offset_hz:g} Hz >= fs/2")
    n = np.shape(x)[-1]
    s2 = phase_noise_step_variance(spec.level_dbc, spec.offset_hz, fs)
    phi = np.cumsum(stream.normal(0.0, np.sqrt(s2), n))
    return x * np.exp(1j * phi)


def _cubic(r, p):
    g = 10 ** (p.get("gain_db", 0.0) / 20)
    p3 = dbm_to_watts(p["iip3_dbm"])
    # |x|^2 is complex-baseband power; derivative of g r - (g/p3) r^3 is
    # zero at r_sat = sqrt(p3 / 3), where the output is clamped
    r_sat = np.sqrt(p3 / 3)
    rc = np.minimum(r, r_sat)
    return g * rc - (g / p3) * rc ** 3, np.zeros_like(r)


def _am_pm(r, spec):
    p, m = spec.params, spec.model
    if m == "cubic":
        return _cubic(r, p)
    if m == "tanh":
        g, a = p.get("gain", 1.0), p.get("saturation", 1.0)
        return a * np.tanh(g * r / a), np.zeros_like(r)
    if m == "saleh":
        r2 = r * r
        return p["alpha_a"] * r / (1 + p["beta_a"] * r2), p["alpha_p"] * r2 / (1 + p["beta_p"] * r2)
    if m == "ghorbani":
        x1, x2, x3, x4 = p["am"]
        y1, y2, y3, y4 = p["pm"]
        ra, rp = r ** x2, r ** y2
        return x1 * ra / (1 + x3 * ra) + x4 * r, y1 * rp / (1 + y3 * rp) + y4 * r
    if m == "rapp":
        g, a, s = p.get("gain", 1.0), p.get("saturation", 1.0), p.get("smoothness", 1.0)
        return g * r / (1 + (g * r / a) ** (2 * s)) ** (1 / (2 * s)), np.zeros_like(r)
    raise ImpairmentError(f"unknown nonlinearity model {m!r}")


def am_am(r, spec):
    """Output envelope for input envelope ``r`` (in ``input_scale`` units)."""
    return _am_pm(np.asarray(r, dtype=float), spec)[0]


def am_pm(r, spec):
    return _am_pm(np.asarray(r, dtype=float), spec)[1]


def apply_nonlinearity(x, spec):
    """y = s * A(|x|/s) * exp(j (arg x + Phi(|x|/s))), s = input_scale."""
    if spec is None or spec.model == "none":
        return x
    s = spec.input_scale
    r = np.abs(x)
    a, phi = _am_pm(r / s, spec)
    unit = np.where(r > 0, x / np.where(r > 0, r, 1.0), 0)
    return s * a * np.exp(1j * phi) * unit


def small_signal_gain(spec, r0=1e-6):
    """Linear gain dA/dr near zero (numerical, for normalising the LNA)."""
    if spec is None or spec.model == "none":
        return 1.0
    return float(am_am(r0, spec) / r0)


def saturation_envelope(spec):
    """Input envelope (model units) at which AM/AM peaks or saturates."""
    p, m = spec.params, spec.model
    if m == "cubic":
        return math.sqrt(dbm_to_watts(p["iip3_dbm"]) / 3)
    if m == "saleh":
        return 1 / math.sqrt(p["beta_a"])
    if m in ("tanh", "rapp"):
        return p.get("saturation", 1.0) / p.get("gain", 1.0)
    if m == "ghorbani":
        r = np.linspace(1e-3, 10, 20001)
        return float(r[np.argmax(am_am(r, spec))])
    return 1.0


def drive_amplifier(x, spec, backoff_db):
    """Scale unit-power ``x`` to sit ``backoff_db`` below the model's
    saturation envelope, amplify, and return unit-power output."""
    if spec is None or spec.model == "none":
        return x
    rms = spec.input_scale * saturation_envelope(spec) * 10 ** (-backoff_db / 20)
    y = apply_nonlinearity(x * rms, spec)
    p = np.mean(np.abs(y) ** 2, axis=-1, keepdims=True)
    return y / np.sqrt(np.where(p > 0, p, 1.0))


def apply_thermal_noise(x, spec, fs, stream):
    """Circular complex Gaussian noise, variance k T fs per sample."""
    if fs <= 0:
        raise ImpairmentError("sample rate must be positive")
    if spec is None or spec.temperature == 0:
        return x
    s = np.sqrt(BOLTZMANN * spec.temperature * fs / 2)
    shape = np.shape(x)
    noise = stream.normal(0.0, s, shape) + 1j * stream.normal(0.0, s, shape)
    return x + noise


def measure_truth_snr(signal_power, spec, bandwidth):
    """10 log10(P / (k T B)); ``-inf`` for zero power."""
    if bandwidth <= 0:
        raise ImpairmentError("bandwidth must be positive")
    p = np.asarray(signal_power, dtype=float)
    n = BOLTZMANN * spec.temperature * bandwidth
    with np.errstate(divide="ignore"):
        snr = 10 * np.log10(p / n)
    return float(snr) if snr.ndim == 0 else snr
