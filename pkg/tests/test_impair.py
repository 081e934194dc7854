import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.signal import welch

from radioforge.constants import BOLTZMANN
from radioforge.errors import ImpairmentError
from radioforge.impair import (
    DcOffsetSpec,
    IqImbalanceSpec,
    NonlinearitySpec,
    PhaseNoiseSpec,
    ThermalNoiseSpec,
    am_am,
    am_pm,
    apply_dc_offset,
    apply_iq_imbalance,
    apply_nonlinearity,
    apply_phase_noise,
    apply_thermal_noise,
    dbm_to_watts,
    drive_amplifier,
    measure_truth_snr,
    noise_figure_to_temperature,
    watts_to_dbm,
)

R = np.linspace(0, 3, 301)


def tone(f, fs, n, a=1.0):
    return a * np.exp(2j * np.pi * f * np.arange(n) / fs)


def bin_power(x, f, fs):
    X = np.fft.fft(x) / x.size
    return np.abs(X[int(round(f / fs * x.size)) % x.size]) ** 2


# --- IQ imbalance -------------------------------------------------------


def test_iq_identity():
    x = tone(1e3, 1e5, 1000)
    assert apply_iq_imbalance(x, IqImbalanceSpec(0.0, 0.0)) is x


@pytest.mark.parametrize("A,P", [(3.10, 3.61), (0.5, 0.0), (5.0, 5.0), (0.0, 4.0)])
def test_iq_image_ratio(A, P):
    spec = IqImbalanceSpec(A, P)
    fs, n, f = 1e5, 10_000, 1234.0 * 10
    y = apply_iq_imbalance(tone(f, fs, n), spec)
    a, b = spec.coefficients()
    ratio = bin_power(y, -f, fs) / bin_power(y, f, fs)
    assert ratio == pytest.approx(abs(b) ** 2 / abs(a) ** 2, rel=1e-9)
    irr = 10 * np.log10(1 / ratio)
    assert abs(irr - 20 * np.log10(abs(a) / abs(b))) <= 0.2
    assert irr == pytest.approx(spec.image_rejection_db(), abs=1e-9)


def test_iq_conjugate_symmetry():
    n = 4096
    rng = np.random.default_rng(0)
    x = rng.normal(size=n) + 1j * rng.normal(size=n)
    y1 = apply_iq_imbalance(x, IqImbalanceSpec(2.0, 3.0))
    y2 = apply_iq_imbalance(np.conj(x), IqImbalanceSpec(2.0, -3.0))
    assert np.allclose(np.abs(np.fft.fft(y1)), np.abs(np.fft.fft(y2))[(-np.arange(n)) % n])


# --- DC offset ----------------------------------------------------------


def test_dc_identity():
    x = tone(1e3, 1e5, 100)
    assert apply_dc_offset(x, DcOffsetSpec(), np.random.default_rng(0)) is x


def test_dc_level_and_linearity():
    x = tone(1e3, 1e5, 1000)
    y = apply_dc_offset(x, DcOffsetSpec(-40.0), np.random.default_rng(1))
    c = np.mean(y) - np.mean(x)
    assert abs(c) ** 2 == pytest.approx(1e-4, abs=1e-9)
    assert np.allclose(y - x, c)


def test_dc_empty_rejected():
    with pytest.raises(ImpairmentError):
        apply_dc_offset(np.zeros(0, complex), DcOffsetSpec(-40.0), np.random.default_rng(0))


# --- phase noise --------------------------------------------------------


def test_phase_noise_identity():
    x = tone(1e3, 1e6, 100)
    assert apply_phase_noise(x, PhaseNoiseSpec(), 1e6, np.random.default_rng(0)) is x


@pytest.mark.parametrize("level", [-100.0, -120.0, -150.0])
def test_phase_noise_psd_at_anchor(level):
    fs = 1e6
    y = apply_phase_noise(np.ones(int(fs), complex), PhaseNoiseSpec(level, 1e4), fs, np.random.default_rng(7))
    f, P = welch(y, fs, nperseg=1 << 14, return_onesided=False, window="hann", detrend=False)
    sel = np.abs(np.abs(f) - 1e4) <= 500
    measured = 10 * np.log10(np.mean(P[sel]))
    assert abs(measured - level) <= 3.0


def test_phase_noise_anchor_above_nyquist():
    with pytest.raises(ImpairmentError):
        apply_phase_noise(np.ones(10, complex), PhaseNoiseSpec(-100, 6e5), 1e6, np.random.default_rng(0))


def test_phase_noise_constant_envelope():
    y = apply_phase_noise(np.ones(1000, complex), PhaseNoiseSpec(-90), 1e6, np.random.default_rng(0))
    assert np.allclose(np.abs(y), 1)


# --- nonlinearity -------------------------------------------------------


def test_saleh_reference_point():
    s = NonlinearitySpec("saleh", {"alpha_a": 2.0, "beta_a": 1.0, "alpha_p": 1.0, "beta_p": 1.0})
    assert am_am(1.0, s) == pytest.approx(1.0, abs=1e-12)


def test_saleh_closed_form():
    p = {"alpha_a": 2.1587, "beta_a": 1.1517, "alpha_p": 4.0033, "beta_p": 9.1040}
    s = NonlinearitySpec("saleh", p)
    assert np.max(np.abs(am_am(R, s) - p["alpha_a"] * R / (1 + p["beta_a"] * R ** 2))) <= 1e-9
    assert np.max(np.abs(am_pm(R, s) - p["alpha_p"] * R ** 2 / (1 + p["beta_p"] * R ** 2))) <= 1e-9


def test_ghorbani_closed_form():
    am, pm = (8.1081, 1.5413, 6.5202, -0.0718), (4.6645, 2.0965, 10.88, -0.003)
    s = NonlinearitySpec("ghorbani", {"am": am, "pm": pm})
    ref_a = am[0] * R ** am[1] / (1 + am[2] * R ** am[1]) + am[3] * R
    ref_p = pm[0] * R ** pm[1] / (1 + pm[2] * R ** pm[1]) + pm[3] * R
    assert np.max(np.abs(am_am(R, s) - ref_a)) <= 1e-9
    assert np.max(np.abs(am_pm(R, s) - ref_p)) <= 1e-9


@pytest.mark.parametrize("p", [0.5, 1.0, 2.0, 3.0])
def test_rapp_closed_form(p):
    g, a = 2.0, 1.5
    s = NonlinearitySpec("rapp", {"gain": g, "saturation": a, "smoothness": p})
    ref = g * R / (1 + (g * R / a) ** (2 * p)) ** (1 / (2 * p))
    assert np.max(np.abs(am_am(R, s) - ref)) <= 1e-9
    assert np.all(am_pm(R, s) == 0)


def test_rapp_large_p_is_clipper():
    g, a = 2.0, 1.5
    s = NonlinearitySpec("rapp", {"gain": g, "saturation": a, "smoothness": 100.0})
    r = np.linspace(1e-6, 0.99 * a / g, 500)
    assert np.all(np.abs(am_am(r, s) / (g * r) - 1) <= 0.01)
    assert np.all(am_am(np.linspace(a / g * 1.1, 10, 50), s) <= a * (1 + 1e-12))


def test_tanh_closed_form():
    s = NonlinearitySpec("tanh", {"gain": 3.0, "saturation": 0.7})
    assert np.max(np.abs(am_am(R, s) - 0.7 * np.tanh(3.0 * R / 0.7))) <= 1e-9


def test_cubic_closed_form():
    s = NonlinearitySpec("cubic", {"gain_db": 6.0, "iip3_dbm": 10.0})
    g, p3 = 10 ** (6 / 20), dbm_to_watts(10.0)
    r = np.linspace(0, math.sqrt(p3 / 3), 100)
    assert np.max(np.abs(am_am(r, s) - (g * r - g / p3 * r ** 3))) <= 1e-9


@pytest.mark.parametrize("iip3", [-10.0, 10.0, 30.0])
def test_cubic_two_tone_iip3(iip3):
    s = NonlinearitySpec("cubic", {"gain_db": 0.0, "iip3_dbm": iip3})
    fs, n = 1e6, 1 << 14
    f1, f2 = 100 * fs / n, 130 * fs / n
    for back in (25.0, 35.0):
        pin_w = dbm_to_watts(iip3 - back)  # per tone
        a = math.sqrt(pin_w)
        y = apply_nonlinearity(tone(f1, fs, n, a) + tone(f2, fs, n, a), s)
        p1 = watts_to_dbm(bin_power(y, f1, fs))
        p3 = watts_to_dbm(bin_power(y, 2 * f1 - f2, fs))
        est = watts_to_dbm(pin_w) + (p1 - p3) / 2
        assert abs(est - iip3) <= 0.5


def test_drive_amplifier_unit_power():
    rng = np.random.default_rng(0)
    x = (rng.normal(size=5000) + 1j * rng.normal(size=5000)) / math.sqrt(2)
    for m, p in [("saleh", {"alpha_a": 2.1587, "beta_a": 1.1517, "alpha_p": 4.0033, "beta_p": 9.1040}),
                 ("rapp", {"gain": 1.0, "saturation": 1.0, "smoothness": 2.0}),
                 ("cubic", {"gain_db": 0.0, "iip3_dbm": 30.0})]:
        y = drive_amplifier(x, NonlinearitySpec(m, p), 6.0)
        assert np.mean(np.abs(y) ** 2) == pytest.approx(1.0, abs=1e-9)


def test_nonlinearity_none_identity():
    x = tone(1e3, 1e5, 10)
    assert apply_nonlinearity(x, NonlinearitySpec()) is x


def test_bad_models():
    with pytest.raises(ImpairmentError):
        NonlinearitySpec("bogus")
    with pytest.raises(ImpairmentError):
        NonlinearitySpec("rapp", {"smoothness": 0.1})


@given(st.floats(0, 50, allow_nan=False))
def test_am_am_monotone_small_signal(r_scale):
    s = NonlinearitySpec("rapp", {"gain": 1.0, "saturation": 1.0, "smoothness": 2.0})
    r = np.linspace(0, r_scale, 50)
    assert np.all(np.diff(am_am(r, s)) >= -1e-12)


# --- thermal noise and SNR ----------------------------------------------


def test_thermal_identity():
    x = tone(1e3, 1e5, 10)
    assert apply_thermal_noise(x, ThermalNoiseSpec(0.0), 1e5, np.random.default_rng(0)) is x


def test_thermal_variance():
    sigma2 = BOLTZMANN * 290 * 1e6
    assert sigma2 == pytest.approx(4.004e-15, rel=1e-3)
    y = apply_thermal_noise(np.zeros(10 ** 6, complex), ThermalNoiseSpec(290.0), 1e6, np.random.default_rng(1))
    assert np.var(y) == pytest.approx(sigma2, rel=0.01)


def test_noise_figure_conversion():
    assert noise_figure_to_temperature(0.0) == 0.0
    assert noise_figure_to_temperature(10 * math.log10(2)) == pytest.approx(290.0)


def test_truth_snr():
    spec = ThermalNoiseSpec(290.0)
    assert measure_truth_snr(BOLTZMANN * 290 * 1e5, spec, 1e5) == pytest.approx(0.0, abs=1e-12)
    assert measure_truth_snr(0.0, spec, 1e5) == -math.inf
    with pytest.raises(ImpairmentError):
        measure_truth_snr(1.0, spec, 0.0)


def test_dbm_roundtrip():
    assert watts_to_dbm(dbm_to_watts(17.3)) == pytest.approx(17.3)
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
