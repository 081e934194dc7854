"""Independent oracles and small config builders shared by the test modules."""

import math

import numpy as np
from scipy import special
from scipy.signal import resample_poly, welch

from radioforge.channel.raytrace import Building, OsmScene, trace_paths
from radioforge.channel.statistical import N_SINUSOIDS, sos_tap
from radioforge.config import _modulation_params, config_from_dict, load_config
from radioforge.constants import SPEED_OF_LIGHT
from radioforge.modulate import build_spec, lookup, segment_layout, time_quantum
from radioforge.source import MessageSource, message_for

REFERENCE = load_config(None)

TX_OFF = {"iq_imbalance": False, "dc_offset": False, "phase_noise": False, "amplifier": False}
RX_OFF = {"iq_imbalance": False, "dc_offset": False, "amplifier": False, "thermal_noise": False}
ONE = {"kind": "fixed", "value": 1}


def fixed(v):
    return {"kind": "fixed", "value": v}


def clean_config(**over):
    """One tx, one rx, one antenna, AWGN channel, every impairment off."""
    d = {
        "num_frames": 1000,
        "channel": {"weights": {"awgn": 1.0}},
        "impairments": {"tx": dict(TX_OFF), "rx": dict(RX_OFF)},
        "distributions": {"num_tx": ONE, "num_rx": ONE, "tx_antennas": ONE, "rx_antennas": ONE},
    }
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(d.get(k), dict):
            d[k] = {**d[k], **v}
        else:
            d[k] = v
    return config_from_dict(d)


def snr_config(n_frames=500, target=20.0):
    """Single-signal AWGN frames at a fixed target SNR, noise on."""
    return config_from_dict({
        "num_frames": n_frames,
        "channel": {"weights": {"awgn": 1.0}},
        "impairments": {"tx": dict(TX_OFF), "rx": {**RX_OFF, "thermal_noise": True}},
        "distributions": {"num_tx": ONE, "num_rx": ONE, "num_segments": ONE, "rx_antennas": ONE,
                          "target_snr": fixed(target)},
    })


def estimate_snr(frame, truth):
    """Periodogram SNR of one signal: Welch PSD over the signal's active
    interval, noise floor from the median of bins well outside its band."""
    fs = frame.sample_rate
    s0 = int(round(truth.start * fs))
    s1 = s0 + int(round(truth.duration * fs))
    x = frame.samples[0, s0:s1].astype(complex)
    f, P = welch(x, fs, nperseg=1024, return_onesided=False, window="hann")
    df = f[1] - f[0]
    d = np.abs(f - truth.carrier)
    n0 = np.median(P[d > 0.75 * truth.bandwidth + 10e3])
    inb = d <= truth.bandwidth / 2
    ps = (P[inb].sum() - n0 * inb.sum()) * df
    return 10 * np.log10(ps / (n0 * truth.bandwidth))


def recover_segment(frame, seg, event, band_center):
    """Undo placement, carrier shift and rate change of one archived
    segment; returns modulator-rate samples normalised to unit power."""

    fs = frame.sample_rate
    up, down = seg.ratio.numerator, seg.ratio.denominator
    p, L = seg.placement, seg.samples.shape[1]
    y = np.zeros(L, complex)
    lo, hi = max(p, 0), min(p + L, frame.n_samples)
    y[lo - p:hi - p] = frame.samples[0, lo:hi]
    n = p + np.arange(L)
    y = y * np.exp(-2j * np.pi * (event.carrier - band_center) / fs * n)
    lay = segment_layout(seg_spec(frame, seg), seg.n_symbols)
    z = resample_poly(y, down, up)[seg.pad:seg.pad + lay.n_samples]
    return z / np.sqrt(np.mean(np.abs(z) ** 2))


def seg_spec(frame, seg):
    return frame.provenance["plan"].txs[seg.tx_id].spec


def periodogram_peak(x, fs):
    X = np.fft.fftshift(np.abs(np.fft.fft(x)) ** 2)
    f = np.fft.fftshift(np.fft.fftfreq(x.size, 1 / fs))
    return f[np.argmax(X)], fs / x.size


def two_tone_power(x, fs, f):
    """Power of the periodogram bin nearest ``f`` (coherent tones)."""
    X = np.fft.fft(x) / x.size
    k = int(round(f / fs * x.size)) % x.size
    return np.abs(X[k]) ** 2


# --- modulation ---------------------------------------------------------


def reference_spec(entry, seed=0, rate=40e3):
    rng = np.random.default_rng(seed)
    return build_spec(entry, rate, **_modulation_params(REFERENCE, lookup(entry), rng))


def payload_for(spec, n_bits, rng):
    q = time_quantum(spec)
    lay = segment_layout(spec, q)
    lay = segment_layout(spec, q * max(1, -(-n_bits // lay.payload)))
    if spec.is_digital:
        return rng.integers(0, 2, lay.payload).astype(np.uint8)
    return message_for(MessageSource(), lay.payload, spec.sample_rate, spec.message_bandwidth, rng)


# --- fading -------------------------------------------------------------


def independent_envelopes(n_real, n_per, fd, rng):
    """Samples spaced 37.3 Doppler periods apart are effectively
    uncorrelated, so each realisation contributes ``n_per`` draws."""
    t = np.arange(n_per) * 37.3 / fd
    return np.concatenate([sos_tap(fd, t, N_SINUSOIDS, rng) for _ in range(n_real)])


def rician_k_estimate(K, rng, n_real=200):
    t = np.arange(1000) * 37.3 / 100.0
    g = np.concatenate([math.sqrt(K / (K + 1)) * np.exp(1j * rng.uniform(-np.pi, np.pi))
                        + math.sqrt(1 / (K + 1)) * sos_tap(100.0, t, N_SINUSOIDS, rng) for _ in range(n_real)])
    p = np.abs(g) ** 2
    gamma = p.var() / p.mean() ** 2
    s = math.sqrt(1 - gamma)
    return s / (1 - s)


def autocorrelation_dev(fd, n_real, rng):
    fs_c = 32 * fd
    tt = np.arange(4000) / fs_c
    lags = np.arange(65)
    acc = np.zeros(lags.size)
    for _ in range(n_real):
        g = sos_tap(fd, tt, N_SINUSOIDS, rng)
        acc += [np.real(np.mean(g[k:] * np.conj(g[:g.size - k]))) for k in lags]
    acc /= n_real
    return np.max(np.abs(acc - special.j0(2 * np.pi * fd * lags / fs_c)))


# --- ray tracing --------------------------------------------------------


def rect(x0, y0, x1, y1, h):
    return Building(np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float), h)


def long_wall_scene():
    """A 20 km long, 1 m deep, 10 km tall slab whose north face is y = 0."""
    return OsmScene([rect(-1e4, -1.0, 1e4, 0.0, 1e4)])


def random_scene(rng):
    bs = []
    for _ in range(rng.integers(2, 10)):
        x, y = rng.uniform(-150, 150, 2)
        w, d = rng.uniform(10, 80, 2)
        bs.append(rect(x, y, x + w, y + d, rng.uniform(5, 60)))
    return OsmScene(bs, (-250.0, -250.0, 250.0, 250.0))


def free_point(scene, rng):
    while True:
        p = np.array([*rng.uniform(-240, 240, 2), rng.uniform(1.5, 30)])
        if not scene.inside_building(p[None, :2])[0]:
            return p


def _key(rays):
    return sorted((round(r.length, 6), round(abs(r.gain), 15), r.interactions) for r in rays)


def reflection_invariants(n_scenes, seed, fc=2.4e9):
    """Reciprocity, delay/length consistency, facade membership and the
    specular law over random scenes. Returns (reflections seen, failures)."""
    rng = np.random.default_rng(seed)
    n_refl, bad = 0, []
    for k in range(n_scenes):
        s = random_scene(rng)
        tx, rx = free_point(s, rng), free_point(s, rng)
        fwd = trace_paths(s, tx, rx, 2, fc)
        if _key(fwd) != _key(trace_paths(s, rx, tx, 2, fc)):
            bad.append((k, "reciprocity"))
        for r in fwd:
            v = r.vertices
            if abs(r.delay - r.length / SPEED_OF_LIGHT) > 1e-15 * r.delay:
                bad.append((k, "delay"))
            if abs(r.length - np.sum(np.linalg.norm(np.diff(v, axis=0), axis=1))) > 1e-12 * r.length:
                bad.append((k, "length"))
            for i, w in enumerate(r.walls, start=1):
                x0, y0, x1, y1, h = s.walls[w]
                n = np.array([*s.normals[w], 0.0])
                q = v[i]
                e = np.array([x1 - x0, y1 - y0])
                u = np.dot(q[:2] - [x0, y0], e) / np.dot(e, e)
                if abs(np.dot(q[:2] - [x0, y0], n[:2])) > 1e-6 or not (-1e-9 <= u <= 1 + 1e-9
                                                                       and -1e-9 <= q[2] <= h + 1e-9):
                    bad.append((k, "off-facade"))
                din = (q - v[i - 1]) / np.linalg.norm(q - v[i - 1])
                dout = (v[i + 1] - q) / np.linalg.norm(v[i + 1] - q)
                # equal angles to the normal, and the mirrored direction itself
                a_in = math.acos(min(1.0, abs(np.dot(din, n))))
                a_out = math.acos(min(1.0, abs(np.dot(dout, n))))
                if abs(a_in - a_out) > 1e-6 or not np.allclose(dout, din - 2 * np.dot(din, n) * n, atol=1e-7):
                    bad.append((k, "specular"))
                n_refl += 1
    return n_refl, bad
