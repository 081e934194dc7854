"""Frame synthesis: one ScenarioPlan in, one ReceiverFrame per receiver out.

Transmit side (shared by every receiver): for each scheduled segment draw
a payload, modulate, apply the transmitter impairments at the modulator
rate, resample to the master clock, scale to the transmit power and shift
to the segment's carrier. Receive side: run every segment through its
link's channel, measure the truth SNR per antenna, superpose, then add
thermal noise and the receiver impairments.

Resampling alignment: the modulator output is front-padded so that its
nominal body start lands on a whole master-clock sample, so a segment's
recorded start time is exact.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.signal import resample_poly

from ..channel.statistical import (
    FadingSpec,
    PathLossSpec,
    generate_tap_process,
    path_loss_db,
    sample_multipath,
    apply_channel,
)
from ..config import derive_stream, load_scene, sample_scenario
from ..constants import BOLTZMANN
from ..errors import FrameError, RadioForgeError
from ..impair import (
    DcOffsetSpec,
    PhaseNoiseSpec,
    ThermalNoiseSpec,
    apply_dc_offset,
    apply_iq_imbalance,
    apply_nonlinearity,
    apply_phase_noise,
    apply_thermal_noise,
    dbm_to_watts,
    drive_amplifier,
    small_signal_gain,
)
from ..modulate import ANALOG, MULTICARRIER, lookup, modulate, segment_layout
from ..modulate.spec import unit_power
from ..schedule import schedule_scenario
from ..source import MessageSource, generate_bits, message_for

# Listing-style names for the amplifier models and fading distributions
METHOD_NAMES = {
    "cubic": "Cubic polynomial",
    "tanh": "Hyperbolic tangent",
    "saleh": "Saleh model",
    "ghorbani": "Ghorbani model",
    "rapp": "Rapp model",
}
FADING_NAMES = {"rayleigh": "Rayleigh", "rician": "Rician", "static": "Static"}
# extra tap-process length beyond the frame, covering channel delay tails
_TAIL = 4096


def frame_name(frame_index, rx_id):
    """``Frame_XXXXXX_Rx_YYYY``; frame index 0-based, receiver 1-based."""
    return f"Frame_{frame_index:06d}_Rx_{rx_id + 1:04d}"


@dataclass
class TxSegment:
    """One transmitted segment at the master clock, already on its carrier.

    ``samples[:, 0]`` sits at frame sample ``placement`` (may be negative
    before cropping). ``pad`` and ``ratio`` let callers map back to the
    modulator's sample grid.
    """

    tx_id: int
    segment: int
    samples: np.ndarray
    placement: int
    pad: int
    ratio: Fraction
    n_symbols: int
    payload: np.ndarray


@dataclass(frozen=True)
class SignalTruth:
    tx_id: int
    segment: int
    class_id: int
    class_name: str
    carrier: float
    bandwidth: float
    start: float
    duration: float
    snr_db: float | None
    snr_per_antenna: tuple


@dataclass
class ReceiverFrame:
    frame_index: int
    rx_id: int
    samples: np.ndarray  # (n_antennas, n), complex64
    sample_rate: float
    duration: float
    truth: list
    annotation: dict
    provenance: dict = field(default_factory=dict)

    @property
    def name(self):
        return frame_name(self.frame_index, self.rx_id)

    @property
    def n_samples(self):
        return self.samples.shape[1]


def resample_ratio(fs_out, fs_in):
    return Fraction(fs_out / fs_in).limit_denominator(1000)


def _source(cfg, stream):
    s = cfg.section("source")
    if s["kind"] == "audio-file":
        files = s["audio_files"]
        return MessageSource("audio-file", None, path=files[int(stream.integers(len(files)))])
    if s["kind"] == "multitone":
        return MessageSource("multitone", None, tones=tuple(s["tones"]), amplitudes=tuple(s["amplitudes"]))
    return MessageSource("prbs", s["register_length"])


def _payload(cfg, spec, layout, seed, label):
    rng = derive_stream(seed, label)
    src = _source(cfg, rng)
    if spec.family in ANALOG:
        if src.kind == "prbs":
            src = MessageSource("multitone", None)
        return message_for(src, layout.payload, spec.sample_rate, spec.message_bandwidth, rng)
    if src.kind != "prbs":
        src = MessageSource("prbs", cfg.section("source")["register_length"])
    return generate_bits(src, layout.payload, rng)


def transmit_segment(cfg, plan, tx, segment, event, power_w):
    """Modulate and impair one segment; returns a :class:`TxSegment`."""
    fs = cfg.master_clock_rate
    spec = tx.spec
    layout = segment_layout(spec, tx.segment_symbols[segment])
    payload = _payload(cfg, spec, layout, plan.seed, f"tx{tx.tx_id}.seg{segment}.bits")
    x = modulate(spec, payload).samples

    rng = derive_stream(plan.seed, f"tx{tx.tx_id}.seg{segment}.impair")
    x = apply_iq_imbalance(x, tx.iq_imbalance)
    if tx.dc_offset_db is not None:
        x = apply_dc_offset(x, DcOffsetSpec(tx.dc_offset_db), rng)
    if tx.phase_noise_dbc is not None:
        x = apply_phase_noise(x, PhaseNoiseSpec(tx.phase_noise_dbc), spec.sample_rate, rng)
    x = drive_amplifier(x, tx.amplifier, tx.backoff_db) if tx.amplifier is not None else unit_power(x)[0]

    ratio = resample_ratio(fs, spec.sample_rate)
    up, down = ratio.numerator, ratio.denominator
    pad = (-layout.lead) % down
    if pad:
        x = np.concatenate([np.zeros((x.shape[0], pad), dtype=complex), x], axis=1)
    y = resample_poly(x, up, down, axis=1) if ratio != 1 else x
    lead_out = (layout.lead + pad) * up // down
    placement = int(round(event.start * fs)) - lead_out

    y = y * math.sqrt(power_w / tx.n_antennas)
    n = placement + np.arange(y.shape[1])
    y = y * np.exp(2j * np.pi * ((event.carrier - cfg.band_center) / fs) * n)
    return TxSegment(tx.tx_id, segment, y, placement, pad, ratio, tx.segment_symbols[segment], payload)


def link_channel(cfg, plan, tx, rx, n_samples):
    """Channel realization for link (tx, rx) covering ``n_samples``."""
    fs = cfg.master_clock_rate
    link = plan.link(tx.tx_id, rx.rx_id)
    ch = cfg.section("channel")
    rng = derive_stream(plan.seed, f"link{tx.tx_id}.{rx.rx_id}.channel")
    if link.family == "raytrace":
        from ..channel.raytrace import rays_to_channel, trace_paths

        rt = ch["raytrace"]
        rays = trace_paths(load_scene(plan.scene), tx.position, rx.position, rt["max_reflections"],
                           cfg.carrier_frequency, rt["reflection_coefficient"])
        h = rays_to_channel(rays, cfg.carrier_frequency, fs, n_samples, tx.n_antennas, rx.n_antennas, link.doppler)
        h.meta.update({"FadingDistribution": "RayTracing", "KFactor": None})
        return h
    pl = path_loss_db(PathLossSpec(link.distance, cfg.carrier_frequency, ch["path_loss_model"],
                                   link.path_loss_exponent, ch["reference_distance"]))
    if link.family == "awgn" or link.fading == "static":
        spec = FadingSpec("static", n_tx=tx.n_antennas, n_rx=rx.n_antennas)
    else:
        delays, gains = sample_multipath(link.n_extra_paths, rng, tuple(ch["delay_range"]), ch["delay_decay"])
        spec = FadingSpec(link.fading, link.k_factor, delays, gains, link.doppler, tx.n_antennas, rx.n_antennas,
                          ch["n_sinusoids"])
    return generate_tap_process(spec, n_samples, fs, rng, pl)


def _array_gain(h, x):
    """Power gain of a static MIMO channel for waveform ``x`` relative to
    its path loss. Replicated antenna streams add coherently through
    equal static gains; orthogonal (space-time coded) ones do not."""
    g = h.gains[:, :, 0, 0]
    c = x @ x.conj().T / x.shape[1]
    rx = np.real(np.einsum("rs,st,rt->r", g, c, g.conj())).mean()
    return float(rx / (10 ** (-h.path_loss_db / 10) * np.real(np.trace(c))))


def _power_w(cfg, plan, tx, channels, x):
    """Transmit power in watts; in target-SNR mode it is set so receiver 0
    sees the target in the first segment's bandwidth before fading.
    ``x`` is that segment's unit-power waveform."""
    if plan.target_snr_db is None:
        return dbm_to_watts(tx.power_dbm)
    rx0 = plan.rxs[0]
    h = channels[(tx.tx_id, 0)]
    if not np.isfinite(h.path_loss_db) or rx0.noise_temperature == 0:
        return dbm_to_watts(tx.power_dbm)
    noise = BOLTZMANN * rx0.noise_temperature * tx.spec.occupied_bandwidth
    gain = _array_gain(h, x) if h.meta.get("FadingDistribution") == "static" else 1.0
    return noise * 10 ** ((plan.target_snr_db + h.path_loss_db) / 10) / gain


def _snr_db(power, temperature, bandwidth):
    if temperature == 0 or power <= 0:
        return None
    return float(10 * np.log10(power / (BOLTZMANN * temperature * bandwidth)))


def _amp_config(spec):
    if spec is None:
        return {"Method": "None"}
    out = {"Method": METHOD_NAMES[spec.model]}
    for k, v in spec.params.items():
        out[k] = list(v) if isinstance(v, tuple) else v
    if spec.input_scale != 1.0:
        out["InputScale"] = spec.input_scale
    return out


def _iq_config(spec):
    return {"A": 0.0, "P": 0.0} if spec is None else {"A": spec.amplitude_db, "P": spec.phase_deg}


def _site(prefix, idx, pos, n_ant):
    return {"Name": f"{prefix}_{idx + 1}", "Position": list(pos[:2]),
            "Antenna": {"Height": pos[2], "NumAntennas": n_ant, "Spacing": 0.5}}


def modulator_type(entry):
    """Type label without the order prefix: ``16-PSK`` -> ``PSK``; the
    multicarrier family name for multicarrier classes."""
    if entry.family in MULTICARRIER:
        return entry.family
    head, _, tail = entry.name.partition("-")
    return tail if tail and head.isdigit() else entry.name


def _one_or_list(values):
    return values[0] if len(values) == 1 else list(values)


def _annotation(cfg, plan, rx, n, truth, channels, powers):
    fs = cfg.master_clock_rate
    by_tx = {}
    for t in truth:
        by_tx.setdefault(t.tx_id, []).append(t)
    snrs, snrs_ant = [], []
    tx_entries = []
    for tx in plan.txs:
        ts = by_tx[tx.tx_id]
        entry = lookup(tx.spec.name)
        h = channels[(tx.tx_id, rx.rx_id)]
        link = plan.link(tx.tx_id, rx.rx_id)
        snrs.append(_one_or_list([t.snr_db for t in ts]))
        snrs_ant.append(_one_or_list([list(t.snr_per_antenna) for t in ts]))
        meta = h.meta
        fading = meta.get("FadingDistribution")
        tx_entries.append({
            "TxIndex": tx.tx_id,
            "ModulatorType": modulator_type(entry),
            "ModulatorOrder": entry.order,
            "ClassName": entry.name,
            "ClassId": entry.class_id,
            "Family": entry.family,
            "IsDigital": entry.is_digital,
            "SymbolRate": tx.spec.symbol_rate,
            "SamplesPerSymbol": tx.spec.sps,
            "CarrierFrequency": ts[0].carrier,
            "NumTransmitAntennas": tx.n_antennas,
            "TransmitPower": 10 * math.log10(powers[tx.tx_id]) + 30,
            "IqImbalanceConfig": _iq_config(tx.iq_imbalance),
            "DcOffset": tx.dc_offset_db,
            "MemoryLessNonlinearityConfig": dict(_amp_config(tx.amplifier), BackoffDb=tx.backoff_db),
            "PhaseNoiseConfig": {"Level": tx.phase_noise_dbc, "FrequencyOffset": 1e4},
            "SiteConfig": _site("Tx", tx.tx_id, tx.position, tx.n_antennas),
            "ChannelFamily": link.family,
            "Environment": link.environment,
            "Distance": link.distance,
            "PathLoss": h.path_loss_db if np.isfinite(h.path_loss_db) else None,
            "FadingDistribution": FADING_NAMES.get(fading, fading),
            "KFactor": meta.get("KFactor"),
            "MaximumDopplerShift": meta.get("MaximumDopplerShift", h.doppler),
            "PathDelays": list(meta.get("PathDelays", [0.0])),
            "AveragePathGains": list(meta.get("AveragePathGains", [0.0])),
            "Outage": bool(h.outage),
            "StartTimes": [t.start for t in ts],
            "TimeDurations": [t.duration for t in ts],
            "NumSymbols": list(tx.segment_symbols),
            "BandWidth": [[-t.bandwidth / 2, t.bandwidth / 2] for t in ts],
        })
    rx_entry = {
        "MasterClockRate": fs,
        "NumReceiveAntennas": rx.n_antennas,
        "NumSamples": n,
        "TimeDuration": n / fs,
        "CenterFrequency": cfg.carrier_frequency + cfg.band_center,
        "ObservableBand": list(cfg.band),
        "IqImbalanceConfig": _iq_config(rx.iq_imbalance),
        "DcOffset": rx.dc_offset_db,
        "MemoryLessNonlinearityConfig": _amp_config(rx.amplifier),
        "ThermalNoiseConfig": {"NoiseTemperature": rx.noise_temperature, "NoiseFigure": rx.noise_figure_db},
        "SiteConfig": _site("Rx", rx.rx_id, rx.position, rx.n_antennas),
        "SNRs": snrs,
        "SNRsPerAntenna": snrs_ant,
    }
    return {
        "annotation": {
            "frame": {"FrameIndex": plan.frame_index, "Seed": plan.seed, "ChannelFamily": plan.channel_family,
                      "Scene": plan.scene, "TargetSNR": plan.target_snr_db,
                      "Overlaps": [list(o) for o in plan.schedule.overlaps],
                      "ScheduleAttempts": plan.schedule.attempts},
            "rx": rx_entry,
            "tx": tx_entries,
        },
        "filePrefix": frame_name(plan.frame_index, rx.rx_id),
    }


def synthesize_frame(cfg, plan, keep_tx=False):
    """All receiver frames for one scenario.

    ``plan`` may be unscheduled (it is scheduled here). With ``keep_tx``
    the transmitted segments are attached to each frame's provenance under
    ``"tx_segments"`` (used by loopback checks).
    """
    idx = plan.frame_index
    stage = "schedule"
    try:
        if plan.schedule is None:
            plan = schedule_scenario(cfg, plan)
        fp = plan.schedule
        n, fs = fp.n_samples, fp.sample_rate

        stage = "channel"
        channels = {}
        for tx in plan.txs:
            for rx in plan.rxs:
                channels[(tx.tx_id, rx.rx_id)] = link_channel(cfg, plan, tx, rx, n + _TAIL)

        stage = "transmit"
        segments, powers = [], {}
        for tx in plan.txs:
            segs = [(ev, transmit_segment(cfg, plan, tx, ev.segment, ev, 1.0)) for ev in fp.events_of(tx.tx_id)]
            powers[tx.tx_id] = p = _power_w(cfg, plan, tx, channels, segs[0][1].samples)
            for _, seg in segs:
                seg.samples *= math.sqrt(p)
            segments += segs

        frames = []
        for rx in plan.rxs:
            stage = f"receive rx{rx.rx_id}"
            y = np.zeros((rx.n_antennas, n), dtype=complex)
            truth = []
            for ev, seg in segments:
                tx = plan.txs[seg.tx_id]
                x, p0 = seg.samples, seg.placement
                if p0 < 0:
                    x, p0 = x[:, -p0:], 0
                x = x[:, : max(0, n - p0)]
                out = apply_channel(x, channels[(tx.tx_id, rx.rx_id)], start=p0)
                m = min(out.shape[1], n - p0)
                y[:, p0:p0 + m] += out[:, :m]
                s0 = int(round(ev.start * fs))
                s1 = min(n, s0 + int(round(ev.duration * fs)))
                pw = np.mean(np.abs(out[:, s0 - p0:s1 - p0]) ** 2, axis=1)
                per_ant = tuple(_snr_db(v, rx.noise_temperature, ev.bandwidth) for v in pw)
                entry = lookup(tx.spec.name)
                truth.append(SignalTruth(tx.tx_id, ev.segment, entry.class_id, entry.name, ev.carrier,
                                         ev.bandwidth, ev.start, ev.duration,
                                         _snr_db(float(pw.mean()), rx.noise_temperature, ev.bandwidth), per_ant))

            stage = f"rx impairments rx{rx.rx_id}"
            rng = derive_stream(plan.seed, f"rx{rx.rx_id}.noise")
            y = apply_thermal_noise(y, ThermalNoiseSpec(rx.noise_temperature), fs, rng)
            if rx.amplifier is not None:
                y = apply_nonlinearity(y, rx.amplifier) / small_signal_gain(rx.amplifier)
            y = apply_iq_imbalance(y, rx.iq_imbalance)
            if rx.dc_offset_db is not None:
                y = apply_dc_offset(y, DcOffsetSpec(rx.dc_offset_db), derive_stream(plan.seed, f"rx{rx.rx_id}.dc"))

            stage = "annotate"
            anno = _annotation(cfg, plan, rx, n, truth, channels, powers)
            prov = {"plan": plan}
            if keep_tx:
                prov["tx_segments"] = [s for _, s in segments]
            frames.append(ReceiverFrame(idx, rx.rx_id, y.astype(np.complex64), fs, n / fs, truth, anno, prov))
        return frames
    except FrameError:
        raise
    except (RadioForgeError, ValueError, ArithmeticError) as exc:
        raise FrameError(idx, stage, exc) from exc


def generate_frame(cfg, frame_index, keep_tx=False):
    """Sample, schedule and synthesize scenario ``frame_index``."""
    try:
        plan = sample_scenario(cfg, frame_index)
    except RadioForgeError as exc:
        raise FrameError(frame_index, "sample", exc) from exc
    return synthesize_frame(cfg, plan, keep_tx)
