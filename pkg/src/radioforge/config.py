"""Configuration loading, parameter distributions and per-frame scenario
sampling.

A user config is a partial JSON document deep-merged onto the shipped
reference configuration, then checked against ``data/config.schema.json``
(unknown keys are errors) and a set of semantic rules.

Randomness: the frame seed is derived from ``(master seed, frame index)``
by ``numpy.random.SeedSequence`` with the frame index as spawn key, so a
frame never depends on which worker made it or what ran before. Every
consumer then draws from :func:`derive_stream` with its own label.
"""

import copy
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .channel.statistical import doppler_from_speed
from .errors import ConfigError
from .impair import (
    GHORBANI_DEFAULT,
    SALEH_DEFAULT,
    IqImbalanceSpec,
    NonlinearitySpec,
    dbm_to_watts,
    noise_figure_to_temperature,
)
from .modulate import CPM, LINEAR, MULTICARRIER, build_spec, list_registry, lookup, time_quantum

DIST_KINDS = ("fixed", "uniform", "uniform-discrete", "categorical")


def _data(name):
    return resources.files("radioforge").joinpath("data").joinpath(name)


@lru_cache(maxsize=None)
def _schema():
    return json.loads(_data("config.schema.json").read_text())


def default_config_dict():
    """A fresh copy of the reference configuration."""
    return json.loads(_data("reference_config.json").read_text())


def deep_merge(base, over, _replace=False):
    """Recursive merge of ``over`` onto ``base``. Weight tables and single
    distributions are replaced whole, never merged key by key."""
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "weights" and not _replace:
            out[k] = deep_merge(out[k], v, _replace=k == "distributions")
        else:
            out[k] = copy.deepcopy(v)
    return out


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ParameterDistribution:
    kind: str
    low: float | None = None
    high: float | None = None
    value: object = None
    choices: tuple = ()
    weights: tuple = ()

    @classmethod
    def from_dict(cls, d, key="distribution"):
        kind = d.get("kind")
        if kind not in DIST_KINDS:
            raise ConfigError(f"unknown distribution kind {kind!r}", key)
        if kind == "fixed":
            return cls(kind, value=d.get("value"))
        if kind in ("uniform", "uniform-discrete"):
            lo, hi = d["range"]
            if lo > hi:
                raise ConfigError(f"lower bound {lo} > upper bound {hi}", f"{key}.range")
            if kind == "uniform-discrete":
                if int(lo) != lo or int(hi) != hi:
                    raise ConfigError("discrete bounds must be integers", f"{key}.range")
                lo, hi = int(lo), int(hi)
            return cls(kind, low=lo, high=hi)
        choices = tuple(d["choices"])
        w = tuple(float(x) for x in d.get("weights") or [1.0] * len(choices))
        if len(w) != len(choices):
            raise ConfigError("one weight per choice", f"{key}.weights")
        if any(x < 0 for x in w) or sum(w) <= 0:
            raise ConfigError("weights must be >= 0 with a positive sum", f"{key}.weights")
        return cls(kind, choices=choices, weights=w)

    def sample(self, rng):
        if self.kind == "fixed":
            return self.value
        if self.kind == "uniform":
            return float(rng.uniform(self.low, self.high))
        if self.kind == "uniform-discrete":
            return int(rng.integers(self.low, self.high + 1))
        p = np.asarray(self.weights) / sum(self.weights)
        return self.choices[int(rng.choice(len(self.choices), p=p))]

    def prob_at_least(self, v):
        """P(X >= v) for a numeric distribution."""
        if self.kind == "fixed":
            return float(self.value >= v)
        if self.kind == "uniform":
            return float(np.clip((self.high - v) / (self.high - self.low), 0, 1)) if self.high > self.low \
                else float(self.low >= v)
        if self.kind == "uniform-discrete":
            n = self.high - self.low + 1
            return float(np.clip(self.high - math.ceil(v) + 1, 0, n)) / n
        w = np.asarray(self.weights) / sum(self.weights)
        return float(sum(p for c, p in zip(self.choices, w) if c >= v))

    def contains(self, v):
        if self.kind == "fixed":
            return v == self.value
        if self.kind == "categorical":
            return v in self.choices
        return self.low <= v <= self.high

    def to_dict(self):
        if self.kind == "fixed":
            return {"kind": "fixed", "value": self.value}
        if self.kind == "categorical":
            return {"kind": "categorical", "choices": list(self.choices), "weights": list(self.weights)}
        return {"kind": self.kind, "range": [self.low, self.high]}


@dataclass(frozen=True)
class MasterConfig:
    """Validated configuration. Treat as immutable; ``raw`` is the merged
    JSON document and the source of every section not lifted to a field."""

    seed: int
    num_frames: int
    band: tuple
    master_clock_rate: float
    carrier_frequency: float
    distributions: dict
    registry: tuple
    registry_weights: tuple
    channel_weights: dict
    raw: dict = field(repr=False)

    def section(self, name):
        return self.raw[name]

    def dist(self, name):
        return self.distributions[name]

    @property
    def band_width(self):
        return self.band[1] - self.band[0]

    @property
    def band_center(self):
        return (self.band[0] + self.band[1]) / 2

    def to_json(self):
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    def digest(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def _check(cond, msg, key):
    if not cond:
        raise ConfigError(msg, key)


def config_from_dict(user, base=None):
    """Merge ``user`` onto the reference config (or ``base``) and validate."""
    merged = deep_merge(default_config_dict() if base is None else base, user or {})
    try:
        jsonschema.validate(merged, _schema())
    except jsonschema.ValidationError as exc:
        key = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        if exc.validator == "additionalProperties":
            extra = sorted(set(exc.instance) - set(exc.schema.get("properties", {})))
            key = ".".join([*(str(p) for p in exc.absolute_path), *extra[:1]])
            raise ConfigError("unknown key", key) from None
        raise ConfigError(exc.message, key) from None

    lo, hi = merged["band"]
    _check(lo < hi, "band lower edge must be below upper edge", "band")
    _check(merged["master_clock_rate"] > 2 * (hi - lo), "master clock must exceed twice the band width",
           "master_clock_rate")
    dists = {k: ParameterDistribution.from_dict(v, f"distributions.{k}") for k, v in merged["distributions"].items()}
    for k in ("num_tx", "num_rx", "tx_antennas", "rx_antennas", "num_segments", "symbols_per_segment"):
        d = dists[k]
        if d.kind == "fixed":
            _check(isinstance(d.value, int) and d.value >= 1, "must be a positive integer", f"distributions.{k}.value")
        else:
            _check(d.kind == "uniform-discrete" and d.low >= 1, "must be a positive integer range",
                   f"distributions.{k}")
    for k in ("tx_antennas", "rx_antennas"):
        d = dists[k]
        top = d.value if d.kind == "fixed" else d.high
        _check(top <= 4, "at most 4 antennas are supported", f"distributions.{k}")
    w = {f: float(merged["channel"]["weights"].get(f, 0.0)) for f in ("statistical", "raytrace", "awgn")}
    _check(abs(sum(w.values()) - 1) < 1e-9, f"channel weights sum to {sum(w.values()):g}, not 1", "channel.weights")
    sch = merged["schedule"]
    _check(sch["idle_fraction"][0] <= sch["idle_fraction"][1], "lower bound > upper bound", "schedule.idle_fraction")
    _check(sch["min_samples"] <= sch["max_samples"], "min_samples > max_samples", "schedule.min_samples")
    spg = merged["spectrogram"]
    _check(spg["nfft"] & (spg["nfft"] - 1) == 0, "FFT size must be a power of two", "spectrogram.nfft")
    _check(spg["hop"] <= spg["nfft"], "hop must not exceed the FFT size", "spectrogram.hop")
    src = merged["source"]
    if src["kind"] == "audio-file":
        _check(bool(src["audio_files"]), "audio source needs at least one file", "source.audio_files")

    mod = merged["modulation"]
    classes = mod["classes"]
    try:
        entries = tuple(lookup(c) for c in classes) if classes else list_registry()
        for name in mod["weights"]:
            lookup(name)
    except Exception as exc:
        raise ConfigError(str(exc), "modulation") from None
    weights = tuple(float(mod["weights"].get(e.name, e.weight)) for e in entries)
    _check(len(entries) > 0 and sum(weights) > 0, "modulation registry is empty", "modulation.classes")

    seed = merged["seed"]
    return MasterConfig(
        seed=int(seed),
        num_frames=int(merged["num_frames"]),
        band=(float(lo), float(hi)),
        master_clock_rate=float(merged["master_clock_rate"]),
        carrier_frequency=float(merged["carrier_frequency"]),
        distributions=dists,
        registry=entries,
        registry_weights=weights,
        channel_weights=dict(w),
        raw=merged,
    )


def load_config(path=None):
    """Load and validate a JSON config file; ``None`` gives the reference."""
    if path is None:
        return config_from_dict({})
    text = Path(path).read_text(encoding="utf-8")  # OSError propagates: an I/O failure, not a config one
    try:
        user = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}", "<file>") from exc
    if not isinstance(user, dict):
        raise ConfigError("top level must be an object", "<root>")
    return config_from_dict(user)


# --------------------------------------------------------------------------
# seeding


def frame_seed(master_seed, frame_index):
    """64-bit frame seed: SeedSequence(master, spawn_key=(index,))."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(frame_index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _label_key(label):
    digest = hashlib.blake2b(label.encode(), digest_size=16).digest()
    return tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))


def derive_stream(frame_seed_value, label):
    """Independent PCG64 generator for one stage of one frame."""
    if not label:
        raise ConfigError("stream label must be non-empty", "label")
    ss = np.random.SeedSequence(int(frame_seed_value), spawn_key=_label_key(label))
    return np.random.Generator(np.random.PCG64(ss))


# --------------------------------------------------------------------------
# scenario plan


@dataclass(frozen=True)
class TxPlan:
    tx_id: int
    spec: object  # ModulationSpec
    n_antennas: int
    segment_symbols: tuple
    power_dbm: float
    iq_imbalance: IqImbalanceSpec | None
    dc_offset_db: float | None
    phase_noise_dbc: float | None
    amplifier: NonlinearitySpec | None
    backoff_db: float
    position: tuple = (0.0, 0.0, 0.0)

    @property
    def n_segments(self):
        return len(self.segment_symbols)


@dataclass(frozen=True)
class RxPlan:
    rx_id: int
    n_antennas: int
    noise_figure_db: float
    noise_temperature: float
    iq_imbalance: IqImbalanceSpec | None
    dc_offset_db: float | None
    amplifier: NonlinearitySpec | None
    position: tuple = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class LinkPlan:
    tx_id: int
    rx_id: int
    family: str  # statistical | raytrace | awgn
    environment: str
    distance: float
    path_loss_exponent: float
    fading: str
    k_factor: float
    speed: float
    doppler: float
    n_extra_paths: int


@dataclass(frozen=True)
class ScenarioPlan:
    frame_index: int
    seed: int
    channel_family: str
    scene: str | None
    txs: tuple
    rxs: tuple
    links: tuple
    target_snr_db: float | None = None
    schedule: object = None  # FramePlan, filled by the scheduler

    def link(self, tx_id, rx_id):
        return self.links[tx_id * len(self.rxs) + rx_id]

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def cpm_sps(order, h, base):
    """Smallest ``base * 2**k`` above the two-sided CPM spread
    ``(M - 1) h + 2.4`` symbol rates, so the main lobes fit inside fs."""
    need = (order - 1) * h + 2.4
    sps = base
    while sps < need:
        sps *= 2
    return sps


def snap_symbol_rate(rs, sps, master_clock, max_den, bounds=None):
    """Symbol rate near ``rs`` for which master_clock / (sps * rs) is a
    fraction with denominator <= ``max_den`` (cheap polyphase resampling).
    Rounds toward the interior of ``bounds`` when the nearest fraction
    would leave them."""
    r = master_clock / (sps * rs)
    cands = [Fraction(r).limit_denominator(max_den)]
    cands += [Fraction(math.floor(r * max_den), max_den), Fraction(math.ceil(r * max_den), max_den)]
    for f in cands:
        out = master_clock / (sps * float(f))
        if bounds is None or bounds[0] <= out <= bounds[1]:
            return out
    return rs


def _modulation_params(cfg, entry, rng):
    m = cfg.section("modulation")
    sps_cfg = m["sps"]
    p = {}
    if entry.family in LINEAR:
        p.update(sps=sps_cfg["linear"], rolloff=cfg.dist("rolloff").sample(rng), span=m["rrc_span"])
    elif entry.family in CPM:
        if entry.family == "CPFSK":
            h = cfg.dist("cpfsk_index").sample(rng)
        elif entry.family == "FSK":
            h = m["gfsk_index"] if entry.variant == "G" else m["fsk_index"]
        else:
            h = 0.5
        bt = m["gfsk_bt"] if entry.variant == "G" else m["gmsk_bt"]
        p.update(sps=cpm_sps(entry.order, h, sps_cfg["cpm"]), h=h, bt=bt)
    elif entry.family in MULTICARRIER:
        p.update(sps=sps_cfg["multicarrier"])
    else:
        p.update(sps=sps_cfg["analog"])
        if entry.family in ("AM-DSB", "AM-VSB"):
            p["am_index"] = cfg.dist("am_index").sample(rng)
        elif entry.family == "FM":
            p["fm_deviation_ratio"] = cfg.dist("fm_deviation_ratio").sample(rng)
        elif entry.family == "PM":
            p["pm_index"] = cfg.dist("pm_index").sample(rng)
    return p


def _quantize_symbols(n, q, dist):
    """Nearest multiple of ``q`` to ``n`` that stays inside the distribution's
    bounds where possible."""
    lo, hi = (dist.value, dist.value) if dist.kind == "fixed" else (dist.low, dist.high)
    k = max(1, int(round(n / q)))
    if k * q > hi and (k - 1) * q >= max(lo, q):
        k -= 1
    if k * q < lo and (k + 1) * q <= hi:
        k += 1
    return k * q


def sample_modulation(cfg, rng, n_antennas):
    """Draw a catalogue entry and its parameters; returns a ModulationSpec."""
    w = np.asarray(cfg.registry_weights)
    entry = cfg.registry[int(rng.choice(len(w), p=w / w.sum()))]
    params = _modulation_params(cfg, entry, rng)
    rs = cfg.dist("symbol_rate").sample(rng)
    d = cfg.dist("symbol_rate")
    bounds = (d.low, d.high) if d.kind == "uniform" else None
    rs = snap_symbol_rate(rs, params["sps"], cfg.master_clock_rate, cfg.section("modulation")["rate_denominator"], bounds)
    return build_spec(entry, rs, n_antennas=n_antennas, **params)


def _amplifier(cfg, rng, dist_name, rx=False):
    model = cfg.dist(dist_name).sample(rng)
    iip3 = cfg.dist("iip3").sample(rng)
    jit = cfg.dist("coefficient_jitter")
    if model == "cubic":
        return NonlinearitySpec("cubic", {"gain_db": 0.0, "iip3_dbm": iip3})
    scale = math.sqrt(dbm_to_watts(iip3)) if rx else 1.0
    if model == "saleh":
        params = {k: v * jit.sample(rng) for k, v in SALEH_DEFAULT.items()}
    elif model == "ghorbani":
        params = {k: tuple(c * jit.sample(rng) for c in v) for k, v in GHORBANI_DEFAULT.items()}
    elif model == "rapp":
        params = {"gain": 1.0, "saturation": 1.0, "smoothness": cfg.dist("rapp_smoothness").sample(rng)}
    else:
        params = {"gain": 1.0, "saturation": 1.0}
    params["iip3_dbm"] = iip3
    return NonlinearitySpec(model, params, scale)


def _iq(cfg, rng):
    return IqImbalanceSpec(cfg.dist("iq_amplitude").sample(rng), cfg.dist("iq_phase").sample(rng))


@lru_cache(maxsize=16)
def load_scene(name):
    from .channel.raytrace import load_osm

    p = Path(name)
    if not p.exists():
        p = Path(str(_data(f"scenes/{name}")))
    return load_osm(p)


def _place(scene, rng, height, n):
    x0, y0, x1, y1 = scene.bounds
    mx, my = 0.05 * (x1 - x0), 0.05 * (y1 - y0)
    pts = []
    while len(pts) < n:
        p = np.array([rng.uniform(x0 + mx, x1 - mx), rng.uniform(y0 + my, y1 - my), rng.uniform(*height)])
        if not scene.inside_building(p[None, :2])[0]:
            pts.append(tuple(float(v) for v in p))
    return pts


def sample_scenario(cfg, frame_index):
    """Draw a full ScenarioPlan (schedule left empty) for one frame."""
    if not 0 <= frame_index < cfg.num_frames:
        raise ConfigError(f"frame index {frame_index} outside [0, {cfg.num_frames})", "frame_index")
    seed = frame_seed(cfg.seed, frame_index)
    top = derive_stream(seed, "scenario")
    n_tx = cfg.dist("num_tx").sample(top)
    n_rx = cfg.dist("num_rx").sample(top)
    fams = sorted(cfg.channel_weights)
    cw = np.array([cfg.channel_weights[f] for f in fams])
    family = fams[int(top.choice(len(fams), p=cw / cw.sum()))]
    target = cfg.dist("target_snr").sample(top)
    tx_cfg = cfg.section("impairments")["tx"]
    rx_cfg = cfg.section("impairments")["rx"]

    scene_name, tx_pos, rx_pos = None, [(0.0, 0.0, 0.0)] * n_tx, [(0.0, 0.0, 0.0)] * n_rx
    if family == "raytrace":
        rt = cfg.section("channel")["raytrace"]
        if not rt["scenes"]:
            raise ConfigError("raytrace family selected but no scenes configured", "channel.raytrace.scenes")
        scene_name = rt["scenes"][int(top.integers(len(rt["scenes"])))]
        scene = load_scene(scene_name)
        geo = derive_stream(seed, "geometry")
        tx_pos = _place(scene, geo, rt["tx_height"], n_tx)
        rx_pos = _place(scene, geo, rt["rx_height"], n_rx)

    txs = []
    for i in range(n_tx):
        rng = derive_stream(seed, f"tx{i}.plan")
        n_ant = cfg.dist("tx_antennas").sample(rng)
        spec = sample_modulation(cfg, rng, n_ant)
        n_seg = cfg.dist("num_segments").sample(rng)
        q = time_quantum(spec)
        sd = cfg.dist("symbols_per_segment")
        segs = tuple(_quantize_symbols(sd.sample(rng), q, sd) for _ in range(n_seg))
        txs.append(TxPlan(
            tx_id=i,
            spec=spec,
            n_antennas=n_ant,
            segment_symbols=segs,
            power_dbm=cfg.dist("tx_power").sample(rng),
            iq_imbalance=_iq(cfg, rng) if tx_cfg["iq_imbalance"] else None,
            dc_offset_db=cfg.dist("dc_offset").sample(rng) if tx_cfg["dc_offset"] else None,
            phase_noise_dbc=cfg.dist("phase_noise").sample(rng) if tx_cfg["phase_noise"] else None,
            amplifier=_amplifier(cfg, rng, "pa_model") if tx_cfg["amplifier"] else None,
            backoff_db=cfg.dist("pa_backoff").sample(rng),
            position=tx_pos[i],
        ))

    rxs = []
    for j in range(n_rx):
        rng = derive_stream(seed, f"rx{j}.plan")
        nf = cfg.dist("noise_figure").sample(rng)
        rxs.append(RxPlan(
            rx_id=j,
            n_antennas=cfg.dist("rx_antennas").sample(rng),
            noise_figure_db=nf,
            noise_temperature=noise_figure_to_temperature(nf) if rx_cfg["thermal_noise"] else 0.0,
            iq_imbalance=_iq(cfg, rng) if rx_cfg["iq_imbalance"] else None,
            dc_offset_db=cfg.dist("dc_offset").sample(rng) if rx_cfg["dc_offset"] else None,
            amplifier=_amplifier(cfg, rng, "lna_model", rx=True) if rx_cfg["amplifier"] else None,
            position=rx_pos[j],
        ))

    links = []
    for i in range(n_tx):
        for j in range(n_rx):
            rng = derive_stream(seed, f"link{i}.{j}.plan")
            env = cfg.dist("environment").sample(rng)
            dist = cfg.dist(f"distance_{env}").sample(rng)
            ple = cfg.dist(f"path_loss_exponent_{env}").sample(rng)
            if family == "raytrace":
                dist = float(np.linalg.norm(np.subtract(tx_pos[i], rx_pos[j])))
                env = "outdoor"
            fading = cfg.dist("fading").sample(rng)
            k = cfg.dist("k_factor").sample(rng)
            speed = cfg.dist("speed").sample(rng)
            n_extra = cfg.dist("num_extra_paths").sample(rng)
            if family == "awgn":
                fading, speed = "static", 0.0
            links.append(LinkPlan(
                tx_id=i, rx_id=j, family=family, environment=env, distance=dist, path_loss_exponent=ple,
                fading=fading, k_factor=k if fading == "rician" else 0.0, speed=speed,
                doppler=doppler_from_speed(speed, cfg.carrier_frequency), n_extra_paths=n_extra,
            ))

    return ScenarioPlan(frame_index, seed, family, scene_name, tuple(txs), tuple(rxs), tuple(links),
                        None if target is None else float(target))


def redraw_modulations(cfg, plan, attempt):
    """Same plan with fresh modulations (and segment lengths) for every
    transmitter; counts, hardware and links are kept."""
    txs = []
    for tx in plan.txs:
        rng = derive_stream(plan.seed, f"tx{tx.tx_id}.retry{attempt}")
        spec = sample_modulation(cfg, rng, tx.n_antennas)
        q = time_quantum(spec)
        sd = cfg.dist("symbols_per_segment")
        segs = tuple(_quantize_symbols(sd.sample(rng), q, sd) for _ in range(tx.n_segments))
        txs.append(replace(tx, spec=spec, segment_symbols=segs))
    return replace(plan, txs=tuple(txs))
