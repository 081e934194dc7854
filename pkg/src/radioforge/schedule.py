"""Time and frequency placement of every transmitted segment.

Each transmitter keeps one carrier for all its segments. Transmitters are
packed side by side across the observable band in random order, with the
spare bandwidth split at random (Dirichlet) between the gaps. Overlap is
decided per frame: if the frame has at least one pair of transmitters that
are on air at the same time, then one such pair may be packed with its
bands overlapping by ``extent * narrower bandwidth``; every other neighbour
pair keeps a guard band. The configured overlap probability is the
fraction of all frames that contain an overlap, so the per-eligible-frame
draw is conditioned on the chance of having two or more transmitters
(see :func:`conditional_overlap_probability`).
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .config import derive_stream, redraw_modulations
from .errors import InfeasiblePackingError, ScheduleError

MAX_INSTANCES = 12
_TOL = 1e-9


@dataclass(frozen=True)
class EmissionEvent:
    tx_id: int
    segment: int
    start: float
    duration: float
    carrier: float
    bandwidth: float

    @property
    def end(self):
        return self.start + self.duration

    @property
    def f_lo(self):
        return self.carrier - self.bandwidth / 2

    @property
    def f_hi(self):
        return self.carrier + self.bandwidth / 2


@dataclass(frozen=True)
class FramePlan:
    duration: float
    sample_rate: float
    n_samples: int
    events: tuple
    overlaps: tuple = ()  # ((tx_a, tx_b, fraction of narrower bandwidth), ...)
    overlap_eligible: bool = False
    overlap_forced: bool = False
    attempts: int = 1
    extra: dict = field(default_factory=dict)

    def events_of(self, tx_id):
        return [e for e in self.events if e.tx_id == tx_id]


def allocate_time(segment_symbols, symbol_rates, stream, idle_fraction=(0.1, 1.0), fs=None,
                  margin_fraction=0.05, sample_limits=None):
    """Start/duration per segment plus the frame duration.

    ``segment_symbols[i]`` lists transmitter i's segment lengths in symbols.
    Durations are ``symbols / rate``. Within a transmitter, segments follow
    one another with idle gaps of ``U(idle_fraction) * mean duration``; the
    first segment is preceded by a random fraction of one such gap. With
    ``fs``, starts are rounded up to whole samples and the frame length is
    a whole number of samples clamped to ``sample_limits``.
    """
    lo, hi = idle_fraction
    starts, durations = [], []
    latest = 0.0
    for syms, rs in zip(segment_symbols, symbol_rates):
        if not 1 <= len(syms) <= 3:
            raise ScheduleError(f"{len(syms)} segments per transmitter, expected 1..3")
        d = [n / rs for n in syms]
        mean = float(np.mean(d))
        t = stream.uniform(0, 1) * stream.uniform(lo, hi) * mean
        st = []
        for k, dk in enumerate(d):
            if k:
                t += stream.uniform(lo, hi) * mean
            if fs:
                t = math.ceil(t * fs - 1e-6) / fs
            st.append(t)
            t += dk
        latest = max(latest, t)
        starts.append(st)
        durations.append(d)
    frame = latest * (1 + margin_fraction)
    n = None
    if fs:
        n = int(math.ceil(frame * fs))
        if sample_limits:
            if latest * fs > sample_limits[1]:
                raise ScheduleError(f"segments need {latest * fs:.0f} samples, limit is {sample_limits[1]}")
            n = int(min(max(n, sample_limits[0]), sample_limits[1]))
        frame = n / fs
    return starts, durations, frame, n


def _intervals_intersect(a, b):
    return any(s1 < e2 and s2 < e1 for s1, e1 in a for s2, e2 in b)


def concurrent_pairs(intervals):
    """Index pairs of transmitters whose on-air intervals intersect."""
    n = len(intervals)
    return [(i, j) for i in range(n) for j in range(i + 1, n) if _intervals_intersect(intervals[i], intervals[j])]


def allocate_frequency(bandwidths, intervals, band, guard_fraction, overlap_probability, extent_dist, stream):
    """Carrier per transmitter. Returns ``(carriers, overlaps, eligible, forced)``."""
    n = len(bandwidths)
    B = np.asarray(bandwidths, dtype=float)
    width = band[1] - band[0]
    pairs = concurrent_pairs(intervals)
    eligible = bool(pairs)
    forced = eligible and stream.uniform() < overlap_probability
    pair, extent = None, 0.0
    if forced:
        pair = pairs[int(stream.integers(len(pairs)))]
        if stream.uniform() < 0.5:
            pair = pair[::-1]
        extent = float(extent_dist.sample(stream))

    # order: random permutation with the overlap pair kept adjacent
    order = [int(i) for i in stream.permutation(n)]
    if pair is not None:
        order.remove(pair[1])
        order.insert(order.index(pair[0]) + 1, pair[1])

    # required width, walking left to right
    offsets = [0.0]  # left edge of each placed signal relative to the first
    for a, b in zip(order, order[1:]):
        narrower = min(B[a], B[b])
        if pair is not None and (a, b) == tuple(pair):
            sep = -extent * narrower
        else:
            sep = guard_fraction * narrower
        offsets.append(offsets[-1] + B[a] + sep)
    used = offsets[-1] + B[order[-1]]
    slack = width - used
    if slack < 0:
        raise InfeasiblePackingError(f"signals need {used:.0f} Hz, band is {width:.0f} Hz")

    # spare bandwidth split across the n + 1 gaps; the forced pair's gap
    # gets none so its overlap is exact
    gaps = stream.dirichlet(np.ones(n + 1)) * slack
    if pair is not None:
        k = order.index(pair[1])
        gaps[0] += gaps[k]
        gaps[k] = 0.0
    carriers = np.empty(n)
    shift = band[0]
    for k, i in enumerate(order):
        shift += gaps[k]
        carriers[i] = shift + offsets[k] + B[i] / 2
    overlaps = ((int(pair[0]), int(pair[1]), extent),) if pair is not None else ()
    return carriers, overlaps, eligible, forced


def measured_overlaps(events):
    """(tx_a, tx_b, overlap / narrower bandwidth) for every pair of
    transmitters that share both time and band (direct interval test)."""
    by_tx = {}
    for e in events:
        by_tx.setdefault(e.tx_id, []).append(e)
    ids = sorted(by_tx)
    out = []
    for x in range(len(ids)):
        for y in range(x + 1, len(ids)):
            ea, eb = by_tx[ids[x]], by_tx[ids[y]]
            if not _intervals_intersect([(e.start, e.end) for e in ea], [(e.start, e.end) for e in eb]):
                continue
            a, b = ea[0], eb[0]
            ov = min(a.f_hi, b.f_hi) - max(a.f_lo, b.f_lo)
            if ov > _TOL:
                out.append((ids[x], ids[y], ov / min(a.bandwidth, b.bandwidth)))
    return out


def validate_plan(plan, band=None, max_overlap=None):
    """List of violations (empty when valid). Each is a dict with ``code``,
    ``tx_id``, ``segment`` and ``detail``."""
    v = []

    def bad(code, e, detail):
        v.append({"code": code, "tx_id": None if e is None else e.tx_id,
                  "segment": None if e is None else e.segment, "detail": detail})

    if len(plan.events) > MAX_INSTANCES:
        bad("too-many-instances", None, f"{len(plan.events)} > {MAX_INSTANCES}")
    for e in plan.events:
        if e.duration <= 0:
            bad("non-positive-duration", e, f"duration {e.duration}")
        if e.start < -_TOL:
            bad("negative-start", e, f"start {e.start}")
        if e.end > plan.duration + _TOL:
            bad("past-frame-end", e, f"end {e.end} > frame {plan.duration}")
        if band is not None and (e.f_lo < band[0] - _TOL or e.f_hi > band[1] + _TOL):
            bad("band-spill", e, f"[{e.f_lo:.1f}, {e.f_hi:.1f}] Hz outside [{band[0]:.1f}, {band[1]:.1f}]")
    by_tx = {}
    for e in plan.events:
        by_tx.setdefault(e.tx_id, []).append(e)
    for tx, evs in by_tx.items():
        evs = sorted(evs, key=lambda e: e.start)
        for a, b in zip(evs, evs[1:]):
            if b.start <= a.end + _TOL:
                bad("same-tx-overlap", b, f"segment starts {b.start} before previous ends {a.end}")
        if len({(e.carrier, e.bandwidth) for e in evs}) > 1:
            bad("carrier-changed", evs[0], "segments of one transmitter use different carriers")
    if max_overlap is not None:
        for a, b, f in measured_overlaps(plan.events):
            if f > max_overlap + 1e-9:
                bad("overlap-too-large", None, f"tx {a} and {b} overlap {f:.4f} > {max_overlap}")
    return v


def _extent_bound(dist):
    if dist.kind == "fixed":
        return float(dist.value)
    if dist.kind == "categorical":
        return float(max(dist.choices))
    return float(dist.high)


def conditional_overlap_probability(p_frame, num_tx_dist):
    """Per-eligible-frame overlap probability giving ``p_frame`` over all
    frames; single-transmitter frames can never overlap. Capped at 1."""
    p_multi = num_tx_dist.prob_at_least(2)
    if p_multi <= 0:
        return 0.0
    return min(1.0, p_frame / p_multi)


def schedule_scenario(cfg, plan):
    """Fill ``plan.schedule``; on infeasible packing redraw modulations
    (counts fixed) up to ``schedule.max_retries`` times."""
    sch = cfg.section("schedule")
    fs = cfg.master_clock_rate
    p_ov = float(cfg.dist("overlap_probability").sample(derive_stream(plan.seed, "schedule.overlap")))
    p_ov = conditional_overlap_probability(p_ov, cfg.dist("num_tx"))
    extent = cfg.dist("overlap_extent")
    last = None
    for attempt in range(sch["max_retries"] + 1):
        if attempt:
            plan = redraw_modulations(cfg, plan, attempt)
        rng_t = derive_stream(plan.seed, f"schedule.time.{attempt}")
        rng_f = derive_stream(plan.seed, f"schedule.freq.{attempt}")
        try:
            starts, durs, frame, n = allocate_time(
                [t.segment_symbols for t in plan.txs], [t.spec.symbol_rate for t in plan.txs], rng_t,
                tuple(sch["idle_fraction"]), fs, sch["margin_fraction"], (sch["min_samples"], sch["max_samples"]))
            intervals = [[(s, s + d) for s, d in zip(st, du)] for st, du in zip(starts, durs)]
            bws = [t.spec.occupied_bandwidth for t in plan.txs]
            carriers, overlaps, eligible, forced = allocate_frequency(
                bws, intervals, cfg.band, sch["guard_fraction"], p_ov, extent, rng_f)
        except (InfeasiblePackingError, ScheduleError) as exc:
            last = exc
            continue
        events = tuple(
            EmissionEvent(i, k, float(s), float(d), float(carriers[i]), float(bws[i]))
            for i in range(len(plan.txs)) for k, (s, d) in enumerate(zip(starts[i], durs[i]))
        )
        fp = FramePlan(frame, fs, n, events, overlaps, eligible, forced, attempt + 1)
        violations = validate_plan(fp, cfg.band, _extent_bound(extent))
        if violations:
            raise ScheduleError(f"frame {plan.frame_index}: invalid schedule {violations[0]}")
        return replace(plan, schedule=fp)
    raise InfeasiblePackingError(f"frame {plan.frame_index}: no feasible schedule after "
                                 f"{sch['max_retries'] + 1} attempts ({last})")
