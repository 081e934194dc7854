"""OpenStreetMap buildings and image-method ray tracing (LOS plus up to two
specular facade reflections), channel conversion and coverage maps.

Buildings are extruded 2.5D prisms; only their vertical facades reflect or
block. Coordinates are local east/north metres about the scene centroid.
"""

import csv
import logging
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..constants import SPEED_OF_LIGHT
from ..errors import ChannelError
from ..kernels import segments_blocked
from .statistical import COARSE_OVERSAMPLE, ChannelRealization

log = logging.getLogger(__name__)

EARTH_RADIUS = 6371008.8
DEFAULT_HEIGHT = 10.0
LEVEL_HEIGHT = 3.0
REFLECTION_COEFFICIENT = -0.7
_EPS = 1e-9


@dataclass(frozen=True)
class Building:
    footprint: np.ndarray  # (V, 2), counter-clockwise, not closed
    height: float


@dataclass
class OsmScene:
    buildings: list = field(default_factory=list)
    bounds: tuple = (-1000.0, -1000.0, 1000.0, 1000.0)
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        walls, normals = [], []
        for b in self.buildings:
            fp = b.footprint
            for i in range(len(fp)):
                p, q = fp[i], fp[(i + 1) % len(fp)]
                e = q - p
                ln = math.hypot(*e)
                if ln < 1e-9:
                    continue
                walls.append((p[0], p[1], q[0], q[1], b.height))
                normals.append((e[1] / ln, -e[0] / ln))  # outward for CCW
        self.walls = np.array(walls, dtype=float).reshape(-1, 5)
        self.normals = np.array(normals, dtype=float).reshape(-1, 2)

    def inside_building(self, pts):
        """Boolean per 2D point: strictly inside some footprint."""
        pts = np.atleast_2d(pts)[:, :2]
        inside = np.zeros(len(pts), dtype=bool)
        for b in self.buildings:
            fp = b.footprint
            x0, y0 = fp[:, 0], fp[:, 1]
            x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
            px, py = pts[:, 0:1], pts[:, 1:2]
            cross = ((y0 > py) != (y1 > py)) & (px < (x1 - x0) * (py - y0) / np.where(y1 == y0, 1, y1 - y0) + x0)
            inside |= (cross.sum(axis=1) % 2).astype(bool)
        return inside


def _signed_area(p):
    x, y = p[:, 0], p[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def _parse_height(tags):
    h = tags.get("height")
    if h is not None:
        try:
            v = float(h.split()[0].rstrip("m"))
            if v > 0:
                return v
        except ValueError:
            pass
    lv = tags.get("building:levels")
    if lv is not None:
        try:
            v = float(lv) * LEVEL_HEIGHT
            if v > 0:
                return v
        except ValueError:
            pass
    return DEFAULT_HEIGHT


def parse_osm(data):
    """OSM XML (bytes or str) -> OsmScene of building footprints."""
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise ChannelError(f"malformed OSM XML: {exc}") from exc
    nodes = {}
    for n in root.iter("node"):
        nodes[n.get("id")] = (float(n.get("lat")), float(n.get("lon")))
    ways = []
    for w in root.iter("way"):
        tags = {t.get("k"): t.get("v") for t in w.iter("tag")}
        if "building" not in tags:
            continue
        refs = [nd.get("ref") for nd in w.iter("nd")]
        if len(refs) < 4 or refs[0] != refs[-1]:
            log.warning("skipping unclosed building way %s", w.get("id"))
            continue
        if any(r not in nodes for r in refs):
            log.warning("skipping building way %s with missing nodes", w.get("id"))
            continue
        ways.append(([nodes[r] for r in refs[:-1]], _parse_height(tags)))

    b = root.find("bounds")
    if b is not None:
        lat_lo, lat_hi = float(b.get("minlat")), float(b.get("maxlat"))
        lon_lo, lon_hi = float(b.get("minlon")), float(b.get("maxlon"))
        lat0, lon0 = (lat_lo + lat_hi) / 2, (lon_lo + lon_hi) / 2
    elif ways:
        allpts = np.array([p for fp, _ in ways for p in fp])
        lat0, lon0 = allpts.mean(axis=0)
    else:
        return OsmScene()

    k = math.pi / 180 * EARTH_RADIUS
    c = math.cos(math.radians(lat0))

    def project(lat, lon):
        return np.column_stack([(np.asarray(lon) - lon0) * k * c, (np.asarray(lat) - lat0) * k])

    buildings = []
    for fp, h in ways:
        ll = np.array(fp)
        xy = project(ll[:, 0], ll[:, 1])
        if abs(_signed_area(xy)) < 1e-6:
            continue
        if _signed_area(xy) < 0:
            xy = xy[::-1]
        buildings.append(Building(xy, h))

    if b is not None:
        lo, hi = project([lat_lo, lat_hi], [lon_lo, lon_hi])
        bounds = (lo[0], lo[1], hi[0], hi[1])
    else:
        allxy = np.vstack([bd.footprint for bd in buildings])
        pad = 50.0
        bounds = (allxy[:, 0].min() - pad, allxy[:, 1].min() - pad, allxy[:, 0].max() + pad, allxy[:, 1].max() + pad)
    return OsmScene(buildings, tuple(float(v) for v in bounds), (lat0, lon0))


def load_osm(path):
    return parse_osm(Path(path).read_bytes())


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Ray:
    vertices: np.ndarray  # (k + 2, 3): tx, reflection points, rx
    walls: tuple
    length: float
    gain: complex
    delay: float
    aod: tuple  # (azimuth, elevation) rad at tx
    aoa: tuple  # (azimuth, elevation) rad at rx, pointing back along the ray

    @property
    def interactions(self):
        return len(self.walls)


def _angles(a, b):
    d = b - a
    return float(math.atan2(d[1], d[0])), float(math.atan2(d[2], math.hypot(d[0], d[1])))


def _make_ray(pts, walls, wavelength, gamma):
    pts = np.asarray(pts, dtype=float)
    length = float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
    g = wavelength / (4 * math.pi * length) * gamma ** len(walls) * np.exp(-2j * math.pi * length / wavelength)
    return Ray(pts, tuple(int(w) for w in walls), length, complex(g), length / SPEED_OF_LIGHT,
               _angles(pts[0], pts[1]), _angles(pts[-1], pts[-2]))


def _mirror(p, p0, n):
    """Reflect 2D points ``p`` across the lines through ``p0`` with normals ``n``."""
    s = np.sum((p - p0) * n, axis=-1, keepdims=True)
    return p - 2 * s * n


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _hit(a, b, p0, e):
    """Segment a->b against wall lines p0 + u e: returns (t, u)."""
    d = b - a
    den = _cross(d, e)
    q = p0 - a
    with np.errstate(divide="ignore", invalid="ignore"):
        t = _cross(q, e) / den
        u = _cross(q, d) / den
    bad = np.abs(den) < 1e-12
    return np.where(bad, np.nan, t), np.where(bad, np.nan, u)


def trace_paths(scene, tx, rx, max_reflections=2, fc=2.4e9, gamma=REFLECTION_COEFFICIENT):
    """Image-method rays between two 3D points, LOS first then by order."""
    if not 0 <= max_reflections <= 2:
        raise ChannelError("max_reflections must be 0, 1 or 2")
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    lam = SPEED_OF_LIGHT / fc
    W = scene.walls
    rays = []
    if not segments_blocked(tx, rx, W)[0] and np.linalg.norm(tx - rx) > 0:
        rays.append(_make_ray([tx, rx], (), lam, gamma))
    if max_reflections == 0 or len(W) == 0:
        return rays

    P0, E, N, H = W[:, :2], W[:, 2:4] - W[:, :2], scene.normals, W[:, 4]
    sT = np.sum((tx[:2] - P0) * N, axis=1)
    sR = np.sum((rx[:2] - P0) * N, axis=1)
    dz = rx[2] - tx[2]

    # order 1
    c = np.flatnonzero((sT > _EPS) & (sR > _EPS))
    if c.size:
        img = _mirror(tx[:2], P0[c], N[c])
        t, u = _hit(img, np.broadcast_to(rx[:2], img.shape), P0[c], E[c])
        z = tx[2] + t * dz
        ok = (t > _EPS) & (t < 1 - _EPS) & (u >= 0) & (u <= 1) & (z >= 0) & (z <= H[c])
        c, t = c[ok], t[ok]
        q = np.column_stack([img[ok] + t[:, None] * (rx[:2] - img[ok]), z[ok]])
        if c.size:
            sk = np.column_stack([c, np.full(c.size, -1)])
            blk = segments_blocked(np.broadcast_to(tx, q.shape), q, W, sk) | segments_blocked(q, np.broadcast_to(rx, q.shape), W, sk)
            for w, qq in zip(c[~blk], q[~blk]):
                rays.append(_make_ray([tx, qq, rx], (w,), lam, gamma))
    if max_reflections == 1:
        return rays

    # order 2: tx -> w1 -> w2 -> rx
    i1 = np.flatnonzero(sT > _EPS)
    i2 = np.flatnonzero(sR > _EPS)
    if not (i1.size and i2.size):
        return rays
    w1, w2 = np.meshgrid(i1, i2, indexing="ij")
    w1, w2 = w1.ravel(), w2.ravel()
    keep = w1 != w2
    w1, w2 = w1[keep], w2[keep]
    t1img = _mirror(tx[:2], P0[w1], N[w1])
    t2img = _mirror(t1img, P0[w2], N[w2])
    tb, ub = _hit(t2img, np.broadcast_to(rx[:2], t2img.shape), P0[w2], E[w2])
    ok = (tb > _EPS) & (tb < 1 - _EPS) & (ub >= 0) & (ub <= 1)
    w1, w2, t1img, t2img, tb = w1[ok], w2[ok], t1img[ok], t2img[ok], tb[ok]
    q2 = t2img + tb[:, None] * (rx[:2] - t2img)
    z2 = tx[2] + tb * dz
    ta, ua = _hit(t1img, q2, P0[w1], E[w1])
    ok = (ta > _EPS) & (ta < 1 - _EPS) & (ua >= 0) & (ua <= 1)
    q1 = t1img + ta[:, None] * (q2 - t1img)
    z1 = tx[2] + ta * (z2 - tx[2])
    ok &= (z1 >= 0) & (z1 <= H[w1]) & (z2 >= 0) & (z2 <= H[w2])
    ok &= np.sum((q1 - P0[w2]) * N[w2], axis=1) > _EPS
    ok &= np.sum((q2 - P0[w1]) * N[w1], axis=1) > _EPS
    if not ok.any():
        return rays
    w1, w2 = w1[ok], w2[ok]
    Q1 = np.column_stack([q1[ok], z1[ok]])
    Q2 = np.column_stack([q2[ok], z2[ok]])
    k = w1.size
    blk = segments_blocked(np.broadcast_to(tx, Q1.shape), Q1, W, np.column_stack([w1, np.full(k, -1)]))
    blk |= segments_blocked(Q1, Q2, W, np.column_stack([w1, w2]))
    blk |= segments_blocked(Q2, np.broadcast_to(rx, Q2.shape), W, np.column_stack([w2, np.full(k, -1)]))
    for a, b, p1, p2 in zip(w1[~blk], w2[~blk], Q1[~blk], Q2[~blk]):
        rays.append(_make_ray([tx, p1, p2, rx], (a, b), lam, gamma))
    return rays


def _ula_phase(n, az, el, spacing_wl=0.5):
    """Half-wavelength uniform linear array along x: per-element phasors."""
    return np.exp(2j * np.pi * spacing_wl * np.arange(n) * math.cos(az) * math.cos(el))


def rays_to_channel(rays, fc, fs, n_samples, n_tx=1, n_rx=1, doppler=0.0):
    """Static taps at each ray's excess delay (relative to the first
    arrival); optional common Doppler rotation; empty list -> outage."""
    n_samples = int(n_samples)
    if doppler > 0:
        step = max(1, int(fs / (COARSE_OVERSAMPLE * doppler)))
    else:
        step = max(1, n_samples)
    n_coarse = max(2, -(-(n_samples - 1) // step) + 1)
    if not rays:
        return ChannelRealization(np.zeros(1), np.zeros((n_rx, n_tx, 1, n_coarse), dtype=complex), step, fs,
                                  math.inf, doppler, "raytrace", True, {"Outage": True, "NumRays": 0})
    rays = sorted(rays, key=lambda r: r.delay)
    d0 = rays[0].delay
    delays = np.array([r.delay - d0 for r in rays])
    rot = np.exp(2j * np.pi * doppler * np.arange(n_coarse) * step / fs)
    gains = np.empty((n_rx, n_tx, len(rays), n_coarse), dtype=complex)
    for p, r in enumerate(rays):
        at = _ula_phase(n_tx, *r.aod)
        ar = _ula_phase(n_rx, *r.aoa)
        gains[:, :, p, :] = (r.gain * ar[:, None] * at[None, :])[..., None] * rot
    power = sum(abs(r.gain) ** 2 for r in rays)
    meta = {
        "Outage": False,
        "NumRays": len(rays),
        "PathDelays": delays.tolist(),
        "AveragePathGains": [20 * math.log10(abs(r.gain)) for r in rays],
        "FirstArrival": d0,
        "Interactions": [r.interactions for r in rays],
        "MaximumDopplerShift": doppler,
    }
    return ChannelRealization(delays, gains, step, fs, -10 * math.log10(power), doppler, "raytrace", False, meta)


# --------------------------------------------------------------------------


@dataclass
class CoverageGrid:
    x: np.ndarray
    y: np.ndarray
    power_dbm: np.ndarray  # (ny, nx); nan where not computed
    outage: np.ndarray
    tx_cell: np.ndarray
    indoor: np.ndarray

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["x", "y", "dbm", "flag"])
            for j, yy in enumerate(self.y):
                for i, xx in enumerate(self.x):
                    flag = "tx" if self.tx_cell[j, i] else "indoor" if self.indoor[j, i] else "outage" if self.outage[j, i] else ""
                    v = self.power_dbm[j, i]
                    w.writerow([f"{xx:.3f}", f"{yy:.3f}", "" if not np.isfinite(v) else f"{v:.3f}", flag])

    def to_png(self, path, floor_dbm=None):
        from matplotlib import colormaps
        from PIL import Image

        p = self.power_dbm
        fin = np.isfinite(p)
        if not fin.any():
            rgb = np.zeros(p.shape + (3,), dtype=np.uint8)
        else:
            hi = p[fin].max()
            lo = p[fin].min() if floor_dbm is None else floor_dbm
            v = np.clip((np.where(fin, p, lo) - lo) / max(hi - lo, 1e-9), 0, 1)
            rgb = (colormaps["viridis"](v)[..., :3] * 255).astype(np.uint8)
            rgb[~fin] = 0
            rgb[self.indoor] = 128
        Image.fromarray(rgb[::-1]).save(path)


def compute_coverage(scene, tx, spacing, fc=2.4e9, tx_power_dbm=0.0, rx_height=1.5, max_reflections=2,
                     bounds=None, gamma=REFLECTION_COEFFICIENT):
    """Received power (dBm, incoherent sum over rays) at every grid cell centre."""
    if spacing <= 0:
        raise ChannelError("grid spacing must be positive")
    x0, y0, x1, y1 = bounds or scene.bounds
    xs = np.arange(x0 + spacing / 2, x1, spacing)
    ys = np.arange(y0 + spacing / 2, y1, spacing)
    tx = np.asarray(tx, dtype=float)
    P = np.full((ys.size, xs.size), np.nan)
    outage = np.zeros(P.shape, dtype=bool)
    txc = np.zeros(P.shape, dtype=bool)
    gx, gy = np.meshgrid(xs, ys)
    indoor = scene.inside_building(np.column_stack([gx.ravel(), gy.ravel()])).reshape(P.shape)
    for j, yy in enumerate(ys):
        for i, xx in enumerate(xs):
            if indoor[j, i]:
                continue
            if math.hypot(xx - tx[0], yy - tx[1]) < spacing / 2:
                txc[j, i] = True
                continue
            rays = trace_paths(scene, tx, (xx, yy, rx_height), max_reflections, fc, gamma)
            if not rays:
                outage[j, i] = True
                continue
            P[j, i] = tx_power_dbm + 10 * math.log10(sum(abs(r.gain) ** 2 for r in rays))
    return CoverageGrid(xs, ys, P, outage, txc, indoor)
