"""Gray-labelled constellations for ASK, OOK, PSK and QAM families."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import ModulationError


def gray(n):
    n = np.asarray(n)
    return n ^ (n >> 1)


@dataclass(frozen=True)
class ConstellationMap:
    """``points[label]`` is the symbol transmitted for bit label ``label``.

    Labels are read MSB first from groups of ``bits_per_symbol`` bits.
    """

    family: str
    order: int
    points: np.ndarray
    gray_coded: bool = True

    @property
    def bits_per_symbol(self):
        return int(np.log2(self.order))

    def map_bits(self, bits):
        k = self.bits_per_symbol
        bits = np.asarray(bits, dtype=np.int64)
        if bits.size % k:
            raise ModulationError(f"{bits.size} bits is not a multiple of {k} bits/symbol")
        labels = bits.reshape(-1, k) @ (1 << np.arange(k - 1, -1, -1))
        return self.points[labels]

    def demap(self, symbols):
        """Nearest-point decision; returns the bit array."""
        symbols = np.asarray(symbols).ravel()
        labels = np.empty(symbols.size, dtype=np.int64)
        for s in range(0, symbols.size, 2048):
            d = np.abs(symbols[s:s + 2048, None] - self.points[None, :])
            labels[s:s + 2048] = d.argmin(axis=1)
        k = self.bits_per_symbol
        return ((labels[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.uint8).ravel()


def _normalize(points):
    return points / np.sqrt(np.mean(np.abs(points) ** 2))


def _pam_levels(m):
    """Gray-labelled bipolar levels: returns levels indexed by label."""
    k = np.arange(m)
    levels = np.empty(m)
    levels[gray(k)] = 2 * k - m + 1
    return levels


def _psk(m):
    k = np.arange(m)
    pts = np.empty(m, dtype=complex)
    pts[gray(k)] = np.exp(2j * np.pi * k / m)
    if m == 2:
        pts = pts.real.round() + 0j
    return pts


def _ask(m):
    # unipolar amplitude levels 1..M, Gray along amplitude
    k = np.arange(m)
    pts = np.empty(m, dtype=complex)
    pts[gray(k)] = k + 1.0
    return pts


def _ook(m):
    return np.array([0.0, 1.0], dtype=complex)


def _rect_qam(mi, mq):
    bq = int(np.log2(mq))
    li, lq = _pam_levels(mi), _pam_levels(mq)
    labels = np.arange(mi * mq)
    return li[labels >> bq] + 1j * lq[labels & ((1 << bq) - 1)]


def _cross_qam(m):
    # odd-integer square grid with the four corner blocks removed
    side = int(round(np.sqrt(m * 36 / 32)))
    side += side % 2
    cut = (side * side - m) // 4
    corner = int(round(np.sqrt(cut)))
    axis = np.arange(-side + 1, side, 2)
    I, Q = np.meshgrid(axis, axis[::-1])
    edge = axis[-corner] if corner else np.inf
    keep = ~((np.abs(I) >= edge) & (np.abs(Q) >= edge))
    pts = (I[keep] + 1j * Q[keep]).ravel()
    if pts.size != m:
        raise ModulationError(f"cannot build a {m}-point cross constellation")
    # row-major enumeration; not Gray
    order = np.lexsort((pts.real, -pts.imag))
    return pts[order]


_MIL_RINGS = {16: (4, 12), 32: (4, 12, 16), 64: (4, 12, 20, 28)}


def _mil_qam(m):
    # Ring-structured placeholder; not the exact MIL-STD-188-110 point sets.
    if m not in _MIL_RINGS:
        raise ModulationError(f"MIL-QAM order {m} unsupported")
    pts = []
    for r, n in enumerate(_MIL_RINGS[m]):
        ph = np.pi / n * (r % 2)
        pts.append((1.0 + 1.6 * r) * np.exp(1j * (2 * np.pi * np.arange(n) / n + ph)))
    return np.concatenate(pts)


_VALID = {
    "OOK": {2},
    "ASK": {2, 4, 8, 16},
    "PSK": {2, 4, 8, 16, 32, 64},
    "QAM": {4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096},
    "MILQAM": set(_MIL_RINGS),
}


@lru_cache(maxsize=None)
def build_constellation(family, order):
    """Unit-average-power constellation for ``(family, order)``.

    QAM is rectangular for even powers of two, 4x2 rectangular at 8 and a
    cross layout at the remaining odd powers of two.
    """
    family = family.upper()
    order = int(order)
    if family not in _VALID or order not in _VALID[family]:
        raise ModulationError(f"unsupported constellation ({family}, {order})")
    gray_coded = True
    if family == "PSK":
        pts = _psk(order)
    elif family == "ASK":
        pts = _ask(order)
    elif family == "OOK":
        pts = _ook(order)
    elif family == "MILQAM":
        pts, gray_coded = _mil_qam(order), False
    else:
        b = int(np.log2(order))
        if b % 2 == 0:
            side = 1 << (b // 2)
            pts = _rect_qam(side, side)
        elif order == 8:
            pts = _rect_qam(4, 2)
        else:
            pts, gray_coded = _cross_qam(order), False
    pts = _normalize(np.asarray(pts, dtype=complex))
    pts.setflags(write=False)
    return ConstellationMap(family, order, pts, gray_coded)
