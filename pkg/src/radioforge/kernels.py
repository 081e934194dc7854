"""Hot inner loops, each with a numba kernel and a numpy fallback.

The public functions dispatch on :data:`radioforge._accel.USE_NUMBA`. Both
paths take and return plain arrays so they can be compared directly (see
``tests/test_kernels.py`` and ``benchmarks/bench_kernels.py``). Integer
kernels agree bit for bit; float kernels agree to rounding.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

_CHUNK = 8192


# --------------------------------------------------------------------------
# Fibonacci LFSR: a[n + L] = XOR over taps t of a[n + L - t]
# --------------------------------------------------------------------------


@njit
def _lfsr_numba(tap_offsets, length, state, n):
    reg = np.empty(length, dtype=np.uint8)
    for i in range(length):
        reg[i] = (state >> i) & 1
    out = np.empty(n, dtype=np.uint8)
    head = 0
    for k in range(n):
        out[k] = reg[head]
        fb = 0
        for t in tap_offsets:
            fb ^= reg[(head + length - t) % length]
        reg[head] = fb
        head += 1
        if head == length:
            head = 0
    return out


def _lfsr_numpy(tap_offsets, length, state, n):
    # State jump: s_{n+1} = A s_n over GF(2); outputs are row 0 of A^j s_n.
    A = np.zeros((length, length), dtype=np.int64)
    A[np.arange(length - 1), np.arange(1, length)] = 1
    for t in tap_offsets:
        A[length - 1, length - t] ^= 1
    block = max(length, 1024)
    M = np.empty((block, length), dtype=np.int64)
    row = np.zeros(length, dtype=np.int64)
    row[0] = 1
    for j in range(block):
        M[j] = row
        row = (row @ A) % 2
    jump = np.eye(length, dtype=np.int64)
    for _ in range(block):
        jump = (A @ jump) % 2
    s = np.array([(state >> i) & 1 for i in range(length)], dtype=np.int64)
    n_blocks = -(-n // block)
    out = np.empty(n_blocks * block, dtype=np.uint8)
    for b in range(n_blocks):
        out[b * block:(b + 1) * block] = (M @ s) % 2
        s = (jump @ s) % 2
    return out[:n]


def lfsr_bits(tap_offsets, length, state, n):
    """``n`` output bits of the LFSR with the given taps and initial state."""
    taps = np.asarray(tap_offsets, dtype=np.int64)
    if USE_NUMBA:
        return _lfsr_numba(taps, int(length), int(state), int(n))
    return _lfsr_numpy(taps, int(length), int(state), int(n))


# --------------------------------------------------------------------------
# Sum of sinusoids: g(t) = N^-1/2 * sum_k exp(j(2 pi f_k t + phi_k))
# --------------------------------------------------------------------------


@njit
def _sos_numba(freqs, phases, t):
    n = t.shape[0]
    out = np.zeros(n, dtype=np.complex128)
    scale = 1.0 / np.sqrt(freqs.shape[0])
    for k in range(freqs.shape[0]):
        w = 2.0 * np.pi * freqs[k]
        ph = phases[k]
        for i in range(n):
            a = w * t[i] + ph
            out[i] += complex(np.cos(a), np.sin(a))
    for i in range(n):
        out[i] *= scale
    return out


def _sos_numpy(freqs, phases, t):
    out = np.empty(t.shape[0], dtype=np.complex128)
    w = 2.0 * np.pi * freqs
    for s in range(0, t.shape[0], _CHUNK):
        tt = t[s:s + _CHUNK]
        out[s:s + _CHUNK] = np.exp(1j * (np.outer(tt, w) + phases)).sum(axis=1)
    return out / np.sqrt(freqs.shape[0])


def sum_of_sinusoids(freqs, phases, t):
    freqs = np.ascontiguousarray(freqs, dtype=np.float64)
    phases = np.ascontiguousarray(phases, dtype=np.float64)
    t = np.ascontiguousarray(t, dtype=np.float64)
    if USE_NUMBA:
        return _sos_numba(freqs, phases, t)
    return _sos_numpy(freqs, phases, t)


# --------------------------------------------------------------------------
# Time-varying tap multiply-accumulate with linear interpolation of a
# coarsely sampled tap process: out[n] += h(n / step) * x[n]
# --------------------------------------------------------------------------


@njit
def _tv_mac_numba(out, x, h, step):
    inv = 1.0 / step
    last = h.shape[0] - 1
    for i in range(x.shape[0]):
        pos = i * inv
        k = int(pos)
        if k >= last:
            g = h[last]
        else:
            f = pos - k
            g = h[k] * (1.0 - f) + h[k + 1] * f
        out[i] += g * x[i]


def _tv_mac_numpy(out, x, h, step):
    grid = np.arange(h.shape[0], dtype=np.float64)
    for s in range(0, x.shape[0], 1 << 18):
        pos = np.arange(s, min(s + (1 << 18), x.shape[0]), dtype=np.float64) / step
        g = np.interp(pos, grid, h.real) + 1j * np.interp(pos, grid, h.imag)
        out[s:s + pos.shape[0]] += g * x[s:s + pos.shape[0]]


def tv_accumulate(out, x, h_coarse, step):
    """In place ``out += h * x`` where ``h`` is ``h_coarse`` upsampled by ``step``."""
    h_coarse = np.ascontiguousarray(h_coarse, dtype=np.complex128)
    if USE_NUMBA:
        _tv_mac_numba(out, np.ascontiguousarray(x, dtype=np.complex128), h_coarse, float(step))
    else:
        _tv_mac_numpy(out, x, h_coarse, float(step))


# --------------------------------------------------------------------------
# Occlusion: does segment p0 -> p1 cross any vertical facade rectangle?
# walls rows: x0, y0, x1, y1, height
# --------------------------------------------------------------------------


@njit
def _blocked_numba(p0, p1, walls, skip, eps):
    K = p0.shape[0]
    W = walls.shape[0]
    out = np.zeros(K, dtype=np.bool_)
    for k in range(K):
        dx = p1[k, 0] - p0[k, 0]
        dy = p1[k, 1] - p0[k, 1]
        dz = p1[k, 2] - p0[k, 2]
        for w in range(W):
            if w == skip[k, 0] or w == skip[k, 1]:
                continue
            ex = walls[w, 2] - walls[w, 0]
            ey = walls[w, 3] - walls[w, 1]
            den = dx * ey - dy * ex
            if den == 0.0:
                continue
            qx = walls[w, 0] - p0[k, 0]
            qy = walls[w, 1] - p0[k, 1]
            t = (qx * ey - qy * ex) / den
            if t <= eps or t >= 1.0 - eps:
                continue
            u = (qx * dy - qy * dx) / den
            if u < 0.0 or u > 1.0:
                continue
            z = p0[k, 2] + t * dz
            if z < walls[w, 4]:
                out[k] = True
                break
    return out


def _blocked_numpy(p0, p1, walls, skip, eps):
    K = p0.shape[0]
    out = np.zeros(K, dtype=bool)
    if walls.shape[0] == 0:
        return out
    widx = np.arange(walls.shape[0])
    ex = (walls[:, 2] - walls[:, 0])[None, :]
    ey = (walls[:, 3] - walls[:, 1])[None, :]
    for s in range(0, K, 512):
        a, b = p0[s:s + 512], p1[s:s + 512]
        d = b - a
        dx, dy, dz = d[:, 0:1], d[:, 1:2], d[:, 2:3]
        den = dx * ey - dy * ex
        qx = walls[None, :, 0] - a[:, 0:1]
        qy = walls[None, :, 1] - a[:, 1:2]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (qx * ey - qy * ex) / den
            u = (qx * dy - qy * dx) / den
        z = a[:, 2:3] + t * dz
        hit = (den != 0.0) & (t > eps) & (t < 1.0 - eps) & (u >= 0.0) & (u <= 1.0) & (z < walls[None, :, 4])
        sk = skip[s:s + 512]
        hit &= (widx[None, :] != sk[:, 0:1]) & (widx[None, :] != sk[:, 1:2])
        out[s:s + 512] = hit.any(axis=1)
    return out


def segments_blocked(p0, p1, walls, skip=None, eps=1e-9):
    """Boolean per segment: True when some facade (other than the two skipped
    indices in that row of ``skip``) is crossed below its height."""
    p0 = np.ascontiguousarray(np.atleast_2d(p0), dtype=np.float64)
    p1 = np.ascontiguousarray(np.atleast_2d(p1), dtype=np.float64)
    walls = np.ascontiguousarray(walls, dtype=np.float64).reshape(-1, 5)
    if skip is None:
        skip = np.full((p0.shape[0], 2), -1, dtype=np.int64)
    skip = np.ascontiguousarray(np.broadcast_to(skip, (p0.shape[0], 2)), dtype=np.int64)
    if USE_NUMBA:
        return _blocked_numba(p0, p1, walls, skip, float(eps))
    return _blocked_numpy(p0, p1, walls, skip, float(eps))
