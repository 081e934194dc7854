"""Orthogonal space-time block codes (Alamouti and the rate-3/4 designs)."""

import numpy as np

from ..errors import ModulationError

# Rows are time slots, columns antennas. Each entry is (symbol index, conj, sign);
# None is a zero.
_G4 = (
    ((0, False, 1), (1, False, 1), (2, False, 1), None),
    ((1, True, -1), (0, True, 1), None, (2, False, 1)),
    ((2, True, -1), None, (0, True, 1), (1, False, -1)),
    (None, (2, True, -1), (1, True, 1), (0, False, 1)),
)
_ALAMOUTI = (
    ((0, False, 1), (1, False, 1)),
    ((1, True, -1), (0, True, 1)),
)


def _design(n_tx):
    if n_tx == 2:
        return _ALAMOUTI, 2
    if n_tx in (3, 4):
        return tuple(row[:n_tx] for row in _G4), 3
    raise ModulationError(f"OSTBC supports 1 to 4 transmit antennas, got {n_tx}")


def code_block(symbols, n_tx):
    """Code matrix (time x antenna) for one block of input symbols, unscaled."""
    design, _ = _design(n_tx)
    C = np.zeros((len(design), n_tx), dtype=complex)
    for t, row in enumerate(design):
        for a, entry in enumerate(row):
            if entry is None:
                continue
            i, cj, sgn = entry
            s = symbols[i]
            C[t, a] = sgn * (np.conj(s) if cj else s)
    return C


def block_size(n_tx):
    """(input symbols, time slots) per code block."""
    if n_tx == 1:
        return 1, 1
    design, k = _design(n_tx)
    return k, len(design)


def ostbc_encode(symbols, n_tx):
    """Spread a symbol stream over ``n_tx`` antennas.

    Returns an ``(n_tx, n_slots)`` array. The input length must be a
    multiple of the code's block size. Columns are scaled so each antenna
    carries ``1/n_tx`` of the input stream's power.
    """
    symbols = np.asarray(symbols, dtype=complex)
    if n_tx == 1:
        return symbols[None, :].copy()
    if n_tx > 4 or n_tx < 1:
        raise ModulationError(f"OSTBC supports 1 to 4 transmit antennas, got {n_tx}")
    k, slots = block_size(n_tx)
    if symbols.size % k:
        raise ModulationError(f"{symbols.size} symbols is not a multiple of the block size {k}")
    design, _ = _design(n_tx)
    blocks = symbols.reshape(-1, k)
    out = np.zeros((n_tx, blocks.shape[0], slots), dtype=complex)
    for t, row in enumerate(design):
        for a, entry in enumerate(row):
            if entry is None:
                continue
            i, cj, sgn = entry
            s = blocks[:, i]
            out[a, :, t] = sgn * (np.conj(s) if cj else s)
    out *= antenna_scale(n_tx)
    return out.reshape(n_tx, -1)


def antenna_scale(n_tx):
    """Amplitude factor giving each antenna ``1/n_tx`` of the stream power."""
    if n_tx == 1:
        return 1.0
    design, _ = _design(n_tx)
    nonzero = sum(row[0] is not None for row in design)
    return float(np.sqrt(len(design) / (nonzero * n_tx)))


def ostbc_decode(received, channel, n_tx):
    """Linear decoder for a flat channel.

    ``received`` is ``(n_rx, n_slots)``, ``channel`` is ``(n_rx, n_tx)``.
    Uses the real-valued least-squares inverse of the code, which for
    orthogonal designs equals the maximum-ratio combiner.
    """
    received = np.atleast_2d(received)
    channel = np.atleast_2d(channel)
    if n_tx == 1:
        g = channel[:, 0]
        return (np.conj(g) @ received) / np.sum(np.abs(g) ** 2)
    k, slots = block_size(n_tx)
    # linear map from [Re s, Im s] of one block to [Re y, Im y]
    cols = []
    for j in range(2 * k):
        e = np.zeros(k, dtype=complex)
        e[j % k] = 1.0 if j < k else 1j
        y = channel @ (antenna_scale(n_tx) * code_block(e, n_tx)).T  # (n_rx, slots)
        cols.append(np.concatenate([y.real.ravel(), y.imag.ravel()]))
    A = np.stack(cols, axis=1)
    Ainv = np.linalg.pinv(A)
    blocks = received.reshape(received.shape[0], -1, slots).transpose(1, 0, 2)
    rhs = np.concatenate([blocks.real.reshape(blocks.shape[0], -1), blocks.imag.reshape(blocks.shape[0], -1)], axis=1)
    sol = rhs @ Ainv.T
    return (sol[:, :k] + 1j * sol[:, k:]).ravel()
