"""Pulse-shaping and frequency-pulse filters."""

import numpy as np
from scipy.special import erfc

from ..errors import ModulationError


def rrc_taps(beta, span, sps):
    """Unit-energy root-raised-cosine taps, ``span * sps + 1`` long.

    Parameters
    ----------
    beta : float
        Roll-off in [0, 1].
    span : int
        Filter length in symbols (even).
    sps : int
        Samples per symbol (>= 2).
    """
    if not 0.0 <= beta <= 1.0:
        raise ModulationError(f"roll-off {beta} outside [0, 1]")
    if span % 2 or span <= 0:
        raise ModulationError(f"span must be a positive even integer, got {span}")
    if sps < 2:
        raise ModulationError(f"sps must be >= 2, got {sps}")
    t = (np.arange(span * sps + 1) - span * sps / 2) / sps
    h = np.empty_like(t)
    at0 = np.isclose(t, 0.0, atol=1e-12)
    if beta > 0:
        at_sing = np.isclose(np.abs(t), 1.0 / (4 * beta), atol=1e-12)
    else:
        at_sing = np.zeros_like(at0)
    reg = ~(at0 | at_sing)
    tr = t[reg]
    h[reg] = (np.sin(np.pi * tr * (1 - beta)) + 4 * beta * tr * np.cos(np.pi * tr * (1 + beta))) / (
        np.pi * tr * (1 - (4 * beta * tr) ** 2)
    )
    h[at0] = 1 - beta + 4 * beta / np.pi
    if at_sing.any():
        h[at_sing] = beta / np.sqrt(2) * (
            (1 + 2 / np.pi) * np.sin(np.pi / (4 * beta)) + (1 - 2 / np.pi) * np.cos(np.pi / (4 * beta))
        )
    return h / np.sqrt(np.sum(h**2))


def rect_frequency_pulse(sps):
    """Rectangular CPFSK frequency pulse, normalised to unit area."""
    return np.full(sps, 1.0 / sps)


def gaussian_frequency_pulse(bt, sps, span=4):
    """Gaussian-filtered rectangular frequency pulse (GMSK/GFSK), unit area.

    Sampled at sample centres over ``span`` symbols.
    """
    if bt <= 0:
        raise ModulationError(f"BT product must be positive, got {bt}")
    t = (np.arange(span * sps) + 0.5) / sps - span / 2
    k = 2 * np.pi * bt / np.sqrt(np.log(2))
    # rect(t) convolved with a Gaussian of std sqrt(ln 2)/(2 pi BT)
    g = 0.5 * (erfc(k * (t - 0.5) / np.sqrt(2)) - erfc(k * (t + 0.5) / np.sqrt(2)))
    return g / g.sum()
