"""Discrete wavelet transform with the Daubechies-4 filter pair.

The 8-tap orthogonal scaling filter was computed once from the Daubechies
vanishing-moment/orthogonality conditions (spectral factorization of the
half-band polynomial, minimum-phase root selection) and cross-checked
against the published coefficient table; it is frozen below. The
high-pass filter is its quadrature mirror.
"""

from __future__ import annotations

import numpy as np

#: Daubechies-4 scaling (low-pass) filter, sum = sqrt(2), unit energy.
DB4_LO = np.array([
    0.2303778133088964,
    0.7148465705529154,
    0.6308807679298587,
    -0.0279837694168599,
    -0.1870348117190931,
    0.0308413818355607,
    0.0328830116668852,
    -0.0105974017850690,
])

#: Quadrature-mirror high-pass filter: g[k] = (-1)^k h[L-1-k].
DB4_HI = (DB4_LO[::-1] * np.where(np.arange(DB4_LO.size) % 2 == 0, 1.0, -1.0))

_L = DB4_LO.size


def _analysis_step(x):
    """One analysis level: (approximation, detail) at half rate.

    The signal is extended by half-point symmetric reflection on both ends
    before filtering, so boundaries distort gracefully; output length is
    floor((n + L - 1) / 2) per subband.
    """
    n = x.size
    pad = _L - 1
    left = x[pad - 1::-1] if pad <= n else _reflect(x, pad, "left")
    right = x[:-pad - 1:-1] if pad <= n else _reflect(x, pad, "right")
    ext = np.concatenate([left, x, right])
    lo = np.convolve(ext, DB4_LO[::-1], mode="valid")[1::2]
    hi = np.convolve(ext, DB4_HI[::-1], mode="valid")[1::2]
    return lo, hi


def _reflect(x, pad, side):
    # symmetric extension longer than the signal itself (very short inputs)
    tiles = []
    flip = True
    while sum(t.size for t in tiles) < pad:
        tiles.append(x[::-1] if flip else x)
        flip = not flip
    ext = np.concatenate(tiles)
    if side == "left":
        return ext[:pad][::-1]
    return ext[:pad]


def wavedec(x, levels=6):
    """Multi-level DWT; returns (approx, [d1, d2, ..., d_levels]).

    d1 is the finest (highest-frequency) detail band. Raises if the signal
    is too short for the requested depth.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2 ** levels + _L:
        raise ValueError(
            "signal of length %d too short for %d-level DWT "
            "(needs >= %d samples)" % (x.size, levels, 2 ** levels + _L))
    details = []
    approx = x
    for _ in range(levels):
        approx, det = _analysis_step(approx)
        details.append(det)
    return approx, details


def band_edges_hz(fs, levels=6):
    """Nominal dyadic frequency band per detail level, [(lo, hi), ...]."""
    edges = []
    hi = fs / 2.0
    for _ in range(levels):
        edges.append((hi / 2.0, hi))
        hi /= 2.0
    return edges
