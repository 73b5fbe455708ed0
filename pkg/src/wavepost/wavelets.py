"""Periodized orthonormal discrete wavelet transform (Haar, Daubechies-4).

The pyramid runs all the way down to a single scaling coefficient, so a
signal of length ``2**L`` maps to a tree with ``J_max = L - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sequence_model import CoefficientTree, level_slice, n_coeffs

_SQ3 = math.sqrt(3.0)
_FILTER_TAPS = {
    "haar": (1 / math.sqrt(2), 1 / math.sqrt(2)),
    "daubechies4": tuple(
        v / (4 * math.sqrt(2)) for v in (1 + _SQ3, 3 + _SQ3, 3 - _SQ3, 1 - _SQ3)
    ),
}
_ALIASES = {"d4": "daubechies4", "db2": "daubechies4"}


@dataclass(frozen=True)
class WaveletFilter:
    name: str
    lowpass: tuple[float, ...]

    @property
    def highpass(self) -> np.ndarray:
        # quadrature mirror: g[n] = (-1)**n h[L-1-n]
        h = np.asarray(self.lowpass)
        return h[::-1] * (-1.0) ** np.arange(h.size)


def get_filter(name: str) -> WaveletFilter:
    key = _ALIASES.get(name.lower(), name.lower())
    if key not in _FILTER_TAPS:
        raise ValueError(f"unknown wavelet {name!r}; choose haar or daubechies4 (d4)")
    return WaveletFilter(key, _FILTER_TAPS[key])


def _as_filter(f) -> WaveletFilter:
    return f if isinstance(f, WaveletFilter) else get_filter(f)


def _check_length(size: int) -> int:
    if size < 2 or size & (size - 1):
        raise ValueError(f"signal length must be a power of two >= 2, got {size}")
    return size.bit_length() - 1


def _analysis_step(x: np.ndarray, h: np.ndarray, g: np.ndarray):
    N = x.size
    idx = (2 * np.arange(N // 2)[:, None] + np.arange(h.size)[None, :]) % N
    blocks = x[idx]
    return blocks @ h, blocks @ g


def _synthesis_step(a: np.ndarray, d: np.ndarray, h: np.ndarray, g: np.ndarray) -> np.ndarray:
    N = 2 * a.size
    x = np.zeros(N)
    idx = (2 * np.arange(a.size)[:, None] + np.arange(h.size)[None, :]) % N
    np.add.at(x, idx, a[:, None] * h[None, :] + d[:, None] * g[None, :])
    return x


def forward_dwt(x, f="haar") -> CoefficientTree:
    x = np.asarray(x, dtype=float).ravel()
    L = _check_length(x.size)
    f = _as_filter(f)
    h, g = np.asarray(f.lowpass), f.highpass
    out = np.empty(n_coeffs(L - 1))
    a = x
    for j in range(L - 1, -1, -1):
        a, d = _analysis_step(a, h, g)
        out[level_slice(j)] = d
    return CoefficientTree(float(a[0]), out)


def inverse_dwt(t: CoefficientTree, f="haar") -> np.ndarray:
    if not isinstance(t, CoefficientTree):
        raise TypeError("inverse_dwt expects a CoefficientTree")
    f = _as_filter(f)
    h, g = np.asarray(f.lowpass), f.highpass
    a = np.array([t.alpha00])
    for j in range(t.J_max + 1):
        a = _synthesis_step(a, t.level(j), h, g)
    return a


# -- standard test signals -------------------------------------------------

_BREAKS = np.array([0.1, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81])
_BLOCK_HEIGHTS = np.array([4, -5, 3, -4, 5, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2])
_BUMP_HEIGHTS = np.array([4, 5, 3, 4, 5, 4.2, 2.1, 4.3, 3.1, 5.1, 4.2])
_BUMP_WIDTHS = np.array([0.005, 0.005, 0.006, 0.01, 0.01, 0.03, 0.01, 0.01, 0.005, 0.008, 0.005])

SIGNAL_NAMES = ("blocks", "bumps", "doppler", "heavisine")


def blocks_breakpoints() -> np.ndarray:
    return _BREAKS.copy()


def _blocks(t):
    return ((1 + np.sign(t[:, None] - _BREAKS)) / 2 * _BLOCK_HEIGHTS).sum(axis=1)


def _bumps(t):
    u = np.abs((t[:, None] - _BREAKS) / _BUMP_WIDTHS)
    return (_BUMP_HEIGHTS * (1 + u) ** -4).sum(axis=1)


def _doppler(t):
    return np.sqrt(t * (1 - t)) * np.sin(2 * np.pi * 1.05 / (t + 0.05))


def _heavisine(t):
    return 4 * np.sin(4 * np.pi * t) - np.sign(t - 0.3) - np.sign(0.72 - t)


_SIGNALS = {"blocks": _blocks, "bumps": _bumps, "doppler": _doppler, "heavisine": _heavisine}


def standard_signal(name: str, length: int) -> np.ndarray:
    """Donoho-Johnstone test function sampled at ``i / length``."""
    if name not in _SIGNALS:
        raise ValueError(f"unknown signal {name!r}; choose from {', '.join(SIGNAL_NAMES)}")
    _check_length(int(length))
    t = np.arange(length) / length
    return _SIGNALS[name](t)


def read_signal(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        values = [float(ln) for ln in fh if ln.strip()]
    return np.array(values)


def write_signal(path, x) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in np.asarray(x, dtype=float):
            fh.write(f"{float(v)!r}\n")
