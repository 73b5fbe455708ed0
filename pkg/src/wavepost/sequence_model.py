"""Coefficient trees and the Gaussian sequence model.

A :class:`CoefficientTree` holds the scaling coefficient ``alpha00`` and the
detail coefficients ``beta[j, k]`` for levels ``j = 0 .. J_max`` with
``2**j`` entries on level ``j``.  Details are stored flat: level ``j`` lives
at ``coeffs[2**j - 1 : 2**(j + 1) - 1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _rng


def level_slice(j: int) -> slice:
    return slice((1 << j) - 1, (1 << (j + 1)) - 1)


def n_coeffs(J_max: int) -> int:
    """Number of detail coefficients on levels ``0 .. J_max``."""
    return (1 << (J_max + 1)) - 1


def level_index(J_max: int) -> np.ndarray:
    """Level number ``j`` of every flat position in a tree of depth ``J_max``."""
    return np.repeat(np.arange(J_max + 1), 1 << np.arange(J_max + 1))


@dataclass(frozen=True, eq=False)
class CoefficientTree:
    """Immutable dyadic wavelet coefficient sequence."""

    alpha00: float
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).ravel()
        size = c.size + 1
        if size < 2 or size & (size - 1):
            raise ValueError(
                f"detail array of length {c.size} is not 2**(J_max+1) - 1 for any J_max >= 0"
            )
        if not np.all(np.isfinite(c)) or not math.isfinite(self.alpha00):
            raise ValueError("coefficient tree entries must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "alpha00", float(self.alpha00))

    @classmethod
    def from_levels(cls, alpha00: float, levels: Iterable[Sequence[float]]) -> "CoefficientTree":
        levels = [np.asarray(lv, dtype=float).ravel() for lv in levels]
        for j, lv in enumerate(levels):
            if lv.size != 1 << j:
                raise ValueError(f"level {j} has {lv.size} entries, expected {1 << j}")
        if not levels:
            raise ValueError("a coefficient tree needs at least level 0")
        return cls(alpha00, np.concatenate(levels))

    @classmethod
    def zeros(cls, J_max: int, alpha00: float = 0.0) -> "CoefficientTree":
        if J_max < 0:
            raise ValueError("J_max must be >= 0")
        return cls(alpha00, np.zeros(n_coeffs(J_max)))

    @property
    def J_max(self) -> int:
        return (self.coeffs.size + 1).bit_length() - 2

    def level(self, j: int) -> np.ndarray:
        if not 0 <= j <= self.J_max:
            raise IndexError(f"level {j} outside 0..{self.J_max}")
        return self.coeffs[level_slice(j)]

    @property
    def levels(self) -> list[np.ndarray]:
        return [self.level(j) for j in range(self.J_max + 1)]

    def padded(self, J_max: int) -> "CoefficientTree":
        """Zero-pad (never truncate) to depth ``J_max``."""
        if J_max <= self.J_max:
            return self
        c = np.zeros(n_coeffs(J_max))
        c[: self.coeffs.size] = self.coeffs
        return CoefficientTree(self.alpha00, c)

    def replace(self, alpha00: float | None = None, coeffs: np.ndarray | None = None) -> "CoefficientTree":
        return CoefficientTree(
            self.alpha00 if alpha00 is None else alpha00,
            self.coeffs if coeffs is None else coeffs,
        )

    def _aligned(self, other: "CoefficientTree"):
        J = max(self.J_max, other.J_max)
        return self.padded(J), other.padded(J)

    def __add__(self, other: "CoefficientTree") -> "CoefficientTree":
        a, b = self._aligned(other)
        return CoefficientTree(a.alpha00 + b.alpha00, a.coeffs + b.coeffs)

    def __sub__(self, other: "CoefficientTree") -> "CoefficientTree":
        a, b = self._aligned(other)
        return CoefficientTree(a.alpha00 - b.alpha00, a.coeffs - b.coeffs)

    def __mul__(self, c: float) -> "CoefficientTree":
        return CoefficientTree(c * self.alpha00, c * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self) -> "CoefficientTree":
        return self * -1.0

    def __eq__(self, other) -> bool:
        if not isinstance(other, CoefficientTree):
            return NotImplemented
        return (
            self.J_max == other.J_max
            and self.alpha00 == other.alpha00
            and np.array_equal(self.coeffs, other.coeffs)
        )

    __hash__ = None

    # -- text format -------------------------------------------------------

    def to_text(self) -> str:
        lines = [f"{self.J_max} {self.alpha00!r}"]
        for lv in self.levels:
            lines.append(" ".join(repr(float(x)) for x in lv))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CoefficientTree":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty coefficient file")
        head = lines[0].split()
        if len(head) != 2:
            raise ValueError("header must be 'J_max alpha00'")
        J_max, alpha00 = int(head[0]), float(head[1])
        if len(lines) != J_max + 2:
            raise ValueError(f"expected {J_max + 1} level lines, found {len(lines) - 1}")
        levels = [[float(x) for x in ln.split()] for ln in lines[1:]]
        return cls.from_levels(alpha00, levels)


@dataclass(frozen=True)
class SequenceObservation:
    data: CoefficientTree
    n: int

    @property
    def sigma_n(self) -> float:
        return self.n ** -0.5

    @property
    def sigma_sq(self) -> float:
        return 1.0 / self.n


def observation_depth(n: int) -> int:
    """Finest stored level for sample size ``n``: ``ceil(log2 n)``."""
    return max(0, math.ceil(math.log2(n)))


def simulate_observation(
    truth: CoefficientTree,
    n: int,
    seed: int,
    J_data: int | None = None,
    noisy_alpha00: bool = False,
) -> SequenceObservation:
    """Draw ``X_jk = beta_jk + z_jk / sqrt(n)`` for every stored coefficient.

    Levels up to ``J_data`` (default ``ceil(log2 n)``) are observed; the
    truth is zero-padded or cut to that depth.  Noise on level ``j`` comes
    from its own stream keyed by ``(seed, j)``, so the draw for ``(j, k)``
    does not depend on how many other levels are simulated.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    if J_data is None:
        J_data = observation_depth(n)
    J_data = max(J_data, 0)
    beta = truth.padded(J_data).coeffs[: n_coeffs(J_data)]
    sigma = n ** -0.5
    x = np.empty_like(beta)
    for j in range(J_data + 1):
        sl = level_slice(j)
        z = _rng.stream(seed, _rng.OBSERVATION, j).standard_normal(1 << j)
        x[sl] = beta[sl] + sigma * z
    alpha00 = truth.alpha00
    if noisy_alpha00:
        alpha00 += sigma * _rng.stream(seed, _rng.OBSERVATION, 1 << 20).standard_normal()
    return SequenceObservation(CoefficientTree(alpha00, x), n)


def l2_distance_sq(a: CoefficientTree, b: CoefficientTree) -> float:
    """Squared l2 distance including the ``alpha00`` slot; shorter tree zero-padded."""
    d = a - b
    return float(d.alpha00 ** 2 + np.dot(d.coeffs, d.coeffs))


def truncate(t: CoefficientTree, J: int) -> CoefficientTree:
    """Projection keeping levels ``j <= J``; ``J = -1`` keeps only ``alpha00``."""
    if J < -1:
        raise ValueError("J must be >= -1")
    if J >= t.J_max:
        return t
    c = np.array(t.coeffs)
    c[n_coeffs(J):] = 0.0
    return CoefficientTree(t.alpha00, c)
