"""Besov sequence norms, ball membership and truths living in Besov balls."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _rng
from .sequence_model import CoefficientTree, level_slice, n_coeffs
from .wavelets import forward_dwt, standard_signal

INF = math.inf


@dataclass(frozen=True)
class BesovIndex:
    s: float
    p: float = 2.0
    q: float = 2.0
    B: float = 1.0

    def __post_init__(self):
        validate_besov(self.s, self.p, self.q, self.B)

    @property
    def level_weight_exponent(self) -> float:
        """``s + 1/2 - 1/p``, the per-level weight exponent in the norm."""
        return self.s + 0.5 - 1.0 / self.p


def validate_besov(s: float, p: float, q: float, B: float = 1.0) -> None:
    if not p >= 1:
        raise ValueError(f"p must satisfy 1 <= p <= inf, got p = {p}")
    if not q >= 1:
        raise ValueError(f"q must satisfy 1 <= q <= inf, got q = {q}")
    lower = max(0.0, 1.0 / p - 0.5)
    if not s > lower:
        raise ValueError(f"s must exceed max(0, 1/p - 1/2) = {lower:g}, got s = {s}")
    if not B > 0:
        raise ValueError(f"ball radius B must be positive, got {B}")


def level_p_norms(t: CoefficientTree, p: float) -> np.ndarray:
    out = np.empty(t.J_max + 1)
    for j in range(t.J_max + 1):
        lv = np.abs(t.coeffs[level_slice(j)])
        top = lv.max()
        if math.isinf(p) or top == 0.0:
            out[j] = top
        else:
            out[j] = top * float(np.sum((lv / top) ** p) ** (1.0 / p))
    return out


def _aggregate(terms: np.ndarray, q: float) -> float:
    if math.isinf(q):
        return float(terms.max(initial=0.0))
    top = terms.max(initial=0.0)
    if top == 0.0:
        return 0.0
    # scale out the largest term so large q does not overflow
    return float(top * np.sum((terms / top) ** q) ** (1.0 / q))


def besov_norm(t: CoefficientTree, idx: BesovIndex) -> float:
    """``|alpha00| + || (2**(j(s+1/2-1/p)) ||beta_j.||_p)_j ||_q``."""
    j = np.arange(t.J_max + 1)
    terms = 2.0 ** (j * idx.level_weight_exponent) * level_p_norms(t, idx.p)
    return abs(t.alpha00) + _aggregate(terms, idx.q)


def norm_chain_bound(t: CoefficientTree, idx: BesovIndex, J: int) -> float:
    """Upper bound on the Besov norm of ``P_J t`` through its l2 norm (``alpha00`` ignored).

    For ``p >= 2``: ``2^(J(s+1/2-1/p)) (J+1)^max(1/q-1/2, 0) ||P_J t||_2``;
    for ``p < 2`` the level embedding swaps the first factor for ``2^(J s)``.
    The count ``J+1`` is the number of levels ``0..J``.
    """
    if J < 0:
        return 0.0
    head = t.padded(J).coeffs[: n_coeffs(J)]
    l2 = float(np.sqrt(np.dot(head, head)))
    inv_q = 0.0 if math.isinf(idx.q) else 1.0 / idx.q
    count = (J + 1) ** max(inv_q - 0.5, 0.0)
    level = idx.level_weight_exponent if idx.p >= 2 else idx.s
    return 2.0 ** (J * level) * count * l2


def in_ball(t: CoefficientTree, idx: BesovIndex) -> bool:
    return besov_norm(t, idx) < idx.B


def tail_energy(t: CoefficientTree, J: int) -> float:
    """Energy on levels strictly above ``J``."""
    start = n_coeffs(max(J, -1))
    tail = t.coeffs[start:]
    return float(np.dot(tail, tail))


def level_energies(t: CoefficientTree) -> np.ndarray:
    return np.array([float(np.dot(lv, lv)) for lv in t.levels])


def fit_tail_constant(t: CoefficientTree, s_prime: float) -> float:
    """Smallest ``C`` with ``tail_energy(t, J) <= C 2**(-2 J s')`` for all stored ``J >= 0``."""
    ratios = [
        tail_energy(t, J) * 2.0 ** (2 * J * s_prime) for J in range(t.J_max + 1)
    ]
    return max(ratios, default=0.0)


# -- truths ------------------------------------------------------------------

TRUTH_KINDS = ("level-uniform", "level-sparse", "dwt-of-signal")


@dataclass(frozen=True)
class TruthSpec:
    kind: str
    besov: BesovIndex
    margin: float = 0.1
    J_max: int = 20
    decay: float = 0.01
    signal: str = "doppler"
    wavelet: str = "daubechies4"
    alpha00: float = 0.0

    def __post_init__(self):
        if self.kind not in TRUTH_KINDS:
            raise ValueError(f"unknown truth kind {self.kind!r}; choose from {', '.join(TRUTH_KINDS)}")
        if not 0 < self.margin < 1:
            raise ValueError(f"margin must lie in (0, 1), got {self.margin}")
        if self.J_max < 0:
            raise ValueError("J_max must be >= 0")
        if not self.decay > 0:
            raise ValueError(f"decay must be positive, got {self.decay}")

    @property
    def target_norm(self) -> float:
        return (1.0 - self.margin) * self.besov.B


def _base_tree(spec: TruthSpec, seed: int) -> CoefficientTree:
    idx = spec.besov
    J = spec.J_max
    c = np.zeros(n_coeffs(J))
    if spec.kind == "level-uniform":
        inv_p = 0.0 if math.isinf(idx.p) else 1.0 / idx.p
        for j in range(J + 1):
            c[level_slice(j)] = 2.0 ** (-j * (idx.level_weight_exponent + inv_p + spec.decay))
        return CoefficientTree(0.0, c)
    if spec.kind == "level-sparse":
        rng = _rng.stream(seed, _rng.TRUTH)
        for j in range(J + 1):
            k = int(rng.integers(1 << j))
            c[(1 << j) - 1 + k] = 2.0 ** (-j * (idx.level_weight_exponent + spec.decay))
        return CoefficientTree(0.0, c)
    x = standard_signal(spec.signal, 1 << (J + 1))
    # divide by sqrt(length) so the coefficients approximate L2 inner products
    return forward_dwt(x, spec.wavelet) * (1.0 / math.sqrt(x.size))


def make_truth(spec: TruthSpec, seed: int = 0) -> CoefficientTree:
    """Build a tree whose Besov norm is ``(1 - margin) B`` to within ``1e-9 B``.

    For the synthetic kinds ``alpha00`` is taken from ``spec`` and the
    detail scale is solved for; for ``dwt-of-signal`` the whole transform
    (scaling coefficient included) is rescaled.
    """
    idx = spec.besov
    base = _base_tree(spec, seed)
    target = spec.target_norm
    if spec.kind == "dwt-of-signal":
        def build(scale):
            return base * scale
    else:
        def build(scale):
            return CoefficientTree(spec.alpha00, base.coeffs * scale)

    lo_norm = besov_norm(build(0.0), idx)
    if lo_norm >= target:
        raise ValueError(
            f"target norm {target:g} unreachable: the unscaled part already has norm {lo_norm:g}"
        )
    hi = 1.0
    while besov_norm(build(hi), idx) < target:
        hi *= 2.0
        if hi > 1e300:
            raise ValueError("target norm unreachable: base tree has zero norm")
    lo = 0.0
    tol = 1e-9 * idx.B
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        val = besov_norm(build(mid), idx)
        if abs(val - target) <= 0.5 * tol:
            return build(mid)
        if val < target:
            lo = mid
        else:
            hi = mid
    return build(0.5 * (lo + hi))
