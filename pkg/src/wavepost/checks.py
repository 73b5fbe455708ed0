"""Deterministic numeric probes of the inequalities behind the contraction rates.

Each probe returns a :class:`CheckResult`; :func:`run_checks` runs them all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _rng
from .besov import BesovIndex, level_p_norms
from .lab import lemma2_tail_report
from .posterior import CoefficientPosterior, posterior_median, posterior_second_moment
from .priors import SpikeSlabPrior
from .sequence_model import CoefficientTree
from .special import gamma_tail_bound_ratio

GAMMA_B_GRID = tuple(np.linspace(0.1, 50.0, 500))
GAMMA_A_GRID = (0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 100.0)
GAMMA_FLOOR = 0.2


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    detail: str


def gamma_probe() -> CheckResult:
    """Smallest ``F(b; a) / bound`` over the (a, b) grid."""
    ratios = np.array([[gamma_tail_bound_ratio(b, a) for b in GAMMA_B_GRID] for a in GAMMA_A_GRID])
    finite = bool(np.all(np.isfinite(ratios)) and np.all(ratios > 0))
    lo = float(ratios.min())
    return CheckResult(
        "gamma-bound", finite and lo > GAMMA_FLOOR, lo, f"min ratio {lo:.4f} (floor {GAMMA_FLOOR})"
    )


def tail_probe(alpha: float = 3.0, steps: int = 8) -> CheckResult:
    """``8 E[prior tail] / eps_n^2`` must fall along ``n = 2^(alpha k)``.

    ``J`` is a floor, so only grids on which ``J`` moves every step give a
    strictly decreasing sequence.
    """
    prior = SpikeSlabPrior(alpha)
    step = max(1, round(alpha))
    grid = [2 ** (step * k) for k in range(2, 2 + steps)]
    rows = lemma2_tail_report(prior, BesovIndex(1.0), grid)
    ratios = [r.ratio for r in rows]
    ok = all(b < a for a, b in zip(ratios, ratios[1:]))
    return CheckResult("prior-tail", ok, ratios[-1], f"ratio {ratios[0]:.3g} -> {ratios[-1]:.3g}")


def _random_tree(seed, i):
    rng = _rng.stream(seed, _rng.PROBE, i)
    J = int(rng.integers(0, 9))
    scale = 2.0 ** (-rng.uniform(0, 2) * np.repeat(np.arange(J + 1), 1 << np.arange(J + 1)))
    coeffs = rng.standard_t(3, size=2 ** (J + 1) - 1) * scale
    coeffs[rng.random(coeffs.size) < rng.uniform(0, 0.8)] = 0.0
    return CoefficientTree(float(rng.normal()), coeffs)


def embedding_probe(n_trees: int = 1000, seed: int = 0, slack: float = 1e-10) -> CheckResult:
    """Level norms: ``||b||_p <= ||b||_2`` for p >= 2, ``<= 2^(j(1/p-1/2)) ||b||_2`` for p < 2."""
    violations = 0
    for i in range(n_trees):
        t = _random_tree(seed, i)
        l2 = level_p_norms(t, 2.0)
        j = np.arange(t.J_max + 1)
        for p in (2.5, 4.0, math.inf):
            violations += int(np.sum(level_p_norms(t, p) > l2 + slack))
        for p in (1.0, 1.25, 1.5, 1.9):
            violations += int(np.sum(level_p_norms(t, p) > 2.0 ** (j * (1 / p - 0.5)) * l2 + slack))
    return CheckResult("level-embeddings", violations == 0, float(violations), f"{violations} violations on {n_trees} trees")


def median_bound_probe(n: int = 10_000, seed: int = 0) -> CheckResult:
    """``|median| <= 2 sqrt(second moment)`` on random posteriors."""
    rng = _rng.stream(seed, _rng.PROBE, 1 << 20)
    omega = rng.random(n)
    m = rng.normal(0, 10, n)
    v = np.exp(rng.uniform(-10, 5, n))
    cp = CoefficientPosterior(omega, m, v)
    excess = np.abs(posterior_median(cp)) - 2 * np.sqrt(posterior_second_moment(cp))
    bad = int(np.sum(excess > 0))
    return CheckResult("median-bound", bad == 0, float(bad), f"{bad} violations on {n} posteriors")


def run_checks(seed: int = 0) -> list[CheckResult]:
    return [gamma_probe(), tail_probe(), embedding_probe(seed=seed), median_bound_probe(seed=seed)]


def format_table(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  status  detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.detail}")
    return "\n".join(lines)
