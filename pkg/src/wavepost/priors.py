"""Spike-and-slab and sieve priors on wavelet coefficients.

Spike-and-slab, independently per coefficient::

    beta_jk ~ pi_j N(0, a_j^2) + (1 - pi_j) delta_0,
    a_j^2 = c_a 2^(-alpha j),  pi_j = min(1, c_pi 2^(-gamma j)).

Sieve: pick a resolution ``m`` with probability ``lambda_m ~ 2^(-mu m)``,
then ``beta_jk ~ N(0, 2^(-alpha j))`` for ``j <= m`` and zero above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import _rng
from .sequence_model import CoefficientTree, level_index, level_slice, n_coeffs


def choose_alpha(s: float, p: float) -> float:
    """Slab variance decay matched to the Besov index: ``2s+1`` (p >= 2) or ``2s+2-2/p``."""
    if p >= 2:
        return 2 * s + 1
    return 2 * s + 2 - 2 / p


@dataclass(frozen=True)
class SpikeSlabPrior:
    alpha: float
    gamma: float = 0.5
    c_a: float = 1.0
    c_pi: float = 1.0
    J_max: int = 30

    def __post_init__(self):
        if not self.alpha > 1:
            raise ValueError(f"alpha must be > 1, got {self.alpha}")
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not self.c_a > 0:
            raise ValueError(f"c_a must be positive, got {self.c_a}")
        if not 0 < self.c_pi <= 1:
            raise ValueError(f"c_pi must lie in (0, 1], got {self.c_pi}")
        if self.J_max < 0:
            raise ValueError("J_max must be >= 0")

    def level_arrays(self, J: int) -> tuple[np.ndarray, np.ndarray]:
        """``(pi_j, a_j^2)`` for ``j = 0 .. J`` by formula (no range check)."""
        j = np.arange(J + 1, dtype=float)
        pi = np.minimum(1.0, self.c_pi * 2.0 ** (-self.gamma * j))
        return pi, self.c_a * 2.0 ** (-self.alpha * j)


def level_params(prior: SpikeSlabPrior, j: int) -> tuple[float, float]:
    if not 0 <= j <= prior.J_max:
        raise ValueError(f"level {j} outside 0..{prior.J_max}")
    pi = min(1.0, prior.c_pi * 2.0 ** (-prior.gamma * j))
    return pi, prior.c_a * 2.0 ** (-prior.alpha * j)


def sample_spike_slab(prior: SpikeSlabPrior, seed: int, J: int | None = None) -> CoefficientTree:
    """One prior draw on levels ``0 .. J`` (default ``prior.J_max``)."""
    J = prior.J_max if J is None else J
    pi, a_sq = prior.level_arrays(J)
    out = np.zeros(n_coeffs(J))
    for j in range(J + 1):
        rng = _rng.stream(seed, _rng.PRIOR, j)
        u = rng.random(1 << j)
        z = rng.standard_normal(1 << j)
        out[level_slice(j)] = np.where(u < pi[j], math.sqrt(a_sq[j]) * z, 0.0)
    return CoefficientTree(0.0, out)


@dataclass(frozen=True)
class SievePrior:
    mu: float = 1.0
    alpha: float = 3.0
    m_max: int = 20

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not self.alpha > 1:
            raise ValueError(f"alpha must be > 1, got {self.alpha}")
        if self.m_max < 0:
            raise ValueError("m_max must be >= 0")

    def level_variances(self, J: int) -> np.ndarray:
        return 2.0 ** (-self.alpha * np.arange(J + 1, dtype=float))


def log_sieve_weights(prior: SievePrior) -> np.ndarray:
    logw = -prior.mu * math.log(2.0) * np.arange(prior.m_max + 1)
    return logw - logsumexp(logw)


def sieve_weights(prior: SievePrior) -> np.ndarray:
    return np.exp(log_sieve_weights(prior))


def sample_sieve(prior: SievePrior, seed: int) -> tuple[CoefficientTree, int]:
    """Draw ``(tree, m)``; the tree has depth ``m_max`` and is zero above ``m``."""
    rng = _rng.stream(seed, _rng.PRIOR)
    m = int(rng.choice(prior.m_max + 1, p=sieve_weights(prior)))
    var = prior.level_variances(prior.m_max)
    out = np.zeros(n_coeffs(prior.m_max))
    for j in range(m + 1):
        z = _rng.stream(seed, _rng.PRIOR, j).standard_normal(1 << j)
        out[level_slice(j)] = math.sqrt(var[j]) * z
    return CoefficientTree(0.0, out), m


# -- prior small-ball mass --------------------------------------------------


class UnreliableEstimate(RuntimeError):
    """Raised when an importance-sampling estimate has too few effective samples."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class MassEstimate:
    log_mass: float
    stderr: float  # standard error of log_mass
    ess: float
    n_mc: int


MIN_ESS = 100.0


def _is_ball_hits(center, sd, pi, eps_sq, n_mc, rng, batch=4096):
    """Importance-sampled ``P(sum (beta - center)^2 <= eps_sq)`` for independent spike-slab coordinates.

    Slab draws come from ``N(center, sd^2)`` instead of ``N(0, sd^2)``; the
    spike is sampled as-is.  Returns per-draw log weights (``-inf`` for misses).
    """
    d = center.size
    logw = np.empty(n_mc)
    done = 0
    while done < n_mc:
        b = min(batch, n_mc - done)
        slab = rng.random((b, d)) < pi
        z = rng.standard_normal((b, d))
        beta = np.where(slab, center + sd * z, 0.0)
        # log N(beta; 0, sd^2) - log N(beta; center, sd^2) on slab coordinates
        lw = np.where(slab, ((beta - center) ** 2 - beta ** 2) / (2 * sd ** 2), 0.0)
        dist = np.sum((beta - center) ** 2, axis=1)
        row = lw.sum(axis=1)
        row[dist > eps_sq] = -np.inf
        logw[done : done + b] = row
        done += b
    return logw


def _summarize(logw: np.ndarray) -> MassEstimate:
    n_mc = logw.size
    finite = np.isfinite(logw)
    if not finite.any():
        return MassEstimate(-math.inf, math.inf, 0.0, n_mc)
    lw = logw[finite]
    top = lw.max()
    w = np.exp(lw - top)
    s1 = w.sum()
    s2 = np.dot(w, w)
    log_mass = top + math.log(s1) - math.log(n_mc)
    mean = s1 / n_mc
    var = max(s2 / n_mc - mean ** 2, 0.0) / max(n_mc - 1, 1)
    stderr = math.sqrt(var) / mean
    return MassEstimate(float(log_mass), float(stderr), float(s1 ** 2 / s2), n_mc)


def prior_mass_probe(
    prior,
    truth: CoefficientTree,
    eps_sq: float,
    J: int,
    n_mc: int = 20000,
    seed: int = 0,
    strict: bool = True,
) -> MassEstimate:
    """Estimate ``log Pi(sum_{j<=J,k} (beta_jk - beta0_jk)^2 <= eps_sq)``.

    Uses importance sampling with slab proposals centred at the truth.  For
    the sieve prior the mass is the ``lambda``-mixture over models, each
    model estimated separately (models ``m >= J`` share one estimate).
    Raises :class:`UnreliableEstimate` when the effective sample size is
    below 100 and ``strict`` is set.
    """
    if not eps_sq > 0:
        raise ValueError("eps_sq must be positive")
    if J < 0:
        raise ValueError("J must be >= 0")
    center = truth.padded(J).coeffs[: n_coeffs(J)]
    lev = level_index(J)

    if isinstance(prior, SpikeSlabPrior):
        pi, a_sq = prior.level_arrays(J)
        rng = _rng.stream(seed, _rng.PROBE)
        est = _summarize(_is_ball_hits(center, np.sqrt(a_sq[lev]), pi[lev], eps_sq, n_mc, rng))
    elif isinstance(prior, SievePrior):
        est = _sieve_probe(prior, center, lev, J, eps_sq, n_mc, seed)
    else:
        raise TypeError(f"unsupported prior {type(prior).__name__}")

    if strict and est.ess < MIN_ESS:
        raise UnreliableEstimate(
            f"effective sample size {est.ess:.1f} < {MIN_ESS:g}; increase n_mc", est
        )
    return est


def _sieve_probe(prior, center, lev, J, eps_sq, n_mc, seed) -> MassEstimate:
    logw = log_sieve_weights(prior)
    var = prior.level_variances(J)
    parts = []
    top_model = min(J, prior.m_max)
    for m in range(top_model + 1):
        # models with m >= J all look the same on levels <= J
        log_lam = logsumexp(logw[m:]) if m == top_model else logw[m]
        active = lev <= m
        fixed = float(np.sum(center[~active] ** 2))
        if fixed > eps_sq:
            parts.append((log_lam, MassEstimate(-math.inf, math.inf, 0.0, n_mc)))
            continue
        rng = _rng.stream(seed, _rng.PROBE, m)
        c = center[active]
        sd = np.sqrt(var[lev[active]])
        est = _summarize(_is_ball_hits(c, sd, np.ones_like(c), eps_sq - fixed, n_mc, rng))
        parts.append((log_lam, est))

    live = [(ll, e) for ll, e in parts if np.isfinite(e.log_mass)]
    if not live:
        return MassEstimate(-math.inf, math.inf, 0.0, n_mc)
    terms = np.array([ll + e.log_mass for ll, e in live])
    log_mass = float(logsumexp(terms))
    share = np.exp(terms - log_mass)
    # delta method: var(total) = sum var(term_m)
    rel_var = float(np.sum((share * np.array([e.stderr for _, e in live])) ** 2))
    # dominant model governs reliability
    ess = min(e.ess for (ll, e), sh in zip(live, share) if sh > 0.01)
    return MassEstimate(log_mass, math.sqrt(rel_var), float(ess), n_mc)
