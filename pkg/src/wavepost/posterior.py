"""Closed-form posteriors under the spike-and-slab and sieve priors.

For one coefficient with ``X ~ N(beta, sigma^2)`` and prior
``pi N(0, a^2) + (1 - pi) delta_0`` the posterior is again a spike plus a
Gaussian slab::

    omega = pi N(X; 0, a^2+sigma^2) / [pi N(X; 0, a^2+sigma^2) + (1-pi) N(X; 0, sigma^2)]
    m     = a^2 X / (a^2 + sigma^2)
    v     = a^2 sigma^2 / (a^2 + sigma^2)

Everything here accepts numpy arrays and broadcasts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp, ndtr, ndtri

from . import _rng
from .besov import tail_energy
from .priors import SievePrior, SpikeSlabPrior, log_sieve_weights
from .sequence_model import (
    CoefficientTree,
    SequenceObservation,
    level_index,
    level_slice,
    n_coeffs,
)

_LOG_2PI = math.log(2 * math.pi)


@dataclass(frozen=True)
class CoefficientPosterior:
    """``omega N(m, v) + (1 - omega) delta_0``; fields may be arrays."""

    omega: float | np.ndarray
    m: float | np.ndarray
    v: float | np.ndarray


def _log_normal_pdf(x, var):
    return -0.5 * (_LOG_2PI + np.log(var)) - 0.5 * x * x / var


def slab_log_odds(x, sigma_sq, pi, a_sq):
    """Posterior log odds of slab versus spike."""
    with np.errstate(divide="ignore"):
        prior_odds = np.log(pi) - np.log1p(-np.asarray(pi, dtype=float))
    return prior_odds + _log_normal_pdf(x, a_sq + sigma_sq) - _log_normal_pdf(x, sigma_sq)


def coefficient_posterior(x, sigma_sq, pi, a_sq) -> CoefficientPosterior:
    sigma_sq = np.asarray(sigma_sq, dtype=float)
    a_sq = np.asarray(a_sq, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if np.any(sigma_sq <= 0) or np.any(a_sq <= 0):
        raise ValueError("sigma_sq and a_sq must be positive")
    if np.any((pi < 0) | (pi > 1)):
        raise ValueError("pi must lie in [0, 1]")
    omega = expit(slab_log_odds(x, sigma_sq, pi, a_sq))
    shrink = a_sq / (a_sq + sigma_sq)
    m = shrink * x
    v = shrink * sigma_sq
    if np.ndim(omega) == 0 and np.ndim(m) == 0:
        return CoefficientPosterior(float(omega), float(m), float(v))
    return CoefficientPosterior(omega, m, np.broadcast_to(v, np.shape(m)))


def posterior_mean(cp: CoefficientPosterior):
    return cp.omega * cp.m


def posterior_second_moment(cp: CoefficientPosterior):
    return cp.omega * (cp.m ** 2 + cp.v)


def posterior_median(cp: CoefficientPosterior):
    """Median of ``omega N(m, v) + (1-omega) delta_0``.

    Zero whenever neither side of the atom carries more than half the mass;
    otherwise the Gaussian quantile on the heavy side after discounting the
    atom.  Elements where the analytic path is not finite go through
    :func:`median_by_bisection`.
    """
    omega = np.asarray(cp.omega, dtype=float)
    m = np.asarray(cp.m, dtype=float)
    sd = np.sqrt(np.asarray(cp.v, dtype=float))
    omega, m, sd = np.broadcast_arrays(omega, m, sd)
    shape = omega.shape
    omega, m, sd = (np.atleast_1d(a).ravel() for a in (omega, m, sd))
    below = omega * ndtr(-m / sd)  # mass strictly below 0
    above = omega * ndtr(m / sd)  # mass strictly above 0
    out = np.zeros(omega.shape)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        shift = sd * ndtri(0.5 / omega)
    neg = below > 0.5
    pos = above > 0.5
    out[neg] = (m + shift)[neg]
    out[pos] = (m - shift)[pos]
    bad = (neg | pos) & ~np.isfinite(out)
    for i in np.flatnonzero(bad):
        out[i] = median_by_bisection(CoefficientPosterior(omega[i], m[i], sd[i] ** 2))
    return float(out[0]) if shape == () else out.reshape(shape)


def posterior_cdf(cp: CoefficientPosterior, t: float) -> float:
    sd = math.sqrt(cp.v)
    return cp.omega * float(ndtr((t - cp.m) / sd)) + (1 - cp.omega) * (t >= 0)


def median_by_bisection(cp: CoefficientPosterior, tol: float = 1e-12) -> float:
    """Scalar median by bisecting the CDF; stops when the CDF residual is below ``tol``."""
    omega, m, v = float(cp.omega), float(cp.m), float(cp.v)
    sd = math.sqrt(v)
    below = omega * float(ndtr(-m / sd))
    if below <= 0.5 and below + (1 - omega) >= 0.5:
        return 0.0
    cp = CoefficientPosterior(omega, m, v)
    lo = min(0.0, m - 50 * sd) - 1.0
    hi = max(0.0, m + 50 * sd) + 1.0
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        f = posterior_cdf(cp, mid)
        if abs(f - 0.5) <= tol or hi - lo <= 4 * np.spacing(abs(mid) + 1e-300):
            return mid
        if f < 0.5:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sample_coefficient(cp: CoefficientPosterior, seed: int, size: int | None = None):
    """Posterior draw(s): slab with probability ``omega``, exact zero otherwise."""
    rng = _rng.stream(seed, _rng.POSTERIOR)
    u = rng.random(size)
    z = rng.standard_normal(size)
    draw = np.where(u < cp.omega, cp.m + math.sqrt(cp.v) * z, 0.0)
    return draw if size is not None else float(draw)


# -- whole trees -------------------------------------------------------------

_CHUNK = 1 << 20


class _TreeSampler:
    """Shared machinery for drawing whole posterior trees level by level.

    Level ``j`` draws its uniforms and normals from two streams keyed on
    ``(seed, j)``, so a sample never depends on batching.
    """

    alpha00: float
    m: np.ndarray
    v: np.ndarray

    @property
    def J_max(self) -> int:
        return (self.m.size + 1).bit_length() - 2

    def _slab_mask(self, j, u, rows, start, b):
        raise NotImplementedError

    def _row_setup(self, n_samples, seed):
        return None

    def sq_distances(self, center: CoefficientTree, n_samples: int, seed: int) -> np.ndarray:
        """``||beta - center||^2`` for ``n_samples`` posterior draws ``beta``.

        The posterior lives on levels ``0 .. J_max``; center coefficients on
        deeper levels count as pure error.
        """
        if n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        J = self.J_max
        c = center.padded(J).coeffs[: n_coeffs(J)]
        const = (self.alpha00 - center.alpha00) ** 2 + tail_energy(center, J)
        out = np.full(n_samples, const)
        rows = self._row_setup(n_samples, seed)
        for j in range(J + 1):
            sl = level_slice(j)
            width = 1 << j
            urng = _rng.stream(seed, _rng.POSTERIOR, j, 0)
            zrng = _rng.stream(seed, _rng.POSTERIOR, j, 1)
            m, sd, cj = self.m[sl], np.sqrt(self.v[sl]), c[sl]
            step = max(1, _CHUNK // width)
            for start in range(0, n_samples, step):
                b = min(step, n_samples - start)
                u = urng.random((b, width))
                z = zrng.standard_normal((b, width))
                mask = self._slab_mask(j, u, rows, start, b)
                beta = np.where(mask, m + sd * z, 0.0)
                out[start : start + b] += np.einsum("ij,ij->i", beta - cj, beta - cj)
        return out


@dataclass(frozen=True, eq=False)
class PosteriorTree(_TreeSampler):
    """Per-coefficient spike-and-slab posteriors for a whole observation."""

    alpha00: float
    omega: np.ndarray
    m: np.ndarray
    v: np.ndarray

    def coefficient(self, j: int, k: int) -> CoefficientPosterior:
        i = (1 << j) - 1 + k
        return CoefficientPosterior(float(self.omega[i]), float(self.m[i]), float(self.v[i]))

    @property
    def marginals(self) -> CoefficientPosterior:
        return CoefficientPosterior(self.omega, self.m, self.v)

    def mean_tree(self) -> CoefficientTree:
        return CoefficientTree(self.alpha00, posterior_mean(self.marginals))

    def median_tree(self) -> CoefficientTree:
        return CoefficientTree(self.alpha00, posterior_median(self.marginals))

    def expected_sq_distance(self, center: CoefficientTree) -> float:
        """Posterior expectation of ``||beta - center||^2`` in closed form."""
        J = self.J_max
        c = center.padded(J).coeffs[: n_coeffs(J)]
        per = self.omega * ((self.m - c) ** 2 + self.v) + (1 - self.omega) * c ** 2
        return float(
            (self.alpha00 - center.alpha00) ** 2 + tail_energy(center, J) + per.sum()
        )

    def level_omega(self, j: int) -> np.ndarray:
        return self.omega[level_slice(j)]

    def _slab_mask(self, j, u, rows, start, b):
        return u < self.omega[level_slice(j)]


def posterior_tree(obs: SequenceObservation, prior: SpikeSlabPrior) -> PosteriorTree:
    """Coefficientwise posterior on every observed level; ``alpha00`` is taken as known."""
    J = obs.data.J_max
    pi, a_sq = prior.level_arrays(J)
    lev = level_index(J)
    cp = coefficient_posterior(obs.data.coeffs, obs.sigma_sq, pi[lev], a_sq[lev])
    return PosteriorTree(obs.data.alpha00, cp.omega, cp.m, np.array(cp.v))


@dataclass(frozen=True, eq=False)
class SievePosterior(_TreeSampler):
    """Posterior under the sieve prior.

    ``model_weights[m]`` is the posterior probability of resolution ``m``.
    Given ``m``, levels ``j <= m`` are independent Gaussians with mean
    ``m_jk`` and variance ``v_jk`` (identical across models) and levels
    above ``m`` are zero.
    """

    alpha00: float
    model_weights: np.ndarray
    m: np.ndarray
    v: np.ndarray

    @property
    def level_inclusion(self) -> np.ndarray:
        """``P(m >= j | X)`` for each stored level ``j``."""
        tail = np.cumsum(self.model_weights[::-1])[::-1]
        J = self.J_max
        out = np.zeros(J + 1)
        top = min(J, tail.size - 1)
        out[: top + 1] = tail[: top + 1]
        return np.clip(out, 0.0, 1.0)

    @property
    def marginals(self) -> CoefficientPosterior:
        omega = self.level_inclusion[level_index(self.J_max)]
        return CoefficientPosterior(omega, self.m, self.v)

    def model_mean_tree(self, model: int) -> CoefficientTree:
        c = np.array(self.m)
        c[n_coeffs(min(model, self.J_max)):] = 0.0
        return CoefficientTree(self.alpha00, c)

    def mean_tree(self) -> CoefficientTree:
        return CoefficientTree(self.alpha00, posterior_mean(self.marginals))

    def median_tree(self) -> CoefficientTree:
        return CoefficientTree(self.alpha00, posterior_median(self.marginals))

    def expected_sq_distance(self, center: CoefficientTree) -> float:
        mg = self.marginals
        J = self.J_max
        c = center.padded(J).coeffs[: n_coeffs(J)]
        per = mg.omega * ((mg.m - c) ** 2 + mg.v) + (1 - mg.omega) * c ** 2
        return float(
            (self.alpha00 - center.alpha00) ** 2 + tail_energy(center, J) + per.sum()
        )

    def _row_setup(self, n_samples, seed):
        rng = _rng.stream(seed, _rng.POSTERIOR, 1 << 30)
        return rng.choice(self.model_weights.size, size=n_samples, p=self.model_weights)

    def _slab_mask(self, j, u, rows, start, b):
        return np.broadcast_to((rows[start : start + b] >= j)[:, None], u.shape)


def sieve_log_model_weights(obs: SequenceObservation, prior: SievePrior) -> np.ndarray:
    """Unnormalized ``log lambda_m + log p(X | m)`` for ``m = 0 .. m_max``."""
    J = obs.data.J_max
    s2 = obs.sigma_sq
    var = prior.level_variances(J)
    slab = np.array([np.sum(_log_normal_pdf(obs.data.level(j), var[j] + s2)) for j in range(J + 1)])
    null = np.array([np.sum(_log_normal_pdf(obs.data.level(j), s2)) for j in range(J + 1)])
    # log p(X | m) = sum_{j<=m} slab_j + sum_{j>m} null_j
    gain = np.cumsum(slab - null)
    loglik = np.empty(prior.m_max + 1)
    for mdl in range(prior.m_max + 1):
        loglik[mdl] = null.sum() + gain[min(mdl, J)]
    return log_sieve_weights(prior) + loglik


def sieve_posterior(obs: SequenceObservation, prior: SievePrior) -> SievePosterior:
    logw = sieve_log_model_weights(obs, prior)
    w = np.exp(logw - logsumexp(logw))
    w /= w.sum()
    J = obs.data.J_max
    var = prior.level_variances(J)[level_index(J)]
    shrink = var / (var + obs.sigma_sq)
    return SievePosterior(obs.data.alpha00, w, shrink * obs.data.coeffs, shrink * obs.sigma_sq)


@dataclass(frozen=True)
class ComplementMass:
    estimate: float | np.ndarray
    stderr: float | np.ndarray
    n_samples: int


def posterior_ball_complement_mass(
    post, center: CoefficientTree, radius_sq, n_samples: int, seed: int
) -> ComplementMass:
    """Monte Carlo ``P(||beta - center||^2 > radius_sq | X)`` with binomial standard error.

    ``radius_sq`` may be an array; all radii share the same draws.
    """
    d = post.sq_distances(center, n_samples, seed)
    r = np.asarray(radius_sq, dtype=float)
    frac = (d[:, None] > r.ravel()[None, :]).mean(axis=0).reshape(r.shape)
    se = np.sqrt(frac * (1 - frac) / n_samples)
    if r.ndim == 0:
        return ComplementMass(float(frac), float(se), n_samples)
    return ComplementMass(frac, se, n_samples)
