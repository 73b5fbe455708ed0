"""Monte Carlo contraction experiments and rate bookkeeping."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .besov import BesovIndex, TruthSpec, make_truth, tail_energy
from .posterior import posterior_tree, sieve_posterior
from .priors import (
    SievePrior,
    SpikeSlabPrior,
    choose_alpha,
    prior_mass_probe,
)
from .sequence_model import (
    CoefficientTree,
    l2_distance_sq,
    observation_depth,
    simulate_observation,
)

WORKERS_ENV = "WAVEPOST_WORKERS"
DEFAULT_M_SWEEP = (0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class RateQuantities:
    eps_n_sq: float
    tau_n: float
    J: int
    exponent: float
    alpha: float


def rate_exponent(s: float, p: float) -> float:
    """Exponent of ``n`` in the squared contraction rate."""
    if p >= 2:
        return 2 * s / (2 * s + 1)
    return (2 * s + 1 - 2 / p) / (2 * s + 2 - 2 / p)


def theoretical_rate(idx: BesovIndex, n: int, alpha: float | None = None) -> RateQuantities:
    """``eps_n^2 = (ln n)^2 n^-exponent`` together with ``tau_n`` and ``J = floor(log2(n) / alpha)``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    s, p = idx.s, idx.p
    exponent = rate_exponent(s, p)
    if p >= 2:
        tau = n ** (-(s + 0.5 - 1 / p) / (2 * s + 1))
    else:
        tau = n ** (-s / (2 * s + 2 - 2 / p))
    alpha = choose_alpha(s, p) if alpha is None else alpha
    # small guard so exact powers of two do not floor one level short
    J = int(math.floor(math.log2(n) / alpha + 1e-12))
    return RateQuantities(math.log(n) ** 2 * n ** -exponent, tau, J, exponent, alpha)


def fit_rate_slope(ns, losses) -> tuple[float, float, float]:
    """OLS of ``log loss`` on ``log n``; returns ``(slope, intercept, rms residual)``."""
    ns = np.asarray(ns, dtype=float)
    losses = np.asarray(losses, dtype=float)
    if ns.shape != losses.shape or ns.ndim != 1:
        raise ValueError("ns and losses must be 1-d sequences of equal length")
    if ns.size < 3:
        raise ValueError("need at least 3 points to fit a slope")
    if np.any(losses <= 0) or np.any(ns <= 0):
        raise ValueError("losses and sample sizes must be positive")
    x, y = np.log(ns), np.log(losses)
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid ** 2)))


# -- contraction experiment ----------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    besov: BesovIndex
    truth: TruthSpec
    n_grid: tuple[int, ...]
    prior: SpikeSlabPrior | SievePrior
    replicates: int = 20
    M: float = 1.0
    M_sweep: tuple[float, ...] = DEFAULT_M_SWEEP
    posterior_samples: int = 64
    seed: int = 0
    slope_tol: float = 0.12

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        if len(grid) == 0 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("n_grid must be non-empty and strictly increasing")
        if grid[0] < 2:
            raise ValueError("n_grid entries must be >= 2")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.posterior_samples < 0:
            raise ValueError("posterior_samples must be >= 0")
        object.__setattr__(self, "n_grid", grid)
        object.__setattr__(self, "M_sweep", tuple(float(m) for m in self.M_sweep))

    @property
    def radii_multipliers(self) -> tuple[float, ...]:
        return tuple(sorted(set(self.M_sweep) | {float(self.M)}))


@dataclass(frozen=True)
class RateRecord:
    n: int
    eps_sq: float
    J: int
    J_data: int
    loss_mean: float
    loss_mean_se: float
    loss_median: float
    loss_median_se: float
    expected_loss: float
    sampled_loss: float
    complement_mass: float
    complement_mass_se: float
    complement_sweep: dict = field(default_factory=dict)  # M -> (mass, se)
    truncation_bias: float = 0.0
    truncation_flag: bool = False


@dataclass(frozen=True)
class RateExperimentResult:
    records: list[RateRecord]
    slope: float
    intercept: float
    residual: float
    median_slope: float
    exponent_theoretical: float
    slope_tol: float
    replicate_losses: np.ndarray = field(repr=False)  # shape (len(n_grid), replicates, 4)

    @property
    def target_slope(self) -> float:
        return -self.exponent_theoretical

    @property
    def passed(self) -> bool:
        return abs(self.slope - self.target_slope) <= self.slope_tol


def _replicate(truth, prior, n, seed, radii, posterior_samples):
    """One (n, replicate) cell: losses plus complement fractions at each radius."""
    obs = simulate_observation(truth, n, seed)
    if isinstance(prior, SievePrior):
        post = sieve_posterior(obs, prior)
    else:
        post = posterior_tree(obs, prior)
    loss_mean = l2_distance_sq(post.mean_tree(), truth)
    loss_median = l2_distance_sq(post.median_tree(), truth)
    expected = post.expected_sq_distance(truth)
    if posterior_samples:
        d = post.sq_distances(truth, posterior_samples, _rng.child_seed(seed, _rng.POSTERIOR))
        frac = (d[:, None] > np.asarray(radii)[None, :]).mean(axis=0)
        sampled = float(d.mean())
    else:
        frac = np.full(len(radii), np.nan)
        sampled = math.nan
    return np.concatenate([[loss_mean, loss_median, expected, sampled], frac])


def _worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    if x.size < 2:
        return float(x.mean()), math.nan
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def experiment_truth(cfg: ExperimentConfig) -> CoefficientTree:
    return make_truth(cfg.truth, _rng.child_seed(cfg.seed, _rng.TRUTH))


def run_contraction_experiment(
    cfg: ExperimentConfig, workers: int | None = None, truth: CoefficientTree | None = None
) -> RateExperimentResult:
    """Simulate, compute posteriors and record losses over ``n_grid x replicates``.

    Each cell has its own seed derived from ``(seed, n, replicate)`` and the
    table is assembled in grid order, so results do not depend on
    ``workers``.
    """
    if truth is None:
        truth = experiment_truth(cfg)
    workers = _worker_count() if workers is None else workers
    rates = [theoretical_rate(cfg.besov, n, getattr(cfg.prior, "alpha", None)) for n in cfg.n_grid]
    multipliers = cfg.radii_multipliers
    jobs = []
    for n, rq in zip(cfg.n_grid, rates):
        radii = [mult * rq.eps_n_sq for mult in multipliers]
        for r in range(cfg.replicates):
            seed = _rng.child_seed(cfg.seed, _rng.EXPERIMENT, n, r)
            jobs.append((truth, cfg.prior, n, seed, radii, cfg.posterior_samples))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_replicate, *zip(*jobs)))
    else:
        rows = [_replicate(*job) for job in jobs]
    table = np.array(rows).reshape(len(cfg.n_grid), cfg.replicates, -1)

    records = []
    i_main = multipliers.index(float(cfg.M))
    for i, (n, rq) in enumerate(zip(cfg.n_grid, rates)):
        cell = table[i]
        lm, lm_se = _mean_se(cell[:, 0])
        lmed, lmed_se = _mean_se(cell[:, 1])
        sweep = {}
        for k, mult in enumerate(multipliers):
            frac = cell[:, 4 + k]
            mass, se = _mean_se(frac)
            if cfg.replicates < 2 and cfg.posterior_samples:
                se = math.sqrt(mass * (1 - mass) / cfg.posterior_samples)
            sweep[mult] = (mass, se)
        J_data = observation_depth(n)
        bias = tail_energy(truth, J_data)
        records.append(
            RateRecord(
                n=n,
                eps_sq=rq.eps_n_sq,
                J=rq.J,
                J_data=J_data,
                loss_mean=lm,
                loss_mean_se=lm_se,
                loss_median=lmed,
                loss_median_se=lmed_se,
                expected_loss=float(cell[:, 2].mean()),
                sampled_loss=float(cell[:, 3].mean()),
                complement_mass=sweep[multipliers[i_main]][0],
                complement_mass_se=sweep[multipliers[i_main]][1],
                complement_sweep=sweep,
                truncation_bias=bias,
                truncation_flag=bias > rq.eps_n_sq / 10,
            )
        )

    ns = [r.n for r in records]
    if len(ns) >= 3:
        slope, intercept, resid = fit_rate_slope(ns, [r.loss_mean for r in records])
        med_slope = fit_rate_slope(ns, [r.loss_median for r in records])[0]
    else:
        slope = intercept = resid = med_slope = math.nan
    return RateExperimentResult(
        records=records,
        slope=slope,
        intercept=intercept,
        residual=resid,
        median_slope=med_slope,
        exponent_theoretical=rates[0].exponent,
        slope_tol=cfg.slope_tol,
        replicate_losses=table[:, :, :4],
    )


def complement_nonincreasing(records, multiplier: float, n_se: float = 2.0) -> bool:
    """True when no complement mass rises by more than ``n_se`` combined standard errors."""
    for a, b in zip(records, records[1:]):
        ma, sa = a.complement_sweep[multiplier]
        mb, sb = b.complement_sweep[multiplier]
        sa = 0.0 if not np.isfinite(sa) else sa
        sb = 0.0 if not np.isfinite(sb) else sb
        if mb > ma + n_se * math.hypot(sa, sb):
            return False
    return True


# -- deterministic probes ------------------------------------------------------


def prior_tail_expectation(prior: SpikeSlabPrior, J: int) -> float:
    """``E sum_{j>J,k} beta_jk^2 = sum_{j>J} 2^j pi_j a_j^2`` summed in closed form."""
    if not prior.alpha > 1:
        raise ValueError("alpha must exceed 1 for the tail sum to converge")
    # c_pi <= 1, so pi_j = c_pi 2^(-gamma j) at every level and the sum is geometric
    ratio = 2.0 ** (1 - prior.alpha - prior.gamma)
    return prior.c_a * prior.c_pi * ratio ** (J + 1) / (1 - ratio)


@dataclass(frozen=True)
class TailRow:
    n: int
    J: int
    eps_sq: float
    prior_tail: float
    ratio: float  # 8 E[tail] / eps^2
    truth_tail: float
    truth_tail_ok: bool


def lemma2_tail_report(
    prior: SpikeSlabPrior, idx: BesovIndex, n_grid, truth: CoefficientTree | None = None
) -> list[TailRow]:
    """Prior tail expectation beyond ``J`` against ``eps_n^2`` along ``n_grid``."""
    if not prior.alpha > 1:
        raise ValueError("alpha must exceed 1")
    rows = []
    for n in n_grid:
        rq = theoretical_rate(idx, n, prior.alpha)
        e = prior_tail_expectation(prior, rq.J)
        tt = tail_energy(truth, rq.J) if truth is not None else math.nan
        rows.append(
            TailRow(n, rq.J, rq.eps_n_sq, e, 8 * e / rq.eps_n_sq, tt, bool(tt <= rq.eps_n_sq / 8))
        )
    return rows


@dataclass(frozen=True)
class PriorMassRow:
    n: int
    eps_sq: float
    J: int
    log_mass: float
    stderr: float
    ratio: float  # -log_mass / (n eps^2)
    ess: float


def prior_mass_table(prior, truth: CoefficientTree, idx: BesovIndex, n_grid, n_mc=20000, seed=0, strict=True):
    """Small-ball prior mass at radius ``eps_n`` on levels ``j <= J`` for each ``n``."""
    rows = []
    for n in n_grid:
        rq = theoretical_rate(idx, n, prior.alpha)
        est = prior_mass_probe(
            prior, truth, rq.eps_n_sq, rq.J, n_mc, _rng.child_seed(seed, _rng.PROBE, n), strict
        )
        rows.append(
            PriorMassRow(
                n, rq.eps_n_sq, rq.J, float(est.log_mass), float(est.stderr),
                float(-est.log_mass / (n * rq.eps_n_sq)), float(est.ess),
            )
        )
    return rows
