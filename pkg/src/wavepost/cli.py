"""``wavepost`` command line: simulate, denoise, rate, prior-mass, check."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import _rng
from .besov import BesovIndex, make_truth
from .checks import format_table, run_checks
from .config import ConfigError, apply_overrides, config_as_json, default_config, format_config, parse_config
from .lab import (
    WORKERS_ENV,
    complement_nonincreasing,
    experiment_truth,
    prior_mass_table,
    run_contraction_experiment,
)
from .posterior import posterior_tree
from .priors import SpikeSlabPrior, choose_alpha
from .sequence_model import CoefficientTree, SequenceObservation, simulate_observation
from .wavelets import forward_dwt, get_filter, inverse_dwt, read_signal, write_signal


class CliError(Exception):
    pass


# -- output helpers -----------------------------------------------------------


def _num(v):
    """CSV cell: shortest round-trip float text, ``nan``/``inf`` spelled out."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8", newline="")
    except OSError as err:
        raise CliError(f"cannot write {path}: {err.strerror}") from None


def write_csv(path: Path, header, rows) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_num(v) for v in row])
    except OSError as err:
        raise CliError(f"cannot write {path}: {err.strerror}") from None


def write_json(path: Path, obj) -> None:
    _write_text(path, json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n")


def _out_dir(path) -> Path:
    d = Path(path)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise CliError(f"cannot create output directory {d}: {err.strerror}") from None
    return d


def load_config(args):
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as err:
            raise CliError(f"cannot read config {args.config}: {err.strerror}") from None
        try:
            cfg = parse_config(text)
        except ConfigError as err:
            raise ConfigError(f"{args.config}: {err}") from None
    else:
        cfg = default_config()
    cfg = apply_overrides(cfg, args.set or [])
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _emit_config(d: Path, cfg) -> None:
    _write_text(d / "config.txt", format_config(cfg))


# -- subcommands ----------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = load_config(args)
    seed = cfg["run"]["seed"]
    n = args.n if args.n is not None else cfg["simulate"]["n"]
    if args.truth:
        try:
            truth = CoefficientTree.from_text(Path(args.truth).read_text(encoding="utf-8"))
        except OSError as err:
            raise CliError(f"cannot read truth {args.truth}: {err.strerror}") from None
    else:
        truth = make_truth(cfg.truth_spec(), _rng.child_seed(seed, _rng.TRUTH))
    obs = simulate_observation(truth, n, _rng.child_seed(seed, _rng.OBSERVATION, n))
    _write_text(Path(args.out), obs.data.to_text())
    if args.truth_out:
        _write_text(Path(args.truth_out), truth.to_text())
    print(f"wrote observation (n={n}, levels 0..{obs.data.J_max}) to {args.out}")
    return 0


def cmd_denoise(args) -> int:
    x = _read_signal(args.input)
    size = x.size
    if size < 2 or size & (size - 1):
        raise CliError(f"{args.input}: signal length {size} is not a power of two >= 2")
    idx = BesovIndex(args.s, args.p, args.q)
    n = size if args.n is None else args.n
    if n < 1:
        raise CliError("--n must be >= 1")
    f = get_filter(args.wavelet)
    alpha = choose_alpha(idx.s, idx.p)
    prior = SpikeSlabPrior(alpha, args.gamma, args.c_a, args.c_pi, J_max=64)
    # orthonormal transform scaled so sample noise of unit variance becomes 1/size per coefficient
    scale = math.sqrt(size)
    coeffs = forward_dwt(x, f) * (1.0 / scale)
    post = posterior_tree(SequenceObservation(coeffs, n), prior)
    est = post.mean_tree() if args.estimator == "mean" else post.median_tree()
    y = inverse_dwt(est, f) * scale
    try:
        write_signal(args.out, y)
    except OSError as err:
        raise CliError(f"cannot write {args.out}: {err.strerror}") from None
    levels = []
    for j in range(est.J_max + 1):
        om = post.level_omega(j)
        levels.append(
            {
                "level": j,
                "omega_mean": float(om.mean()),
                "omega_min": float(om.min()),
                "omega_max": float(om.max()),
                "nonzero": int(np.count_nonzero(est.level(j))),
            }
        )
    sidecar = {
        "wavelet": f.name,
        "estimator": args.estimator,
        "n": n,
        "s": idx.s,
        "p": idx.p,
        "q": idx.q,
        "alpha": alpha,
        "gamma": args.gamma,
        "c_a": args.c_a,
        "c_pi": args.c_pi,
        "levels": levels,
    }
    side = Path(args.sidecar) if args.sidecar else Path(str(args.out) + ".json")
    write_json(side, sidecar)
    print(f"wrote {size} values to {args.out} and level summaries to {side}")
    return 0


def _read_signal(path):
    try:
        return read_signal(path)
    except OSError as err:
        raise CliError(f"cannot read {path}: {err.strerror}") from None
    except ValueError as err:
        raise CliError(f"{path}: not a one-value-per-line signal file ({err})") from None


RATE_COLUMNS = (
    "n", "eps_sq", "J", "J_data", "loss_mean", "loss_mean_se", "loss_median", "loss_median_se",
    "expected_loss", "complement_mass", "complement_mass_se",
)


def cmd_rate(args) -> int:
    cfg = load_config(args)
    exp = cfg.experiment()
    d = _out_dir(args.out_dir)
    res = run_contraction_experiment(exp)
    mults = exp.radii_multipliers
    header = list(RATE_COLUMNS)
    for m in mults:
        header += [f"complement_M{m:g}", f"complement_M{m:g}_se"]
    header += ["truncation_bias", "truncation_flag"]
    rows = []
    for r in res.records:
        row = [getattr(r, c) for c in RATE_COLUMNS]
        for m in mults:
            row += list(r.complement_sweep[m])
        row += [r.truncation_bias, r.truncation_flag]
        rows.append(row)
    write_csv(d / "rate.csv", header, rows)
    last = res.records[-1]
    summary = {
        "slope": res.slope,
        "exponent_theoretical": res.exponent_theoretical,
        "pass": res.passed,
        "target_slope": res.target_slope,
        "slope_tol": res.slope_tol,
        "intercept": res.intercept,
        "residual": res.residual,
        "median_slope": res.median_slope,
        "complement_nonincreasing": complement_nonincreasing(res.records, float(exp.M)),
        "complement_at_largest_n": {f"{m:g}": last.complement_sweep[m][0] for m in mults},
        "truncation_flagged_n": [r.n for r in res.records if r.truncation_flag],
        "config": config_as_json(cfg),
    }
    write_json(d / "summary.json", summary)
    _emit_config(d, cfg)
    verdict = "PASS" if res.passed else "FAIL"
    print(
        f"slope {res.slope:.4f} vs {res.target_slope:.4f} +/- {res.slope_tol:g}: {verdict}; "
        f"wrote {d / 'rate.csv'}"
    )
    return 0


def cmd_prior_mass(args) -> int:
    cfg = load_config(args)
    exp = cfg.experiment()
    d = _out_dir(args.out_dir)
    truth = experiment_truth(exp)
    pm = cfg["prior_mass"]
    rows = prior_mass_table(
        exp.prior, truth, exp.besov, pm["n_grid"], pm["n_mc"], cfg["run"]["seed"], strict=False
    )
    header = ["n", "eps_sq", "J", "log_mass", "stderr", "ratio", "ess"]
    write_csv(d / "prior_mass.csv", header, [[getattr(r, c) for c in header] for r in rows])
    ratios = [r.ratio for r in rows]
    finite = all(math.isfinite(x) and x > 0 for x in ratios)
    spread = max(ratios) / min(ratios) if finite else math.inf
    summary = {
        "max_over_min_ratio": spread,
        "min_ess": min(r.ess for r in rows),
        "pass": bool(finite and spread < 10 and min(r.ess for r in rows) >= 100),
        "config": config_as_json(cfg),
    }
    write_json(d / "prior_mass_summary.json", summary)
    _emit_config(d, cfg)
    print(f"max/min ratio {spread:.3f}, min ESS {summary['min_ess']:.0f}; wrote {d / 'prior_mass.csv'}")
    return 0


def cmd_check(args) -> int:
    seed = 0 if args.seed is None else args.seed
    results = run_checks(seed)
    print(format_table(results))
    return 0 if all(r.passed for r in results) else 1


# -- entry point ----------------------------------------------------------------


def _common(p, config=True):
    p.add_argument("--seed", type=int, default=None, help="root seed (default: config value, 0)")
    if config:
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument(
            "--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)"
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavepost",
        description="Bayesian wavelet shrinkage and posterior contraction experiments.",
        epilog=f"Set {WORKERS_ENV} to run replicates in parallel; results do not depend on it.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a sequence-model observation of a truth")
    _common(p)
    p.add_argument("--truth", help="truth tree file (default: generate from the config)")
    p.add_argument("--n", type=int, help="sample size (default: [simulate] n)")
    p.add_argument("--out", required=True, help="observation tree file to write")
    p.add_argument("--truth-out", help="also write the truth tree here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("denoise", help="posterior mean or median of a sampled signal")
    p.add_argument("input", help="signal file, one value per line, power-of-two length")
    p.add_argument("--out", required=True, help="denoised signal file")
    p.add_argument("--sidecar", help="JSON level summary path (default: OUT.json)")
    p.add_argument("--wavelet", choices=("haar", "d4"), default="d4")
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--n", type=int, help="noise level 1/n per coefficient (default: signal length)")
    p.add_argument("--estimator", choices=("mean", "median"), default="median")
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--c-a", dest="c_a", type=float, default=1.0)
    p.add_argument("--c-pi", dest="c_pi", type=float, default=1.0)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("rate", help="contraction-rate experiment -> rate.csv, summary.json")
    _common(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("prior-mass", help="prior small-ball mass along n -> prior_mass.csv")
    _common(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_prior_mass)

    p = sub.add_parser("check", help="run numeric inequality probes; nonzero exit on failure")
    _common(p, config=False)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"wavepost: config error: {err}", file=sys.stderr)
        return 2
    except (CliError, ValueError) as err:
        print(f"wavepost: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
