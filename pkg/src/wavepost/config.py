"""Flat ``key = value`` experiment configuration with ``[section]`` headers.

Keys may appear without a section header when their name is unique across
sections.  Every value is type-checked and range-checked; problems are
reported with the offending line number.  :func:`format_config` writes a
fully resolved configuration that :func:`parse_config` reads back unchanged.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .besov import TRUTH_KINDS, BesovIndex, TruthSpec, validate_besov
from .lab import DEFAULT_M_SWEEP, ExperimentConfig
from .priors import SievePrior, SpikeSlabPrior, choose_alpha
from .wavelets import get_filter

PRIOR_KINDS = ("spike-slab", "sieve")
SIGNALS = ("blocks", "bumps", "doppler", "heavisine")
AUTO = "auto"


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


# -- value types -------------------------------------------------------------


def _real(text):
    v = float(text)
    if math.isnan(v):
        raise ValueError("nan is not allowed")
    return v


def _integer(text):
    return int(text)


def _int_list(text):
    text = text.strip()
    m = re.fullmatch(r"2\^(\d+)\s*\.\.\s*2\^(\d+)", text)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        return tuple(2**k for k in range(lo, hi + 1))
    return tuple(int(t) for t in text.split(",") if t.strip())


def _real_list(text):
    return tuple(_real(t) for t in text.split(",") if t.strip())


def _alpha(text):
    return AUTO if text.strip() == AUTO else _real(text)


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text

    return parse


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return "inf" if math.isinf(value) and value > 0 else repr(value)
    return str(value)


def _positive(v):
    return v > 0


def _at_least(k):
    return lambda v: v >= k


# section -> key -> (parser, default, check, description)
SCHEMA = {
    "besov": {
        "s": (_real, 1.0, None, "smoothness"),
        "p": (_real, 2.0, None, "integrability, 1 <= p <= inf"),
        "q": (_real, 2.0, None, "fine index, 1 <= q <= inf"),
        "B": (_real, 1.0, _positive, "ball radius"),
    },
    "truth": {
        "kind": (_choice(*TRUTH_KINDS), "level-uniform", None, "truth generator"),
        "margin": (_real, 0.1, lambda v: 0 < v < 1, "norm sits at (1 - margin) B"),
        "J_max": (_integer, 20, _at_least(0), "deepest truth level"),
        "decay": (_real, 0.01, _positive, "extra level decay"),
        "signal": (_choice(*SIGNALS), "doppler", None, "test signal for dwt-of-signal"),
        "wavelet": (_choice("haar", "d4"), "d4", None, "filter for dwt-of-signal"),
        "alpha00": (_real, 0.0, None, "scaling coefficient"),
    },
    "prior": {
        "kind": (_choice(*PRIOR_KINDS), "spike-slab", None, "prior family"),
        "alpha": (_alpha, AUTO, lambda v: v == AUTO or v > 1, "slab variance decay, > 1, or auto"),
        "gamma": (_real, 0.5, _at_least(0), "inclusion decay"),
        "c_a": (_real, 1.0, _positive, "slab variance scale"),
        "c_pi": (_real, 1.0, lambda v: 0 < v <= 1, "inclusion scale in (0, 1]"),
        "mu": (_real, 1.0, _positive, "sieve weight decay"),
        "m_max": (_integer, 24, _at_least(0), "deepest sieve model"),
    },
    "experiment": {
        "n_grid": (_int_list, tuple(2**k for k in range(8, 19)), None, "sample sizes"),
        "replicates": (_integer, 20, _at_least(1), "replicates per n"),
        "M": (_real, 1.0, _positive, "contraction radius multiplier"),
        "M_sweep": (_real_list, DEFAULT_M_SWEEP, lambda v: len(v) > 0 and min(v) > 0, "extra multipliers"),
        "posterior_samples": (_integer, 64, _at_least(0), "posterior draws per replicate"),
        "slope_tol": (_real, 0.12, _positive, "slope tolerance"),
    },
    "prior_mass": {
        "n_grid": (_int_list, tuple(2**k for k in range(8, 15)), None, "sample sizes"),
        "n_mc": (_integer, 20000, _at_least(1), "importance samples per n"),
    },
    "simulate": {
        "n": (_integer, 1024, _at_least(1), "sample size"),
    },
    "run": {
        "seed": (_integer, 0, _at_least(0), "root seed"),
    },
}


def _check_grid(v):
    return len(v) > 0 and v[0] >= 2 and all(b > a for a, b in zip(v, v[1:]))


_GRID_MSG = "must be a non-empty, strictly increasing list of integers >= 2"


@dataclass(frozen=True)
class Config:
    """Resolved configuration: ``values[section][key]``."""

    values: dict

    def __getitem__(self, section):
        return self.values[section]

    def __eq__(self, other):
        return isinstance(other, Config) and self.values == other.values

    def with_seed(self, seed: int) -> "Config":
        values = {sec: dict(kv) for sec, kv in self.values.items()}
        values["run"]["seed"] = int(seed)
        return Config(values)

    # -- domain objects ------------------------------------------------------

    def besov(self) -> BesovIndex:
        b = self["besov"]
        return BesovIndex(b["s"], b["p"], b["q"], b["B"])

    def truth_spec(self) -> TruthSpec:
        t = self["truth"]
        return TruthSpec(
            t["kind"], self.besov(), t["margin"], t["J_max"], t["decay"], t["signal"],
            get_filter(t["wavelet"]).name, t["alpha00"],
        )

    def alpha(self) -> float:
        a = self["prior"]["alpha"]
        return choose_alpha(self["besov"]["s"], self["besov"]["p"]) if a == AUTO else a

    def prior(self):
        p = self["prior"]
        if p["kind"] == "sieve":
            return SievePrior(p["mu"], self.alpha(), p["m_max"])
        return SpikeSlabPrior(self.alpha(), p["gamma"], p["c_a"], p["c_pi"], J_max=64)

    def experiment(self) -> ExperimentConfig:
        e = self["experiment"]
        return ExperimentConfig(
            besov=self.besov(),
            truth=self.truth_spec(),
            n_grid=e["n_grid"],
            prior=self.prior(),
            replicates=e["replicates"],
            M=e["M"],
            M_sweep=e["M_sweep"],
            posterior_samples=e["posterior_samples"],
            seed=self["run"]["seed"],
            slope_tol=e["slope_tol"],
        )


def default_config() -> Config:
    return Config({sec: {k: spec[1] for k, spec in keys.items()} for sec, keys in SCHEMA.items()})


def _owners(key):
    return [sec for sec, keys in SCHEMA.items() if key in keys]


def parse_config(text: str) -> Config:
    """Parse and validate configuration text; missing keys take their defaults."""
    values = default_config().values
    where = {}  # (section, key) -> line number
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[\s*([A-Za-z_-]+)\s*\]", line)
        if m:
            section = m.group(1).replace("-", "_")
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{m.group(1)}]; known: {', '.join(SCHEMA)}", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, val = (part.strip() for part in line.split("=", 1))
        if section is None:
            owners = _owners(key)
            if not owners:
                raise ConfigError(f"unknown key {key!r}", lineno)
            if len(owners) > 1:
                raise ConfigError(
                    f"key {key!r} is ambiguous (in {', '.join(owners)}); put it under a [section]", lineno
                )
            sec = owners[0]
        else:
            sec = section
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", lineno)
        if (sec, key) in where:
            raise ConfigError(f"duplicate key {key!r} (first set on line {where[sec, key]})", lineno)
        parser, _, check, desc = SCHEMA[sec][key]
        try:
            v = parser(val)
        except ValueError as err:
            raise ConfigError(f"bad value {val!r} for {key}: {err}", lineno) from None
        if check is not None and not check(v):
            raise ConfigError(f"{key} = {val} out of range ({desc})", lineno)
        if parser is _int_list and not _check_grid(v):
            raise ConfigError(f"{key} {_GRID_MSG}", lineno)
        values[sec][key] = v
        where[sec, key] = lineno

    b = values["besov"]
    # p and q first, so a bad p is not reported as a bad s
    for culprit, args in (("p", (1.0, b["p"], 2.0)), ("q", (1.0, 2.0, b["q"])), ("s", (b["s"], b["p"], b["q"]))):
        try:
            validate_besov(*args)
        except ValueError as err:
            raise ConfigError(str(err), where.get(("besov", culprit))) from None
    return Config(values)


def format_config(cfg: Config) -> str:
    """Every key of every section, one per line, in schema order."""
    lines = []
    for sec, keys in SCHEMA.items():
        lines.append(f"[{sec}]")
        for key in keys:
            lines.append(f"{key} = {_fmt(cfg[sec][key])}")
        lines.append("")
    return "\n".join(lines)


def config_as_json(cfg: Config) -> dict:
    """JSON-friendly copy (tuples become lists, infinities become strings)."""

    def conv(v):
        if isinstance(v, tuple):
            return [conv(x) for x in v]
        if isinstance(v, float) and math.isinf(v):
            return "inf"
        return v

    return {sec: {k: conv(v) for k, v in kv.items()} for sec, kv in cfg.values.items()}


def apply_overrides(cfg: Config, pairs) -> Config:
    """Apply ``key=value`` or ``section.key=value`` overrides and revalidate."""
    values = {sec: dict(kv) for sec, kv in cfg.values.items()}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not key=value")
        name, val = (part.strip() for part in pair.split("=", 1))
        if "." in name:
            sec, key = name.split(".", 1)
            if sec not in SCHEMA or key not in SCHEMA[sec]:
                raise ConfigError(f"unknown override key {name!r}")
        else:
            owners = _owners(name)
            if len(owners) != 1:
                what = "unknown" if not owners else "ambiguous"
                raise ConfigError(f"{what} override key {name!r}; use section.key")
            sec, key = owners[0], name
        # reuse the file parser so overrides get identical checks
        one = parse_config(f"[{sec}]\n{key} = {val}")
        values[sec][key] = one[sec][key]
    return parse_config(format_config(Config(values)))
