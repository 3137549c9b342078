"""Run configuration: a strict ``key = value`` text format.

One assignment per line, ``#`` starts a comment.  Keys are dotted
(``sampler.N``); lists are whitespace separated.  Unknown keys are errors and
every problem found is reported at once.  Example::

    experiment = mixture2d
    sampler.mode = easmh
    seed = 3
    output_dir = runs/mix-easmh-3

Anything left out gets an experiment- and mode-dependent default (see
:func:`defaults_for`).
"""

import difflib
import math
from dataclasses import dataclass, fields
from typing import Optional

from .errors import ConfigError

EXPERIMENTS = ("mixture2d", "mixture10d", "lorenz96", "custom")
MODES = ("vanilla", "asmh_original", "easmh")
METHODS = ("gradient_covariance", "posterior_covariance", "linear_regression")


def _int(v):
    return int(v)


def _float(v):
    out = float(v)
    if not math.isfinite(out):
        raise ValueError(f"{v!r} is not finite")
    return out


def _floats(v):
    out = [_float(p) for p in v.replace(",", " ").split()]
    if not out:
        raise ValueError("empty list")
    return out if len(out) > 1 else out[0]


def _choice(options):
    def parse(v):
        if v not in options:
            raise ValueError(f"{v!r} is not one of {', '.join(options)}")
        return v
    return parse


def _start(v):
    if v in ("origin", "truth", "subspace_mean"):
        return v
    return _floats(v)


def _text(v):
    return v


def _scale_or_rule(v):
    return v if v == "scott" else _float(v)


# key -> (field name, parser)
KEYS = {
    "experiment": ("experiment", _choice(EXPERIMENTS)),
    "seed": ("seed", _int),
    "output_dir": ("output_dir", _text),
    "sampler.mode": ("mode", _choice(MODES)),
    "sampler.N": ("N", _int),
    "sampler.M": ("M", _int),
    "sampler.burn_in": ("burn_in", _int),
    "sampler.proposal_scale": ("proposal_scale", _floats),
    "sampler.qz": ("qz", _choice(("standard_gaussian", "scaled_gaussian"))),
    "sampler.qz_scale": ("qz_scale", _floats),
    "sampler.qz_center": ("qz_center", _choice(("zero", "start"))),
    "sampler.x0": ("x0", _start),
    "subspace.method": ("method", _choice(METHODS)),
    "subspace.N": ("construction_N", _int),
    "subspace.active_dim": ("active_dim", _int),
    "subspace.max_active_dim": ("max_active_dim", _int),
    "subspace.construction_variance": ("construction_variance", _float),
    "subspace.file": ("subspace_file", _text),
    "lorenz96.dim": ("l96_dim", _int),
    "lorenz96.F": ("l96_forcing", _float),
    "lorenz96.t0": ("l96_t0", _float),
    "lorenz96.t1": ("l96_t1", _float),
    "lorenz96.step": ("l96_step", _float),
    "lorenz96.noise_variance": ("l96_noise_variance", _float),
    "lorenz96.prior_variance": ("l96_prior_variance", _float),
    "lorenz96.obs_stride": ("l96_obs_stride", _int),
    "lorenz96.spinup": ("l96_spinup", _float),
    "lorenz96.data_file": ("l96_data_file", _text),
    "diagnostics.max_lag": ("max_lag", _int),
    "diagnostics.thin": ("thin", _int),
    "diagnostics.kde_bandwidth": ("kde_bandwidth", _scale_or_rule),
}
FIELD_TO_KEY = {f: k for k, (f, _) in KEYS.items()}
REQUIRED = ("experiment", "output_dir")


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    output_dir: str
    seed: int = 0
    mode: str = "easmh"
    N: int = 500
    M: int = 10
    burn_in: int = 0
    proposal_scale: object = 1.0
    qz: str = "scaled_gaussian"
    qz_scale: object = 1.0
    qz_center: str = "zero"
    x0: object = "origin"
    method: str = "linear_regression"
    construction_N: int = 500
    active_dim: Optional[int] = None
    max_active_dim: Optional[int] = None
    construction_variance: float = 10.0
    subspace_file: Optional[str] = None
    l96_dim: int = 36
    l96_forcing: float = 8.0
    l96_t0: float = 0.0
    l96_t1: float = 10.0
    l96_step: float = 0.01
    l96_noise_variance: float = 0.1
    l96_prior_variance: float = 4.0
    l96_obs_stride: int = 1
    l96_spinup: float = 5.0
    l96_data_file: Optional[str] = None
    max_lag: int = 50
    thin: int = 10
    kde_bandwidth: object = 1.0

    def to_dict(self):
        return {FIELD_TO_KEY[f.name]: getattr(self, f.name) for f in fields(self)
                if getattr(self, f.name) is not None}

    def to_text(self):
        """Config text that :func:`parse_config` maps back to this config."""
        lines = []
        for key, value in self.to_dict().items():
            if isinstance(value, (list, tuple)):
                value = " ".join(repr(float(v)) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    def replace(self, **changes):
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update(changes)
        return RunConfig(**data)


def defaults_for(experiment, mode):
    """Defaults that reproduce the published experiment setups."""
    vanilla = mode == "vanilla"
    out = {
        "mode": mode,
        "N": 5500 if vanilla else 500,
        "M": 10,
        "construction_N": 500,
    }
    if experiment in ("mixture2d", "mixture10d", "custom"):
        out.update(
            burn_in=500 if vanilla else 0,
            proposal_scale=1.0,
            method="linear_regression",
            construction_variance=10.0,
            qz="scaled_gaussian",
            qz_scale=math.sqrt(10.0),
            qz_center="zero",
            x0="origin",
            max_lag=50,
            thin=10,
            kde_bandwidth=1.0,
        )
        if experiment == "mixture10d":
            # the inactive conditionals are close to N(0, I) here
            out.update(qz="standard_gaussian", qz_scale=1.0, max_lag=13)
    else:
        out.update(
            burn_in=0,
            proposal_scale=0.002,
            method="posterior_covariance",
            qz="scaled_gaussian",
            qz_scale=0.002,
            qz_center="start",
            x0="truth",
            max_lag=50,
            thin=10,
            kde_bandwidth="scott",
        )
    return out


def _suggest(key):
    section = key.split(".")[0] + "." if "." in key else ""
    close = difflib.get_close_matches(key, KEYS, n=1)
    known = [k for k in KEYS if section and k.startswith(section)]
    hint = f"; did you mean {close[0]!r}?" if close else ""
    if known:
        hint += f" (known {section}* keys: {', '.join(known)})"
    return f"unknown key {key!r}{hint}"


def parse_config(text):
    """Parse and validate a run configuration.

    Raises :class:`ConfigError` listing every problem found.
    """
    errors = []
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        if key not in KEYS:
            errors.append(_suggest(key))
            continue
        if key in raw:
            errors.append(f"line {lineno}: duplicate key {key!r}")
            continue
        raw[key] = value

    for key in REQUIRED:
        if key not in raw:
            errors.append(f"missing required key {key!r}")

    parsed = {}
    for key, value in raw.items():
        name, parser = KEYS[key]
        try:
            parsed[name] = parser(value)
        except ValueError as exc:
            errors.append(f"{key}: {exc}")
    if errors and ("experiment" not in parsed):
        raise ConfigError(errors)

    values = defaults_for(parsed.get("experiment", "mixture2d"), parsed.get("mode", "easmh"))
    values.update(parsed)

    def bad(key, message):
        errors.append(f"{key}: {message}")

    for name, key in (("N", "sampler.N"), ("construction_N", "subspace.N")):
        if name in values and values[name] < 1:
            bad(key, "must be >= 1")
    if values.get("M", 1) < 1:
        bad("sampler.M", "M must be >= 1")
    if values.get("burn_in", 0) < 0:
        bad("sampler.burn_in", "must be >= 0")
    if values.get("N", 1) <= values.get("burn_in", 0):
        bad("sampler.burn_in", "must be smaller than sampler.N")
    for name in ("proposal_scale", "qz_scale"):
        v = values.get(name)
        if v is not None and min(v if isinstance(v, list) else [v]) <= 0:
            bad(FIELD_TO_KEY[name], "must be positive")
    for name in ("active_dim", "max_active_dim", "l96_obs_stride", "thin", "max_lag"):
        if values.get(name) is not None and values[name] < 1:
            bad(FIELD_TO_KEY[name], "must be >= 1")
    if values.get("construction_variance", 1.0) <= 0:
        bad("subspace.construction_variance", "must be positive")
    if isinstance(values.get("kde_bandwidth"), float) and values["kde_bandwidth"] <= 0:
        bad("diagnostics.kde_bandwidth", "must be positive")
    if values.get("experiment") == "lorenz96":
        if values.get("l96_dim", 36) < 4:
            bad("lorenz96.dim", "must be >= 4")
        if values.get("l96_step", 1.0) <= 0:
            bad("lorenz96.step", "must be positive")
        if values.get("l96_t1", 1.0) <= values.get("l96_t0", 0.0):
            bad("lorenz96.t1", "must exceed lorenz96.t0")
        for name in ("l96_noise_variance", "l96_prior_variance"):
            if values.get(name, 1.0) <= 0:
                bad(FIELD_TO_KEY[name], "must be positive")
    elif values.get("x0") == "truth":
        bad("sampler.x0", "'truth' is only available for lorenz96")

    if errors:
        raise ConfigError(errors)
    return RunConfig(**values)


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())
