"""Plain-text run configuration (``key = value`` per line) and CSV data input."""
from __future__ import annotations

import math
from importlib import resources

import numpy as np

from .errors import ConfigError, NotFound
from .experiments import DEFAULT_TOLERANCES, ExperimentDesign


def _int(v):
    f = float(v)
    if not f.is_integer():
        raise ValueError(f"{v!r} is not an integer")
    return int(f)


def _floats(v):
    return tuple(float(x) for x in v.split(",") if x.strip())


# key -> converter; ``tolerance.<name>`` keys are handled separately.
SCHEMA = {
    "family": str,
    "gamma0": float,
    "theorem": str,
    "n": _int,
    "k": _int,
    "epsilon": float,
    "u": float,
    "replications": _int,
    "seed": _int,
    "alphas": _floats,
    "regularity_class": str,
    "workers": _int,
    "u_grid": _floats,
}
_TOLERANCE_KEYS = sorted({k for tol in DEFAULT_TOLERANCES.values() for k in tol})
RUN_ONLY = ("workers", "u_grid")


def parse_config(text, source="<config>"):
    """Parse ``key = value`` lines into a dict of typed values.

    ``#`` starts a comment; blank lines are skipped.  Unknown keys, repeated
    keys and unparsable values raise :class:`ConfigError` naming the line.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        if key.startswith("tolerance."):
            name = key.split(".", 1)[1]
            if name not in _TOLERANCE_KEYS:
                raise ConfigError(f"{source}:{lineno}: unknown tolerance {name!r} (known: {', '.join(_TOLERANCE_KEYS)})")
            conv = float
        elif key in SCHEMA:
            conv = SCHEMA[key]
        else:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            out[key] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    return out


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    return parse_config(text, source=str(path))


def preset_names():
    files = resources.files("tailratio").joinpath("presets")
    return sorted(p.name[:-4] for p in files.iterdir() if p.name.endswith(".cfg"))


def load_preset(name):
    """Bundled design by name, e.g. ``theorem1-weibull``."""
    name = name[:-4] if name.endswith(".cfg") else name
    res = resources.files("tailratio").joinpath("presets", f"{name}.cfg")
    if not res.is_file():
        raise NotFound(f"no preset {name!r}; available: {', '.join(preset_names())}")
    return parse_config(res.read_text(encoding="utf-8"), source=f"preset:{name}")


def design_from_mapping(cfg):
    """Build an :class:`ExperimentDesign` from parsed settings (run-only keys ignored)."""
    cfg = dict(cfg)
    for key in RUN_ONLY:
        cfg.pop(key, None)
    tolerances = {k.split(".", 1)[1]: cfg.pop(k) for k in list(cfg) if k.startswith("tolerance.")}
    missing = [k for k in ("family", "gamma0") if k not in cfg]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    return ExperimentDesign(tolerances=tolerances, **cfg)


def read_data_column(path):
    """One numeric value per line; an optional first line that is not a number is a header.

    Returns a float array.  Raises :class:`ConfigError` with the 1-based line
    number of the first malformed or non-finite entry.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read data {path!r}: {exc.strerror}") from None
    values = []
    for lineno, raw in enumerate(lines, 1):
        cell = raw.strip()
        if not cell:
            continue
        try:
            x = float(cell)
        except ValueError:
            if lineno == 1:
                continue  # header
            if "," in cell:
                raise ConfigError(f"{path}:{lineno}: expected a single column, got {raw.strip()!r}") from None
            raise ConfigError(f"{path}:{lineno}: not a number: {raw.strip()!r}") from None
        if not math.isfinite(x):
            raise ConfigError(f"{path}:{lineno}: non-finite value {raw.strip()!r}")
        values.append(x)
    if not values:
        raise ConfigError(f"{path}: no data values")
    return np.asarray(values, dtype=float)
