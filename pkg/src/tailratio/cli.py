"""Command-line front end.

``tailratio test``        log-LR test on a one-column data file
``tailratio experiment``  Monte Carlo reproduction from flags, a config file or a preset
``tailratio inspect``     asymptotic quantities and regularity diagnostics at a design point

Exit codes: 0 success, 2 input or configuration error, 3 domain or numerical error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys

from .asymptotics import (
    centering_H,
    intermediate_quantile,
    laplace_tail,
    local_step,
    regularity_report,
    surrogate_quantile,
    von_mises_parts,
)
from .config import design_from_mapping, load_config, load_preset, read_data_column
from .errors import ConfigError, DegenerateStep, DomainError, NotFound, NumericalError, TailRatioError
from .experiments import run_experiment, size_power_table
from .families import FAMILY_NAMES, builtin_family
from .likelihood import TopKSample, log_lr

EXIT_OK, EXIT_INPUT, EXIT_DOMAIN = 0, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on its own; route through main so stdout stays clean.
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def sanitize(obj, path="", reasons=None):
    """Replace non-finite floats by ``None`` and record why in ``reasons``."""
    if reasons is None:
        reasons = {}
    if isinstance(obj, dict):
        return {k: sanitize(v, f"{path}.{k}" if path else str(k), reasons) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v, f"{path}[{i}]", reasons) for i, v in enumerate(obj)]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        reasons[path] = f"non-finite value ({obj})"
        return None
    return obj


def emit(payload, out=None):
    reasons = {}
    clean = sanitize(payload, reasons=reasons)
    if reasons:
        clean["null_reasons"] = reasons
    text = json.dumps(clean, indent=2, allow_nan=False)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _add_common(p):
    p.add_argument("--family", choices=FAMILY_NAMES)
    p.add_argument("--gamma0", type=float)
    p.add_argument("--n", type=int)
    rate = p.add_mutually_exclusive_group()
    rate.add_argument("--k", type=int)
    rate.add_argument("--epsilon", type=float)
    p.add_argument("--u", type=float)
    p.add_argument("--class", dest="regularity_class", choices=("TypeA", "TypeB"))
    p.add_argument("--out", help="write JSON here instead of stdout")


def build_parser():
    parser = _Parser(prog="tailratio", description="Top-k likelihood ratio tests for light-tailed families.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("test", help="run the log-LR test on a data file")
    p.add_argument("data", help="one numeric value per line, optional header line")
    _add_common(p)
    p.add_argument("--alpha", type=float, default=0.05)

    p = sub.add_parser("experiment", help="Monte Carlo reproduction of a limit law")
    _add_common(p)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", help="key = value design file")
    src.add_argument("--preset", help="bundled design, e.g. theorem1-weibull")
    p.add_argument("--theorem", choices=("T1", "T2", "L3"))
    p.add_argument("--alpha", type=float, action="append", dest="alphas", help="repeatable")
    p.add_argument("--seed", type=int)
    p.add_argument("--replications", type=int)
    p.add_argument("--workers", type=int, help="worker processes (default: all cores)")
    p.add_argument("--u-grid", help="comma-separated u values for a size/power table")
    p.add_argument("--raw-csv", help="dump per-replication statistics here")

    p = sub.add_parser("inspect", help="asymptotic quantities at a design point")
    _add_common(p)
    p.add_argument("--gamma", type=float, dest="gamma_alias", help="alias of --gamma0")
    return parser


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise ConfigError(f"missing required option(s): {', '.join(missing)}")


def cmd_test(args):
    _require(args, "family", "gamma0", "k")
    u = 1.0 if args.u is None else args.u
    data = read_data_column(args.data)
    if not (1 <= args.k < data.size):
        raise ConfigError(f"k={args.k} must satisfy 1 <= k < rows={data.size}")
    if u == 0:
        raise DegenerateStep("u = 0 gives identical hypotheses; the test is undefined")
    if not (0.0 < args.alpha < 1.0):
        raise ConfigError(f"alpha must lie in (0, 1), got {args.alpha}")
    fam = builtin_family(args.family)
    sample = TopKSample.from_data(data, args.k)
    report = log_lr(fam, args.gamma0, u, sample, alpha=args.alpha, regularity_class=args.regularity_class)
    emit(report.to_dict(), args.out)


def _design_settings(args):
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = load_preset(args.preset)
    else:
        cfg = {}
    overrides = {
        "family": args.family, "gamma0": args.gamma0, "theorem": args.theorem, "n": args.n, "u": args.u,
        "seed": args.seed, "replications": args.replications, "regularity_class": args.regularity_class,
        "workers": args.workers,
    }
    if args.alphas:
        overrides["alphas"] = tuple(args.alphas)
    if args.u_grid:
        try:
            overrides["u_grid"] = tuple(float(x) for x in args.u_grid.split(",") if x.strip())
        except ValueError:
            raise ConfigError(f"bad --u-grid {args.u_grid!r}") from None
    # A rate flag on the command line replaces whichever rate the file used.
    if args.k is not None:
        cfg.pop("epsilon", None)
        overrides["k"] = args.k
    if args.epsilon is not None:
        cfg.pop("k", None)
        overrides["epsilon"] = args.epsilon
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return cfg


def cmd_experiment(args):
    cfg = _design_settings(args)
    design = design_from_mapping(cfg)
    workers = cfg.get("workers")
    design.validate()
    print(f"running {design.theorem} for {design.family} with {design.replications} replications", file=sys.stderr)
    raw = {} if args.raw_csv else None
    summary = run_experiment(design, workers=workers, raw=raw)
    payload = summary.to_dict()
    if "u_grid" in cfg:
        print("size/power table", file=sys.stderr)
        payload["size_power"] = size_power_table(design, cfg["u_grid"], workers=workers)
    if raw is not None:
        _write_raw(args.raw_csv, raw)
    print(f"done in {summary.runtime:.1f}s; passed={summary.passed}", file=sys.stderr)
    emit(payload, args.out)


def _write_raw(path, raw):
    cols = list(raw)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["replication", *cols])
        for r, row in enumerate(zip(*(raw[c] for c in cols))):
            w.writerow([r, *(repr(float(v)) for v in row)])


def cmd_inspect(args):
    if args.gamma0 is None:
        args.gamma0 = args.gamma_alias
    _require(args, "family", "gamma0", "n", "k")
    u = 1.0 if args.u is None else args.u
    fam = builtin_family(args.family)
    g = fam.check_gamma(args.gamma0)
    qs = intermediate_quantile(fam, g, args.n, args.k)
    a = qs.a
    out = {
        "family": fam.name,
        "gamma": g,
        "n": args.n,
        "k": args.k,
        "u": u,
        "a": a,
        "a_surrogate": surrogate_quantile(fam, g, args.n, args.k),
        "quantile_residual": qs.residual,
        "log_c": fam.log_c(g),
        "x1": fam.x1(g),
    }
    try:
        out["t"] = local_step(fam, g, a, args.k, u)
        h = centering_H(fam, g, a, args.k, u)
        out["H"] = {"value": h.value, "leading": h.leading, "bracket": h.bracket,
                    "sqrt_k_H": math.sqrt(args.k) * h.value}
    except DomainError as exc:
        out["t"] = out["H"] = None
        out.setdefault("null_reasons", {})["t"] = str(exc)
    out["laplace"] = laplace_tail(fam, g, a, order=3).to_dict()
    out["von_mises"] = von_mises_parts(fam, g, a)._asdict()
    out["regularity"] = regularity_report(fam, g, regularity_class=args.regularity_class).to_dict()
    emit(out, args.out)


COMMANDS = {"test": cmd_test, "experiment": cmd_experiment, "inspect": cmd_inspect}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        COMMANDS[args.command](args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, NotFound) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DomainError, NumericalError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except TailRatioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
