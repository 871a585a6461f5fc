"""Replicated Monte Carlo studies of the log-LR limit laws and the test's size and power.

Each replication ``r`` draws from its own stream ``SeededStream(seed, r, key)``,
so results do not depend on how replications are spread over worker
processes; moments and KS distances are computed after an ordered gather.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .asymptotics import centering_H, intermediate_quantile, local_step
from .errors import ConfigError, DomainError, TailRatioError
from .families import TYPE_A, TYPE_B, builtin_family
from .likelihood import log_lr
from .sampling import SeededStream, quantile_table, sample_topk, uniform_top_log_tails

THEOREMS = ("T1", "T2", "L3")

DEFAULT_TOLERANCES = {
    "T1": {"mean": 0.15, "var": 0.25, "ks": 0.08},
    "T2": {"ks": 0.10, "shift": 0.05},
    "L3": {"ks": 0.05, "mean": 0.1, "var": 0.15},
}

_NULL_KEY = 0
_ALT_KEY = 1


def fixed_point_k(n, epsilon, max_iter=500):
    """Canonical ``k`` with ``k = (ln(n/k))^epsilon``.

    Iterates ``k <- (ln(n/k))^epsilon`` from ``k = ln n`` and stops once the
    rounded iterate repeats.  The map is decreasing in ``k`` with slope of
    size ``epsilon / ln(n/k)``, so the iterates settle quickly for designs of
    practical size.
    """
    if not (0.0 < epsilon < 2.0):
        raise ConfigError(f"T1 rate needs 0 < epsilon < 2 (k ~ (ln(n/k))^epsilon), got {epsilon!r}")
    n = int(n)
    k = math.log(n)
    last = None
    for _ in range(max_iter):
        if not (0.0 < k < n):
            break
        k = math.log(n / k) ** epsilon
        r = round(k)
        if r == last:
            if 1 <= r < n:
                return int(r)
            break
        last = r
    raise ConfigError(f"no stable k with k = (ln(n/k))^{epsilon} for n={n}")


def power_rate_k(n, epsilon):
    """``k = round(n^epsilon)`` for the polynomial rate."""
    if not (0.0 < epsilon <= 1.0):
        raise ConfigError(f"T2 rate needs 0 < epsilon <= 1 (k ~ n^epsilon), got {epsilon!r}")
    k = int(round(int(n) ** epsilon))
    if not (1 <= k < int(n)):
        raise ConfigError(f"k = round(n^{epsilon}) = {k} violates 1 <= k < n={n}")
    return k


@dataclass(frozen=True)
class ExperimentDesign:
    """A Monte Carlo design.

    Either ``k`` or ``epsilon`` is given.  ``epsilon`` is read as the rate of
    the theorem: ``k = (ln(n/k))^epsilon`` for T1, ``k = n^epsilon`` for T2
    and L3.  ``regularity_class`` defaults to TypeA for T1 and TypeB for T2.
    """

    family: str
    gamma0: float
    theorem: str = "T1"
    n: int = 100_000
    k: int | None = None
    epsilon: float | None = None
    u: float = 1.0
    replications: int = 2000
    seed: int = 0
    alphas: tuple = (0.05,)
    regularity_class: str | None = None
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.theorem not in THEOREMS:
            raise ConfigError(f"theorem must be one of {THEOREMS}, got {self.theorem!r}")
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES[self.theorem])
        if unknown:
            raise ConfigError(f"unknown tolerance keys for {self.theorem}: {sorted(unknown)}")

    def validate(self):
        """Check the design and return ``(family, regularity_class, k)``."""
        try:
            fam = builtin_family(self.family)
            fam.check_gamma(self.gamma0)
        except (LookupError, DomainError) as exc:
            raise ConfigError(str(exc)) from exc
        if int(self.n) < 2:
            raise ConfigError(f"n must be >= 2, got {self.n!r}")
        if self.replications < 2:
            raise ConfigError(f"need at least 2 replications, got {self.replications!r}")
        if any(not (0.0 < a < 1.0) for a in self.alphas):
            raise ConfigError(f"alphas must lie in (0, 1), got {self.alphas!r}")
        if self.theorem != "L3" and self.u == 0:
            raise ConfigError("u = 0 makes the hypotheses identical; choose u != 0")
        cls = self.regularity_class or {"T1": TYPE_A, "T2": TYPE_B}.get(self.theorem, fam.regularity_class)
        if cls not in fam.admissible_classes:
            raise ConfigError(f"family {self.family!r} does not satisfy {cls} conditions required by {self.theorem}")
        return fam, cls, self.realized_k()

    def realized_k(self):
        if (self.k is None) == (self.epsilon is None):
            raise ConfigError("give exactly one of k and epsilon")
        if self.k is not None:
            k = int(self.k)
            if not (1 <= k < int(self.n)):
                raise ConfigError(f"need 1 <= k < n, got n={self.n}, k={k}")
            return k
        if self.theorem == "T1":
            return fixed_point_k(self.n, self.epsilon)
        return power_rate_k(self.n, self.epsilon)

    def tolerance(self):
        return {**DEFAULT_TOLERANCES[self.theorem], **self.tolerances}


@dataclass
class McSummary:
    theorem: str
    family: str
    regularity_class: str
    gamma0: float
    n: int
    k: int
    u: float
    replications: int
    seed: int
    statistic: str
    a: float
    t: float | None
    centering: float
    target_mean: float
    target_var: float
    mean: float
    var: float
    skew: float
    ks: float
    ks_pvalue: float
    rejection: dict
    uncentered_mean: float | None
    decomposition_gap_median: float | None
    tolerances: dict
    verdicts: dict
    runtime: float = 0.0

    @property
    def passed(self):
        return all(self.verdicts.values())

    def to_dict(self, include_runtime=False):
        d = asdict(self)
        d["passed"] = self.passed
        if not include_runtime:
            d.pop("runtime")
        return d


def binomial_rate(hits, total):
    """Rejection rate with its binomial standard error."""
    p = hits / total
    return {"rate": p, "se": math.sqrt(p * (1.0 - p) / total)}


def ks_to_normal(values, mean, sd):
    res = stats.kstest(np.asarray(values, dtype=float), "norm", args=(mean, sd))
    return float(res.statistic), float(res.pvalue)


# -- replication workers (module level so they pickle) -------------------


def _lr_chunk(job):
    name, cls, gamma0, sample_gamma, n, k, u, seed, key, indices, decompose = job
    fam = builtin_family(name)
    out = np.empty((len(indices), 4))
    for i, r in enumerate(indices):
        sample = sample_topk(fam, sample_gamma, n, k, SeededStream(seed, r, key))
        rep = log_lr(fam, gamma0, u, sample, regularity_class=cls, decompose=decompose)
        gap = rep.decomposition_gap if rep.decomposition_gap is not None else math.nan
        out[i] = (rep.centered_log_lr, rep.log_lr, gap, sample.threshold)
    return out


def _threshold_chunk(job):
    name, gamma0, n, k, seed, key, indices = job
    fam = builtin_family(name)
    table = quantile_table(fam, gamma0)
    # Same draws as sample_topk, but only X_(n-k) is inverted.
    tails = [uniform_top_log_tails(n, k, SeededStream(seed, r, key).generator())[-1] for r in indices]
    return table.inverse_log_sf(np.array(tails))


def default_workers():
    return os.cpu_count() or 1


def _gather(fn, make_job, replications, workers):
    """Run ``fn`` over contiguous index chunks and concatenate in replication order."""
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    if workers == 1:
        return fn(make_job(range(replications)))
    n_chunks = min(replications, 4 * workers)
    chunks = [c.tolist() for c in np.array_split(np.arange(replications), n_chunks)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(fn, [make_job(c) for c in chunks]))
    return np.concatenate(parts)


def _lr_replicates(design, fam, cls, k, workers, sample_gamma=None, u=None, key=_NULL_KEY, decompose=True):
    u = design.u if u is None else u
    sample_gamma = design.gamma0 if sample_gamma is None else sample_gamma

    def make_job(idx):
        return (fam.name, cls, float(design.gamma0), float(sample_gamma), int(design.n), k, float(u),
                int(design.seed), (key,), list(idx), decompose)

    return _gather(_lr_chunk, make_job, design.replications, workers)


def _moments(x):
    return float(np.mean(x)), float(np.var(x, ddof=1)), float(stats.skew(x))


def _rejections(stat, u, alphas):
    z = (stat + 0.5 * u * u) / abs(u)
    return {str(a): binomial_rate(int(np.sum(z > stats.norm.isf(a))), len(stat)) for a in alphas}


def _lr_summary(design, theorem, workers, raw):
    fam, cls, k = design.validate()
    if design.theorem != theorem:
        raise ConfigError(f"design is for {design.theorem}, not {theorem}")
    start = time.perf_counter()
    u = float(design.u)
    a = intermediate_quantile(fam, design.gamma0, design.n, k).a
    t = local_step(fam, design.gamma0, a, k, u)
    centering = math.sqrt(k) * centering_H(fam, design.gamma0, a, k, u).value if cls == TYPE_B else 0.0
    reps = _lr_replicates(design, fam, cls, k, workers)
    stat, raw_lr, gaps = reps[:, 0], reps[:, 1], reps[:, 2]
    mean, var, skew = _moments(stat)
    ks, ks_p = ks_to_normal(stat, -0.5 * u * u, abs(u))
    tol = design.tolerance()
    uncentered_mean = float(np.mean(raw_lr))
    if theorem == "T1":
        verdicts = {
            "mean": abs(mean + 0.5 * u * u) <= tol["mean"],
            "var": abs(var - u * u) <= tol["var"],
            "ks": ks <= tol["ks"],
        }
    else:
        verdicts = {
            "ks": ks <= tol["ks"],
            "shift": abs(uncentered_mean - mean - centering) <= tol["shift"],
        }
    finite_gaps = gaps[np.isfinite(gaps)]
    summary = McSummary(
        theorem=theorem, family=fam.name, regularity_class=cls, gamma0=float(design.gamma0), n=int(design.n),
        k=k, u=u, replications=design.replications, seed=int(design.seed),
        statistic="centered_log_lr" if cls == TYPE_B else "log_lr",
        a=a, t=t, centering=centering, target_mean=-0.5 * u * u, target_var=u * u,
        mean=mean, var=var, skew=skew, ks=ks, ks_pvalue=ks_p,
        rejection=_rejections(stat, u, design.alphas), uncentered_mean=uncentered_mean,
        decomposition_gap_median=float(np.median(finite_gaps)) if finite_gaps.size else None,
        tolerances=tol, verdicts={k_: bool(v) for k_, v in verdicts.items()},
        runtime=time.perf_counter() - start,
    )
    if raw is not None:
        raw.update(statistic=stat, log_lr=raw_lr, decomposition_gap=gaps, threshold=reps[:, 3])
    return summary


def run_theorem1(design, workers=None, raw=None):
    """Null distribution of ``ln R_n(u)`` against ``N(-u^2/2, u^2)`` (no centering).

    ``raw``, when a dict, receives the per-replication arrays.
    """
    return _lr_summary(design, "T1", workers, raw)


def run_theorem2(design, workers=None, raw=None):
    """Null distribution of ``ln R_n(u) - sqrt(k) H(a)``; also reports the uncentered mean."""
    return _lr_summary(design, "T2", workers, raw)


def run_lemma3(design, workers=None, raw=None):
    """Normalized threshold ``sqrt(k) S_x(a) (X_(n-k) - a)`` against ``N(0, 1)``."""
    fam, cls, k = design.validate()
    if design.theorem != "L3":
        raise ConfigError(f"design is for {design.theorem}, not L3")
    start = time.perf_counter()
    a = intermediate_quantile(fam, design.gamma0, design.n, k).a
    sx = float(fam.partial("x", a, design.gamma0))

    def make_job(idx):
        return (fam.name, float(design.gamma0), int(design.n), k, int(design.seed), (_NULL_KEY,), list(idx))

    thresholds = _gather(_threshold_chunk, make_job, design.replications, workers)
    z = math.sqrt(k) * sx * (thresholds - a)
    mean, var, skew = _moments(z)
    ks, ks_p = ks_to_normal(z, 0.0, 1.0)
    tol = design.tolerance()
    verdicts = {"ks": ks <= tol["ks"], "mean": abs(mean) <= tol["mean"], "var": abs(var - 1.0) <= tol["var"]}
    if raw is not None:
        raw.update(statistic=z, threshold=thresholds)
    return McSummary(
        theorem="L3", family=fam.name, regularity_class=cls, gamma0=float(design.gamma0), n=int(design.n), k=k,
        u=float(design.u), replications=design.replications, seed=int(design.seed), statistic="normalized_threshold",
        a=a, t=None, centering=0.0, target_mean=0.0, target_var=1.0, mean=mean, var=var, skew=skew, ks=ks,
        ks_pvalue=ks_p, rejection={}, uncentered_mean=None, decomposition_gap_median=None, tolerances=tol,
        verdicts={k_: bool(v) for k_, v in verdicts.items()}, runtime=time.perf_counter() - start,
    )


def run_experiment(design, workers=None, raw=None):
    runner = {"T1": run_theorem1, "T2": run_theorem2, "L3": run_lemma3}[design.theorem]
    return runner(design, workers=workers, raw=raw)


def size_power_table(design, u_grid, workers=None):
    """Empirical size and power of the one-sided test for each ``u`` in ``u_grid``.

    Null samples share the stream key ``0`` and alternative samples the key
    ``1`` for every ``u``, so rows are compared on common random numbers.
    A ``u`` whose alternative leaves the parameter domain gives a flagged row.
    """
    fam, cls, k = design.validate()
    if design.theorem == "L3":
        raise ConfigError("size/power needs a T1 or T2 design")
    u_grid = [float(u) for u in u_grid]
    if any(u == 0 for u in u_grid):
        raise ConfigError("u_grid entries must be nonzero")
    a = intermediate_quantile(fam, design.gamma0, design.n, k).a
    rows = []
    for u in u_grid:
        row = {"u": u, "t": None, "size": None, "power": None, "flag": None}
        try:
            t = local_step(fam, design.gamma0, a, k, u)
            row["t"] = t
            null = _lr_replicates(design, fam, cls, k, workers, u=u, key=_NULL_KEY, decompose=False)[:, 0]
            alt = _lr_replicates(design, fam, cls, k, workers, sample_gamma=design.gamma0 + t, u=u, key=_ALT_KEY,
                                 decompose=False)[:, 0]
        except TailRatioError as exc:
            row["flag"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
            continue
        row["size"] = _rejections(null, u, design.alphas)
        row["power"] = _rejections(alt, u, design.alphas)
        rows.append(row)
    return rows


__all__ = [
    "DEFAULT_TOLERANCES", "ExperimentDesign", "McSummary", "binomial_rate", "fixed_point_k", "ks_to_normal",
    "power_rate_k", "run_experiment", "run_lemma3", "run_theorem1", "run_theorem2", "size_power_table",
]
