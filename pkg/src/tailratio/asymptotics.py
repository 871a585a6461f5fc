"""Tail asymptotics for ``exp(-S)`` families.

Laplace expansion of the tail integral, exact weighted tail ratios,
intermediate quantiles, the local alternative step, the centering function
and heuristic regularity diagnostics.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import optimize

from .errors import DegenerateStep, DomainError, NumericalError
from .families import TYPE_A, TYPE_B
from .integrals import log_cdf, log_sf, log_tail_integral, tail_expectation


@dataclass(frozen=True)
class ExpansionResult:
    """Laplace approximation of ``int_q^inf exp(-S)``, normalizer excluded.

    ``terms`` holds the coefficients ``c_0, c_1, c_2`` (as many as ``order``)
    and ``value = exp(-S(q)) * sum(terms)``.
    """

    value: float
    terms: tuple[float, ...]
    log_value: float
    order: int
    series_ok: bool

    def to_dict(self):
        return {
            "value": self.value,
            "terms": list(self.terms),
            "log_value": self.log_value,
            "order": self.order,
            "series_ok": self.series_ok,
        }


@dataclass(frozen=True)
class QuantileSolution:
    a: float
    tail_prob: float
    residual: float
    iterations: int


class Centering(NamedTuple):
    """Exact centering ``H(x)`` plus its leading-order form ``-u * S_xx / S_x^2``."""

    value: float
    leading: float
    bracket: float


class VonMises(NamedTuple):
    a_aux: float
    g_aux: float
    d_aux: float


def _sx_positive(family, gamma, q):
    sx = float(family.partial("x", q, gamma))
    if not sx > 0:
        raise DomainError(f"S_x({q!r}, gamma={gamma!r}) = {sx!r} <= 0: q lies before the monotone tail")
    return sx


def laplace_tail(family, gamma, q, order=3):
    """Laplace expansion ``exp(-S(q)) * (c_0 + c_1 + c_2)`` of the tail integral.

    ``c_0 = 1/S'``, ``c_1 = -S''/S'^3`` and ``c_2 = 3 S''^2/S'^5 - S'''/S'^4``,
    all from analytic partials.  ``order`` counts terms (1 to 3).
    """
    if order not in (1, 2, 3):
        raise DomainError(f"order must be 1, 2 or 3, got {order!r}")
    gamma = family.check_gamma(gamma)
    sx = _sx_positive(family, gamma, q)
    sxx = float(family.partial("xx", q, gamma))
    sxxx = float(family.partial("xxx", q, gamma))
    coeffs = (1.0 / sx, -sxx / sx**3, 3.0 * sxx**2 / sx**5 - sxxx / sx**4)[:order]
    total = math.fsum(coeffs)
    if not total > 0:
        raise NumericalError(f"Laplace sum {total!r} is not positive at q={q!r}; expansion invalid here")
    s = float(family.shape(q, gamma))
    log_value = -s + math.log(total)
    series_ok = True
    if order >= 2:
        series_ok = abs(coeffs[1] / coeffs[0]) < 1
    if order == 3 and coeffs[1] != 0:
        series_ok = series_ok and abs(coeffs[2] / coeffs[1]) < 1
    return ExpansionResult(math.exp(log_value), tuple(coeffs), log_value, order, series_ok)


_WEIGHTS = {
    "S_gamma": lambda fam, g: (lambda x: fam.partials["g"](x, g)),
    "S_gammagamma": lambda fam, g: (lambda x: fam.partials["gg"](x, g)),
    "S_gamma_squared": lambda fam, g: (lambda x: fam.partials["g"](x, g) ** 2),
}


def weighted_tail_ratio(family, gamma, q, weight):
    """``int_q^inf w e^{-S} / int_q^inf e^{-S}`` by quadrature.

    ``weight`` is ``"S_gamma"``, ``"S_gammagamma"`` or ``"S_gamma_squared"``.
    """
    try:
        make = _WEIGHTS[weight]
    except KeyError:
        raise DomainError(f"unknown weight {weight!r}; expected one of {sorted(_WEIGHTS)}") from None
    gamma = family.check_gamma(gamma)
    _sx_positive(family, gamma, q)
    return tail_expectation(family, gamma, q, make(family, gamma))


# ---------------------------------------------------------------------------
# Root finding on monotone tail functions


def _bracket_newton(fn, dfn, lo, hi, xtol=4e-16, ftol=1e-14, maxiter=200):
    """Safeguarded Newton on a decreasing ``fn`` with ``fn(lo) > 0 > fn(hi)``.

    Returns ``(root, iterations)``.  Steps leaving the bracket fall back to
    bisection, which keeps the iteration derivative-free when ``dfn`` is poor.
    """
    x = 0.5 * (lo + hi)
    for it in range(1, maxiter + 1):
        fx = fn(x)
        if abs(fx) <= ftol:
            return x, it
        if fx > 0:
            lo = x
        else:
            hi = x
        d = dfn(x)
        step = fx / d if d != 0 and math.isfinite(d) else math.nan
        nxt = x - step
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if abs(nxt - x) <= xtol * max(abs(x), 1e-300) or hi - lo <= xtol * max(abs(lo), abs(hi)):
            return nxt, it
        x = nxt
    raise NumericalError(f"root finding did not converge in {maxiter} iterations (bracket [{lo}, {hi}])", hi - lo)


def _surrogate_quantile(family, gamma, log_ratio):
    """Solve ``S + ln S_x - ln C = ln(n/k)`` by bisection to relative width 1e-3."""
    log_c = family.log_c(gamma)
    x1 = family.x1(gamma)

    def h(x):
        sx = float(family.partial("x", x, gamma))
        if not sx > 0:
            return -math.inf
        return float(family.shape(x, gamma)) + math.log(sx) - log_c - log_ratio

    lo = x1
    step = max(1.0, abs(x1))
    hi = x1 + step
    for _ in range(2000):
        if h(hi) > 0:
            break
        lo, step = hi, step * 2
        hi = hi + step
    else:
        raise NumericalError("could not bracket the asymptotic quantile equation")
    while hi - lo > 1e-3 * max(abs(hi), 1e-3):
        mid = 0.5 * (lo + hi)
        if h(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _expand_bracket(g, guess, width, lower):
    """Grow ``[guess - w, guess + w]`` until ``g(lo) > 0 > g(hi)``; ``lo`` stops at ``lower``."""
    w = width
    lo = guess - w
    for _ in range(400):
        if lo <= lower:
            lo = lower
            break
        if g(lo) > 0:
            break
        w *= 2
        lo = guess - w
    else:
        raise NumericalError(f"could not bracket a root below {guess!r}")
    w = width
    hi = guess + w
    for _ in range(400):
        if g(hi) < 0:
            return lo, hi
        w *= 2
        hi = guess + w
    raise NumericalError(f"could not bracket a root above {guess!r}")


def solve_log_sf(family, gamma, log_target, guess=None):
    """Find ``x`` with ``ln P(X > x) = log_target`` on the exact normalized law.

    Returns ``(x, iterations)``.
    """
    gamma = family.check_gamma(gamma)
    log_c = family.log_c(gamma)
    lower = family.support_lower

    def g(x):
        return log_sf(family, gamma, x) - log_target

    def dg(x):
        return -math.exp(log_c - float(family.shape(x, gamma)) - log_sf(family, gamma, x))

    if guess is None:
        guess = _surrogate_quantile(family, gamma, -log_target)
    width = 1.0 / max(float(family.partial("x", guess, gamma)), 1e-300)
    if not math.isfinite(width) or width <= 0:
        width = 1.0
    width = min(width, max(1.0, abs(guess)))
    lo, hi = _expand_bracket(g, guess, width, lower)
    return _bracket_newton(g, dg, lo, hi)


def solve_log_cdf(family, gamma, log_target, guess):
    """Find ``x`` with ``ln P(X <= x) = log_target`` (lower half of the law)."""
    gamma = family.check_gamma(gamma)
    log_c = family.log_c(gamma)

    def g(x):
        return log_target - log_cdf(family, gamma, x)

    def dg(x):
        return -math.exp(log_c - float(family.shape(x, gamma)) - log_cdf(family, gamma, x))

    lo, hi = _expand_bracket(g, guess, 0.5, family.support_lower)
    return _bracket_newton(g, dg, lo, hi)


@functools.lru_cache(maxsize=1024)
def intermediate_quantile(family, gamma, n, k):
    """The ``(1 - k/n)`` quantile ``a`` with ``P(X > a) = k/n`` (exact law).

    An asymptotic solve of ``exp(-S(t))/S'(t) = k/n`` seeds the bracket, which
    is then refined on the quadrature survival function.
    """
    n, k = int(n), int(k)
    if not (1 <= k < n):
        raise DomainError(f"need 1 <= k < n, got n={n}, k={k}")
    gamma = family.check_gamma(gamma)
    p = k / n
    log_p = math.log(k) - math.log(n)
    guess = _surrogate_quantile(family, gamma, -log_p)
    a, iterations = solve_log_sf(family, gamma, log_p, guess=guess)
    residual = p * math.expm1(log_sf(family, gamma, a) - log_p)
    return QuantileSolution(a=a, tail_prob=p, residual=residual, iterations=iterations)


def surrogate_quantile(family, gamma, n, k):
    """Root of the asymptotic quantile equation ``exp(-S(t))/S'(t) = k/n``."""
    gamma = family.check_gamma(gamma)
    return _surrogate_quantile(family, gamma, math.log(n) - math.log(k))


def local_step(family, gamma, a, k, u):
    """``t(k, u) = (u / sqrt(k)) * S_x(a) / S_xg(a)``.

    Raises :class:`DegenerateStep` when ``S_xg(a) = 0`` and :class:`DomainError`
    when ``gamma + t`` leaves the parameter domain.
    """
    gamma = family.check_gamma(gamma)
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k!r}")
    sxg = float(family.partial("xg", a, gamma))
    if sxg == 0 or not math.isfinite(sxg):
        raise DegenerateStep(f"S_xg({a!r}, {gamma!r}) = {sxg!r}; the local step is undefined")
    ratio = float(family.partial("x", a, gamma)) / sxg
    t = u * (ratio / math.sqrt(k))
    try:
        family.check_gamma(gamma + t)
    except DomainError:
        raise DomainError(
            f"step t={t!r} (u={u!r}, k={k}) moves gamma={gamma!r} outside the domain of {family.name}"
        ) from None
    return t


def centering_H(family, gamma, x, k, u):
    """Centering function ``H(x)`` with the tail integral evaluated exactly.

    ``H(x) = sqrt(k) t * (E[S_g(X) - S_g(x) | X > x] - S_xg/S_x - S_xxg/S_x^2
    + 2 S_xx S_xg/S_x^3)``; ``sqrt(k) t = u S_x/S_xg`` does not depend on ``k``.
    Subtracting ``S_g(x)`` inside the expectation is exact and avoids
    cancellation between two large numbers.
    """
    gamma = family.check_gamma(gamma)
    if x <= family.x1(gamma):
        raise DomainError(f"x={x!r} is not beyond x1={family.x1(gamma)!r}")
    local_step(family, gamma, x, k, u)
    sx = float(family.partial("x", x, gamma))
    sxx = float(family.partial("xx", x, gamma))
    sxg = float(family.partial("xg", x, gamma))
    sxxg = float(family.partial("xxg", x, gamma))
    sg_q = float(family.partial("g", x, gamma))
    sg = family.partials["g"]
    excess = tail_expectation(family, gamma, x, lambda y: sg(y, gamma) - sg_q)
    bracket = excess - sxg / sx - sxxg / sx**2 + 2.0 * sxx * sxg / sx**3
    scale = u * sx / sxg
    return Centering(value=scale * bracket, leading=-u * sxx / sx**2, bracket=bracket)


def von_mises_parts(family, gamma, x):
    """Auxiliary function ``a = 1/S'``, ``g = 1 + S''/S'^2`` and ``d = 1 - S''/S'^2``."""
    gamma = family.check_gamma(gamma)
    if x <= family.x1(gamma):
        raise DomainError(f"x={x!r} is not beyond x1={family.x1(gamma)!r}")
    sx = float(family.partial("x", x, gamma))
    r = float(family.partial("xx", x, gamma)) / sx**2
    return VonMises(1.0 / sx, 1.0 + r, 1.0 - r)


# ---------------------------------------------------------------------------
# Regularity diagnostics
#
# These are trend heuristics on a finite grid: a limit at infinity cannot be
# established numerically.

APPROACHING = "approaching"
INCONCLUSIVE = "inconclusive"
VIOLATED = "violated"


@dataclass(frozen=True)
class ConditionCheck:
    condition: str
    limit: str
    x: tuple[float, ...]
    ratio: tuple[float | None, ...]
    verdict: str
    unusable: tuple[float, ...] = ()
    note: str = ""

    def to_dict(self):
        return {
            "condition": self.condition,
            "limit": self.limit,
            "x": list(self.x),
            "ratio": list(self.ratio),
            "verdict": self.verdict,
            "unusable": list(self.unusable),
            "note": self.note,
        }


@dataclass(frozen=True)
class RegularityReport:
    family: str
    gamma: float
    regularity_class: str
    grid: tuple[float, ...]
    checks: tuple[ConditionCheck, ...] = field(default_factory=tuple)
    verdict: str = INCONCLUSIVE

    def by_condition(self, name):
        return [c for c in self.checks if c.condition == name or c.condition.startswith(name + "[")]

    def to_dict(self):
        return {
            "family": self.family,
            "gamma": self.gamma,
            "regularity_class": self.regularity_class,
            "grid": list(self.grid),
            "checks": [c.to_dict() for c in self.checks],
            "verdict": self.verdict,
        }


def geometric_grid(start, stop, num):
    if not (0 < start < stop) or num < 2:
        raise DomainError(f"invalid geometric grid ({start!r}, {stop!r}, {num!r})")
    return np.geomspace(start, stop, int(num))


def default_grid(family, gamma, num=8):
    """Geometric grid between the points where ``S`` reaches 10 and 1e4."""
    gamma = family.check_gamma(gamma)
    x1 = family.x1(gamma)
    ends = []
    for level in (10.0, 1e4):
        lo, hi = x1, x1 + 1.0
        while float(family.shape(hi, gamma)) < level:
            lo, hi = hi, x1 + 2 * (hi - x1)
        ends.append(optimize.brentq(lambda x: float(family.shape(x, gamma)) - level, lo, hi))
    return geometric_grid(ends[0], ends[1], num)


def _distance(ratio, limit):
    if limit == "inf":
        return 1.0 / ratio if ratio > 0 else math.nan
    if limit == "zero":
        return abs(ratio)
    if limit == "one":
        return abs(ratio - 1.0)
    raise ValueError(limit)


def _classify(xs, values, limit):
    """Trend verdict from ratio values on an increasing grid."""
    if limit == "inf" and any(v <= 0 for v in values[-2:]):
        return VIOLATED
    dist = [_distance(v, limit) for v in values]
    if len(dist) < 2:
        return INCONCLUSIVE
    diffs = np.diff(dist)
    xs = np.asarray(xs)
    # Top two decades of the grid, but never fewer than the last two steps.
    n_top = max(2, int(np.sum(xs[1:] >= xs[-1] / 100.0)))
    top_diffs = diffs[-n_top:]
    if len(top_diffs) >= 2 and np.all(top_diffs > 0):
        return VIOLATED
    if len(diffs) >= 3 and np.all(diffs[-3:] < 0):
        return APPROACHING
    return INCONCLUSIVE


def _evaluate(xs, fn):
    good_x, good_v, bad = [], [], []
    for x in xs:
        with np.errstate(all="ignore"):
            try:
                v = float(fn(x))
            except (OverflowError, ZeroDivisionError, ValueError):
                v = math.nan
        if math.isfinite(v):
            good_x.append(float(x))
            good_v.append(v)
        else:
            bad.append(float(x))
    return good_x, good_v, bad


def _check(name, limit, xs, fn, note=""):
    gx, gv, bad = _evaluate(xs, fn)
    verdict = _classify(gx, gv, limit) if gx else INCONCLUSIVE
    return ConditionCheck(name, limit, tuple(gx), tuple(gv), verdict, tuple(bad), note)


def _sign_check(name, family, gamma, xs):
    changes = []
    for which in ("x", "g", "xx", "xg", "gg", "xxx", "xxg", "xgg", "ggg", "xxxg"):
        with np.errstate(all="ignore"):
            vals = np.array([float(family.partial(which, x, gamma)) for x in xs])
        vals = vals[np.isfinite(vals)]
        nz = vals[vals != 0]
        if nz.size and np.any(np.sign(nz) != np.sign(nz[-1])):
            changes.append(which)
    verdict = INCONCLUSIVE if changes else APPROACHING
    note = ("sign changes in S_" + ", S_".join(changes)) if changes else "no sign changes on the grid"
    return ConditionCheck(name, "sign", tuple(float(x) for x in xs), tuple(), verdict, (), note)


def regularity_report(family, gamma, regularity_class=None, grid=None, epsilon=0.1, delta=0.0):
    """Evaluate the defining ratio of each regularity condition along ``grid``.

    ``grid`` is an increasing array of points or a ``(start, stop, num)``
    triple for a geometric grid.  ``epsilon`` enters A1/B1 and ``delta`` B2.
    Verdicts: three consecutive shrinking distances to the limit give
    "approaching", a distance growing over the top two decades gives
    "violated", anything else "inconclusive".
    """
    gamma = family.check_gamma(gamma)
    cls = regularity_class or family.regularity_class
    if cls not in (TYPE_A, TYPE_B):
        raise DomainError(f"unknown regularity class {cls!r}")
    if grid is None:
        xs = default_grid(family, gamma)
    elif isinstance(grid, tuple) and len(grid) == 3:
        xs = geometric_grid(*grid)
    else:
        xs = np.asarray(grid, dtype=float)
    if np.any(np.diff(xs) <= 0):
        raise DomainError("grid must be strictly increasing")
    if xs[0] <= family.support_lower:
        raise DomainError("grid must lie inside the support")

    S = lambda x: float(family.shape(x, gamma))
    P = lambda which: (lambda x: float(family.partial(which, x, gamma)))
    gamma_k = {1: P("g"), 2: P("gg"), 3: P("ggg")}
    checks = []

    def log_ratio_checks(prefix):
        for k, fn in gamma_k.items():
            checks.append(
                _check(
                    f"{prefix}[k={k}]", "one", xs,
                    lambda x, fn=fn: math.log(abs(fn(x))) / math.log(S(x)),
                    f"ln|d^{k}S/dgamma^{k}| / ln S",
                )
            )

    if cls == TYPE_A:
        checks.append(_check("A1", "inf", xs, lambda x: S(x) / x ** (1 + epsilon), f"S / x^(1+{epsilon})"))
        checks.append(_sign_check("A2", family, gamma, xs))
        log_ratio_checks("A3")
    else:
        checks.append(
            _check("B1", "inf", xs, lambda x: S(x) / math.log(x) ** (1 + epsilon), f"S / (ln x)^(1+{epsilon})")
        )
        checks.append(
            _check("B2", "zero", xs, lambda x: math.log(P("x")(x)) / S(x) ** (1 - delta), f"ln S_x / S^(1-{delta})")
        )
        checks.append(_sign_check("B3", family, gamma, xs))
        for which in ("x", "g", "xx", "xg", "gg", "xxx", "xxg", "xgg", "ggg"):
            checks.append(
                _check(f"B4[T=S_{which}]", "zero", xs, lambda x, w=which: math.log(abs(P(w)(x))) / S(x), "ln|T| / S")
            )
        log_ratio_checks("B4")

    verdicts = {c.verdict for c in checks}
    if VIOLATED in verdicts:
        overall = VIOLATED
    elif verdicts == {APPROACHING}:
        overall = APPROACHING
    else:
        overall = INCONCLUSIVE
    return RegularityReport(family.name, gamma, cls, tuple(float(x) for x in xs), tuple(checks), overall)
