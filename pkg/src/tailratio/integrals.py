"""Log-domain tail integrals ``int_q^inf w(x) exp(-S(x, gamma)) dx``.

The factor ``exp(-S(q, gamma))`` is pulled out so the integrand starts at 1
and decays; the range is cut where ``S`` has grown by ``TAIL_CUT`` and the
pieces are integrated by a vectorized adaptive Gauss-Legendre rule (an
``n``-point and a ``2n``-point estimate per panel, panels split until they
agree).
"""
from __future__ import annotations

import functools
import math

import numpy as np

from .errors import DomainError, NumericalError

TAIL_CUT = 60.0
RTOL = 1e-13

_N_LOW = 15
_NODES_LOW, _WEIGHTS_LOW = np.polynomial.legendre.leggauss(_N_LOW)
_NODES_HIGH, _WEIGHTS_HIGH = np.polynomial.legendre.leggauss(2 * _N_LOW)


def adaptive_integral(fn, breaks, rtol=RTOL, max_panels=20000):
    """Integrate a vectorized ``fn`` over consecutive ``breaks``.

    Returns ``(value, error_estimate)``.  Raises :class:`NumericalError` when
    the panel budget is exhausted before the requested relative accuracy.
    """
    lo = np.asarray(breaks[:-1], dtype=float)
    hi = np.asarray(breaks[1:], dtype=float)
    total, err_total = 0.0, 0.0
    accepted = []
    pending_lo, pending_hi = lo, hi
    used = 0
    scale = None
    while pending_lo.size:
        used += pending_lo.size
        if used > max_panels:
            raise NumericalError(
                f"adaptive quadrature exceeded {max_panels} panels", err_total + float(np.sum(np.abs(accepted)))
            )
        mid = 0.5 * (pending_lo + pending_hi)
        half = 0.5 * (pending_hi - pending_lo)
        xl = mid[:, None] + half[:, None] * _NODES_LOW
        xh = mid[:, None] + half[:, None] * _NODES_HIGH
        with np.errstate(over="ignore", invalid="ignore", under="ignore"):
            low = half * (fn(xl) @ _WEIGHTS_LOW)
            high = half * (fn(xh) @ _WEIGHTS_HIGH)
        if not np.all(np.isfinite(high)):
            raise NumericalError("non-finite integrand in tail quadrature")
        diff = np.abs(high - low)
        if scale is None:
            scale = max(abs(float(np.sum(high))), 1e-300)
        # Panels converge relative to the running estimate of the whole integral.
        done = diff <= rtol * scale + 1e-300
        total += float(np.sum(high[done]))
        err_total += float(np.sum(diff[done]))
        split_lo, split_hi = pending_lo[~done], pending_hi[~done]
        split_mid = 0.5 * (split_lo + split_hi)
        pending_lo = np.concatenate([split_lo, split_mid])
        pending_hi = np.concatenate([split_mid, split_hi])
        scale = max(scale, abs(total))
    return total, err_total


def tail_breaks(family, gamma, q, cut=TAIL_CUT):
    """Panel edges ``q, q + h, q + 3h, q + 7h, ...`` until ``S`` has grown by ``cut``."""
    sx = float(family.partial("x", q, gamma))
    if not sx > 0:
        raise DomainError(f"S_x({q!r}, {gamma!r}) = {sx!r} <= 0: q is not in the monotone tail region")
    s0 = float(family.shape(q, gamma))
    h = 1.0 / sx
    edges = [q]
    x = q
    for _ in range(400):
        x = x + h
        edges.append(x)
        if float(family.shape(x, gamma)) - s0 >= cut:
            return np.array(edges)
        h *= 2.0
    raise NumericalError(f"could not bracket the tail of {family.name} beyond q={q!r}")


@functools.lru_cache(maxsize=4096)
def _log_tail_cached(family, gamma, q):
    s0 = float(family.shape(q, gamma))
    breaks = tail_breaks(family, gamma, q)
    value, _ = adaptive_integral(lambda x: np.exp(-(family.shape(x, gamma) - s0)), breaks)
    return math.log(value) - s0


def log_tail_integral(family, gamma, q):
    """``ln int_q^inf exp(-S(x, gamma)) dx`` (normalizer excluded)."""
    gamma = family.check_gamma(gamma)
    return _log_tail_cached(family, gamma, float(q))


def tail_expectation(family, gamma, q, func):
    """``E[func(X) | X > q]`` under the density proportional to ``exp(-S(x, gamma))``."""
    gamma = family.check_gamma(gamma)
    q = float(q)
    s0 = float(family.shape(q, gamma))
    breaks = tail_breaks(family, gamma, q)
    weight = lambda x: np.exp(-(family.shape(x, gamma) - s0))
    denom, _ = adaptive_integral(weight, breaks)
    numer, _ = adaptive_integral(lambda x: func(x) * weight(x), breaks)
    return numer / denom


def log_sf(family, gamma, x):
    """Exact ``ln P(X > x)`` for the normalized density, by quadrature."""
    gamma = family.check_gamma(gamma)
    x = float(x)
    if x <= family.support_lower:
        return 0.0
    split = family.tail_start(gamma)
    log_c = family.log_c(gamma)
    if x >= split:
        return log_c + log_tail_integral(family, gamma, x)
    return float(np.log1p(-math.exp(log_cdf(family, gamma, x))))


def log_cdf(family, gamma, x):
    """Exact ``ln P(X <= x)``; bulk points integrate from the lower end of the support."""
    gamma = family.check_gamma(gamma)
    x = float(x)
    if x <= family.support_lower:
        return -math.inf
    split = family.tail_start(gamma)
    if x >= split:
        return float(np.log1p(-math.exp(log_sf(family, gamma, x))))
    log_c = family.log_c(gamma)
    ref = float(family.shape(x, gamma))
    fn = lambda y: math.exp(-(float(family.shape(y, gamma)) - ref))
    from scipy import integrate

    value, err = integrate.quad(fn, family.support_lower, x, epsabs=0.0, epsrel=1e-13, limit=400)
    if not value > 0:
        raise NumericalError(f"lower-tail quadrature vanished at x={x!r}", err)
    return log_c - ref + math.log(value)
