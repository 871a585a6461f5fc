"""Parametric tail families ``f(x, gamma) = C(gamma) * exp(-S(x, gamma))``.

A family carries the shape ``S(x, gamma)`` (the part that depends on ``x``),
the log-normalizer ``ln C(gamma)`` and analytic partial derivatives up to the
order needed by the tail expansions.  Only differences of the shape in
``gamma`` at fixed ``x`` and ``x``-derivatives enter the likelihood ratio, so
the normalizer is kept separate and is consulted only where true
probabilities are required (quantiles, sampling).
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import DomainError, NotFound, NumericalError

PARTIAL_NAMES = ("x", "g", "xx", "xg", "gg", "xxx", "xxg", "xgg", "ggg", "xxxg")
TYPE_A = "TypeA"
TYPE_B = "TypeB"


@dataclass(frozen=True, eq=False)
class TailFamily:
    """A smooth parametric tail model.

    Attributes:
        name: identifier used by the CLI and presets.
        support_lower: density is defined for ``x > support_lower``.
        gamma_domain: ``(low, high)`` bounds of the admissible parameter.
        shape: ``S(x, gamma)``, the unnormalized exponent.
        log_normalizer: ``ln C(gamma)``; ``None`` means "integrate numerically".
        partials: analytic partial derivatives of ``shape`` keyed by the
            differentiation variables, e.g. ``"xg"`` for d^2 S / dx dgamma.
        regularity_class: condition set claimed for the family (TypeA or TypeB).
        monotone_from: ``x1(gamma)``; beyond it ``S`` is strictly increasing
            and ``S_xg`` does not vanish.
        admissible_classes: every condition set the family satisfies.
        gamma_closed_low: whether ``gamma_domain[0]`` itself is admissible.
    """

    name: str
    support_lower: float
    gamma_domain: tuple[float, float]
    shape: Callable
    log_normalizer: Callable | None
    partials: dict = field(repr=False)
    regularity_class: str
    monotone_from: Callable = field(repr=False)
    admissible_classes: tuple[str, ...] = ()
    gamma_closed_low: bool = False

    def check_gamma(self, gamma):
        low, high = self.gamma_domain
        ok = (gamma >= low if self.gamma_closed_low else gamma > low) and gamma < high
        if not (ok and math.isfinite(gamma)):
            bracket = "[" if self.gamma_closed_low else "("
            raise DomainError(
                f"gamma={gamma!r} outside the domain {bracket}{low}, {high}) of family {self.name!r}"
            )
        return float(gamma)

    def S(self, x, gamma):
        """Unnormalized exponent ``S(x, gamma)``."""
        return self.shape(x, self.check_gamma(gamma))

    def partial(self, which, x, gamma):
        """Analytic partial derivative of ``S``; ``which`` is one of :data:`PARTIAL_NAMES`."""
        try:
            fn = self.partials[which]
        except KeyError:
            raise NotFound(f"no partial derivative {which!r}; expected one of {PARTIAL_NAMES}") from None
        return fn(x, self.check_gamma(gamma))

    def log_c(self, gamma):
        """``ln C(gamma)``, falling back to quadrature when no closed form is known."""
        gamma = self.check_gamma(gamma)
        if self.log_normalizer is None:
            return normalizer_quadrature(self, gamma)
        return float(self.log_normalizer(gamma))

    def x1(self, gamma):
        return float(self.monotone_from(self.check_gamma(gamma)))

    def tail_start(self, gamma):
        """A point safely inside the monotone region, used to split bulk and tail integrals."""
        return self.x1(gamma) + 1.0

    def log_pdf(self, x, gamma):
        return self.log_c(gamma) - self.S(x, gamma)


# ---------------------------------------------------------------------------
# Concrete families.  ``l = ln x`` and ``m = ln ln x`` where they occur.


def _weibull_partials():
    def x_(x, g):
        return g * x ** (g - 1)

    def g_(x, g):
        return x**g * np.log(x)

    def xx(x, g):
        return g * (g - 1) * x ** (g - 2)

    def xg(x, g):
        return x ** (g - 1) * (1 + g * np.log(x))

    def gg(x, g):
        return x**g * np.log(x) ** 2

    def xxx(x, g):
        return g * (g - 1) * (g - 2) * x ** (g - 3)

    def xxg(x, g):
        return x ** (g - 2) * ((2 * g - 1) + g * (g - 1) * np.log(x))

    def xgg(x, g):
        l = np.log(x)
        return x ** (g - 1) * l * (2 + g * l)

    def ggg(x, g):
        return x**g * np.log(x) ** 3

    def xxxg(x, g):
        return x ** (g - 3) * ((3 * g * g - 6 * g + 2) + g * (g - 1) * (g - 2) * np.log(x))

    return dict(x=x_, g=g_, xx=xx, xg=xg, gg=gg, xxx=xxx, xxg=xxg, xgg=xgg, ggg=ggg, xxxg=xxxg)


def _normal_partials():
    zero = lambda x, g: np.zeros_like(np.asarray(x, dtype=float))
    return dict(
        x=lambda x, g: x / g,
        g=lambda x, g: -(x**2) / (2 * g * g),
        xx=lambda x, g: np.ones_like(np.asarray(x, dtype=float)) / g,
        xg=lambda x, g: -x / g**2,
        gg=lambda x, g: x**2 / g**3,
        xxx=zero,
        xxg=lambda x, g: -np.ones_like(np.asarray(x, dtype=float)) / g**2,
        xgg=lambda x, g: 2 * x / g**3,
        ggg=lambda x, g: -3 * x**2 / g**4,
        xxxg=zero,
    )


def _gumbel_partials():
    e = lambda x, g: np.exp(g * x)
    return dict(
        x=lambda x, g: g * e(x, g) - g,
        g=lambda x, g: x * e(x, g) - x,
        xx=lambda x, g: g * g * e(x, g),
        xg=lambda x, g: e(x, g) * (1 + g * x) - 1,
        gg=lambda x, g: x * x * e(x, g),
        xxx=lambda x, g: g**3 * e(x, g),
        xxg=lambda x, g: (2 * g + g * g * x) * e(x, g),
        xgg=lambda x, g: x * e(x, g) * (2 + g * x),
        ggg=lambda x, g: x**3 * e(x, g),
        xxxg=lambda x, g: (3 * g * g + g**3 * x) * e(x, g),
    )


def _log_weibull_partials():
    def x_(x, g):
        return g * np.log(x) ** (g - 1) / x

    def g_(x, g):
        l = np.log(x)
        return l**g * np.log(l)

    def xx(x, g):
        l = np.log(x)
        return g * l ** (g - 2) * ((g - 1) - l) / x**2

    def xg(x, g):
        l = np.log(x)
        return l ** (g - 1) * (1 + g * np.log(l)) / x

    def gg(x, g):
        l = np.log(x)
        return l**g * np.log(l) ** 2

    def xxx(x, g):
        l = np.log(x)
        return g * ((g - 1) * (g - 2) * l ** (g - 3) - 3 * (g - 1) * l ** (g - 2) + 2 * l ** (g - 1)) / x**3

    def xxg(x, g):
        l = np.log(x)
        m = np.log(l)
        return ((2 * g - 1) * l ** (g - 2) + g * (g - 1) * l ** (g - 2) * m - l ** (g - 1) - g * l ** (g - 1) * m) / x**2

    def xgg(x, g):
        l = np.log(x)
        m = np.log(l)
        return l ** (g - 1) * m * (2 + g * m) / x

    def ggg(x, g):
        l = np.log(x)
        return l**g * np.log(l) ** 3

    def xxxg(x, g):
        l = np.log(x)
        m = np.log(l)
        p, dp = g * (g - 1) * (g - 2), 3 * g * g - 6 * g + 2
        q, dq = 3 * g * (g - 1), 6 * g - 3
        return (
            dp * l ** (g - 3) + p * l ** (g - 3) * m - dq * l ** (g - 2) - q * l ** (g - 2) * m
            + 2 * l ** (g - 1) + 2 * g * l ** (g - 1) * m
        ) / x**3

    return dict(x=x_, g=g_, xx=xx, xg=xg, gg=gg, xxx=xxx, xxg=xxg, xgg=xgg, ggg=ggg, xxxg=xxxg)


def _log_normal_partials():
    L = np.log
    return dict(
        x=lambda x, g: (L(x) / g + 1) / x,
        g=lambda x, g: -L(x) ** 2 / (2 * g * g),
        xx=lambda x, g: ((1 - L(x)) / g - 1) / x**2,
        xg=lambda x, g: -L(x) / (g * g * x),
        gg=lambda x, g: L(x) ** 2 / g**3,
        xxx=lambda x, g: ((2 * L(x) - 3) / g + 2) / x**3,
        xxg=lambda x, g: (L(x) - 1) / (g * g * x**2),
        xgg=lambda x, g: 2 * L(x) / (g**3 * x),
        ggg=lambda x, g: -3 * L(x) ** 2 / g**4,
        xxxg=lambda x, g: -(2 * L(x) - 3) / (g * g * x**3),
    )


def _half_log_2pi_gamma(g):
    return -0.5 * math.log(2 * math.pi * g)


_BUILDERS = {
    "weibull": lambda: dict(
        support_lower=0.0,
        gamma_domain=(1.0, math.inf),
        gamma_closed_low=True,
        shape=lambda x, g: x**g,
        log_normalizer=None,
        partials=_weibull_partials(),
        monotone_from=lambda g: 0.0,
        admissible_classes=(TYPE_A, TYPE_B),
    ),
    "normal_variance": lambda: dict(
        support_lower=-math.inf,
        gamma_domain=(0.0, math.inf),
        shape=lambda x, g: x**2 / (2 * g),
        log_normalizer=_half_log_2pi_gamma,
        partials=_normal_partials(),
        monotone_from=lambda g: 0.0,
        admissible_classes=(TYPE_A,),
    ),
    "gumbel_type": lambda: dict(
        support_lower=0.0,
        gamma_domain=(0.0, math.inf),
        shape=lambda x, g: np.exp(g * x) - g * x,
        # gamma * exp(gamma x - e^{gamma x}) has mass 1/e on [0, inf).
        log_normalizer=lambda g: math.log(g) + 1.0,
        partials=_gumbel_partials(),
        monotone_from=lambda g: 0.0,
        admissible_classes=(TYPE_A,),
    ),
    "log_weibull": lambda: dict(
        support_lower=1.0,
        gamma_domain=(1.0, math.inf),
        shape=lambda x, g: np.log(x) ** g,
        log_normalizer=None,
        partials=_log_weibull_partials(),
        monotone_from=lambda g: math.exp(math.exp(-1.0 / g)),
        admissible_classes=(TYPE_B,),
    ),
    "log_normal": lambda: dict(
        support_lower=0.0,
        gamma_domain=(0.0, math.inf),
        shape=lambda x, g: np.log(x) ** 2 / (2 * g) + np.log(x),
        log_normalizer=_half_log_2pi_gamma,
        partials=_log_normal_partials(),
        monotone_from=lambda g: 1.0,
        admissible_classes=(TYPE_B,),
    ),
}

FAMILY_NAMES = tuple(_BUILDERS)


@functools.lru_cache(maxsize=None)
def builtin_family(name, regularity_class=None):
    """Return one of the bundled families by name.

    ``regularity_class`` selects the condition set when the family admits both
    (only ``weibull`` does); the default is TypeA whenever it is admissible.
    """
    try:
        params = _BUILDERS[name]()
    except KeyError:
        raise NotFound(f"unknown family {name!r}; choose from {', '.join(FAMILY_NAMES)}") from None
    classes = params["admissible_classes"]
    if regularity_class is None:
        regularity_class = TYPE_A if TYPE_A in classes else classes[0]
    if regularity_class not in classes:
        raise DomainError(f"family {name!r} does not satisfy {regularity_class} conditions")
    return TailFamily(name=name, regularity_class=regularity_class, **params)


def _quad_checked(fn, a, b, epsrel, what):
    value, err, info = integrate.quad(fn, a, b, epsabs=0.0, epsrel=epsrel, limit=400, full_output=True)[:3]
    if not math.isfinite(value) or err > max(10 * epsrel * abs(value), 1e-300):
        raise NumericalError(f"quadrature for {what} did not converge (error estimate {err:.3g})", err)
    return value


@functools.lru_cache(maxsize=256)
def normalizer_quadrature(family, gamma, epsrel=1e-12):
    """``ln C(gamma) = -ln int exp(-S(x, gamma)) dx`` over the support.

    The bulk ``(support_lower, x1 + 1]`` is integrated directly and the tail
    by :func:`tailratio.integrals.log_tail_integral` in the log domain.
    """
    from .integrals import log_tail_integral

    gamma = family.check_gamma(gamma)
    split = family.tail_start(gamma)
    log_tail = log_tail_integral(family, gamma, split)
    ref = float(family.shape(split, gamma))
    bulk = _quad_checked(
        lambda x: math.exp(-(float(family.shape(x, gamma)) - ref)),
        family.support_lower, split, epsrel, f"the normalizer of {family.name}",
    )
    # total = e^{-ref} * bulk + e^{log_tail}
    log_total = np.logaddexp(math.log(bulk) - ref, log_tail) if bulk > 0 else log_tail
    return -float(log_total)
