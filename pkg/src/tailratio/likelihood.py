"""Top-k conditional likelihood ratio for local alternatives ``gamma + t(k, u)``."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .asymptotics import centering_H, intermediate_quantile, local_step
from .errors import DegenerateStep, DomainError, NumericalError
from .families import TYPE_B
from .integrals import log_tail_integral

REJECT = "reject"
RETAIN = "retain"


@dataclass(frozen=True)
class TopKSample:
    """The ``k`` largest order statistics of a sample of size ``n`` and ``X_(n-k)``.

    ``top`` is stored sorted in descending order whatever order it was given in.
    """

    n: int
    k: int
    top: np.ndarray = field(repr=False)
    threshold: float

    def __post_init__(self):
        top = np.sort(np.asarray(self.top, dtype=float))[::-1].copy()
        top.setflags(write=False)
        object.__setattr__(self, "top", top)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "threshold", float(self.threshold))
        if top.ndim != 1 or top.size != self.k:
            raise DomainError(f"expected {self.k} top values, got shape {top.shape}")
        if not (1 <= self.k < self.n):
            raise DomainError(f"need 1 <= k < n, got n={self.n}, k={self.k}")
        if not np.all(np.isfinite(top)) or not math.isfinite(self.threshold):
            raise DomainError("order statistics must be finite")
        if top[-1] < self.threshold:
            raise DomainError(f"min(top)={top[-1]!r} is below the threshold {self.threshold!r}")

    @classmethod
    def from_data(cls, data, k):
        """Extract the top ``k`` and the threshold from a full sample."""
        x = np.sort(np.asarray(data, dtype=float).ravel())
        n = x.size
        k = int(k)
        if not (1 <= k < n):
            raise DomainError(f"need 1 <= k < n, got n={n}, k={k}")
        return cls(n=n, k=k, top=x[n - k:], threshold=float(x[n - k - 1]))

    def to_dict(self):
        return {"n": self.n, "k": self.k, "top": self.top.tolist(), "threshold": self.threshold}


@dataclass(frozen=True)
class LrReport:
    family: str
    regularity_class: str
    n: int
    k: int
    gamma0: float
    u: float
    a: float
    t: float
    log_lr: float
    centering: float
    centered_log_lr: float
    decomposition: tuple[float, float, float] | None = None
    decomposition_gap: float | None = None
    alpha: float | None = None
    decision: str | None = None
    p_value: float | None = None

    def to_dict(self):
        d = {
            "family": self.family,
            "regularity_class": self.regularity_class,
            "n": self.n,
            "k": self.k,
            "gamma0": self.gamma0,
            "u": self.u,
            "a": self.a,
            "t": self.t,
            "log_lr": self.log_lr,
            "centering": self.centering,
            "centered_log_lr": self.centered_log_lr,
            "decomposition": None,
            "decomposition_gap": self.decomposition_gap,
            "alpha": self.alpha,
            "decision": self.decision,
            "p_value": self.p_value,
        }
        if self.decomposition is not None:
            d["decomposition"] = dict(zip(("lnA1", "lnA2", "lnA3"), self.decomposition))
        return d


def _check_sample(family, gamma, sample):
    x1 = family.x1(gamma)
    if not sample.threshold > x1:
        raise DomainError(
            f"threshold {sample.threshold!r} is not beyond x1={x1!r} of {family.name} at gamma={gamma!r}"
        )
    if sample.top[0] <= family.support_lower:
        raise DomainError("sample values lie outside the support")


def topk_loglik(family, gamma, sample):
    """Conditional log-likelihood of the top ``k`` given ``X_(n-k) = q``.

    ``-sum S(X_i) - k ln int_q^inf exp(-S)``; the ``k!`` ordering constant and
    the normalizer are the same under every hypothesis and are omitted.
    """
    gamma = family.check_gamma(gamma)
    _check_sample(family, gamma, sample)
    s = family.shape(sample.top, gamma)
    return float(-np.sum(s) - sample.k * log_tail_integral(family, gamma, sample.threshold))


def _exact_log_lr(family, gamma0, t, sample):
    """``topk_loglik(gamma0 + t) - topk_loglik(gamma0)`` arranged to avoid cancellation.

    The ratio is written with the shape increments taken relative to the
    threshold and with the tail integrals in their ``exp(-S(q))``-scaled form.
    """
    if t == 0:
        return 0.0
    g1 = gamma0 + t
    q = sample.threshold
    d_top = family.shape(sample.top, g1) - family.shape(sample.top, gamma0)
    d_q = float(family.shape(q, g1) - family.shape(q, gamma0))
    log_j1 = log_tail_integral(family, g1, q) + float(family.shape(q, g1))
    log_j0 = log_tail_integral(family, gamma0, q) + float(family.shape(q, gamma0))
    return float(-np.sum(d_top - d_q) - sample.k * (log_j1 - log_j0))


def decompose_A123(family, gamma0, u, sample, t=None):
    """Diagnostic factors ``ln A1, ln A2, ln A3`` with ``R = A1 * A2 * A3``.

    ``A3`` replaces each tail integral by its two-term Laplace form
    ``exp(-S)/S_x * (1 - S_xx/S_x^2)``, so the sum differs from the exact
    log ratio by the truncation error of that form.
    """
    gamma0 = family.check_gamma(gamma0)
    _check_sample(family, gamma0, sample)
    if t is None:
        a = intermediate_quantile(family, gamma0, sample.n, sample.k).a
        t = local_step(family, gamma0, a, sample.k, u)
    if t == 0:
        return 0.0, 0.0, 0.0
    g1 = gamma0 + t
    q, k = sample.threshold, sample.k
    d_top = family.shape(sample.top, g1) - family.shape(sample.top, gamma0)
    d_q = float(family.shape(q, g1) - family.shape(q, gamma0))
    ln_a1 = float(-np.sum(d_top) + k * d_q)
    sx0, sx1 = float(family.partial("x", q, gamma0)), float(family.partial("x", q, g1))
    ln_a2 = k * (math.log(sx1) - math.log(sx0))
    b0 = 1.0 - float(family.partial("xx", q, gamma0)) / sx0**2
    b1 = 1.0 - float(family.partial("xx", q, g1)) / sx1**2
    if not (b0 > 0 and b1 > 0):
        raise NumericalError(f"two-term Laplace bracket is not positive at q={q!r}; expansion invalid here")
    ln_a3 = k * (math.log(b0) - math.log(b1))
    return ln_a1, ln_a2, ln_a3


def test_decision(report, alpha):
    """One-sided decision from the null limit ``N(-u^2/2, u^2)``.

    ``z = (centered_log_lr + u^2/2) / |u|``; reject when ``z`` exceeds the
    standard normal ``1 - alpha`` quantile.  Returns ``(decision, p_value)``.
    """
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    u = report.u
    if u == 0:
        raise DegenerateStep("u = 0 gives identical hypotheses; the test is undefined")
    z = (report.centered_log_lr + 0.5 * u * u) / abs(u)
    p_value = float(stats.norm.sf(z))
    return (REJECT if z > stats.norm.isf(alpha) else RETAIN), p_value


test_decision.__test__ = False  # not a pytest test despite the name


def log_lr(family, gamma0, u, sample, alpha=None, regularity_class=None, decompose=True):
    """Exact log likelihood ratio ``ln R_n(u)`` with centering and decision.

    ``regularity_class`` defaults to the family's; TypeB runs subtract
    ``sqrt(k) H(a)`` and TypeA runs leave the statistic uncentered.  With
    ``u = 0`` the hypotheses coincide: the ratio is 0 and the null is retained.
    """
    gamma0 = family.check_gamma(gamma0)
    cls = regularity_class or family.regularity_class
    if cls not in family.admissible_classes:
        raise DomainError(f"family {family.name!r} does not satisfy {cls} conditions")
    _check_sample(family, gamma0, sample)
    a = intermediate_quantile(family, gamma0, sample.n, sample.k).a
    t = local_step(family, gamma0, a, sample.k, u)
    value = _exact_log_lr(family, gamma0, t, sample)
    centering = 0.0
    if cls == TYPE_B and u != 0:
        centering = math.sqrt(sample.k) * centering_H(family, gamma0, a, sample.k, u).value
    centered = value - centering
    decomposition = gap = None
    if decompose:
        try:
            decomposition = decompose_A123(family, gamma0, u, sample, t=t)
            gap = abs(math.fsum(decomposition) - value)
        except NumericalError:
            decomposition = gap = None
    decision = p_value = None
    report = LrReport(
        family=family.name, regularity_class=cls, n=sample.n, k=sample.k, gamma0=gamma0, u=float(u),
        a=a, t=t, log_lr=value, centering=centering, centered_log_lr=centered,
        decomposition=decomposition, decomposition_gap=gap, alpha=alpha,
    )
    if alpha is not None:
        if u == 0:
            decision, p_value = RETAIN, 1.0
        else:
            decision, p_value = test_decision(report, alpha)
        report = dataclasses.replace(report, decision=decision, p_value=p_value)
    return report
