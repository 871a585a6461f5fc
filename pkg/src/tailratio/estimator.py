"""scikit-learn style wrapper around the top-k log-LR test."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import DomainError
from .families import builtin_family
from .likelihood import TopKSample, log_lr


class TopKLikelihoodRatioTest(BaseEstimator):
    """Test ``gamma = gamma0`` against ``gamma0 + t(k, u)`` from the top ``k`` of a sample.

    Args:
        family: builtin family name.
        gamma0: null shape parameter.
        k: number of upper order statistics used.
        u: local alternative scale (nonzero).
        alpha: test level.
        regularity_class: ``"TypeA"``, ``"TypeB"`` or ``None`` for the family default.

    Attributes:
        report_: the :class:`LrReport` from the last ``fit``.
        log_lr_: ``report_.log_lr``.
        p_value_: one-sided p-value.
        decision_: ``"reject"`` or ``"retain"``.
        n_samples_fit_: sample size seen by ``fit``.

    Example:
        >>> test = TopKLikelihoodRatioTest("weibull", gamma0=1.0, k=30).fit(data)  # doctest: +SKIP
        >>> test.decision_  # doctest: +SKIP
    """

    def __init__(self, family="weibull", gamma0=1.0, k=25, u=1.0, alpha=0.05, regularity_class=None):
        self.family = family
        self.gamma0 = gamma0
        self.k = k
        self.u = u
        self.alpha = alpha
        self.regularity_class = regularity_class

    def fit(self, X, y=None):
        """Run the test on a 1-D sample or a single-column 2-D array."""
        X = check_array(X, ensure_2d=False, dtype=np.float64)
        if X.ndim == 2:
            if X.shape[1] != 1:
                raise ValueError(f"expected a single column, got {X.shape[1]} columns")
            X = X[:, 0]
        if self.u == 0:
            raise DomainError("u must be nonzero")
        fam = builtin_family(self.family)
        sample = TopKSample.from_data(X, self.k)
        self.report_ = log_lr(fam, self.gamma0, self.u, sample, alpha=self.alpha,
                              regularity_class=self.regularity_class)
        self.log_lr_ = self.report_.log_lr
        self.p_value_ = self.report_.p_value
        self.decision_ = self.report_.decision
        self.n_samples_fit_ = X.shape[0]
        return self

    def decide(self):
        check_is_fitted(self, "report_")
        return self.decision_
