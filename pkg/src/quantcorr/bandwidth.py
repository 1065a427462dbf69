"""Bandwidth rules for sparsity and kernel-smoothing steps.

References
----------
.. [1] Bofinger, E. (1975). "Estimation of a density function using order
       statistics." *Australian Journal of Statistics* 17: 1-17.
.. [2] Hall, P. and Sheather, S. (1988). "On the distribution of the
       Studentized quantile." *JRSS-B* 50: 381-391.
"""

from __future__ import annotations

import enum

from quantcorr.numerics import as_tau, normal_pdf, normal_ppf
from quantcorr.errors import ValidationError


class BandwidthRule(str, enum.Enum):
    HALL_SHEATHER = "hs"
    BOFINGER = "b"
    THREE_HALL_SHEATHER = "3hs"
    POINT_SIX_BOFINGER = "0.6b"

    @classmethod
    def coerce(cls, rule: "BandwidthRule | str") -> "BandwidthRule":
        if isinstance(rule, cls):
            return rule
        try:
            return cls(str(rule).lower())
        except ValueError:
            choices = ", ".join(r.value for r in cls)
            raise ValidationError(f"unknown bandwidth rule {rule!r}; choose from {choices}") from None


ALL_RULES = tuple(BandwidthRule)


def hall_sheather(n: float, tau: float, alpha: float = 0.05) -> float:
    """Hall-Sheather bandwidth ``n^(-1/3) z^(2/3) {1.5 phi^2 / (2 q^2 + 1)}^(1/3)``."""
    q = normal_ppf(tau)
    z = normal_ppf(1.0 - alpha / 2.0)
    core = 1.5 * normal_pdf(q) ** 2 / (2.0 * q * q + 1.0)
    return float(n ** (-1.0 / 3.0) * z ** (2.0 / 3.0) * core ** (1.0 / 3.0))


def bofinger(n: float, tau: float) -> float:
    """Bofinger bandwidth ``n^(-1/5) {4.5 phi^4 / (2 q^2 + 1)^2}^(1/5)``."""
    q = normal_ppf(tau)
    core = 4.5 * normal_pdf(q) ** 4 / (2.0 * q * q + 1.0) ** 2
    return float(n ** (-0.2) * core ** 0.2)


def bandwidth(rule: BandwidthRule | str, n: int, tau: float, alpha: float = 0.05) -> float:
    """Evaluate a named bandwidth rule on the quantile scale.

    Parameters
    ----------
    rule : BandwidthRule or str
        One of ``hs``, ``b``, ``3hs``, ``0.6b``.
    n : int
        Sample size, at least 2.
    tau : float
        Quantile level.
    alpha : float
        Confidence level parameter of the Hall-Sheather rule.
    """
    rule = BandwidthRule.coerce(rule)
    tau = as_tau(tau)
    if n < 2:
        raise ValidationError(f"bandwidth needs n >= 2, got {n}")
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    if rule is BandwidthRule.HALL_SHEATHER:
        return hall_sheather(n, tau, alpha)
    if rule is BandwidthRule.THREE_HALL_SHEATHER:
        return 3.0 * hall_sheather(n, tau, alpha)
    if rule is BandwidthRule.BOFINGER:
        return bofinger(n, tau)
    return 0.6 * bofinger(n, tau)
