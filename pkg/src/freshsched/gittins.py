"""Gittins index of the AoI bandit with a random service delay.

``gamma(delta) = inf_{tau >= 1} (1/tau) sum_{k<tau} e(delta + k)`` where
``e(a) = E[p(a + T)]``.  With the penalty held constant at ``c = p(delta_max)``
beyond its table, ``e`` is constant ``c`` from ``delta_max`` on, so the running
average is monotone toward ``c`` once ``tau`` passes the flat region.  The
infimum is therefore the minimum of the finitely many averages up to a safe
horizon and the limit ``c`` itself.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputError
from .penalty import PenaltyCurve, ServiceTimeDistribution


def expected_penalty_table(p: PenaltyCurve, S: ServiceTimeDistribution, length: int) -> np.ndarray:
    """``e(a) = sum_T P(T) p(a + T)`` for ``a = 0..length-1``."""
    a = np.arange(length)
    idx = np.minimum(a[:, None] + S.support[None, :], p.delta_max)
    return p.table[idx] @ S.probs


def expected_penalty_after_service(p: PenaltyCurve, S: ServiceTimeDistribution, a: int) -> float:
    if a < 0:
        raise InputError("AoI must be non-negative")
    a = min(int(a), p.delta_max)  # e is constant from delta_max on
    return float(expected_penalty_table(p, S, a + 1)[a])


def safe_horizon(p: PenaltyCurve, S: ServiceTimeDistribution) -> int:
    return p.delta_max + S.t_max + 1


@dataclass(frozen=True)
class GittinsTable:
    """``gamma(delta)`` for ``delta = 0..len(values)-1``; constant beyond."""

    values: np.ndarray
    penalty: PenaltyCurve
    service: ServiceTimeDistribution
    tau_max: int

    def __call__(self, delta):
        d = np.minimum(np.asarray(delta), self.values.size - 1)
        out = self.values[d]
        return float(out) if np.ndim(out) == 0 else out

    @property
    def plateau(self) -> float:
        """Value of ``gamma`` for every ``delta`` past the table (= ``p(delta_max)``)."""
        return float(self.values[-1])

    @property
    def supremum(self) -> float:
        return float(self.values.max())

    def extended(self, length: int) -> np.ndarray:
        return self.values[np.minimum(np.arange(length), self.values.size - 1)]


def gittins_table(p: PenaltyCurve, S: ServiceTimeDistribution, delta_max: int | None = None,
                  tau_max: int | None = None) -> GittinsTable:
    """Tabulate the index over ``delta = 0..max(delta_max, safe horizon)``.

    Running sums across all ``delta`` rows are advanced together, one ``tau``
    at a time, with compensated summation.
    """
    horizon = safe_horizon(p, S)
    if tau_max is None:
        tau_max = horizon
    if tau_max < horizon:
        raise ConfigurationError(f"tau_max={tau_max} below the safe horizon {horizon}")
    n = max(horizon, 0 if delta_max is None else int(delta_max) + 1)
    e = expected_penalty_table(p, S, n + tau_max)
    c = p.plateau
    total = np.zeros(n)
    comp = np.zeros(n)
    best = np.full(n, c)
    for tau in range(1, tau_max + 1):
        y = e[tau - 1:tau - 1 + n] - comp
        t = total + y
        comp = (t - total) - y
        total = t
        np.minimum(best, total / tau, out=best)
    best.setflags(write=False)
    return GittinsTable(best, p, S, int(tau_max))


def gittins_index(p: PenaltyCurve, S: ServiceTimeDistribution, delta: int, tau_max: int | None = None) -> float:
    if delta < 0:
        raise InputError("AoI must be non-negative")
    return gittins_table(p, S, delta, tau_max)(delta)
