"""Single-source scheduling: threshold policies, their renewal evaluation and an MDP oracle.

A threshold policy with offset ``b`` and threshold ``beta`` submits the
``(b+1)``-th freshest feature at the first idle slot where
``gamma(AoI) >= beta``.  Deliveries split time into i.i.d. cycles, so its
average cost is ``E[cycle cost] / E[cycle length]``.  The optimal ``beta_b``
is the root of ``cost(beta) - beta * length(beta)``, which doubles as the
optimal average for that offset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ConvergenceError, InputError, UnreachableThresholdError
from .gittins import GittinsTable, gittins_table
from .penalty import PenaltyCurve, ServiceTimeDistribution

ROOT_TOL = 1e-12
TIE_TOL = 1e-10


@dataclass(frozen=True)
class CycleStatistics:
    expected_cost: float
    expected_length: float

    @property
    def average(self) -> float:
        return self.expected_cost / self.expected_length


@dataclass(frozen=True)
class ThresholdPolicy:
    buffer_offset: int
    beta: float
    gittins: GittinsTable

    def should_send(self, delta: int) -> bool:
        return self.gittins(delta) >= self.beta


class PenaltySums:
    """Prefix sums of the held penalty and expected in-service cost."""

    def __init__(self, p: PenaltyCurve, S: ServiceTimeDistribution):
        self.p, self.S = p, S
        # P[m] = sum_{j<m} p(j)
        self._prefix = np.concatenate([[0.0], np.cumsum(p.table)])

    def prefix(self, m):
        m = np.asarray(m)
        D = self.p.delta_max + 1
        inside = self._prefix[np.minimum(m, D)]
        return inside + np.maximum(m - D, 0) * self.p.plateau

    def send_cost(self, m):
        """``E[sum_{k<T} p(m + k)]`` for a submission at AoI ``m``."""
        m = np.asarray(m)
        ends = self.prefix(m[..., None] + self.S.support)
        return (ends - self.prefix(m)[..., None]) @ self.S.probs


class RenewalEvaluator:
    """Cycle statistics of threshold policies for one ``(p, S, b)``.

    Thresholds are expressed on the Gittins scale: the policy waits until
    ``gamma(T + b + z) >= g``.
    """

    def __init__(self, p: PenaltyCurve, S: ServiceTimeDistribution, b: int = 0,
                 gittins: GittinsTable | None = None):
        if b < 0:
            raise InputError("buffer offset must be non-negative")
        self.p, self.S, self.b = p, S, int(b)
        self.gittins = gittins if gittins is not None else gittins_table(p, S)
        self.gamma = self.gittins.values
        self.plateau = self.gittins.plateau
        self.sums = PenaltySums(p, S)
        self._starts = S.support + self.b
        # every reachable submission age is below this, so tabulate the send cost once
        top = max(self.gamma.size, int(self._starts[-1]) + 1)
        self._send = self.sums.send_cost(np.arange(top))
        self._prefix = self.sums.prefix(np.arange(top))

    def waiting_times(self, g: float, starts=None) -> np.ndarray:
        """Smallest ``z >= 0`` with ``gamma(s + z) >= g`` for each start ``s``."""
        starts = self._starts if starts is None else np.asarray(starts)
        if g > self.plateau:
            raise UnreachableThresholdError(
                f"threshold {g:.12g} exceeds the largest index value {self.plateau:.12g}")
        n = self.gamma.size
        idx = np.where(self.gamma >= g, np.arange(n), n - 1)
        nxt = np.minimum.accumulate(idx[::-1])[::-1]
        s = np.minimum(starts, n - 1)
        return nxt[s] - s

    def stats(self, g: float) -> CycleStatistics:
        z = self.waiting_times(g)
        s = self._starts
        m = s + z
        per_start = self._prefix[m] - self._prefix[s] + self._send[m]
        P = self.S.probs
        return CycleStatistics(float(P @ per_start), float(P @ z) + self.S.mean)

    def excess(self, g: float) -> float:
        """``cost(g) - g * length(g)``; continuous and decreasing in ``g``."""
        st = self.stats(g)
        return st.expected_cost - g * st.expected_length

    def root(self, weight: float = 1.0, charge: float = 0.0) -> tuple[float, bool]:
        """Root ``g`` of ``weight * excess(g) + charge * E[T] = 0``.

        Returns ``(g, saturated)``.  Thresholds above the plateau are never
        met, which amounts to never sending and an average of the plateau
        value; when the equation has no root at or below the plateau the
        answer saturates there.
        """
        ET = self.S.mean

        def F(g):
            return weight * self.excess(g) + charge * ET

        hi = self.plateau
        if F(hi) >= 0:
            return hi, True
        lo = self.p.minimum - abs(charge) / weight
        if F(lo) < 0:
            raise ConvergenceError("root bracket lost its sign change")
        while hi - lo > ROOT_TOL * max(1.0, abs(lo), abs(hi)):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if F(mid) >= 0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi), False


def waiting_time(T: int, b: int, beta: float, gittins: GittinsTable) -> int:
    if T < 1:
        raise InputError("service time must be >= 1")
    ev = RenewalEvaluator(gittins.penalty, gittins.service, b, gittins)
    return int(ev.waiting_times(beta, [T + b])[0])


def cycle_statistics(p: PenaltyCurve, S: ServiceTimeDistribution, b: int, beta: float,
                     gittins: GittinsTable | None = None) -> CycleStatistics:
    return RenewalEvaluator(p, S, b, gittins).stats(beta)


def threshold_root(p: PenaltyCurve, S: ServiceTimeDistribution, b: int = 0,
                   gittins: GittinsTable | None = None) -> float:
    """Optimal average cost ``beta_b`` of offset ``b``, found by bisection."""
    return RenewalEvaluator(p, S, b, gittins).root()[0]


def threshold_roots(p: PenaltyCurve, S: ServiceTimeDistribution, B: int,
                    gittins: GittinsTable | None = None) -> np.ndarray:
    if B < 1:
        raise ConfigurationError("buffer size B must be >= 1")
    gt = gittins if gittins is not None else gittins_table(p, S)
    return np.array([threshold_root(p, S, b, gt) for b in range(B)])


def optimal_buffer_offset(p: PenaltyCurve, S: ServiceTimeDistribution, B: int,
                          gittins: GittinsTable | None = None) -> tuple[int, float]:
    """``(b*, beta*)``: the offset with the smallest root, ties to the freshest."""
    roots = threshold_roots(p, S, B, gittins)
    best = roots.min()
    b = int(np.flatnonzero(roots <= best + TIE_TOL)[0])
    return b, float(roots[b])


def optimal_threshold_policy(p: PenaltyCurve, S: ServiceTimeDistribution, B: int = 1) -> ThresholdPolicy:
    gt = gittins_table(p, S)
    b, beta = optimal_buffer_offset(p, S, B, gt)
    return ThresholdPolicy(b, beta, gt)


# ---------------------------------------------------------------------------
# brute-force optimality oracle


@dataclass(frozen=True)
class OracleResult:
    gain: float
    policy: np.ndarray  # per AoI: -1 idle, otherwise the offset sent
    sweeps: int


def mdp_oracle_average_cost(p: PenaltyCurve, S: ServiceTimeDistribution, B: int,
                            delta_truncate: int | None = None, tol: float = 1e-10,
                            max_sweeps: int = 1_000_000, eta: float = 0.5) -> OracleResult:
    """Relative value iteration over the idle-slot decision process.

    State: the AoI at an idle slot.  Idling costs ``p(delta)`` and moves to
    ``delta + 1``; sending offset ``b`` costs ``E[sum_{k<T} p(delta+k)]`` over
    ``E[T]`` slots and lands in ``T + b``.  A data transformation with
    ``eta < 1`` makes the chain aperiodic so plain iteration converges to
    the gain.  States above ``delta_truncate`` are merged with it, which is
    exact because both the penalty and every action's data are constant there.
    """
    if B < 1:
        raise ConfigurationError("buffer size B must be >= 1")
    floor = 4 * (p.delta_max + S.t_max)
    N = floor if delta_truncate is None else int(delta_truncate)
    if N < floor:
        raise ConfigurationError(f"delta_truncate must be >= {floor}")
    N = max(N, S.t_max + B)
    states = np.arange(N + 1)
    idle_cost = p(states)
    idle_next = np.minimum(states + 1, N)
    send_cost = PenaltySums(p, S).send_cost(states) / S.mean  # cost rate, identical for every b
    land = [np.minimum(S.support + b, N) for b in range(B)]
    tau = S.mean
    anchor = S.t_min
    h = np.zeros(N + 1)
    for sweep in range(1, max_sweeps + 1):
        q_idle = idle_cost + eta * (h[idle_next] - h) + h
        land_vals = np.array([h[lv] @ S.probs for lv in land])
        best_b = int(np.argmin(land_vals))
        q_send = send_cost + (eta / tau) * (land_vals[best_b] - h) + h
        th = np.minimum(q_idle, q_send)
        diff = th - h
        span = diff.max() - diff.min()
        h = th - th[anchor]
        if span < tol:
            gain = 0.5 * (diff.max() + diff.min())
            policy = np.where(q_send < q_idle, best_b, -1)
            return OracleResult(float(gain), policy, sweep)
    raise ConvergenceError(f"value iteration did not converge in {max_sweeps} sweeps")

