"""Whittle indices for multi-source scheduling with selection from buffers.

Each pair (source ``l``, buffer offset ``b``) is an arm.  Relaxing the
one-transmission-per-slot constraint with a charge ``lambda`` per busy slot
decouples the sources; the Whittle index ``W_{l,b}(delta)`` is the charge at
which idling and sending are equally good at AoI ``delta``.  In closed form

    W(delta) = (w / E[T]) * (E[z + T2] * gamma(delta) - E[sum_{t=T1}^{T1+z+T2-1} p(t + b)])

with ``z`` the wait until ``gamma`` first climbs back to ``gamma(delta)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, MisuseError
from .gittins import GittinsTable, gittins_table
from .penalty import PenaltyCurve, ServiceTimeDistribution
from .single_source import RenewalEvaluator


@dataclass(frozen=True)
class Arm:
    source: int
    offset: int
    weight: float
    penalty: PenaltyCurve
    service: ServiceTimeDistribution
    gittins: GittinsTable | None = None
    _renewal: RenewalEvaluator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.weight > 0:
            raise InputError("arm weight must be positive")
        if self.offset < 0:
            raise InputError("buffer offset must be non-negative")
        gt = self.gittins if self.gittins is not None else gittins_table(self.penalty, self.service)
        object.__setattr__(self, "gittins", gt)
        object.__setattr__(self, "_renewal", RenewalEvaluator(self.penalty, self.service, self.offset, gt))


def source_arms(source: int, penalty: PenaltyCurve, service: ServiceTimeDistribution,
                weight: float = 1.0, offsets=(0,)) -> list[Arm]:
    """Arms for one source sharing a single Gittins table."""
    gt = gittins_table(penalty, service)
    return [Arm(source, int(b), float(weight), penalty, service, gt) for b in offsets]


def whittle_waiting_time(arm: Arm, T: int, delta: int) -> int:
    if T < 1 or delta < 0:
        raise InputError("need T >= 1 and delta >= 0")
    return int(arm._renewal.waiting_times(arm.gittins(delta), [T + arm.offset])[0])


def whittle_index(arm: Arm, delta: int) -> float:
    """Exact double expectation over two independent service times."""
    if delta < 0:
        raise InputError("AoI must be non-negative")
    st = arm._renewal.stats(arm.gittins(delta))
    g = arm.gittins(delta)
    return arm.weight / arm.service.mean * (st.expected_length * g - st.expected_cost)


def whittle_special_case(w: float, p: PenaltyCurve, delta: int) -> float:
    """``w * (delta * p(delta+1) - sum_{t=1}^{delta} p(t))``.

    Valid for a nondecreasing penalty, unit service time and offset 0.
    """
    if not p.is_nondecreasing():
        raise MisuseError("closed form needs a nondecreasing penalty")
    if delta < 1:
        raise MisuseError("closed form needs delta >= 1")
    return w * (delta * p(delta + 1) - float(np.sum(p(np.arange(1, delta + 1)))))


@dataclass(frozen=True)
class WhittleTable:
    """``values[(l, b)][delta]``; indices past the table end are constant."""

    values: dict

    def __call__(self, source: int, offset: int, delta: int) -> float:
        row = self.values[(source, offset)]
        return float(row[min(int(delta), row.size - 1)])

    @property
    def arms(self):
        return sorted(self.values)

    def rows(self):
        for (l, b) in self.arms:
            for d, v in enumerate(self.values[(l, b)]):
                yield l, b, d, float(v)


def whittle_row(arm: Arm, length: int | None = None) -> np.ndarray:
    """``W(delta)`` for ``delta = 0..length-1`` (defaults to the Gittins table span)."""
    n = arm.gittins.values.size if length is None else int(length)
    gam = arm.gittins.extended(n)
    uniq, inv = np.unique(gam, return_inverse=True)
    vals = np.array([whittle_index(arm, int(np.flatnonzero(gam == g)[0])) for g in uniq])
    row = vals[inv]
    row.setflags(write=False)
    return row


def build_whittle_table(arms, length: int | None = None) -> WhittleTable:
    """``W`` depends on ``delta`` only through ``gamma(delta)``, so rows are filled per distinct index value."""
    return WhittleTable({(a.source, a.offset): whittle_row(a, length) for a in arms})


def whittle_decide(table: WhittleTable, aoi, channel_idle: bool, permitted=None):
    """Pick the arm to schedule, or ``None``.

    ``aoi[l]`` is the current AoI of source ``l``.  Nothing is sent when the
    channel is busy or every index is negative.  Ties go to the smaller
    source and then the smaller offset.
    """
    if not channel_idle:
        return None
    best, best_val = None, -np.inf
    for l, b in table.arms:
        if permitted is not None and (l, b) not in permitted:
            continue
        v = table(l, b, aoi[l])
        if v > best_val:
            best, best_val = (l, b), v
    if best is None or best_val < 0:
        return None
    return best


@dataclass(frozen=True)
class IndexabilityReport:
    lambdas: np.ndarray
    beta_bar: np.ndarray
    saturated: np.ndarray
    increasing: bool
    nested: bool
    passive_sets: list

    @property
    def indexable(self) -> bool:
        return self.increasing and self.nested


def charged_threshold(arm: Arm, charge: float) -> tuple[float, bool]:
    """``beta_bar(lambda)``: root of ``w*cost - beta*length + lambda*E[T]`` in weighted units."""
    g, saturated = arm._renewal.root(arm.weight, charge)
    return arm.weight * g, saturated


def indexability_diagnostic(arm: Arm, lambdas) -> IndexabilityReport:
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(np.diff(lambdas) <= 0):
        raise InputError("lambda grid must be strictly increasing")
    roots = [charged_threshold(arm, lam) for lam in lambdas]
    beta = np.array([r[0] for r in roots])
    sat = np.array([r[1] for r in roots])
    wg = arm.weight * arm.gittins.values
    passive = [frozenset(np.flatnonzero(wg <= bb).tolist()) for bb in beta]
    increasing = bool(np.all(np.diff(beta) > 0))
    nested = all(a <= b for a, b in zip(passive, passive[1:]))
    return IndexabilityReport(lambdas, beta, sat, increasing, nested, passive)
