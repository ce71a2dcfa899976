"""Slotted simulation of single- and multi-source freshness-aware scheduling.

Each slot ``t`` runs, in order:

1. delivery: a transmission finishing at ``t`` resets the source's AoI to
   the age of the delivered feature, otherwise every AoI grows by one;
2. generation (periodic policy only): a feature produced at ``t`` joins the
   FIFO queue unless ``B`` features are already waiting;
3. scheduling: an idle channel may start one transmission, which occupies it
   for ``T`` slots and cannot be interrupted;
4. cost: ``sum_l w_l p_l(AoI_l(t))`` is accumulated once ``t >= warmup``.

Service times are drawn up front per source from a Philox stream, so a run is
a deterministic function of ``(config, seed, replication)``.  The same step
functions run compiled (numba) or interpreted with invariant checks; both
produce identical numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .errors import ConfigurationError, MisuseError, UnreachableThresholdError
from .gittins import GittinsTable, gittins_table
from .multi_source import build_whittle_table, source_arms
from .penalty import PenaltyCurve, ServiceTimeDistribution
from .single_source import optimal_buffer_offset, threshold_root

ZERO_WAIT, THRESHOLD, PERIODIC = 0, 1, 2
MAF, WHITTLE = 0, 1
MULTI_POLICIES = ("maf_zero_wait", "whittle_gaw", "whittle_sfb")


# ---------------------------------------------------------------------------
# policies


@dataclass(frozen=True)
class ZeroWait:
    """Send the freshest feature whenever the channel is idle."""

    name: str = "zero_wait"


@dataclass(frozen=True)
class Threshold:
    """Send offset ``b`` at the first idle slot with ``gamma(AoI) >= beta``."""

    b: int
    beta: float
    gittins: GittinsTable | None = None
    name: str = "threshold"


@dataclass(frozen=True)
class Periodic:
    """Generate every ``period`` slots into a FIFO queue of ``buffer`` features; serve FCFS."""

    period: int
    buffer: int = 1
    name: str = "periodic"


def optimal_gaw(p: PenaltyCurve, S: ServiceTimeDistribution) -> Threshold:
    gt = gittins_table(p, S)
    return Threshold(0, threshold_root(p, S, 0, gt), gt, name="gaw_optimal")


def optimal_sfb(p: PenaltyCurve, S: ServiceTimeDistribution, B: int) -> Threshold:
    gt = gittins_table(p, S)
    b, beta = optimal_buffer_offset(p, S, B, gt)
    return Threshold(b, beta, gt, name="sfb_optimal")


# ---------------------------------------------------------------------------
# configuration and results


@dataclass(frozen=True)
class SourceSpec:
    penalty: PenaltyCurve
    service: ServiceTimeDistribution
    weight: float = 1.0
    buffer: int = 1
    policy: object = None

    def __post_init__(self):
        if self.buffer < 1:
            raise ConfigurationError("buffer size must be >= 1")
        if not self.weight > 0:
            raise ConfigurationError("weights must be positive")


@dataclass(frozen=True)
class SimConfig:
    sources: tuple
    horizon: int
    warmup: int | None = None
    seed: int = 0
    replications: int = 1
    trace_length: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        if not self.sources:
            raise ConfigurationError("at least one source is required")
        if self.warmup is None:
            dmax = max(s.penalty.delta_max for s in self.sources)
            tmax = max(s.service.t_max for s in self.sources)
            object.__setattr__(self, "warmup", 10 * (dmax + tmax))
        if self.warmup < 0 or self.horizon <= self.warmup:
            raise ConfigurationError("need horizon > warmup >= 0")
        if self.replications < 1:
            raise ConfigurationError("replications must be >= 1")


@dataclass(frozen=True)
class SimResult:
    average_error: float
    per_source: np.ndarray
    aoi_mean: np.ndarray
    aoi_max: np.ndarray
    events: dict
    trace: np.ndarray | None = field(default=None, repr=False)


# ---------------------------------------------------------------------------
# step logic (compiled and interpreted)


def _single_impl(pen, gamma, draws, policy, b, beta, period, cap, horizon, warmup, aoi0,
                 trace, debug):
    aoi = aoi0
    busy = False
    finish = -1
    deliver_age = 0
    k = 0
    queue = np.zeros(max(cap, 1), dtype=np.int64)
    head = 0
    size = 0
    total = 0.0
    aoi_sum = 0.0
    aoi_max = 0
    sends = 0
    deliveries = 0
    drops = 0
    npen = pen.size
    ngam = gamma.size
    ntrace = trace.shape[0]
    for t in range(horizon):
        if t > 0:
            if busy and t == finish:
                aoi = deliver_age
                busy = False
                deliveries += 1
            else:
                aoi += 1
        if policy == PERIODIC and t % period == 0:
            if size < cap:
                queue[(head + size) % cap] = t
                size += 1
            else:
                drops += 1
        if not busy:
            send = False
            age0 = 0
            if policy == ZERO_WAIT:
                send = True
            elif policy == THRESHOLD:
                send = gamma[min(aoi, ngam - 1)] >= beta
                age0 = b
            elif size > 0:
                send = True
                age0 = t - queue[head]
                head = (head + 1) % cap
                size -= 1
            if send:
                T = draws[k]
                k += 1
                busy = True
                finish = t + T
                deliver_age = T + age0
                sends += 1
                if debug:
                    assert T >= 1
                    assert policy == PERIODIC or age0 < max(b + 1, 1)
        elif debug:
            assert finish > t  # non-preemptive: the ongoing job is untouched
        if t < ntrace:
            trace[t, 0] = aoi
            trace[t, 1] = 1 if busy else 0
        if t >= warmup:
            total += pen[min(aoi, npen - 1)]
            aoi_sum += aoi
            if aoi > aoi_max:
                aoi_max = aoi
    return total, aoi_sum, aoi_max, sends, deliveries, drops


def _multi_impl(pens, pen_len, draws, weights, policy, arm_src, arm_off, wrows, wlen,
                horizon, warmup, aoi0, trace, debug):
    L = pens.shape[0]
    A = arm_src.size
    aoi = aoi0.copy()
    busy = False
    finish = -1
    active = -1
    deliver_age = 0
    k = np.zeros(L, dtype=np.int64)
    cost = np.zeros(L)
    aoi_sum = np.zeros(L)
    aoi_max = np.zeros(L, dtype=np.int64)
    sends = np.zeros(L, dtype=np.int64)
    idle_slots = 0
    ntrace = trace.shape[0]
    for t in range(horizon):
        if t > 0:
            for l in range(L):
                if busy and t == finish and l == active:
                    aoi[l] = deliver_age
                else:
                    aoi[l] += 1
            if busy and t == finish:
                busy = False
                active = -1
        if not busy:
            chosen = -1
            off = 0
            if policy == MAF:
                best = -1
                for l in range(L):
                    if aoi[l] > best:
                        best = aoi[l]
                        chosen = l
            else:
                best_w = -np.inf
                best_a = -1
                for a in range(A):
                    l = arm_src[a]
                    w = wrows[a, min(aoi[l], wlen[a] - 1)]
                    if w > best_w:
                        best_w = w
                        best_a = a
                if best_a >= 0 and best_w >= 0:
                    chosen = arm_src[best_a]
                    off = arm_off[best_a]
            if chosen >= 0:
                T = draws[chosen, k[chosen]]
                k[chosen] += 1
                busy = True
                active = chosen
                finish = t + T
                deliver_age = T + off
                sends[chosen] += 1
                if debug:
                    assert T >= 1
            elif t >= warmup:
                idle_slots += 1
        elif debug:
            assert finish > t and active >= 0
        if t < ntrace:
            for l in range(L):
                trace[t, l] = aoi[l]
            trace[t, L] = active
        if t >= warmup:
            for l in range(L):
                a_l = aoi[l]
                cost[l] += weights[l] * pens[l, min(a_l, pen_len[l] - 1)]
                aoi_sum[l] += a_l
                if a_l > aoi_max[l]:
                    aoi_max[l] = a_l
    return cost, aoi_sum, aoi_max, sends, idle_slots


_single_jit = njit(cache=True)(_single_impl)
_multi_jit = njit(cache=True)(_multi_impl)


# ---------------------------------------------------------------------------
# drivers


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    """Disjoint counter-based stream per replication."""
    return np.random.Generator(np.random.Philox(seed).jumped(replication))


def _draws(rng, services, horizon):
    n = max(horizon // min(s.t_min for s in services) + 2, 2)
    return np.stack([s.sample(rng, n).astype(np.int64) for s in services])


def _trace_buffer(config, width):
    return np.zeros((min(config.trace_length, config.horizon), width), dtype=np.int64)


def simulate_single(config: SimConfig, policy=None, replication: int = 0, debug: bool = False) -> SimResult:
    if len(config.sources) != 1:
        raise MisuseError("single-source simulation needs exactly one source")
    src = config.sources[0]
    policy = src.policy if policy is None else policy
    p, S = src.penalty, src.service
    gamma = np.zeros(1)
    b, beta, period, cap = 0, 0.0, 1, 1
    if isinstance(policy, ZeroWait):
        code = ZERO_WAIT
    elif isinstance(policy, Threshold):
        code = THRESHOLD
        if not 0 <= policy.b < src.buffer:
            raise ConfigurationError(f"offset {policy.b} outside buffer of size {src.buffer}")
        gt = policy.gittins if policy.gittins is not None else gittins_table(p, S)
        gamma = np.ascontiguousarray(gt.values)
        b, beta = int(policy.b), float(policy.beta)
        if beta > gt.plateau:
            raise UnreachableThresholdError(
                f"threshold {beta:.12g} exceeds the largest index value {gt.plateau:.12g}; the source would never send")
    elif isinstance(policy, Periodic):
        code = PERIODIC
        if policy.period < 1 or policy.buffer < 1:
            raise ConfigurationError("periodic policy needs period >= 1 and buffer >= 1")
        period, cap = int(policy.period), int(policy.buffer)
    else:
        raise ConfigurationError(f"unknown single-source policy {policy!r}")
    rng = replication_rng(config.seed, replication)
    draws = _draws(rng, [S], config.horizon)[0]
    trace = _trace_buffer(config, 2)
    run = _single_impl if debug else _single_jit
    total, aoi_sum, aoi_max, sends, deliveries, drops = run(
        np.ascontiguousarray(p.table), gamma, draws, code, b, beta, period, cap,
        int(config.horizon), int(config.warmup), 1 + S.t_min, trace, debug)
    n = config.horizon - config.warmup
    avg = total / n
    return SimResult(avg, np.array([avg]), np.array([aoi_sum / n]), np.array([aoi_max]),
                     {"sends": int(sends), "deliveries": int(deliveries), "drops": int(drops)},
                     trace if config.trace_length else None)


def _multi_mode(config):
    names = {s.policy for s in config.sources}
    if len(names) != 1:
        raise MisuseError(f"all sources must share one multi-source policy, got {sorted(map(str, names))}")
    name = names.pop()
    if name not in MULTI_POLICIES:
        raise ConfigurationError(f"unknown multi-source policy {name!r}")
    return name


def prepare_whittle(config: SimConfig, name: str):
    arms = []
    for l, s in enumerate(config.sources):
        offsets = range(s.buffer) if name == "whittle_sfb" else (0,)
        arms += source_arms(l, s.penalty, s.service, s.weight, offsets)
    table = build_whittle_table(arms)
    keys = table.arms
    width = max(table.values[k].size for k in keys)
    rows = np.zeros((len(keys), width))
    lens = np.zeros(len(keys), dtype=np.int64)
    for i, k in enumerate(keys):
        r = table.values[k]
        rows[i, :r.size] = r
        rows[i, r.size:] = r[-1]
        lens[i] = r.size
    src = np.array([k[0] for k in keys], dtype=np.int64)
    off = np.array([k[1] for k in keys], dtype=np.int64)
    return table, src, off, rows, lens


def simulate_multi(config: SimConfig, replication: int = 0, debug: bool = False, _prepared=None) -> SimResult:
    name = _multi_mode(config)
    L = len(config.sources)
    width = max(s.penalty.table.size for s in config.sources)
    pens = np.zeros((L, width))
    plen = np.zeros(L, dtype=np.int64)
    for l, s in enumerate(config.sources):
        pens[l, :s.penalty.table.size] = s.penalty.table
        plen[l] = s.penalty.table.size
    weights = np.array([s.weight for s in config.sources], dtype=float)
    if name == "maf_zero_wait":
        code = MAF
        src = off = np.zeros(0, dtype=np.int64)
        rows = np.zeros((0, 1))
        lens = np.zeros(0, dtype=np.int64)
    else:
        code = WHITTLE
        prepared = _prepared if _prepared is not None else prepare_whittle(config, name)
        _, src, off, rows, lens = prepared
    rng = replication_rng(config.seed, replication)
    draws = _draws(rng, [s.service for s in config.sources], config.horizon)
    aoi0 = np.array([1 + s.service.t_min for s in config.sources], dtype=np.int64)
    trace = _trace_buffer(config, L + 1)
    run = _multi_impl if debug else _multi_jit
    cost, aoi_sum, aoi_max, sends, idle = run(pens, plen, draws, weights, code, src, off, rows, lens,
                                             int(config.horizon), int(config.warmup), aoi0, trace, debug)
    n = config.horizon - config.warmup
    return SimResult(float(cost.sum() / n), cost / n, aoi_sum / n, aoi_max.copy(),
                     {"sends": sends.tolist(), "idle_slots": int(idle)},
                     trace if config.trace_length else None)


def simulate(config: SimConfig, policy=None, replication: int = 0, debug: bool = False) -> SimResult:
    """Dispatch on the policy type: string policies run the shared-channel engine."""
    pol = policy if policy is not None else config.sources[0].policy
    if isinstance(pol, str):
        if policy is not None:
            config = replace(config, sources=tuple(replace(s, policy=policy) for s in config.sources))
        return simulate_multi(config, replication, debug)
    return simulate_single(config, policy, replication, debug)


@dataclass(frozen=True)
class Replicated:
    mean: dict
    stderr: dict
    runs: list

    def __getitem__(self, metric):
        return self.mean[metric], self.stderr[metric]


def replicate(config: SimConfig, n: int | None = None, policy=None) -> Replicated:
    """Run ``n`` replications on disjoint streams and report mean and standard error.

    Metrics: ``average_error``, ``source{l}_error`` and ``source{l}_aoi``.
    """
    n = config.replications if n is None else int(n)
    if n < 1:
        raise ConfigurationError("replications must be >= 1")
    pol = policy if policy is not None else config.sources[0].policy
    prepared = None
    if isinstance(pol, str):
        if policy is not None:
            config = replace(config, sources=tuple(replace(s, policy=policy) for s in config.sources))
        name = _multi_mode(config)
        if name != "maf_zero_wait":
            prepared = prepare_whittle(config, name)
        runs = [simulate_multi(config, r, _prepared=prepared) for r in range(n)]
    else:
        runs = [simulate_single(config, policy, r) for r in range(n)]
    metrics = {"average_error": np.array([r.average_error for r in runs])}
    for l in range(len(config.sources)):
        metrics[f"source{l}_error"] = np.array([r.per_source[l] for r in runs])
        metrics[f"source{l}_aoi"] = np.array([r.aoi_mean[l] for r in runs])
    mean = {k: float(v.mean()) for k, v in metrics.items()}
    stderr = {k: float(v.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0 for k, v in metrics.items()}
    return Replicated(mean, stderr, runs)
