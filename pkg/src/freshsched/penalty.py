"""AoI penalty curves and discrete service-time distributions."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .errors import ConfigurationError, InputError, PenaltyFormatError, TruncationError

DEFAULT_TRUNCATION = 1e-6


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PenaltyCurve:
    """Tabulated ``p(delta)`` for ``delta = 0..delta_max``, held at ``p(delta_max)`` beyond."""

    table: np.ndarray
    bound: float | None = None

    def __post_init__(self):
        t = _frozen(self.table)
        if t.ndim != 1 or t.size < 2:
            raise InputError("penalty table needs delta_max >= 1")
        if not np.all(np.isfinite(t)):
            raise InputError("penalty values must be finite")
        m = float(np.max(np.abs(t)))
        bound = m if self.bound is None else float(self.bound)
        if bound < m:
            raise InputError(f"bound {bound} below max |p| = {m}")
        object.__setattr__(self, "table", t)
        object.__setattr__(self, "bound", bound)

    @classmethod
    def from_function(cls, f, delta_max: int) -> "PenaltyCurve":
        return cls(np.array([f(d) for d in range(delta_max + 1)], dtype=float))

    @property
    def delta_max(self) -> int:
        return self.table.size - 1

    @property
    def plateau(self) -> float:
        return float(self.table[-1])

    @property
    def minimum(self) -> float:
        return float(self.table.min())

    @property
    def maximum(self) -> float:
        return float(self.table.max())

    def __call__(self, delta):
        d = np.minimum(np.asarray(delta), self.delta_max)
        if np.any(d < 0):
            raise InputError("AoI must be non-negative")
        out = self.table[d]
        return float(out) if np.ndim(out) == 0 else out

    def extended(self, length: int) -> np.ndarray:
        """``p(0), ..., p(length-1)`` with hold-last extension."""
        return self.table[np.minimum(np.arange(length), self.delta_max)]

    def is_nondecreasing(self) -> bool:
        return bool(np.all(np.diff(self.table) >= 0))

    def scaled(self, c: float, shift: float = 0.0) -> "PenaltyCurve":
        return PenaltyCurve(c * self.table + shift)


@dataclass(frozen=True)
class ServiceTimeDistribution:
    """Finite pmf over integer service times ``T >= 1``."""

    support: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.support)
        p = np.asarray(self.probs, dtype=float)
        if s.ndim != 1 or s.shape != p.shape or s.size == 0:
            raise InputError("support and probs must be equal-length 1-D arrays")
        if np.any(s != np.round(s)) or np.any(s < 1):
            raise InputError("service times must be integers >= 1")
        if np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
            raise InputError("service probabilities must be non-negative and sum to 1")
        s = s.astype(np.int64)
        keep = p > 0
        s, p = s[keep], p[keep]
        uniq, inv = np.unique(s, return_inverse=True)
        merged = np.zeros(uniq.size)
        np.add.at(merged, inv, p)
        object.__setattr__(self, "support", _frozen(uniq, np.int64))
        object.__setattr__(self, "probs", _frozen(merged))

    @classmethod
    def from_dict(cls, pmf: dict) -> "ServiceTimeDistribution":
        items = sorted(pmf.items())
        return cls(np.array([k for k, _ in items]), np.array([v for _, v in items]))

    @property
    def mean(self) -> float:
        return float(self.support @ self.probs)

    @property
    def t_min(self) -> int:
        return int(self.support[0])

    @property
    def t_max(self) -> int:
        return int(self.support[-1])

    def as_dict(self) -> dict:
        return {int(k): float(v) for k, v in zip(self.support, self.probs)}

    def dense(self) -> np.ndarray:
        """``pmf[n] = P(T = n)`` for ``n = 0..t_max``."""
        out = np.zeros(self.t_max + 1)
        out[self.support] = self.probs
        return out

    def cdf_table(self) -> np.ndarray:
        c = np.cumsum(self.probs)
        c[-1] = 1.0
        return c

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        idx = np.searchsorted(self.cdf_table(), rng.random(size), side="right")
        return self.support[np.minimum(idx, self.support.size - 1)]


def service_constant(T: int) -> ServiceTimeDistribution:
    if int(T) != T or T < 1:
        raise ConfigurationError("constant service time must be an integer >= 1")
    return ServiceTimeDistribution(np.array([int(T)]), np.array([1.0]))


def service_geometric(q: float, T_max: int) -> ServiceTimeDistribution:
    """``P(T=n) ∝ q (1-q)^(n-1)`` on ``1..T_max``, renormalized."""
    if not 0 < q <= 1:
        raise ConfigurationError("geometric parameter q must lie in (0, 1]")
    if T_max < 1:
        raise ConfigurationError("T_max must be >= 1")
    n = np.arange(1, int(T_max) + 1)
    p = q * (1 - q) ** (n - 1)
    return ServiceTimeDistribution(n, p / p.sum())


def _lognormal_edges(alpha, sigma, n):
    # tiny sigma pushes the edges to +-inf, which the normal cdf handles
    with np.errstate(over="ignore", divide="ignore"):
        return (np.log(n / alpha) + sigma ** 2 / 2) / sigma


def service_lognormal_discretized(alpha: float, sigma: float, T_max: int | None = None,
                                  max_truncated_mass: float = DEFAULT_TRUNCATION) -> ServiceTimeDistribution:
    """pmf of ``ceil(alpha * exp(sigma Z) / E[exp(sigma Z)])`` for standard normal ``Z``.

    Cell ``n`` collects ``Z`` in ``(z_{n-1}, z_n]`` with
    ``z_n = (ln(n / alpha) + sigma^2 / 2) / sigma``.  Mass above ``T_max`` is
    dropped and the rest renormalized; dropping more than
    ``max_truncated_mass`` is an error.  ``T_max=None`` picks the smallest
    admissible truncation.
    """
    if not alpha > 0:
        raise ConfigurationError("alpha must be positive")
    if not sigma >= 0:
        raise ConfigurationError("sigma must be non-negative")
    base = math.ceil(alpha)
    if sigma == 0:
        if T_max is not None and T_max < base:
            raise ConfigurationError(f"T_max must be >= ceil(alpha) = {base}")
        return service_constant(base)
    if T_max is None:
        T_max = base
        while norm.sf(_lognormal_edges(alpha, sigma, T_max)) >= max_truncated_mass:
            T_max *= 2
        lo, hi = max(base, T_max // 2), T_max
        while lo < hi:
            mid = (lo + hi) // 2
            if norm.sf(_lognormal_edges(alpha, sigma, mid)) < max_truncated_mass:
                hi = mid
            else:
                lo = mid + 1
        T_max = hi
    if T_max < base:
        raise ConfigurationError(f"T_max must be >= ceil(alpha) = {base}")
    n = np.arange(1, int(T_max) + 1)
    upper = norm.cdf(_lognormal_edges(alpha, sigma, n))
    lower = np.concatenate([[0.0], upper[:-1]])
    p = upper - lower
    tail = float(norm.sf(_lognormal_edges(alpha, sigma, T_max)))
    if tail >= max_truncated_mass:
        raise TruncationError(f"truncation at T_max={T_max} drops {tail:.3g} of mass "
                              f"(limit {max_truncated_mass:g})")
    return ServiceTimeDistribution(n, p / p.sum())


def service_from_spec(spec: dict) -> ServiceTimeDistribution:
    """Build from a config record such as ``{"kind": "lognormal", "alpha": 1.2, "sigma": 1.0}``."""
    kind = spec.get("kind")
    if kind == "constant":
        return service_constant(spec["T"])
    if kind == "geometric":
        return service_geometric(spec["q"], spec["T_max"])
    if kind == "lognormal":
        kw = {}
        if "max_truncated_mass" in spec:
            kw["max_truncated_mass"] = spec["max_truncated_mass"]
        return service_lognormal_discretized(spec["alpha"], spec["sigma"], spec.get("T_max"), **kw)
    if kind == "pmf":
        return ServiceTimeDistribution.from_dict({int(k): float(v) for k, v in spec["pmf"].items()})
    raise ConfigurationError(f"unknown service kind {kind!r}")


def penalty_from_csv(path) -> PenaltyCurve:
    """Read a ``delta,penalty`` table with contiguous ``delta`` starting at 0."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = [(i, r) for i, r in enumerate(csv.reader(fh), start=1) if r and any(c.strip() for c in r)]
    if not rows:
        raise PenaltyFormatError(f"{path}: empty penalty file")
    header = [c.strip() for c in rows[0][1]]
    if header != ["delta", "penalty"]:
        raise PenaltyFormatError(f"{path}:{rows[0][0]}: header must be 'delta,penalty'")
    values = []
    for lineno, row in rows[1:]:
        if len(row) != 2:
            raise PenaltyFormatError(f"{path}:{lineno}: expected 2 fields")
        try:
            d = int(row[0])
            v = float(row[1])
        except ValueError:
            raise PenaltyFormatError(f"{path}:{lineno}: non-numeric value") from None
        if not math.isfinite(v):
            raise PenaltyFormatError(f"{path}:{lineno}: penalty must be finite")
        if d != len(values):
            raise PenaltyFormatError(f"{path}:{lineno}: expected delta={len(values)}, got {d}")
        values.append(v)
    if len(values) < 2:
        raise PenaltyFormatError(f"{path}: need at least delta=0 and delta=1")
    return PenaltyCurve(np.array(values))


def write_penalty_csv(path, curve: PenaltyCurve):
    with open(path, "w", newline="") as fh:
        fh.write("delta,penalty\n")
        for d, v in enumerate(curve.table):
            fh.write(f"{d},{float(v)!r}\n")


def penalty_from_inference_curve(curve) -> PenaltyCurve:
    """Use an inference-error-vs-AoI curve as the penalty, held beyond its horizon."""
    vals = np.asarray(curve.values, dtype=float)
    if vals.size == 1:
        vals = np.repeat(vals, 2)
    return PenaltyCurve(vals)


# synthetic penalty shapes used by demos, recipes and tests

def dip_penalty(dip: int = 25, delta_max: int = 64, high: float = 1.0, low: float = 0.05,
                plateau: float = 1.2) -> PenaltyCurve:
    """High for very fresh features, minimal at ``delta = dip``, rising to a plateau.

    Mimics error curves of systems whose label lags the observed feature.
    """
    d = np.arange(delta_max + 1, dtype=float)
    down = low + (high - low) * ((dip - d) / dip) ** 2
    up = plateau - (plateau - low) * np.exp(-(d - dip) / 8.0)
    return PenaltyCurve(np.where(d <= dip, down, up))


def monotone_penalty(scale: float = 10.0, delta_max: int = 64, height: float = 1.0) -> PenaltyCurve:
    d = np.arange(delta_max + 1, dtype=float)
    return PenaltyCurve(height * (1 - np.exp(-d / scale)))
