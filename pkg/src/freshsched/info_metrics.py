"""Loss-induced entropies, divergences and inference-error-vs-AoI curves.

Every measure here is built from one primitive: the Bayes action of a loss
function ``L`` on a finite distribution.  The ``L``-entropy is the risk at
the Bayes action, the ``L``-cross entropy is the risk of one distribution's
Bayes action under another, and divergences / mutual informations are
differences of those.  Natural logarithms are used throughout.

Two kinds of *sources* feed the AoI curves:

* :class:`TimeSeriesDataset` -- empirical joints of ``(Y_t, X_{t-theta})``
  built from a slotted record of labels and feature vectors;
* :class:`ChainModel` -- exact joints for a stationary finite Markov chain
  ``V_t`` with label ``Y_t = f(V_{t-d})`` and windowed feature
  ``X_t = (V_t, ..., V_{t-u+1})``.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from numbers import Real
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    AbsoluteContinuityError,
    AlphabetMismatchError,
    InputError,
    InsufficientDataError,
    PenaltyFormatError,
    SupportError,
    UnsupportedLossError,
)

MASS_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _sorted_symbols(symbols) -> tuple:
    uniq = list(dict.fromkeys(symbols))
    try:
        return tuple(sorted(uniq))
    except TypeError:
        return tuple(uniq)


# ---------------------------------------------------------------------------
# alphabets and distributions


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple

    def __post_init__(self):
        syms = tuple(self.symbols)
        if not syms:
            raise InputError("alphabet must be non-empty")
        if len(set(syms)) != len(syms):
            raise InputError("alphabet symbols must be distinct")
        object.__setattr__(self, "symbols", syms)
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(syms)})

    def __len__(self):
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def index(self, symbol) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise InputError(f"symbol {symbol!r} not in alphabet") from None

    @property
    def is_numeric(self) -> bool:
        return all(isinstance(s, Real) and not isinstance(s, bool) for s in self.symbols)

    def values(self) -> np.ndarray:
        if not self.is_numeric:
            raise UnsupportedLossError("numeric symbols required")
        return np.array(self.symbols, dtype=float)


def _as_alphabet(a) -> Alphabet:
    return a if isinstance(a, Alphabet) else Alphabet(tuple(a))


def _check_mass(mass: np.ndarray):
    if np.any(mass < 0):
        raise InputError("probability masses must be non-negative")
    if abs(mass.sum() - 1.0) > MASS_TOL:
        raise InputError(f"masses sum to {mass.sum():.12g}, expected 1")


@dataclass(frozen=True)
class Distribution:
    alphabet: Alphabet
    mass: np.ndarray

    def __post_init__(self):
        alphabet = _as_alphabet(self.alphabet)
        mass = _frozen(self.mass)
        if mass.shape != (len(alphabet),):
            raise InputError("mass length does not match the alphabet")
        _check_mass(mass)
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "mass", mass)

    @classmethod
    def from_masses(cls, masses, symbols=None) -> "Distribution":
        masses = list(masses)
        if symbols is None:
            symbols = range(len(masses))
        return cls(Alphabet(tuple(symbols)), masses)

    @classmethod
    def point_mass(cls, symbol, symbols) -> "Distribution":
        alphabet = _as_alphabet(symbols)
        m = np.zeros(len(alphabet))
        m[alphabet.index(symbol)] = 1.0
        return cls(alphabet, m)

    def __getitem__(self, symbol) -> float:
        return float(self.mass[self.alphabet.index(symbol)])


@dataclass(frozen=True)
class JointDistribution:
    """Joint pmf of a label ``Y`` and a feature ``X``; ``mass[y, x]``."""

    label_alphabet: Alphabet
    feature_alphabet: Alphabet
    mass: np.ndarray

    def __post_init__(self):
        la = _as_alphabet(self.label_alphabet)
        fa = _as_alphabet(self.feature_alphabet)
        mass = _frozen(self.mass)
        if mass.shape != (len(la), len(fa)):
            raise InputError("joint mass shape does not match alphabets")
        _check_mass(mass)
        object.__setattr__(self, "label_alphabet", la)
        object.__setattr__(self, "feature_alphabet", fa)
        object.__setattr__(self, "mass", mass)

    @classmethod
    def from_conditionals(cls, feature_marginal, conditionals, labels=None, features=None):
        """Build from ``P_X`` and one row ``P_{Y|X=x}`` per feature value."""
        px = np.asarray(feature_marginal, dtype=float)
        cond = np.asarray(conditionals, dtype=float)
        if cond.shape[0] != px.shape[0]:
            raise InputError("need one conditional row per feature value")
        mass = cond.T * px[None, :]
        labels = range(mass.shape[0]) if labels is None else labels
        features = range(mass.shape[1]) if features is None else features
        return cls(Alphabet(tuple(labels)), Alphabet(tuple(features)), mass)

    def label_marginal(self) -> Distribution:
        return Distribution(self.label_alphabet, self.mass.sum(axis=1))

    def feature_marginal(self) -> Distribution:
        return Distribution(self.feature_alphabet, self.mass.sum(axis=0))

    def conditional(self, feature) -> Distribution | None:
        """``P_{Y|X=x}``, or ``None`` when ``P_X(x) = 0``."""
        col = self.mass[:, self.feature_alphabet.index(feature)]
        tot = col.sum()
        if tot <= 0:
            return None
        return Distribution(self.label_alphabet, col / tot)

    def transpose(self) -> "JointDistribution":
        return JointDistribution(self.feature_alphabet, self.label_alphabet, self.mass.T)


@dataclass(frozen=True)
class TripleJoint:
    """Joint pmf over three variables, ``mass[y, x, z]``.

    Axis 0 is always the predicted variable.  Which of the other two is the
    conditioning variable depends on the measure; see
    :func:`l_conditional_mutual_information` and
    :func:`epsilon_markov_coefficient`.
    """

    label_alphabet: Alphabet
    first_alphabet: Alphabet
    second_alphabet: Alphabet
    mass: np.ndarray

    def __post_init__(self):
        alphs = [_as_alphabet(a) for a in (self.label_alphabet, self.first_alphabet, self.second_alphabet)]
        mass = _frozen(self.mass)
        if mass.shape != tuple(len(a) for a in alphs):
            raise InputError("triple mass shape does not match alphabets")
        _check_mass(mass)
        object.__setattr__(self, "label_alphabet", alphs[0])
        object.__setattr__(self, "first_alphabet", alphs[1])
        object.__setattr__(self, "second_alphabet", alphs[2])
        object.__setattr__(self, "mass", mass)

    @property
    def alphabets(self):
        return (self.label_alphabet, self.first_alphabet, self.second_alphabet)

    def transpose(self, axes) -> "TripleJoint":
        a = self.alphabets
        return TripleJoint(a[axes[0]], a[axes[1]], a[axes[2]], np.transpose(self.mass, axes))

    def label_with_first(self) -> JointDistribution:
        return JointDistribution(self.label_alphabet, self.first_alphabet, self.mass.sum(axis=2))

    def label_with_second(self) -> JointDistribution:
        return JointDistribution(self.label_alphabet, self.second_alphabet, self.mass.sum(axis=1))

    def label_with_both(self) -> JointDistribution:
        pairs = Alphabet(tuple(itertools.product(self.first_alphabet, self.second_alphabet)))
        return JointDistribution(self.label_alphabet, pairs, self.mass.reshape(len(self.label_alphabet), -1))


# ---------------------------------------------------------------------------
# loss functions

_FAMILIES = ("log", "brier", "zero_one", "alpha", "quadratic")


@dataclass(frozen=True)
class LossFunction:
    """A loss family with its closed-form Bayes-action rule.

    Actions are distributions for ``log``, ``brier`` and ``alpha``, a
    symbol for ``zero_one`` and a real number for ``quadratic``.
    """

    family: str
    alpha: float | None = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise UnsupportedLossError(f"unknown loss family {self.family!r}")
        if self.family == "alpha":
            if self.alpha is None or not self.alpha > 0 or self.alpha == 1:
                raise UnsupportedLossError("alpha-loss needs alpha > 0 and alpha != 1")
        elif self.alpha is not None:
            raise UnsupportedLossError(f"{self.family} loss takes no alpha parameter")

    def __str__(self):
        return f"alpha({self.alpha:g})" if self.family == "alpha" else self.family

    # Column-wise kernels.  ``cond`` has shape (n_labels, k): k distributions.

    def actions(self, cond: np.ndarray, alphabet: Alphabet):
        if self.family in ("log", "brier"):
            return cond
        if self.family == "alpha":
            # scale by the column maximum first so large alpha cannot underflow
            top = cond.max(axis=0, keepdims=True)
            with np.errstate(divide="ignore"):
                tilted = np.where(cond > 0, np.exp(self.alpha * (np.log(cond) - np.log(top))), 0.0)
            return tilted / tilted.sum(axis=0, keepdims=True)
        if self.family == "zero_one":
            return np.argmax(cond, axis=0)  # first maximum == lowest index
        return alphabet.values() @ cond

    def risks(self, cond: np.ndarray, actions, alphabet: Alphabet) -> np.ndarray:
        """Expected loss of column ``j`` of ``cond`` under action ``j``."""
        fam = self.family
        if fam == "log":
            with np.errstate(divide="ignore", invalid="ignore"):
                terms = np.where(cond > 0, -cond * np.log(actions), 0.0)
            return terms.sum(axis=0)
        if fam == "brier":
            return (actions ** 2).sum(axis=0) - 2 * (cond * actions).sum(axis=0) + 1.0
        if fam == "zero_one":
            return 1.0 - cond[actions, np.arange(cond.shape[1])]
        if fam == "alpha":
            a = self.alpha
            c = (a - 1) / a
            with np.errstate(divide="ignore"):
                powered = np.where(actions > 0, actions ** c, 0.0 if c > 0 else np.inf)
            with np.errstate(invalid="ignore"):
                terms = np.where(cond > 0, cond * (1 - powered), 0.0)
            return a / (a - 1) * terms.sum(axis=0)
        v = alphabet.values()
        return (cond * (v[:, None] - np.asarray(actions)[None, :]) ** 2).sum(axis=0)

    def __call__(self, y, action, alphabet: Alphabet) -> float:
        """Pointwise ``L(y, a)`` with ``a`` in the internal action representation."""
        i = alphabet.index(y)
        fam = self.family
        if fam == "log":
            q = np.asarray(action)[i]
            return math.inf if q <= 0 else -math.log(q)
        if fam == "brier":
            q = np.asarray(action, dtype=float)
            return float((q ** 2).sum() - 2 * q[i] + 1)
        if fam == "zero_one":
            return float(i != int(action))
        if fam == "alpha":
            a = self.alpha
            q = float(np.asarray(action)[i])
            if q <= 0 and a < 1:
                return math.inf
            return a / (a - 1) * (1 - q ** ((a - 1) / a))
        return (float(y) - float(action)) ** 2


def LogLoss() -> LossFunction:
    return LossFunction("log")


def BrierLoss() -> LossFunction:
    return LossFunction("brier")


def ZeroOneLoss() -> LossFunction:
    return LossFunction("zero_one")


def AlphaLoss(alpha: float) -> LossFunction:
    return LossFunction("alpha", float(alpha))


def QuadraticLoss() -> LossFunction:
    return LossFunction("quadratic")


def loss_from_spec(spec) -> LossFunction:
    """``"log"`` or ``{"family": "alpha", "alpha": 2.0}`` -> LossFunction."""
    if isinstance(spec, LossFunction):
        return spec
    if isinstance(spec, str):
        return LossFunction(spec)
    return LossFunction(spec["family"], spec.get("alpha"))


# ---------------------------------------------------------------------------
# entropies and divergences


def bayes_action(dist: Distribution, loss: LossFunction):
    """Return ``(a_P, H_L(P))``.

    The action is a :class:`Distribution` for log/Brier/alpha losses, the
    modal symbol for 0-1 loss and the mean for quadratic loss.
    """
    col = dist.mass[:, None]
    act = loss.actions(col, dist.alphabet)
    value = float(loss.risks(col, act, dist.alphabet)[0])
    if loss.family in ("log", "brier", "alpha"):
        return Distribution(dist.alphabet, act[:, 0]), value
    if loss.family == "zero_one":
        return dist.alphabet.symbols[int(act[0])], value
    return float(act[0]), value


def l_entropy(dist: Distribution, loss: LossFunction) -> float:
    return bayes_action(dist, loss)[1]


def _check_same(a: Alphabet, b: Alphabet, what: str):
    if a.symbols != b.symbols:
        raise AlphabetMismatchError(f"{what} alphabets differ")


def l_cross_entropy(p: Distribution, q: Distribution, loss: LossFunction) -> float:
    """``E_{Y~p}[L(Y, a_q)]``."""
    _check_same(p.alphabet, q.alphabet, "label")
    act = loss.actions(q.mass[:, None], q.alphabet)
    return float(loss.risks(p.mass[:, None], act, p.alphabet)[0])


def l_divergence(p: Distribution, q: Distribution, loss: LossFunction) -> float:
    """``D_L(p || q) = E_{Y~q}[L(Y, a_p)] - E_{Y~q}[L(Y, a_q)]``.

    The expectation is taken under the *second* argument; with log-loss this
    is ``KL(q || p)``.
    """
    _check_same(p.alphabet, q.alphabet, "label")
    return l_cross_entropy(q, p, loss) - l_entropy(q, loss)


def _columns(joint: JointDistribution):
    px = joint.mass.sum(axis=0)
    keep = np.flatnonzero(px > 0)
    return px, keep, joint.mass[:, keep] / px[keep]


def l_conditional_entropy(joint: JointDistribution, loss: LossFunction) -> float:
    """``H_L(Y|X) = sum_x P_X(x) min_a E[L(Y, a) | X=x]``."""
    px, keep, cond = _columns(joint)
    act = loss.actions(cond, joint.label_alphabet)
    return float(px[keep] @ loss.risks(cond, act, joint.label_alphabet))


def l_conditional_cross_entropy(infer_joint: JointDistribution, train_joint: JointDistribution,
                                loss: LossFunction) -> float:
    """Risk of the training Bayes actions ``a_{P^train_{Y|x}}`` on the inference joint."""
    _check_same(infer_joint.label_alphabet, train_joint.label_alphabet, "label")
    _check_same(infer_joint.feature_alphabet, train_joint.feature_alphabet, "feature")
    px, keep, cond = _columns(infer_joint)
    train_px = train_joint.mass.sum(axis=0)
    missing = keep[train_px[keep] <= 0]
    if missing.size:
        x = infer_joint.feature_alphabet.symbols[missing[0]]
        raise SupportError(f"training conditional undefined at feature {x!r}")
    train_cond = train_joint.mass[:, keep] / train_px[keep]
    act = loss.actions(train_cond, train_joint.label_alphabet)
    return float(px[keep] @ loss.risks(cond, act, infer_joint.label_alphabet))


def l_mutual_information(joint: JointDistribution, loss: LossFunction) -> float:
    """``I_L(Y;X) = H_L(Y) - H_L(Y|X)``; not symmetric in general."""
    return l_entropy(joint.label_marginal(), loss) - l_conditional_entropy(joint, loss)


def l_conditional_mutual_information(triple: TripleJoint, loss: LossFunction) -> float:
    """``I_L(Y; X | Z)`` for ``triple.mass[y, x, z]``."""
    return (l_conditional_entropy(triple.label_with_second(), loss)
            - l_conditional_entropy(triple.label_with_both(), loss))


def chi2_divergence(p: Distribution, q: Distribution) -> float:
    """Neyman's chi-square divergence ``sum_y (p - q)^2 / q`` with ``0^2/0 = 0``."""
    _check_same(p.alphabet, q.alphabet, "label")
    return _chi2(p.mass, q.mass)


def _chi2(p: np.ndarray, q: np.ndarray) -> float:
    zero = q <= 0
    if np.any(p[zero] > 0):
        raise AbsoluteContinuityError("p has mass where q vanishes")
    qq = q[~zero]
    return float((((p[~zero] - qq) ** 2) / qq).sum())


def chi2_conditional_mutual_information(triple: TripleJoint) -> float:
    """``I_chi2(Y; Z | X) = E_{X,Z}[D_chi2(P_{Y|X,Z} || P_{Y|X})]`` for ``mass[y, x, z]``."""
    m = triple.mass
    pxz = m.sum(axis=0)
    pyx = m.sum(axis=2)
    total = 0.0
    for xi in range(m.shape[1]):
        px = pyx[:, xi].sum()
        if px <= 0:
            continue
        y_given_x = pyx[:, xi] / px
        for zi in range(m.shape[2]):
            w = pxz[xi, zi]
            if w <= 0:
                continue
            total += w * _chi2(m[:, xi, zi] / w, y_given_x)
    return total


def epsilon_markov_coefficient(triple: TripleJoint) -> float:
    """Smallest ``eps`` with ``Z -eps-> X -eps-> Y`` for ``mass[y, x, z]``.

    Zero exactly when ``Y`` and ``Z`` are conditionally independent given ``X``.
    """
    return math.sqrt(max(chi2_conditional_mutual_information(triple), 0.0))


# ---------------------------------------------------------------------------
# sources of (label, lagged feature) joints


def _joint_from_pairs(pairs, labels: Alphabet, features: Alphabet) -> JointDistribution:
    counts = np.zeros((len(labels), len(features)))
    for y, x in pairs:
        counts[labels.index(y), features.index(x)] += 1
    return JointDistribution(labels, features, counts / counts.sum())


def _triple_from_samples(samples, alphabets) -> TripleJoint:
    counts = np.zeros(tuple(len(a) for a in alphabets))
    for y, x, z in samples:
        counts[alphabets[0].index(y), alphabets[1].index(x), alphabets[2].index(z)] += 1
    return TripleJoint(*alphabets, counts / counts.sum())


@dataclass(frozen=True)
class TimeSeriesDataset:
    """Slotted record of labels ``y_t`` and feature vectors ``V_t``.

    The windowed feature at lag ``theta`` is
    ``X_{t-theta} = (V_{t-theta}, ..., V_{t-theta-u+1})``; the empirical joint
    at lag ``theta`` weighs every slot ``t`` in ``[theta+u-1, n-1]`` equally.
    A single-component ``V_t`` with ``u = 1`` is used as a bare symbol.
    """

    labels: tuple
    features: tuple
    window: int = 1

    def __post_init__(self):
        labels = tuple(self.labels)
        feats = []
        for v in self.features:
            if isinstance(v, (list, tuple, np.ndarray)):
                v = tuple(v.tolist() if isinstance(v, np.ndarray) else v)
                feats.append(v[0] if len(v) == 1 else v)
            else:
                feats.append(v)
        if len(labels) != len(feats):
            raise InputError("labels and features must be aligned per slot")
        if int(self.window) < 1:
            raise InputError("window must be a positive integer")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "features", tuple(feats))
        object.__setattr__(self, "window", int(self.window))

    def __len__(self):
        return len(self.labels)

    def feature_at(self, t: int):
        u = self.window
        if u == 1:
            return self.features[t]
        return tuple(self.features[t - j] for j in range(u))

    def _first_valid(self, lag: int, theta: int) -> int:
        first = lag + self.window - 1
        if first >= len(self):
            raise InsufficientDataError(theta)
        return first

    def pair_samples(self, theta: int):
        first = self._first_valid(theta, theta)
        return [(self.labels[t], self.feature_at(t - theta)) for t in range(first, len(self))]

    def triple_samples(self, k: int):
        first = self._first_valid(k + 1, k + 1)
        return [(self.labels[t], self.feature_at(t - k), self.feature_at(t - k - 1))
                for t in range(first, len(self))]

    def pair_joint(self, theta: int) -> JointDistribution:
        pairs = self.pair_samples(theta)
        labels = Alphabet(_sorted_symbols(y for y, _ in pairs))
        feats = Alphabet(_sorted_symbols(x for _, x in pairs))
        return _joint_from_pairs(pairs, labels, feats)

    def triple_joint(self, k: int) -> TripleJoint:
        """Empirical joint of ``(Y_t, X_{t-k}, X_{t-k-1})``."""
        samples = self.triple_samples(k)
        alphs = tuple(Alphabet(_sorted_symbols(s[i] for s in samples)) for i in range(3))
        return _triple_from_samples(samples, alphs)


@dataclass(frozen=True)
class ChainModel:
    """Stationary Markov chain ``V_t`` observed through a delayed label map.

    ``Y_t = label_map[V_{t-label_delay}]`` and
    ``X_t = (V_t, ..., V_{t-window+1})``.  Joints are computed exactly from
    the stationary law and powers of the transition matrix.
    """

    transition: np.ndarray
    label_delay: int = 0
    label_map: tuple | None = None
    window: int = 1
    states: tuple | None = None
    stationary: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        P = _frozen(self.transition)
        k = P.shape[0]
        if P.shape != (k, k) or np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1) > MASS_TOL):
            raise InputError("transition must be a row-stochastic square matrix")
        states = tuple(range(k)) if self.states is None else tuple(self.states)
        label_map = states if self.label_map is None else tuple(self.label_map)
        if len(states) != k or len(label_map) != k:
            raise InputError("states/label_map must have one entry per chain state")
        if self.label_delay < 0 or self.window < 1:
            raise InputError("label_delay >= 0 and window >= 1 required")
        w, v = np.linalg.eig(P.T)
        pi = np.real(v[:, np.argmin(np.abs(w - 1))])
        pi = np.clip(pi / pi.sum(), 0, None)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "label_map", label_map)
        object.__setattr__(self, "stationary", _frozen(pi / pi.sum()))

    @classmethod
    def symmetric_binary(cls, flip: float, **kw) -> "ChainModel":
        return cls(np.array([[1 - flip, flip], [flip, 1 - flip]]), **kw)

    def _block(self, times):
        """Stationary joint pmf of ``V`` at the distinct sorted ``times``."""
        P = self.transition
        arr = self.stationary.copy()
        for prev, nxt in zip(times, times[1:]):
            arr = arr[..., None] * np.linalg.matrix_power(P, nxt - prev)
        return arr

    def _feature_times(self, lag):
        return [-lag - j for j in range(self.window)]

    def _feature_symbol(self, assignment, pos, lag):
        vals = tuple(self.states[assignment[pos[t]]] for t in self._feature_times(lag))
        return vals[0] if self.window == 1 else vals

    def _feature_alphabet(self) -> Alphabet:
        if self.window == 1:
            return Alphabet(self.states)
        return Alphabet(tuple(itertools.product(self.states, repeat=self.window)))

    def _label_alphabet(self) -> Alphabet:
        return Alphabet(_sorted_symbols(self.label_map))

    def _accumulate(self, lags):
        times = sorted({-self.label_delay, *(t for lag in lags for t in self._feature_times(lag))})
        pos = {t: i for i, t in enumerate(times)}
        block = self._block(times)
        out = []
        for assignment in np.ndindex(block.shape):
            pr = block[assignment]
            if pr <= 0:
                continue
            y = self.label_map[assignment[pos[-self.label_delay]]]
            out.append((pr, y, [self._feature_symbol(assignment, pos, lag) for lag in lags]))
        return out

    def pair_joint(self, theta: int) -> JointDistribution:
        la, fa = self._label_alphabet(), self._feature_alphabet()
        mass = np.zeros((len(la), len(fa)))
        for pr, y, (x,) in self._accumulate([theta]):
            mass[la.index(y), fa.index(x)] += pr
        return JointDistribution(la, fa, mass / mass.sum())

    def triple_joint(self, k: int) -> TripleJoint:
        """Exact joint of ``(Y_0, X_{-k}, X_{-k-1})``."""
        la, fa = self._label_alphabet(), self._feature_alphabet()
        mass = np.zeros((len(la), len(fa), len(fa)))
        for pr, y, (x, z) in self._accumulate([k, k + 1]):
            mass[la.index(y), fa.index(x), fa.index(z)] += pr
        return TripleJoint(la, fa, fa, mass / mass.sum())


def _align(a: JointDistribution, b: JointDistribution):
    """Re-index two joints onto the union of their alphabets."""
    la = Alphabet(_sorted_symbols([*a.label_alphabet, *b.label_alphabet]))
    fa = Alphabet(_sorted_symbols([*a.feature_alphabet, *b.feature_alphabet]))

    def embed(j):
        m = np.zeros((len(la), len(fa)))
        rows = [la.index(s) for s in j.label_alphabet]
        cols = [fa.index(s) for s in j.feature_alphabet]
        m[np.ix_(rows, cols)] = j.mass
        return JointDistribution(la, fa, m)

    return embed(a), embed(b)


# ---------------------------------------------------------------------------
# curves


@dataclass(frozen=True)
class FreshnessCurve:
    """Inference/training error as a function of the AoI ``theta = 0..theta_max``."""

    values: np.ndarray
    loss: LossFunction
    g1: np.ndarray | None = None
    g2: np.ndarray | None = None

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 1 or v.size == 0 or not np.all(np.isfinite(v)):
            raise InputError("curve values must be a finite 1-D array")
        object.__setattr__(self, "values", v)
        for name in ("g1", "g2"):
            g = getattr(self, name)
            if g is not None:
                object.__setattr__(self, name, _frozen(g))

    @property
    def theta_max(self) -> int:
        return self.values.size - 1

    def __call__(self, theta: int) -> float:
        if not 0 <= theta <= self.theta_max:
            raise InputError(f"theta={theta} outside 0..{self.theta_max}")
        return float(self.values[theta])

    def averaged(self, theta_dist: Distribution) -> float:
        """``sum_theta P_Theta(theta) * curve(theta)`` for a random AoI."""
        return sum(float(m) * self(int(t)) for t, m in zip(theta_dist.alphabet, theta_dist.mass) if m > 0)


def freshness_curve(source, loss: LossFunction, theta_max: int, train=None) -> FreshnessCurve:
    """``H_L(Y_0 | X_{-theta})`` for ``theta = 0..theta_max``.

    With ``train`` given, each point is the conditional cross entropy of the
    training Bayes actions evaluated on ``source`` (the inference data).
    """
    loss = loss_from_spec(loss)
    vals = []
    for theta in range(theta_max + 1):
        infer = source.pair_joint(theta)
        if train is None:
            vals.append(l_conditional_entropy(infer, loss))
        else:
            i, t = _align(infer, train.pair_joint(theta))
            vals.append(l_conditional_cross_entropy(i, t, loss))
    return FreshnessCurve(np.array(vals), loss)


@dataclass(frozen=True)
class MarkovDecomposition:
    direct: FreshnessCurve
    g1: np.ndarray
    g2: np.ndarray
    gain_terms: np.ndarray   # I_L(Y_0; X_{-k} | X_{-k-1})
    excess_terms: np.ndarray  # I_L(Y_0; X_{-k-1} | X_{-k})


def markov_decomposition(source, loss: LossFunction, theta_max: int) -> MarkovDecomposition:
    """Split the curve into two non-decreasing parts, ``curve = g1 - g2``.

    ``g1(theta) = H_L(Y_0|X_0) + sum_{k<theta} I_L(Y_0; X_{-k} | X_{-k-1})`` and
    ``g2(theta) = sum_{k<theta} I_L(Y_0; X_{-k-1} | X_{-k})``.  ``g2`` vanishes
    when every ``(Y_0, X_{-k}, X_{-k-1})`` is Markov.  The pairwise terms
    ``H_L(Y_0|X_{-k})`` come from ``source.pair_joint`` so the identity is
    exact for empirical sources too.
    """
    loss = loss_from_spec(loss)
    direct = freshness_curve(source, loss, theta_max)
    h = direct.values
    gain = np.zeros(theta_max)
    excess = np.zeros(theta_max)
    for k in range(theta_max):
        both = l_conditional_entropy(source.triple_joint(k).label_with_both(), loss)
        gain[k] = h[k + 1] - both
        excess[k] = h[k] - both
    g1 = h[0] + np.concatenate([[0.0], np.cumsum(gain)])
    g2 = np.concatenate([[0.0], np.cumsum(excess)])
    curve = FreshnessCurve(h, loss, g1, g2)
    return MarkovDecomposition(curve, g1, g2, gain, excess)


def lag_epsilons(source, theta_max: int) -> np.ndarray:
    """Epsilon-Markov coefficient of ``(Y_0, X_{-theta}, X_{-theta-1})`` per lag."""
    return np.array([epsilon_markov_coefficient(source.triple_joint(k)) for k in range(theta_max + 1)])


@dataclass(frozen=True)
class StochasticOrderReport:
    h1: float
    h2: float
    ordered: bool


def _survival_dominated(d1: Distribution, d2: Distribution, tol=1e-12) -> bool:
    pts = sorted({int(s) for s in d1.alphabet} | {int(s) for s in d2.alphabet})

    def sf(d, x):
        return sum(float(m) for s, m in zip(d.alphabet, d.mass) if int(s) > x)

    return all(sf(d1, x) <= sf(d2, x) + tol for x in pts)


def stochastic_order_check(curve: FreshnessCurve, theta1: Distribution, theta2: Distribution,
                           tol: float = 1e-12) -> StochasticOrderReport:
    """Average the curve under two AoI laws with ``theta1 <=_st theta2``.

    ``ordered`` reports whether ``h1 <= h2 + tol``; it is a diagnostic, since
    the monotonicity only holds up to the departure from Markovity.
    """
    for d in (theta1, theta2):
        support = [int(s) for s, m in zip(d.alphabet, d.mass) if m > 0]
        if max(support) > curve.theta_max or min(support) < 0:
            raise InputError(f"AoI support exceeds the curve horizon 0..{curve.theta_max}")
    if not _survival_dominated(theta1, theta2):
        raise InputError("theta1 is not stochastically smaller than theta2")
    h1, h2 = curve.averaged(theta1), curve.averaged(theta2)
    return StochasticOrderReport(h1, h2, h1 <= h2 + tol)


# ---------------------------------------------------------------------------
# CSV interfaces


def _symbol(value):
    # QUOTE_NONNUMERIC yields floats for unquoted fields, str for quoted ones
    if isinstance(value, float) and value.is_integer():
        return int(value)
    return value


def load_time_series_csv(path, window: int = 1) -> TimeSeriesDataset:
    """Read ``t,y,v1[,v2,...]`` with one row per consecutive slot.

    Unquoted fields are numbers; quoted fields are categorical strings.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        header_line = fh.readline()
        header = [h.strip() for h in next(csv.reader([header_line]), [])]
        if len(header) < 3 or header[:2] != ["t", "y"] or not all(h.startswith("v") for h in header[2:]):
            raise PenaltyFormatError(f"{path}:1: header must be t,y,v1[,v2,...]")
        reader = csv.reader(fh, quoting=csv.QUOTE_NONNUMERIC, skipinitialspace=True)
        labels, feats, prev = [], [], None
        lineno = 1
        while True:
            lineno += 1
            try:
                row = next(reader)
            except StopIteration:
                break
            except ValueError as exc:
                raise PenaltyFormatError(f"{path}:{lineno}: {exc}") from None
            if not row:
                continue
            if len(row) != len(header):
                raise PenaltyFormatError(f"{path}:{lineno}: expected {len(header)} fields")
            t = _symbol(row[0])
            if not isinstance(t, int):
                raise PenaltyFormatError(f"{path}:{lineno}: slot index must be an integer")
            if prev is not None and t != prev + 1:
                raise PenaltyFormatError(f"{path}:{lineno}: slots must be consecutive")
            prev = t
            labels.append(_symbol(row[1]))
            feats.append(tuple(_symbol(v) for v in row[2:]))
    if not labels:
        raise PenaltyFormatError(f"{path}: no data rows")
    return TimeSeriesDataset(tuple(labels), tuple(feats), window)


def write_time_series_csv(path, labels: Sequence, features: Sequence):
    with open(path, "w", newline="") as fh:
        rows = [list(v) if isinstance(v, (tuple, list)) else [v] for v in features]
        w = csv.writer(fh, quoting=csv.QUOTE_NONNUMERIC, lineterminator="\n")
        fh.write(",".join(["t", "y"] + [f"v{i + 1}" for i in range(len(rows[0]))]) + "\n")
        for t, (y, v) in enumerate(zip(labels, rows)):
            w.writerow([t, y, *v])


def curve_rows(curve: FreshnessCurve, epsilons=None):
    """Rows for the ``theta,value[,g1,g2][,epsilon]`` curve table."""
    header = ["theta", "value"]
    if curve.g1 is not None:
        header += ["g1", "g2"]
    if epsilons is not None:
        header.append("epsilon")
    rows = []
    for theta in range(curve.theta_max + 1):
        row = [theta, float(curve.values[theta])]
        if curve.g1 is not None:
            row += [float(curve.g1[theta]), float(curve.g2[theta])]
        if epsilons is not None:
            row.append(float(epsilons[theta]))
        rows.append(row)
    return header, rows
