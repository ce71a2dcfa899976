import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from freshsched.errors import (AbsoluteContinuityError, AlphabetMismatchError, InputError,
                               InsufficientDataError, PenaltyFormatError, SupportError,
                               UnsupportedLossError)
from freshsched.info_metrics import (AlphaLoss, Alphabet, BrierLoss, ChainModel, Distribution,
                                     JointDistribution, LogLoss, LossFunction, QuadraticLoss,
                                     TimeSeriesDataset, TripleJoint, ZeroOneLoss, bayes_action,
                                     chi2_conditional_mutual_information, chi2_divergence,
                                     epsilon_markov_coefficient, freshness_curve,
                                     l_conditional_cross_entropy, l_conditional_entropy,
                                     l_conditional_mutual_information, l_divergence, l_entropy,
                                     l_mutual_information, lag_epsilons, load_time_series_csv,
                                     markov_decomposition, stochastic_order_check,
                                     write_time_series_csv)

ALL_LOSSES = [LogLoss(), BrierLoss(), ZeroOneLoss(), AlphaLoss(0.5), AlphaLoss(2.0), QuadraticLoss()]


def uniform(n=2):
    return Distribution.from_masses([1 / n] * n)


# --- independent reference implementations -------------------------------

def ref_expected_loss(mass, action, loss, alphabet):
    return sum(m * loss(y, action, alphabet) for y, m in zip(alphabet, mass) if m > 0)


def ref_conditional_entropy(mass, loss, labels):
    """Loop over x, minimizing the expected pointwise loss over candidate actions."""
    alph = Alphabet(tuple(labels))
    total = 0.0
    for j in range(mass.shape[1]):
        px = mass[:, j].sum()
        if px <= 0:
            continue
        c = mass[:, j] / px
        if loss.family == "zero_one":
            best = min(ref_expected_loss(c, i, loss, alph) for i in range(len(alph)))
        elif loss.family == "quadratic":
            v = np.array(labels, dtype=float)
            best = float(c @ (v - c @ v) ** 2)
        elif loss.family == "log":
            best = -sum(p * math.log(p) for p in c if p > 0)
        elif loss.family == "brier":
            best = 1 - float((c ** 2).sum())
        else:
            a = loss.alpha
            best = a / (a - 1) * (1 - float((c ** a).sum()) ** (1 / a))
        total += px * best
    return total


def simplex_grid(res=200):
    for i in range(res + 1):
        yield np.array([i / res, 1 - i / res])


def simplex_grid3(res=60):
    for i in range(res + 1):
        for j in range(res + 1 - i):
            yield np.array([i, j, res - i - j]) / res


# --- strategies ------------------------------------------------------------

@st.composite
def masses(draw, n):
    w = draw(st.lists(st.floats(0, 1), min_size=n, max_size=n))
    w = np.array(w) + 1e-3
    return w / w.sum()


@st.composite
def joints(draw, ny=3, nx=3):
    m = draw(masses(ny * nx)).reshape(ny, nx)
    return JointDistribution(Alphabet(tuple(range(ny))), Alphabet(tuple(range(nx))), m)


@st.composite
def triples(draw, n=2):
    m = draw(masses(n ** 3)).reshape(n, n, n)
    a = Alphabet(tuple(range(n)))
    return TripleJoint(a, a, a, m)


losses = st.sampled_from(ALL_LOSSES)


# --- types -----------------------------------------------------------------

def test_alphabet_rejects_duplicates_and_empty():
    with pytest.raises(InputError):
        Alphabet((1, 1))
    with pytest.raises(InputError):
        Alphabet(())
    a = Alphabet(("x", "y"))
    assert a.index("y") == 1 and a.symbols[a.index("x")] == "x"


def test_distribution_validates_mass():
    with pytest.raises(InputError):
        Distribution.from_masses([0.5, 0.6])
    with pytest.raises(InputError):
        Distribution.from_masses([1.2, -0.2])
    Distribution.from_masses([0.5, 0.5 + 5e-10])


def test_joint_marginals_and_conditionals():
    j = JointDistribution.from_conditionals([0.5, 0.5], [[0.9, 0.1], [0.2, 0.8]])
    assert np.allclose(j.feature_marginal().mass, [0.5, 0.5])
    assert np.allclose(j.conditional(1).mass, [0.2, 0.8])
    z = JointDistribution((0, 1), (0, 1), [[0.5, 0.0], [0.5, 0.0]])
    assert z.conditional(1) is None


def test_alpha_loss_parameter_checked():
    for bad in (0, 1, -2):
        with pytest.raises(UnsupportedLossError):
            AlphaLoss(bad)
    with pytest.raises(UnsupportedLossError):
        LossFunction("hinge")


# --- bayes_action ------------------------------------------------------------

def test_bayes_action_uniform_log():
    act, h = bayes_action(uniform(), LogLoss())
    assert np.allclose(act.mass, [0.5, 0.5])
    assert h == pytest.approx(math.log(2), abs=1e-12)


def test_bayes_action_zero_one_mode():
    act, h = bayes_action(Distribution.from_masses([0.7, 0.3]), ZeroOneLoss())
    assert act == 0
    assert h == pytest.approx(1 - 0.7, abs=1e-12)


def test_bayes_action_quadratic_mean_and_variance():
    act, h = bayes_action(uniform(), QuadraticLoss())
    assert act == pytest.approx(0.5) and h == pytest.approx(0.25)


def test_quadratic_rejects_symbolic_alphabet():
    d = Distribution(Alphabet(("a", "b")), [0.5, 0.5])
    with pytest.raises(UnsupportedLossError):
        bayes_action(d, QuadraticLoss())


def test_zero_one_ties_go_to_lowest_index():
    act, _ = bayes_action(Distribution(Alphabet(("b", "a", "c")), [0.4, 0.4, 0.2]), ZeroOneLoss())
    assert act == "b"


@pytest.mark.parametrize("loss", [LogLoss(), BrierLoss(), AlphaLoss(0.5), AlphaLoss(2.0), AlphaLoss(5.0)])
@pytest.mark.parametrize("p", [[0.7, 0.3], [0.5, 0.5], [0.95, 0.05]])
def test_closed_form_action_beats_binary_grid(loss, p):
    dist = Distribution.from_masses(p)
    act, h = bayes_action(dist, loss)
    alph = dist.alphabet
    assert ref_expected_loss(dist.mass, act.mass, loss, alph) == pytest.approx(h, abs=1e-12)
    grid_best = min(ref_expected_loss(dist.mass, q, loss, alph) for q in simplex_grid())
    assert h <= grid_best + 1e-12
    assert grid_best - h < 1e-3


@pytest.mark.parametrize("loss", [LogLoss(), BrierLoss(), AlphaLoss(3.0)])
def test_closed_form_action_beats_ternary_grid(loss):
    dist = Distribution.from_masses([0.5, 0.3, 0.2])
    _, h = bayes_action(dist, loss)
    grid_best = min(ref_expected_loss(dist.mass, q, loss, dist.alphabet) for q in simplex_grid3())
    assert h <= grid_best + 1e-12


def test_alpha_entropy_limits():
    d = Distribution.from_masses([0.6, 0.3, 0.1])
    assert l_entropy(d, AlphaLoss(1 + 1e-7)) == pytest.approx(l_entropy(d, LogLoss()), abs=1e-5)
    # alpha -> infinity approaches the 0-1 entropy
    assert l_entropy(d, AlphaLoss(1e7)) == pytest.approx(l_entropy(d, ZeroOneLoss()), abs=1e-5)


# --- conditional entropy ----------------------------------------------------

def test_conditional_entropy_deterministic_is_zero():
    j = JointDistribution((0, 1), (0, 1), np.diag([0.5, 0.5]))
    assert l_conditional_entropy(j, ZeroOneLoss()) == 0.0


@pytest.mark.parametrize("loss", ALL_LOSSES)
def test_conditional_entropy_independent_equals_marginal(loss):
    py, px = np.array([0.2, 0.5, 0.3]), np.array([0.6, 0.4])
    j = JointDistribution((0, 1, 2), (0, 1), np.outer(py, px))
    assert l_conditional_entropy(j, loss) == pytest.approx(l_entropy(j.label_marginal(), loss), abs=1e-12)


def test_conditional_entropy_direct_evaluation():
    j = JointDistribution.from_conditionals([0.5, 0.5], [[0.9, 0.1], [0.2, 0.8]])
    assert l_conditional_entropy(j, ZeroOneLoss()) == pytest.approx(0.15, abs=1e-12)


@given(joints(), losses)
def test_conditional_entropy_matches_reference(j, loss):
    ref = ref_conditional_entropy(j.mass, loss, j.label_alphabet.symbols)
    assert l_conditional_entropy(j, loss) == pytest.approx(ref, abs=1e-10)


@given(joints(), losses)
def test_conditioning_reduces_entropy(j, loss):
    assert l_conditional_entropy(j, loss) <= l_entropy(j.label_marginal(), loss) + 1e-12


# --- cross entropy ------------------------------------------------------------

def test_cross_entropy_equals_entropy_when_identical():
    j = JointDistribution.from_conditionals([0.3, 0.7], [[0.9, 0.1], [0.2, 0.8]])
    for loss in ALL_LOSSES:
        assert l_conditional_cross_entropy(j, j, loss) == pytest.approx(l_conditional_entropy(j, loss), abs=1e-12)


def test_cross_entropy_degenerate_infer_at_train_mode():
    train = JointDistribution.from_conditionals([1.0], [[0.3, 0.7]])
    infer = JointDistribution.from_conditionals([1.0], [[0.0, 1.0]])
    assert l_conditional_cross_entropy(infer, train, ZeroOneLoss()) == 0.0


def test_cross_entropy_mode_mismatch():
    infer = JointDistribution.from_conditionals([1.0], [[0.6, 0.4]])
    train = JointDistribution.from_conditionals([1.0], [[0.4, 0.6]])
    assert l_conditional_cross_entropy(infer, train, ZeroOneLoss()) == pytest.approx(0.6, abs=1e-12)


def test_cross_entropy_errors():
    a = JointDistribution((0, 1), (0, 1), [[0.25, 0.25], [0.25, 0.25]])
    b = JointDistribution((0, 1), (0, 2), [[0.25, 0.25], [0.25, 0.25]])
    with pytest.raises(AlphabetMismatchError):
        l_conditional_cross_entropy(a, b, LogLoss())
    c = JointDistribution((0, 1), (0, 1), [[0.5, 0.0], [0.5, 0.0]])
    with pytest.raises(SupportError):
        l_conditional_cross_entropy(a, c, LogLoss())


@given(joints(), joints(), losses)
def test_cross_entropy_decomposition(infer, train, loss):
    total = l_conditional_entropy(infer, loss)
    px = infer.feature_marginal().mass
    for j, x in enumerate(infer.feature_alphabet):
        if px[j] > 0:
            total += px[j] * l_divergence(train.conditional(x), infer.conditional(x), loss)
    assert l_conditional_cross_entropy(infer, train, loss) == pytest.approx(total, abs=1e-9)


# --- divergences and mutual information ------------------------------------------

def test_divergence_zero_on_equal():
    d = Distribution.from_masses([0.2, 0.8])
    for loss in ALL_LOSSES:
        assert abs(l_divergence(d, d, loss)) < 1e-12


def test_log_divergence_is_kl_with_second_argument_as_reference():
    p, q = Distribution.from_masses([0.5, 0.5]), Distribution.from_masses([0.9, 0.1])
    kl = 0.9 * math.log(0.9 / 0.5) + 0.1 * math.log(0.1 / 0.5)
    assert l_divergence(p, q, LogLoss()) == pytest.approx(kl, abs=1e-12)


def test_zero_one_divergence():
    p, q = Distribution.from_masses([0.4, 0.6]), Distribution.from_masses([0.6, 0.4])
    assert l_divergence(p, q, ZeroOneLoss()) == pytest.approx(0.2, abs=1e-12)


def test_divergence_alphabet_mismatch():
    with pytest.raises(AlphabetMismatchError):
        l_divergence(Distribution.from_masses([0.5, 0.5]), Distribution.from_masses([0.5, 0.5], "ab"), LogLoss())


@given(masses(3), masses(3), losses)
def test_divergence_nonnegative(p, q, loss):
    assert l_divergence(Distribution.from_masses(p), Distribution.from_masses(q), loss) >= -1e-12


def test_mutual_information_examples():
    indep = JointDistribution((0, 1), (0, 1), np.full((2, 2), 0.25))
    assert abs(l_mutual_information(indep, ZeroOneLoss())) < 1e-12
    same = JointDistribution((0, 1), (0, 1), np.diag([0.5, 0.5]))
    assert l_mutual_information(same, ZeroOneLoss()) == pytest.approx(0.5, abs=1e-12)


def test_mutual_information_can_be_asymmetric():
    # found by search over 2x3 joints; 0-1 loss separates the two directions
    m = np.array([[0.3, 0.1, 0.1], [0.0, 0.2, 0.3]])
    j = JointDistribution((0, 1), (0, 1, 2), m)
    fwd = l_mutual_information(j, ZeroOneLoss())
    bwd = l_mutual_information(j.transpose(), ZeroOneLoss())
    assert abs(fwd - bwd) > 1e-3


@given(joints(3, 2), losses)
def test_mutual_information_nonnegative(j, loss):
    assert l_mutual_information(j, loss) >= -1e-12


@given(triples(), losses)
def test_conditional_mutual_information_nonnegative(t, loss):
    assert l_conditional_mutual_information(t, loss) >= -1e-12


# --- chi-square and epsilon-Markov ----------------------------------------------------

def test_chi2_examples():
    assert chi2_divergence(uniform(), uniform()) == 0.0
    assert chi2_divergence(Distribution.from_masses([1, 0]), uniform()) == pytest.approx(1.0, abs=1e-12)
    assert chi2_divergence(Distribution.from_masses([0.6, 0.4]), uniform()) == pytest.approx(0.04, abs=1e-12)


def test_chi2_zero_over_zero_and_continuity_error():
    p = Distribution.from_masses([0.5, 0.5, 0.0])
    q = Distribution.from_masses([0.25, 0.75, 0.0])
    assert chi2_divergence(p, q) == pytest.approx(0.25 ** 2 / 0.25 + 0.25 ** 2 / 0.75)
    with pytest.raises(AbsoluteContinuityError):
        chi2_divergence(q, Distribution.from_masses([1.0, 0.0, 0.0]))


def brute_force_chi2_cmi(m):
    """``sum_{x,z} P(x,z) sum_y (P(y|x,z) - P(y|x))^2 / P(y|x)`` cell by cell."""
    ny, nx, nz = m.shape
    total = 0.0
    for x in range(nx):
        px = m[:, x, :].sum()
        if px == 0:
            continue
        for z in range(nz):
            pxz = m[:, x, z].sum()
            if pxz == 0:
                continue
            for y in range(ny):
                pyx = m[y, x, :].sum() / px
                pyxz = m[y, x, z] / pxz
                if pyx > 0:
                    total += pxz * (pyxz - pyx) ** 2 / pyx
    return total


def test_epsilon_zero_for_markov_triple():
    # Y = X_{t+1}, Z = X_{t-1}: both only linked through X
    chain = ChainModel.symmetric_binary(0.1, label_delay=0)
    t = chain.triple_joint(1).transpose((0, 1, 2))
    assert epsilon_markov_coefficient(t) < 1e-12


def test_epsilon_positive_for_delayed_label():
    chain = ChainModel.symmetric_binary(0.1, label_delay=2)
    t = chain.triple_joint(1)  # (Y_0 = V_{-2}, V_{-1}, V_{-2})
    eps = epsilon_markov_coefficient(t)
    assert eps > 0
    assert eps ** 2 == pytest.approx(brute_force_chi2_cmi(t.mass), abs=1e-12)


@given(triples(3))
def test_chi2_cmi_symmetric(t):
    a = chi2_conditional_mutual_information(t)
    b = chi2_conditional_mutual_information(t.transpose((2, 1, 0)))
    assert a == pytest.approx(brute_force_chi2_cmi(t.mass), abs=1e-12)
    assert abs(a - b) <= 1e-12


@given(triples(2), losses)
def test_data_processing_for_markov_triples(t, loss):
    # force Markovity Z - X - Y: m[y,x,z] = P(x) P(y|x) P(z|x)
    m = t.mass
    px = m.sum(axis=(0, 2))
    pyx = m.sum(axis=2) / px
    pzx = m.sum(axis=0) / px[:, None]
    mk = np.einsum("x,yx,xz->yxz", px, pyx, pzx)
    mk = TripleJoint(t.label_alphabet, t.first_alphabet, t.second_alphabet, mk / mk.sum())
    assert epsilon_markov_coefficient(mk) < 1e-6
    assert l_conditional_entropy(mk.label_with_first(), loss) <= l_conditional_entropy(mk.label_with_second(), loss) + 1e-9


# --- curves ---------------------------------------------------------------------

def test_delayed_chain_curve_hits_zero_at_delay():
    chain = ChainModel.symmetric_binary(0.1, label_delay=2)
    c = freshness_curve(chain, ZeroOneLoss(), 6)
    assert c(2) == 0.0
    assert c(0) > 0 and c(4) > 0
    assert np.argmin(c.values) == 2


def test_iid_source_loses_information_after_lag_zero():
    chain = ChainModel(np.array([[0.3, 0.7], [0.3, 0.7]]))
    for loss in ALL_LOSSES:
        c = freshness_curve(chain, loss, 4)
        h = l_entropy(Distribution.from_masses([0.3, 0.7]), loss)
        assert c(0) == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(c.values[1:], h, atol=1e-12)


def test_symmetric_chain_log_curve_monotone_to_ln2():
    chain = ChainModel.symmetric_binary(0.1)
    c = freshness_curve(chain, LogLoss(), 60)
    assert np.all(np.diff(c.values) >= -1e-12)
    assert c(60) == pytest.approx(math.log(2), abs=1e-9)
    # k-step flip probability (1 - 0.8^k)/2 gives the binary entropy exactly
    q = (1 - 0.8 ** 3) / 2
    assert c(3) == pytest.approx(-(q * math.log(q) + (1 - q) * math.log(1 - q)), abs=1e-12)


def test_curve_averaging_under_random_aoi():
    chain = ChainModel.symmetric_binary(0.1)
    c = freshness_curve(chain, LogLoss(), 5)
    theta = Distribution.from_masses([0.5, 0.5], [1, 4])
    assert c.averaged(theta) == pytest.approx(0.5 * c(1) + 0.5 * c(4))


def test_decomposition_identity_and_markov_g2():
    markov = ChainModel.symmetric_binary(0.2)
    for loss in ALL_LOSSES:
        dec = markov_decomposition(markov, loss, 5)
        assert np.max(np.abs(dec.g1 - dec.g2 - dec.direct.values)) < 1e-9
        assert np.max(np.abs(dec.g2)) < 1e-9
        assert dec.g1[0] == pytest.approx(dec.direct(0)) and dec.g2[0] == 0.0


def test_decomposition_nonmarkov_g2_positive():
    dec = markov_decomposition(ChainModel.symmetric_binary(0.1, label_delay=2), ZeroOneLoss(), 5)
    assert np.all(dec.g2[1:] > 0)
    assert np.all(np.diff(dec.g1) >= -1e-12) and np.all(np.diff(dec.g2) >= -1e-12)
    assert np.max(np.abs(dec.g1 - dec.g2 - dec.direct.values)) < 1e-9


def test_lag_epsilons_zero_for_markov():
    assert np.all(lag_epsilons(ChainModel.symmetric_binary(0.3), 4) < 1e-12)


def sample_chain(chain, n, seed):
    rng = np.random.default_rng(seed)
    P = chain.transition
    v = np.empty(n, dtype=int)
    v[0] = rng.choice(len(P), p=chain.stationary)
    for t in range(1, n):
        v[t] = rng.choice(len(P), p=P[v[t - 1]])
    d = chain.label_delay
    labels = [chain.label_map[v[max(t - d, 0)]] for t in range(n)]
    return labels, v.tolist()


def test_dataset_curve_tracks_exact_chain():
    chain = ChainModel.symmetric_binary(0.1, label_delay=2)
    labels, feats = sample_chain(chain, 20000, 0)
    data = TimeSeriesDataset(labels, feats)
    emp = freshness_curve(data, ZeroOneLoss(), 5)
    exact = freshness_curve(chain, ZeroOneLoss(), 5)
    assert np.allclose(emp.values, exact.values, atol=0.02)
    assert emp(2) == 0.0
    dec = markov_decomposition(data, LogLoss(), 5)
    assert np.max(np.abs(dec.g1 - dec.g2 - dec.direct.values)) < 1e-9


def test_dataset_windows_and_counts():
    data = TimeSeriesDataset([0, 1, 0, 1, 1], [[0], [1], [0], [1], [1]], window=2)
    j = data.pair_joint(1)
    # valid t in [theta + u - 1, n - 1] = [2, 4]
    assert j.mass.sum() == pytest.approx(1.0)
    samples = data.pair_samples(1)
    assert samples == [(0, (1, 0)), (1, (0, 1)), (1, (1, 0))]
    with pytest.raises(InsufficientDataError) as info:
        data.pair_joint(4)
    assert info.value.theta == 4


def test_train_infer_cross_entropy_curve():
    chain = ChainModel.symmetric_binary(0.1, label_delay=1)
    labels, feats = sample_chain(chain, 5000, 1)
    data = TimeSeriesDataset(labels, feats)
    same = freshness_curve(data, LogLoss(), 3, train=data)
    assert np.allclose(same.values, freshness_curve(data, LogLoss(), 3).values, atol=1e-12)
    flipped = TimeSeriesDataset([1 - y for y in labels], feats)
    worse = freshness_curve(data, ZeroOneLoss(), 3, train=flipped)
    assert worse(1) > 0.5


# --- stochastic ordering ------------------------------------------------------------

def test_stochastic_order_check():
    markov = freshness_curve(ChainModel.symmetric_binary(0.1), LogLoss(), 5)
    d1 = Distribution.point_mass(1, range(6))
    d3 = Distribution.point_mass(3, range(6))
    rep = stochastic_order_check(markov, d1, d3)
    assert rep.ordered and rep.h1 <= rep.h2
    same = stochastic_order_check(markov, d3, d3)
    assert same.h1 == same.h2
    dip = freshness_curve(ChainModel.symmetric_binary(0.1, label_delay=2), ZeroOneLoss(), 5)
    rep = stochastic_order_check(dip, Distribution.point_mass(0, range(6)), Distribution.point_mass(2, range(6)))
    assert rep.h1 > rep.h2 and not rep.ordered


def test_stochastic_order_check_errors():
    c = freshness_curve(ChainModel.symmetric_binary(0.1), LogLoss(), 3)
    with pytest.raises(InputError):
        stochastic_order_check(c, Distribution.point_mass(0, range(5)), Distribution.point_mass(4, range(5)))
    with pytest.raises(InputError):
        stochastic_order_check(c, Distribution.point_mass(2, range(4)), Distribution.point_mass(1, range(4)))


# --- CSV ------------------------------------------------------------------------------

def test_time_series_csv_roundtrip(tmp_path):
    path = tmp_path / "ts.csv"
    write_time_series_csv(path, ["a", "b", "a"], [(0, "x"), (1, "y"), (2, "x")])
    data = load_time_series_csv(path)
    assert data.labels == ("a", "b", "a")
    assert data.features == ((0, "x"), (1, "y"), (2, "x"))


def test_time_series_csv_errors(tmp_path):
    bad_header = tmp_path / "h.csv"
    bad_header.write_text("time,y,v1\n0,1,1\n")
    with pytest.raises(PenaltyFormatError):
        load_time_series_csv(bad_header)
    gap = tmp_path / "g.csv"
    gap.write_text("t,y,v1\n0,1,1\n2,1,1\n")
    with pytest.raises(PenaltyFormatError, match=":3"):
        load_time_series_csv(gap)
    unquoted = tmp_path / "u.csv"
    unquoted.write_text("t,y,v1\n0,abc,1\n")
    with pytest.raises(PenaltyFormatError):
        load_time_series_csv(unquoted)
