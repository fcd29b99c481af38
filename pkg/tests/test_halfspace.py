import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from multireduce.errors import NotRealizableError
from multireduce.halfspace import (BinarySample, Halfspace, augment, empirical_error, exact_best_error,
                                   majority_halfspace, polish_margin, predict, sign, train_erm_approx,
                                   train_realizable)


# ---------------------------------------------------------------- independent oracles

def separable(locs, labels):
    """Strict linear separability of a labelling, by LP feasibility."""
    Z = augment(locs) * np.asarray(labels)[:, None]
    res = linprog(np.zeros(Z.shape[1]), A_ub=-Z, b_ub=-np.ones(len(Z)),
                  bounds=[(None, None)] * Z.shape[1], method="highs")
    return res.status == 0


def lp_enumeration_best_error(sample):
    """Minimum over every separable labelling of the distinct locations."""
    w = sample.normalized_weights()
    locs, inv = np.unique(sample.X, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    best = 1.0
    for labels in itertools.product((-1, 1), repeat=len(locs)):
        labels = np.array(labels)
        err = float(np.sum(w[labels[inv] != sample.y]))
        if err < best - 1e-12 and separable(locs, labels):
            best = err
    return best


def threshold_best_error(sample):
    """d = 1: every threshold between sorted values, both orientations."""
    x = sample.X[:, 0]
    w = sample.normalized_weights()
    vals = np.unique(x)
    cuts = np.r_[vals[0] - 1, (vals[:-1] + vals[1:]) / 2, vals[-1] + 1]
    best = 1.0
    for t in cuts:
        for s in (1, -1):
            pred = np.where(s * (x - t) >= 0, 1, -1)
            best = min(best, float(np.sum(w[pred != sample.y])))
    return best


@st.composite
def small_samples(draw, d=2, max_locs=6, grid=3):
    n_locs = draw(st.integers(1, max_locs))
    coords = st.integers(-grid, grid)
    locs = draw(st.lists(st.tuples(*[coords] * d), min_size=n_locs, max_size=n_locs, unique=True))
    rows, ys, ws = [], [], []
    for loc in locs:
        for _ in range(draw(st.integers(1, 2))):
            rows.append(loc)
            ys.append(draw(st.sampled_from([-1, 1])))
            ws.append(draw(st.integers(1, 4)))
    return BinarySample(np.array(rows, dtype=float), ys, np.array(ws, dtype=float))


# ---------------------------------------------------------------- basics

def test_sign_of_zero_is_positive():
    assert sign(0) == 1
    assert sign(np.array([-1e-300, 0.0, 2.0])).tolist() == [-1, 1, 1]


def test_augment_appends_one():
    assert augment([2.0, 3.0]).tolist() == [2.0, 3.0, 1.0]
    assert augment(np.zeros((2, 1))).tolist() == [[0.0, 1.0], [0.0, 1.0]]


def test_halfspace_predict_and_boundary():
    h = Halfspace([1.0, -1.0, 0.0])
    assert predict(h, [1.0, 1.0]) == 1          # on the boundary
    assert predict(h, [0.0, 1.0]) == -1
    assert (-h).predict(np.array([[0.0, 1.0]])).tolist() == [1]
    with pytest.raises(ValueError):
        h.predict(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        Halfspace([1.0])


def test_binary_sample_validation():
    with pytest.raises(ValueError):
        BinarySample(np.zeros((2, 1)), [1, 0])
    with pytest.raises(ValueError):
        BinarySample(np.zeros((2, 1)), [1])
    with pytest.raises(ValueError):
        BinarySample(np.zeros((2, 1)), [1, -1], [1.0, -1.0])


def test_majority_halfspace_prefers_plus_on_ties():
    s = BinarySample(np.zeros((2, 2)), [1, -1])
    assert majority_halfspace(s).predict(np.zeros((1, 2))).tolist() == [1]
    s = BinarySample(np.zeros((3, 2)), [1, -1, -1])
    assert empirical_error(majority_halfspace(s), s) == pytest.approx(1 / 3)


# ---------------------------------------------------------------- exact oracle

def test_xor_best_error_is_one_quarter():
    X = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
    s = BinarySample(X, [1, 1, -1, -1])
    err, h = exact_best_error(s)
    assert err == pytest.approx(0.25)
    assert empirical_error(h, s) == pytest.approx(0.25)


def test_conflicting_labels_at_one_location():
    s = BinarySample(np.zeros((3, 2)), [1, -1, -1], [3.0, 1.0, 1.0])
    err, h = exact_best_error(s)
    assert err == pytest.approx(0.4)
    assert empirical_error(h, s) == pytest.approx(0.4)


def test_collinear_alternating_points():
    X = np.column_stack([np.arange(5.0), np.zeros(5)])
    s = BinarySample(X, [1, -1, 1, -1, 1])
    err, h = exact_best_error(s)
    assert err == pytest.approx(lp_enumeration_best_error(s)) == pytest.approx(0.4)
    assert empirical_error(h, s) == pytest.approx(err)


@settings(max_examples=120, deadline=None)
@given(small_samples())
def test_exact_2d_matches_lp_enumeration(s):
    err, h = exact_best_error(s)
    assert err == pytest.approx(lp_enumeration_best_error(s), abs=1e-9)
    assert empirical_error(h, s) == pytest.approx(err, abs=1e-9)


@settings(max_examples=150, deadline=None)
@given(small_samples(d=1, max_locs=8, grid=6))
def test_exact_1d_matches_threshold_scan(s):
    err, h = exact_best_error(s)
    assert err == pytest.approx(threshold_best_error(s), abs=1e-12)
    assert empirical_error(h, s) == pytest.approx(err, abs=1e-12)


def test_exact_oracle_on_random_continuous_points_matches_lp(rng):
    for _ in range(5):
        X = rng.standard_normal((7, 2))
        s = BinarySample(X, rng.choice([-1, 1], size=7))
        err, h = exact_best_error(s)
        assert err == pytest.approx(lp_enumeration_best_error(s), abs=1e-12)
        assert empirical_error(h, s) == pytest.approx(err, abs=1e-12)


def test_exact_oracle_dimension_limits():
    with pytest.raises(ValueError):
        exact_best_error(BinarySample(np.zeros((2, 3)), [1, -1]))
    with pytest.raises(ValueError):
        exact_best_error(BinarySample(np.zeros((0, 2)), []))


def test_circle_label_map_error_is_an_arc_count():
    # on points in convex position the positive side is a contiguous arc
    k = 12
    ang = 2 * np.pi * np.arange(k) / k
    X = np.column_stack([np.cos(ang), np.sin(ang)])
    y = np.array([1, -1] * 6)
    err, _ = exact_best_error(BinarySample(X, y))
    # best arc covers one positive plus everything else misclassified except one negative run
    best = min(
        np.sum((np.isin(np.arange(k), [(s + t) % k for t in range(L)]) * 2 - 1) != y)
        for s in range(k) for L in range(k + 1)) / k
    assert err == pytest.approx(best)


# ---------------------------------------------------------------- training

def test_perceptron_separates_separable_data(rng):
    X = rng.standard_normal((80, 2))
    y = np.where(X @ [1.0, -2.0] + 0.3 >= 0, 1, -1)
    s = BinarySample(X, y)
    h = train_realizable(s)
    assert empirical_error(h, s) == 0
    assert np.all(y * h.decision(X) > 0)


def test_perceptron_budget_on_xor():
    X = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
    with pytest.raises(NotRealizableError):
        train_realizable(BinarySample(X, [1, 1, -1, -1]), budget=500)


def test_perceptron_is_deterministic_with_shuffle(rng):
    X = rng.standard_normal((40, 2))
    s = BinarySample(X, np.where(X[:, 0] > 0.1, 1, -1))
    a = train_realizable(s, order_seed=5).weights
    b = train_realizable(s, order_seed=5).weights
    assert np.array_equal(a, b)


@settings(max_examples=40, deadline=None)
@given(small_samples())
def test_heuristic_never_beats_the_exact_oracle(s):
    h = train_erm_approx(s, restarts=2, seed=0, iterations=50)
    assert empirical_error(h, s) >= exact_best_error(s)[0] - 1e-12


def test_heuristic_finds_zero_on_separable_data(rng):
    X = rng.uniform(-1, 1, size=(100, 2))
    y = np.where(X[:, 0] + X[:, 1] > 0.2, 1, -1)
    s = BinarySample(X, y)
    assert empirical_error(train_erm_approx(s, seed=0), s) == 0


def test_polish_keeps_labelling_and_widens_margin():
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    h = Halfspace([1.0, 0.0, -1e-6])       # barely separates x=0 from x=1
    p = polish_margin(h, X)
    assert np.array_equal(p.predict(X), h.predict(X))
    margin = lambda g: np.min(np.abs(g.decision(X))) / np.linalg.norm(g.weights[:-1])
    assert margin(p) > 100 * margin(h)


def test_polish_leaves_constant_labelling_alone():
    h = Halfspace.constant(2, -1)
    assert polish_margin(h, np.zeros((3, 2))) is h
