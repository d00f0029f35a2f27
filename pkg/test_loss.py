import numpy as np
import pytest

from agtrack.errors import ShapeMismatch
from agtrack.loss import LossWeights, bmse, build_masks, check_labels, \
    coefficients
from conftest import numeric_grad

WTS = LossWeights()


def test_masks_identity():
    m = build_masks(np.eye(2))
    np.testing.assert_array_equal(m.cont_pos, np.eye(2))
    np.testing.assert_array_equal(m.cont_neg, 1. - np.eye(2))
    np.testing.assert_array_equal(m.new, 0.)
    np.testing.assert_array_equal(m.disap, 0.)


def test_masks_single_zero_entry_is_new_and_gone():
    m = build_masks(np.zeros((1, 1)))
    assert m.new[0, 0] == 1. and m.disap[0, 0] == 1.
    assert m.cont_pos[0, 0] == 0. and m.cont_neg[0, 0] == 0.


def test_masks_two_new_rows():
    labels = np.zeros((8, 10))
    matched = [r for r in range(8) if r not in (2, 7)]
    for col, row in enumerate(matched):
        labels[row, col] = 1.
    m = build_masks(labels)
    assert sorted(np.nonzero(m.new[:, 0])[0]) == [2, 7]
    # six matched rows leave four of ten columns without a match
    assert sorted(np.nonzero(m.disap[0])[0]) == [6, 7, 8, 9]


def test_masks_cover_every_entry_once(rng):
    labels = np.zeros((5, 6))
    for i, j in enumerate(rng.permutation(6)[:4]):
        labels[i, j] = 1.
    m = build_masks(labels)
    either = np.maximum(m.new, m.disap)
    np.testing.assert_array_equal(m.cont_pos + m.cont_neg + either, 1.)


def test_bad_labels():
    with pytest.raises(ValueError):
        check_labels([[1., 1.]])
    with pytest.raises(ValueError):
        check_labels([[0.5]])
    with pytest.raises(ShapeMismatch):
        check_labels([1., 0.])


def test_exact_prediction_leaves_regularization():
    labels = np.eye(3)
    loss, grad = bmse(labels, labels, build_masks(labels), WTS, 7.)
    assert loss == pytest.approx(0.07, abs=1e-15)
    np.testing.assert_array_equal(grad, 0.)


def test_single_positive_entry():
    labels = np.eye(2)
    S = labels.copy()
    S[0, 0] = 0.8
    loss, _ = bmse(S, labels, build_masks(labels), WTS)
    assert loss == pytest.approx(0.04, abs=1e-12)


def test_single_new_row_entry():
    labels = np.array([[0., 0.], [1., 0.]])
    S = labels.copy()
    S[0, 0] = 0.3
    loss, _ = bmse(S, labels, build_masks(labels), WTS)
    assert loss == pytest.approx(4.5, abs=1e-12)


def test_three_by_three_with_new_and_gone_crossing():
    labels = np.array([[1., 0., 0.], [0., 0., 0.], [0., 1., 0.]])
    S = np.array([[0.9, 0.1, 0.2], [0.3, 0., 0.4], [0.05, 0.7, 0.]])
    m = build_masks(labels)
    assert coefficients(m, WTS)[1, 2] == 100.
    loss, _ = bmse(S, labels, m, WTS, 3.)
    expected = (1 * 0.01 + 25 * 0.01 + 50 * 0.04 + 50 * 0.09 + 100 * 0.16 +
                25 * 0.0025 + 1 * 0.09 + 0.01 * 3.)
    assert loss == pytest.approx(expected, abs=1e-12)


def test_gradient_matches_finite_differences(rng):
    labels = np.zeros((3, 4))
    labels[0, 1] = labels[2, 3] = 1.
    m = build_masks(labels)
    S = rng.random((3, 4))
    loss_fn = lambda: bmse(S, labels, m, WTS)[0]
    _, grad = bmse(S, labels, m, WTS)
    np.testing.assert_allclose(grad, numeric_grad(loss_fn, S, 1e-6),
                               rtol=1e-6, atol=1e-6)


def test_loss_is_non_negative(rng):
    for _ in range(20):
        labels = np.zeros((3, 3))
        labels[rng.integers(3), rng.integers(3)] = 1.
        loss, _ = bmse(rng.random((3, 3)), labels, build_masks(labels), WTS,
                       rng.random())
        assert loss >= 0.


def test_plain_mse_and_shape_check():
    labels = np.eye(2)
    m = build_masks(labels)
    loss, _ = bmse(np.zeros((2, 2)), labels, m, LossWeights.plain_mse())
    assert loss == pytest.approx(2.)
    with pytest.raises(ShapeMismatch):
        bmse(np.zeros((2, 3)), labels, m, WTS)
    with pytest.raises(ValueError):
        LossWeights(alpha=-1.)
