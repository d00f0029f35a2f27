"""Balanced MSE loss over the detection x tracklet similarity matrix

Entries are split into four categories read off the label matrix:
continuing pairs labelled 0 or 1, rows of new detections (all-zero rows)
and columns of disappeared tracklets (all-zero columns). Each category has
its own coefficient so that the few new/disappeared entries are not drowned
by the many continuing negatives.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch

__all__ = ['LossWeights', 'SampleMasks', 'check_labels', 'build_masks',
           'coefficients', 'bmse']


@dataclass(frozen=True)
class LossWeights:
    """Per-category coefficients and the weight-decay factor

    Attributes:
        alpha (float): continuing negatives
        beta (float): continuing positives
        gamma (float): new detections
        delta (float): disappeared tracklets
        epsilon (float): L2 regularization
    """
    alpha: float = 25.
    beta: float = 1.
    gamma: float = 50.
    delta: float = 50.
    epsilon: float = 0.01

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma, self.delta,
               self.epsilon) < 0:
            raise ValueError('loss weights must be non-negative')

    @classmethod
    def plain_mse(cls):
        """Unweighted squared error with no regularization"""
        return cls(1., 1., 1., 1., 0.)


@dataclass(frozen=True, eq=False)
class SampleMasks:
    """0/1 masks of the four sample categories, all M x N"""
    cont_neg: np.ndarray
    cont_pos: np.ndarray
    new: np.ndarray
    disap: np.ndarray


def check_labels(labels):
    """Validates a 0/1 label matrix with at most one 1 per row and column

    Returns:
        The labels as a float array
    """
    labels = np.asarray(labels, dtype=np.float64)
    if labels.ndim != 2:
        raise ShapeMismatch('labels must be 2-D, got %s' % (labels.shape,))
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError('labels must be 0 or 1')
    if np.any(labels.sum(axis=0) > 1) or np.any(labels.sum(axis=1) > 1):
        raise ValueError('labels may hold at most one 1 per row and column')
    return labels


def build_masks(labels):
    """Splits a label matrix into the four sample categories

    A new detection is a row without any 1; a disappeared tracklet is a
    column without any 1. Continuing masks are zero on both.

    Args:
        labels (np.array): M x N 0/1 labels

    Returns:
        SampleMasks
    """
    labels = check_labels(labels)
    m, n = labels.shape
    new_rows = labels.sum(axis=1) == 0
    gone_cols = labels.sum(axis=0) == 0
    new = np.repeat(new_rows[:, None], n, axis=1).astype(np.float64)
    disap = np.repeat(gone_cols[None, :], m, axis=0).astype(np.float64)
    cont = (1. - new) * (1. - disap)
    return SampleMasks(cont_neg=cont * (1. - labels), cont_pos=cont * labels,
                       new=new, disap=disap)


def coefficients(masks, wts):
    """Per-entry loss coefficients; new/disappeared crossings get both"""
    return (wts.alpha * masks.cont_neg + wts.beta * masks.cont_pos +
            wts.gamma * masks.new + wts.delta * masks.disap)


def bmse(S_hat, labels, masks, wts, reg_norm_sq=0.):
    """Balanced MSE and its gradient with respect to the prediction

    Args:
        S_hat (np.array): M x N predicted similarity
        labels (np.array): M x N 0/1 labels
        masks (SampleMasks): from build_masks(labels)
        wts (LossWeights): coefficients
        reg_norm_sq (float): squared norm of the regularized weights

    Returns:
        (loss, dL/dS_hat)
    """
    S_hat = np.asarray(S_hat, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if S_hat.shape != labels.shape or masks.new.shape != labels.shape:
        raise ShapeMismatch('prediction %s, labels %s and masks %s differ'
                            % (S_hat.shape, labels.shape, masks.new.shape))
    coef = coefficients(masks, wts)
    resid = S_hat - labels
    loss = float(np.sum(coef * resid * resid) + wts.epsilon * reg_norm_sq)
    return loss, 2. * coef * resid
