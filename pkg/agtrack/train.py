"""Adam with a cosine-annealed learning rate, driving balanced-MSE training

One frame pair (M detections x N tracklets with its label matrix) is one
batch; parameters are updated after every pair.
"""

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import agnn
from .core import iou_matrix
from .errors import EmptyBatch, EpochOutOfRange, ShapeMismatch
from .loss import LossWeights, bmse, build_masks, check_labels
from .model import REGULARIZED
from .roifeat import embed_backward, embed_rows, pool_regions

__all__ = ['LrSchedule', 'lr_at', 'OptimState', 'adam_step',
           'FramePairSample', 'sample_gradients', 'train_epoch', 'fit']

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LrSchedule:
    """A single cosine arc from lr_max to lr_min, refreshed per block

    Attributes:
        lr_max (float): rate at epoch 0
        lr_min (float): rate at the last epoch
        period_epochs (int): epochs sharing one rate
        total_epochs (int): length of the arc
    """
    lr_max: float = 0.05
    lr_min: float = 2.5e-7
    period_epochs: int = 30
    total_epochs: int = 3000

    def __post_init__(self):
        if not self.lr_max > self.lr_min > 0:
            raise ValueError('need lr_max > lr_min > 0')
        if self.period_epochs < 1 or self.total_epochs < 1:
            raise ValueError('period and total epochs must be >= 1')


def lr_at(epoch, sched):
    """Learning rate for an epoch

    The rate is constant over each period_epochs block and follows one
    cosine arc over total_epochs, so lr_at(0) is lr_max and
    lr_at(total_epochs) is lr_min.

    Raises:
        EpochOutOfRange: outside [0, total_epochs]
    """
    if not 0 <= epoch <= sched.total_epochs:
        raise EpochOutOfRange('epoch %d outside [0, %d]'
                              % (epoch, sched.total_epochs))
    block_start = (epoch // sched.period_epochs) * sched.period_epochs
    progress = min(block_start / sched.total_epochs, 1.)
    frac = 0.5 * (1. + math.cos(math.pi * progress))
    return sched.lr_min * (1. - frac) + sched.lr_max * frac


class OptimState(object):
    """Adam moment accumulators, one pair per named tensor"""

    def __init__(self, tensors, beta1=0.9, beta2=0.999, eps=1e-8):
        """Initialize zeroed moments shaped like tensors

        Args:
            tensors (dict): name -> np.array of the parameters
            beta1 (float): first-moment decay
            beta2 (float): second-moment decay
            eps (float): denominator guard
        """
        self._m = {k: np.zeros_like(np.asarray(v, dtype=np.float64))
                   for k, v in tensors.items()}
        self._v = {k: np.zeros_like(np.asarray(v, dtype=np.float64))
                   for k, v in tensors.items()}
        self._step = 0
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    def _get_step(self):
        return self._step
    step = property(_get_step)
    """Number of updates applied so far"""

    def _get_first(self):
        return self._m
    first_moment = property(_get_first)
    """Running mean of the gradients"""

    def _get_second(self):
        return self._v
    second_moment = property(_get_second)
    """Running mean of the squared gradients"""


def adam_step(params, grads, state, lr, trainable=None):
    """One bias-corrected Adam update

    Args:
        params (dict): name -> np.array
        grads (dict): name -> gradient of the same shape
        state (OptimState): moments, advanced in place
        lr (float): learning rate
        trainable (iterable): names to update (all if None)

    Returns:
        A new dict of parameters
    """
    names = list(params) if trainable is None else list(trainable)
    for k in names:
        if np.shape(grads[k]) != np.shape(params[k]) or \
                np.shape(state._m[k]) != np.shape(params[k]):
            raise ShapeMismatch('%s: parameter %s, gradient %s, moment %s'
                                % (k, np.shape(params[k]),
                                   np.shape(grads[k]),
                                   np.shape(state._m[k])))
    state._step += 1
    t = state._step
    b1, b2 = state.beta1, state.beta2
    out = dict(params)
    for k in names:
        g = np.asarray(grads[k], dtype=np.float64)
        state._m[k] = b1 * state._m[k] + (1. - b1) * g
        state._v[k] = b2 * state._v[k] + (1. - b2) * g * g
        m_hat = state._m[k] / (1. - b1 ** t)
        v_hat = state._v[k] / (1. - b2 ** t)
        out[k] = params[k] - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return out


@dataclass(eq=False)
class FramePairSample:
    """One training pair: pooled regions on both sides and the labels

    Attributes:
        det_regions (np.array): M x (C*P*P) pooled detection regions
        trk_regions (np.array): N x (C*P*P) pooled tracklet regions
        iou (np.array): M x N overlaps of detection and tracklet boxes
        labels (np.array): M x N 0/1 identity labels
    """
    det_regions: np.ndarray = field(repr=False)
    trk_regions: np.ndarray = field(repr=False)
    iou: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.labels = check_labels(self.labels)
        m, n = self.labels.shape
        if self.det_regions.shape[0] != m or self.trk_regions.shape[0] != n \
                or np.shape(self.iou) != (m, n):
            raise ShapeMismatch('sample blocks do not agree with %d x %d '
                                'labels' % (m, n))
        self.masks = build_masks(self.labels)

    @classmethod
    def from_map(cls, fmap, det_boxes, trk_boxes, labels, pool):
        """Pools both box lists from the same (current) feature map"""
        return cls(pool_regions(fmap, det_boxes, pool),
                   pool_regions(fmap, trk_boxes, pool),
                   iou_matrix(det_boxes, trk_boxes), labels)

    @property
    def shape(self):
        return self.labels.shape


def sample_gradients(sample, model, wts, adaptive=True):
    """Loss and gradients of every model tensor on one pair

    Returns:
        (loss, grads) with grads keyed like TrackModel.tensors()
    """
    Fd = embed_rows(sample.det_regions, model.embed)
    Ft = embed_rows(sample.trk_regions, model.embed)
    S, cache = agnn.forward(Fd, Ft, sample.iou, model.agnn, adaptive)
    loss, grad_S = bmse(S, sample.labels, sample.masks, wts,
                        model.reg_norm_sq())
    g = agnn.backward(cache, grad_S)
    g_det = embed_backward(sample.det_regions, g['Fd'])
    g_trk = embed_backward(sample.trk_regions, g['Ft'])
    grads = {'W1': g['W1'], 'W2': g['W2'], 'Wa': g['Wa'],
             'w_raw': np.array(g['w_raw']),
             'projection': g_det['projection'] + g_trk['projection'],
             'bias': g_det['bias'] + g_trk['bias']}
    tensors = model.tensors()
    for name in REGULARIZED:
        grads[name] = grads[name] + 2. * wts.epsilon * tensors[name]
    return loss, grads


def train_epoch(pairs, model, state, lr, wts=None, adaptive=True,
                trainable=None):
    """Runs one pass over the pairs, updating after each one

    Args:
        pairs ([FramePairSample]): training pairs
        model (TrackModel): current parameters
        state (OptimState): Adam moments
        lr (float): learning rate for the whole epoch
        wts (LossWeights): loss coefficients, defaults if None
        adaptive (bool): use the AGNN's adaptive gate
        trainable (iterable): tensor names to update (all if None)

    Returns:
        (mean loss, updated model)

    Raises:
        EmptyBatch: if there are no usable pairs
    """
    if wts is None:
        wts = LossWeights()
    losses = []
    for sample in pairs:
        m, n = sample.shape
        if m == 0 or n == 0:
            continue
        loss, grads = sample_gradients(sample, model, wts, adaptive)
        model = model.with_tensors(
            adam_step(model.tensors(), grads, state, lr, trainable))
        losses.append(loss)
    if not losses:
        raise EmptyBatch('no frame pair with both detections and tracklets')
    return float(np.mean(losses)), model


def fit(pairs, model, epochs, sched=None, wts=None, adaptive=True,
        trainable=None, checkpoint_every=100, checkpoint=None, log=None):
    """Trains for a number of epochs following the learning-rate schedule

    Args:
        pairs ([FramePairSample]): training pairs
        model (TrackModel): starting parameters
        epochs (int): number of epochs to run (at most sched.total_epochs)
        sched (LrSchedule): schedule, defaults if None
        wts (LossWeights): loss coefficients, defaults if None
        adaptive (bool): use the AGNN's adaptive gate
        trainable (iterable): tensor names to update (all if None)
        checkpoint_every (int): epochs between checkpoint calls
        checkpoint (callable): called as checkpoint(model, epoch)
        log (file): text stream receiving "epoch,lr,mean_loss" CSV lines

    Returns:
        (model, list of mean losses per epoch)
    """
    if sched is None:
        sched = LrSchedule()
    state = OptimState(model.tensors())
    writer = csv.writer(log, lineterminator='\n') if log is not None \
        else None
    history = []
    for epoch in range(epochs):
        lr = lr_at(epoch, sched)
        loss, model = train_epoch(pairs, model, state, lr, wts, adaptive,
                                  trainable)
        history.append(loss)
        logger.info('epoch %d lr %.3g mean loss %.6g', epoch, lr, loss)
        if writer is not None:
            writer.writerow([epoch, repr(lr), repr(loss)])
        if checkpoint is not None and checkpoint_every > 0 and \
                (epoch + 1) % checkpoint_every == 0:
            checkpoint(model, epoch + 1)
    return model, history
