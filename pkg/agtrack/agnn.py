"""Adaptive graph neural network over the detection/tracklet bipartite graph

Detections (M rows) and tracklets (N rows) are the two sides of the graph.
Edge weights mix box overlap with an initial appearance similarity; one
hidden layer aggregates neighbour features through those edges, gates the
aggregate per dimension with a learned sigmoid, and the normalized hidden
states give the output similarity matrix.

Forward keeps every intermediate so that backward can return exact
gradients for the weights, the mixing logit and both feature blocks.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, StaleCache
from .helpers import logistic, uniform_fanin

__all__ = ['AgnnParams', 'AgnnCache', 'initial_similarity', 'prior_edges',
           'forward', 'backward', 'DIST_EPS', 'NORM_EPS']

DIST_EPS = 1e-16
NORM_EPS = 1e-12


class AgnnParams(object):
    """Trainable AGNN parameters"""
    def __init__(self, W1, W2, Wa, w_raw=0.):
        """Initialize from weight matrices and the mixing logit

        Args:
            W1 (np.array): D x D self weights
            W2 (np.array): D x D aggregate weights
            Wa (np.array): D x D adaptive-gate weights
            w_raw (float): logit of the IOU/appearance mixing weight
        """
        self.W1 = np.asarray(W1, dtype=np.float64)
        self.W2 = np.asarray(W2, dtype=np.float64)
        self.Wa = np.asarray(Wa, dtype=np.float64)
        self.w_raw = float(w_raw)
        d = self.W1.shape[0]
        for name in ('W1', 'W2', 'Wa'):
            if getattr(self, name).shape != (d, d):
                raise ShapeMismatch('%s must be %d x %d' % (name, d, d))

    @classmethod
    def init(cls, rng, dim):
        """Uniform(+-1/sqrt(D)) weights and a mixing weight of 0.5"""
        return cls(uniform_fanin(rng, (dim, dim), dim),
                   uniform_fanin(rng, (dim, dim), dim),
                   uniform_fanin(rng, (dim, dim), dim), 0.)

    def _get_dim(self):
        return self.W1.shape[0]
    dim = property(_get_dim)

    def _get_w(self):
        return float(logistic(self.w_raw))
    w = property(_get_w)
    """Mixing weight in (0, 1)"""


@dataclass(eq=False)
class AgnnCache:
    """Intermediates of one forward pass"""
    Fd: np.ndarray
    Ft: np.ndarray
    iou: np.ndarray
    params: AgnnParams
    adaptive: bool
    diff: np.ndarray
    dist: np.ndarray
    inv: np.ndarray
    inv_norm: np.ndarray
    S_ft: np.ndarray
    w: float
    E: np.ndarray
    Ft_ag: np.ndarray
    Fd_ag: np.ndarray
    gate_d: np.ndarray
    gate_t: np.ndarray
    agg_d: np.ndarray
    agg_t: np.ndarray
    Zd: np.ndarray
    Zt: np.ndarray
    Hd: np.ndarray
    Ht: np.ndarray
    norm_d: np.ndarray
    norm_t: np.ndarray
    Hd_hat: np.ndarray
    Ht_hat: np.ndarray

    @property
    def shape(self):
        return self.E.shape


def _initial_similarity_parts(Fd, Ft):
    diff = Fd[:, None, :] - Ft[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    inv = 1. / (dist + DIST_EPS)
    inv_norm = np.sqrt(np.sum(inv * inv, axis=1, keepdims=True))
    return diff, dist, inv, inv_norm, inv / inv_norm


def initial_similarity(Fd, Ft):
    """Row-normalized inverse-distance similarity between two feature blocks

    Args:
        Fd (np.array): M x D detection features
        Ft (np.array): N x D tracklet features

    Returns:
        An M x N matrix whose rows have unit L2 norm
    """
    Fd = np.asarray(Fd, dtype=np.float64)
    Ft = np.asarray(Ft, dtype=np.float64)
    _check_features(Fd, Ft)
    return _initial_similarity_parts(Fd, Ft)[-1]


def prior_edges(S_ft, iou, w):
    """Convex combination w * IOU + (1 - w) * S_ft

    Args:
        S_ft (np.array): M x N initial similarity
        iou (np.array): M x N box overlaps
        w (float): mixing weight in [0, 1]

    Returns:
        The M x N edge matrix E
    """
    S_ft = np.asarray(S_ft, dtype=np.float64)
    iou = np.asarray(iou, dtype=np.float64)
    if S_ft.shape != iou.shape:
        raise ShapeMismatch('similarity %s and IOU %s differ'
                            % (S_ft.shape, iou.shape))
    if not 0. <= w <= 1.:
        raise ValueError('mixing weight %r outside [0, 1]' % w)
    return w * iou + (1. - w) * S_ft


def _check_features(Fd, Ft):
    if Fd.ndim != 2 or Ft.ndim != 2 or Fd.shape[1] != Ft.shape[1]:
        raise ShapeMismatch('feature blocks %s and %s do not agree'
                            % (Fd.shape, Ft.shape))
    if Fd.shape[0] < 1 or Ft.shape[0] < 1:
        raise ShapeMismatch('need at least one detection and one tracklet')


def _update(F, F_ag, params, adaptive):
    agg = F_ag @ params.W2
    if adaptive:
        gate = logistic(F @ params.Wa)
    else:
        gate = np.ones_like(agg)
    Z = F @ params.W1 + gate * agg
    return gate, agg, Z


def forward(Fd, Ft, iou, params, adaptive=True):
    """Runs the single hidden layer and returns the output similarity

    Args:
        Fd (np.array): M x D detection features
        Ft (np.array): N x D tracklet features
        iou (np.array): M x N box overlaps
        params (AgnnParams): weights
        adaptive (bool): use the sigmoid gate (False gives a plain GNN)

    Returns:
        (S_out, cache) where S_out is M x N with entries in [0, 1]
    """
    Fd = np.asarray(Fd, dtype=np.float64)
    Ft = np.asarray(Ft, dtype=np.float64)
    iou = np.asarray(iou, dtype=np.float64)
    _check_features(Fd, Ft)
    if Fd.shape[1] != params.dim:
        raise ShapeMismatch('features have %d dims, parameters %d'
                            % (Fd.shape[1], params.dim))
    if iou.shape != (Fd.shape[0], Ft.shape[0]):
        raise ShapeMismatch('IOU %s does not match %d x %d'
                            % (iou.shape, Fd.shape[0], Ft.shape[0]))

    diff, dist, inv, inv_norm, S_ft = _initial_similarity_parts(Fd, Ft)
    w = params.w
    E = prior_edges(S_ft, iou, w)
    Ft_ag = E @ Ft
    Fd_ag = E.T @ Fd
    gate_d, agg_d, Zd = _update(Fd, Ft_ag, params, adaptive)
    gate_t, agg_t, Zt = _update(Ft, Fd_ag, params, adaptive)
    Hd = np.maximum(Zd, 0.)
    Ht = np.maximum(Zt, 0.)
    norm_d = np.sqrt(np.sum(Hd * Hd, axis=1, keepdims=True))
    norm_t = np.sqrt(np.sum(Ht * Ht, axis=1, keepdims=True))
    Hd_hat = Hd / (norm_d + NORM_EPS)
    Ht_hat = Ht / (norm_t + NORM_EPS)
    S_out = Hd_hat @ Ht_hat.T

    cache = AgnnCache(Fd, Ft, iou, params, adaptive, diff, dist, inv,
                      inv_norm, S_ft, w, E, Ft_ag, Fd_ag, gate_d, gate_t,
                      agg_d, agg_t, Zd, Zt, Hd, Ht, norm_d, norm_t,
                      Hd_hat, Ht_hat)
    return S_out, cache


def _normalize_backward(H, norm, grad_hat):
    scale = norm + NORM_EPS
    safe = np.where(norm > 0, norm, 1.)
    proj = np.sum(grad_hat * H, axis=1, keepdims=True)
    return grad_hat / scale - H * proj / (safe * scale * scale)


def _update_backward(F, F_ag, gate, agg, grad_Z, params, adaptive, grads):
    grads['W1'] += F.T @ grad_Z
    grad_F = grad_Z @ params.W1.T
    grad_agg = grad_Z * gate
    grads['W2'] += F_ag.T @ grad_agg
    grad_F_ag = grad_agg @ params.W2.T
    if adaptive:
        grad_pre = grad_Z * agg * gate * (1. - gate)
        grads['Wa'] += F.T @ grad_pre
        grad_F += grad_pre @ params.Wa.T
    return grad_F, grad_F_ag


def backward(cache, grad_S):
    """Reverse-mode gradients of a forward pass

    Args:
        cache (AgnnCache): from the matching forward call
        grad_S (np.array): M x N upstream gradient dL/dS_out

    Returns:
        A dict of gradients keyed 'W1', 'W2', 'Wa', 'w_raw', 'Fd', 'Ft'
    """
    grad_S = np.asarray(grad_S, dtype=np.float64)
    if grad_S.shape != cache.shape:
        raise StaleCache('gradient %s does not match cached forward %s'
                         % (grad_S.shape, cache.shape))
    c = cache
    p = c.params
    d = p.dim
    grads = {'W1': np.zeros((d, d)), 'W2': np.zeros((d, d)),
             'Wa': np.zeros((d, d))}

    # S_out = Hd_hat Ht_hat^T
    grad_Hd = _normalize_backward(c.Hd, c.norm_d, grad_S @ c.Ht_hat)
    grad_Ht = _normalize_backward(c.Ht, c.norm_t, grad_S.T @ c.Hd_hat)
    grad_Zd = grad_Hd * (c.Zd > 0)
    grad_Zt = grad_Ht * (c.Zt > 0)

    grad_Fd, grad_Ft_ag = _update_backward(c.Fd, c.Ft_ag, c.gate_d, c.agg_d,
                                           grad_Zd, p, c.adaptive, grads)
    grad_Ft, grad_Fd_ag = _update_backward(c.Ft, c.Fd_ag, c.gate_t, c.agg_t,
                                           grad_Zt, p, c.adaptive, grads)

    # Ft_ag = E Ft, Fd_ag = E^T Fd
    grad_E = grad_Ft_ag @ c.Ft.T + c.Fd @ grad_Fd_ag.T
    grad_Ft += c.E.T @ grad_Ft_ag
    grad_Fd += c.E @ grad_Fd_ag

    # E = w IOU + (1 - w) S_ft, w = logistic(w_raw)
    grad_w = np.sum(grad_E * (c.iou - c.S_ft))
    grads['w_raw'] = float(grad_w * c.w * (1. - c.w))
    grad_S_ft = grad_E * (1. - c.w)

    # S_ft = inv / ||inv||_row, inv = 1 / (dist + eps)
    row_dot = np.sum(grad_S_ft * c.inv, axis=1, keepdims=True)
    grad_inv = grad_S_ft / c.inv_norm - c.inv * row_dot / c.inv_norm ** 3
    grad_dist = -grad_inv / (c.dist + DIST_EPS) ** 2
    safe = np.where(c.dist > 0, c.dist, 1.)
    unit = c.diff / safe[:, :, None]
    grad_Fd += np.einsum('ij,ijd->id', grad_dist, unit)
    grad_Ft -= np.einsum('ij,ijd->jd', grad_dist, unit)

    grads['Fd'] = grad_Fd
    grads['Ft'] = grad_Ft
    return grads
