"""Margin-augmented Hungarian matching and new-identity assignment

The similarity matrix is widened with an M x M block filled with the margin.
A detection that the optimal assignment sends into that block matches no
tracklet well enough and becomes a new object.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, TooManyRows

__all__ = ['AssignmentResult', 'hungarian_max', 'augment', 'match',
           'DEFAULT_MARGIN']

logger = logging.getLogger(__name__)

DEFAULT_MARGIN = 0.2


def _kuhn_munkres_min(cost):
    """Shortest-augmenting-path Hungarian algorithm on an n x m cost, n <= m

    Rows are inserted one at a time; column potentials keep reduced costs
    non-negative. Ties pick the lowest column index.

    Returns:
        col_of_row (np.array): the column assigned to each row
    """
    n, m = cost.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    row_of_col = np.zeros(m + 1, dtype=int)    # 1-based, 0 = free
    way = np.zeros(m + 1, dtype=int)
    for i in range(1, n + 1):
        row_of_col[0] = i
        j0 = 0
        min_to = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = row_of_col[j0]
            free = ~used[1:]
            reduced = cost[i0 - 1] - u[i0] - v[1:]
            better = free & (reduced < min_to[1:])
            min_to[1:][better] = reduced[better]
            way[1:][better] = j0
            candidates = np.where(free, min_to[1:], np.inf)
            j1 = int(np.argmin(candidates)) + 1
            delta = candidates[j1 - 1]
            u[row_of_col[used]] += delta
            v[used] -= delta
            min_to[1:][free] -= delta
            j0 = j1
            if row_of_col[j0] == 0:
                break
        # Flip the augmenting path
        while j0:
            j1 = way[j0]
            row_of_col[j0] = row_of_col[j1]
            j0 = j1
    col_of_row = np.zeros(n, dtype=int)
    for j in range(1, m + 1):
        if row_of_col[j]:
            col_of_row[row_of_col[j] - 1] = j - 1
    return col_of_row


def hungarian_max(cost):
    """Assigns every row to a distinct column maximizing the total

    Args:
        cost (np.array): M x K similarities with M <= K

    Returns:
        A list of (row, col) pairs, one per row, in row order

    Raises:
        TooManyRows: if M > K
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError('cost must be 2-D, got %s' % (cost.shape,))
    m, k = cost.shape
    if m > k:
        raise TooManyRows('%d rows cannot be assigned to %d columns'
                          % (m, k))
    if m == 0:
        return []
    if not np.all(np.isfinite(cost)):
        raise ValueError('cost contains non-finite entries')
    cols = _kuhn_munkres_min(cost.max() - cost)
    return [(i, int(j)) for i, j in enumerate(cols)]


def augment(S_out, margin):
    """Returns [S_out | margin * ones(M, M)]"""
    S_out = np.asarray(S_out, dtype=np.float64)
    m = S_out.shape[0]
    return np.hstack([S_out, np.full((m, m), float(margin))])


@dataclass(frozen=True)
class AssignmentResult:
    """Outcome of one association step

    Attributes:
        det_track (tuple): per detection, the matched tracklet index or -1
        det_ids (tuple): per detection, the id it carries from now on
        track_matched (tuple): per tracklet, whether a detection took it
    """
    det_track: tuple
    det_ids: tuple
    track_matched: tuple

    def is_new(self, i):
        return self.det_track[i] < 0

    @property
    def new_detections(self):
        return [i for i, j in enumerate(self.det_track) if j < 0]

    @property
    def unmatched_tracklets(self):
        return [j for j, hit in enumerate(self.track_matched) if not hit]


def match(S_out, margin, next_id, tracklet_ids):
    """Matches detections to tracklets or declares them new

    Args:
        S_out (np.array): M x N similarity of detections to tracklets
        margin (float): similarity a match has to beat, in (0, 1)
        next_id (int): the id the first new object receives (max id + 1)
        tracklet_ids (list): ids of the N tracklets (columns)

    Returns:
        AssignmentResult; new objects get next_id, next_id + 1, ... in
        detection order
    """
    if not 0. < margin < 1.:
        raise ValueError('margin %r outside (0, 1)' % margin)
    S_out = np.asarray(S_out, dtype=np.float64)
    if S_out.ndim != 2:
        S_out = S_out.reshape(-1, len(tracklet_ids))
    m, n = S_out.shape
    if n != len(tracklet_ids):
        raise ShapeMismatch('%d similarity columns for %d tracklets'
                            % (n, len(tracklet_ids)))
    pairs = hungarian_max(augment(S_out, margin))
    det_track = [-1] * m
    det_ids = [None] * m
    track_matched = [False] * n
    new_id = next_id
    for i, j in pairs:
        if j < n:
            det_track[i] = j
            det_ids[i] = tracklet_ids[j]
            track_matched[j] = True
        else:
            det_ids[i] = new_id
            new_id += 1
    logger.debug('matched %d of %d detections, %d new',
                 m - (new_id - next_id), m, new_id - next_id)
    return AssignmentResult(tuple(det_track), tuple(det_ids),
                            tuple(track_matched))
