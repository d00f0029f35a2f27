"""CLEAR-style and identity metrics over MOT rows

Predictions are matched to ground truth frame by frame with the Hungarian
algorithm on IOU; FP, FN and identity switches accumulate into MOTA.
IDF1 matches whole identities instead, once per sequence.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .assoc import hungarian_max
from .core import iou_matrix
from .errors import ZeroGroundTruth

__all__ = ['FrameMatch', 'MetricCounts', 'MetricsSummary', 'frame_match',
           'accumulate', 'mota', 'idf1', 'mt_ml', 'idsw_count', 'evaluate',
           'IOU_THRESH', 'MT_COVERAGE', 'ML_COVERAGE', 'CSV_HEADER']

logger = logging.getLogger(__name__)

IOU_THRESH = 0.5
MT_COVERAGE = 0.8
ML_COVERAGE = 0.2
CSV_HEADER = 'MOTA,IDF1,MT,ML,FP,FN,IDSW'


@dataclass(frozen=True)
class FrameMatch:
    """Correspondences of one frame

    Attributes:
        pairs (tuple): (gt index, pred index) pairs with IOU >= threshold
        fp (int): unmatched predictions
        fn (int): unmatched ground-truth boxes
    """
    pairs: tuple
    fp: int
    fn: int


@dataclass
class MetricCounts:
    """Per-frame error counts and per-trajectory coverage

    Attributes:
        fp (list): false positives per frame
        fn (list): misses per frame
        idsw (list): identity switches per frame
        gt (list): ground-truth boxes per frame
        coverage (dict): gt id -> fraction of its frames that were matched
    """
    fp: list = field(default_factory=list)
    fn: list = field(default_factory=list)
    idsw: list = field(default_factory=list)
    gt: list = field(default_factory=list)
    coverage: dict = field(default_factory=dict)

    @classmethod
    def totals(cls, gt, fp, fn, idsw):
        """Counts collapsed into a single frame"""
        return cls([fp], [fn], [idsw], [gt])

    @property
    def total_fp(self):
        return int(sum(self.fp))

    @property
    def total_fn(self):
        return int(sum(self.fn))

    @property
    def total_idsw(self):
        return int(sum(self.idsw))

    @property
    def total_gt(self):
        return int(sum(self.gt))


@dataclass(frozen=True)
class MetricsSummary:
    mota: float
    idf1: float
    mt: float
    ml: float
    fp: int
    fn: int
    idsw: int

    def csv_line(self):
        """Renders "MOTA,IDF1,MT,ML,FP,FN,IDSW" with 6 decimals on ratios"""
        return '%.6f,%.6f,%.6f,%.6f,%d,%d,%d' % (
            self.mota, self.idf1, self.mt, self.ml, self.fp, self.fn,
            self.idsw)


def _max_pairs(score):
    """Hungarian maximization on a matrix of any orientation"""
    m, n = score.shape
    if m == 0 or n == 0:
        return []
    if m <= n:
        return hungarian_max(score)
    return [(i, j) for j, i in hungarian_max(score.T)]


def frame_match(gt_boxes, pred_boxes, iou_thresh=IOU_THRESH):
    """Matches one frame's predictions to its ground truth

    Args:
        gt_boxes ([BBox]): ground-truth boxes
        pred_boxes ([BBox]): predicted boxes
        iou_thresh (float): minimum IOU of a correspondence

    Returns:
        FrameMatch
    """
    ious = iou_matrix(gt_boxes, pred_boxes)
    pairs = tuple(sorted((i, j) for i, j in _max_pairs(ious)
                         if ious[i, j] >= iou_thresh))
    return FrameMatch(pairs, len(pred_boxes) - len(pairs),
                      len(gt_boxes) - len(pairs))


def idsw_count(correspondences):
    """Counts identity switches

    Args:
        correspondences ([dict]): per frame, in frame order, gt id -> the
            pred id it was matched to (unmatched gt ids are absent)

    Returns:
        The number of times a gt id is matched to a pred id other than the
        last one it was matched to
    """
    last = {}
    return sum(_switches(frame, last) for frame in correspondences)


def _switches(corr, last):
    """Switches in one frame; updates last (gt id -> last pred id)"""
    n = 0
    for gid, pid in corr.items():
        if gid in last and last[gid] != pid:
            n += 1
        last[gid] = pid
    return n


def _by_frame(rows):
    out = {}
    for r in rows:
        out.setdefault(r.frame, []).append(r)
    return out


def accumulate(gt_rows, pred_rows, iou_thresh=IOU_THRESH):
    """Runs frame_match over a sequence

    Returns:
        (MetricCounts, per-frame correspondences gt id -> pred id)
    """
    gt = _by_frame(gt_rows)
    pred = _by_frame(pred_rows)
    counts = MetricCounts()
    correspondences = []
    seen = {}
    hits = {}
    last = {}
    for frame in sorted(set(gt) | set(pred)):
        g = gt.get(frame, [])
        p = pred.get(frame, [])
        fm = frame_match([r.bbox for r in g], [r.bbox for r in p],
                         iou_thresh)
        corr = {g[i].id: p[j].id for i, j in fm.pairs}
        switches = _switches(corr, last)
        for gid in corr:
            hits[gid] = hits.get(gid, 0) + 1
        for r in g:
            seen[r.id] = seen.get(r.id, 0) + 1
        counts.fp.append(fm.fp)
        counts.fn.append(fm.fn)
        counts.idsw.append(switches)
        counts.gt.append(len(g))
        correspondences.append(corr)
    counts.coverage = {gid: hits.get(gid, 0) / n for gid, n in seen.items()}
    return counts, correspondences


def mota(counts):
    """1 - (FP + FN + IDSW) / GT; may be negative

    Raises:
        ZeroGroundTruth: if there is no ground truth
    """
    if counts.total_gt <= 0:
        raise ZeroGroundTruth('MOTA needs at least one ground-truth box')
    errors = counts.total_fp + counts.total_fn + counts.total_idsw
    return 1. - errors / counts.total_gt


def idf1(gt_rows, pred_rows, iou_thresh=IOU_THRESH):
    """Identity F1 under the best one-to-one gt/pred id mapping

    Two ids overlap on a frame when both are present with IOU >= iou_thresh;
    the mapping maximizes the total overlap (IDTP).

    Raises:
        ZeroGroundTruth: if there is no ground truth
    """
    if not gt_rows:
        raise ZeroGroundTruth('IDF1 needs at least one ground-truth box')
    if not pred_rows:
        return 0.
    gt_ids = sorted({r.id for r in gt_rows})
    pred_ids = sorted({r.id for r in pred_rows})
    gidx = {g: i for i, g in enumerate(gt_ids)}
    pidx = {p: j for j, p in enumerate(pred_ids)}
    overlap = np.zeros((len(gt_ids), len(pred_ids)))
    pred = _by_frame(pred_rows)
    for frame, g in _by_frame(gt_rows).items():
        p = pred.get(frame, [])
        if not p:
            continue
        ious = iou_matrix([r.bbox for r in g], [r.bbox for r in p])
        for i, j in zip(*np.nonzero(ious >= iou_thresh)):
            overlap[gidx[g[i].id], pidx[p[j].id]] += 1
    idtp = sum(overlap[i, j] for i, j in _max_pairs(overlap))
    return 2. * idtp / (len(gt_rows) + len(pred_rows))


def mt_ml(coverages):
    """Shares of trajectories mostly tracked (>= 0.8) and mostly lost (<= 0.2)

    Returns:
        (MT, ML); (0, 0) when there are no trajectories
    """
    cov = np.asarray(list(coverages), dtype=np.float64)
    if cov.size == 0:
        return 0., 0.
    return (float(np.mean(cov >= MT_COVERAGE)),
            float(np.mean(cov <= ML_COVERAGE)))


def evaluate(gt_rows, pred_rows, iou_thresh=IOU_THRESH, min_visibility=0.):
    """Every metric of a sequence at once

    Ground-truth rows flagged as not considered (conf 0) are dropped, as are
    rows whose visibility is below min_visibility.

    Returns:
        MetricsSummary
    """
    gt_rows = [r for r in gt_rows if r.conf != 0]
    if min_visibility > 0:
        gt_rows = [r for r in gt_rows if r.visibility >= min_visibility]
    counts, _ = accumulate(gt_rows, pred_rows, iou_thresh)
    mt, ml = mt_ml(counts.coverage.values())
    summary = MetricsSummary(mota(counts), idf1(gt_rows, pred_rows,
                                                iou_thresh),
                             mt, ml, counts.total_fp, counts.total_fn,
                             counts.total_idsw)
    logger.info('MOTA %.4f IDF1 %.4f over %d frames', summary.mota,
                summary.idf1, len(counts.gt))
    return summary
