"""Per-frame tracking: flow prediction, feature realignment, AGNN, matching

A Tracker owns one TrackletStore and folds frames into it one at a time.
Every live tracklet (active, or lost for at most k frames) is one column of
the association; detections are the rows.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import agnn
from .assoc import DEFAULT_MARGIN, match
from .core import DEFAULT_FEATURE_DIM, Tracklet, iou_matrix
from .errors import InputLengthMismatch, OutOfBounds, ShapeMismatch, \
    TooSmall
from .flow import FlowConfig, build_pyramid, predict_tracklet_bbox
from .interface.mot_files import MotRow
from .roifeat import FeatureMap, extract_features

__all__ = ['TrackerConfig', 'TrackletStore', 'Tracker', 'step',
           'run_sequence']

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrackerConfig:
    """Settings for one tracking run

    Attributes:
        k (int): frames a lost tracklet stays matchable
        margin (float): similarity a detection must beat to join a tracklet
        realign_features (bool): re-extract tracklet features from the
            current frame at their predicted boxes
        flow (FlowConfig): pyramid LK settings
        feature_dim (int): embedding size D
        use_flow (bool): predict tracklet boxes with LK (False keeps the
            last-known boxes)
        use_gnn (bool): run the AGNN (False matches on the prior edges)
        adaptive (bool): use the AGNN's adaptive gate
        min_conf (float): detections below this confidence are ignored
    """
    k: int = 10
    margin: float = DEFAULT_MARGIN
    realign_features: bool = True
    flow: FlowConfig = field(default_factory=FlowConfig)
    feature_dim: int = DEFAULT_FEATURE_DIM
    use_flow: bool = True
    use_gnn: bool = True
    adaptive: bool = True
    min_conf: float = 0.

    def __post_init__(self):
        if self.k < 1:
            raise ValueError('k must be >= 1, got %r' % self.k)
        if not 0. < self.margin < 1.:
            raise ValueError('margin %r outside (0, 1)' % self.margin)
        if self.feature_dim < 1:
            raise ValueError('feature_dim must be >= 1')


class TrackletStore(object):
    """Live tracklets keyed by id, plus the largest id ever handed out"""

    def __init__(self, k=10):
        self._k = k
        self._tracklets = {}
        self._max_id = 0
        self._frame = 0

    def _get_max_id(self):
        return self._max_id
    max_id = property(_get_max_id)
    """Largest id assigned so far (0 before the first object)"""

    def _get_next_id(self):
        return self._max_id + 1
    next_id = property(_get_next_id)
    """The id the next new object will receive"""

    def _get_tracklets(self):
        return [self._tracklets[i] for i in sorted(self._tracklets)]
    tracklets = property(_get_tracklets)
    """Live tracklets ordered by id"""

    def _get_frame(self):
        return self._frame
    frame = property(_get_frame)
    """Index of the last frame folded in (0 before the first)"""

    def __len__(self):
        return len(self._tracklets)

    def __contains__(self, track_id):
        return track_id in self._tracklets

    def get(self, track_id):
        return self._tracklets[track_id]

    def add(self, track_id, frame, bbox, feature):
        """Starts a tracklet under a fresh id

        Returns:
            The new Tracklet
        """
        assert track_id > self._max_id, "ids are never reused"
        t = Tracklet(track_id, frame, bbox, feature, self._k)
        self._tracklets[track_id] = t
        self._max_id = track_id
        return t

    def miss(self, track_id):
        """Ages a tracklet by one frame, dropping it once it is dead

        Returns:
            The tracklet's new state
        """
        t = self._tracklets[track_id]
        state = t.mark_missed()
        if not t.is_alive:
            del self._tracklets[track_id]
            logger.debug('tracklet %d dead after %d missed frames',
                         track_id, t.lost_frames)
        return state

    def advance(self, frame):
        assert frame > self._frame, "frames must increase"
        self._frame = frame


def _predicted_boxes(tracklets, prev_frame, curr_frame, frame, cfg):
    """Boxes of every tracklet in the current frame

    Tracklets seen in the previous frame are moved by the flow of their
    centers; all others keep their last-known box.
    """
    boxes = [t.last_box for t in tracklets]
    if prev_frame is None or not cfg.use_flow:
        return boxes
    recent = [j for j, t in enumerate(tracklets) if t.last_seen == frame - 1]
    if not recent:
        return boxes
    try:
        prev_pyr = build_pyramid(prev_frame, cfg.flow.levels)
        curr_pyr = build_pyramid(curr_frame, cfg.flow.levels)
    except TooSmall as e:
        logger.debug('no flow prediction: %s', e)
        return boxes
    for j in recent:
        try:
            boxes[j], converged = predict_tracklet_bbox(
                prev_frame, curr_frame, boxes[j], cfg.flow, prev_pyr,
                curr_pyr)
        except OutOfBounds:
            converged = False
        if not converged:
            logger.debug('flow did not converge for tracklet %d',
                         tracklets[j].id)
    return boxes


def _similarity(Fd, Ft, iou, model, cfg):
    if cfg.use_gnn:
        S_out, _ = agnn.forward(Fd, Ft, iou, model.agnn, cfg.adaptive)
        return S_out
    S_ft = agnn.initial_similarity(Fd, Ft)
    return agnn.prior_edges(S_ft, iou, model.agnn.w)


def step(prev_frame, curr_frame, curr_map, detections, store, model,
         cfg=None, frame=None):
    """Associates one frame's detections and updates the store

    Args:
        prev_frame (GrayFrame): previous frame, None on the first frame
        curr_frame (GrayFrame): current frame
        curr_map (FeatureMap): current frame's feature map
        detections ([Detection]): detections of the current frame
        store (TrackletStore): tracklets, updated in place
        model (TrackModel): embedding and AGNN parameters
        cfg (TrackerConfig): settings, defaults if None
        frame (int): current frame index (store.frame + 1 if None)

    Returns:
        A list of (Detection, id), one per kept detection in input order
    """
    if cfg is None:
        cfg = TrackerConfig()
    if frame is None:
        frame = store.frame + 1
    store.advance(frame)
    dets = [d for d in detections if d.confidence >= cfg.min_conf]
    tracklets = store.tracklets
    ids = [t.id for t in tracklets]

    if not dets:
        for track_id in ids:
            store.miss(track_id)
        return []

    det_boxes = [d.bbox for d in dets]
    Fd = extract_features(curr_map, det_boxes, model.embed)
    if tracklets:
        trk_boxes = _predicted_boxes(tracklets, prev_frame, curr_frame,
                                     frame, cfg)
        if cfg.realign_features:
            Ft = extract_features(curr_map, trk_boxes, model.embed)
        else:
            Ft = np.stack([t.last_feature for t in tracklets])
        S_out = _similarity(Fd, Ft, iou_matrix(det_boxes, trk_boxes), model,
                            cfg)
    else:
        S_out = np.zeros((len(dets), 0))

    result = match(S_out, cfg.margin, store.next_id, ids)
    out = []
    for i, d in enumerate(dets):
        j = result.det_track[i]
        if j >= 0:
            store.get(ids[j]).mark_matched(frame, d.bbox, Fd[i])
        else:
            store.add(result.det_ids[i], frame, d.bbox, Fd[i])
        out.append((d, result.det_ids[i]))
    for j in result.unmatched_tracklets:
        store.miss(ids[j])
    logger.debug('frame %d: %d detections, %d tracklets, %d new', frame,
                 len(dets), len(ids), len(result.new_detections))
    return out


class Tracker(object):
    """Folds a sequence of frames into a TrackletStore"""

    def __init__(self, model, cfg=None):
        """Initialize an empty tracker

        Args:
            model (TrackModel): embedding and AGNN parameters
            cfg (TrackerConfig): settings, defaults if None
        """
        if cfg is None:
            cfg = TrackerConfig()
        if model.dim != cfg.feature_dim:
            raise ShapeMismatch('model has %d-dim features, config asks '
                                'for %d' % (model.dim, cfg.feature_dim))
        self._model = model
        self._cfg = cfg
        self._store = TrackletStore(cfg.k)
        self._prev = None

    def _get_store(self):
        return self._store
    store = property(_get_store)
    """The tracklets being maintained"""

    def _get_cfg(self):
        return self._cfg
    config = property(_get_cfg)

    def update(self, curr_frame, curr_map, detections, frame=None):
        """Runs step() on the next frame and remembers it for flow

        Returns:
            A list of (Detection, id)
        """
        if curr_map is None:
            curr_map = FeatureMap.from_frame(curr_frame)
        out = step(self._prev, curr_frame, curr_map, detections,
                   self._store, self._model, self._cfg, frame)
        self._prev = curr_frame
        return out


def run_sequence(frames, maps, detections_per_frame, model, cfg=None):
    """Tracks a whole sequence

    Frames are numbered from 1 in the order given.

    Args:
        frames ([GrayFrame]): the frames
        maps ([FeatureMap]): one map per frame; None uses the frames
            themselves as 1-channel maps
        detections_per_frame ([[Detection]]): detections of each frame
        model (TrackModel): embedding and AGNN parameters
        cfg (TrackerConfig): settings, defaults if None

    Returns:
        MotRow list sorted by (frame, id)

    Raises:
        InputLengthMismatch: if the per-frame inputs differ in length
    """
    if maps is None:
        maps = [None] * len(frames)
    if not len(frames) == len(maps) == len(detections_per_frame):
        raise InputLengthMismatch(
            '%d frames, %d maps and %d detection lists'
            % (len(frames), len(maps), len(detections_per_frame)))
    tracker = Tracker(model, cfg)
    rows = []
    for idx, (fr, fmap, dets) in enumerate(
            zip(frames, maps, detections_per_frame)):
        frame = idx + 1
        for d, track_id in tracker.update(fr, fmap, dets, frame):
            b = d.bbox
            rows.append(MotRow(frame, track_id, b.left, b.top, b.width,
                               b.height, d.confidence))
    rows.sort(key=lambda r: (r.frame, r.id))
    logger.info('tracked %d frames, %d ids', len(frames),
                tracker.store.max_id)
    return rows
