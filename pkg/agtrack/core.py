"""Domain types and box geometry shared by the rest of agtrack

Boxes follow the MOT Challenge convention (left, top, width, height) in
pixels; conversions to corner form happen internally.
"""

import enum
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import InvalidBox
from .helpers import boxes_to_array, pairwise_iou

__all__ = ['BBox', 'Detection', 'TrackState', 'Tracklet', 'iou', 'center',
           'iou_matrix', 'DEFAULT_FEATURE_DIM']

DEFAULT_FEATURE_DIM = 256


@dataclass(frozen=True)
class BBox:
    """An axis-aligned box in pixels"""
    left: float
    top: float
    width: float
    height: float

    def __post_init__(self):
        vals = (self.left, self.top, self.width, self.height)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidBox('non-finite box %r' % (vals,))
        if self.width <= 0 or self.height <= 0:
            raise InvalidBox('box must have positive size, got %r' % (vals,))

    @property
    def right(self):
        return self.left + self.width

    @property
    def bottom(self):
        return self.top + self.height

    def translated(self, dx, dy):
        """Returns the same-sized box moved by (dx, dy)"""
        return BBox(self.left + dx, self.top + dy, self.width, self.height)

    def scaled(self, sx, sy):
        """Returns the box with every coordinate scaled by (sx, sy)"""
        return BBox(self.left * sx, self.top * sy,
                    self.width * sx, self.height * sy)

    def as_array(self):
        return np.array([self.left, self.top, self.width, self.height])


@dataclass(frozen=True)
class Detection:
    """A detector output for one frame"""
    bbox: BBox
    confidence: float
    frame: int

    def __post_init__(self):
        if not 0. <= self.confidence <= 1.:
            raise InvalidBox('confidence %r outside [0, 1]' % self.confidence)


class TrackState(enum.Enum):
    ACTIVE = 'active'
    LOST = 'lost'
    DEAD = 'dead'


def iou(a, b):
    """Intersection over union of two boxes

    Args:
        a (BBox): first box
        b (BBox): second box

    Returns:
        A float in [0, 1]; symmetric in its arguments
    """
    if a == b:
        return 1.
    iw = min(a.right, b.right) - max(a.left, b.left)
    ih = min(a.bottom, b.bottom) - max(a.top, b.top)
    if iw <= 0 or ih <= 0:
        return 0.
    inter = iw * ih
    return inter / (a.width * a.height + b.width * b.height - inter)


def center(b):
    """Returns the (x, y) center of a box"""
    return (b.left + b.width / 2., b.top + b.height / 2.)


def iou_matrix(boxes_a, boxes_b):
    """IOU between two lists of boxes as an (len(a), len(b)) array"""
    if len(boxes_a) == 0 or len(boxes_b) == 0:
        return np.zeros((len(boxes_a), len(boxes_b)))
    return pairwise_iou(boxes_to_array(boxes_a), boxes_to_array(boxes_b))


class Tracklet(object):
    """One identity with its recent boxes, last feature, and lifecycle state"""

    def __init__(self, track_id, frame, bbox, feature, k=10):
        """Start a tracklet from its first detection

        Args:
            track_id (int): the identity, never reused within a sequence
            frame (int): frame index of the first sighting
            bbox (BBox): box of the first sighting
            feature (np.array): D-dimensional appearance feature
            k (int): number of frames of history (and of tolerated absence)
        """
        self._id = track_id
        self._k = k
        self._history = deque([(frame, bbox)], maxlen=k + 1)
        self._feature = np.asarray(feature, dtype=np.float64)
        self._last_seen = frame
        self._state = TrackState.ACTIVE
        self._lost = 0

    def _get_id(self):
        return self._id
    id = property(_get_id)
    """The identity of this tracklet"""

    def _get_history(self):
        return list(self._history)
    history = property(_get_history)
    """(frame, BBox) pairs of recent sightings, oldest first"""

    def _get_last_box(self):
        return self._history[-1][1]
    last_box = property(_get_last_box)
    """The box from the most recent sighting"""

    def _get_feature(self):
        return self._feature
    last_feature = property(_get_feature)
    """Appearance feature stored at the last sighting"""

    def _get_last_seen(self):
        return self._last_seen
    last_seen = property(_get_last_seen)
    """Frame index of the last sighting"""

    def _get_state(self):
        return self._state
    state = property(_get_state)
    """ACTIVE, LOST, or DEAD"""

    def _get_lost(self):
        return self._lost
    lost_frames = property(_get_lost)
    """Consecutive frames without a match (0 while ACTIVE)"""

    def _is_alive(self):
        return self._state is not TrackState.DEAD
    is_alive = property(_is_alive)
    """Whether this tracklet can still be matched"""

    def mark_matched(self, frame, bbox, feature):
        """Records a sighting and re-activates the tracklet

        Args:
            frame (int): the frame of the sighting (after every earlier one)
            bbox (BBox): the matched detection box
            feature (np.array): the matched detection's feature
        """
        assert self.is_alive, "dead tracklets never re-activate"
        assert frame > self._last_seen, "history frames must increase"
        self._history.append((frame, bbox))
        self._feature = np.asarray(feature, dtype=np.float64)
        self._last_seen = frame
        self._state = TrackState.ACTIVE
        self._lost = 0

    def mark_missed(self):
        """Ages the tracklet by one unmatched frame

        Returns:
            The new state; DEAD once more than k frames went unmatched
        """
        if not self.is_alive:
            return self._state
        self._lost += 1
        if self._lost > self._k:
            self._state = TrackState.DEAD
        else:
            self._state = TrackState.LOST
        return self._state
