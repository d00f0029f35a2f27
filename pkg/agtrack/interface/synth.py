"""Synthetic tracking scenarios: rendered frames, ground truth and detections

Objects are textured rectangles moving linearly over a faint, static,
smooth-noise background. They are drawn in index order, so later objects
cover earlier ones; the covered fraction sets the ground-truth visibility.
During an occlusion interval an object is not drawn at all and has no
detection.
"""

import json
import logging
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..errors import InputLengthMismatch, OutOfBounds, ScenarioInfeasible, \
    TooSmall
from ..flow import FlowConfig, GrayFrame, build_pyramid, predict_tracklet_bbox
from ..roifeat import DEFAULT_POOL, FeatureMap
from ..train import FramePairSample
from .binary import read_ften, read_pgm, write_ften, write_pgm
from .mot_files import (MotRow, parse_det, read_rows, rows_by_frame,
                        write_rows)

__all__ = ['SynthObject', 'SynthScenario', 'SynthSequence', 'load_scenario',
           'random_scenario', 'gen_scenario', 'write_scenario',
           'load_sequence_dir', 'training_pairs']

logger = logging.getLogger(__name__)

BACKGROUND_LEVEL = 0.15
BACKGROUND_CONTRAST = 0.04
BACKGROUND_SIGMA = 6.
TEXTURE_CONTRAST = 0.12
TEXTURE_SIGMA = 1.5


@dataclass(frozen=True)
class SynthObject:
    """One moving object

    Attributes:
        box (tuple): (left, top, width, height) on frame 1
        velocity (tuple): (vx, vy) in pixels per frame
        texture_seed (int): seed of the object's surface texture
        occlusions (tuple): inclusive (first, last) frame intervals during
            which the object is hidden
        intensity (float): mean brightness; None spreads objects evenly
    """
    box: tuple
    velocity: tuple = (0., 0.)
    texture_seed: int = 0
    occlusions: tuple = ()
    intensity: float = None

    def box_at(self, frame):
        """Pixel-aligned (left, top, width, height) on a 1-based frame"""
        left, top, w, h = self.box
        return (int(round(left + self.velocity[0] * (frame - 1))),
                int(round(top + self.velocity[1] * (frame - 1))),
                int(w), int(h))

    def hidden_at(self, frame):
        return any(a <= frame <= b for a, b in self.occlusions)


@dataclass(frozen=True)
class SynthScenario:
    """A scenario: image size, frame count, and the objects

    flicker scales each whole frame by a random gain in
    [1 - flicker, 1 + flicker], so an object's appearance changes from
    frame to frame.
    """
    width: int
    height: int
    frames: int
    objects: tuple = field(default=())
    flicker: float = 0.

    def __post_init__(self):
        if not 0. <= self.flicker < 1.:
            raise ScenarioInfeasible('flicker must lie in [0, 1)')
        if self.frames < 1:
            raise ScenarioInfeasible('a scenario needs at least one frame')
        for i, o in enumerate(self.objects):
            w, h = int(o.box[2]), int(o.box[3])
            if w < 1 or h < 1 or w > self.width - 2 or h > self.height - 2:
                raise ScenarioInfeasible(
                    'object %d (%d x %d) cannot fit a %d x %d image with a '
                    '1 px border' % (i, w, h, self.width, self.height))

    @classmethod
    def from_dict(cls, d):
        objects = tuple(
            SynthObject(tuple(o['box']), tuple(o.get('velocity', (0., 0.))),
                        int(o.get('texture_seed', i)),
                        tuple(tuple(iv) for iv in o.get('occlusions', ())),
                        o.get('intensity'))
            for i, o in enumerate(d.get('objects', [])))
        return cls(int(d['width']), int(d['height']), int(d['frames']),
                   objects, float(d.get('flicker', 0.)))

    def intensity_of(self, i):
        o = self.objects[i]
        if o.intensity is not None:
            return float(o.intensity)
        return 0.4 + 0.5 * (i + 1) / (len(self.objects) + 1)

    def inside(self, box):
        """Whether a box stays at least 1 px inside the image"""
        left, top, w, h = box
        return (left >= 1 and top >= 1 and left + w <= self.width - 1 and
                top + h <= self.height - 1)


def load_scenario(path):
    """Reads a scenario from its JSON description

    The file holds "width", "height", "frames" and a list of "objects",
    each with "box" and optionally "velocity", "texture_seed",
    "occlusions" and "intensity"; an optional "flicker" varies the
    brightness of whole frames.
    """
    with open(path) as f:
        try:
            d = json.load(f)
        except ValueError as e:
            raise ScenarioInfeasible('%s: %s' % (path, e))
    try:
        return SynthScenario.from_dict(d)
    except (KeyError, TypeError, IndexError) as e:
        raise ScenarioInfeasible('%s: missing or malformed field %s'
                                 % (path, e))


def random_scenario(rng, n_objects=4, frames=30, width=320, height=240,
                    speed=(1., 4.), size=(24, 48), occlude=True):
    """A scenario of linearly moving objects that stay inside the image

    Args:
        rng (np.random.Generator): source of randomness
        n_objects (int): number of objects
        frames (int): sequence length
        width, height (int): image size
        speed ((float, float)): range of speeds in pixels per frame
        size ((int, int)): range of box sides
        occlude (bool): hide one object for 3 frames mid-sequence

    Raises:
        ScenarioInfeasible: if an object cannot make its trip in the image
    """
    objects = []
    span = frames - 1
    for i in range(n_objects):
        w, h = (int(v) for v in rng.integers(size[0], size[1] + 1, size=2))
        s = rng.uniform(*speed)
        angle = rng.uniform(0., 2. * np.pi)
        vx, vy = s * np.cos(angle), s * np.sin(angle)
        start = []
        for v, side, extent in ((vx, w, width), (vy, h, height)):
            lo = 1 + max(0., -v * span)
            hi = extent - 1 - side - max(0., v * span)
            if hi < lo:
                raise ScenarioInfeasible(
                    'object %d cannot travel %.1f px/frame for %d frames in '
                    'a %d x %d image' % (i, s, frames, width, height))
            start.append(float(rng.uniform(lo, hi)))
        objects.append(SynthObject((start[0], start[1], w, h), (vx, vy),
                                   int(rng.integers(2 ** 31))))
    if occlude and objects and frames >= 9:
        first = frames // 2 - 1
        objects[0] = SynthObject(objects[0].box, objects[0].velocity,
                                 objects[0].texture_seed,
                                 ((first, first + 2),))
    return SynthScenario(width, height, frames, tuple(objects))


@dataclass(eq=False)
class SynthSequence:
    """A rendered scenario

    Attributes:
        frames ([GrayFrame]): one per frame
        maps ([FeatureMap]): the frames as 1-channel, stride-1 maps
        gt_rows ([MotRow]): ground truth; y is the visibility and conf 0
            marks hidden objects
        det_rows ([MotRow]): detections with id -1
        det_ids ([[int]]): true id of each detection, per frame
    """
    frames: list
    maps: list
    gt_rows: list
    det_rows: list
    det_ids: list

    @property
    def detections(self):
        """[[Detection]] per frame, aligned with frames"""
        out = [[] for _ in self.frames]
        for r in self.det_rows:
            out[r.frame - 1].append(r.to_detection())
        return out


def _texture(seed, w, h, level):
    tex = ndimage.gaussian_filter(
        np.random.default_rng(seed).standard_normal((h, w)), TEXTURE_SIGMA)
    tex /= tex.std() + 1e-12
    return np.clip(level + TEXTURE_CONTRAST * tex, 0., 1.)


def _background(rng, width, height):
    noise = ndimage.gaussian_filter(rng.standard_normal((height, width)),
                                    BACKGROUND_SIGMA)
    noise /= noise.std() + 1e-12
    return np.clip(BACKGROUND_LEVEL + BACKGROUND_CONTRAST * noise, 0., 1.)


def gen_scenario(s, seed, jitter=1., drop_rate=0.02):
    """Renders a scenario with its ground truth and noisy detections

    A pure function of (s, seed, jitter, drop_rate).

    Args:
        s (SynthScenario): what to render
        seed (int): seed for background, jitter and drops
        jitter (float): std of the Gaussian noise on detection boxes
        drop_rate (float): probability of dropping a visible detection

    Returns:
        SynthSequence
    """
    rng = np.random.default_rng(seed)
    background = _background(rng, s.width, s.height)
    gains = 1. + s.flicker * rng.uniform(-1., 1., size=s.frames)
    textures = [_texture(o.texture_seed, int(o.box[2]), int(o.box[3]),
                         s.intensity_of(i)) for i, o in enumerate(s.objects)]
    warned = set()
    frames, gt_rows, det_rows, det_ids = [], [], [], []
    for f in range(1, s.frames + 1):
        img = background.copy()
        boxes = [o.box_at(f) for o in s.objects]
        shown = []
        for i, o in enumerate(s.objects):
            if o.hidden_at(f):
                shown.append(False)
                continue
            if not s.inside(boxes[i]):
                if i not in warned:
                    warnings.warn('object %d leaves the image at frame %d; '
                                  'marked occluded' % (i, f))
                    warned.add(i)
                shown.append(False)
                continue
            left, top, w, h = boxes[i]
            img[top:top + h, left:left + w] = textures[i]
            shown.append(True)
        frames.append(GrayFrame(np.clip(img * gains[f - 1], 0., 1.)))

        ids = []
        for i, o in enumerate(s.objects):
            left, top, w, h = boxes[i]
            vis = _visibility(boxes, shown, i) if shown[i] else 0.
            gt_rows.append(MotRow(f, i + 1, left, top, w, h,
                                  1. if shown[i] else 0., 1., vis))
            # draws happen for every object so the streams stay aligned
            dropped = rng.random() < drop_rate
            noise = rng.normal(0., 1., size=4) * jitter
            conf = round(float(rng.uniform(0.5, 1.)), 4)
            if not shown[i] or vis <= 0. or dropped:
                continue
            det_rows.append(MotRow(f, -1, round(left + noise[0], 2),
                                   round(top + noise[1], 2),
                                   max(1., round(w + noise[2], 2)),
                                   max(1., round(h + noise[3], 2)), conf))
            ids.append(i + 1)
        det_ids.append(ids)
    maps = [FeatureMap.from_frame(fr) for fr in frames]
    logger.info('rendered %d frames of %d objects', s.frames,
                len(s.objects))
    return SynthSequence(frames, maps, gt_rows, det_rows, det_ids)


def _visibility(boxes, shown, i):
    """Fraction of box i not covered by later-drawn shown boxes"""
    left, top, w, h = boxes[i]
    mask = np.ones((h, w), dtype=bool)
    for j in range(i + 1, len(boxes)):
        if not shown[j]:
            continue
        l2, t2, w2, h2 = boxes[j]
        x0, x1 = max(left, l2) - left, min(left + w, l2 + w2) - left
        y0, y1 = max(top, t2) - top, min(top + h, t2 + h2) - top
        if x1 > x0 and y1 > y0:
            mask[y0:y1, x0:x1] = False
    return float(mask.mean())


def write_scenario(seq, out_dir):
    """Writes a sequence in the MOT Challenge directory layout

    out_dir/img1/000001.pgm ..., out_dir/maps/000001.ften ...,
    out_dir/gt/gt.txt and out_dir/det/det.txt
    """
    for sub in ('img1', 'maps', 'gt', 'det'):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)
    for f, (frame, fmap) in enumerate(zip(seq.frames, seq.maps), 1):
        write_pgm(frame, os.path.join(out_dir, 'img1', '%06d.pgm' % f))
        write_ften(fmap, os.path.join(out_dir, 'maps', '%06d.ften' % f))
    write_rows(seq.gt_rows, os.path.join(out_dir, 'gt', 'gt.txt'))
    write_rows(seq.det_rows, os.path.join(out_dir, 'det', 'det.txt'))


def _listdir(path, ext):
    if not os.path.isdir(path):
        return []
    return sorted(os.path.join(path, n) for n in os.listdir(path)
                  if n.endswith(ext))


def load_sequence_dir(seq_dir):
    """Reads a directory written by write_scenario (or laid out like one)

    Feature maps are optional; without a maps/ directory they are None.

    Returns:
        (frames, maps or None, detections per frame, gt rows or None)
    """
    frames = [read_pgm(p) for p in _listdir(os.path.join(seq_dir, 'img1'),
                                            '.pgm')]
    map_paths = _listdir(os.path.join(seq_dir, 'maps'), '.ften')
    maps = [read_ften(p) for p in map_paths] if map_paths else None
    if maps is not None and len(maps) != len(frames):
        raise InputLengthMismatch('%s: %d frames but %d maps'
                                  % (seq_dir, len(frames), len(maps)))
    det_path = os.path.join(seq_dir, 'det', 'det.txt')
    by_frame = parse_det(det_path) if os.path.exists(det_path) else {}
    detections = [by_frame.get(f, []) for f in range(1, len(frames) + 1)]
    gt_path = os.path.join(seq_dir, 'gt', 'gt.txt')
    gt_rows = read_rows(gt_path) if os.path.exists(gt_path) else None
    return frames, maps, detections, gt_rows


def training_pairs(frames, maps, gt_rows, k=10, pool=DEFAULT_POOL,
                   flow_cfg=None, use_flow=True):
    """Builds labelled frame pairs from ground truth

    On frame t the detections are the shown gt boxes of t; the tracklets
    are the ids still alive on t (missed at most k frames), at their latest box,
    moved by flow when that box is from t - 1. Both sides are pooled from
    the map of frame t. Pairs with no detection or no tracklet are skipped.

    Returns:
        [FramePairSample]
    """
    if maps is None:
        maps = [FeatureMap.from_frame(fr) for fr in frames]
    if len(maps) != len(frames):
        raise InputLengthMismatch('%d frames but %d maps'
                                  % (len(frames), len(maps)))
    if flow_cfg is None:
        flow_cfg = FlowConfig()
    shown = rows_by_frame(r for r in gt_rows if r.conf != 0)
    pyramids = {}

    def pyramid(t):
        if t not in pyramids:
            pyramids[t] = build_pyramid(frames[t - 1], flow_cfg.levels)
        return pyramids[t]

    pairs = []
    last = {}
    for t in range(1, len(frames) + 1):
        dets = shown.get(t, [])
        live = sorted((i, fr, b) for i, (fr, b) in last.items()
                      if t - fr <= k + 1)
        if dets and live:
            trk_boxes = []
            for track_id, seen, b in live:
                if use_flow and seen == t - 1:
                    try:
                        b, _ = predict_tracklet_bbox(
                            frames[t - 2], frames[t - 1], b, flow_cfg,
                            pyramid(t - 1), pyramid(t))
                    except (OutOfBounds, TooSmall):
                        pass
                trk_boxes.append(b)
            labels = np.array([[1. if r.id == track_id else 0.
                                for track_id, _, _ in live] for r in dets])
            pairs.append(FramePairSample.from_map(
                maps[t - 1], [r.bbox for r in dets], trk_boxes, labels,
                pool))
        for r in dets:
            last[r.id] = (t, r.bbox)
        pyramids.pop(t - 1, None)
    logger.info('built %d training pairs from %d frames', len(pairs),
                len(frames))
    return pairs
