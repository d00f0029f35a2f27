"""Pyramidal Lucas-Kanade sparse optical flow

Predicts where the center of a tracklet's box has moved between the previous
and the current frame. Only the center is tracked; the box keeps its size.

Coordinates are (x, y) in pixels with x along columns; images are stored as
row-major (height, width) arrays with intensities in [0, 1].
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .core import center
from .errors import OutOfBounds, ShapeMismatch, TooSmall
from .helpers import point_in_box

__all__ = ['GrayFrame', 'FlowConfig', 'to_gray', 'build_pyramid',
           'track_point', 'predict_tracklet_bbox', 'MIN_LEVEL_SIZE']

logger = logging.getLogger(__name__)

MIN_LEVEL_SIZE = 16
MIN_WINDOW = 15
SINGULAR_RTOL = 1e-9
_BINOMIAL = np.array([1., 4., 6., 4., 1.]) / 16.


@dataclass(frozen=True, eq=False)
class GrayFrame:
    """A single-channel frame with intensities in [0, 1]"""
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ShapeMismatch('frame data must be 2-D, got %s' % (arr.shape,))
        if not np.all(np.isfinite(arr)):
            raise ValueError('frame contains non-finite intensities')
        object.__setattr__(self, 'data', arr)

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]


@dataclass(frozen=True)
class FlowConfig:
    """Pyramid LK settings

    Attributes:
        window (int): side of the square window at level 0 (halved per level)
        levels (int): number of pyramid levels (1 = plain LK)
        max_iters (int): iterations per level
        eps (float): step-norm convergence threshold in pixels
    """
    window: int = 120
    levels: int = 3
    max_iters: int = 10
    eps: float = 0.01

    def __post_init__(self):
        if self.window < 1 or self.levels < 1 or self.max_iters < 1:
            raise ValueError('window, levels and max_iters must be >= 1')
        if not self.eps > 0:
            raise ValueError('eps must be positive')

    def window_at(self, level):
        """Odd window side used at a pyramid level (never below 15)"""
        side = max(MIN_WINDOW, self.window >> level)
        if side % 2 == 0:
            side += 1
        return side


def to_gray(rgb):
    """Converts an (h, w, 3) color image to ITU-R 601 luma

    Args:
        rgb (np.array): color image, any real range

    Returns:
        An (h, w) array in the same range
    """
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ShapeMismatch('expected (h, w, 3) image, got %s' % (rgb.shape,))
    return rgb @ np.array([0.299, 0.587, 0.114])


def _level_sizes(height, width, levels):
    sizes = [(height, width)]
    for _ in range(levels - 1):
        h, w = sizes[-1]
        sizes.append(((h + 1) // 2, (w + 1) // 2))
    return sizes


def build_pyramid(frame, levels):
    """Builds a Gaussian image pyramid

    Each level is the previous one filtered with the 5-tap binomial kernel
    (mirrored borders) and decimated by two along each axis.

    Args:
        frame (GrayFrame): level 0
        levels (int): number of levels to return

    Returns:
        A list of GrayFrame, finest first

    Raises:
        TooSmall: if any level would be smaller than 16 px on a side
    """
    sizes = _level_sizes(frame.height, frame.width, levels)
    if min(min(s) for s in sizes) < MIN_LEVEL_SIZE:
        raise TooSmall('%d levels of a %dx%d frame go below %d px'
                       % (levels, frame.width, frame.height, MIN_LEVEL_SIZE))
    pyramid = [frame]
    for _ in range(levels - 1):
        smooth = ndimage.convolve1d(pyramid[-1].data, _BINOMIAL, axis=0,
                                    mode='mirror')
        smooth = ndimage.convolve1d(smooth, _BINOMIAL, axis=1, mode='mirror')
        pyramid.append(GrayFrame(smooth[::2, ::2]))
    return pyramid


def _sample(img, xs, ys):
    return ndimage.map_coordinates(img, [ys, xs], order=1, mode='nearest')


def track_point(prev, curr, p, cfg=None, prev_pyramid=None,
                curr_pyramid=None):
    """Tracks one point from prev to curr with pyramid LK

    Works coarse to fine: at each level the 2x2 normal equations built from
    the central-difference gradients of prev are solved repeatedly against
    bilinearly warped samples of curr, and the estimate is doubled on the
    way down. Levels with a singular structure tensor pass the estimate
    through unchanged.

    Args:
        prev (GrayFrame): frame the point comes from
        curr (GrayFrame): frame to find the point in
        p ((float, float)): the (x, y) point in prev
        cfg (FlowConfig): settings, defaults if None
        prev_pyramid (list): optional prebuilt pyramid of prev
        curr_pyramid (list): optional prebuilt pyramid of curr

    Returns:
        (dx, dy, converged); converged is False when every level was
        singular or the last step was still >= cfg.eps

    Raises:
        OutOfBounds: if the point falls outside the coarsest level
    """
    if cfg is None:
        cfg = FlowConfig()
    if (prev.height, prev.width) != (curr.height, curr.width):
        raise ShapeMismatch('prev and curr frames differ in size')
    if prev_pyramid is None:
        prev_pyramid = build_pyramid(prev, cfg.levels)
    if curr_pyramid is None:
        curr_pyramid = build_pyramid(curr, cfg.levels)

    top = cfg.levels - 1
    p = np.asarray(p, dtype=np.float64)
    coarse = prev_pyramid[top]
    if not point_in_box(np.zeros(2), np.array([coarse.width - 1.,
                                               coarse.height - 1.]),
                        p / 2 ** top):
        raise OutOfBounds('point (%g, %g) has no window at level %d'
                          % (p[0], p[1], top))

    guess = np.zeros(2)
    solved = False
    last_step = np.inf
    for level in range(top, -1, -1):
        img_prev = prev_pyramid[level].data
        img_curr = curr_pyramid[level].data
        half = cfg.window_at(level) // 2
        offsets = np.arange(-half, half + 1, dtype=np.float64)
        px, py = p / 2 ** level
        ys, xs = np.meshgrid(py + offsets, px + offsets, indexing='ij')

        grad_y, grad_x = np.gradient(img_prev)
        template = _sample(img_prev, xs, ys)
        ix = _sample(grad_x, xs, ys)
        iy = _sample(grad_y, xs, ys)
        tensor = np.array([[np.sum(ix * ix), np.sum(ix * iy)],
                           [np.sum(ix * iy), np.sum(iy * iy)]])

        if np.linalg.eigvalsh(tensor)[0] < SINGULAR_RTOL * offsets.size ** 2:
            logger.debug('singular structure tensor at level %d', level)
        else:
            solved = True
            v = np.zeros(2)
            for _ in range(cfg.max_iters):
                warped = _sample(img_curr, xs + guess[0] + v[0],
                                 ys + guess[1] + v[1])
                diff = template - warped
                b = np.array([np.sum(diff * ix), np.sum(diff * iy)])
                step = np.linalg.solve(tensor, b)
                v += step
                last_step = np.hypot(step[0], step[1])
                if last_step < cfg.eps:
                    break
            guess = guess + v
        if level > 0:
            guess = 2. * guess

    converged = solved and last_step < cfg.eps
    return float(guess[0]), float(guess[1]), bool(converged)


def predict_tracklet_bbox(prev, curr, b, cfg=None, prev_pyramid=None,
                          curr_pyramid=None):
    """Moves a box by the flow of its center point

    Args:
        prev (GrayFrame): frame the box was seen in
        curr (GrayFrame): current frame
        b (BBox): the box in prev
        cfg (FlowConfig): settings, defaults if None

    Returns:
        (BBox, converged); the input box unchanged when flow did not converge

    Raises:
        OutOfBounds: if the box center has no tracking window
    """
    dx, dy, converged = track_point(prev, curr, center(b), cfg,
                                    prev_pyramid, curr_pyramid)
    if not converged:
        return b, False
    return b.translated(dx, dy), True
