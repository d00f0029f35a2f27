"""ROI Align pooling over feature maps and the linear embedding layer

Feature maps are inputs here (a file, or the gray frame itself as a single
channel); no convolutional backbone is run. Boxes are in image pixels and
are divided by the map stride to land on cells.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .core import DEFAULT_FEATURE_DIM
from .errors import EmptyMap, ShapeMismatch
from .helpers import uniform_fanin

__all__ = ['FeatureMap', 'EmbedParams', 'roi_align', 'pool_regions',
           'embed', 'embed_rows', 'embed_backward', 'extract_features',
           'resize_map', 'DEFAULT_POOL', 'SAMPLING_RATIO']

DEFAULT_POOL = 7
SAMPLING_RATIO = 2


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """A (channels, height, width) grid of features

    Attributes:
        data (np.array): C x H x W reals
        stride (float): image pixels per cell
    """
    data: np.ndarray = field(repr=False)
    stride: float = 1.

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise EmptyMap('feature map must be C x H x W with every size '
                           '>= 1, got %s' % (arr.shape,))
        if not np.all(np.isfinite(arr)):
            raise ValueError('feature map contains non-finite values')
        if not self.stride > 0:
            raise ValueError('stride must be positive')
        object.__setattr__(self, 'data', arr)

    @classmethod
    def from_frame(cls, frame):
        """Wraps a GrayFrame as a 1-channel, stride-1 map"""
        return cls(frame.data[None, :, :], 1.)

    @property
    def channels(self):
        return self.data.shape[0]

    @property
    def height(self):
        return self.data.shape[1]

    @property
    def width(self):
        return self.data.shape[2]


class EmbedParams(object):
    """Affine projection from pooled regions to D-dimensional features"""
    def __init__(self, projection, bias, pool=DEFAULT_POOL):
        """Initialize from the projection weights and biases

        Args:
            projection (np.array): (C*P*P) x D weights
            bias (np.array): D biases
            pool (int): ROI Align output grid P
        """
        self.projection = np.asarray(projection, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64)
        self._pool = int(pool)
        if self.projection.ndim != 2 or \
                self.bias.shape != (self.projection.shape[1],):
            raise ShapeMismatch('projection %s does not fit bias %s'
                                % (self.projection.shape, self.bias.shape))
        if self.projection.shape[0] % (self._pool * self._pool) != 0:
            raise ShapeMismatch('projection rows %d are not C*%d*%d'
                                % (self.projection.shape[0], self._pool,
                                   self._pool))

    @classmethod
    def init(cls, rng, channels=1, pool=DEFAULT_POOL,
             dim=DEFAULT_FEATURE_DIM):
        """Random initialization with uniform(+-1/sqrt(fan_in)) entries

        Args:
            rng (np.random.Generator): source of randomness
            channels (int): feature map channels C
            pool (int): ROI Align grid P
            dim (int): output dimension D
        """
        fan_in = channels * pool * pool
        return cls(uniform_fanin(rng, (fan_in, dim), fan_in),
                   uniform_fanin(rng, (dim,), fan_in), pool)

    def _get_pool(self):
        return self._pool
    pool = property(_get_pool)
    """ROI Align output grid P"""

    def _get_dim(self):
        return self.projection.shape[1]
    dim = property(_get_dim)

    def _get_in_dim(self):
        return self.projection.shape[0]
    in_dim = property(_get_in_dim)

    def _get_channels(self):
        return self.in_dim // (self._pool * self._pool)
    channels = property(_get_channels)


def resize_map(fmap, sx, sy):
    """Adapts a map to an image rescaled by sx along x and sy along y

    A uniform scale only changes the stride. Otherwise the cells are
    bilinearly resampled so that every image point still reads the feature
    it read before the resize.

    Returns:
        A FeatureMap
    """
    if not (sx > 0 and sy > 0):
        raise ValueError('scales must be positive')
    if sx == sy:
        return FeatureMap(fmap.data, fmap.stride * sx)
    height = max(1, int(round(fmap.height * sy)))
    width = max(1, int(round(fmap.width * sx)))
    grid_y, grid_x = np.meshgrid(np.arange(height) / sy,
                                 np.arange(width) / sx, indexing='ij')
    data = np.stack([ndimage.map_coordinates(ch, [grid_y, grid_x], order=1,
                                             mode='nearest')
                     for ch in fmap.data])
    return FeatureMap(data, fmap.stride)


def roi_align(fmap, b, pool=DEFAULT_POOL):
    """Average-pools a box into a P x P grid of bilinear samples

    Each bin averages 2 x 2 regularly spaced samples. Sample positions are
    clamped to the map so boxes hanging over (or lying outside) the border
    read the border values.

    Args:
        fmap (FeatureMap): the map to pool from
        b (BBox): the region in image pixels
        pool (int): output grid size P

    Returns:
        A C x P x P array
    """
    steps = (np.arange(pool * SAMPLING_RATIO) + 0.5) / SAMPLING_RATIO
    xs = b.left / fmap.stride + steps * (b.width / fmap.stride / pool)
    ys = b.top / fmap.stride + steps * (b.height / fmap.stride / pool)
    xs = np.clip(xs, 0., fmap.width - 1.)
    ys = np.clip(ys, 0., fmap.height - 1.)
    grid_y, grid_x = np.meshgrid(ys, xs, indexing='ij')
    out = np.empty((fmap.channels, pool, pool))
    for c in range(fmap.channels):
        samples = ndimage.map_coordinates(fmap.data[c], [grid_y, grid_x],
                                          order=1, mode='nearest')
        out[c] = samples.reshape(pool, SAMPLING_RATIO,
                                 pool, SAMPLING_RATIO).mean(axis=(1, 3))
    return out


def pool_regions(fmap, boxes, pool=DEFAULT_POOL):
    """Pools every box and flattens each region into a row

    Returns:
        An (len(boxes), C*P*P) array
    """
    if len(boxes) == 0:
        return np.zeros((0, fmap.channels * pool * pool))
    return np.stack([roi_align(fmap, b, pool).ravel() for b in boxes])


def embed(region, params):
    """Projects one pooled region to a feature vector (no nonlinearity)

    Args:
        region (np.array): C x P x P pooled values
        params (EmbedParams): the projection

    Returns:
        A D-dimensional feature vector
    """
    region = np.asarray(region, dtype=np.float64)
    if region.size != params.in_dim:
        raise ShapeMismatch('region of %d values does not fit projection '
                            'with %d inputs' % (region.size, params.in_dim))
    return region.ravel() @ params.projection + params.bias


def embed_rows(regions, params):
    """Embeds an (n, C*P*P) block of flattened regions at once"""
    regions = np.asarray(regions, dtype=np.float64)
    if regions.ndim != 2 or regions.shape[1] != params.in_dim:
        raise ShapeMismatch('regions %s do not fit projection with %d inputs'
                            % (regions.shape, params.in_dim))
    return regions @ params.projection + params.bias


def embed_backward(regions, grad_features):
    """Gradients of the embedding given dL/d(features)

    Args:
        regions (np.array): the (n, C*P*P) inputs of embed_rows
        grad_features (np.array): (n, D) upstream gradient

    Returns:
        A dict with 'projection' and 'bias' gradients
    """
    return {'projection': regions.T @ grad_features,
            'bias': grad_features.sum(axis=0)}


def extract_features(fmap, boxes, params):
    """Features for a list of boxes, one row each

    The same call serves detections and flow-predicted tracklet boxes so
    both sides of the association come from the same frame.

    Args:
        fmap (FeatureMap): current frame's map
        boxes ([BBox]): boxes in image pixels
        params (EmbedParams): embedding

    Returns:
        An (len(boxes), D) feature matrix
    """
    if params.channels != fmap.channels:
        raise ShapeMismatch('embedding expects %d channels, map has %d'
                            % (params.channels, fmap.channels))
    return embed_rows(pool_regions(fmap, boxes, params.pool), params)
