"""Private functions that are useful throughout the agtrack package"""

import numpy as np
from scipy.special import expit


def point_in_box(min_verts, max_verts, point):
    return (np.all(point >= min_verts) and np.all(point <= max_verts))


def boxes_to_array(boxes):
    """Stacks boxes into an (n, 4) array of (left, top, width, height)"""
    if len(boxes) == 0:
        return np.zeros((0, 4))
    return np.array([[b.left, b.top, b.width, b.height] for b in boxes],
                    dtype=np.float64)


def to_corners(ltwh):
    """Converts (n, 4) left/top/width/height rows to (x1, y1, x2, y2)"""
    ltwh = np.asarray(ltwh, dtype=np.float64)
    out = ltwh.copy()
    out[..., 2] = ltwh[..., 0] + ltwh[..., 2]
    out[..., 3] = ltwh[..., 1] + ltwh[..., 3]
    return out


def pairwise_iou(ltwh_a, ltwh_b):
    """IOU between every row of ltwh_a and every row of ltwh_b

    Returns:
        An (len(a), len(b)) array of overlaps in [0, 1]
    """
    a = to_corners(ltwh_a)[:, None, :]
    b = to_corners(ltwh_b)[None, :, :]
    iw = np.maximum(0., np.minimum(a[..., 2], b[..., 2]) -
                    np.maximum(a[..., 0], b[..., 0]))
    ih = np.maximum(0., np.minimum(a[..., 3], b[..., 3]) -
                    np.maximum(a[..., 1], b[..., 1]))
    inter = iw * ih
    area_a = (a[..., 2] - a[..., 0]) * (a[..., 3] - a[..., 1])
    area_b = (b[..., 2] - b[..., 0]) * (b[..., 3] - b[..., 1])
    return inter / (area_a + area_b - inter)


def logistic(x):
    return expit(x)


def uniform_fanin(rng, shape, fan_in):
    """Draws weights from uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))"""
    bound = 1. / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)

