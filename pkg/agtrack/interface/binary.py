"""Binary file formats: PGM frames, FTEN feature maps, model checkpoints

All multi-byte numbers are little-endian.

FTEN: b"FTEN", u32 rank, u32 dims[rank] (C, H, W), f64 stride, f32 data.

Checkpoint: b"AGNN", u32 D, W1, W2, Wa (D x D f64 each), f64 w_raw, then a
u64 byte length followed by the embedding block: u32 pool, u32 channels,
u32 D, projection ((C*P*P) x D f64), bias (D f64).
"""

import logging
import struct

import numpy as np

from ..agnn import AgnnParams
from ..errors import FormatError
from ..flow import GrayFrame
from ..model import TrackModel
from ..roifeat import EmbedParams, FeatureMap
from .mot_files import atomic_write

__all__ = ['read_pgm', 'write_pgm', 'read_ften', 'write_ften',
           'read_checkpoint', 'write_checkpoint', 'checkpoint_bytes',
           'model_from_bytes']

logger = logging.getLogger(__name__)

FTEN_MAGIC = b'FTEN'
CKPT_MAGIC = b'AGNN'


class _Reader(object):
    """Sequential unpacking with truncation checks"""

    def __init__(self, buf, what):
        self._buf = buf
        self._pos = 0
        self._what = what

    def take(self, n):
        if self._pos + n > len(self._buf):
            raise FormatError('%s is truncated at byte %d'
                              % (self._what, self._pos))
        out = self._buf[self._pos:self._pos + n]
        self._pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, dtype, count):
        dtype = np.dtype(dtype)
        return np.frombuffer(self.take(dtype.itemsize * count), dtype=dtype)

    def done(self):
        if self._pos != len(self._buf):
            raise FormatError('%s has %d trailing bytes'
                              % (self._what, len(self._buf) - self._pos))


def _pgm_tokens(buf, count):
    """Reads count whitespace-separated header tokens, skipping comments"""
    tokens = []
    pos = 0
    while len(tokens) < count:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(buf):
            raise FormatError('PGM header is truncated')
        if buf[pos:pos + 1] == b'#':
            while pos < len(buf) and buf[pos:pos + 1] != b'\n':
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace():
            pos += 1
        tokens.append(buf[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def read_pgm(path):
    """Reads an 8-bit binary (P5) PGM as intensities in [0, 1]

    Returns:
        GrayFrame
    """
    with open(path, 'rb') as f:
        buf = f.read()
    if buf[:2] != b'P5':
        raise FormatError('%s is not a binary PGM (magic %r)'
                          % (path, buf[:2]))
    tokens, start = _pgm_tokens(buf[2:], 3)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise FormatError('bad PGM header in %s' % path)
    if not 0 < maxval < 256:
        raise FormatError('only 8-bit PGM is supported, maxval %d' % maxval)
    raster = buf[2 + start:]
    if len(raster) < width * height:
        raise FormatError('%s holds %d of %d pixels'
                          % (path, len(raster), width * height))
    data = np.frombuffer(raster[:width * height], dtype=np.uint8)
    return GrayFrame(data.reshape(height, width) / 255.)


def write_pgm(frame, path):
    """Writes a GrayFrame as an 8-bit P5 PGM, rounding to the nearest level"""
    pixels = np.round(np.clip(frame.data, 0., 1.) * 255.).astype(np.uint8)
    header = b'P5\n%d %d\n255\n' % (frame.width, frame.height)
    atomic_write(path, header + pixels.tobytes())


def read_ften(path):
    """Reads a feature map tensor file

    A rank-2 tensor is read as a single-channel map.

    Returns:
        FeatureMap
    """
    with open(path, 'rb') as f:
        rd = _Reader(f.read(), path)
    if rd.take(4) != FTEN_MAGIC:
        raise FormatError('%s does not start with %r' % (path, FTEN_MAGIC))
    rank, = rd.unpack('<I')
    if rank not in (2, 3):
        raise FormatError('feature maps have rank 2 or 3, got %d' % rank)
    dims = rd.unpack('<%dI' % rank)
    stride, = rd.unpack('<d')
    data = rd.array('<f4', int(np.prod(dims))).reshape(dims)
    rd.done()
    if rank == 2:
        data = data[None, :, :]
    return FeatureMap(data.astype(np.float64), stride)


def write_ften(fmap, path):
    """Writes a FeatureMap; values are stored as f32"""
    dims = fmap.data.shape
    body = (FTEN_MAGIC + struct.pack('<I', len(dims)) +
            struct.pack('<%dI' % len(dims), *dims) +
            struct.pack('<d', fmap.stride) +
            np.ascontiguousarray(fmap.data, dtype='<f4').tobytes())
    atomic_write(path, body)


def _embed_block(embed):
    return (struct.pack('<3I', embed.pool, embed.channels, embed.dim) +
            np.ascontiguousarray(embed.projection, dtype='<f8').tobytes() +
            np.ascontiguousarray(embed.bias, dtype='<f8').tobytes())


def checkpoint_bytes(model):
    """Serializes a TrackModel to the checkpoint layout"""
    d = model.dim
    parts = [CKPT_MAGIC, struct.pack('<I', d)]
    for W in (model.agnn.W1, model.agnn.W2, model.agnn.Wa):
        parts.append(np.ascontiguousarray(W, dtype='<f8').tobytes())
    parts.append(struct.pack('<d', model.agnn.w_raw))
    block = _embed_block(model.embed)
    parts.append(struct.pack('<Q', len(block)))
    parts.append(block)
    return b''.join(parts)


def model_from_bytes(buf, what='checkpoint'):
    """Inverse of checkpoint_bytes"""
    rd = _Reader(buf, what)
    if rd.take(4) != CKPT_MAGIC:
        raise FormatError('%s does not start with %r' % (what, CKPT_MAGIC))
    d, = rd.unpack('<I')
    W1, W2, Wa = (rd.array('<f8', d * d).reshape(d, d) for _ in range(3))
    w_raw, = rd.unpack('<d')
    length, = rd.unpack('<Q')
    block = _Reader(rd.take(length), what + ' embedding block')
    rd.done()
    pool, channels, dim = block.unpack('<3I')
    if dim != d:
        raise FormatError('embedding dim %d differs from AGNN dim %d'
                          % (dim, d))
    projection = block.array('<f8', channels * pool * pool * dim)
    bias = block.array('<f8', dim)
    block.done()
    embed = EmbedParams(projection.reshape(channels * pool * pool, dim),
                        bias.copy(), pool)
    return TrackModel(embed, AgnnParams(W1.copy(), W2.copy(), Wa.copy(),
                                        w_raw))


def write_checkpoint(model, path):
    atomic_write(path, checkpoint_bytes(model))
    logger.info('wrote checkpoint %s', path)


def read_checkpoint(path):
    """Loads a TrackModel written by write_checkpoint"""
    with open(path, 'rb') as f:
        return model_from_bytes(f.read(), path)
