"""Reading and writing MOT Challenge text files

Every line is "frame,id,left,top,width,height,conf,x,y,z". Detection files
carry id -1; ground-truth files use conf as the "consider" flag, x as the
class and y as the visibility of the box.
"""

import logging
import math
import os
import tempfile
from dataclasses import dataclass

from ..core import BBox, Detection
from ..errors import InvalidBox, NonPositiveBox, ParseError

__all__ = ['MotRow', 'read_rows', 'parse_det', 'rows_by_frame',
           'write_rows', 'write_result', 'format_row', 'atomic_write']

logger = logging.getLogger(__name__)

_N_REQUIRED = 7


@dataclass(frozen=True)
class MotRow:
    """One line of a MOT Challenge file"""
    frame: int
    id: int
    left: float
    top: float
    width: float
    height: float
    conf: float = 1.
    x: float = -1.
    y: float = -1.
    z: float = -1.

    @property
    def bbox(self):
        return BBox(self.left, self.top, self.width, self.height)

    @property
    def visibility(self):
        """Ground-truth visibility (the y column)"""
        return self.y

    def to_detection(self):
        return Detection(self.bbox, self.conf, self.frame)


def _parse_line(text, lineno):
    fields = [f.strip() for f in text.split(',')]
    if len(fields) < _N_REQUIRED:
        raise ParseError('expected at least %d fields, got %d'
                         % (_N_REQUIRED, len(fields)), lineno)
    try:
        frame = int(float(fields[0]))
        ident = int(float(fields[1]))
        vals = [float(f) for f in fields[2:7]]
        extra = [float(f) for f in fields[7:10]]
    except ValueError as e:
        raise ParseError(str(e), lineno)
    if frame < 1:
        raise ParseError('frame must be >= 1, got %d' % frame, lineno)
    if not all(math.isfinite(v) for v in vals):
        raise ParseError('non-finite box or confidence', lineno)
    if vals[2] <= 0 or vals[3] <= 0:
        raise NonPositiveBox('box %g x %g is not positive'
                             % (vals[2], vals[3]), lineno)
    extra += [-1.] * (3 - len(extra))
    return MotRow(frame, ident, *(vals + extra))


def _numbered_rows(path):
    with open(path) as f:
        for lineno, text in enumerate(f, 1):
            if text.strip():
                yield lineno, _parse_line(text, lineno)


def read_rows(path):
    """Parses every non-blank line of a MOT file

    Args:
        path (str): file to read

    Returns:
        A list of MotRow in file order

    Raises:
        ParseError: on a malformed line (with its 1-based number)
        NonPositiveBox: on a box with zero or negative size
    """
    rows = [r for _, r in _numbered_rows(path)]
    logger.debug('read %d rows from %s', len(rows), path)
    return rows


def rows_by_frame(rows):
    """Groups rows into a dict of frame -> rows, ordered by frame"""
    grouped = {}
    for r in rows:
        grouped.setdefault(r.frame, []).append(r)
    return dict(sorted(grouped.items()))


def parse_det(path):
    """Reads a detection file

    The id column is ignored.

    Returns:
        A dict of frame -> [Detection], ordered by frame

    Raises:
        ParseError: on a malformed line or a confidence outside [0, 1]
    """
    out = {}
    for lineno, r in _numbered_rows(path):
        try:
            det = r.to_detection()
        except InvalidBox as e:
            raise ParseError(str(e), lineno)
        out.setdefault(r.frame, []).append(det)
    return dict(sorted(out.items()))


def _num(v):
    v = float(v)
    if v.is_integer():
        return str(int(v))
    return repr(v)


def format_row(r):
    """Renders a row; conf keeps 6 significant digits"""
    return ','.join([str(r.frame), str(r.id), _num(r.left), _num(r.top),
                     _num(r.width), _num(r.height), '%.6g' % r.conf,
                     _num(r.x), _num(r.y), _num(r.z)])


def atomic_write(path, data):
    """Writes str or bytes to a temporary file then renames it onto path"""
    mode = 'wb' if isinstance(data, bytes) else 'w'
    dirname = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=dirname, prefix='.tmp-')
    try:
        with os.fdopen(fd, mode) as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def write_rows(rows, path):
    """Writes rows as they are, one line each, with a trailing newline"""
    atomic_write(path, ''.join(format_row(r) + '\n' for r in rows))
    logger.info('wrote %d rows to %s', len(rows), path)


def write_result(rows, path):
    """Writes tracker output: "frame,id,left,top,w,h,conf,-1,-1,-1" lines

    Args:
        rows ([MotRow]): rows sorted by (frame, id)
        path (str): destination, replaced atomically
    """
    write_rows([MotRow(r.frame, r.id, r.left, r.top, r.width, r.height,
                       r.conf) for r in rows], path)
