"""Command-line entry point: track, train, eval, synth and flow subcommands

Exit status is 0 on success, 1 when a run fails, and 2 on a usage error.
Diagnostics go to standard error; only results go to standard output.
"""

import argparse
import dataclasses
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy import ndimage

from .config import load_config
from .core import Detection
from .errors import AgtrackError, InputLengthMismatch
from .flow import GrayFrame, track_point
from .interface.binary import read_checkpoint, read_ften, read_pgm, \
    write_checkpoint
from .interface.mot_files import MotRow, parse_det, read_rows, write_result
from .interface.synth import (gen_scenario, load_scenario, load_sequence_dir,
                              random_scenario, training_pairs,
                              write_scenario)
from .model import TrackModel
from .moteval import CSV_HEADER, evaluate
from .roifeat import resize_map
from .tracker import run_sequence
from .train import fit

__all__ = ['main', 'build_arg_parser']

logger = logging.getLogger(__name__)


def _size(text):
    try:
        w, h = (int(v) for v in text.lower().split('x'))
    except ValueError:
        raise argparse.ArgumentTypeError('expected WxH, got %r' % text)
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError('size must be positive')
    return w, h


def _point(text):
    try:
        x, y = (float(v) for v in text.split(','))
    except ValueError:
        raise argparse.ArgumentTypeError('expected x,y, got %r' % text)
    return x, y


def build_arg_parser():
    p = argparse.ArgumentParser(
        prog='agtrack',
        description='Multi-object tracking with flow-realigned features and '
                    'an adaptive graph network.')
    p.add_argument('-v', '--verbose', action='count', default=0,
                   help='more logging (-v info, -vv debug)')
    sub = p.add_subparsers(dest='command', metavar='command')
    sub.required = True

    t = sub.add_parser('track', help='track one sequence')
    t.add_argument('--dets', required=True, help='detection file')
    t.add_argument('--frames', required=True, help='directory of PGM frames')
    t.add_argument('--map-dir', help='directory of FTEN feature maps '
                                     '(default: the frames themselves)')
    t.add_argument('--params', help='model checkpoint (default: a fresh '
                                    'model from the config seed)')
    t.add_argument('--config', help='config file')
    t.add_argument('--out', required=True, help='result file to write')
    t.add_argument('--resize', type=_size, metavar='WxH',
                   help='resize frames before tracking')

    tr = sub.add_parser('train', help='train a model on sequences with gt')
    tr.add_argument('--data', required=True,
                    help='a sequence directory or a directory of them')
    tr.add_argument('--config', help='config file')
    tr.add_argument('--out-params', required=True,
                    help='checkpoint file to write')
    tr.add_argument('--epochs', type=int, required=True)
    tr.add_argument('--init-params', help='checkpoint to start from')
    tr.add_argument('--log', help='CSV training log "epoch,lr,mean_loss"')
    tr.add_argument('--jobs', type=int, default=1,
                    help='sequences prepared in parallel')

    e = sub.add_parser('eval', help='score a result file against gt')
    e.add_argument('--gt', required=True, help='ground-truth file')
    e.add_argument('--result', required=True, help='result file')
    e.add_argument('--config', help='config file')
    e.add_argument('--header', action='store_true',
                   help='print the column names first')

    s = sub.add_parser('synth', help='render a synthetic sequence')
    s.add_argument('--spec', '--scenario', dest='scenario',
                   help='scenario JSON (default: a random 4-object '
                        'scenario from the seed)')
    s.add_argument('--out-dir', required=True)
    s.add_argument('--seed', type=int, default=0)
    s.add_argument('--config', help='config file (jitter, drop_rate)')

    f = sub.add_parser('flow', help='track points between two frames')
    f.add_argument('--prev', required=True, help='PGM frame')
    f.add_argument('--curr', required=True, help='PGM frame')
    f.add_argument('--points', type=_point, nargs='+', required=True,
                   metavar='x,y')
    f.add_argument('--config', help='config file')
    return p


def _list_files(path, ext):
    return sorted(os.path.join(path, n) for n in os.listdir(path)
                  if n.endswith(ext))


def _resize_frame(frame, size):
    w, h = size
    data = ndimage.zoom(frame.data, (h / frame.height, w / frame.width),
                        order=1)
    return GrayFrame(np.clip(data, 0., 1.))


def _cmd_track(args):
    cfg = load_config(args.config)
    frames = [read_pgm(p) for p in _list_files(args.frames, '.pgm')]
    maps = None
    if args.map_dir:
        maps = [read_ften(p) for p in _list_files(args.map_dir, '.ften')]
    by_frame = parse_det(args.dets)
    if by_frame and max(by_frame) > len(frames):
        raise InputLengthMismatch('detections reach frame %d but there are '
                                  '%d frames' % (max(by_frame), len(frames)))
    dets = [by_frame.get(f, []) for f in range(1, len(frames) + 1)]

    sx = sy = 1.
    if args.resize and frames:
        sx = args.resize[0] / frames[0].width
        sy = args.resize[1] / frames[0].height
        frames = [_resize_frame(fr, args.resize) for fr in frames]
        dets = [[Detection(d.bbox.scaled(sx, sy), d.confidence, d.frame)
                 for d in fd] for fd in dets]
        if maps is not None:
            maps = [resize_map(m, sx, sy) for m in maps]

    if args.params:
        model = read_checkpoint(args.params)
    else:
        channels = maps[0].channels if maps else 1
        model = TrackModel.init(cfg.seed, channels, cfg.pool,
                                cfg.feature_dim)
    tcfg = dataclasses.replace(cfg.tracker_config(), feature_dim=model.dim)
    rows = run_sequence(frames, maps, dets, model, tcfg)
    if (sx, sy) != (1., 1.):
        rows = [MotRow(r.frame, r.id, r.left / sx, r.top / sy,
                       r.width / sx, r.height / sy, r.conf) for r in rows]
    write_result(rows, args.out)
    return 0


def _sequence_dirs(data):
    if os.path.isdir(os.path.join(data, 'img1')):
        return [data]
    return sorted(os.path.join(data, n) for n in os.listdir(data)
                  if os.path.isdir(os.path.join(data, n, 'img1')))


def _sequence_pairs(seq_dir, cfg):
    frames, maps, _, gt_rows = load_sequence_dir(seq_dir)
    if gt_rows is None:
        logger.warning('%s has no gt/gt.txt; skipped', seq_dir)
        return []
    return training_pairs(frames, maps, gt_rows, cfg.k, cfg.pool,
                          cfg.flow_config(), cfg.use_flow)


def _cmd_train(args):
    cfg = load_config(args.config)
    seq_dirs = _sequence_dirs(args.data)
    if args.jobs > 1 and len(seq_dirs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            per_seq = list(pool.map(_sequence_pairs, seq_dirs,
                                    [cfg] * len(seq_dirs)))
    else:
        per_seq = [_sequence_pairs(d, cfg) for d in seq_dirs]
    pairs = [p for ps in per_seq for p in ps]
    logger.info('%d training pairs from %d sequences', len(pairs),
                len(seq_dirs))

    if args.init_params:
        model = read_checkpoint(args.init_params)
    else:
        channels = 1
        if pairs:
            channels = pairs[0].det_regions.shape[1] // (cfg.pool * cfg.pool)
        model = TrackModel.init(cfg.seed, channels, cfg.pool,
                                cfg.feature_dim)

    def checkpoint(m, epoch):
        write_checkpoint(m, args.out_params)

    log = open(args.log, 'w') if args.log else None
    try:
        model, _ = fit(pairs, model, args.epochs, cfg.schedule(),
                       cfg.loss_weights(), cfg.adaptive,
                       checkpoint_every=cfg.checkpoint_every,
                       checkpoint=checkpoint, log=log)
    finally:
        if log is not None:
            log.close()
    write_checkpoint(model, args.out_params)
    return 0


def _cmd_eval(args):
    cfg = load_config(args.config)
    summary = evaluate(read_rows(args.gt), read_rows(args.result),
                       cfg.iou_thresh, cfg.min_visibility)
    if args.header:
        print(CSV_HEADER)
    print(summary.csv_line())
    return 0


def _cmd_synth(args):
    cfg = load_config(args.config)
    if args.scenario:
        scenario = load_scenario(args.scenario)
    else:
        scenario = random_scenario(np.random.default_rng(args.seed))
    seq = gen_scenario(scenario, args.seed, cfg.jitter, cfg.drop_rate)
    write_scenario(seq, args.out_dir)
    return 0


def _cmd_flow(args):
    cfg = load_config(args.config)
    prev, curr = read_pgm(args.prev), read_pgm(args.curr)
    for x, y in args.points:
        dx, dy, converged = track_point(prev, curr, (x, y),
                                        cfg.flow_config())
        if not converged:
            logger.warning('flow at (%g, %g) did not converge', x, y)
        print('%.6f,%.6f' % (dx, dy))
    return 0


_COMMANDS = {'track': _cmd_track, 'train': _cmd_train, 'eval': _cmd_eval,
             'synth': _cmd_synth, 'flow': _cmd_flow}


def main(argv=None):
    parser = build_arg_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 0
    level = (logging.WARNING, logging.INFO,
             logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(stream=sys.stderr, level=level,
                        format='%(levelname)s %(name)s: %(message)s')
    try:
        return _COMMANDS[args.command](args)
    except (AgtrackError, OSError) as e:
        print('agtrack: error: %s' % e, file=sys.stderr)
        return 1
