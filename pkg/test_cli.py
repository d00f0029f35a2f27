import os

import numpy as np
import pytest

from agtrack.cli import main
from agtrack.flow import GrayFrame
from agtrack.interface.binary import read_checkpoint, write_ften, write_pgm
from agtrack.interface.mot_files import MotRow, read_rows, write_rows
from agtrack.roifeat import FeatureMap
from conftest import shifted_pair, smooth_texture


def _config(tmp_path, text):
    path = tmp_path / 'run.cfg'
    path.write_text(text)
    return str(path)


def _gt_file(tmp_path):
    rows = [MotRow(f, i, 10. * i + f, 5., 20., 30.)
            for f in range(1, 6) for i in (1, 2)]
    path = str(tmp_path / 'gt.txt')
    write_rows(rows, path)
    return path


def test_eval_identical_files(tmp_path, capsys):
    gt = _gt_file(tmp_path)
    assert main(['eval', '--gt', gt, '--result', gt]) == 0
    out = capsys.readouterr().out.strip()
    assert out.startswith('1.000000,1.000000,')
    assert out.endswith(',0,0,0')


def test_eval_header(tmp_path, capsys):
    gt = _gt_file(tmp_path)
    main(['eval', '--gt', gt, '--result', gt, '--header'])
    assert capsys.readouterr().out.splitlines()[0] == \
        'MOTA,IDF1,MT,ML,FP,FN,IDSW'


def test_usage_errors_exit_two(capsys):
    assert main([]) == 2
    assert main(['track', '--dets', 'x']) == 2
    assert main(['frobnicate']) == 2


def test_runtime_errors_exit_one(tmp_path, capsys):
    missing = str(tmp_path / 'nope.txt')
    assert main(['eval', '--gt', missing, '--result', missing]) == 1
    assert 'agtrack: error' in capsys.readouterr().err
    bad = tmp_path / 'bad.txt'
    bad.write_text('1,1,0,0,0,5,1\n')
    assert main(['eval', '--gt', str(bad), '--result', str(bad)]) == 1


def test_track_empty_detections(tmp_path):
    frames = tmp_path / 'img1'
    frames.mkdir()
    frame = GrayFrame(smooth_texture(0, 96, 3.))
    for f in (1, 2):
        write_pgm(frame, str(frames / ('%06d.pgm' % f)))
    dets = tmp_path / 'det.txt'
    dets.write_text('')
    out = str(tmp_path / 'res.txt')
    cfg = _config(tmp_path, 'feature_dim = 8\n')
    assert main(['track', '--dets', str(dets), '--frames', str(frames),
                 '--out', out, '--config', cfg]) == 0
    assert os.path.getsize(out) == 0


def test_track_detections_beyond_frames(tmp_path):
    frames = tmp_path / 'img1'
    frames.mkdir()
    write_pgm(GrayFrame(np.zeros((32, 32))), str(frames / '000001.pgm'))
    dets = tmp_path / 'det.txt'
    dets.write_text('3,-1,1,1,5,5,0.9\n')
    assert main(['track', '--dets', str(dets), '--frames', str(frames),
                 '--out', str(tmp_path / 'r.txt')]) == 1


def test_flow_prints_displacements(tmp_path, capsys):
    prev, curr = shifted_pair(smooth_texture(1), 5, 3)
    a, b = str(tmp_path / 'a.pgm'), str(tmp_path / 'b.pgm')
    write_pgm(prev, a)
    write_pgm(curr, b)
    assert main(['flow', '--prev', a, '--curr', b, '--points', '128,128',
                 '100,140']) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2
    dx, dy = (float(v) for v in lines[0].split(','))
    assert dx == pytest.approx(5., abs=0.5)
    assert dy == pytest.approx(3., abs=0.5)


def test_synth_track_eval_pipeline(tmp_path, capsys):
    cfg = _config(tmp_path, 'feature_dim = 32\ndrop_rate = 0\n')
    seq = str(tmp_path / 'seq')
    assert main(['synth', '--out-dir', seq, '--seed', '4', '--config',
                 cfg]) == 0
    assert len(os.listdir(os.path.join(seq, 'img1'))) == 30
    res = str(tmp_path / 'res.txt')
    assert main(['track', '--dets', os.path.join(seq, 'det', 'det.txt'),
                 '--frames', os.path.join(seq, 'img1'), '--map-dir',
                 os.path.join(seq, 'maps'), '--config', cfg,
                 '--out', res]) == 0
    assert read_rows(res)
    capsys.readouterr()
    assert main(['eval', '--gt', os.path.join(seq, 'gt', 'gt.txt'),
                 '--result', res]) == 0
    mota = float(capsys.readouterr().out.split(',')[0])
    assert mota >= 0.95


def test_track_resize_keeps_original_coordinates(tmp_path):
    frames = tmp_path / 'img1'
    frames.mkdir()
    frame = GrayFrame(smooth_texture(2, 128, 3.))
    for f in (1, 2):
        write_pgm(frame, str(frames / ('%06d.pgm' % f)))
    dets = tmp_path / 'det.txt'
    dets.write_text('1,-1,20,30,40,24,0.9\n2,-1,20,30,40,24,0.9\n')
    out = str(tmp_path / 'res.txt')
    cfg = _config(tmp_path, 'feature_dim = 8\n')
    assert main(['track', '--dets', str(dets), '--frames', str(frames),
                 '--out', out, '--config', cfg, '--resize', '64x64']) == 0
    rows = read_rows(out)
    assert [r.id for r in rows] == [1, 1]
    assert rows[0].left == pytest.approx(20.)
    assert rows[0].width == pytest.approx(40.)


def test_train_writes_checkpoint_and_log(tmp_path):
    cfg = _config(tmp_path, 'feature_dim = 8\npool = 3\nlr_max = 0.001\n'
                            'lr_min = 0.0001\ntotal_epochs = 2\n'
                            'period_epochs = 1\n')
    data = tmp_path / 'data'
    scenario = tmp_path / 's.json'
    scenario.write_text('{"width": 96, "height": 80, "frames": 4, "objects": ['
                    '{"box": [10, 10, 16, 16], "velocity": [2, 0]},'
                    '{"box": [50, 40, 20, 20], "velocity": [0, 1]}]}')
    for name, seed in (('s1', 1), ('s2', 2)):
        assert main(['synth', '--spec', str(scenario), '--out-dir',
                     str(data / name), '--seed', str(seed)]) == 0
    params = str(tmp_path / 'model.ckpt')
    log = str(tmp_path / 'train.csv')
    assert main(['train', '--data', str(data), '--config', cfg,
                 '--out-params', params, '--epochs', '2', '--log', log]) == 0
    model = read_checkpoint(params)
    assert model.dim == 8 and model.embed.pool == 3
    with open(log) as f:
        assert [line.split(',')[0] for line in f] == ['0', '1']


def test_track_failure_leaves_old_result(tmp_path, monkeypatch, capsys):
    frames = tmp_path / 'img1'
    frames.mkdir()
    write_pgm(GrayFrame(smooth_texture(0, 96, 3.)),
              str(frames / '000001.pgm'))
    dets = tmp_path / 'det.txt'
    dets.write_text('1,-1,20,30,40,24,0.9\n')
    out = tmp_path / 'res.txt'
    out.write_text('previous\n')

    def fail(src, dst):
        raise OSError('disk full')
    monkeypatch.setattr(os, 'replace', fail)
    cfg = _config(tmp_path, 'feature_dim = 8\n')
    assert main(['track', '--dets', str(dets), '--frames', str(frames),
                 '--out', str(out), '--config', cfg]) == 1
    assert out.read_text() == 'previous\n'
    assert not [n for n in os.listdir(tmp_path) if n.startswith('.tmp-')]


def test_track_uneven_resize_with_maps(tmp_path):
    frames, maps = tmp_path / 'img1', tmp_path / 'maps'
    frames.mkdir()
    maps.mkdir()
    tex = smooth_texture(3, 128, 3.)
    for f in (1, 2):
        write_pgm(GrayFrame(tex), str(frames / ('%06d.pgm' % f)))
        write_ften(FeatureMap(tex[None].astype(np.float32), 1.),
                   str(maps / ('%06d.ften' % f)))
    dets = tmp_path / 'det.txt'
    dets.write_text('1,-1,20,30,40,24,0.9\n2,-1,20,30,40,24,0.9\n')
    out = str(tmp_path / 'res.txt')
    cfg = _config(tmp_path, 'feature_dim = 8\n')
    assert main(['track', '--dets', str(dets), '--frames', str(frames),
                 '--map-dir', str(maps), '--out', out, '--config', cfg,
                 '--resize', '64x96']) == 0
    rows = read_rows(out)
    assert [r.id for r in rows] == [1, 1]
    assert rows[1].top == pytest.approx(30.)
    assert rows[1].height == pytest.approx(24.)
