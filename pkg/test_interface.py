import json
import os
import struct

import numpy as np
import pytest

from agtrack.config import Config, load_config, parse_config
from agtrack.core import BBox
from agtrack.errors import ConfigError, FormatError, NonPositiveBox, \
    ParseError, ScenarioInfeasible
from agtrack.flow import GrayFrame
from agtrack.interface.binary import checkpoint_bytes, model_from_bytes, \
    read_checkpoint, read_ften, read_pgm, write_checkpoint, write_ften, \
    write_pgm
from agtrack.interface.mot_files import MotRow, parse_det, read_rows, \
    write_result, write_rows
from agtrack.interface.synth import SynthObject, SynthScenario, \
    gen_scenario, load_scenario, load_sequence_dir, random_scenario, \
    training_pairs, write_scenario
from agtrack.model import TrackModel
from agtrack.roifeat import FeatureMap


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


# MOT text files

def test_parse_det_line(tmp_path):
    path = _write(tmp_path, 'det.txt', '1,-1,10,20,30,40,0.9,-1,-1,-1\n')
    dets = parse_det(path)
    assert list(dets) == [1]
    d = dets[1][0]
    assert d.bbox == BBox(10., 20., 30., 40.)
    assert d.confidence == 0.9 and d.frame == 1


def test_parse_det_groups_by_frame(tmp_path):
    path = _write(tmp_path, 'det.txt', '3,-1,1,1,2,2,0.5\n'
                                       '1,-1,1,1,2,2,0.5\n'
                                       '\n'
                                       '3,7,5,5,2,2,0.4\n')
    dets = parse_det(path)
    assert list(dets) == [1, 3]
    assert len(dets[3]) == 2


def test_parse_det_empty_file(tmp_path):
    assert parse_det(_write(tmp_path, 'det.txt', '')) == {}


def test_parse_det_non_positive_box(tmp_path):
    path = _write(tmp_path, 'det.txt', '1,-1,10,20,0,40,0.9,-1,-1,-1\n')
    with pytest.raises(NonPositiveBox) as exc:
        parse_det(path)
    assert exc.value.line == 1


def test_parse_det_confidence_out_of_range(tmp_path):
    path = _write(tmp_path, 'det.txt', '1,-1,1,1,2,2,0.5\n'
                                       '2,-1,1,1,2,2,1.5\n')
    with pytest.raises(ParseError) as exc:
        parse_det(path)
    assert exc.value.line == 2


def test_parse_errors_carry_line_numbers(tmp_path):
    path = _write(tmp_path, 'det.txt', '1,-1,1,1,2,2,0.5\n1,-1,1,1\n')
    with pytest.raises(ParseError) as exc:
        read_rows(path)
    assert exc.value.line == 2
    assert 'line 2' in str(exc.value)
    path = _write(tmp_path, 'bad.txt', '1,-1,a,1,2,2,0.5\n')
    with pytest.raises(ParseError):
        read_rows(path)


def test_write_result_single_row(tmp_path):
    path = str(tmp_path / 'out.txt')
    write_result([MotRow(1, 1, 10., 20., 30., 40., 0.9, 3., 3., 3.)], path)
    with open(path) as f:
        assert f.read() == '1,1,10,20,30,40,0.9,-1,-1,-1\n'


def test_write_result_empty(tmp_path):
    path = str(tmp_path / 'out.txt')
    write_result([], path)
    assert os.path.getsize(path) == 0


def test_failed_write_keeps_destination(tmp_path, monkeypatch):
    path = tmp_path / 'out.txt'
    path.write_text('old\n')

    def fail(src, dst):
        raise OSError('disk full')
    monkeypatch.setattr(os, 'replace', fail)
    with pytest.raises(OSError):
        write_result([MotRow(1, 1, 10., 20., 30., 40.)], str(path))
    assert path.read_text() == 'old\n'
    assert os.listdir(tmp_path) == ['out.txt']


def test_rows_survive_write_and_read(tmp_path, rng):
    rows = []
    for f in range(1, 6):
        for i in range(1, 4):
            l, t = rng.uniform(-5., 300., 2)
            w, h = rng.uniform(1., 80., 2)
            conf = float('%.6g' % rng.random())
            rows.append(MotRow(f, i, l, t, w, h, conf))
    path = str(tmp_path / 'res.txt')
    write_result(rows, path)
    first = read_rows(path)
    assert first == rows
    write_result(first, path)
    assert read_rows(path) == first


# binary formats

def test_pgm_round_trip(tmp_path, rng):
    frame = GrayFrame(rng.integers(0, 256, (7, 9)) / 255.)
    path = str(tmp_path / 'f.pgm')
    write_pgm(frame, path)
    back = read_pgm(path)
    np.testing.assert_allclose(back.data, frame.data, atol=1e-12)


def test_pgm_bad_magic(tmp_path):
    path = tmp_path / 'f.pgm'
    path.write_bytes(b'P2\n1 1\n255\n0')
    with pytest.raises(FormatError):
        read_pgm(str(path))


def test_ften_is_bit_stable(tmp_path, rng):
    fmap = FeatureMap(rng.standard_normal((2, 5, 6)).astype(np.float32), 4.)
    a, b = str(tmp_path / 'a.ften'), str(tmp_path / 'b.ften')
    write_ften(fmap, a)
    back = read_ften(a)
    assert back.stride == 4.
    np.testing.assert_array_equal(back.data, fmap.data)
    write_ften(back, b)
    with open(a, 'rb') as fa, open(b, 'rb') as fb:
        assert fa.read() == fb.read()


def test_ften_rank_two(tmp_path):
    data = np.arange(6, dtype='<f4').reshape(2, 3)
    path = tmp_path / 'm.ften'
    path.write_bytes(b'FTEN' + struct.pack('<3I', 2, 2, 3) +
                     struct.pack('<d', 1.) + data.tobytes())
    fmap = read_ften(str(path))
    assert fmap.data.shape == (1, 2, 3)


def test_ften_truncated(tmp_path):
    path = tmp_path / 'm.ften'
    path.write_bytes(b'FTEN' + struct.pack('<4I', 3, 1, 4, 4) +
                     struct.pack('<d', 1.) + b'\0' * 10)
    with pytest.raises(FormatError):
        read_ften(str(path))


def test_checkpoint_round_trip(tmp_path):
    model = TrackModel.init(4, 2, 3, 5)
    model.agnn.w_raw = 0.3
    path = str(tmp_path / 'model.ckpt')
    write_checkpoint(model, path)
    back = read_checkpoint(path)
    for name, arr in model.tensors().items():
        np.testing.assert_array_equal(back.tensors()[name], arr)
    assert back.embed.pool == 3 and back.embed.channels == 2


def test_checkpoint_rejects_bad_bytes():
    buf = checkpoint_bytes(TrackModel.init(0, 1, 2, 3))
    with pytest.raises(FormatError):
        model_from_bytes(b'XXXX' + buf[4:])
    with pytest.raises(FormatError):
        model_from_bytes(buf[:-3])
    with pytest.raises(FormatError):
        model_from_bytes(buf + b'\0')


# synthetic scenarios

def test_static_object_has_constant_gt():
    s = SynthScenario(64, 64, 5, (SynthObject((10, 12, 20, 16)),))
    seq = gen_scenario(s, 0, jitter=0.)
    assert len(seq.gt_rows) == 5
    assert {(r.id, r.left, r.top, r.width, r.height)
            for r in seq.gt_rows} == {(1, 10, 12, 20, 16)}
    assert all(r.visibility == 1. for r in seq.gt_rows)


def test_crossing_objects_lower_visibility():
    s = SynthScenario(200, 80, 20, (
        SynthObject((10, 20, 30, 30), (8., 0.)),
        SynthObject((160, 20, 30, 30), (-8., 0.))))
    seq = gen_scenario(s, 0)
    vis = [r.visibility for r in seq.gt_rows if r.id == 1]
    assert min(vis) < 1.
    assert vis[0] == 1. and vis[-1] == 1.
    # the later-drawn object is never covered
    assert all(r.visibility == 1. for r in seq.gt_rows if r.id == 2)


def test_occlusion_hides_object_and_detection():
    s = SynthScenario(64, 64, 6, (SynthObject((10, 10, 20, 20),
                                              occlusions=((2, 3),)),))
    seq = gen_scenario(s, 0, drop_rate=0.)
    hidden = [r.frame for r in seq.gt_rows if r.conf == 0]
    assert hidden == [2, 3]
    assert sorted({r.frame for r in seq.det_rows}) == [1, 4, 5, 6]


def test_generation_is_byte_identical(tmp_path):
    s = random_scenario(np.random.default_rng(9), n_objects=2, frames=4,
                        width=96, height=80, size=(10, 16))
    for name in ('a', 'b'):
        write_scenario(gen_scenario(s, 3), str(tmp_path / name))
    for sub, fname in (('gt', 'gt.txt'), ('det', 'det.txt'),
                       ('img1', '000004.pgm'), ('maps', '000002.ften')):
        with open(tmp_path / 'a' / sub / fname, 'rb') as fa, \
                open(tmp_path / 'b' / sub / fname, 'rb') as fb:
            assert fa.read() == fb.read()


def test_flicker_changes_brightness_only():
    objs = (SynthObject((10, 10, 20, 20)),)
    plain = gen_scenario(SynthScenario(64, 64, 3, objs), 1)
    flick = gen_scenario(SynthScenario(64, 64, 3, objs, flicker=0.3), 1)
    assert plain.gt_rows == flick.gt_rows
    assert not np.allclose(plain.frames[0].data, flick.frames[0].data)


def test_infeasible_scenarios(tmp_path):
    with pytest.raises(ScenarioInfeasible):
        SynthScenario(40, 40, 3, (SynthObject((0, 0, 39, 10)),))
    with pytest.raises(ScenarioInfeasible):
        random_scenario(np.random.default_rng(0), frames=30, width=64,
                        height=64, speed=(10., 10.))
    path = _write(tmp_path, 's.json', json.dumps({'width': 40}))
    with pytest.raises(ScenarioInfeasible):
        load_scenario(path)


def test_leaving_the_image_warns():
    s = SynthScenario(64, 64, 10, (SynthObject((30, 20, 16, 16), (5., 0.)),))
    with pytest.warns(UserWarning):
        seq = gen_scenario(s, 0)
    assert seq.gt_rows[-1].conf == 0.


def test_load_scenario_json(tmp_path):
    path = _write(tmp_path, 's.json', json.dumps({
        'width': 80, 'height': 60, 'frames': 4,
        'objects': [{'box': [5, 5, 10, 10], 'velocity': [1, 0],
                     'occlusions': [[2, 2]]}]}))
    s = load_scenario(path)
    assert s.objects[0].occlusions == ((2, 2),)
    assert s.objects[0].box_at(3) == (7, 5, 10, 10)


def test_training_pairs_on_frames_too_small_for_flow():
    s = SynthScenario(48, 48, 3, (SynthObject((8, 8, 12, 12), (1., 0.)),))
    seq = gen_scenario(s, 0, drop_rate=0.)
    pairs = training_pairs(seq.frames, seq.maps, seq.gt_rows, pool=3)
    assert len(pairs) == 2
    for p in pairs:
        np.testing.assert_array_equal(p.labels, np.eye(1))


def test_sequence_dir_and_training_pairs(tmp_path):
    s = SynthScenario(96, 80, 3, (SynthObject((10, 10, 16, 16), (2., 0.)),
                                  SynthObject((50, 40, 20, 20), (0., 1.))))
    write_scenario(gen_scenario(s, 0, drop_rate=0.), str(tmp_path))
    frames, maps, dets, gt = load_sequence_dir(str(tmp_path))
    assert len(frames) == len(maps) == len(dets) == 3
    assert [len(d) for d in dets] == [2, 2, 2]
    pairs = training_pairs(frames, maps, gt, pool=3)
    assert len(pairs) == 2
    for p in pairs:
        np.testing.assert_array_equal(p.labels, np.eye(2))
        assert p.det_regions.shape == (2, 9)


# configuration

def test_config_defaults():
    cfg = load_config()
    assert cfg == Config()
    assert cfg.tracker_config().k == 10
    assert cfg.loss_weights().gamma == 50.
    assert cfg.schedule().lr_max == 0.05


def test_config_parsing():
    cfg = parse_config(['# comment', 'margin = 0.3', '', 'use_flow = off',
                        'feature_dim=32  # inline'])
    assert cfg.margin == 0.3 and cfg.use_flow is False
    assert cfg.feature_dim == 32


@pytest.mark.parametrize('lines', [['margin 0.3'], ['colour = red'],
                                   ['k = many'], ['use_gnn = maybe'],
                                   ['margin = 2']])
def test_config_errors(lines):
    with pytest.raises(ConfigError):
        parse_config(lines)


def test_config_error_names_line():
    with pytest.raises(ConfigError, match='line 2'):
        parse_config(['k = 3', 'bogus = 1'])
