import pytest
from hypothesis import given
from hypothesis import strategies as st

from histrack import synth
from histrack.geometry import ImageDims
from histrack.mot_io import (
    MotFormatError,
    MotRecord,
    emit_mot_files,
    find_sequences,
    format_mot_line,
    parse_mot_line,
    read_detections,
    read_ground_truth,
    read_mot_file,
    read_seqinfo,
)


def test_example_line():
    r = parse_mot_line("1,2,100.00,200.00,50.00,80.00,0.900000")
    assert (r.frame, r.id, r.x1, r.y1, r.x2, r.y2, r.confidence) == (1, 2, 100, 200, 150, 280, 0.9)
    assert format_mot_line(r) == "1,2,100.00,200.00,50.00,80.00,0.900000"


def test_detection_id_and_world_fields():
    r = parse_mot_line("3,-1,1,2,3,4,0.5,-1,-1,-1")
    assert r.id == -1 and r.frame == 3


@pytest.mark.parametrize(
    "line,needle",
    [
        ("1,2,abc,200,50,80,0.9", "field 3"),
        ("1,2,3", "fields"),
        ("0,2,1,1,1,1,1", "field 1"),
        ("1,0,1,1,1,1,1", "field 2"),
        ("1.5,2,1,1,1,1,1", "field 1"),
        ("1,2,1,1,-1,1,1", "negative"),
    ],
)
def test_bad_lines(line, needle):
    with pytest.raises(MotFormatError, match=needle):
        parse_mot_line(line)


def test_file_errors_carry_line_numbers(tmp_path):
    p = tmp_path / "x.txt"
    p.write_text("1,1,0,0,1,1,1\n\n2,1,zz,0,1,1,1\n")
    with pytest.raises(MotFormatError, match=r"x\.txt:3: field 3"):
        read_mot_file(p)


pix = st.integers(0, 10**6).map(lambda k: k / 100)


@given(st.integers(1, 10**5), st.integers(1, 10**4) | st.just(-1), pix, pix, pix, pix, st.integers(0, 10**6).map(lambda k: k / 10**6))
def test_round_trip_at_declared_precision(frame, id_, left, top, w, h, conf):
    line = f"{frame},{id_},{left:.2f},{top:.2f},{w:.2f},{h:.2f},{conf:.6f}"
    assert format_mot_line(parse_mot_line(line)) == line


def test_emit_round_trip(tmp_path):
    dims = ImageDims(1000, 800)
    g = synth.generate(synth.dance_toy(seed=1, n_frames=40))
    seq = emit_mot_files(g, tmp_path, dims)
    assert read_seqinfo(seq) == (g.scenario.name, 40, dims)
    assert find_sequences(tmp_path, "gt/gt.txt") == [seq]
    gt = read_ground_truth(seq)
    assert set(gt) == set(g.ground_truth)
    for tid, per in g.ground_truth.items():
        assert min(gt[tid]) == 1
        for f, b in per.items():
            rb = gt[tid][f]
            # 2 decimals of pixels bounds the normalized error
            assert abs(rb.cx - b.cx) * 1000 <= 0.01 and abs(rb.h - b.h) * 800 <= 0.01
    dets = read_detections(seq)
    assert sum(map(len, dets.values())) == sum(map(len, g.detections.values()))
    text = (seq / "gt" / "gt.txt").read_text()
    emit_mot_files(g, tmp_path / "again", dims)
    assert (tmp_path / "again" / g.scenario.name / "gt" / "gt.txt").read_text() == text


def test_empty_scenario_files(tmp_path):
    seq = emit_mot_files(synth.generate(synth.Scenario(name="empty", n_objects=0, n_frames=5)), tmp_path)
    assert (seq / "gt" / "gt.txt").read_text() == ""
    assert (seq / "det" / "det.txt").read_text() == ""


def test_record_bbox_conversion():
    dims = ImageDims(200, 100)
    r = MotRecord(1, 1, 20, 10, 60, 50, 1.0)
    b = r.to_bbox(dims)
    assert tuple(b) == pytest.approx((0.2, 0.3, 0.2, 0.4))
    back = MotRecord.from_bbox(1, 1, b, 1.0, dims)
    assert (back.x1, back.y1, back.x2, back.y2) == pytest.approx((20, 10, 60, 50))
