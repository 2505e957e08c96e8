import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DATA
from histrack import synth
from histrack.geometry import BBox
from histrack.metrics import combine, evaluate, format_csv, format_report, identity_f1, iou_threshold_sweep
from histrack.mot_io import read_ground_truth, read_results, read_seqinfo

MICRO = DATA / "micro"


def load_micro(name):
    seq = MICRO / name
    return read_ground_truth(seq), read_results(seq / "hyp.txt", read_seqinfo(seq)[2])


@pytest.mark.parametrize(
    "name,mota,idf1,idsw,fp,fn",
    [("perfect", 1.0, 1.0, 0, 0, 0), ("swap", 2 / 3, 2 / 3, 2, 0, 0), ("fp_fn", 1 / 3, 2 / 3, 0, 1, 1)],
)
def test_micro_scenarios(name, mota, idf1, idsw, fp, fn):
    r = evaluate(*load_micro(name))
    assert (r.id_switches, r.fp, r.fn) == (idsw, fp, fn)
    assert r.mota == pytest.approx(mota, abs=1e-12)
    assert r.idf1 == pytest.approx(idf1, abs=1e-12)


def test_empty_hypothesis():
    gt, _ = load_micro("perfect")
    r = evaluate(gt, {})
    assert r.mota == 0.0 and r.idf1 == 0.0 and r.fn == r.gt_count


def test_carry_over_keeps_previous_correspondence():
    # two hypotheses overlap one gt box; the one matched before keeps it
    g = {1: {1: BBox(0.5, 0.5, 0.2, 0.2), 2: BBox(0.5, 0.5, 0.2, 0.2)}}
    h = {7: {1: BBox(0.52, 0.5, 0.2, 0.2), 2: BBox(0.53, 0.5, 0.2, 0.2)}, 8: {2: BBox(0.5, 0.5, 0.2, 0.2)}}
    r = evaluate(g, h)
    assert r.id_switches == 0 and r.fp == 1


@settings(max_examples=15)
@given(st.integers(0, 10_000), st.sampled_from(synth.MOTION_KINDS))
def test_ground_truth_against_itself(seed, kind):
    gt = synth.generate(synth.Scenario(n_objects=4, n_frames=30, motion_kind=kind, seed=seed)).ground_truth
    r = evaluate(gt, gt)
    assert (r.mota, r.idf1, r.id_switches) == (1.0, 1.0, 0)


def test_monotone_in_match_iou():
    g = synth.generate(synth.dance_toy(seed=3, n_frames=80)).ground_truth
    h = {tid: {f: BBox(b.cx + 0.01 * ((f + tid) % 5), b.cy, b.w * 1.1, b.h) for f, b in per.items()} for tid, per in g.items()}
    ts = [0.1, 0.3, 0.5, 0.6, 0.7, 0.8, 0.9]
    reports = [evaluate(g, h, t) for t in ts]
    assert all(b.mota <= a.mota for a, b in zip(reports, reports[1:]))
    assert all(b.idf1 <= a.idf1 for a, b in zip(reports, reports[1:]))
    sweep = iou_threshold_sweep(g, h, ts)
    assert [t for t, _ in sweep] == ts and [v for _, v in sweep] == [r.idf1 for r in reports]
    assert all(v == 1.0 for _, v in iou_threshold_sweep(g, g, ts))


def test_sweep_and_evaluate_reject_bad_thresholds():
    with pytest.raises(ValueError):
        iou_threshold_sweep({}, {}, [0.5, 0.3])
    with pytest.raises(ValueError):
        evaluate({}, {}, 1.0)


def test_identity_f1_bounds_and_empty():
    assert identity_f1({}, {}) == (1.0, 0, 0, 0)
    gt, hyp = load_micro("swap")
    f, idtp, n_gt, n_hyp = identity_f1(gt, hyp)
    assert (idtp, n_gt, n_hyp) == (4, 6, 6) and 0.0 <= f <= 1.0


def test_combine_and_reports():
    reps = [evaluate(*load_micro(n)) for n in ("perfect", "swap", "fp_fn")]
    c = combine(reps)
    assert c.gt_count == sum(r.gt_count for r in reps)
    assert c.mota == pytest.approx(1 - (c.fp + c.fn + c.id_switches) / c.gt_count)
    csv = format_csv([("perfect", reps[0])])
    assert csv.splitlines() == ["sequence,mota,idf1,idsw,fp,fn,gt", "perfect,1.000000,1.000000,0,0,0,6"]
    assert "perfect" in format_report([("perfect", reps[0])])
