import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_tube
from tuberank.geometry import BoundingBox, Tube, iou, iou_xywh, nms, pad_to_span, tube_overlap

coord = st.floats(-50, 50, allow_nan=False)
# sizes below the float resolution of the coordinates cannot be represented by edge arithmetic
size = st.one_of(st.just(0.0), st.floats(0.01, 40))
boxes = st.builds(lambda x, y, w, h: BoundingBox(0, x, y, w, h), coord, coord, size, size)


def test_iou_examples():
    a = BoundingBox(0, 0, 0, 10, 10)
    assert iou(a, a) == 1.0
    assert iou(a, BoundingBox(0, 20, 20, 5, 5)) == 0.0
    assert iou(a, BoundingBox(0, 5, 0, 10, 10)) == pytest.approx(1 / 3)


def test_iou_degenerate_is_zero():
    z = BoundingBox(0, 3, 3, 0, 0)
    assert iou(z, z) == 0.0


def test_box_validation():
    with pytest.raises(ValueError):
        BoundingBox(0, 0, 0, -1, 2)
    with pytest.raises(ValueError):
        BoundingBox(-1, 0, 0, 1, 2)


@given(boxes, boxes)
def test_iou_symmetric_and_bounded(a, b):
    v = iou(a, b)
    assert v == iou(b, a)
    assert 0.0 <= v <= 1.0


@given(boxes)
def test_iou_self(a):
    if a.w * a.h > 0:
        assert iou(a, a) == pytest.approx(1.0)


def test_iou_vectorised_broadcast():
    a = np.array([[0, 0, 10, 10], [5, 0, 10, 10]], float)
    m = iou_xywh(a[:, None], a[None])
    assert m.shape == (2, 2)
    assert m[0, 1] == pytest.approx(1 / 3)


def test_tube_validation():
    with pytest.raises(ValueError):
        Tube("v", 0, [])
    with pytest.raises(ValueError):
        Tube("v", 0, [BoundingBox(0, 0, 0, 1, 1), BoundingBox(2, 0, 0, 1, 1)])


def test_tube_overlap_examples():
    box = (0, 0, 10, 10)
    a = make_tube("v", 0, 0, [box] * 4)
    b = make_tube("v", 1, 2, [box] * 4)
    assert tube_overlap(a, a) == 1.0
    assert tube_overlap(a, b) == pytest.approx(2 / 6)
    c = make_tube("v", 2, 10, [box] * 3)
    assert tube_overlap(a, c) == 0.0


tubes = st.builds(
    lambda start, rows: make_tube("v", 0, start, rows),
    st.integers(0, 6),
    st.lists(st.tuples(coord, coord, st.floats(0.5, 30), st.floats(0.5, 30)), min_size=1, max_size=6),
)


@given(tubes, tubes)
def test_tube_overlap_symmetric_bounded(a, b):
    v = tube_overlap(a, b)
    assert v == pytest.approx(tube_overlap(b, a))
    assert 0.0 <= v <= 1.0 + 1e-12


def test_nms_examples():
    box = (0, 0, 10, 10)
    a = make_tube("v", 0, 0, [box] * 3)
    a2 = make_tube("v", 1, 0, [box] * 3)
    assert nms([a, a2], [2, 1], 0.8) == [0]
    far = make_tube("v", 2, 0, [(50, 50, 10, 10)] * 3)
    assert sorted(nms([a, far], [1, 1], 0.8)) == [0, 1]
    assert nms([], [], 0.8) == []


def test_nms_three_tubes_trace():
    # A and B overlap about 0.9, C is disjoint; scores B > A > C
    A = make_tube("v", 0, 0, [(0, 0, 10, 10)] * 4)
    B = make_tube("v", 1, 0, [(0, 0, 10, 9)] * 4)
    C = make_tube("v", 2, 0, [(40, 40, 10, 10)] * 4)
    assert tube_overlap(A, B) == pytest.approx(0.9)
    assert nms([A, B, C], [2.0, 3.0, 1.0], 0.8) == [1, 2]


def test_nms_tie_prefers_lower_id():
    box = (0, 0, 10, 10)
    hi_id = make_tube("v", 7, 0, [box] * 2)
    lo_id = make_tube("v", 3, 0, [box] * 2)
    assert nms([hi_id, lo_id], [1.0, 1.0], 0.8) == [1]


def test_nms_errors():
    t = make_tube("v", 0, 0, [(0, 0, 1, 1)])
    with pytest.raises(ValueError):
        nms([t], [1, 2])
    with pytest.raises(ValueError):
        nms([t], [1], 0.0)


@given(st.lists(tubes, min_size=1, max_size=6), st.floats(0.1, 1.0))
def test_nms_kept_pairwise_below_threshold(ts, thr):
    ts = [Tube("v", i, t.boxes) for i, t in enumerate(ts)]
    scores = list(range(len(ts)))
    kept = nms(ts, scores, thr)
    for i in kept:
        for j in kept:
            if i < j:
                assert tube_overlap(ts[i], ts[j]) <= thr


def test_pad_to_span():
    t = make_tube("v", 4, 2, [(0, 0, 1, 1), (1, 1, 1, 1), (2, 2, 1, 1)])
    p = pad_to_span(t, 0, 7)
    assert p.start == 0 and p.end == 7
    assert p.boxes[0].as_tuple() == (0, 0, 1, 1)
    assert p.boxes[-1].as_tuple() == (2, 2, 1, 1)
    c = pad_to_span(t, 3, 4)
    assert len(c) == 1 and c.boxes[0].as_tuple() == (1, 1, 1, 1)
    with pytest.raises(ValueError):
        pad_to_span(t, 10, 12)
