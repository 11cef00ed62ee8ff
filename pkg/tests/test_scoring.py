import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tuberank.geometry import BoundingBox
from tuberank.scoring import (ScoreWeights, SubProposal, appearance_similarity, edge_score, minmax_normalize,
                              node_score, shape_score, subproposal_actionness, subproposal_motion_score)


def sp(pid, seg, boxes, act=None):
    return SubProposal(pid, seg, [BoundingBox(f, *b) for f, b in boxes], act)


def test_weights_validation():
    with pytest.raises(ValueError):
        ScoreWeights(lambda_a=-0.1)


def test_node_and_edge_examples():
    assert node_score(0.6, 0.4) == pytest.approx(1.0)
    assert node_score(0, 0) == 0
    assert node_score(0.5, 0.5, ScoreWeights(lambda_i=2, lambda_m=0)) == 1.0
    assert edge_score(1.0, 1.0) == 2.0
    assert edge_score(0, 0) == 0
    assert edge_score(0.5, 0.2, ScoreWeights(lambda_o=1, lambda_a=0)) == 0.5


fin = st.floats(-10, 10)


@given(fin, fin, fin, fin, st.floats(0, 5), st.floats(0, 5))
def test_scores_linear(a, b, c, d, w1, w2):
    w = ScoreWeights(w1, w2, w1, w2)
    assert node_score(a + c, b + d, w) == pytest.approx(node_score(a, b, w) + node_score(c, d, w), abs=1e-9)
    assert edge_score(2 * a, 2 * b, w) == pytest.approx(2 * edge_score(a, b, w), abs=1e-9)


def test_actionness_mean_and_missing():
    s = sp(3, 0, [(0, (0, 0, 1, 1)), (1, (0, 0, 1, 1)), (2, (0, 0, 1, 1))], [0.2, 0.3, 0.7])
    assert subproposal_actionness(s) == pytest.approx(0.4)
    assert subproposal_actionness(sp(0, 0, [(0, (0, 0, 1, 1))] * 1, [1.0])) == 1.0
    two = sp(0, 0, [(0, (0, 0, 1, 1)), (1, (0, 0, 1, 1))], [0.0, 1.0])
    assert subproposal_actionness(two) == 0.5
    missing = sp(7, 0, [(4, (0, 0, 1, 1)), (5, (0, 0, 1, 1))], [0.5, np.nan])
    with pytest.raises(KeyError, match="proposal 7, frame 5"):
        subproposal_actionness(missing)


def test_subproposal_motion_score():
    boxes = [(f, (0, 0, 10, 10)) for f in range(3)]
    s = sp(0, 0, boxes)
    cands = {f: (np.array([[0, 0, 10, 10]], float), np.array([v])) for f, v in enumerate([0.2, 0.4, 0.6])}
    assert subproposal_motion_score(s, cands) == pytest.approx(0.4)
    one = sp(0, 0, boxes[:1])
    assert subproposal_motion_score(one, cands) == 0.2


def test_minmax():
    np.testing.assert_allclose(minmax_normalize([1, 3, 2]), [0, 1, 0.5])
    assert not minmax_normalize([4, 4]).any()


def test_shape_score_examples():
    a = sp(0, 1, [(3, (0, 0, 10, 10))])
    assert shape_score(a, sp(1, 2, [(4, (0, 0, 10, 10))])) == 1.0
    assert shape_score(a, sp(1, 2, [(4, (30, 30, 5, 5))])) == 0.0
    assert shape_score(a, sp(1, 2, [(4, (5, 0, 10, 10))])) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        shape_score(a, sp(1, 3, [(4, (0, 0, 10, 10))]))


def test_appearance_similarity_examples():
    a = np.array([1.0, 2.0, 3.0])
    assert appearance_similarity(a, a) == 1.0
    b = a + np.array([1.0, 0, 0])
    assert appearance_similarity(a, b) == pytest.approx(np.exp(-1))
    assert appearance_similarity(a, b) == pytest.approx(0.3679, abs=1e-4)
    with pytest.raises(ValueError):
        appearance_similarity(a, a[:2])
    with pytest.raises(ValueError):
        appearance_similarity(a, a, sigma=0)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_appearance_similarity_properties(a, b):
    s = appearance_similarity(a, b)
    assert 0 < s <= 1
    assert s == appearance_similarity(b, a)
    d = np.linalg.norm(np.subtract(a, b))
    if d == 0:
        assert s == 1.0
    elif d > 1e-12:  # below this exp(-d) rounds to 1 in double precision
        assert s < 1.0
