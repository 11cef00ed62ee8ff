import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tuberank.hog import BINS, CELL, DESCRIPTOR_LENGTH, EPS, cell_histograms, hog_descriptor, resample


def reference_hog(patch):
    """Loop-based descriptor: per-pixel binning and per-block normalisation."""
    p = resample(patch)
    n = p.shape[0] // CELL
    hist = np.zeros((n, n, BINS))
    for r in range(p.shape[0]):
        for c in range(p.shape[1]):
            gx = p[r, c + 1] - p[r, c - 1] if 0 < c < p.shape[1] - 1 else 0.0
            gy = p[r + 1, c] - p[r - 1, c] if 0 < r < p.shape[0] - 1 else 0.0
            ang = np.degrees(np.arctan2(gy, gx)) % 180.0
            hist[r // CELL, c // CELL, min(int(ang // 20.0), BINS - 1)] += np.hypot(gx, gy)
    out = []
    for i in range(n - 1):
        for j in range(n - 1):
            v = hist[i:i + 2, j:j + 2].ravel()
            out.append(v / np.sqrt(v @ v + EPS ** 2))
    return np.concatenate(out)


def test_length():
    assert DESCRIPTOR_LENGTH == 1764
    assert hog_descriptor(np.zeros((64, 64))).shape == (1764,)
    assert hog_descriptor(np.zeros((10, 30))).shape == (1764,)


def test_uniform_patch_is_zero():
    assert not hog_descriptor(np.full((40, 40), 77.0)).any()


def test_vertical_step_lands_in_horizontal_gradient_bin():
    p = np.zeros((64, 64))
    p[:, 32:] = 100.0
    h = cell_histograms(p)
    assert h[..., 0].sum() > 0
    assert not h[..., 1:].any()


def test_matches_loop_reference():
    rng = np.random.default_rng(3)
    for shape in [(64, 64), (23, 41)]:
        patch = rng.random(shape) * 255
        np.testing.assert_allclose(hog_descriptor(patch), reference_hog(patch), rtol=1e-10, atol=1e-12)


@given(st.floats(-100, 100))
def test_shift_invariance(c):
    patch = np.random.default_rng(5).random((64, 64)) * 100
    np.testing.assert_allclose(hog_descriptor(patch + c), hog_descriptor(patch), atol=1e-9)


def test_deterministic_and_block_norms():
    patch = np.random.default_rng(9).random((50, 70))
    d = hog_descriptor(patch)
    assert np.array_equal(d, hog_descriptor(patch.copy()))
    norms = np.linalg.norm(d.reshape(-1, 36), axis=1)
    assert (norms <= 1 + 1e-12).all()


def test_empty_patch_errors():
    with pytest.raises(ValueError):
        hog_descriptor(np.zeros((0, 5)))
