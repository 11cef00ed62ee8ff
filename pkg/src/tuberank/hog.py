"""Histogram-of-oriented-gradients descriptor for proposal patches."""
from __future__ import annotations

import numpy as np
from skimage.transform import resize

PATCH_SIZE = 64
CELL = 8
BINS = 9
BLOCK = 2
EPS = 1e-6
DESCRIPTOR_LENGTH = BINS * BLOCK * BLOCK * (PATCH_SIZE // CELL - BLOCK + 1) ** 2

_rows, _cols = np.indices((PATCH_SIZE, PATCH_SIZE))
_CELL_INDEX = (_rows // CELL) * (PATCH_SIZE // CELL) + _cols // CELL


def resample(patch: np.ndarray, size: int = PATCH_SIZE) -> np.ndarray:
    patch = np.asarray(patch, dtype=np.float64)
    if patch.ndim != 2 or patch.size == 0:
        raise ValueError(f"expected a non-empty 2-D patch, got shape {patch.shape}")
    if patch.shape == (size, size):
        return patch
    return resize(patch, (size, size), order=1, mode="edge", anti_aliasing=False, preserve_range=True)


def cell_histograms(patch: np.ndarray) -> np.ndarray:
    """Unnormalised (8, 8, 9) orientation histograms of the resampled patch.

    Centred differences, zero on the border row/column; unsigned orientation
    in [0, 180) degrees, hard-assigned to 20-degree bins and weighted by
    gradient magnitude.
    """
    p = resample(patch)
    gx = np.zeros_like(p)
    gy = np.zeros_like(p)
    gx[:, 1:-1] = p[:, 2:] - p[:, :-2]
    gy[1:-1, :] = p[2:, :] - p[:-2, :]
    mag = np.hypot(gx, gy)
    ang = np.mod(np.degrees(np.arctan2(gy, gx)), 180.0)
    bins = np.minimum((ang // (180.0 / BINS)).astype(int), BINS - 1)

    n = PATCH_SIZE // CELL
    flat = _CELL_INDEX * BINS + bins
    hist = np.bincount(flat.ravel(), weights=mag.ravel(), minlength=n * n * BINS)
    return hist.reshape(n, n, BINS)


def hog_descriptor(patch: np.ndarray) -> np.ndarray:
    """1764-long HOG vector of a grayscale patch (resampled to 64x64).

    2x2-cell blocks with stride one cell, each L2-normalised as
    ``v / sqrt(|v|^2 + eps^2)``.
    """
    h = cell_histograms(patch)
    # (n, n, BINS, BLOCK, BLOCK) -> (n, n, BLOCK, BLOCK, BINS): row-major cells within a block
    win = np.lib.stride_tricks.sliding_window_view(h, (BLOCK, BLOCK), axis=(0, 1))
    blocks = win.transpose(0, 1, 3, 4, 2).reshape(win.shape[0], win.shape[1], -1)
    norm = np.sqrt(np.einsum("ijk,ijk->ij", blocks, blocks) + EPS ** 2)
    return (blocks / norm[..., None]).ravel()
