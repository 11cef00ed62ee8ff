import numpy as np
import pytest
from hypothesis import settings

from tuberank.geometry import BoundingBox, Tube

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def make_tube(video_id, pid, start, boxes):
    """Tube from a list of (x, y, w, h) starting at frame ``start``."""
    return Tube(video_id, pid, [BoundingBox(start + i, *b) for i, b in enumerate(boxes)])


def cluster_with_outliers(seed, n_in=90, n_out=10, D=16):
    """Tight Gaussian cluster plus far, mutually isolated outliers; outlier ids start with 'out'.

    Outliers sit 20-40 cluster diameters out along randomly rotated
    orthonormal directions, so each is nearer the cluster than any other
    outlier.
    """
    rng = np.random.default_rng(seed)
    inliers = rng.normal(0, 0.05, size=(n_in, D))
    diam = np.ptp(inliers, axis=0).max()
    dirs = np.linalg.qr(rng.normal(size=(D, n_out)))[0].T
    outliers = dirs * rng.uniform(10, 20, size=(n_out, 1)) * diam * 2
    psi = np.vstack([inliers, outliers])
    order = rng.permutation(len(psi))
    ids = [f"{'out' if k >= n_in else 'in'}{k:03d}" for k in order]
    return ids, psi[order]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
