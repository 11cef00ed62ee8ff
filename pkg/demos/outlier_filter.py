"""Random-walk filtering: isolated feature vectors receive the lowest scores."""
import numpy as np

from tuberank.randomwalk import WalkParams, filter_outliers

rng = np.random.default_rng(1)
cluster = rng.normal(0.0, 0.1, size=(40, 8))
far = np.linalg.qr(rng.normal(size=(8, 4)))[0].T * 5.0
ids = [f"img{k:02d}" for k in range(40)] + [f"odd{k}" for k in range(4)]
res = filter_outliers(ids, np.vstack([cluster, far]), WalkParams(keep_fraction=40 / 44))
order = np.argsort(res.scores)
print("lowest scores:", ", ".join(f"{ids[i]} {res.scores[i]:.4f}" for i in order[:6]))
print(f"removed ({len(res.removed)}): {res.removed}")
