"""Small shared builders for model-level tests."""

import numpy as np

from evdemand.features import FeatureRow, Table, TargetRow


def random_rows(n, seed=0, n_zones=4, vehicles=(1, 2, 3)):
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(n):
        label = int(rng.integers(1, n_zones + 2))
        t0 = float(rng.uniform(0, 23))
        soc_req = float(rng.uniform(1, 60)) if label <= n_zones else 0.0
        rows.append((FeatureRow(int(rng.choice(vehicles)), t0, float(rng.uniform(20, 100)),
                                float(rng.uniform(42.2, 42.3)), float(rng.uniform(-83.8, -83.7))),
                     TargetRow(label, t0 + float(rng.uniform(0.05, 1)), soc_req)))
    return rows


def random_table(n, seed=0, **kw):
    return Table.from_rows(random_rows(n, seed, **kw))
