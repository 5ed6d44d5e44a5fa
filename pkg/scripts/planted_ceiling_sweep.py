"""How close does each model family get to the planted label ceiling as the planted share varies?

    python scripts/planted_ceiling_sweep.py --fracs 0.5 0.7 0.9 1.0
"""

import argparse

from evdemand.charging import label_trips
from evdemand.evaluation import comparison_report
from evdemand.features import build_dataset, retained_trips, train_test_split
from evdemand.ingest import Powertrain, filter_by_powertrain
from evdemand.synth import SynthConfig, generate, planted_ceiling
from evdemand.trips import build_trips


def one_run(frac: float, seed: int, n_trees: int) -> dict:
    cfg = SynthConfig(planted_frac=frac, seed=seed)
    data = generate(cfg)
    ev, _ = filter_by_powertrain(data.records, data.infos, {Powertrain.PHEV_EV})
    labeled = label_trips(build_trips(ev), cfg.grid)
    n = cfg.grid.n
    rows = build_dataset(labeled, n)
    keys = [(lt.trip.vehicle_id, lt.trip.day_index, lt.trip.trip_no) for lt in retained_trips(labeled, n)]
    split = train_test_split(rows, 0.25, seed=0)
    grids = {"knn": {"k": [1, 5, 11, 15]}, "dt": {"max_depth": [4, 6, 8, 10]},
             "rf": {"max_depth": [6, 8, 12]}}
    cmp = comparison_report(split, grids, n, {"rf": {"n_trees": n_trees}}, targets=("label",))
    test_keys = [keys[i] for i in split.test_idx]
    test_labels = [rows[i][1].label for i in split.test_idx]
    return {"ceiling": planted_ceiling(data.rule_labels, test_keys, test_labels), **cmp.scores["label"]}


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fracs", type=float, nargs="+", default=[0.5, 0.7, 0.9, 1.0])
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--n-trees", type=int, default=50)
    args = ap.parse_args()
    print(f"{'planted':>8} {'ceiling':>8} {'knn':>8} {'dt':>8} {'rf':>8}")
    for frac in args.fracs:
        r = one_run(frac, args.seed, args.n_trees)
        print(f"{frac:>8.2f} {r['ceiling']:>8.2f} {r['knn']:>8.2f} {r['dt']:>8.2f} {r['rf']:>8.2f}")
