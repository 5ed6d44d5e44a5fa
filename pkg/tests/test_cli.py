import json

import pytest
import yaml

from evdemand.cli import main

SMALL = {
    "paths": {"static": "in/static.csv", "dynamic": "in/dynamic.csv", "output_dir": "out",
              "rule_labels": "in/rule_labels.csv"},
    "sweep": {"knn": {"k": [1, 5]}, "dt": {"depth": [2, 6]}, "rf": {"depth": [4], "n_trees": 10}},
    "synth": {"n_vehicles": 8, "n_icev": 3, "days": 6},
}


def write_config(tmp_path, **overrides):
    data = json.loads(json.dumps(SMALL))
    for section, values in overrides.items():
        data.setdefault(section, {}).update(values)
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(data))
    return path


def manifest(out_dir):
    return json.loads((out_dir / "manifest.json").read_text())


@pytest.fixture(scope="module")
def reported(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    cfg = write_config(tmp)
    assert main(["synth", "--config", str(cfg)]) == 0
    assert main(["report", "--config", str(cfg)]) == 0
    return tmp, cfg


def test_report_lists_the_contract_artifacts(reported):
    tmp, _ = reported
    paths = {a["path"] for a in manifest(tmp / "out")["artifacts"]}
    for name in ("demand_case1.csv", "demand_case2.csv", "comparison.csv", "comparison.json",
                 "behavior.json", "ingest_report.json", "labeled_trips.csv", "dataset.csv",
                 "split.json", "sweeps.csv", "models/label_rf.json"):
        assert name in paths
    for a in manifest(tmp / "out")["artifacts"]:
        assert len(a["sha256"]) == 64 and (tmp / "out" / a["path"]).stat().st_size == a["bytes"]


def test_demand_csv_layout(reported):
    tmp, _ = reported
    lines = (tmp / "out" / "demand_case1.csv").read_text().splitlines()
    assert lines[0] == "hour," + ",".join(f"zone_{i}" for i in range(1, 10)) + ",total"
    assert [int(l.split(",")[0]) for l in lines[1:]] == list(range(24))


def test_rerun_gives_identical_hashes(reported):
    tmp, cfg = reported
    before = manifest(tmp / "out")
    assert main(["report", "--config", str(cfg)]) == 0
    assert manifest(tmp / "out") == before
    other = tmp / "again"
    assert main(["report", "--config", str(cfg), "--out", str(other)]) == 0
    # the output directory is part of the config, so only the artifacts must agree
    assert manifest(other)["artifacts"] == before["artifacts"]


def test_flags_override_config(reported, capsys):
    tmp, cfg = reported
    out = tmp / "flags"
    assert main(["demand", "--config", str(cfg), "--out", str(out), "--case", "2",
                 "--impulse-binning", "--zones", "3x3"]) == 0
    assert (out / "demand_case2.csv").exists() and not (out / "demand_case1.csv").exists()
    meta = json.loads((out / "demand_case2.json").read_text())["meta"]
    assert meta["impulse_binning"] is True


def test_missing_dynamic_csv_is_a_config_error(tmp_path, capsys):
    cfg = write_config(tmp_path)
    (tmp_path / "in").mkdir()
    (tmp_path / "in" / "static.csv").write_text("vehicle_id,vehicle_type\n1,EV\n")
    assert main(["ingest", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("E_CONFIG: ")


def test_bad_cell_is_a_data_error(reported, tmp_path, capsys):
    src, _ = reported
    cfg = write_config(tmp_path)
    (tmp_path / "in").mkdir()
    (tmp_path / "in" / "static.csv").write_text((src / "in" / "static.csv").read_text())
    lines = (src / "in" / "dynamic.csv").read_text().splitlines()
    cells = lines[5].split(",")
    cells[4] = "north"
    lines[5] = ",".join(cells)
    (tmp_path / "in" / "dynamic.csv").write_text("\n".join(lines) + "\n")
    assert main(["trips", "--config", str(cfg)]) == 3
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("E_")


def test_unusable_grid_is_a_model_error(reported, tmp_path, capsys):
    src, _ = reported
    cfg = write_config(tmp_path, paths={"static": str(src / "in" / "static.csv"),
                                        "dynamic": str(src / "in" / "dynamic.csv")},
                       sweep={"knn": {"k": [100000]}})
    assert main(["evaluate", "--config", str(cfg)]) == 4
    assert capsys.readouterr().err.startswith("E_MODEL: ")


def test_bad_flag_values(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["report", "--zones", "3by3"])
    assert exc.value.code == 2
    cfg = write_config(tmp_path)
    assert main(["dataset", "--config", str(cfg), "--validation-frac", "0.9"]) == 2


def test_unknown_config_key(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("zones: {rows: 3, colz: 3}\n")
    assert main(["ingest", "--config", str(path)]) == 2
    assert "colz" in capsys.readouterr().err


def test_report_outputs_feed_the_band_check(reported):
    from evdemand.repro import PUBLISHED_BANDS, check_bands, observed_from_outputs

    tmp, _ = reported
    obs = observed_from_outputs(tmp / "out")
    assert obs["ev_trips"] > 0 and obs["icev_trips"] > 0
    assert 0 < obs["charging_rows"] <= obs["retained_rows"]
    assert len(check_bands(obs)) == len(PUBLISHED_BANDS)


def test_public_dataset_config_runs_on_data_in_its_layout(tmp_path):
    # synthetic data written with the public dataset's headers and split across weekly files
    from pathlib import Path

    from evdemand.repro import check_bands, observed_from_outputs

    ved = yaml.safe_load((Path(__file__).resolve().parents[1] / "configs" / "ved.yaml").read_text())
    ved["paths"] = {"static": "data/VED_Static_Data.csv", "dynamic": "data/VED_1_week.csv",
                    "output_dir": "out", "rule_labels": None}
    ved["sweep"] = SMALL["sweep"]
    ved["synth"] = SMALL["synth"]
    cfg = tmp_path / "ved.yaml"
    cfg.write_text(yaml.safe_dump(ved))
    assert main(["synth", "--config", str(cfg)]) == 0
    header = (tmp_path / "data" / "VED_1_week.csv").read_text().splitlines()[0]
    assert "Latitude[deg]" in header and "HV Battery SOC[%]" in header
    lines = (tmp_path / "data" / "VED_1_week.csv").read_text().splitlines()
    half = len(lines) // 2
    (tmp_path / "data" / "VED_2_week.csv").write_text("\n".join([lines[0]] + lines[half:]) + "\n")
    (tmp_path / "data" / "VED_1_week.csv").write_text("\n".join(lines[:half]) + "\n")
    ved["paths"]["dynamic"] = "data/VED_*_week.csv"
    cfg.write_text(yaml.safe_dump(ved))
    assert main(["report", "--config", str(cfg)]) == 0
    obs = observed_from_outputs(tmp_path / "out")
    assert obs["ev_trips"] > 0 and len(check_bands(obs)) == 7
