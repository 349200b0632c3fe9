import csv
import json

import numpy as np
import pytest

from d2dpredict.cli import main
from d2dpredict.config import ConfigError, RunConfig, config_from_dict, load_config
from d2dpredict.dataset import load_dataset
from d2dpredict.mlp import load_model, predict_pathloss


def rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# d2dpredict ")
    return list(csv.DictReader(lines[1:]))


def test_config_defaults_and_overrides(tmp_path):
    cfg = load_config()
    assert cfg.n_samples == 1_000_000 and cfg.area.n_bs == 3 and cfg.rrm.p_max_dbm == 24.0
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"area": {"environment": "urban"}, "lm": {"max_epochs": 5},
                                "experiments": {"fig9": {"n_values": [2]}}, "seeds": [1, 2]}))
    cfg = load_config(path)
    assert cfg.area.environment.value == "urban"
    assert cfg.lm.max_epochs == 5
    assert cfg.experiments["fig9"]["n_values"] == [2]
    assert cfg.experiments["fig10"]["n_values"] == [2, 4, 6, 8, 10]
    assert cfg.seeds == (1, 2)


@pytest.mark.parametrize("bad", [{"nope": 1}, {"area": {"sides": 3}}, {"experiments": {"fig99": {}}},
                                 {"area": {"side_m": -1}}, {"n_samples": 0}])
def test_config_rejects_bad_input(bad):
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_config_hash_ignores_output_dir_only():
    a = RunConfig()
    assert a.config_hash() == config_from_dict({"output_dir": "elsewhere"}).config_hash()
    assert a.config_hash() != config_from_dict({"seed": 1}).config_hash()


def test_gen_data_is_byte_identical(tmp_path, capsys):
    args = ["gen-data", "--env", "urban", "--samples", "300", "--seed", "4"]
    assert main(args + ["--out", str(tmp_path / "a.bin")]) == 0
    assert main(args + ["--out", str(tmp_path / "b.bin")]) == 0
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
    ds = load_dataset(tmp_path / "a.bin")
    assert len(ds) == 300 and ds.environment == "urban"


def test_gen_data_noise_and_csv(tmp_path):
    out = tmp_path / "d.csv"
    assert main(["gen-data", "--samples", "50", "--n-bs", "2", "--snr-g-db", "20", "--out", str(out)]) == 0
    ds = load_dataset(out)
    assert ds.n_bs == 2 and ds.snr_g_db == 20.0


def test_train_eval_rrm_pipeline(tmp_path):
    data, model = tmp_path / "d.bin", tmp_path / "m.mlp"
    assert main(["gen-data", "--samples", "800", "--out", str(data)]) == 0
    assert main(["train", "--dataset", str(data), "--max-epochs", "1", "--out-model", str(model),
                 "--out-dir", str(tmp_path)]) == 0
    report = tmp_path / "m.train.csv"
    assert len(rows(report)) == 1

    m = load_model(model)
    probes = np.random.default_rng(0).uniform(40, 150, size=(100, 6))
    again = load_model(model)
    assert np.max(np.abs(predict_pathloss(m, probes) - predict_pathloss(again, probes))) < 1e-12

    assert main(["eval", "--model", str(model), "--dataset", str(data), "--rows", "20",
                 "--out-dir", str(tmp_path)]) == 0
    assert len(rows(tmp_path / "fig6_rural.csv")) == 20
    assert main(["rrm", "--model", str(model), "--mode", "dedicated", "--n-pairs", "2", "--drops", "2",
                 "--out-dir", str(tmp_path)]) == 0
    assert len(rows(tmp_path / "fig10_rural.csv")) == 2
    assert (tmp_path / "fig10_rural.plot.txt").is_file()


def test_missing_dataset_fails(tmp_path, capsys):
    assert main(["train", "--dataset", str(tmp_path / "nothing.bin")]) != 0
    assert "not found" in capsys.readouterr().err


def test_overhead_command(tmp_path):
    assert main(["overhead", "--n-pairs", "10", "--out-dir", str(tmp_path)]) == 0
    table = rows(tmp_path / "fig11.csv")
    assert {"n_pairs": "10", "mode": "shared", "total": "670"}.items() <= table[0].items()


def test_reproduce_fig11(tmp_path):
    assert main(["reproduce", "fig11", "--out-dir", str(tmp_path)]) == 0
    table = rows(tmp_path / "fig11.csv")
    assert any(r["n_pairs"] == "10" and r["mode"] == "shared" and r["total"] == "670" for r in table)


def test_reproduce_fig5_axis(tmp_path):
    assert main(["reproduce", "fig5", "--env", "rural", "--samples", "10000", "--max-epochs", "1",
                 "--out-dir", str(tmp_path)]) == 0
    table = rows(tmp_path / "fig5_rural.csv")
    assert [r["n_bs"] for r in table] == ["1", "2", "3", "4", "5"]


def test_unknown_figure(tmp_path, capsys):
    assert main(["reproduce", "fig42", "--out-dir", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "fig5" in err and "fig11" in err


def test_usage_errors_exit_one(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["gen-data", "--env", "lunar"])
    assert info.value.code == 1
    assert main(["overhead", "--config", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["overhead", "--config", str(bad)]) == 1


def test_runtime_failure_exits_two(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"area": {"environment": "urban", "grid_blocks": 1, "block_m": 250.0,
                                        "street_m": 0.0, "margin_m": 0.0}}))
    assert main(["gen-data", "--config", str(cfg), "--samples", "10", "--out", str(tmp_path / "x.bin")]) == 2


def test_threads_flag(tmp_path):
    assert main(["--threads", "1", "overhead", "--out-dir", str(tmp_path)]) == 0
