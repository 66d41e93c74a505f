import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from koopnem import generalization_bound
from koopnem.cli import main
from koopnem.config import config_hash, load_config, validate_config
from koopnem.csvio import read_csv
from koopnem.errors import ConfigurationError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write_config(tmp_path, **override):
    cfg = {"model": "tank", **override}
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


def test_committed_configs_equal_defaults():
    for name, model in (("tank.yaml", "tank"), ("williams_otto.yaml", "williams_otto")):
        assert load_config(CONFIGS / name) == validate_config({"model": model})


def test_validation_lists_every_field():
    with pytest.raises(ConfigurationError) as info:
        validate_config({"model": "tank", "state_kernel": {"sigma": -1}, "cost": {"gamma": 2}, "typo": 1})
    msg = str(info.value)
    for field in ("state_kernel.sigma", "cost.gamma", "typo"):
        assert field in msg
    with pytest.raises(ConfigurationError):
        validate_config({"model": "pendulum"})


def test_hash_is_stable_and_seed_sensitive():
    a = validate_config({"model": "tank"})
    assert config_hash(a) == config_hash(validate_config({"model": "tank"}))
    assert config_hash(a) != config_hash(validate_config({"model": "tank", "seed": 1}))


def test_invalid_config_exits_nonzero(tmp_path, capsys):
    path = write_config(tmp_path, state_kernel={"sigma": -1.0})
    assert main(["fit", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "state_kernel.sigma" in capsys.readouterr().err


def test_repro_model_mismatch(tmp_path):
    path = write_config(tmp_path)
    assert main(["repro-wo", "--config", str(path), "--out", str(tmp_path / "o")]) == 2


def test_bounds_subcommand(tmp_path):
    path = write_config(tmp_path, bounds={"m": [441], "delta": 0.05})
    out = tmp_path / "b"
    assert main(["bounds", "--config", str(path), "--out", str(out), "--seed", "3"]) == 0
    cols, data, meta = read_csv(out / "bounds_generalization.csv")
    assert data[0, cols.index("bound")] == pytest.approx(generalization_bound(441, 0.05, 0.01, 20), rel=1e-15)
    assert meta["seed"] == 3 and meta["version"] == "0.1.0" and len(meta["config_hash"]) == 64
    _, mb, _ = read_csv(out / "bounds_multistep.csv")
    assert mb[0, 3] == 0.0 and mb[1, 3] == pytest.approx(0.1)
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert set(manifest["outputs"]) == {"bounds_generalization.csv", "bounds_multistep.csv", "bounds_cost.csv"}
    assert "bounds" in manifest["timings_seconds"]


def test_fit_then_predict_and_cost(tmp_path):
    path = write_config(tmp_path, test={"n_x": 5, "n_alpha": 3, "horizons": [1, 2]})
    fit_dir = tmp_path / "fit"
    assert main(["fit", "--config", str(path), "--out", str(fit_dir), "--threads", "1"]) == 0
    rows = [l for l in (fit_dir / "sparsity.csv").read_text().splitlines() if not l.startswith("#")]
    assert rows[0] == "matrix,sparsity,nonzero_fraction" and rows[1].startswith("G_xu,")
    pred_dir = tmp_path / "pred"
    assert main(["predict", "--config", str(path), "--out", str(pred_dir), "--operator", str(fit_dir / "operator.csv")]) == 0
    cols, data, meta = read_csv(pred_dir / "error_surface.csv")
    assert cols == ["x1", "alpha1", "horizon", "abs_err_x1"] and data.shape == (30, 4)
    cost_dir = tmp_path / "cost"
    assert main(["cost", "--config", str(path), "--out", str(cost_dir), "--dataset", str(fit_dir / "dataset")]) == 0
    cols, data, _ = read_csv(cost_dir / "cost_surface.csv")
    assert data.shape == (15, 5)
    assert np.allclose(data[:, 4], np.abs(data[:, 3] - data[:, 2]))


def test_sample_and_filldist(tmp_path):
    path = write_config(tmp_path, filldist={"n_x": 41, "n_alpha": 21})
    assert main(["sample", "--config", str(path), "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "s" / "dataset" / "states.csv").exists()
    assert main(["filldist", "--config", str(path), "--out", str(tmp_path / "f"), "--dataset", str(tmp_path / "s" / "dataset")]) == 0
    text = (tmp_path / "f" / "filldist.csv").read_text()
    assert "fill_distance_pairs" in text and "grid 41x21" in text


def test_bad_threads(tmp_path):
    path = write_config(tmp_path)
    assert main(["bounds", "--config", str(path), "--out", str(tmp_path / "o"), "--threads", "0"]) == 2
