import json
import os

import numpy as np
import pytest

from saflex.cli import main
from saflex.config import DEFAULTS, resolve, ConfigError
from saflex.data import load_csv
from saflex.nn import load_checkpoint


def _cfg(tmp_path, name="config.json", **overrides):
    cfg = {
        "data": {"kind": "two_gaussians", "n": 300, "seed": 0},
        "model": {"hidden": [8, 8]},
        "train": {"epochs": 2, "batch_size": 32, "mode": "saflex", "seed": 0},
        "optimizer": {"lr": 0.2},
        "augment": {"kind": "gaussian_jitter", "sigma": 0.5},
        "output": {"dir": str(tmp_path / "run")},
    }
    for section, vals in overrides.items():
        cfg.setdefault(section, {}).update(vals)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_gen_data_deterministic(tmp_path, capsys):
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    args = ["gen-data", "--kind", "two_gaussians", "--n", "200", "--seed", "7"]
    assert main(args + ["--out", out1]) == 0
    assert main(args + ["--out", out2]) == 0
    for name in ("data.csv", "schema.csv"):
        a = open(os.path.join(out1, name), "rb").read()
        b = open(os.path.join(out2, name), "rb").read()
        assert a == b


def test_gen_data_loads_back(tmp_path):
    out = str(tmp_path / "d")
    assert main(["gen-data", "--kind", "two_moons", "--n", "150", "--out", out]) == 0
    ds = load_csv(os.path.join(out, "data.csv"), os.path.join(out, "schema.csv"))
    assert ds.size == 150 and ds.num_classes == 2


def test_gen_data_csv_passthrough(tmp_path):
    src = str(tmp_path / "src")
    assert main(["gen-data", "--kind", "two_gaussians", "--n", "80", "--out", src]) == 0
    out = str(tmp_path / "copy")
    rc = main([
        "gen-data", "--kind", "csv_passthrough",
        "--input", os.path.join(src, "data.csv"),
        "--input-schema", os.path.join(src, "schema.csv"),
        "--out", out,
    ])
    assert rc == 0
    ds = load_csv(os.path.join(out, "data.csv"), os.path.join(out, "schema.csv"))
    assert ds.size == 80


def test_gen_data_rejects_zero_n(tmp_path):
    rc = main(["gen-data", "--n", "0", "--out", str(tmp_path / "x")])
    assert rc == 2


def test_print_config_covers_defaults(capsys):
    assert main(["train", "--print-config"]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed == DEFAULTS


def test_unknown_key_rejected_with_path(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"train": {"epochz": 3}}))
    rc = main(["train", "-c", str(path)])
    assert rc == 2
    assert "train.epochz" in capsys.readouterr().err


def test_malformed_json_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"train": }')
    rc = main(["train", "-c", str(path)])
    assert rc == 2
    assert ":1:" in capsys.readouterr().err


def test_missing_required_key_named(tmp_path, capsys):
    cfg = _cfg(tmp_path, data={"kind": "csv"})
    rc = main(["train", "-c", cfg])
    assert rc == 2
    assert "data.path" in capsys.readouterr().err


def test_train_writes_outputs_and_is_reproducible(tmp_path):
    cfg = _cfg(tmp_path)
    assert main(["train", "-c", cfg]) == 0
    run_dir = str(tmp_path / "run")
    for name in ("metrics.csv", "checkpoint.bin", "resolved_config.json"):
        assert os.path.exists(os.path.join(run_dir, name))
    # re-run from the resolved config into a fresh directory
    resolved = os.path.join(run_dir, "resolved_config.json")
    out2 = str(tmp_path / "run2")
    assert main(["train", "-c", resolved, "--output-dir", out2]) == 0

    def stable(path):
        lines = open(path).read().splitlines()
        return [",".join(ln.split(",")[:-1]) for ln in lines]  # drop wall-clock column

    assert stable(os.path.join(run_dir, "metrics.csv")) == stable(os.path.join(out2, "metrics.csv"))
    a = open(os.path.join(run_dir, "checkpoint.bin"), "rb").read()
    b = open(os.path.join(out2, "checkpoint.bin"), "rb").read()
    assert a == b


def test_modes_none_and_saflex_differ_only_through_training(tmp_path):
    cfg_a = _cfg(tmp_path, "a.json", train={"mode": "none"},
                 output={"dir": str(tmp_path / "none")})
    cfg_b = _cfg(tmp_path, "b.json", train={"mode": "saflex"},
                 output={"dir": str(tmp_path / "sfx")})
    assert main(["train", "-c", cfg_a]) == 0
    assert main(["train", "-c", cfg_b]) == 0
    pa = load_checkpoint(str(tmp_path / "none" / "checkpoint.bin"))
    pb = load_checkpoint(str(tmp_path / "sfx" / "checkpoint.bin"))
    assert pa.dims == pb.dims
    assert any(not np.array_equal(a, b) for a, b in zip(pa.weights, pb.weights))
    ma = open(tmp_path / "none" / "metrics.csv").read()
    mb = open(tmp_path / "sfx" / "metrics.csv").read()
    assert ma != mb


def test_train_on_raw_images_with_crops(tmp_path):
    import numpy as np
    from saflex.data import save_images_raw

    g = np.random.default_rng(0)
    pixels = g.integers(0, 256, size=(120, 6, 6)).astype(np.uint8)
    labels = (pixels.reshape(120, -1).mean(axis=1) > 127).astype(np.uint8)
    img_path = str(tmp_path / "imgs.bin")
    save_images_raw(pixels, labels, 2, img_path)
    cfg = _cfg(
        tmp_path, "img.json",
        data={"kind": "images", "path": img_path},
        augment={"kind": "crop_flip", "pad": 1},
        train={"epochs": 1, "batch_size": 16, "mode": "saflex", "seed": 0},
        output={"dir": str(tmp_path / "imgrun")},
    )
    assert main(["train", "-c", cfg]) == 0
    assert os.path.exists(tmp_path / "imgrun" / "metrics.csv")


def test_bad_augmenter_kind_exits_two(tmp_path, capsys):
    cfg = _cfg(tmp_path, "bad_aug.json", augment={"kind": "warp"})
    assert main(["train", "-c", cfg]) == 2
    assert "warp" in capsys.readouterr().err


def test_eval_subcommand(tmp_path, capsys):
    cfg = _cfg(tmp_path)
    assert main(["train", "-c", cfg]) == 0
    ck = str(tmp_path / "run" / "checkpoint.bin")
    assert main(["eval", "-c", cfg, "--checkpoint", ck, "--split", "test"]) == 0
    out = capsys.readouterr().out
    assert "accuracy=" in out


def test_sweep_emits_one_run_per_sigma(tmp_path):
    cfg = _cfg(tmp_path)
    assert main(["train", "-c", cfg, "--sweep-sigma", "0.5,1.0"]) == 0
    run_dir = tmp_path / "run"
    subdirs = sorted(p.name for p in run_dir.iterdir())
    assert subdirs == ["sigma_0p5", "sigma_1p0"]
    for sub in subdirs:
        assert (run_dir / sub / "metrics.csv").exists()
        resolved = json.loads((run_dir / sub / "resolved_config.json").read_text())
        assert resolved["augment"]["sigma"] in (0.5, 1.0)


def test_oracle_check_small(capsys):
    rc = main(["oracle-check", "--n", "25", "--seed", "3", "--b", "4", "--k", "3"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "max |objective gap|: 0.0" in out
    assert "score-sum rule" in out


def test_oracle_check_rejects_single_class(capsys):
    rc = main(["oracle-check", "--k", "1"])
    assert rc == 2
    assert "single-class" in capsys.readouterr().err


@pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning", "ignore:invalid value:RuntimeWarning")
def test_divergent_run_exits_three(tmp_path):
    cfg = _cfg(tmp_path, optimizer={"lr": 1e305}, train={"mode": "none", "epochs": 1})
    assert main(["train", "-c", cfg]) == 3


def test_saflex_threads_validated(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SAFLEX_THREADS", "zebra")
    rc = main(["oracle-check", "--n", "1"])
    assert rc == 2


def test_resolve_rejects_non_dict():
    with pytest.raises(ConfigError):
        resolve([1, 2])
