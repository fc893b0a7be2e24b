import json

import pytest

from windrom.cli import main
from windrom.config import build_config, load_config
from windrom.errors import ConfigError


CONFIG = """
[mesh]
block_rows = 1
block_cols = 1
street_width = 0.3
refine_level = 1

[physics]
nu = 0.25
kappa = 1e-3
t_end = 6.0
dt = 1.0
source_center = [0.15, 0.15]
source_radius = 0.1

[parameters]
w_i_range = [0.5, 8.0]
n_train = 7
n_test = 3

[rom]
n_rb = 5

[study]
n_rb_sweep = [1, 3]
timing_reps = 3
snapshot_counts = [4, 7]

[uq]
n_samples = 6
times = [6.0]

[output]
seed = 3
"""


@pytest.fixture()
def config_file(tmp_path):
    path = tmp_path / "pipeline.toml"
    path.write_text(CONFIG + f'\n[output.extra]\n' if False else
                    CONFIG.replace('[output]\nseed = 3',
                                   f'[output]\nseed = 3\ndirectory = "{tmp_path}/out"'))
    return path


def test_config_parses_and_hashes(config_file):
    cfg = load_config(config_file)
    assert cfg["physics"]["nu"] == 0.25
    assert cfg["mesh"]["source"] == "synthetic"
    assert not cfg.two_parameter
    assert len(cfg.training_parameters()) == 7
    assert len(cfg.test_parameters()) == 3
    assert cfg.hash() == load_config(config_file).hash()


def test_config_validation_errors():
    with pytest.raises(ConfigError) as err:
        build_config({"physics": {"nu": -1.0}})
    assert "physics.nu" in str(err.value)
    with pytest.raises(ConfigError) as err:
        build_config({"mesh": {"bogus_key": 1}})
    assert "mesh.bogus_key" in str(err.value)
    with pytest.raises(ConfigError):
        build_config({"nonsense": {}})
    with pytest.raises(ConfigError):
        build_config({"parameters": {"w_i_range": [5.0, 1.0]}})
    with pytest.raises(ConfigError):
        build_config({"rom": {"method": "magic"}})


def test_config_two_parameter_grids():
    cfg = build_config({"parameters": {"w_d_range": [0.0, 360.0],
                                       "n_train": 3, "n_train_direction": 4,
                                       "n_test": 2, "n_test_direction": 2}})
    assert cfg.two_parameter
    train = cfg.training_parameters()
    assert len(train) == 12
    dirs = sorted({p.w_d for p in train})
    assert dirs == [0.0, 90.0, 180.0, 270.0]  # periodic endpoint excluded
    assert len(cfg.test_parameters()) == 4


def test_unknown_subcommand_exit_code():
    assert main([]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["definitely-not-a-command"])
    assert exc.value.code == 2


def test_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[physics]\nnu = -4.0\n")
    assert main(["snapshot", "--config", str(bad)]) == 3
    assert main(["snapshot", "--config", str(tmp_path / "missing.toml")]) == 3


def test_mesh_info_command(tmp_path, capsys):
    from windrom.mesh import save_mesh, synth_urban_mesh

    mesh = synth_urban_mesh(1, 2, 0.2)
    path = tmp_path / "m.txt"
    save_mesh(mesh, path)
    assert main(["mesh-info", str(path)]) == 0
    out = capsys.readouterr().out
    assert f"vertices        {mesh.n_vertices}" in out
    assert "holes           2" in out
    assert "area" in out


def test_snapshot_train_evaluate_pipeline(config_file, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["snapshot", "--config", str(config_file)]) == 0
    snaps = sorted((out / "snapshots").glob("flow-*.bin"))
    assert len(snaps) == 7  # count contract
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "snapshot"
    assert manifest["seed"] == 3
    assert "versions" in manifest and "config_hash" in manifest

    assert main(["train", "--config", str(config_file), "--method", "podi"]) == 0
    art = out / "artifact-podi.bin"
    assert art.exists()
    first = art.read_bytes()

    # idempotence: retraining writes byte-identical artifacts
    assert main(["train", "--config", str(config_file), "--method", "podi"]) == 0
    assert art.read_bytes() == first

    assert main(["evaluate", "--config", str(config_file), "--w-i", "4.0",
                 "--t", "6.0", "--field", "concentration"]) == 0
    conc = out / "conc-wi4.bin"
    assert conc.exists()
    assert (out / "conc-wi4.csv").exists()

    from windrom.containers import read_container

    kind, meta, arrays = read_container(conc, expect_kind="conc-series")
    assert arrays["fields"].shape[1] > 0
    assert meta["w_i"] == 4.0


def test_train_podg_and_wind_evaluate(config_file, tmp_path):
    out = tmp_path / "out"
    assert main(["train", "--config", str(config_file), "--method", "podg",
                 "--n-rb", "4"]) == 0
    assert (out / "artifact-podg.bin").exists()
    # the evaluate path serves PODI artifacts (the online what-if model)
    assert main(["train", "--config", str(config_file), "--method", "podi"]) == 0
    assert main(["evaluate", "--config", str(config_file), "--w-i", "2.5",
                 "--field", "wind", "--plot"]) == 0
    assert (out / "wind-wi2.5.bin").exists()
    assert (out / "wind-wi2.5.png").exists()


def test_bench_compare_command(config_file, tmp_path):
    out = tmp_path / "out"
    assert main(["bench", "compare", "--config", str(config_file)]) == 0
    table = (out / "comparison.tsv").read_text().splitlines()
    header = [l for l in table if not l.startswith("#")][0].split("\t")
    assert header[:2] == ["method", "n_rb"]
    rows = [l.split("\t") for l in table if not l.startswith("#")][1:]
    for row in rows:
        vals = dict(zip(header, row))
        if vals["err_min"] != "nan":
            assert float(vals["err_min"]) <= float(vals["err_mean"]) <= float(vals["err_max"])
    assert (out / "comparison-error.png").exists()
    assert (out / "comparison-raw.json").exists()


def test_uq_command(config_file, tmp_path):
    out = tmp_path / "out"
    assert main(["train", "--config", str(config_file), "--method", "podi"]) == 0
    assert main(["uq", "--config", str(config_file)]) == 0
    for stat in ("min", "mean", "max"):
        assert (out / f"uq-{stat}-t6.bin").exists()
    assert (out / "uq-histogram.csv").exists()
    assert (out / "uq-mean-t6.png").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "uq"
    assert manifest["n_failed"] == 0
    assert manifest["seed"] == 3
