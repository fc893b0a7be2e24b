import numpy as np
import pytest

from windrom.bench import (StudyConfig, measure_speedup, relative_l2_error,
                           run_comparison, run_data_study, run_extrapolation_study,
                           time_action)
from windrom.errors import WindromError
from windrom.mesh import synth_urban_mesh


@pytest.fixture(scope="module")
def tiny_config():
    mesh = synth_urban_mesh(1, 1, 0.3, refine_level=1)
    return StudyConfig(mesh=mesh, nu=0.3, w_i_range=(0.5, 8.0),
                       n_train=8, n_test=4, n_rb_sweep=(1, 2, 4),
                       n_deim=6, timing_reps=3)


# -- metrics -------------------------------------------------------------------

def test_relative_error_examples():
    u = np.array([3.0, 4.0])
    assert relative_l2_error(u, u) == 0.0
    assert relative_l2_error(u, np.zeros(2)) == 1.0
    assert relative_l2_error(u, 1.1 * u) == pytest.approx(0.1, rel=1e-12)
    with pytest.raises(WindromError):
        relative_l2_error(np.zeros(2), u)


def test_relative_error_metric_weighted():
    import scipy.sparse as sp

    u = np.array([1.0, 0.0])
    v = np.array([0.0, 1.0])
    M = sp.diags([4.0, 1.0]).tocsr()
    assert relative_l2_error(u, u - v, M) == pytest.approx(0.5)


def test_speedup_self_comparison():
    def work():
        np.linalg.norm(np.arange(500.0))

    s = measure_speedup(work, work, reps=7)
    assert 0.5 <= s <= 2.0
    with pytest.raises(ValueError):
        measure_speedup(work, work, reps=2)


def test_time_action_batches_fast_actions():
    t = time_action(lambda: None, reps=3)
    assert t >= 0.0


# -- studies --------------------------------------------------------------------

@pytest.fixture(scope="module")
def comparison_report(tiny_config):
    return run_comparison(tiny_config)


def test_comparison_report_structure(comparison_report, tiny_config):
    rep = comparison_report
    assert {r["method"] for r in rep.rows} == {"podg", "podi"}
    assert {r["n_rb"] for r in rep.rows} == {1, 2, 4}
    for r in rep.rows:
        if r["err_min"] is not None:
            assert r["err_min"] <= r["err_mean"] <= r["err_max"]
        if r["speedup_min"] is not None:
            assert r["speedup_min"] <= r["speedup_mean"] <= r["speedup_max"]
    assert rep.metadata["mesh_hash"] == tiny_config.mesh.content_hash()
    assert "snapshot_hash" in rep.metadata


def test_comparison_raw_tables_match_stats(comparison_report):
    rep = comparison_report
    row = rep.select(method="podi", n_rb=4)[0]
    raw = [e for e in rep.raw["errors"]["podi/4"] if e is not None]
    assert row["err_mean"] == pytest.approx(np.mean(raw))
    assert row["err_min"] == pytest.approx(np.min(raw))


def test_comparison_determinism(tiny_config, comparison_report):
    rep2 = run_comparison(tiny_config)
    assert rep2.raw["errors"] == comparison_report.raw["errors"]


def test_single_method_config(tiny_config):
    cfg = StudyConfig(mesh=tiny_config.mesh, nu=tiny_config.nu,
                      w_i_range=tiny_config.w_i_range, n_train=6, n_test=3,
                      n_rb_sweep=(2,), n_deim=4, methods=("podi",), timing_reps=3)
    rep = run_comparison(cfg)
    assert {r["method"] for r in rep.rows} == {"podi"}


def test_shared_snapshot_hash(tiny_config):
    """Both methods' artifacts in one study reference the same snapshot set."""
    from windrom.bench import _train_all, generate_snapshots, snapshot_sets
    from windrom.ins import InsProblem

    problem = InsProblem(tiny_config.mesh, tiny_config.nu)
    params = tiny_config.training_parameters()
    U, P = generate_snapshots(problem, params)
    ss_u, ss_p = snapshot_sets(problem, params, U, P)
    artifacts = _train_all(tiny_config, problem, ss_u, ss_p, sweep=[2])
    assert (artifacts["podi", 2].basis.snapshot_hash
            == artifacts["podg", 2].snapshot_hash == ss_u.content_hash())


def test_data_study_trends_and_degenerate(tiny_config):
    rep = run_data_study(tiny_config, [2, 4, 8])
    podi = {r["n_s"]: r for r in rep.rows if r["method"] == "podi"}
    assert podi[2]["undersampled"]
    assert not podi[8]["undersampled"]
    assert np.isfinite(podi[2]["err_mean"])
    assert podi[8]["err_mean"] < podi[2]["err_mean"]
    with pytest.raises(ValueError):
        run_data_study(tiny_config, [8, 4])


def test_extrapolation_study_marks_regions(tiny_config):
    rep = run_extrapolation_study(tiny_config, (0.5, 4.0), (0.5, 8.0))
    rows = rep.select(method="podi", n_rb=4)
    inside = [r for r in rows if r["inside_training"]]
    outside = [r for r in rows if not r["inside_training"]]
    assert inside and outside
    max_in = max(r["max_abs_err"] for r in inside)
    min_out = min(r["max_abs_err"] for r in outside)
    assert min_out > max_in
    with pytest.raises(ValueError):
        run_extrapolation_study(tiny_config, (0.1, 4.0), (0.5, 8.0))


def test_report_table_and_raw_roundtrip(tmp_path, comparison_report):
    table = tmp_path / "report.tsv"
    comparison_report.write_table(table)
    lines = table.read_text().splitlines()
    header = [l for l in lines if not l.startswith("#")][0]
    assert header.split("\t") == comparison_report.columns
    data_rows = [l for l in lines if not l.startswith("#")][1:]
    assert len(data_rows) == len(comparison_report.rows)
    raw = tmp_path / "report.json"
    comparison_report.write_raw(raw)
    import json

    blob = json.loads(raw.read_text())
    assert blob["study"] == "comparison"
    assert blob["rows"]


def test_plots_render(tmp_path, comparison_report, tiny_config):
    from windrom.plots import (plot_error_curves, plot_eigenvalue_decay,
                               plot_field, plot_speedup_curves)

    plot_error_curves(comparison_report, tmp_path / "err.png")
    plot_speedup_curves(comparison_report, tmp_path / "spd.png")
    plot_eigenvalue_decay([np.array([1.0, 0.1, 0.01])], ["demo"], tmp_path / "eig.png")
    mesh = tiny_config.mesh
    plot_field(mesh, np.linspace(0, 1, mesh.n_vertices), tmp_path / "field.png")
    for name in ("err.png", "spd.png", "eig.png", "field.png"):
        assert (tmp_path / name).stat().st_size > 1000


def test_config_validation():
    mesh = synth_urban_mesh(1, 1, 0.3)
    with pytest.raises(ValueError):
        StudyConfig(mesh=mesh, nu=0.1, w_i_range=(2.0, 1.0))
    with pytest.raises(ValueError):
        StudyConfig(mesh=mesh, nu=0.1, w_i_range=(1.0, 2.0), n_rb_sweep=())
    with pytest.raises(ValueError):
        StudyConfig(mesh=mesh, nu=0.1, w_i_range=(1.0, 2.0), methods=())


def test_test_grid_disjoint_from_any_training_grid(tiny_config):
    for n in (5, 8, 13, 25, 50):
        train = {p.w_i for p in tiny_config.training_parameters(n=n)}
        test = {p.w_i for p in tiny_config.test_parameters()}
        assert not train & test
