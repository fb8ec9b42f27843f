import csv
import os

import numpy as np
import pytest

from ddmr.cli import main

TINY_CONFIG = """
[problem]
kind = diffusion
forcing = 100.0

[noise]
kind = colored
corr_length = 0.25
n_global_modes = 20
kl_grid = 16

[discretization]
mesh_n = 8
sx = 2
sy = 2

[reduction]
n_local_modes = 3
m_interface = 3
m_interior = 6
poly_order = 2
k_solution = 30
k_matrix = 120

[run]
seed = 0
"""


def read_csv(path):
    with open(path) as fh:
        comment = fh.readline()
        rows = list(csv.reader(fh))
    return comment, rows[0], rows[1:]


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    cfg = d / "run.cfg"
    cfg.write_text(TINY_CONFIG)
    model = d / "model.bin"
    assert main(["train", str(cfg), "--out", str(model), "--quiet"]) == 0
    return d, cfg, model


def test_train_outputs(trained):
    d, cfg, model = trained
    assert model.exists()
    comment, header, rows = read_csv(str(model) + ".costs.csv")
    assert comment.startswith("# fingerprint=") and "seed=0" in comment
    assert header == ["stage", "wall_seconds", "fe_units"]
    stages = [r[0] for r in rows]
    for expected in ("kl_expansion", "fe_solves", "svd_interfaces",
                     "svd_subdomains", "training_and_surrogate"):
        assert expected in stages


def test_train_invalid_config_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[discretization]\nmesh_n = 8\nsx = 3\n")
    assert main(["train", str(bad), "--out", str(tmp_path / "m.bin")]) == 2
    assert "divide" in capsys.readouterr().err


def test_train_retrain_byte_identical(trained, tmp_path):
    d, cfg, model = trained
    again = tmp_path / "again.bin"
    assert main(["train", str(cfg), "--out", str(again), "--quiet"]) == 0
    assert model.read_bytes() == again.read_bytes()


def test_solve_csv_schema_and_determinism(trained, tmp_path):
    d, cfg, model = trained
    out1, out2 = tmp_path / "s1.csv", tmp_path / "s2.csv"
    rec = tmp_path / "fields"
    args = ["solve", "--model", str(model), "--samples", "7", "--seed", "5"]
    assert main(args + ["--out", str(out1), "--reconstruct", str(rec)]) == 0
    assert main(args + ["--out", str(out2)]) == 0

    comment, header, rows = read_csv(out1)
    assert header == ["sample", "t_project", "t_eval", "t_schur",
                      "t_solve", "t_recover", "clamped"]
    assert len(rows) == 7
    assert [r[0] for r in rows] == [str(k) for k in range(7)]

    _, _, rows2 = read_csv(out2)
    # timing columns differ run to run; everything else must not
    stable = [(r[0], r[6]) for r in rows]
    assert stable == [(r[0], r[6]) for r in rows2]

    dumps = sorted(os.listdir(rec))
    assert dumps == [f"sample_{k:06d}.npy" for k in range(7)]
    u = np.load(rec / dumps[0])
    assert u.shape == (81,)  # (8+1)^2 nodes


def test_solve_reconstruct_deterministic(trained, tmp_path):
    d, cfg, model = trained
    r1, r2 = tmp_path / "f1", tmp_path / "f2"
    for r in (r1, r2):
        assert main(["solve", "--model", str(model), "--samples", "3",
                     "--seed", "5", "--out", str(tmp_path / "x.csv"),
                     "--reconstruct", str(r)]) == 0
    for name in os.listdir(r1):
        assert (r1 / name).read_bytes() == (r2 / name).read_bytes()


def test_solve_missing_model_exit_code(tmp_path, capsys):
    assert main(["solve", "--model", str(tmp_path / "nope.bin"),
                 "--samples", "1", "--out", str(tmp_path / "o.csv")]) == 1


@pytest.mark.parametrize("knob", ["ms", "msj", "ns", "p"])
def test_validate_sweeps(trained, tmp_path, knob):
    d, cfg, model = trained
    out = tmp_path / f"{knob}.csv"
    assert main(["validate", "--model", str(model), "--samples", "20",
                 "--seed", "3", "--sweep", knob, "--out", str(out)]) == 0
    comment, header, rows = read_csv(out)
    assert header == ["knob", "value", "mean_rel_l2", "max_rel_l2"]
    assert all(r[0] == knob for r in rows)
    values = [int(r[1]) for r in rows]
    assert values == sorted(values)
    errs = [float(r[2]) for r in rows]
    assert all(np.isfinite(e) and e > 0 for e in errs)
    if knob in ("ms", "msj"):
        # truncation sweeps approach the trained model from below, so each
        # step should not increase the error beyond slack
        for a, b in zip(errs, errs[1:]):
            assert b <= 1.2 * a


def test_validate_endpoint_equals_reference(trained, tmp_path):
    # the no-op endpoint of a truncation sweep reproduces the full model error
    d, cfg, model = trained
    out = tmp_path / "ms.csv"
    main(["validate", "--model", str(model), "--samples", "10",
          "--seed", "3", "--sweep", "ms", "--out", str(out)])
    _, _, rows = read_csv(out)
    from ddmr import pipeline
    m = pipeline.load_model(model)
    rng = np.random.default_rng(3)
    errs = []
    for _ in range(10):
        y = pipeline.draw_global(m.config, rng)
        ref = pipeline.solve_reference(m, y)
        u = pipeline.reconstruct(m, pipeline.online_solve(m, y))
        errs.append(np.linalg.norm(u - ref) / np.linalg.norm(ref))
    # the CSV stores rounded decimals, so compare at formatting precision
    assert float(rows[-1][2]) == pytest.approx(np.mean(errs), rel=1e-5)


def test_validate_rejects_unknown_knob(trained, tmp_path):
    d, cfg, model = trained
    with pytest.raises(SystemExit):
        main(["validate", "--model", str(model), "--sweep", "zz",
              "--out", str(tmp_path / "o.csv")])


def test_bench_output(trained, tmp_path):
    d, cfg, model = trained
    out = tmp_path / "bench.csv"
    assert main(["bench", "--model", str(model), "--samples", "10",
                 "--out", str(out)]) == 0
    comment, header, rows = read_csv(out)
    assert header == ["metric", "seconds", "fe_units"]
    metrics = [r[0] for r in rows]
    assert metrics[0] == "fe_solve_unit"
    assert "median_online_total" in metrics


def test_threads_env_var_validation(trained, tmp_path, capsys, monkeypatch):
    d, cfg, model = trained
    monkeypatch.setenv("DDMR_THREADS", "lots")
    assert main(["bench", "--model", str(model), "--samples", "1",
                 "--out", str(tmp_path / "b.csv")]) == 2
    monkeypatch.setenv("DDMR_THREADS", "2")
    assert main(["bench", "--model", str(model), "--samples", "1",
                 "--out", str(tmp_path / "b.csv")]) == 0
