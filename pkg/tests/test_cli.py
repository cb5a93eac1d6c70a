import json

import numpy as np
import pytest

from tracemap.cli import main


def run(argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def laplace_run(tmp_path_factory):
    """gen + ls-train once; several tests share the artifacts."""
    root = tmp_path_factory.mktemp("laplace")
    data = root / "data"
    model = root / "model.json"
    assert run(
        ["gen", "--equation", "laplace", "--domain", "square", "--n", 80,
         "--samples", 150, "--seed", 42, "--out", data]
    ) == 0
    assert run(
        ["train", "--data", data, "--method", "ls", "--out", model,
         "--log", root / "train_log.csv"]
    ) == 0
    return root, data, model


class TestGen:
    def test_outputs_and_determinism(self, laplace_run, tmp_path, capsys):
        _, data, _ = laplace_run
        assert (data / "dataset.csv").exists()
        sidecar = json.loads((data / "dataset.json").read_text())
        assert sidecar["seed"] == 42
        assert sidecar["normalization"] == "laplace_mode"

        again = tmp_path / "again"
        run(["gen", "--equation", "laplace", "--domain", "square", "--n", 80,
             "--samples", 150, "--seed", 42, "--out", again])
        assert (again / "dataset.csv").read_bytes() == (data / "dataset.csv").read_bytes()

    def test_helmholtz_sidecar_notes_scale_only(self, tmp_path):
        out = tmp_path / "h"
        assert run(
            ["gen", "--equation", "helmholtz", "--k", 10, "--domain", "square",
             "--n", 40, "--samples", 20, "--seed", 1, "--out", out]
        ) == 0
        sidecar = json.loads((out / "dataset.json").read_text())
        assert sidecar["normalization"] == "scale_only"
        assert sidecar["kernel"]["k"] == 10.0

    def test_missing_out_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            run(["gen", "--equation", "laplace", "--samples", 5])
        assert exc.value.code != 0

    def test_invalid_config_exits_nonzero(self, tmp_path):
        code = run(
            ["gen", "--equation", "laplace", "--domain", "square", "--n", 40,
             "--samples", 5, "--seed", 0, "--box-lo", 0.0, "--box-hi", 1.0,
             "--out", tmp_path / "bad"]
        )
        assert code != 0


class TestTrain:
    def test_ls_model_written_with_log(self, laplace_run):
        root, _, model = laplace_run
        payload = json.loads(model.read_text())
        assert payload["layers"][0]["shape"] == [80, 80]
        assert (root / "train_log.csv").read_text().startswith("epoch,mean_loss,best_loss")

    def test_adam_deterministic_model_bytes(self, laplace_run, tmp_path):
        _, data, _ = laplace_run
        m1, m2 = tmp_path / "m1.json", tmp_path / "m2.json"
        args = ["train", "--data", data, "--method", "adam", "--epochs", 30,
                "--lr", 1e-3, "--batch", 50, "--seed", 5]
        assert run(args + ["--out", m1]) == 0
        assert run(args + ["--out", m2]) == 0
        assert m1.read_bytes() == m2.read_bytes()

    def test_mixed_training_layout_recorded(self, laplace_run, tmp_path):
        _, data, _ = laplace_run
        model = tmp_path / "mixed.json"
        assert run(
            ["train", "--data", data, "--method", "ls", "--dirichlet-edges", "1,3",
             "--out", model]
        ) == 0
        payload = json.loads(model.read_text())
        assert payload["input_layout"][0]["trace"] == "g"
        assert payload["input_layout"][1]["trace"] == "h"
        assert payload["output_layout"][0]["trace"] == "h"


class TestEvalSolve:
    def test_eval_laplace_summary(self, laplace_run, tmp_path):
        _, _, model = laplace_run
        out = tmp_path / "eval"
        assert run(
            ["eval", "--model", model, "--suite", "laplace", "--n", 80,
             "--seed", 7, "--out", out]
        ) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert set(summary) == {"u1", "u2", "u3", "u4", "u5"}
        for fam in summary.values():
            assert fam["mean_total_error"] < 0.1
        case_files = list(out.glob("case_*.csv"))
        assert len(case_files) == 50

    def test_solve_roundtrip_field_csv(self, laplace_run, tmp_path):
        _, _, model = laplace_run
        g_file = tmp_path / "g.csv"
        from tracemap.geometry import DomainSpec, make_boundary_grid

        grid = make_boundary_grid(DomainSpec.unit_square(), 80)
        g = grid.points[:, 0] + grid.points[:, 1]
        g_file.write_text("\n".join(repr(float(v)) for v in g))
        out = tmp_path / "field.csv"
        assert run(
            ["solve", "--model", model, "--grid", "square80", "--g", g_file,
             "--margin", 0.05, "--out", out]
        ) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "x,y,u_pred_re,u_pred_im,u_exact,abs_err,flag"
        # u = x + y at the first margin-grid point should be close
        first = lines[1].split(",")
        x, y, u = float(first[0]), float(first[1]), float(first[2])
        assert u == pytest.approx(x + y, abs=5e-2)

    def test_solve_poisson_with_vertex_source_file(self, laplace_run, tmp_path):
        _, _, model = laplace_run
        from tracemap.geometry import DomainSpec, make_boundary_grid, triangulate_square

        grid = make_boundary_grid(DomainSpec.unit_square(), 80)
        case_u = lambda p: (p[:, 0] ** 2 + p[:, 1] ** 2) / 4.0
        g_file = tmp_path / "g.csv"
        g_file.write_text("\n".join(repr(float(v)) for v in case_u(grid.points)))
        mesh = triangulate_square(0.1)
        src = tmp_path / "f.csv"
        src.write_text("\n".join("1.0" for _ in range(len(mesh.vertices))))
        out = tmp_path / "field.csv"
        assert run(
            ["solve", "--model", model, "--grid", "square80", "--g", g_file,
             "--source", src, "--mesh-h", 0.1, "--margin", 0.1, "--out", out]
        ) == 0
        rows = [r.split(",") for r in out.read_text().splitlines()[1:]]
        pred = np.array([float(r[2]) for r in rows])
        pts = np.array([[float(r[0]), float(r[1])] for r in rows])
        exact = case_u(pts)
        assert np.linalg.norm(pred - exact) / np.linalg.norm(exact) < 5e-2

    def test_solve_mixed_from_files(self, laplace_run, tmp_path):
        _, data, _ = laplace_run
        model = tmp_path / "mixed.json"
        assert run(
            ["train", "--data", data, "--method", "ls", "--dirichlet-edges", "1",
             "--out", model]
        ) == 0
        from tracemap.geometry import DomainSpec, make_boundary_grid

        grid = make_boundary_grid(DomainSpec.unit_square(), 80)
        g = grid.points[:, 0] + grid.points[:, 1]   # u = x + y
        h = grid.normals.sum(axis=1)
        g_file, h_file = tmp_path / "g.csv", tmp_path / "h.csv"
        g_file.write_text("\n".join(repr(float(v)) for v in g))
        h_file.write_text("\n".join(repr(float(v)) for v in h))
        out = tmp_path / "field.csv"
        assert run(
            ["solve", "--model", model, "--grid", "square80", "--g", g_file,
             "--h", h_file, "--dirichlet-edges", "1", "--margin", 0.05, "--out", out]
        ) == 0
        rows = [r.split(",") for r in out.read_text().splitlines()[1:]]
        pred = np.array([float(r[2]) for r in rows])
        pts = np.array([[float(r[0]), float(r[1])] for r in rows])
        assert np.linalg.norm(pred - pts.sum(axis=1)) / np.linalg.norm(pts.sum(axis=1)) < 5e-2

    def test_missing_artifact_exits_nonzero(self, tmp_path):
        code = run(
            ["eval", "--model", tmp_path / "nope.json", "--suite", "laplace",
             "--out", tmp_path / "out"]
        )
        assert code != 0


class TestQuadbench:
    def test_report_schema_and_threshold(self, tmp_path, capsys):
        out = tmp_path / "bench.csv"
        code = run(["quadbench", "--h", 0.02, "--fail-above", 5e-4, "--out", out])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "integrand,h,computed,reference,rel_error"
        assert len(lines) == 3
        rels = [float(line.split(",")[-1]) for line in lines[1:]]
        assert max(rels) <= 5e-4

    def test_fail_above_gate(self, tmp_path):
        code = run(["quadbench", "--h", 0.2, "--fail-above", 1e-9])
        assert code == 1
