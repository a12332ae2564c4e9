"""End-to-end tests of the command-line driver."""

import json

import numpy as np
import pytest

from fiberwalk.cli import main
from fiberwalk.lattice import in_kernel, load_basis
from fiberwalk.models import build_design_matrix, beta_model


def _write(path, text):
    path.write_text(text)
    return str(path)


@pytest.fixture
def table22(tmp_path):
    return _write(tmp_path / "table.csv", "dims=2x2\n3,1\n1,3\n")


@pytest.fixture
def train_cfg(tmp_path, table22):
    return _write(
        tmp_path / "train.cfg",
        "\n".join(
            [
                "# tiny training run",
                "model.family=independence",
                "model.shape=2x2",
                f"data.table={table22}",
                "mdp.steps_per_episode=20",
                "train.episodes=2",
                "train.hidden=8",
                "seed=5",
            ]
        )
        + "\n",
    )


class TestEnumerate:
    def test_two_point_fiber(self, tmp_path):
        table = _write(tmp_path / "t.csv", "dims=2x2\n1,0\n0,1\n")
        cfg = _write(
            tmp_path / "enum.cfg",
            f"model.family=independence\nmodel.shape=2x2\ndata.table={table}\n",
        )
        out = tmp_path / "out"
        assert main(["enumerate", "--config", cfg, "--out", str(out)]) == 0
        lines = (out / "fiber.csv").read_text().splitlines()
        assert lines[0] == "0_0,0_1,1_0,1_1"
        rows = lines[1:]
        assert rows == sorted(rows) and len(set(rows)) == len(rows) == 2

    def test_cap_exceeded_exit_4(self, tmp_path):
        table = _write(tmp_path / "t.csv", "dims=3x3\n" + "4,4,4\n" * 3)
        cfg = _write(
            tmp_path / "enum.cfg",
            f"model.family=independence\nmodel.shape=3x3\ndata.table={table}\n"
            "enumerate.cap=3\n",
        )
        assert main(["enumerate", "--config", cfg, "--out", str(tmp_path / "o")]) == 4


class TestValidation:
    def test_invalid_table_header_exit_2(self, tmp_path, capsys):
        table = _write(tmp_path / "bad.csv", "1,0\n0,1\n")
        cfg = _write(
            tmp_path / "c.cfg",
            f"model.family=independence\nmodel.shape=2x2\ndata.table={table}\n",
        )
        code = main(["enumerate", "--config", cfg, "--out", str(tmp_path / "o")])
        assert code == 2
        assert "dims=" in capsys.readouterr().err

    def test_missing_config_key_exit_2(self, tmp_path):
        cfg = _write(tmp_path / "c.cfg", "model.family=independence\n")
        assert main(["enumerate", "--config", cfg, "--out", str(tmp_path / "o")]) == 2

    def test_dims_mismatch_exit_2(self, tmp_path):
        table = _write(tmp_path / "t.csv", "dims=2x2\n1,0\n0,1\n")
        cfg = _write(
            tmp_path / "c.cfg",
            f"model.family=independence\nmodel.shape=3x3\ndata.table={table}\n",
        )
        assert main(["enumerate", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


class TestTrain:
    def test_writes_all_artifacts(self, tmp_path, train_cfg):
        out = tmp_path / "run"
        assert main(["train", "--config", train_cfg, "--out", str(out)]) == 0
        for name in ("basis.txt", "policy.txt", "trainlog.csv", "manifest.json"):
            assert (out / name).exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "train"
        assert set(manifest["outputs"]) == {"basis.txt", "policy.txt", "trainlog.csv"}
        assert manifest["seed"] == 5

    def test_rerun_reproduces_checksums(self, tmp_path, train_cfg):
        sums = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["train", "--config", train_cfg, "--out", str(out)]) == 0
            sums.append(json.loads((out / "manifest.json").read_text())["outputs"])
        assert sums[0] == sums[1]

    def test_seed_flag_overrides_config(self, tmp_path, train_cfg):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        main(["train", "--config", train_cfg, "--out", str(out_a)])
        main(["train", "--config", train_cfg, "--out", str(out_b), "--seed", "99"])
        sum_a = json.loads((out_a / "manifest.json").read_text())["outputs"]
        sum_b = json.loads((out_b / "manifest.json").read_text())["outputs"]
        assert sum_a["policy.txt"] != sum_b["policy.txt"]


class TestSampleAndTest:
    def _trained(self, tmp_path, train_cfg):
        out = tmp_path / "trained"
        assert main(["train", "--config", train_cfg, "--out", str(out)]) == 0
        return out

    def test_sample_writes_points_with_statistics(self, tmp_path, train_cfg, table22):
        trained = self._trained(tmp_path, train_cfg)
        cfg = _write(
            tmp_path / "sample.cfg",
            "\n".join(
                [
                    "model.family=independence",
                    "model.shape=2x2",
                    f"data.table={table22}",
                    f"policy.file={trained / 'policy.txt'}",
                    f"policy.basis={trained / 'basis.txt'}",
                    "sample.steps=50",
                    "seed=3",
                ]
            ),
        )
        out = tmp_path / "s"
        assert main(["sample", "--config", cfg, "--out", str(out)]) == 0
        lines = (out / "sample.csv").read_text().splitlines()
        assert lines[0].endswith(",statistic")
        assert len(lines) == 52

    def test_single_draw_pvalue_support(self, tmp_path, train_cfg, table22):
        trained = self._trained(tmp_path, train_cfg)
        cfg = _write(
            tmp_path / "test.cfg",
            "\n".join(
                [
                    "model.family=independence",
                    "model.shape=2x2",
                    f"data.table={table22}",
                    f"policy.file={trained / 'policy.txt'}",
                    f"policy.basis={trained / 'basis.txt'}",
                    "test.chains=1",
                    "test.chain_length=1",
                    "seed=2",
                ]
            ),
        )
        out = tmp_path / "t"
        assert main(["test", "--config", cfg, "--out", str(out)]) == 0
        row = (out / "pvalues.csv").read_text().splitlines()[1]
        p = float(row.split(",")[1])
        assert p in (0.5, 1.0)

    def test_checksum_mismatch_exit_2(self, tmp_path, train_cfg, table22, capsys):
        trained = self._trained(tmp_path, train_cfg)
        # Corrupt the basis file after training.
        basis_path = trained / "basis.txt"
        basis_path.write_text(basis_path.read_text() + "\n")
        cfg = _write(
            tmp_path / "test.cfg",
            "\n".join(
                [
                    "model.family=independence",
                    "model.shape=2x2",
                    f"data.table={table22}",
                    f"policy.file={trained / 'policy.txt'}",
                    f"policy.basis={basis_path}",
                    "test.chains=1",
                    "test.chain_length=1",
                ]
            ),
        )
        assert main(["test", "--config", cfg, "--out", str(tmp_path / "t")]) == 2
        assert "checksum" in capsys.readouterr().err


class TestLift:
    def test_lifted_moves_live_in_parent_kernel(self, tmp_path):
        edges = []
        for group in ([1, 2, 3, 4], [5, 6, 7, 8]):  # 1-based in the file
            for i, a in enumerate(group):
                for b in group[i + 1:]:
                    edges.append(f"{a} {b}")
        graph = _write(tmp_path / "g.txt", "\n".join(edges) + "\n")
        cfg = _write(
            tmp_path / "lift.cfg",
            "\n".join(
                [
                    "model.family=beta_model",
                    "model.nodes=8",
                    f"data.graph={graph}",
                    "decompose.strategy=connected_components",
                ]
            ),
        )
        out = tmp_path / "lifted"
        assert main(["lift", "--config", cfg, "--out", str(out)]) == 0
        basis = load_basis(out / "lifted_basis.txt")
        parent = build_design_matrix(beta_model(8))
        assert basis.count == 4  # two 4-cliques, kernel dimension 2 each
        for vec in basis.vectors:
            assert in_kernel(parent, vec)


class TestStructuralZeros:
    def test_sampled_points_keep_exact_zeros(self, tmp_path):
        table = _write(
            tmp_path / "t.csv",
            "dims=3x3\n0,2,1\n2,1,1\n1,1,2\n",
        )
        lines_common = [
            "model.family=independence",
            "model.shape=3x3",
            "model.structural_zeros=0",
            f"data.table={table}",
        ]
        cfg = _write(
            tmp_path / "train.cfg",
            "\n".join(
                lines_common
                + ["mdp.steps_per_episode=20", "train.episodes=2", "train.hidden=8"]
            ),
        )
        trained = tmp_path / "trained"
        assert main(["train", "--config", cfg, "--out", str(trained)]) == 0
        sample_cfg = _write(
            tmp_path / "sample.cfg",
            "\n".join(
                lines_common
                + [
                    f"policy.file={trained / 'policy.txt'}",
                    f"policy.basis={trained / 'basis.txt'}",
                    "sample.steps=40",
                ]
            ),
        )
        out = tmp_path / "s"
        assert main(["sample", "--config", sample_cfg, "--out", str(out)]) == 0
        lines = (out / "sample.csv").read_text().splitlines()
        # The reduced space has no column for the zero cell at all.
        assert lines[0].split(",")[0] == "0_1"
        assert "0_0" not in lines[0]
        assert len(lines) == 42
