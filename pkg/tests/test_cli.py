"""End-to-end tests of the pva command line."""

import csv
import io
import json

import numpy as np
import pytest

from src.cli import EXIT_INVALID, EXIT_IO, EXIT_OK, CommandConfig, main
from src.corrkit import CorrelationMatrix
from src.dataio import load_correlation, write_correlation
from src.simgen import sample_wishart_corr


def _write_csv(path, names, matrix):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(names)
        for row in matrix:
            writer.writerow([repr(float(v)) for v in row])
    return str(path)


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def continuous_csv(tmp_path):
    rng = np.random.default_rng(21)
    sigma = sample_wishart_corr(5, np.random.default_rng(22)).values
    data = rng.multivariate_normal(np.zeros(5), sigma, size=150)
    return _write_csv(tmp_path / "cont.csv", ["a", "b", "c", "d", "e"], data)


@pytest.fixture
def mixed_csv(tmp_path):
    rng = np.random.default_rng(23)
    z = rng.multivariate_normal(np.zeros(4), 0.5 * np.eye(4) + 0.5, size=200)
    data = np.column_stack([
        z[:, 0],
        z[:, 1] * 3.0,
        1.0 + (z[:, 2] > -0.5) + (z[:, 2] > 0.5),
        1.0 + (z[:, 3] > 0.0),
    ])
    return _write_csv(tmp_path / "mixed.csv", ["grip", "speed", "stage", "walk"], data)


class TestCorr:

    def test_identical_pair(self, tmp_path, capsys):
        x = np.random.default_rng(24).normal(size=40)
        path = _write_csv(tmp_path / "pair.csv", ["x", "y"], np.column_stack([x, x]))
        out = tmp_path / "corr.csv"
        assert main(["corr", "--input", path, "--method", "pearson", "--out", str(out)]) == EXIT_OK
        matrix, names = load_correlation(out)
        assert names == ["x", "y"]
        assert matrix.values[0, 1] == pytest.approx(1.0, abs=1e-6)
        assert matrix.repaired

    def test_polychoric_on_continuous_data(self, continuous_csv, capsys):
        assert main(["corr", "--input", continuous_csv, "--method", "polychoric"]) == EXIT_INVALID
        err = capsys.readouterr().err
        assert "error: polychoric requires at least one ordinal column" in err

    def test_copula_monotone_copy_is_byte_identical(self, tmp_path, continuous_csv, capsys):
        data = np.loadtxt(continuous_csv, delimiter=",", skiprows=1)
        warped = np.column_stack([np.exp(data[:, 0]), data[:, 1] ** 3, data[:, 2:] + 10.0])
        copy = _write_csv(tmp_path / "warped.csv", ["a", "b", "c", "d", "e"], warped)
        assert main(["corr", "--input", continuous_csv, "--method", "copula"]) == EXIT_OK
        first = capsys.readouterr().out
        assert main(["corr", "--input", copy, "--method", "copula"]) == EXIT_OK
        assert capsys.readouterr().out == first
        assert first.startswith("# family: copula\n")

    def test_json_output(self, continuous_csv, capsys):
        assert main(["corr", "--input", continuous_csv, "--method", "spearman", "--json"]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["family"] == "spearman"
        assert np.array(payload["matrix"]).shape == (5, 5)

    def test_missing_input_file(self, tmp_path, capsys):
        assert main(["corr", "--input", str(tmp_path / "nope.csv")]) == EXIT_IO
        assert capsys.readouterr().err.startswith("error:")


class TestSelect:

    def test_all_but_one(self, continuous_csv, capsys):
        assert main(["select", "--input", continuous_csv, "--q", "4"]) == EXIT_OK
        rows = _rows(capsys.readouterr().out)
        assert [r["rank"] for r in rows] == ["1", "2", "3", "4"]
        traces = [float(r["residual_trace"]) for r in rows]
        assert all(b < a for a, b in zip(traces, traces[1:]))

    def test_deterministic(self, continuous_csv, capsys):
        main(["select", "--input", continuous_csv, "--q", "3", "--method", "spearman"])
        first = capsys.readouterr().out
        main(["select", "--input", continuous_csv, "--q", "3", "--method", "spearman"])
        assert capsys.readouterr().out == first

    def test_all_methods_table(self, mixed_csv, capsys):
        assert main(["select", "--input", mixed_csv, "--q", "2", "--all-methods"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "name,pearson,spearman,copula,polychoric"
        assert len(lines) >= 3

    def test_needs_q(self, continuous_csv, capsys):
        assert main(["select", "--input", continuous_csv]) == EXIT_INVALID
        assert "select needs --q" in capsys.readouterr().err

    def test_q_out_of_range(self, continuous_csv, capsys):
        assert main(["select", "--input", continuous_csv, "--q", "5"]) == EXIT_INVALID

    def test_bad_family(self, continuous_csv, capsys):
        assert main(["select", "--input", continuous_csv, "--q", "2", "--family", "t:0.5"]) == EXIT_INVALID


class TestSimulate:

    ARGS = ["simulate", "--seed", "3", "--n", "60", "--q", "2", "--p", "4"]

    def test_needs_seed(self, capsys):
        assert main(["simulate", "--n", "60"]) == EXIT_INVALID
        assert "simulate needs --seed" in capsys.readouterr().err

    def test_small_grid(self, capsys):
        assert main(self.ARGS + ["--replicates", "3"]) == EXIT_OK
        rows = _rows(capsys.readouterr().out)
        assert len(rows) == 6
        assert {r["method"] for r in rows} == {"pearson", "spearman", "copula"}
        assert all(r["n"] == "60" and r["family"] == "gaussian" for r in rows)

    def test_worker_count_does_not_change_output(self, capsys):
        main(self.ARGS + ["--replicates", "4", "--workers", "1"])
        serial = capsys.readouterr().out
        main(self.ARGS + ["--replicates", "4", "--workers", "3"])
        assert capsys.readouterr().out == serial

    def test_single_replicate(self, capsys):
        assert main(self.ARGS + ["--replicates", "1"]) == EXIT_OK
        rows = _rows(capsys.readouterr().out)
        assert all(float(r["stderr"]) == 0.0 for r in rows)

    def test_student_t_family_column(self, capsys):
        assert main(self.ARGS + ["--replicates", "2", "--family", "t:2.5", "--method", "copula"]) == EXIT_OK
        rows = _rows(capsys.readouterr().out)
        assert {(r["family"], r["family_param"]) for r in rows} == {("student_t", "2.5")}

    def test_unknown_figure(self, capsys):
        assert main(["simulate", "--seed", "1", "--figure", "9"]) == EXIT_INVALID

    def test_polychoric_needs_ordinal_transform(self, capsys):
        assert main(self.ARGS + ["--method", "polychoric"]) == EXIT_INVALID


class TestRee:

    @pytest.fixture
    def matrix_file(self, tmp_path):
        sigma = sample_wishart_corr(5, np.random.default_rng(25))
        path = tmp_path / "sigma.csv"
        write_correlation(sigma, ["a", "b", "c", "d", "e"], path)
        return str(path)

    def test_same_subset(self, matrix_file, capsys):
        assert main(["ree", "--matrix", matrix_file, "--subset", "a,c", "--reference", "c,a"]) == EXIT_OK
        row = _rows(capsys.readouterr().out)[0]
        assert float(row["ree"]) == 1.0
        assert float(row["subset_trace"]) == pytest.approx(float(row["reference_trace"]), rel=1e-12)

    def test_identity(self, tmp_path, capsys):
        path = tmp_path / "eye.csv"
        write_correlation(CorrelationMatrix(np.eye(4)), ["w", "x", "y", "z"], path)
        assert main(["ree", "--matrix", str(path), "--subset", "0,1", "--reference", "2,3"]) == EXIT_OK
        assert float(_rows(capsys.readouterr().out)[0]["ree"]) == 1.0

    def test_from_data(self, continuous_csv, capsys):
        args = ["ree", "--input", continuous_csv, "--method", "pearson", "--subset", "a", "--reference", "b"]
        assert main(args) == EXIT_OK
        assert float(_rows(capsys.readouterr().out)[0]["ree"]) > 0.0

    def test_size_mismatch(self, matrix_file, capsys):
        assert main(["ree", "--matrix", matrix_file, "--subset", "a", "--reference", "b,c"]) == EXIT_INVALID

    def test_unknown_name(self, matrix_file, capsys):
        assert main(["ree", "--matrix", matrix_file, "--subset", "zz", "--reference", "b"]) == EXIT_INVALID

    def test_missing_file(self, tmp_path, capsys):
        args = ["ree", "--matrix", str(tmp_path / "none.csv"), "--subset", "0", "--reference", "1"]
        assert main(args) == EXIT_IO


class TestConfig:

    def test_format(self):
        assert CommandConfig(command="corr", input="x.csv").fmt == "csv"
        assert CommandConfig(command="corr", input="x.csv", json_output=True).fmt == "json"

    def test_family_spelling(self):
        assert CommandConfig(command="simulate", seed=1, family="T:2.5").family == "t:2.5"

    def test_pd_floor_range(self):
        with pytest.raises(ValueError):
            CommandConfig(command="corr", input="x.csv", pd_floor=0.0)
