from __future__ import annotations

import subprocess
import sys

import numpy as np
import pytest

from quantcorr.cli import EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, format_model, main
from quantcorr.csvio import read_columns, read_table
from quantcorr.qar import fit_qar
from quantcorr.simulation import gen_ar, gen_trivariate_normal, rng_stream


@pytest.fixture(scope="module")
def ar_csv(tmp_path_factory):
    y = gen_ar(300, 0.1, [0.5], rng_stream(101, 0))
    path = tmp_path_factory.mktemp("cli") / "ar.csv"
    path.write_text("y\n" + "\n".join(repr(float(v)) for v in y) + "\n")
    return path, y


@pytest.fixture(scope="module")
def xyz_csv(tmp_path_factory):
    x, y, z = gen_trivariate_normal(200, rng_stream(102, 0))
    path = tmp_path_factory.mktemp("cli") / "xyz.csv"
    rows = "\n".join(f"{float(a)!r},{float(b)!r},{float(c)!r}" for a, b, c in zip(x, y, z))
    path.write_text("x,y,z\n" + rows + "\n")
    return path


class TestCommands:
    def test_qcor(self, xyz_csv, capsys):
        assert main(["qcor", str(xyz_csv), "--y", "y", "--x", "x", "--tau", "0.3", "--tau", "0.7"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].split() == ["tau", "qcor", "variance", "std_error", "band", "n"]
        assert len(lines) == 3

    def test_qpcor(self, xyz_csv, tmp_path):
        out = tmp_path / "qp.csv"
        assert main(["qpcor", str(xyz_csv), "--y", "y", "--x", "x", "--z", "z", "--out", str(out)]) == EXIT_OK
        header, rows = read_table(out)
        assert header[1] == "qpcor" and len(rows) == 1

    def test_qpacf_band(self, ar_csv, tmp_path):
        path, _ = ar_csv
        out = tmp_path / "qpacf.csv"
        assert main(["qpacf", str(path), "--column", "y", "--tau", "0.4", "--out", str(out)]) == EXIT_OK
        lag, var, band = read_columns(out, ["lag", "variance", "band"])
        np.testing.assert_array_equal(lag, np.arange(1, 19))
        np.testing.assert_allclose(band, 1.96 * np.sqrt(var / 300), atol=1e-12)

    def test_fit_matches_library(self, ar_csv, tmp_path):
        path, y = ar_csv
        out = tmp_path / "fit.csv"
        assert main(["fit", str(path), "--p", "2", "--tau", "0.6", "--out", str(out)]) == EXIT_OK
        (coef,) = read_columns(out, ["coefficient"])
        np.testing.assert_array_equal(coef, fit_qar(y, 0.6, 2).coefficients)

    def test_fit_eliminate(self, ar_csv, capsys):
        path, _ = ar_csv
        assert main(["fit", str(path), "--p", "3", "--eliminate"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "lag1" in out and "lag3" not in out

    def test_diagnose(self, ar_csv, tmp_path, capsys):
        path, _ = ar_csv
        out = tmp_path / "diag.csv"
        assert main(["diagnose", str(path), "--tau", "0.5", "--K", "6", "--out", str(out)]) == EXIT_OK
        text = capsys.readouterr().out
        assert "Q_0.5(y[t] | past) = " in text
        assert "Q_BP(6)" in text and "df = " in text
        header, rows = read_table(out)
        sections = {r[1][0] for r in rows}
        assert sections == {"qpacf", "coefficient", "residual_qacf", "portmanteau"}

    def test_simulate(self, tmp_path, capsys):
        out = tmp_path / "sim.csv"
        argv = ["simulate", "--experiment", "3", "--n", "50", "--tau", "0.5", "--reps", "5",
                "--rule", "hs", "--seed", "4", "--out", str(out)]
        assert main(argv) == EXIT_OK
        assert capsys.readouterr().out.startswith("# experiment: 3")
        text = out.read_text()
        assert "# seed: 4" in text and "# burn_in: 200" in text
        header, rows = read_table(out)
        assert header == ["n", "tau", "setting", "statistic", "measure", "value", "mc_se"]
        assert len(rows) == 2 * 3


class TestFormatting:
    def test_model_line(self, ar_csv):
        _, y = ar_csv
        fit = fit_qar(y, 0.2, 1)
        line = format_model(fit)
        c, se = fit.coefficients, fit.std_errors
        sign = "-" if c[1] < 0 else "+"
        assert line == (f"Q_0.2(y[t] | past) = {c[0]:.4f}_({se[0]:.4f}) "
                        f"{sign} {abs(c[1]):.4f}_({se[1]:.4f}) y[t-1]")


class TestExitCodes:
    def test_missing_file(self, tmp_path, capsys):
        assert main(["qpacf", str(tmp_path / "none.csv")]) == EXIT_INVALID
        assert "error" in capsys.readouterr().err

    def test_bad_cell(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("y\n1\nx\n")
        assert main(["qpacf", str(path)]) == EXIT_INVALID

    def test_non_positive_price(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("p\n" + "\n".join(["1", "2", "0"] * 20) + "\n")
        assert main(["qpacf", str(path), "--transform", "log_return_pct", "--max-lag", "2"]) == EXIT_INVALID

    def test_numerical_failure(self, tmp_path, capsys):
        path = tmp_path / "c.csv"
        path.write_text("x,y\n" + "\n".join(f"1,{i}" for i in range(30)) + "\n")
        assert main(["qcor", str(path), "--y", "y", "--x", "x"]) == EXIT_NUMERICAL
        assert "numerical failure" in capsys.readouterr().err

    @pytest.mark.parametrize("argv", [["qpacf", "f.csv", "--tau", "1.5"], ["simulate", "--experiment", "7"], []])
    def test_usage_errors(self, argv):
        with pytest.raises(SystemExit) as info:
            main(argv)
        assert info.value.code == EXIT_INVALID

    def test_module_entry_point(self, ar_csv):
        path, _ = ar_csv
        done = subprocess.run([sys.executable, "-m", "quantcorr", "qpacf", str(path), "--max-lag", "2"],
                              capture_output=True, text=True, check=False)
        assert done.returncode == 0
        assert len(done.stdout.splitlines()) == 3
