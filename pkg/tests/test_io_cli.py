from __future__ import annotations

import filecmp
import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from benchsae import io
from benchsae.cli import EXIT_BAD_INPUT, EXIT_CHECK_FAILED, EXIT_OK, build_config, check_written_tables, main
from benchsae.errors import BenchmarkError, InvalidInputError, MissingInputError
from conftest import DATA_DIR

EXPECTED = DATA_DIR / "expected_tiny"
FIXTURE_ARGS = ["--scheme", "constant,raked,variability", "--iters", "400", "--burn-in", "100", "--thin", "3", "--seed", "5", "--backend", "numpy"]


def write(path, text):
    path.write_text(text)
    return path


class TestSurveyCsv:
    def test_reads_tiny(self, tiny_csv):
        data = io.read_survey_csv(tiny_csv)
        assert data.area_ids == ("north", "south", "west")
        assert list(data.sizes) == [2, 2, 2]
        assert data.covariates.shape == (6, 1)
        assert_allclose(data.response, [1, 0, 0, 1, 1, 0])

    def test_round_trip(self, tiny_csv, tmp_path):
        data = io.read_survey_csv(tiny_csv)
        io.write_survey_csv(tmp_path / "copy.csv", data)
        back = io.read_survey_csv(tmp_path / "copy.csv")
        assert back.unit_ids == data.unit_ids
        assert np.array_equal(back.covariates, data.covariates)

    @pytest.mark.parametrize(
        "body, message",
        [
            ("a,u1,2,1.0,0.1\n", "line 2: response y must be 0 or 1, got '2'"),
            ("a,u1,1,1.0\n", "line 2: expected 5 fields, found 4"),
            ("a,u1,1,-1.0,0.1\n", "line 2"),
            ("a,u1,1,1.0,abc\n", "line 2"),
            ("a,u1,1,1.0,0.1\na,u1,0,1.0,0.2\n", "line 3"),
            ("a,u1,1,1.0,0.1\nb,u2,0,1.0,0.2\na,u3,1,1.0,0.3\n", "line 4"),
        ],
    )
    def test_malformed_rows(self, tmp_path, body, message):
        path = write(tmp_path / "bad.csv", "area_id,unit_id,y,weight,x1\n" + body)
        with pytest.raises(InvalidInputError, match=message):
            io.read_survey_csv(path)

    def test_bad_header(self, tmp_path):
        with pytest.raises(InvalidInputError, match="header"):
            io.read_survey_csv(write(tmp_path / "bad.csv", "area,unit,y,weight\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingInputError):
            io.read_survey_csv(tmp_path / "absent.csv")


class TestTables:
    def test_write_read(self, tmp_path):
        io.write_table(tmp_path / "t.csv", ["a", "n", "v"], [["x", 3, 0.1 + 0.2], ["y", 4, float("nan")]])
        header, rows = io.read_table(tmp_path / "t.csv")
        assert header == ["a", "n", "v"]
        assert rows == [["x", "3", "0.3"], ["y", "4", "nan"]]

    def test_area_vector(self, tmp_path):
        ids, values = io.read_area_vector(write(tmp_path / "h.csv", "area_id,h\nnorth,0.1\nsouth,0.2\n"), 2)
        assert ids == ["north", "south"] and list(values) == [0.1, 0.2]
        with pytest.raises(InvalidInputError):
            io.read_area_vector(tmp_path / "h.csv", 3)

    def test_key_value(self, tmp_path):
        path = write(tmp_path / "c.cfg", "# comment\nburn-in = 5\n\nscheme = raked  # trailing\n")
        assert io.read_key_value(path) == {"burn_in": "5", "scheme": "raked"}


class TestConfig:
    def test_defaults(self):
        cfg = build_config("estimate", None, {})
        assert (cfg.iterations, cfg.burn_in, cfg.thin, cfg.seed) == (20000, 2000, 10, 0)
        assert cfg.schemes == ["constant"]

    def test_flags_override_file(self, tmp_path):
        path = write(tmp_path / "c.cfg", "iters = 500\nthin = 4\nscheme = raked,constant\ndump_draws = yes\n")
        cfg = build_config("estimate", str(path), {"thin": 2, "seed": None})
        assert cfg.iterations == 500 and cfg.thin == 2 and cfg.seed == 0
        assert cfg.schemes == ["raked", "constant"] and cfg.dump_draws is True

    def test_unknown_key(self, tmp_path):
        with pytest.raises(BenchmarkError, match="unknown config key"):
            build_config("estimate", str(write(tmp_path / "c.cfg", "colour = red\n")), {})

    def test_bad_value(self, tmp_path):
        with pytest.raises(BenchmarkError):
            build_config("estimate", str(write(tmp_path / "c.cfg", "thin = many\n")), {})


class TestVerifyCommand:
    def test_passes(self, capsys):
        assert main(["verify", "--instances", "20"]) == EXIT_OK
        assert "PASS" in capsys.readouterr().out

    def test_injected_fault(self, capsys):
        assert main(["verify", "--instances", "5", "--inject-fault"]) == EXIT_CHECK_FAILED
        captured = capsys.readouterr()
        assert "FAIL" in captured.out
        dumped = captured.err.split("\n", 1)[1]
        assert json.loads(dumped)["deviation"] > 1e-9


class TestEstimateCommand:
    def test_matches_frozen_fixture(self, tiny_csv, tmp_path):
        out = tmp_path / "run"
        assert main(["estimate", "--input", str(tiny_csv), "--out", str(out), *FIXTURE_ARGS]) == EXIT_OK
        for expected in sorted(EXPECTED.glob("*.csv")):
            header, rows = io.read_table(expected)
            got_header, got_rows = io.read_table(out / expected.name)
            assert got_header == header
            assert len(got_rows) == len(rows)
            ids = 2 if header[1] == "unit_id" else 1
            for a, b in zip(rows, got_rows):
                assert a[:ids] == b[:ids]
                assert_allclose(np.array(b[ids:], dtype=float), np.array(a[ids:], dtype=float), rtol=1e-9, atol=1e-12)
        assert (out / "constraints_report.txt").read_text().endswith("all constraints satisfied\n")

    def test_byte_identical_reruns(self, tiny_csv, tmp_path):
        args = ["estimate", "--input", str(tiny_csv), *FIXTURE_ARGS, "--dump-draws"]
        assert main([*args, "--out", str(tmp_path / "a")]) == EXIT_OK
        assert main([*args, "--out", str(tmp_path / "b")]) == EXIT_OK
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert "draws.csv" in names and "diagnostics.txt" in names
        match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", names, shallow=False)
        assert mismatch == [] and errors == []

    def test_written_tables_recheck(self, tiny_csv, tmp_path):
        main(["estimate", "--input", str(tiny_csv), "--out", str(tmp_path), *FIXTURE_ARGS])
        ok, lines = check_written_tables(tmp_path, ["constant", "raked", "variability"], 6.5 / 11)
        assert ok, lines

    def test_tampered_table_fails_recheck(self, tiny_csv, tmp_path):
        main(["estimate", "--input", str(tiny_csv), "--out", str(tmp_path), *FIXTURE_ARGS])
        path = tmp_path / "estimates_raked.csv"
        header, rows = io.read_table(path)
        rows[0][header.index("benchmarked")] = "0.5"
        io.write_table(path, header, rows)
        ok, _ = check_written_tables(tmp_path, ["raked"], 6.5 / 11)
        assert not ok

    def test_h_targets_file(self, tiny_csv, tmp_path):
        h = write(tmp_path / "h.csv", "area_id,h\nnorth,0.01\nsouth,0.02\nwest,0.0\n")
        args = ["estimate", "--input", str(tiny_csv), "--out", str(tmp_path / "o"), "--scheme", "variability",
                "--iters", "200", "--burn-in", "50", "--thin", "1", "--h-targets", str(h), "--backend", "numpy"]
        assert main(args) == EXIT_OK
        header, rows = io.read_table(tmp_path / "o" / "pmse_variability.csv")
        assert [float(r[header.index("h_target")]) for r in rows] == [0.01, 0.02, 0.0]

    def test_malformed_input_exit_code(self, tmp_path, capsys):
        bad = write(tmp_path / "bad.csv", "area_id,unit_id,y,weight,x1\na,u1,2,1.0,0.1\n")
        assert main(["estimate", "--input", str(bad), "--out", str(tmp_path / "o")]) == EXIT_BAD_INPUT
        assert "line 2" in capsys.readouterr().err

    def test_missing_input_flag(self, tmp_path):
        assert main(["estimate", "--out", str(tmp_path)]) == EXIT_BAD_INPUT


class TestSimulateCommand:
    def test_outputs(self, tmp_path):
        args = ["simulate", "--out", str(tmp_path), "--m", "5", "--schemes", "raked,constant",
                "--iters", "300", "--burn-in", "50", "--thin", "2", "--backend", "numpy"]
        assert main(args) == EXIT_OK
        for name in ("simulated_data.csv", "pmse_raked.csv", "pmse_raked_resimulated.csv",
                     "plotdata_difference_raked.csv", "plotdata_adjustment_constant_resimulated.csv"):
            assert (tmp_path / name).exists(), name
        header, rows = io.read_table(tmp_path / "plotdata_difference_raked.csv")
        assert header == ["area_id", "n", "difference"] and len(rows) == 5

    def test_spec_file(self, tmp_path):
        spec = write(tmp_path / "sim.cfg", "m = 3\nbeta = 0.0,0.0,0.0\nresimulate = no\niters = 100\nburn_in = 10\nthin = 1\n")
        assert main(["simulate", "--spec", str(spec), "--out", str(tmp_path / "o"), "--backend", "numpy"]) == EXIT_OK
        assert not (tmp_path / "o" / "pmse_constant_resimulated.csv").exists()
        header, rows = io.read_table(tmp_path / "o" / "pmse_constant.csv")
        assert len(rows) == 3
