import json
import math
import os

import pytest

from fractaldrum.cli import (
    build_parser,
    join_negative_values,
    main,
    parse_complex,
    parse_ints,
    parse_range,
    parse_sizes,
)
from fractaldrum.errors import InvalidConfigError
from fractaldrum.julia import BASILICA, RABBIT
from fractaldrum.renderer import read_csv
from fractaldrum.spectral import REFERENCE_LENGTH_SCALE


@pytest.fixture(autouse=True)
def isolated(tmp_path, monkeypatch):
    """No rc file from the developer's home or checkout leaks into a run."""
    home = tmp_path / "home"
    home.mkdir()
    monkeypatch.setenv("HOME", str(home))
    monkeypatch.chdir(tmp_path)


def _run(out, *args):
    return main(list(args) + ["-o", str(out), "--quiet"])


class TestLiterals:

    @pytest.mark.parametrize("text, expected", [
        ("0", 0j),
        ("-1+0i", -1 + 0j),
        ("0.2", 0.2 + 0j),
        ("-0.122561+0.744862i", RABBIT),
        ("0.74i", 0.74j),
        ("Basilica", BASILICA),
    ])
    def test_complex(self, text, expected):
        assert parse_complex(text) == expected

    def test_bad_complex(self):
        with pytest.raises(InvalidConfigError, match="complex"):
            parse_complex("1+2k")

    def test_ranges(self):
        assert parse_range("-0.74:0.01:-0.70") == [-0.74, -0.73, -0.72, -0.71, -0.7]
        assert parse_range("0,1.5") == [0.0, 1.5]
        assert parse_range("2") == [2.0]
        with pytest.raises(InvalidConfigError, match="step > 0"):
            parse_range("1:0:2")
        with pytest.raises(InvalidConfigError, match="stop >= start"):
            parse_range("2:0.5:1")
        with pytest.raises(InvalidConfigError):
            parse_range("a:b:c")

    def test_lists(self):
        assert parse_ints("10,20") == [10, 20]
        assert parse_sizes("640x480,1280X960") == [(640, 480), (1280, 960)]
        with pytest.raises(InvalidConfigError):
            parse_sizes("640-480")
        with pytest.raises(InvalidConfigError):
            parse_ints("1,x")

    def test_parser_requires_command(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_negative_values_join_their_option(self):
        argv = ["julia", "--c", "-1+0i", "--re", "-0.5,0", "--im", "-.25", "--quiet", "-k", "3"]
        assert join_negative_values(argv) == [
            "julia", "--c=-1+0i", "--re=-0.5,0", "--im=-.25", "--quiet", "-k", "3"]
        # a following flag stays a flag
        assert join_negative_values(["--c", "--quiet"]) == ["--c", "--quiet"]
        assert join_negative_values(["--c", "0.2"]) == ["--c", "0.2"]

    @pytest.mark.parametrize("argv", [
        ["--quiet", "julia", "--c", "0"],
        ["julia", "--c", "0", "--quiet"],
    ])
    def test_quiet_on_either_side_of_the_command(self, argv):
        args = build_parser().parse_args(argv)
        assert args.quiet is True

    def test_quiet_defaults_off(self):
        assert build_parser().parse_args(["julia"]).quiet is False

    def test_quiet_run_prints_no_progress(self, tmp_path, capsys):
        code = main(["julia", "--c", "0", "--area-only", "--resolution", "8",
                     "--iterations", "20", "-o", str(tmp_path / "q"), "--quiet"])
        assert code == 0
        assert capsys.readouterr().err == ""


class TestSnowflake:

    def test_classic_run(self, tmp_path):
        out = tmp_path / "classic"
        code = _run(out, "snowflake", "--level", "1", "--refine", "1", "-k", "4",
                    "--images", "2", "--plot", "--combine", "2,3", "--symmetry")
        assert code == 0
        for name in ("polygon.csv", "mesh.off", "spectrum.csv", "counting.csv", "counting.png",
                     "eigenfunction_001.pgm", "eigenfunction_001.ppm", "nodal_001.pgm",
                     "eigenfunction_002.csv", "energy_002.pgm",
                     "energy_combined_2_3.pgm", "energy_next_004.pgm", "combination_2_3.csv",
                     "symmetry.csv", "run.json"):
            assert (out / name).is_file(), name
        assert not (out / "eigenfunction_003.pgm").exists()

        spectrum = read_csv(str(out / "spectrum.csv"))
        assert [row["index"] for row in spectrum] == ["1", "2", "3", "4"]
        values = [float(row["eigenvalue"]) for row in spectrum]
        assert values == sorted(values)

        symmetry = read_csv(str(out / "symmetry.csv"))
        ground = [float(symmetry[0][f"g{i}"]) for i in range(12)]
        assert all(abs(g - 1.0) < 1e-6 for g in ground)

        counting = read_csv(str(out / "counting.csv"))
        assert {r["index_base"] for r in counting} == {"1"}
        assert all(r["weyl2"] for r in counting)

        run = json.loads((out / "run.json").read_text())
        assert run["command"] == "snowflake"
        assert run["k"] == 4 and run["options"]["level"] == 1

    def test_quadratic_neumann_run(self, tmp_path):
        out = tmp_path / "quad"
        code = _run(out, "snowflake", "--kind", "quadratic", "--b", "0.2", "--level", "1",
                    "--refine", "1", "--bc", "neumann", "-k", "3", "--images", "0")
        assert code == 0
        spectrum = read_csv(str(out / "spectrum.csv"))
        assert spectrum[0]["index"] == "0"
        assert abs(float(spectrum[0]["eigenvalue"])) < 1e-6
        counting = read_csv(str(out / "counting.csv"))
        assert counting[-1]["N"] == "3"
        assert {r["index_base"] for r in counting} == {"0"}

    def test_neumann_combination_uses_zero_based_indices(self, tmp_path):
        out = tmp_path / "nc"
        code = _run(out, "snowflake", "--level", "1", "--refine", "1", "--bc", "neumann", "-k", "6",
                    "--images", "0", "--combine", "3,4")
        assert code == 0
        assert (out / "combination_3_4.csv").is_file()
        assert (out / "energy_next_005.pgm").is_file()
        # index 6 lies past the last computed Neumann index 5
        assert _run(tmp_path / "x", "snowflake", "--level", "1", "--bc", "neumann", "-k", "6",
                    "--images", "0", "--combine", "4,5") == 2

    def test_quadratic_needs_b(self, tmp_path):
        assert _run(tmp_path / "x", "snowflake", "--kind", "quadratic") == 2

    def test_level_limit(self, tmp_path):
        assert _run(tmp_path / "x", "snowflake", "--level", "9") == 2

    def test_combine_out_of_range(self, tmp_path):
        code = _run(tmp_path / "x", "snowflake", "--level", "1", "-k", "3", "--images", "0",
                    "--combine", "2,3")
        assert code == 2

    def test_triangle_budget(self, tmp_path):
        code = _run(tmp_path / "x", "snowflake", "--level", "4", "--triangle-budget", "100")
        assert code == 4

    def test_output_is_deterministic(self, tmp_path):
        args = ("snowflake", "--level", "2", "--refine", "1", "-k", "5", "--images", "0")
        assert _run(tmp_path / "a", *args) == 0
        assert _run(tmp_path / "b", *args) == 0
        for name in ("spectrum.csv", "counting.csv", "mesh.off"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestJulia:

    def test_area_only(self, tmp_path, capsys):
        out = tmp_path / "area"
        code = main(["julia", "--c", "0", "--area-only", "--resolution", "32",
                     "--iterations", "50", "-o", str(out)])
        assert code == 0
        stdout = capsys.readouterr().out.splitlines()
        assert float(stdout[0]) == pytest.approx(math.pi, abs=0.1)
        assert stdout[-1].startswith("Done!")
        assert (out / "filled.pgm").read_bytes().startswith(b"P5\n128 128\n255\n")
        row = read_csv(str(out / "area.csv"))[0]
        assert float(row["area"]) == float(stdout[0])

    def test_spectrum_run(self, tmp_path):
        out = tmp_path / "disk"
        code = _run(out, "julia", "--c", "0+0i", "--resolution", "32", "-k", "2",
                    "--images", "1", "--plot")
        assert code == 0
        for name in ("filled.pgm", "area.csv", "components.csv", "mesh.off", "spectrum.csv",
                     "counting.csv", "counting.png", "eigenfunction_001.pgm", "energy_001.pgm"):
            assert (out / name).is_file(), name
        lam1 = float(read_csv(str(out / "spectrum.csv"))[0]["eigenvalue"])
        assert lam1 == pytest.approx(5.7832, rel=0.1)
        assert read_csv(str(out / "components.csv"))[0]["component_id"] == "1"

    def test_compare_iterations(self, tmp_path):
        out = tmp_path / "it"
        code = _run(out, "julia", "--c", "0", "--resolution", "32", "-k", "2",
                    "--compare-iterations", "20,40")
        assert code == 0
        rows = read_csv(str(out / "iterations.csv"))
        assert list(rows[0]) == ["index", "it_20", "it_40"]
        assert [r["index"] for r in rows] == ["1", "2"]

    def test_negative_parameter_literal(self, tmp_path):
        out = tmp_path / "basilica"
        code = _run(out, "julia", "--c", "-1+0i", "--area-only", "--resolution", "32",
                    "--iterations", "50")
        assert code == 0
        row = read_csv(str(out / "area.csv"))[0]
        assert float(row["re_c"]) == -1.0
        assert 0.0 < float(row["area"]) < math.pi

    def test_bad_parameter(self, tmp_path, capsys):
        assert _run(tmp_path / "x", "julia", "--c", "one+two") == 2
        assert "Error:" in capsys.readouterr().err

    def test_pixel_budget(self, tmp_path):
        code = _run(tmp_path / "x", "julia", "--c", "0", "--area-only", "--pixel-budget", "10")
        assert code == 4

    def test_quasicircles_need_multiplicities(self, tmp_path):
        assert _run(tmp_path / "x", "julia", "--c", "0", "--quasicircles") == 2

    def test_quasicircle_outputs(self, tmp_path):
        out = tmp_path / "qc"
        code = _run(out, "julia", "--c", "0", "--resolution", "32", "-k", "2", "--images", "1",
                    "--quasicircles", "--multiplicities", "1", "--symmetry")
        assert code == 0
        for name in ("union.csv", "spectrum_QC1.csv", "eigenfunction_QC1_001.pgm",
                     "eigenfunction_QC1_001.ppm", "nodal_QC1_001.pgm", "energy_QC1_001.pgm",
                     "symmetry_QC1.csv"):
            assert (out / name).is_file(), name
        ground = read_csv(str(out / "symmetry_QC1.csv"))[0]
        assert list(ground)[2:] == ["identity", "mirror_horizontal", "mirror_vertical", "half_turn"]
        assert float(ground["identity"]) == pytest.approx(1.0)
        assert float(ground["mirror_vertical"]) > 0.9

    def test_quasicircle_neumann_outputs(self, tmp_path):
        out = tmp_path / "qcn"
        code = _run(out, "julia", "--c", "0", "--resolution", "32", "-k", "2", "--images", "1",
                    "--quasicircles", "--multiplicities", "1", "--bc", "neumann")
        assert code == 0
        rows = read_csv(str(out / "spectrum_QC1_neumann.csv"))
        assert rows[0]["index"] == "0" and abs(float(rows[0]["eigenvalue"])) < 1e-6
        assert (out / "eigenfunction_QC1_000.pgm").is_file()
        # the union stays Dirichlet
        union = read_csv(str(out / "union.csv"))
        assert float(union[0]["eigenvalue"]) == pytest.approx(5.7832, rel=0.1)

    def test_length_scale(self, tmp_path):
        args = ("julia", "--c", "0", "--area-only", "--resolution", "32", "--iterations", "50")
        assert _run(tmp_path / "one", *args) == 0
        assert _run(tmp_path / "half", *args, "--length-scale", "0.5") == 0
        one = read_csv(str(tmp_path / "one" / "area.csv"))[0]
        half = read_csv(str(tmp_path / "half" / "area.csv"))[0]
        assert float(half["area"]) == pytest.approx(float(one["area"]) / 4.0, rel=1e-12)
        assert float(half["length_scale"]) == 0.5

    def test_reference_length_scale(self, tmp_path):
        out = tmp_path / "ref"
        assert _run(out, "julia", "--c", "0", "--area-only", "--resolution", "16",
                    "--length-scale", "reference") == 0
        run = json.loads((out / "run.json").read_text())
        assert run["length_scale"] == pytest.approx(REFERENCE_LENGTH_SCALE)


class TestOtherCommands:

    def test_boxdim_segment(self, tmp_path):
        out = tmp_path / "seg"
        assert _run(out, "boxdim", "--segment") == 0
        fit = read_csv(str(out / "fit.csv"))[0]
        assert float(fit["dimension"]) == pytest.approx(1.0, abs=1e-12)
        counts = [int(r["count"]) for r in read_csv(str(out / "boxcount.csv"))]
        assert counts == [2 ** j for j in range(2, 11)]

    def test_boxdim_refuses_low_levels(self, tmp_path, capsys):
        assert _run(tmp_path / "low", "boxdim", "--level", "2") == 2
        assert "at least 3 box sizes" in capsys.readouterr().err

    def test_boxdim_snowflake(self, tmp_path):
        out = tmp_path / "sf"
        assert _run(out, "boxdim", "--level", "4") == 0
        assert float(read_csv(str(out / "fit.csv"))[0]["dimension"]) == pytest.approx(1.26, abs=0.15)

    def test_slice(self, tmp_path):
        out = tmp_path / "slice"
        code = _run(out, "slice", "--re", "0,3", "--im", "0", "-k", "2",
                    "--resolution", "32", "--iterations", "50")
        assert code == 0
        rows = read_csv(str(out / "slice.csv"))
        assert list(rows[0]) == ["c_re", "c_im", "lambda_1", "lambda_2", "error"]
        assert rows[0]["error"] == "" and rows[0]["lambda_1"]
        assert rows[1]["lambda_1"] == "" and rows[1]["error"]

    def test_slice_negative_real_parts(self, tmp_path):
        out = tmp_path / "neg"
        code = _run(out, "slice", "--re", "-0.5:0.25:-0.25", "--im", "0", "-k", "1",
                    "--resolution", "32", "--iterations", "40")
        assert code == 0
        rows = read_csv(str(out / "slice.csv"))
        assert [float(r["c_re"]) for r in rows] == [-0.5, -0.25]
        assert all(r["error"] == "" for r in rows)

    def test_area_map(self, tmp_path):
        out = tmp_path / "map"
        code = _run(out, "area-map", "--re", "-1,0,3", "--resolution", "16", "--iterations", "50")
        assert code == 0
        rows = read_csv(str(out / "area_map.csv"))
        assert [r["member"] for r in rows] == ["1", "1", "0"]
        assert float(rows[2]["area"]) == 0.0

    def test_rc_file_fills_defaults(self, tmp_path):
        (tmp_path / ".fractaldrumrc").write_text(json.dumps({"k": 2, "resolution": 16.0}))
        out = tmp_path / "rc"
        assert _run(out, "julia", "--c", "0", "--area-only") == 0
        run = json.loads((out / "run.json").read_text())
        assert run["k"] == 2 and run["resolution"] == 16.0
        assert os.path.isfile(out / "area.csv")
