"""CLI subcommands, exit codes, and environment-variable defaults."""

import xml.etree.ElementTree as ET

import pytest

from kinoplan import cli
from kinoplan.cli import EXIT_ERROR, EXIT_NO_PATH, EXIT_OK
from kinoplan.geometry import CurveLibrary

TINY_CONFIG = """\
# single straight cell
r_min = 2.0
r_max = 2.0
n_r = 1
beta_min = 0.0
beta_max = 0.0
n_beta = 1
"""


class TestGenLibrary:
    def test_tiny_config_and_regeneration(self, tmp_path, capsys):
        cfg = tmp_path / "lib.cfg"
        cfg.write_text(TINY_CONFIG)
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        assert cli.main(["gen-library", "--config", str(cfg),
                         "--out", str(out1)]) == EXIT_OK
        assert cli.main(["gen-library", "--config", str(cfg),
                         "--out", str(out2)]) == EXIT_OK
        assert out1.read_bytes() == out2.read_bytes()
        lib = CurveLibrary.load_csv(out1)
        assert len(lib.entries) == 1
        assert lib.entries[(0, 0)].params.s_f == pytest.approx(2.0, abs=1e-3)
        assert "entries 1" in capsys.readouterr().out

    def test_bad_config_line(self, tmp_path, capsys):
        cfg = tmp_path / "lib.cfg"
        cfg.write_text("r_min = 1.0\nwhat is this\n")
        assert cli.main(["gen-library", "--config", str(cfg),
                         "--out", str(tmp_path / "x.csv")]) == EXIT_ERROR
        assert ":2" in capsys.readouterr().err


class TestPlan:
    def test_deterministic_output(self, tmp_path, library_csv):
        out1 = tmp_path / "p1"
        out2 = tmp_path / "p2"
        args = ["plan", "--start", "0,0,0", "--goal", "10,0,0",
                "--library", str(library_csv), "--seed", "4"]
        assert cli.main(args + ["--out", str(out1)]) == EXIT_OK
        assert cli.main(args + ["--out", str(out2)]) == EXIT_OK
        assert (out1 / "path.csv").read_bytes() == (out2 / "path.csv").read_bytes()
        header = (out1 / "path.csv").read_text().splitlines()[0]
        assert header == "i,x,y,theta,a,b,c,s_f"
        ET.parse(out1 / "path.svg")

    def test_missing_endpoints(self, capsys):
        assert cli.main(["plan"]) == EXIT_ERROR
        assert "--start" in capsys.readouterr().err

    def test_goal_inside_obstacle(self, tmp_path, library_csv):
        sc = tmp_path / "world.txt"
        sc.write_text("name trap\nbounds -5 -5 15 5\nstart 0 0 0\n"
                      "goal 10 0 0\ndisk 10 0 2\n")
        code = cli.main(["plan", "--scenario", str(sc),
                         "--library", str(library_csv),
                         "--out", str(tmp_path / "o")])
        assert code == EXIT_NO_PATH

    def test_bad_pose_argument(self, tmp_path):
        with pytest.raises(SystemExit):
            cli.main(["plan", "--start", "1,2", "--goal", "3,4,0",
                      "--out", str(tmp_path)])


class TestSimulate:
    def test_requires_scenario(self):
        with pytest.raises(SystemExit):
            cli.main(["simulate"])

    def test_unknown_scenario(self, capsys):
        assert cli.main(["simulate", "--scenario", "nonesuch"]) == EXIT_ERROR
        assert "nonesuch" in capsys.readouterr().err

    def test_malformed_scenario_file(self, tmp_path, capsys):
        sc = tmp_path / "bad.txt"
        sc.write_text("name x\ndisk 1 2\n")
        assert cli.main(["simulate", "--scenario", str(sc)]) == EXIT_ERROR
        assert ":2" in capsys.readouterr().err

    def test_cross_run_exports(self, tmp_path, library_csv):
        out = tmp_path / "run"
        code = cli.main(["simulate", "--scenario", "cross", "--seed", "0",
                         "--library", str(library_csv), "--out", str(out)])
        assert code == EXIT_OK
        assert (out / "trace.csv").exists()
        assert (out / "metrics.txt").exists()


class TestBenchSampling:
    def test_single_run_table(self, tmp_path, library_csv, capsys):
        out = tmp_path / "bench"
        code = cli.main(["bench-sampling", "--runs", "1", "--seed", "1",
                         "--library", str(library_csv), "--out", str(out)])
        assert code == EXIT_OK
        lines = (out / "stats.csv").read_text().strip().splitlines()
        assert lines[0] == ("heading,mode,runs,nodes_mean,nodes_ci95,"
                            "time_mean,time_ci95,length_mean,length_ci95")
        assert len(lines) == 1 + 10 * 2  # headings 0..90 by 10, two modes
        for svg in ("bench_length.svg", "bench_nodes.svg"):
            ET.parse(out / svg)


class TestExportPlots:
    def test_roundtrip_from_trace(self, tmp_path, library_csv):
        run_dir = tmp_path / "run"
        assert cli.main(["simulate", "--scenario", "cross", "--seed", "0",
                         "--library", str(library_csv),
                         "--out", str(run_dir)]) == EXIT_OK
        plots = tmp_path / "plots"
        code = cli.main(["export-plots", "--trace", str(run_dir / "trace.csv"),
                         "--scenario", "cross", "--out", str(plots)])
        assert code == EXIT_OK
        ET.parse(plots / "trace.svg")

    def test_missing_trace(self, tmp_path, capsys):
        assert cli.main(["export-plots", "--trace", str(tmp_path / "no.csv"),
                         "--out", str(tmp_path / "p")]) == EXIT_ERROR


class TestEnvironmentDefaults:
    def test_seed_env_override(self, tmp_path, library_csv, monkeypatch, capsys):
        monkeypatch.setenv("KINOPLAN_SEED", "9")
        out = tmp_path / "env"
        assert cli.main(["plan", "--start", "0,0,0", "--goal", "10,0,0",
                         "--library", str(library_csv),
                         "--out", str(out)]) == EXIT_OK
        assert "seed = 9" in capsys.readouterr().out

    def test_explicit_flag_beats_env(self, tmp_path, library_csv, monkeypatch,
                                     capsys):
        monkeypatch.setenv("KINOPLAN_SEED", "9")
        out = tmp_path / "env2"
        assert cli.main(["plan", "--start", "0,0,0", "--goal", "10,0,0",
                         "--seed", "3", "--library", str(library_csv),
                         "--out", str(out)]) == EXIT_OK
        assert "seed = 3" in capsys.readouterr().out
