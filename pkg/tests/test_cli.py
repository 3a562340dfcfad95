import json
import math

import numpy as np
import pytest

from sphtransport.cli import (
    ExperimentConfig,
    main,
    parse_timestep,
    preset_dt,
    run_convergence,
    run_experiment,
)
from sphtransport.errors import ConfigurationError


class TestParseTimestep:
    def test_plain_float(self):
        assert parse_timestep("0.25") == 0.25

    def test_pi_fraction(self):
        assert parse_timestep("pi/10") == pytest.approx(math.pi / 10.0)

    def test_integer_fraction(self):
        assert parse_timestep("5/35") == pytest.approx(5.0 / 35.0)

    def test_garbage_rejected(self):
        with pytest.raises((ConfigurationError, ValueError)):
            parse_timestep("a/b/c")


class TestPresets:
    def test_local_cosine_bells(self):
        assert preset_dt("cb", "local", 23042) == pytest.approx(5.0 / 35.0)
        assert preset_dt("cb", "pu", 2562) == pytest.approx(5.0 / 20.0)

    def test_local_gaussian_bells(self):
        assert preset_dt("gb", "local", 23042) == pytest.approx(5.0 / 80.0)
        assert preset_dt("gb", "pu", 92162) == pytest.approx(5.0 / 120.0)

    def test_global_tables(self):
        assert preset_dt("cb", "global", 15129) == pytest.approx(5.0 / 45.0)
        assert preset_dt("gb", "global", 10000) == pytest.approx(5.0 / 140.0)

    def test_unknown_preset(self):
        with pytest.raises(ConfigurationError):
            preset_dt("xx", "local", 2562)

    def test_missing_size(self):
        with pytest.raises(ConfigurationError):
            preset_dt("cb", "local", 999)


class TestValidation:
    def test_a_only_for_pu(self):
        cfg = ExperimentConfig(method="global", level=2, a=2.5, dt="0.1")
        with pytest.raises(ConfigurationError, match="'a'"):
            cfg.validate()

    def test_epsilon_only_for_global(self):
        cfg = ExperimentConfig(method="local", level=2, epsilon=3.0, dt="0.1")
        with pytest.raises(ConfigurationError, match="epsilon"):
            cfg.validate()

    def test_node_source_required(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig(method="local", dt="0.1").validate()

    def test_revolutions_only_for_solid_body(self):
        cfg = ExperimentConfig(testcase="deform-gauss", level=2, revolutions=1.0)
        with pytest.raises(ConfigurationError):
            cfg.validate()


class TestRunExperiment:
    def test_solid_body_run_csv_rows(self, tmp_path):
        # one revolution at dt=pi/10 is 20 steps: initial row + 20 = 21
        cfg = ExperimentConfig(
            testcase="sbr-cosine",
            method="local",
            level=3,
            n=31,
            dt="pi/10",
            revolutions=1.0,
            out=str(tmp_path / "run"),
        )
        summary = run_experiment(cfg)
        assert summary["schema"] == 1
        assert summary["n_steps"] == 20
        lines = (tmp_path / "run" / "run.csv").read_text().strip().splitlines()
        assert len(lines) == 22  # header + 21 records
        assert lines[0].startswith("time,rel_l2")
        data = json.loads((tmp_path / "run" / "summary.json").read_text())
        assert data["final"]["rel_l2"] == summary["final"]["rel_l2"]
        assert "step_loop" in data["timings_s"]
        assert data["kernel"]["kind"] == "phs"

    def test_global_summary_reports_epsilon(self, tmp_path):
        cfg = ExperimentConfig(
            testcase="sbr-cosine",
            method="global",
            level=2,
            dt="pi/4",
            tfinal=math.pi,
            out=str(tmp_path / "g"),
        )
        summary = run_experiment(cfg)
        assert summary["kernel"]["kind"] == "imq"
        assert summary["kernel"]["epsilon"] > 0.0
        assert summary["kernel"]["condition"] <= 1e12

    def test_byte_identical_reruns(self, tmp_path):
        outputs = []
        for sub in ("a", "b"):
            cfg = ExperimentConfig(
                testcase="sbr-cosine",
                method="pu",
                level=3,
                n=31,
                dt="pi/10",
                tfinal=math.pi,
                out=str(tmp_path / sub),
            )
            run_experiment(cfg)
            outputs.append((tmp_path / sub / "run.csv").read_bytes())
        assert outputs[0] == outputs[1]

    def test_deformational_blank_error_cells_midway(self, tmp_path):
        cfg = ExperimentConfig(
            testcase="deform-gauss",
            method="local",
            level=2,
            n=31,
            dt="0.5",
            checkpoint_every=5,
            out=str(tmp_path / "d"),
        )
        run_experiment(cfg)
        lines = (tmp_path / "d" / "run.csv").read_text().strip().splitlines()
        mid = lines[2]  # t = 2.5: no exact solution, error cells empty
        assert mid.split(",")[1] == ""
        final = lines[-1].split(",")
        assert final[1] != ""


class TestSweep:
    def test_needs_three_sizes(self):
        cfg = ExperimentConfig(testcase="sbr-cosine", method="local", N=642, dt="pi/10")
        with pytest.raises(ConfigurationError):
            run_convergence([cfg, cfg])

    def test_constant_field_skips_rate_fit(self, monkeypatch):
        # trick: alpha irrelevant; use a constant IC via the zero-velocity
        # path is not exposed, so verify the skip branch directly
        from sphtransport import cli

        configs = []
        for n_nodes in (12, 42, 162):
            configs.append(
                ExperimentConfig(
                    testcase="sbr-cosine", method="local", N=n_nodes, n=9,
                    dt="pi/2", tfinal=2 * math.pi,
                )
            )

        def fake_run(cfg):
            return {"N": cfg.N, "final": {"rel_l2": 1e-15, "rel_linf": 1e-15}}

        monkeypatch.setattr(cli, "run_experiment", fake_run)
        result = run_convergence(configs)
        assert result["rate_fit"].startswith("skipped")


class TestMain:
    def test_nodes_subcommand(self, capsys):
        assert main(["nodes", "--level", "2"]) == 0
        assert "N=162" in capsys.readouterr().out

    def test_nodes_roundtrip_file(self, tmp_path, capsys):
        path = tmp_path / "n.txt"
        main(["nodes", "--level", "1", "--out", str(path)])
        capsys.readouterr()
        assert main(["nodes", "--nodes-file", str(path)]) == 0
        assert "N=42" in capsys.readouterr().out

    def test_invalid_config_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--method", "global", "--level", "2", "--a", "2.5", "--dt", "0.1"])
        assert exc.value.code == 2

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        cfgfile = tmp_path / "exp.cfg"
        cfgfile.write_text(
            "testcase = sbr-cosine\nmethod = local\nlevel = 2\nn = 17\n"
            "dt = pi/4\ntfinal = 3.14159265358979312\n"
        )
        assert main(["run", "--config", str(cfgfile), "--n", "31"]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["config"]["n"] == 31
        assert summary["N"] == 162

    def test_unknown_config_key_rejected(self, tmp_path):
        cfgfile = tmp_path / "bad.cfg"
        cfgfile.write_text("frobnicate = 3\n")
        with pytest.raises(SystemExit):
            main(["run", "--config", str(cfgfile)])
