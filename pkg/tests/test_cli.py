import subprocess
import sys

import numpy as np
import pytest

from fedfda import cli, harness
from fedfda import datagen as dg
from fedfda.configio import ConfigError, load_config, parse_config_text
from fedfda.rates import solve_common

HOMOG_COMMON = """
design = common
sweep = n
sweep_values = 100
replications = 1
base_seed = 5
alpha = 1.0
R = 2.0

server {
    n = 100
    m = 64
    epsilon = 1.0
}
"""

SMALL_SIM = """
design = independent
sweep = n
sweep_values = 8 16
replications = 2
base_seed = 101
delta_rule = fixed
delta_value = 1e-4
alpha = 1.0
R = 2.0
curve_L_star = 5

server {
    n = 16
    m = 4
    epsilon = 1.0
}
"""


class TestConfigParsing:
    def test_round_trip_small(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text(SMALL_SIM)
        spec = load_config(path)
        assert spec.sweep_values == (8.0, 16.0)
        assert spec.servers[0].m == 4
        assert spec.curve.L_star == 5

    def test_unknown_key_has_line_number(self):
        bad = "design = common\nsweep = n\nbogus = 3\n"
        with pytest.raises(ConfigError, match="line 3.*bogus"):
            parse_config_text(bad)

    def test_bad_number_has_field_name(self):
        bad = HOMOG_COMMON.replace("epsilon = 1.0", "epsilon = soon")
        with pytest.raises(ConfigError, match="epsilon"):
            parse_config_text(bad)

    def test_missing_server_block(self):
        bad = "design = common\nsweep = n\nsweep_values = 2\n" \
              "replications = 1\nbase_seed = 1\nalpha = 1.0\nR = 2.0\n"
        with pytest.raises(ConfigError, match="server"):
            parse_config_text(bad)

    def test_unclosed_block(self):
        with pytest.raises(ConfigError, match="never closed"):
            parse_config_text(HOMOG_COMMON.replace("}", ""))

    def test_inf_epsilon(self):
        spec = parse_config_text(HOMOG_COMMON.replace("epsilon = 1.0",
                                                      "epsilon = inf"))
        assert not spec.servers[0].private
        assert spec.servers[0].delta == 0.0

    def test_delta_rule_applied(self):
        spec = parse_config_text(HOMOG_COMMON)
        assert spec.servers[0].delta == pytest.approx(1e-4)

    def test_bad_family_rejected_at_parse(self):
        bad = HOMOG_COMMON.replace("R = 2.0", "R = 2.0\nfamily = sym5")
        with pytest.raises(ConfigError, match="unsupported wavelet family"):
            parse_config_text(bad)


class TestCliCommands:
    def test_rates_matches_solver(self, tmp_path, capsys):
        path = tmp_path / "c.cfg"
        path.write_text(HOMOG_COMMON)
        assert cli.main(["rates", str(path)]) == 0
        out = capsys.readouterr().out
        sol = solve_common([dg.ServerConfig(100, 64, 1.0, 1e-4)], 64, 1.0)
        assert f"{sol.d_star:.6g}" in out

    def test_unknown_subcommand_usage_exit(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["frobnicate"])
        assert exc.value.code == 2

    def test_config_error_exit_2(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("design = waffle\nsweep = n\n")
        assert cli.main(["rates", str(path)]) == 2
        assert "line" in capsys.readouterr().err

    def test_simulate_deterministic_bytes(self, tmp_path, capsys):
        path = tmp_path / "c.cfg"
        path.write_text(SMALL_SIM)
        out1, out2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
        assert cli.main(["simulate", str(path), "--out", str(out1)]) == 0
        assert cli.main(["simulate", str(path), "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_simulate_seed_override_changes_output(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text(SMALL_SIM)
        out1, out2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
        cli.main(["simulate", str(path), "--out", str(out1)])
        cli.main(["simulate", str(path), "--out", str(out2), "--seed", "999"])
        assert out1.read_bytes() != out2.read_bytes()

    def test_simulate_plot_emission(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text(SMALL_SIM)
        plot = tmp_path / "series.csv"
        cli.main(["simulate", str(path), "--out", str(tmp_path / "r.csv"),
                  "--plot", str(plot)])
        assert plot.read_text().startswith("sweep,log10_sweep,log10_mean_imse")

    def test_estimate_writes_evaluations(self, tmp_path, capsys):
        cfg_path = tmp_path / "c.cfg"
        cfg_path.write_text(SMALL_SIM)
        spec = load_config(cfg_path)
        datasets = harness.base_datasets(spec)
        data_path = tmp_path / "data.csv"
        dg.save_datasets_csv(datasets, data_path)
        out = tmp_path / "evals.csv"
        assert cli.main(["estimate", str(data_path), str(cfg_path),
                         "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "x,fhat"
        assert len(lines) == 2**harness.IMSE_DEPTH + 2

    def test_audit_passes(self, tmp_path):
        cfg_path = tmp_path / "c.cfg"
        cfg_path.write_text(SMALL_SIM)
        assert cli.main(["audit", str(cfg_path), "--trials", "20"]) == 0

    def test_common_design_estimate_and_audit(self, tmp_path):
        cfg_path = tmp_path / "c.cfg"
        cfg_path.write_text(SMALL_SIM.replace("design = independent",
                                              "design = common"))
        spec = load_config(cfg_path)
        datasets = harness.base_datasets(spec)
        data_path = tmp_path / "data.csv"
        dg.save_datasets_csv(datasets, data_path)
        out = tmp_path / "evals.csv"
        assert cli.main(["estimate", str(data_path), str(cfg_path),
                         "--out", str(out)]) == 0
        assert out.read_text().startswith("x,fhat")
        assert cli.main(["audit", str(cfg_path), "--trials", "20"]) == 0

    def test_entry_point_installed(self):
        proc = subprocess.run([sys.executable, "-m", "fedfda.cli", "--help"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "rates" in proc.stdout


class TestPackagedConfigs:
    @pytest.mark.parametrize("name", ["fig1.cfg", "fig2.cfg", "rates_demo.cfg",
                                      "audit.cfg", "demo_small.cfg"])
    def test_all_parse(self, name):
        import pathlib
        root = pathlib.Path(__file__).resolve().parents[1]
        load_config(root / "configs" / name)
