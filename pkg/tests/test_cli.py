import json
import shutil
import subprocess
import sys

import pytest

from vpl_limit.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_PROPERTY, EXIT_USAGE, main
from vpl_limit.serialization import read_csv, read_trajectory, validate_json

TINY_SIM = """
[simulation]
n_x = 8
n_v_ion = 12
n_v_electron = 12
dt = 0.02
t_end = 0.06
eps = 0.2
"""


def write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def load(path):
    return json.loads(path.read_text())


class TestUsage:
    def test_no_command(self, capsys):
        assert main([]) == EXIT_USAGE
        assert "missing command" in capsys.readouterr().err

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as exc:
            main(["nondim", "--bogus"])
        assert exc.value.code == EXIT_USAGE

    def test_config_key_error(self, tmp_path, capsys):
        cfg = write(tmp_path, 'command = "simulate"\n[simulation]\neps = -0.1\n')
        assert main(["--config", cfg]) == EXIT_USAGE
        assert "simulation.eps" in capsys.readouterr().err

    def test_parse_error(self, tmp_path, capsys):
        cfg = write(tmp_path, 'command = "simulate"\neps = = 1\n')
        assert main(["--config", cfg]) == EXIT_USAGE
        assert "line 2" in capsys.readouterr().err

    def test_command_mismatch(self, tmp_path):
        cfg = write(tmp_path, 'command = "simulate"\n')
        assert main(["nondim", "--config", cfg]) == EXIT_USAGE

    def test_missing_file(self, tmp_path):
        assert main(["--config", str(tmp_path / "nope.toml")]) == EXIT_USAGE

    def test_bad_threads(self, tmp_path):
        assert main(["nondim", "--threads", "0", "--output", str(tmp_path)]) == EXIT_USAGE

    def test_auto_log_failure_is_usage(self, tmp_path, capsys):
        cfg = write(tmp_path, 'command = "nondim"\n[nondim]\nN = 1.0\n')
        assert main(["--config", cfg, "--output", str(tmp_path)]) == EXIT_USAGE
        assert "ln_Lambda" in capsys.readouterr().err


class TestCommands:
    def test_nondim(self, tmp_path, capsys):
        assert main(["nondim", "--output", str(tmp_path), "--seed", "5"]) == EXIT_OK
        data = load(tmp_path / "nondim_5.json")
        validate_json(data, "nondim")
        assert data["scales"]["eps"] == pytest.approx(0.0707, abs=1e-4)
        assert "eps = " in capsys.readouterr().out

    def test_flags_after_subcommand_or_before(self, tmp_path):
        assert main(["--seed", "2", "nondim", "--output", str(tmp_path)]) == EXIT_OK
        assert (tmp_path / "nondim_2.json").exists()

    def test_pp_solve(self, tmp_path):
        assert main(["pp-solve", "--quick", "--output", str(tmp_path)]) == EXIT_OK
        cols, data = read_csv(tmp_path / "pp_solve_0_psi.csv")
        assert cols == ["x", "n_plus", "psi"] and data.shape == (16, 3)
        rep = load(tmp_path / "pp_solve_0_report.json")
        validate_json(rep, "pp_report")

    def test_pp_solve_nonconvergence(self, tmp_path):
        cfg = write(tmp_path, 'command = "pp-solve"\n[pp_solve]\namplitude = 0.9\nmax_iter = 1\n'
                              'tol = 1e-14\n')
        assert main(["--config", cfg, "--output", str(tmp_path)]) == EXIT_NUMERICAL

    def test_kernel_bounds(self, tmp_path):
        cfg = write(tmp_path, 'command = "check-kernel-bounds"\n[kernel_bounds]\nn = 12\nfields = 2\n'
                              'samples = 20\n')
        assert main(["--config", cfg, "--output", str(tmp_path)]) == EXIT_OK
        rep = load(tmp_path / "check_kernel_bounds_0.json")
        validate_json(rep, "kernel_bounds")
        assert rep["violations"] == 0

    def test_boltzmann_expand_property_failure(self, tmp_path):
        # the shifted-state blow-up check cannot pass, so this exits with 3
        cfg = write(tmp_path, 'command = "boltzmann-expand"\n[boltzmann]\neps_values = [0.2, 0.1]\n'
                              'quad_degree = 6\nion_n = 8\nelectron_n = 8\nlandau_n = 8\n')
        code = main(["--config", cfg, "--output", str(tmp_path)])
        assert code == EXIT_PROPERTY
        rep = load(tmp_path / "boltzmann_expand_0_slopes.json")
        validate_json(rep, "boltzmann_slopes")
        assert rep["checks"]["radial_singular_zero"] is True

    def test_simulate_and_macro(self, tmp_path):
        cfg = write(tmp_path, 'command = "simulate"\nseed = 1\n' + TINY_SIM)
        assert main(["--config", cfg, "--output", str(tmp_path)]) == EXIT_OK
        validate_json(load(tmp_path / "simulate_1_summary.json"), "run_summary")
        frames, meta = read_trajectory(tmp_path / "simulate_1.snap")
        assert len(frames) == 4 and meta["eps"] == 0.2
        macro = write(tmp_path, f'command = "macro-diagnose"\nseed = 1\n[macro]\n'
                                f'trajectory = "{tmp_path / "simulate_1.snap"}"\n', "m.toml")
        assert main(["--config", macro, "--output", str(tmp_path)]) == EXIT_OK
        validate_json(load(tmp_path / "macro_diagnose_1_summary.json"), "macro_summary")
        cols, data = read_csv(tmp_path / "macro_diagnose_1.csv")
        assert cols[0] == "t" and data.shape == (4, 5)

    def test_simulate_byte_identical(self, tmp_path):
        cfg = write(tmp_path, 'command = "simulate"\nseed = 9\n' + TINY_SIM.replace(
            "eps = 0.2", "eps = 0.2\nnoise = 0.01\nmode = \"limit\""))
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["--config", cfg, "--output", str(a)]) == EXIT_OK
        assert main(["--config", cfg, "--output", str(b)]) == EXIT_OK
        name = "simulate_9_diagnostics.csv"
        assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_sweep_writes_report(self, tmp_path):
        cfg = write(tmp_path, 'command = "sweep"\n[sweep]\neps_values = [0.2, 0.1]\n' + TINY_SIM)
        code = main(["--config", cfg, "--output", str(tmp_path)])
        assert code in (EXIT_OK, EXIT_PROPERTY)
        rep = load(tmp_path / "sweep_0_summary.json")
        validate_json(rep, "sweep_report")
        assert (code == EXIT_OK) == rep["passed"]
        assert (tmp_path / "sweep_0_eps0.1.csv").exists()


@pytest.mark.skipif(shutil.which("vpl-limit") is None, reason="console script not installed")
def test_console_script(tmp_path):
    out = subprocess.run(["vpl-limit", "nondim", "--output", str(tmp_path)], capture_output=True,
                         text=True)
    assert out.returncode == 0
    out = subprocess.run([sys.executable, "-m", "vpl_limit.cli"], capture_output=True, text=True)
    assert out.returncode == EXIT_USAGE
