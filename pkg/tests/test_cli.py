import csv
import json
import warnings

import pytest

from opinion_kinetics import cli
from opinion_kinetics.config import parse_config, resolve
from opinion_kinetics.errors import ConfigError, NegativeDensityError
from opinion_kinetics.output import fmt

MINIMAL = """\
[model]
gamma = 0.1
lambda = 0.5
D = "one_minus_w2"

[numerics]
N = 100000
"""


def test_minimal_simulate_config_resolves_sigma2():
    run = parse_config(MINIMAL, "simulate")
    assert run.resolved["model"]["sigma2"] == pytest.approx(0.05)
    cfg = run.sim_config()
    assert cfg.n == 100000 and cfg.params.lam == pytest.approx(0.5)
    assert cfg.noise.variance == pytest.approx(0.05)


def test_gamma_out_of_range_reports_line():
    with pytest.raises(ConfigError, match=r"line 2: model.gamma: gamma must lie in \(0, 1/2\)"):
        parse_config("[model]\ngamma = 0.7\n", "simulate")


def test_unknown_key_and_section_rejected():
    with pytest.raises(ConfigError, match="line 3: model.gama"):
        parse_config("[model]\ngamma = 0.1\ngama = 0.2\n", "simulate")
    with pytest.raises(ConfigError, match="line 1: solver"):
        parse_config("[solver]\nK = 3\n", "fp-solve")


def test_type_and_downstream_errors_carry_field():
    with pytest.raises(ConfigError, match="line 4: numerics.N"):
        parse_config("[model]\ngamma = 0.1\n[numerics]\nN = 2.5\n", "simulate")
    with pytest.raises(ConfigError, match="initial.mean"):
        parse_config('[model]\ngamma = 0.1\n[initial]\nkind = "tilted"\nmean = 0.9\n', "simulate")
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("[model]\ngamma = = 1\n", "simulate")


def test_inconsistent_lambda_and_sigma2():
    with pytest.raises(ConfigError, match="model.sigma2"):
        parse_config("[model]\ngamma = 0.1\nlambda = 0.5\nsigma2 = 0.2\n", "simulate")


def test_missing_noise_section_defaults_to_clipped_uniform():
    with pytest.warns(UserWarning, match="clipped"):
        run = parse_config('[model]\ngamma = 0.1\nlambda = 5.0\nD = "one_minus_w2"\n', "simulate")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        noise = run.sim_config().noise
    assert noise.halfwidth == pytest.approx(0.45)


def test_resolved_config_round_trips():
    run = parse_config(MINIMAL, "simulate")
    again = resolve(json.loads(json.dumps(run.resolved)), "simulate")
    assert again.resolved == run.resolved


def test_float_format_round_trips():
    for x in (0.1, 1 / 3, 1e-300, -2.5e17):
        assert float(fmt(x)) == x


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_commands_write_documented_schemas(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[model]\ngamma = 0.1\nlambda = 0.5\nD = "one_minus_w2"\n'
                   '[initial]\nkind = "tilted"\nmean = 0.2\n'
                   '[numerics]\nN = 2000\nt_end = 15\nK = 100\ntau_end = 1.0\n'
                   '[sweep]\ngammas = [0.12]\ntau_end = 1.0\nn_boot = 10\n')
    expected = {
        "simulate": {"moments.csv": "t,mean,second_moment,c_f,rejected_fraction",
                     "histogram.csv": "cell_center,density"},
        "moment-check": {"moment_check.csv": "fitted_rate,predicted_rate,continuum_rate,"
                                             "relative_deviation,points_used"},
        "fp-solve": {"grid.csv": "cell_center,density",
                     "moments.csv": "t,mean,second_moment,c_f,rejected_fraction"},
        "steady-state": {"stationary.csv": "cell_center,density"},
        "limit-sweep": {"sweep.csv": "gamma,sigma2,effective_lambda,L1_to_fp,L1_to_closed_form,"
                                     "W1_to_fp,rejected_fraction",
                        "sweep_runtime.csv": "gamma,runtime_seconds"},
    }
    for command, files in expected.items():
        out = tmp_path / command
        assert cli.main([command, "--config", str(cfg), "--out", str(out), "--gnuplot"]) == 0
        for name, header in files.items():
            rows = read_csv(out / name)
            assert ",".join(rows[0]) == header
            assert len(rows) > 1
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == command and manifest["seed"] == 0
        assert (out / "plot.gp").exists()


def test_seed_override_changes_output_and_is_recorded(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[model]\ngamma = 0.1\nlambda = 0.3\n[numerics]\nN = 500\nt_end = 3\n")
    cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "7"])
    cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "8"])
    a = (tmp_path / "a" / "moments.csv").read_bytes()
    assert a != (tmp_path / "b" / "moments.csv").read_bytes()
    assert json.loads((tmp_path / "a" / "manifest.json").read_text())["seed"] == 7
    cli.main(["run", "--manifest", str(tmp_path / "a" / "manifest.json"), "--out",
              str(tmp_path / "c"), "--threads", "2"])
    assert (tmp_path / "c" / "moments.csv").read_bytes() == a


def test_exit_codes(tmp_path, monkeypatch, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[model]\ngamma = 0.9\n")
    assert cli.main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "gamma must lie in (0, 1/2)" in capsys.readouterr().err
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.toml")]) == 1

    good = tmp_path / "good.toml"
    good.write_text("[model]\nlambda = 0.5\n[numerics]\nK = 50\ntau_end = 0.1\n")

    def explode(*a, **k):
        raise NegativeDensityError("density fell below tolerance")

    monkeypatch.setattr(cli, "fp_solve", explode)
    assert cli.main(["fp-solve", "--config", str(good), "--out", str(tmp_path / "o")]) == 2


def test_help_documents_defaults(capsys):
    with pytest.raises(SystemExit):
        cli.main(["simulate", "--help"])
    out = capsys.readouterr().out
    assert "N = 10000" in out and "gammas" in out
