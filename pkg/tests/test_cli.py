import dataclasses

import numpy as np
import pytest

from migfilter import cli, config
from migfilter.config import ExperimentConfig


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig(system="slip", user="skilled", mode="assistance",
                           trials=7, duration=12.5, seed=99, jobs=2,
                           filter_q=[0.0, 0.0, 60.0, 2.0, 0.0],
                           out_dir="out/somewhere")
    path = tmp_path / "c.cfg"
    config.save(cfg, path)
    assert config.load(path) == cfg


def test_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text('system = "cart_pendulum"\nwarp_speed = 9\n', encoding="utf-8")
    with pytest.raises(ValueError, match="warp_speed"):
        config.load(path)


def test_config_parser_values():
    text = '\n'.join([
        '# comment',
        'system = "slip"',
        'trials = 20',
        'duration = 30.0',
        'filter_q = [0.0, 0.0, 60.0, 2.0, 0.0]',
        'seed = 7  # inline comment',
    ])
    values = config.parse_flat_toml(text)
    assert values["system"] == "slip"
    assert values["trials"] == 20
    assert values["filter_q"] == [0.0, 0.0, 60.0, 2.0, 0.0]
    assert values["seed"] == 7


def test_config_parser_errors():
    with pytest.raises(ValueError):
        config.parse_flat_toml("no equals sign here")
    with pytest.raises(ValueError):
        config.parse_flat_toml('x = "unterminated')
    with pytest.raises(ValueError):
        config.parse_flat_toml("x = [1, 2")
    with pytest.raises(ValueError):
        config.parse_flat_toml("x = what")


def test_bundled_configs_load():
    for name in ("fig6.cfg", "slip_noise.cfg", "slip_lowskill.cfg",
                 "slip_skilled.cfg"):
        cfg = config.load(config.bundled_config_path(name))
        assert cfg.trials >= 20
    fig6 = config.load(config.bundled_config_path("fig6.cfg"))
    assert fig6.system == "cart_pendulum"
    assert fig6.user == "noise"
    assert fig6.mode == "assistance"
    assert fig6.trials == 100


def test_usage_errors_exit_one(capsys):
    assert cli.main(["bogus"]) == cli.EXIT_USAGE
    assert cli.main(["run", "--config", "missing.cfg"]) == cli.EXIT_USAGE
    assert cli.main(["run", "--system", "hexapod"]) == cli.EXIT_USAGE


def test_run_writes_artifacts_and_is_deterministic(tmp_path, capsys):
    args = ["run", "--system", "cart_pendulum", "--user", "noise", "--mode", "off",
            "--trials", "1", "--duration", "0.5", "--seed", "7"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == cli.EXIT_OK
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == cli.EXIT_OK
    a = (tmp_path / "a" / "trial_0000.csv").read_text()
    b = (tmp_path / "b" / "trial_0000.csv").read_text()
    assert a == b
    out = capsys.readouterr().out
    assert "success rate" in out


def test_run_flag_overrides_config(tmp_path):
    base = ExperimentConfig(system="cart_pendulum", user="noise", mode="off",
                            trials=5, duration=1.0, seed=1)
    path = tmp_path / "base.cfg"
    config.save(base, path)
    args = ["run", "--config", str(path), "--trials", "1", "--seed", "3",
            "--out", str(tmp_path / "out")]
    assert cli.main(args) == cli.EXIT_OK
    written = config.load(tmp_path / "out" / "config.cfg")
    assert written.trials == 1
    assert written.seed == 3
    assert written.duration == 1.0  # from the file


def test_campaign_artifact_embeds_config(tmp_path):
    args = ["run", "--system", "cart_pendulum", "--user", "noise", "--mode",
            "training", "--trials", "2", "--duration", "0.3", "--seed", "11",
            "--out", str(tmp_path)]
    assert cli.main(args) == cli.EXIT_OK
    stored = config.load(tmp_path / "config.cfg")
    assert stored.seed == 11
    assert stored.trials == 2
    rows = __import__("migfilter.harness", fromlist=["read_trials_csv"]).read_trials_csv(
        tmp_path / "trials.csv")
    assert [int(r["seed"]) for r in rows] == [11, 12]


def test_validate_passes():
    assert cli.main(["validate"]) == cli.EXIT_OK


def test_validate_detects_broken_jacobian(monkeypatch, capsys):
    import migfilter.cli as cli_mod

    def broken_checks():
        def bad():
            assert 1e-1 < 1e-3, "injected fault"
            return ""
        return [("injected", bad)]

    monkeypatch.setattr(cli_mod, "validation_checks", broken_checks)
    assert cli_mod.main(["validate"]) == cli_mod.EXIT_VALIDATION
    assert "FAIL" in capsys.readouterr().out
