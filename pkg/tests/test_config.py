"""Run-configuration resolution: defaults, file, env, flags, validation."""

import json

import pytest

from fmlslab import ConfigurationError
from fmlslab.config import DEFAULTS, ENV_OUTPUT_DIR, load_json_config, resolve_config


def test_defaults_resolve():
    cfg = resolve_config()
    assert cfg.model.alpha == 1.4
    assert cfg.model.sigma == 0.25
    assert cfg.model.rate == 0.05
    assert cfg.option.strike == 100.0
    assert cfg.option.expiry == 1.0
    assert cfg.output_dir == "fmlslab-out"
    assert cfg.output_format == "csv"
    assert cfg.figures is True
    assert cfg.mc.n_paths == 1_000_000
    assert cfg.mc.seed == 12345
    assert cfg.scan_alphas == (1.4, 1.6, 1.8, 2.0)
    assert cfg.scan_spots == (100.0, 110.0, 120.0, 140.0)
    assert cfg.level == 8
    # resolved snapshot mirrors the defaults exactly
    assert cfg.resolved == DEFAULTS
    assert cfg.resolved is not DEFAULTS


def test_file_overrides_defaults(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"model": {"alpha": 1.7},
                                "output": {"directory": "elsewhere"}}))
    cfg = resolve_config(file_config=load_json_config(path))
    assert cfg.model.alpha == 1.7
    assert cfg.model.sigma == 0.25  # untouched default survives
    assert cfg.output_dir == "elsewhere"
    assert cfg.resolved["model"]["alpha"] == 1.7


def test_flags_beat_file():
    cfg = resolve_config(file_config={"model": {"alpha": 1.7, "rate": 0.03}},
                         flag_overrides={"model": {"alpha": 1.9}})
    assert cfg.model.alpha == 1.9
    assert cfg.model.rate == 0.03


def test_env_var_between_file_and_flags():
    env = {ENV_OUTPUT_DIR: "env-dir"}
    cfg = resolve_config(file_config={"output": {"directory": "file-dir"}},
                         env=env)
    assert cfg.output_dir == "env-dir"
    cfg = resolve_config(file_config={"output": {"directory": "file-dir"}},
                         flag_overrides={"output": {"directory": "flag-dir"}},
                         env=env)
    assert cfg.output_dir == "flag-dir"
    # the env var touches nothing but the output directory
    cfg = resolve_config(env={ENV_OUTPUT_DIR: "env-dir"})
    assert cfg.output_format == "csv"


@pytest.mark.parametrize("raw", [
    {"modle": {}},
    {"model": {"alpa": 1.5}},
    {"grid": {"levels": 3}},
    {"tolerances": {"convexityy": 1e-6}},
])
def test_unknown_keys_rejected_with_path(raw):
    with pytest.raises(ConfigurationError, match="unknown config key"):
        resolve_config(file_config=raw)


def test_malformed_json_rejected(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigurationError, match="malformed JSON"):
        load_json_config(path)
    missing = tmp_path / "absent.json"
    with pytest.raises(ConfigurationError):
        load_json_config(missing)
    alist = tmp_path / "list.json"
    alist.write_text("[1, 2]")
    with pytest.raises(ConfigurationError, match="JSON object"):
        load_json_config(alist)


@pytest.mark.parametrize("raw", [
    {"model": {"alpha": True}},
    {"model": {"alpha": "1.5"}},
    {"mc": {"n_paths": 10.5}},
    {"mc": {"seed": True}},
    {"grid": {"level": 99}},
    {"grid": {"tol": -1.0}},
    {"scan": {"alphas": [1.8, 1.4]}},
    {"scan": {"alphas": []}},
    {"scan": {"s_min": 150.0, "s_max": 50.0}},
    {"scan": {"kind": "asian"}},
    {"output": {"format": "xml"}},
    {"output": {"directory": ""}},
    {"tolerances": {"convexity": 0.0}},
])
def test_invalid_values_rejected(raw):
    with pytest.raises(ConfigurationError):
        resolve_config(file_config=raw)


def test_model_params_validated_at_build():
    with pytest.raises(ConfigurationError):
        resolve_config(file_config={"model": {"alpha": 2.5}})
    with pytest.raises(ConfigurationError):
        resolve_config(file_config={"option": {"strike": -5.0}})


def test_with_model_sweeps_cleanly():
    base = resolve_config()
    swept = base.with_model(alpha=1.9)
    assert swept.model.alpha == 1.9
    assert base.model.alpha == 1.4
    assert swept.resolved["model"]["alpha"] == 1.9
    assert base.resolved["model"]["alpha"] == 1.4
    assert swept.output_dir == base.output_dir


def test_resolved_snapshot_round_trips():
    """Feeding a resolved snapshot back in reproduces the configuration."""
    cfg = resolve_config(file_config={"model": {"alpha": 1.6},
                                      "mc": {"seed": 777}})
    again = resolve_config(file_config=cfg.resolved)
    assert again.model == cfg.model
    assert again.mc == cfg.mc
    assert again.resolved == cfg.resolved
