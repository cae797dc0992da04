"""Config loading, merging, validation and the shipped presets."""

from __future__ import annotations

import math

import pytest
import toml

from cqed_pairsim.config import (
    COMMAND_KEYS,
    PRESETS,
    _resolve_config_path,
    build_config,
    command_schema,
    flatten,
    load_preset,
    parse_override,
    unflatten,
)
from cqed_pairsim.errors import ConfigError
from cqed_pairsim.spectra import AblationVariant
from cqed_pairsim.utils import uniform_grid


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_every_preset_validates_for_its_command(name):
    cfg = build_config(PRESETS[name], preset=name)
    assert cfg.command == PRESETS[name]
    assert set(cfg.values) <= COMMAND_KEYS[cfg.command].allowed


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_every_preset_feeds_derived(name):
    cfg = build_config("derived", preset=name)
    assert all(k.startswith(("model.", "sweep.")) for k in cfg.values)


def test_fig4_preset_values():
    cfg = build_config("lz", preset="fig4")
    assert cfg.sweep.delta1_0 == pytest.approx(3.84)
    assert cfg.sweep.v == pytest.approx(6e-5)
    assert cfg.sweep.delta1_at(cfg.sweep.t_end) == pytest.approx(4.16)
    assert cfg.initial_state == "psi4"
    assert cfg.integrator.method == "magnus"
    assert cfg.time_grid.values()[-1] == pytest.approx(cfg.sweep.t_end)


def test_fig2_preset_values():
    cfg = build_config("spectrum-scan", preset="fig2")
    assert cfg.variants == [AblationVariant.FULL, AblationVariant.DROP_HCR, AblationVariant.DROP_HR]
    assert len(cfg.delta1_grid.values()) == 201
    assert cfg.levels == 6


def test_fig5_and_fig6b_differ_only_in_coupling_sign():
    fig5 = load_preset("fig5")
    fig6b = load_preset("fig6b")
    diff = {k for k in fig5 if fig5[k] != fig6b.get(k)}
    assert diff == {"model.g2_ghz"}
    assert fig6b["model.g2_ghz"] == -fig5["model.g2_ghz"]


def test_fig5_pulse_and_decay():
    cfg = build_config("rabi", preset="fig5")
    assert cfg.pulse.amplitude_area == pytest.approx(math.pi / 2)
    assert cfg.pulse.peak_amplitude == pytest.approx(0.031333, abs=1e-5)
    assert cfg.time_grid.start == pytest.approx(-100.0)
    assert cfg.pulse.omega_d == pytest.approx(cfg.model.omega)
    assert cfg.model.kappa == pytest.approx(0.0004)
    assert cfg.integrator.truncation_check is True
    assert cfg.initial_state == "ground"


def test_preset_with_foreign_command_is_rejected():
    with pytest.raises(ConfigError) as info:
        build_config("lz", preset="fig2")
    assert info.value.key == "preset"


def test_unknown_preset_is_rejected():
    with pytest.raises(ConfigError):
        build_config("derived", preset="fig9")


@pytest.mark.parametrize(
    "text,expected",
    [
        ("model.g2_ghz=-0.2", ("model.g2_ghz", -0.2)),
        ("model.n_max = 7", ("model.n_max", 7)),
        ("initial.state=1gg", ("initial.state", "1gg")),
        ("initial.state=psi4", ("initial.state", "psi4")),
        ('scan.variants=["full", "drop_HR"]', ("scan.variants", ["full", "drop_HR"])),
        ("integrator.truncation_check=false", ("integrator.truncation_check", False)),
    ],
)
def test_parse_override(text, expected):
    assert parse_override(text) == expected


def test_override_needs_equals_sign():
    with pytest.raises(ConfigError):
        parse_override("model.g2_ghz")


def test_missing_required_key_is_named():
    with pytest.raises(ConfigError) as info:
        build_config("lz", overrides=["sweep.v_ghz2=6e-5", "sweep.t_end_ns=10"])
    assert info.value.key == "sweep.delta1_0_ghz"


def test_extra_key_is_rejected():
    with pytest.raises(ConfigError) as info:
        build_config("derived", overrides=["pulse.peak_ghz=0.05"])
    assert info.value.key == "pulse.peak_ghz"


def test_type_error_is_named():
    with pytest.raises(ConfigError) as info:
        build_config("derived", overrides=["model.n_max=five"])
    assert info.value.key == "model.n_max"


def test_range_error_is_named():
    with pytest.raises(ConfigError) as info:
        build_config("derived", overrides=["model.kappa_ghz=-1e-3"])
    assert info.value.key == "model.kappa_ghz"


def test_too_many_levels_is_a_config_error():
    with pytest.raises(ConfigError) as info:
        build_config("spectrum-scan", preset="fig2", overrides=["scan.levels=30"])
    assert info.value.key == "scan.levels"


def test_interference_needs_first_coupling():
    with pytest.raises(ConfigError) as info:
        build_config("interference", preset="fig6a", overrides=["model.g1_ghz=0.0"])
    assert info.value.key == "model.g1_ghz"


def test_master_equation_rejects_exponential_propagator():
    with pytest.raises(ConfigError) as info:
        build_config("rabi", preset="fig5", overrides=['integrator.method="magnus"'])
    assert info.value.key == "integrator.method"


def test_pulse_amplitude_given_twice():
    with pytest.raises(ConfigError):
        build_config("rabi", preset="fig5", overrides=["pulse.area=2.5"])


def test_rabi_without_pulse_is_undriven():
    cfg = build_config("rabi", overrides=["time.stop_ns=10"])
    assert cfg.pulse is None
    assert cfg.integrator.method == "RK45"


def test_reversed_grid_is_a_config_error():
    with pytest.raises(ConfigError):
        build_config("rabi", overrides=["time.start_ns=10", "time.stop_ns=5"])


def test_grid_appends_missed_stop(caplog):
    with caplog.at_level("DEBUG", logger="cqed_pairsim"):
        grid = uniform_grid(0.0, 1.0, 0.3)
    assert list(grid) == [0.0, 0.3, 0.6, 0.9, 1.0]
    assert any("misses stop" in r.message for r in caplog.records)
    assert list(uniform_grid(-1.0, 1.0, 0.5)) == [-1.0, -0.5, 0.0, 0.5, 1.0]


def test_precedence_preset_file_override(tmp_path):
    cfg_file = tmp_path / "run.toml"
    cfg_file.write_text("[model]\nj_ghz = 0.05\ng2_ghz = 0.1\n", encoding="utf-8")
    cfg = build_config("derived", preset="fig4", config_path=cfg_file, overrides=["model.g2_ghz=0.3"])
    assert cfg.model.J == pytest.approx(0.05)
    assert cfg.model.g2 == pytest.approx(0.3)
    assert cfg.model.g1 == pytest.approx(0.2)
    assert cfg.sweep_rate == pytest.approx(6e-5)


def test_dotted_keys_in_file(tmp_path):
    cfg_file = tmp_path / "dotted.toml"
    cfg_file.write_text('model.delta1_ghz = 3.9\n', encoding="utf-8")
    cfg = build_config("derived", config_path=cfg_file)
    assert cfg.model.delta1 == pytest.approx(3.9)


def test_config_directory_resolves_to_config_toml(tmp_path):
    (tmp_path / "config.toml").write_text("[model]\nn_max = 4\n", encoding="utf-8")
    assert _resolve_config_path(tmp_path) == (tmp_path / "config.toml").resolve()
    assert build_config("derived", config_path=tmp_path).model.n_max == 4


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        build_config("derived", config_path=tmp_path / "nope.toml")


def test_broken_toml(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[model\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        build_config("derived", config_path=bad)


def test_effective_config_round_trips(tmp_path):
    cfg = build_config("lz", preset="fig4", overrides=["sweep.v_ghz2=6e-4"], output_path="out/lz.csv")
    assert "output.path" not in cfg.values
    assert cfg.output_path == "out/lz.csv"
    sidecar = tmp_path / "lz.csv.config.toml"
    sidecar.write_text(cfg.to_toml(), encoding="utf-8")
    again = build_config("lz", config_path=sidecar)
    assert again.values == cfg.values
    assert again.digest == cfg.digest


def test_flatten_unflatten():
    nested = {"model": {"g1_ghz": 0.2, "n_max": 5}, "scan": {"variants": ["full"]}}
    flat = flatten(nested)
    assert flat == {"model.g1_ghz": 0.2, "model.n_max": 5, "scan.variants": ["full"]}
    assert unflatten(flat) == nested
    assert flatten(toml.loads(toml.dumps(nested))) == flat


def test_command_schema_shape():
    schema = command_schema("interference")
    assert schema["additionalProperties"] is False
    assert set(schema["required"]) == {"scan.ratio_start", "scan.ratio_stop", "scan.ratio_step"}
    assert "model.g1_ghz" in schema["properties"]


def test_bare_filename_falls_back_to_repo_config_dir():
    cfg = build_config("derived", config_path="config.example.toml")
    assert cfg.model.g2 == pytest.approx(0.2)
    assert cfg.model.kappa == 0.0
