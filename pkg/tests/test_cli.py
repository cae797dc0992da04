"""End-to-end runs of the command-line entry point.

Presets that integrate over microseconds (fig4) or the full master equation
(fig5, fig6b) are marked `slow`.
"""

from __future__ import annotations

from pathlib import Path
from typing import List

import numpy as np
import pytest

from cqed_pairsim.cli import main, sidecar_path, table_paths
from cqed_pairsim.tables import CsvTable, read_csv


def _run(capsys, argv: List[str]) -> CsvTable:
    main(argv)
    return read_csv(capsys.readouterr().out)


def _exit_code(argv: List[str]) -> int:
    with pytest.raises(SystemExit) as info:
        main(argv)
    return info.value.code


def test_derived_quantities(capsys):
    table = _run(capsys, ["derived", "--preset", "fig4"])
    row = dict(zip(table.columns, table.rows[0]))
    assert row["Gs_GHz"] == pytest.approx(0.01)
    assert row["beta1"] == pytest.approx(0.025)
    assert row["half_rabi_time_ns"] == pytest.approx(157.1, abs=0.1)
    assert row["adiabaticity"] == pytest.approx(10.47, abs=0.01)
    assert any(c.startswith("config_sha256: ") for c in table.comments)


def test_derived_without_sweep_has_no_adiabaticity(capsys):
    table = _run(capsys, ["derived"])
    assert "adiabaticity" not in table.columns
    assert len(table.rows) == 1


def test_derived_with_cancelling_couplings(capsys):
    table = _run(capsys, ["derived", "--preset", "fig6b"])
    row = dict(zip(table.columns, table.rows[0]))
    assert row["Gs_GHz"] == 0.0
    assert "half_rabi_time_ns" not in table.columns
    assert "half_rabi_time_ns: undefined (Gs = 0)" in table.comments


def test_spectrum_scan_preset_writes_one_file_per_variant(tmp_path):
    out = tmp_path / "fig2.csv"
    main(["spectrum-scan", "--preset", "fig2", "--out", str(out)])
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["fig2.csv.config.toml", "fig2_drop_HCR.csv", "fig2_drop_HR.csv", "fig2_full.csv"]

    full = read_csv((tmp_path / "fig2_full.csv").read_text(encoding="utf-8"))
    assert full.columns[:2] == ["delta1_GHz", "E0_GHz"]
    assert len(full.rows) == 201
    gaps = full.column("gap_GHz")
    best = int(np.argmin(gaps))
    assert full.column("delta1_GHz")[best] == pytest.approx(4.0, abs=0.01)
    assert set(full.column("variant")) == {"full"}


def test_single_point_grid(capsys):
    table = _run(
        capsys,
        ["spectrum-scan", "--preset", "fig2", "--set", "scan.delta1_stop_ghz=3.8", "--set", 'scan.variants=["full"]'],
    )
    assert len(table.rows) == 1
    assert table.rows[0][0] == pytest.approx(3.8)


def test_too_many_levels_exits_with_config_error():
    assert _exit_code(["spectrum-scan", "--preset", "fig2", "--set", "scan.levels=30"]) == 2


def test_missing_grid_exits_with_config_error():
    assert _exit_code(["spectrum-scan", "--set", "scan.delta1_start_ghz=3.8"]) == 2


def test_preset_for_another_command_exits_with_config_error():
    assert _exit_code(["lz", "--preset", "fig6a"]) == 2


def test_output_is_deterministic_and_sidecar_reproduces_it(tmp_path):
    first = tmp_path / "a.csv"
    second = tmp_path / "b.csv"
    replay = tmp_path / "c.csv"
    argv = ["interference", "--preset", "fig6a", "--set", "scan.ratio_start=-1.0", "--set", "scan.ratio_stop=1.0", "--set", "scan.ratio_step=0.5"]
    main(argv + ["--out", str(first)])
    main(argv + ["--out", str(second)])
    main(["interference", "--config", str(sidecar_path(first)), "--out", str(replay)])
    assert first.read_bytes() == second.read_bytes() == replay.read_bytes()


def test_interference_preset(capsys):
    table = _run(capsys, ["interference", "--preset", "fig6a"])
    assert len(table.rows) == 61
    gaps = {round(r, 6): g for r, g in zip(table.column("ratio"), table.column("gap_GHz"))}
    assert gaps[0.0] == pytest.approx(0.01, rel=0.1)
    assert gaps[1.0] == pytest.approx(0.02, rel=0.1)
    assert gaps[-1.0] <= 0.05 * gaps[1.0]


def test_lz_without_time_is_initial_state(capsys):
    table = _run(capsys, ["lz", "--preset", "fig4", "--set", "sweep.t_end_ns=0"])
    assert len(table.rows) == 1
    row = dict(zip(table.columns, table.rows[0]))
    assert row["t_ns"] == 0.0
    assert row["P_psi4"] == pytest.approx(1.0)
    assert row["P_1gg"] >= 0.97


def test_lz_fast_sweep(capsys):
    # same delta1 range, swept a thousand times faster
    table = _run(
        capsys,
        [
            "lz",
            "--preset",
            "fig4",
            "--set",
            "sweep.v_ghz2=6e-2",
            "--set",
            "sweep.t_end_ns=5.3333333333333",
            "--set",
            "time.step_ns=0.05",
        ],
    )
    assert table.column("P_0ee")[-1] <= 0.1


@pytest.mark.slow
def test_lz_preset(capsys):
    table = _run(capsys, ["lz", "--preset", "fig4"])
    assert table.column("P_0ee")[-1] >= 0.98
    assert table.column("delta1_GHz")[-1] == pytest.approx(4.16)


def test_rabi_integration_failure_exits_with_numerical_error():
    argv = ["rabi", "--preset", "fig5", "--set", "time.stop_ns=10", "--set", "integrator.max_steps=1"]
    assert _exit_code(argv) == 3


def test_rabi_magnus_is_a_config_error():
    assert _exit_code(["rabi", "--preset", "fig5", "--set", "integrator.method=magnus"]) == 2


@pytest.mark.slow
def test_rabi_preset(capsys):
    table = _run(capsys, ["rabi", "--preset", "fig5"])
    t = np.array(table.column("t_ns"))
    gq2 = np.array(table.column("gq2"))
    peak = int(np.argmax(gq2))
    assert gq2[peak] >= 0.9
    assert 120.0 <= t[peak] <= 250.0
    assert t[0] == -100.0
    assert max(table.column("trace_error")) < 1e-8


@pytest.mark.slow
def test_rabi_destructive_preset(capsys):
    table = _run(capsys, ["rabi", "--preset", "fig6b"])
    assert max(table.column("gq2")) <= 0.01


@pytest.mark.slow
def test_rabi_free_exchange(capsys):
    table = _run(capsys, ["rabi", "--set", "time.stop_ns=250", "--set", "initial.state=1gg"])
    p_ee = np.array(table.column("P_0ee"))
    assert p_ee.max() >= 0.9
    assert max(table.column("flux")) == 0.0


def test_table_paths():
    one = [CsvTable(columns=["a"], name="full")]
    two = one + [CsvTable(columns=["a"], name="drop_HR")]
    out = Path("runs/scan.csv")
    assert table_paths(out, one) == [out]
    assert table_paths(out, two) == [Path("runs/scan_full.csv"), Path("runs/scan_drop_HR.csv")]
    assert sidecar_path(out) == Path("runs/scan.csv.config.toml")
