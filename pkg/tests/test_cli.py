"""Config parsing, validation messages, experiment modes, and exit codes.

File-producing modes run on deliberately tiny grids so the whole module
stays fast; outputs are re-parsed with the csv/json stdlib modules and, for
the determinism claim, compared byte for byte across reruns.
"""

import csv
import json
from pathlib import Path

import pytest

from revgraph.cli import (
    DEFAULT_GRIDS,
    DEFAULT_KMAX,
    DEFAULT_RUNS,
    ExperimentSpec,
    Mode,
    ParseError,
    ValidationError,
    default_spec,
    dump_config,
    load_config,
    main,
    spec_to_document,
    _KNOWN_FIELDS,
    _dissection_ranges,
)
from revgraph.scenario import ScenarioConfig
from revgraph.synthesis import FrequencyGrid


def _write(tmp_path, name, doc) -> Path:
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


def _rows(path) -> list[dict]:
    with Path(path).open() as fh:
        return list(csv.DictReader(fh))


# -- config loading ------------------------------------------------------------


def test_empty_config_is_the_documented_default(tmp_path):
    path = _write(tmp_path, "empty.json", {})
    spec = load_config(path)
    assert spec == default_spec()
    assert spec.scenario == ScenarioConfig()
    assert spec.grids == DEFAULT_GRIDS
    assert spec.mode is Mode.RESPONSE
    assert spec.out_dir is None
    assert spec.n_runs == DEFAULT_RUNS and spec.k_max == DEFAULT_KMAX


def test_default_grids_cover_narrow_and_wide_bands():
    narrow, wide = DEFAULT_GRIDS
    assert (narrow.f_min_hz, narrow.f_max_hz, narrow.n_samples) == (2e9, 3e9, 8192)
    assert (wide.f_min_hz, wide.f_max_hz, wide.n_samples) == (1e9, 11e9, 8192)


def test_unknown_field_is_a_parse_error_with_location(tmp_path):
    path = _write(tmp_path, "bad.json", {"n_scat": 3})
    with pytest.raises(ParseError) as info:
        load_config(path)
    assert info.value.field == "n_scat"
    assert info.value.line == 2  # first line after the opening brace
    assert "unknown field" in str(info.value)


def test_malformed_json_reports_its_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "seed": 3,\n}\n')
    with pytest.raises(ParseError) as info:
        load_config(path)
    assert info.value.line == 3


def test_probability_out_of_range(tmp_path):
    path = _write(tmp_path, "p.json", {"p_vis": 1.3})
    with pytest.raises(ValidationError) as info:
        load_config(path)
    assert info.value.field == "p_vis"
    assert str(info.value) == "p_vis: not in [0,1]"


def test_booleans_are_not_numbers(tmp_path):
    path = _write(tmp_path, "b.json", {"seed": True})
    with pytest.raises(ValidationError):
        load_config(path)


def test_two_calibrations_rejected(tmp_path):
    path = _write(tmp_path, "t.json",
                  {"tail_slope_db_per_ns": -0.4, "inter_scatterer_gain": 0.6})
    with pytest.raises(ValidationError) as info:
        load_config(path)
    assert info.value.field == "inter_scatterer_gain"


def test_null_slope_needs_a_gain(tmp_path):
    path = _write(tmp_path, "n.json", {"tail_slope_db_per_ns": None})
    with pytest.raises(ValidationError):
        load_config(path)
    ok = _write(tmp_path, "ok.json",
                {"tail_slope_db_per_ns": None, "inter_scatterer_gain": 0.5})
    spec = load_config(ok)
    assert spec.scenario.inter_scatterer_gain == 0.5
    assert spec.scenario.tail_slope_db_per_ns is None


def test_grid_entries_are_validated(tmp_path):
    path = _write(tmp_path, "g.json", {"grids": [[2e9, 3e9, 64]]})
    spec = load_config(path)
    assert spec.grids == (FrequencyGrid(2e9, 3e9, 64),)
    bad = _write(tmp_path, "gbad.json", {"grids": [[3e9, 2e9, 64]]})
    with pytest.raises(ValidationError):
        load_config(bad)
    empty = _write(tmp_path, "gempty.json", {"grids": []})
    with pytest.raises(ValidationError):
        load_config(empty)


def test_mode_names_are_checked(tmp_path):
    path = _write(tmp_path, "m.json", {"mode": "dissect"})
    assert load_config(path).mode is Mode.DISSECT
    bad = _write(tmp_path, "mbad.json", {"mode": "plot"})
    with pytest.raises(ValidationError) as info:
        load_config(bad)
    assert "response" in str(info.value)  # the message lists the valid names


def test_config_round_trips_through_dump(tmp_path):
    doc = {
        "room": [[0.0, 6.0], [0.0, 4.0], [0.0, 3.0]],
        "tx": [[1.0, 1.0, 1.0]],
        "rx": [[5.0, 3.0, 1.5]],
        "n_scatterers": 7,
        "p_vis": 0.6,
        "inter_scatterer_gain": 0.55,
        "tail_slope_db_per_ns": None,
        "seed": 11,
        "grids": [[2e9, 3e9, 128]],
        "runs": 12,
        "mode": "ensemble",
        "out": "results",
    }
    first = load_config(_write(tmp_path, "a.json", doc))
    dump_config(first, tmp_path / "b.json")
    second = load_config(tmp_path / "b.json")
    assert first == second


def test_document_fields_match_the_accepted_set():
    assert set(spec_to_document(default_spec())) == _KNOWN_FIELDS


# -- experiment modes ------------------------------------------------------------


def test_response_mode_writes_parseable_sweep(tmp_path):
    cfg = _write(tmp_path, "c.json", {})
    out = tmp_path / "r"
    status = main(["response", "--config", str(cfg), "--out", str(out),
                   "--grid", "2e9,3e9,64", "--seed", "5"])
    assert status == 0
    response = _rows(out / "response_2to3GHz_M64.csv")
    impulse = _rows(out / "impulse_2to3GHz_M64.csv")
    assert len(response) == 64 and len(impulse) == 64
    assert float(response[0]["freq_hz"]) == 2e9
    meta = json.loads((out / "response_2to3GHz_M64.meta.json").read_text())
    assert meta["seeds"] == [5]
    assert meta["window"] == "hann-unit-power"
    assert (out / "plots.txt").exists()


def test_response_mode_sweeps_every_grid(tmp_path):
    cfg = _write(tmp_path, "c.json", {"grids": [[2e9, 3e9, 16], [1e9, 11e9, 32]]})
    out = tmp_path / "r"
    assert main(["response", "--config", str(cfg), "--out", str(out)]) == 0
    assert len(_rows(out / "response_2to3GHz_M16.csv")) == 16
    assert len(_rows(out / "response_1to11GHz_M32.csv")) == 32


def test_dissection_covers_triangle_plus_tails():
    labels = {f"{r.first}to{'inf' if r.unbounded else int(r.last)}"
              for r in _dissection_ranges(2)}
    assert labels == {"0to0", "0to1", "0to2", "1to1", "1to2", "2to2",
                      "0toinf", "1toinf", "2toinf"}


def test_dissect_mode_writes_one_file_per_range(tmp_path):
    cfg = _write(tmp_path, "c.json", {})
    out = tmp_path / "d"
    status = main(["dissect", "--config", str(cfg), "--out", str(out),
                   "--grid", "2e9,3e9,32", "--kmax", "2"])
    assert status == 0
    names = sorted(p.name for p in out.glob("dissect_*.csv"))
    assert names == [
        "dissect_0to0.csv", "dissect_0to1.csv", "dissect_0to2.csv",
        "dissect_0toinf.csv", "dissect_1to1.csv", "dissect_1to2.csv",
        "dissect_1toinf.csv", "dissect_2to2.csv", "dissect_2toinf.csv",
    ]
    assert all(len(_rows(out / n)) == 32 for n in names)
    assert (out / "dissect.meta.json").exists()


def test_ensemble_mode_reports_tail_slope(tmp_path):
    cfg = _write(tmp_path, "c.json", {"runs": 3})
    out = tmp_path / "e"
    status = main(["ensemble", "--config", str(cfg), "--out", str(out),
                   "--grid", "2e9,3e9,256"])
    assert status == 0
    rows = _rows(out / "spectrum_ensemble_2to3GHz_M256.csv")
    assert len(rows) == 256
    assert {"delay_s", "power_linear", "power_db"} == set(rows[0])
    meta = json.loads((out / "spectrum_ensemble_2to3GHz_M256.meta.json").read_text())
    assert meta["seeds"] == [0, 1, 2]
    report = (out / "tail_slopes.txt").read_text()
    assert "slope" in report and "dB/ns" in report


def test_spatial_mode_averages_over_mesh(tmp_path):
    cfg = _write(tmp_path, "c.json", {"spatial_points": 4})
    out = tmp_path / "s"
    status = main(["spatial", "--config", str(cfg), "--out", str(out),
                   "--grid", "2e9,3e9,128"])
    assert status == 0
    assert len(_rows(out / "spectrum_spatial_2to3GHz_M128.csv")) == 128
    meta = json.loads((out / "spectrum_spatial_2to3GHz_M128.meta.json").read_text())
    assert meta["n_positions"] == 16  # spatial_points counts mesh points per side


def test_reruns_are_byte_identical(tmp_path):
    cfg = _write(tmp_path, "c.json", {"runs": 2})
    outs = []
    for name in ("one", "two"):
        out = tmp_path / name
        assert main(["ensemble", "--config", str(cfg), "--out", str(out),
                     "--grid", "2e9,3e9,64"]) == 0
        outs.append(out)
    for name in ("spectrum_ensemble_2to3GHz_M64.csv", "tail_slopes.txt"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_validate_mode_passes_on_defaults(tmp_path, capsys):
    cfg = _write(tmp_path, "c.json", {})
    status = main(["validate", "--config", str(cfg), "--grid", "2e9,3e9,64"])
    captured = capsys.readouterr()
    assert status == 0
    assert "9/9 checks passed" in captured.out
    assert "FAIL" not in captured.out


def test_validate_mode_handles_empty_scatterer_field(tmp_path):
    cfg = _write(tmp_path, "c.json", {"n_scatterers": 0})
    status = main(["validate", "--config", str(cfg), "--grid", "2e9,3e9,32"])
    assert status == 0


def test_validate_mode_writes_report_when_asked(tmp_path):
    cfg = _write(tmp_path, "c.json", {})
    out = tmp_path / "v"
    status = main(["validate", "--config", str(cfg), "--out", str(out),
                   "--grid", "2e9,3e9,32"])
    assert status == 0
    report = (out / "validate_report.txt").read_text()
    assert report.count("ok   ") == 9


# -- exit codes -------------------------------------------------------------------


def test_missing_config_file_exits_two(tmp_path, capsys):
    status = main(["response", "--config", str(tmp_path / "absent.json")])
    assert status == 2
    assert "cannot read config" in capsys.readouterr().err


def test_config_errors_exit_two(tmp_path, capsys):
    bad = _write(tmp_path, "bad.json", {"p_vis": 2.0})
    assert main(["response", "--config", str(bad)]) == 2
    assert "p_vis" in capsys.readouterr().err
    broken = tmp_path / "broken.json"
    broken.write_text("{nope}")
    assert main(["response", "--config", str(broken)]) == 2


def test_missing_out_dir_exits_two(tmp_path, capsys):
    cfg = _write(tmp_path, "c.json", {})
    assert main(["response", "--config", str(cfg)]) == 2
    assert "out" in capsys.readouterr().err


def test_engine_errors_exit_one(monkeypatch, tmp_path, capsys):
    import revgraph.cli as cli

    def blow_up(spec):
        raise RuntimeError("engine fault")

    monkeypatch.setitem(cli._RUNNERS, Mode.RESPONSE, blow_up)
    cfg = _write(tmp_path, "c.json", {})
    status = main(["response", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert status == 1
    assert "engine fault" in capsys.readouterr().err


def test_threads_override_is_validated(monkeypatch, tmp_path, capsys):
    monkeypatch.setenv("REVGRAPH_THREADS", "many")
    cfg = _write(tmp_path, "c.json", {"runs": 2})
    status = main(["ensemble", "--config", str(cfg), "--out", str(tmp_path / "o"),
                   "--grid", "2e9,3e9,16"])
    assert status == 2
    assert "REVGRAPH_THREADS" in capsys.readouterr().err


def test_spec_validation_catches_bad_knobs():
    base = default_spec()
    with pytest.raises(ValidationError):
        ExperimentSpec(scenario=base.scenario, grids=(), mode=Mode.RESPONSE,
                       out_dir=None)
    with pytest.raises(ValidationError):
        ExperimentSpec(scenario=base.scenario, grids=base.grids,
                       mode=Mode.ENSEMBLE, out_dir=None, n_runs=0)
    with pytest.raises(ValidationError):
        ExperimentSpec(scenario=base.scenario, grids=base.grids,
                       mode=Mode.ENSEMBLE, out_dir=None, fit_window_ns=(50.0, 40.0))
