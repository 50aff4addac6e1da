"""
Tests for the run configuration, the pipeline stages and the command line.

Archives are pre-filled from the Mie series wherever the test is about the
scan or reconstruction, so only one test runs real forward solves.
"""

import json
import logging
import os
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.cli import EXIT_NO_DIP, main as cli_main
from src.config import RunConfig, load_config
from src.errors import ArchiveError, ConfigurationError, ReconstructionError
from src.geometry import builtin_medium
from src.main import (
    CONFIG_FILE, DETECTIONS_FILE, FIELD_FILE, INDICATOR_FILE, REPORT_FILE,
    CuspRecoveryPipeline, corner_errors,
)
from src.oracle import disk_transmission_eigs, mie_farfield_matrix
from src.reconstruct import CuspCluster, CuspReport
from src.utils import FarFieldArchive, dump_json, load_csv, load_json, save_json


@pytest.fixture(autouse=True)
def restore_root_logger():
    """The CLI installs its own root handler; put pytest's back afterwards."""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


def _disk_config(tmp_path, window, step=0.005, size=64, **scan):
    data = {
        "medium": {"builtin": "disk", "n": 16.0},
        "measurement": {"m": size, "n_inc": size},
        "scan": dict({"window": list(window), "step": step, "radius": 1.0}, **scan),
        "reconstruct": {"search_box": [-2.0, 2.0, -2.0, 2.0], "resolution": 64},
        "output_dir": str(tmp_path / "out"),
    }
    return RunConfig.from_dict(data)


def _prefill_archive(pipeline):
    """Store the analytic disk matrices for every k of the run's grid."""
    config = pipeline.config
    archive = FarFieldArchive(config.measurement.m, config.measurement.n_inc)
    for k in pipeline.k_grid():
        archive.add(k, mie_farfield_matrix(k, config.medium.n, 1.0, archive.m, archive.n_inc))
    archive.save(pipeline.archive_path)
    return archive


def _read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


def test_config_defaults_validate():
    config = RunConfig().validate()
    assert config.medium.builtin == "square"
    assert config.scan.weighting == "herglotz"
    assert config.to_dict()["measurement"]["n_inc"] == 128


def test_unknown_keys_rejected():
    with pytest.raises(ConfigurationError, match="unknown configuration keys"):
        RunConfig.from_dict({"mediums": {}})
    with pytest.raises(ConfigurationError, match="unknown keys in 'scan'"):
        RunConfig.from_dict({"scan": {"stepsize": 0.1}})
    with pytest.raises(ConfigurationError):
        RunConfig.from_dict({"scan": {"weighting": "born"}})
    with pytest.raises(ConfigurationError):
        RunConfig.from_dict({"scan": "fast"})


def test_overrides_skip_missing_flags():
    config = RunConfig().validate().with_overrides({
        "medium.builtin": "hexagon", "medium.n": 25.0, "scan.step": None, "output_dir": "x",
    })
    assert config.medium.builtin == "hexagon"
    assert config.scan.step == 0.01
    assert config.output_dir == "x"
    with pytest.raises(ConfigurationError):
        config.with_overrides({"scan.nonsense": 1})
    with pytest.raises(ConfigurationError):
        config.with_overrides({"medium.n": 1.0})


def test_solver_grid_follows_points_per_wavelength():
    medium = builtin_medium("disk", 16.0)
    config = RunConfig().validate()
    assert config.solver.points_per_wavelength == 60
    fine = config.solver_grid(medium, 2.0)
    coarse = config.with_overrides({"solver.points_per_wavelength": 20.0}).solver_grid(medium, 2.0)
    wavelength = 2 * np.pi / (2.0 * 4.0)
    assert fine.h <= wavelength / 60 + 1e-12
    assert fine.h < coarse.h <= wavelength / 20 + 1e-12
    fixed = config.with_overrides({"solver.resolution": 48}).solver_grid(medium, 2.0)
    assert fixed.resolution == 48
    with pytest.raises(ConfigurationError):
        config.with_overrides({"solver.points_per_wavelength": 5.0})


def test_load_config_from_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"medium": {"builtin": "heart", "n": 16}}))
    config = load_config(str(path), {"scan.dip_threshold": 0.2})
    assert config.medium.builtin == "heart"
    assert config.scan.dip_threshold == 0.2
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigurationError):
        load_config(str(tmp_path / "bad.json"))
    with pytest.raises(ConfigurationError):
        load_config(str(tmp_path / "missing.json"))


def test_k_grid_is_uniform_and_rounded(tmp_path):
    config = _disk_config(tmp_path, (0.5, 0.6), step=0.03)
    ks = config.k_grid(config.search_window(config.build_medium()))
    assert ks == [0.5, 0.53, 0.56, 0.59]
    single = _disk_config(tmp_path, (0.5, 0.5))
    assert single.k_grid(single.search_window(single.build_medium())) == [0.5]
    reversed_window = _disk_config(tmp_path, (0.6, 0.5))
    with pytest.raises(ConfigurationError, match="empty k grid"):
        reversed_window.search_window(reversed_window.build_medium())


def test_auto_window_uses_eigenvalue_bound():
    config = RunConfig().validate()
    window = config.search_window(config.build_medium())
    assert window.contains(0.9398)


def test_prior_radius_precedence(tmp_path):
    config = RunConfig().validate()
    assert config.prior_radius() == 4.0
    assert_allclose(config.prior_radius(builtin_medium("square", 16)), np.sqrt(2.0))
    assert _disk_config(tmp_path, (1, 2)).prior_radius(builtin_medium("square", 16)) == 1.0


def test_synthesize_and_resume(tmp_path):
    data = {
        "medium": {"builtin": "disk", "n": 4.0},
        "solver": {"resolution": 32, "tol": 1e-8},
        "measurement": {"m": 8, "n_inc": 8},
        "scan": {"window": [1.0, 1.02], "step": 0.02},
        "output_dir": str(tmp_path),
    }
    first = CuspRecoveryPipeline(RunConfig.from_dict(data))
    archive = first.synthesize()
    assert archive.k_list == [1.0, 1.02]
    assert first.processing_stats["wavenumbers_synthesized"] == 2
    assert os.path.exists(os.path.join(tmp_path, CONFIG_FILE))

    second = CuspRecoveryPipeline(RunConfig.from_dict(data))
    resumed = second.synthesize()
    assert second.processing_stats["wavenumbers_resumed"] == 2
    assert second.processing_stats["wavenumbers_synthesized"] == 0
    assert_allclose(resumed.get(1.02), archive.get(1.02), rtol=0, atol=0)

    with pytest.raises(ArchiveError):
        CuspRecoveryPipeline(RunConfig.from_dict(dict(data, measurement={"m": 16, "n_inc": 8}))
                             ).synthesize()


def test_scan_and_reconstruct_from_prefilled_archive(tmp_path):
    eig = disk_transmission_eigs(16.0, 1.0, 0.5, 2.5)[0]
    pipeline = CuspRecoveryPipeline(_disk_config(tmp_path, (eig.k - 0.1, eig.k + 0.1)))
    _prefill_archive(pipeline)

    result = pipeline.scan()
    assert any(abs(d.k_star - eig.k) < 0.01 for d in result.detections)
    curve = load_csv(pipeline.path(INDICATOR_FILE))
    assert_allclose(curve["k"], pipeline.k_grid())
    stored = load_json(pipeline.path(DETECTIONS_FILE))
    assert len(stored["detections"]) == len(result.detections)

    report = pipeline.reconstruct()
    saved = load_json(pipeline.path(REPORT_FILE))
    assert saved["mode"] == report.mode
    assert saved["corner_errors"] == []
    assert "detection" in saved
    field = load_csv(pipeline.path(FIELD_FILE))
    assert_allclose(field["abs"].max(), 1.0)
    assert len(field["x"]) == 64 * 64


def test_reports_are_byte_identical_across_runs(tmp_path):
    eig = disk_transmission_eigs(16.0, 1.0, 0.5, 2.5)[0]
    outputs = []
    for run in ("first", "second"):
        pipeline = CuspRecoveryPipeline(_disk_config(tmp_path / run, (eig.k - 0.1, eig.k + 0.1)))
        _prefill_archive(pipeline)
        pipeline.scan()
        pipeline.reconstruct()
        outputs.append({name: _read_bytes(pipeline.path(name))
                        for name in (REPORT_FILE, DETECTIONS_FILE, INDICATOR_FILE, FIELD_FILE)})
    assert outputs[0] == outputs[1]
    assert b"k_star" in outputs[0][DETECTIONS_FILE]


def test_archive_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    archive = FarFieldArchive(3, 4)
    later = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    earlier = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    archive.add(1.25, later)
    archive.add(0.75, earlier)
    assert archive.k_list == [0.75, 1.25]

    restored = FarFieldArchive.from_dict(archive.to_dict())
    assert restored.k_list == [0.75, 1.25]
    assert_allclose(restored.get(0.75), earlier, rtol=0, atol=0)
    path = str(tmp_path / "archive.json")
    archive.save(path)
    loaded = FarFieldArchive.load(path)
    assert (loaded.m, loaded.n_inc) == (3, 4)
    assert_allclose(loaded.get(1.25), later, rtol=0, atol=0)
    assert loaded.has(1.25 + 1e-13) and not loaded.has(1.0)

    with pytest.raises(ArchiveError):
        archive.add(2.0, np.zeros((4, 3)))
    short = archive.to_dict()
    short["matrices"][0] = short["matrices"][0][:-2]
    with pytest.raises(ArchiveError, match="reals"):
        FarFieldArchive.from_dict(short)
    missing = dict(archive.to_dict(), k_list=[0.75])
    with pytest.raises(ArchiveError):
        FarFieldArchive.from_dict(missing)
    with pytest.raises(ArchiveError):
        FarFieldArchive.from_dict(dict(archive.to_dict(), format_version=99))
    with pytest.raises(ArchiveError):
        loaded.get(3.0)


def test_json_floats_carry_seventeen_digits():
    text = dump_json({"b": 1.0, "a": 0.1, "c": [np.float64(1.0 / 3.0), 2], "d": float("nan"),
                      "e": {}, "f": complex(0.5, -2.0)})
    assert text == (
        '{\n'
        '  "a": 0.10000000000000001,\n'
        '  "b": 1.0,\n'
        '  "c": [\n'
        '    0.33333333333333331,\n'
        '    2\n'
        '  ],\n'
        '  "d": NaN,\n'
        '  "e": {},\n'
        '  "f": [\n'
        '    0.5,\n'
        '    -2.0\n'
        '  ]\n'
        '}'
    )
    parsed = json.loads(text)
    assert parsed["a"] == 0.1 and parsed["c"][0] == 1.0 / 3.0


def test_missing_stage_inputs(tmp_path):
    pipeline = CuspRecoveryPipeline(_disk_config(tmp_path, (1.0, 1.1)))
    with pytest.raises(ArchiveError):
        pipeline.scan()
    with pytest.raises(ArchiveError):
        pipeline.reconstruct()
    save_json({"detections": []}, pipeline.path(DETECTIONS_FILE))
    with pytest.raises(ReconstructionError):
        pipeline.reconstruct()


def test_corner_errors_measure_nearest_detection():
    medium = builtin_medium("square", 16)
    clusters = [CuspCluster((1.0, 1.1), [(1.0, 1.1)], 0.0),
                CuspCluster((-1.0, -1.0), [(-1.0, -1.0)], 0.0)]
    report = CuspReport(k=1.0, mode="vanishing", vanishing=clusters)
    errors = corner_errors(report, medium)
    assert len(errors) == 4
    assert_allclose(min(errors), 0.0, atol=1e-12)
    assert_allclose(sorted(errors)[1], 0.1)
    assert corner_errors(CuspReport(k=1.0, mode="vanishing"), medium) == [None] * 4


def test_cli_disk_eigenvalues(capsys):
    status = cli_main(["--plain-logs", "oracle", "disk-eigs", "--n", "16", "--k-lo", "0.5",
                       "--k-hi", "2.5"])
    assert status == 0
    printed = json.loads(capsys.readouterr().out)
    expected = disk_transmission_eigs(16.0, 1.0, 0.5, 2.5)
    assert_allclose([e["k"] for e in printed], [e.k for e in expected])
    assert [e["multiplicity"] for e in printed] == [e.multiplicity for e in expected]


def test_cli_disk_eigs_window_form(capsys):
    status = cli_main(["--plain-logs", "oracle", "disk-eigs", "--n", "16", "--radius", "1",
                       "--window", "0.5", "2"])
    assert status == 0
    printed = json.loads(capsys.readouterr().out)
    ks = [e["k"] for e in printed]
    assert ks == sorted(ks)
    assert_allclose(ks, [e.k for e in disk_transmission_eigs(16.0, 1.0, 0.5, 2.0)])

    assert cli_main(["--plain-logs", "oracle", "disk-eigs", "--n", "16", "--k-lo", "0.5"]) == 2


def test_cli_bounds(capsys):
    status = cli_main(["--plain-logs", "oracle", "bounds", "--medium", "hexagon", "--n", "25"])
    assert status == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["k_lo"] <= 0.4392 <= printed["k_hi"]


def test_cli_configuration_error_exit_status(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"scan": {"stepsize": 1}}))
    status = cli_main(["--plain-logs", "scan", "--config", str(path)])
    assert status == 2
    err = capsys.readouterr().err.strip().splitlines()[-1]
    assert err.startswith("error=E_CONFIG message=")


def test_cli_usage_errors_use_error_line(capsys):
    status = cli_main(["--plain-logs", "scan", "--no-such-flag"])
    assert status == 2
    err = capsys.readouterr().err.strip().splitlines()[-1]
    assert err.startswith("error=E_CONFIG message=")
    assert "--no-such-flag" in err

    assert cli_main(["--plain-logs", "oracle", "disk-eigs", "--n", "16",
                     "--window", "0.5", "1", "--k-lo", "0.5"]) == 2
    assert capsys.readouterr().err.strip().splitlines()[-1].startswith("error=E_CONFIG ")
    assert cli_main([]) == 2


def test_cli_scan_without_dip_exits_ten(tmp_path, capsys):
    pipeline = CuspRecoveryPipeline(_disk_config(tmp_path, (0.2, 0.3), step=0.01, size=16))
    _prefill_archive(pipeline)
    status = cli_main(["--plain-logs", "scan", "--medium", "disk", "--n", "16",
                       "--window", "0.2", "0.3", "--step", "0.01", "--m", "16", "--n-inc", "16",
                       "--radius", "1", "--order", "2", "--weighting", "kernel",
                       "--output-dir", str(tmp_path / "out")])
    assert status == EXIT_NO_DIP
    printed = json.loads(capsys.readouterr().out)
    assert printed["detections"] == []
    assert printed["diagnostic"] == "no dip below threshold"


def test_cli_pipeline_runs_all_stages(tmp_path, capsys):
    eig = disk_transmission_eigs(16.0, 1.0, 0.5, 2.5)[0]
    config = _disk_config(tmp_path, (eig.k - 0.1, eig.k + 0.1))
    _prefill_archive(CuspRecoveryPipeline(config))
    config_path = tmp_path / "run.json"
    save_json(config.to_dict(), str(config_path))

    status = cli_main(["--plain-logs", "pipeline", "--config", str(config_path)])
    assert status == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["stats"]["wavenumbers_synthesized"] == 0
    assert printed["stats"]["wavenumbers_resumed"] == len(CuspRecoveryPipeline(config).k_grid())
    assert any(abs(k - eig.k) < 0.01 for k in printed["detections"])
    assert os.path.exists(os.path.join(config.output_dir, REPORT_FILE))
