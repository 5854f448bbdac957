"""Tests for stage orchestration, sweeps and the self-check suite."""
import dataclasses
import json

import numpy as np
import pytest

from fractal_search.core.config import ConfigManager, ExperimentConfig
from fractal_search.core.controller import ExperimentController
from fractal_search.core.errors import StageOverflowError
from fractal_search.core.export import validate_fit_report
from fractal_search.core.lattice import StageConfig, build_gasket, center_vertex, corner_vertex
from fractal_search.core.runner import StageRunner
from fractal_search.core.selfcheck import check_walk, run_selfcheck
from fractal_search.core.settings import RuntimeSettings
from fractal_search.core.walk import FlipFlopWalk


def make_controller(tmp_path, **kwargs):
    kwargs.setdefault("output_dir", tmp_path)
    return ExperimentController(ExperimentConfig(**kwargs), RuntimeSettings(workers=1))


@pytest.mark.parametrize('workers', [1, 3])
def test_runner_keeps_stage_order(workers):
    results = StageRunner(workers).run([5, 3, 4], lambda s: s * 10, lambda s, e: -s)
    assert results == [50, 30, 40]


def test_runner_replaces_failed_jobs():
    def job(stage):
        if stage == 2:
            raise RuntimeError("boom")
        return stage

    results = StageRunner(2).run([1, 2, 3], job, lambda s, e: f"failed {s}: {e}")
    assert results == [1, "failed 2: boom", 3]


def test_runner_rejects_zero_workers():
    with pytest.raises(ValueError):
        StageRunner(0)


def test_resolve_marked(tmp_path):
    lattice = build_gasket(StageConfig(2, 3))
    assert make_controller(tmp_path).resolve_marked(lattice) == center_vertex(lattice)
    assert make_controller(tmp_path, marked_vertex_policy="corner").resolve_marked(lattice) == corner_vertex(lattice)
    explicit = make_controller(tmp_path, marked_vertex_policy="explicit", marked_vertex=7)
    assert explicit.resolve_marked(lattice) == 7


def test_allocation_guard(tmp_path):
    controller = ExperimentController(
        ExperimentConfig(output_dir=tmp_path), RuntimeSettings(workers=1, max_amplitudes=100)
    )
    with pytest.raises(StageOverflowError):
        controller.build_lattice(3)


def test_run_stage_plain(tmp_path):
    result = make_controller(tmp_path, stage_range=[4]).run_stage(4)
    assert result.N == 123
    assert result.tulsi is None
    assert not result.failed
    assert set(result.lower_bounds) == {"travel", "grover", "max"}
    rows = result.summary_rows()
    assert len(rows) == 1
    assert rows[0]["ancilla"] == 0


def test_run_stage_with_ancilla(tmp_path):
    result = make_controller(tmp_path, stage_range=[5], ancilla=True).run_stage(5)
    assert result.tulsi is not None
    assert result.cos_delta == result.tulsi.params.cos_delta
    assert 0.0 < result.cos_delta <= 1.0
    assert result.tulsi.max_trap_leak <= 1e-12
    assert result.tulsi.prediction is not None
    assert [row["ancilla"] for row in result.summary_rows()] == [0, 1]


def test_write_search(tmp_path):
    controller = make_controller(tmp_path, stage_range=[3], ancilla=True)
    result = controller.run_stage(3, capture_peak_state=True)
    paths = controller.write_search(result, snapshot=True)
    names = sorted(p.name for p in paths)
    assert names == sorted([
        "search_d2_S3_t2_plain_series.csv",
        "search_d2_S3_t2_plain_snapshot.csv",
        "search_d2_S3_t2_plain_state.txt",
        "search_d2_S3_t2_tulsi_series.csv",
        "search_d2_S3_t2_tulsi_snapshot.csv",
        "search_d2_S3_t2_tulsi_state.txt",
        "search_d2_S3_t2_summary.csv",
    ])
    assert all(p.exists() for p in paths)
    header = (tmp_path / "search_d2_S3_t2_tulsi_state.txt").read_text().splitlines()[0]
    assert header == f"{result.N} 4 2"


def test_scan_t1(tmp_path):
    results = make_controller(tmp_path, stage_range=[4]).scan_t1(4, (1, 2, 3))
    assert [r.t1 for r in results] == [1, 2, 3]
    assert all(r.plain.params.t1 == r.t1 for r in results)


def test_sweep_fits_and_report(tmp_path):
    controller = make_controller(tmp_path, stage_range="3-6", ancilla=True)
    sweep = controller.run_sweep()
    assert sweep.failed_stages == []
    report = sweep.fit_report
    validate_fit_report(report)
    assert report["fits"]["q_plain"]["range"] == [3, 4, 5, 6]
    assert report["fits"]["q_plain"]["systematic_err"] is not None
    assert report["fits"]["q_tulsi"] is not None
    assert "relation_residual" in report["exponents"]
    assert set(report["dimension_comparison"]) == {"q_plain", "q_tulsi"}
    assert report["p_delta_decay"] is not None
    assert len(sweep.summary_rows()) == 8

    summary, fits, saved = controller.write_sweep(sweep)
    assert json.loads(fits.read_text())["d_E"] == 2
    assert summary.exists()
    replayed = ConfigManager(str(saved)).load_config({"output_dir": tmp_path})
    assert replayed == controller.config
    assert "output_dir" not in json.loads(saved.read_text())


def test_sweep_continues_past_failed_stage(tmp_path):
    # Vertex 10 exists from stage 2 (N=15) but not on stage 1 (N=6).
    controller = make_controller(
        tmp_path, stage_range="1-4", marked_vertex_policy="explicit", marked_vertex=10
    )
    sweep = controller.run_sweep()
    assert sweep.failed_stages == [1]
    assert sweep.stages[0].error
    assert sweep.fit_report["fits"]["q_plain"]["range"] == [2, 3, 4]


def test_sweep_skips_fits_with_too_few_stages(tmp_path):
    sweep = make_controller(tmp_path, stage_range=[3, 4], fit_from=3).run_sweep()
    assert sweep.fit_report["fits"]["q_plain"] is None
    assert "exponents" not in sweep.fit_report


def test_sweep_is_deterministic(tmp_path):
    outputs = []
    for name in ("a", "b"):
        controller = make_controller(tmp_path / name, stage_range="3-5", workers=2)
        paths = controller.write_sweep(controller.run_sweep())
        outputs.append([p.read_bytes() for p in paths])
    assert outputs[0] == outputs[1]


def test_selfcheck_passes():
    reports = run_selfcheck(stage=StageConfig(2, 3))
    assert [r.passed for r in reports] == [True] * 4
    names = {c.name for r in reports for c in r.checks}
    assert {"delta_zero_reduction", "trap_invariant", "dense_equivalence", "norm_drift"} <= names


def test_selfcheck_stops_on_broken_lattice(gasket_2d_s2):
    partner = np.array(gasket_2d_s2.partner)
    partner[0] = partner[0] + 1
    reports = run_selfcheck(lattice=dataclasses.replace(gasket_2d_s2, partner=partner))
    assert len(reports) == 1
    assert not reports[0].passed


def test_walk_checks_pass(gasket_2d_s2):
    results = {c.name: c for c in check_walk(gasket_2d_s2)}
    assert results["norm_drift"].passed
    assert results["probability_sum"].passed


def test_probability_sum_catches_a_leaky_oracle(gasket_2d_s2, monkeypatch):
    def leaky_oracle(self, amplitudes, marked):
        start = marked * self.lattice.k
        amplitudes[..., start:start + self.lattice.k] *= -1.01
        return amplitudes

    monkeypatch.setattr(FlipFlopWalk, "oracle", leaky_oracle)
    results = {c.name: c for c in check_walk(gasket_2d_s2)}
    assert results["norm_drift"].passed
    assert not results["probability_sum"].passed


@pytest.mark.slow
def test_sweep_2d_scaling(tmp_path):
    controller = make_controller(tmp_path, stage_range="4-10", fit_from=6, ancilla=True, workers=2)
    report = controller.run_sweep().fit_report
    b = report["fits"]["q_plain"]["slope"]
    a = -report["fits"]["p_plain"]["slope"]
    assert b == pytest.approx(0.730, abs=0.03)
    assert a == pytest.approx(0.440, abs=0.06)
    assert abs(report["exponents"]["relation_residual"]) <= 0.05
    assert report["fits"]["q_tulsi"]["slope"] == pytest.approx(0.724, abs=0.03)
    assert report["fits"]["complexity_tulsi"]["slope"] == pytest.approx(0.729, abs=0.03)
    assert report["dimension_comparison"]["q_plain"]["nearest"] == "spectral"
    for run in report["runs"]:
        if run["S"] >= 6:
            assert 0.42 <= run["tulsi"]["P"] <= 0.58


@pytest.mark.slow
def test_sweep_3d_scaling(tmp_path):
    controller = make_controller(
        tmp_path, embedding_dim=3, stage_range="3-7", fit_from=4, ancilla=True, workers=2
    )
    report = controller.run_sweep().fit_report
    assert report["fits"]["q_plain"]["slope"] == pytest.approx(0.641, abs=0.03)
    assert report["fits"]["q_tulsi"]["slope"] == pytest.approx(0.647, abs=0.03)
    assert report["dimension_comparison"]["q_plain"]["nearest"] == "spectral"
