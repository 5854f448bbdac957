"""Tests for the plain and ancilla-controlled search drivers."""
import math

import numpy as np
import pytest

from fractal_search.core.lattice import StageConfig, build_gasket, center_vertex
from fractal_search.core.search import (
    SearchParams,
    calibrate_cos_delta,
    default_horizon_plain,
    default_horizon_tulsi,
    detect_peak,
    predicted_complexity,
    predicted_tulsi,
    run_plain,
    run_tulsi,
)
from fractal_search.core.walk import FlipFlopWalk


@pytest.fixture(scope="module")
def gasket_2d_s6():
    return build_gasket(StageConfig(2, 6))


@pytest.fixture(scope="module")
def plain_s6(gasket_2d_s6):
    params = SearchParams.for_lattice(gasket_2d_s6, center_vertex(gasket_2d_s6))
    return run_plain(gasket_2d_s6, params)


def test_detect_peak_simple():
    peak = detect_peak([0.1, 0.4, 0.9, 0.4])
    assert (peak.Q, peak.P) == (2, 0.9)
    assert (peak.global_Q, peak.global_P) == (2, 0.9)
    assert not peak.no_peak


def test_detect_peak_constant_series_has_no_peak():
    peak = detect_peak([0.2] * 6)
    assert peak.no_peak


def test_detect_peak_monotone_series_has_no_peak():
    peak = detect_peak([0.1, 0.2, 0.3, 0.4])
    assert peak.no_peak
    assert peak.Q == 3


def test_detect_peak_keeps_first_period_over_later_revival():
    peak = detect_peak([0.01, 0.1, 0.3, 0.1, 0.01, 0.2, 0.45, 0.2])
    assert (peak.Q, peak.P) == (2, 0.3)
    assert (peak.global_Q, peak.global_P) == (6, 0.45)
    assert not peak.no_peak


def test_detect_peak_ignores_early_bumps():
    # The bump at index 1 stays below the rise threshold of the main excursion.
    peak = detect_peak([0.01, 0.05, 0.02, 0.25, 0.5, 0.2, 0.01])
    assert (peak.Q, peak.P) == (4, 0.5)


def test_detect_peak_excursion_spans_shallow_dips():
    peak = detect_peak([0.01, 0.3, 0.2, 0.6, 0.05, 0.7, 0.1])
    assert (peak.Q, peak.P) == (3, 0.6)
    assert peak.global_Q == 5


def test_detect_peak_rejects_empty():
    with pytest.raises(ValueError):
        detect_peak([])


@pytest.mark.parametrize('p0,expected', [(0.5, 1.0), (0.2, 0.5), (0.184, 0.4749)])
def test_calibrate_cos_delta(p0, expected):
    assert calibrate_cos_delta(p0) == pytest.approx(expected, abs=1e-4)


def test_calibrate_cos_delta_clamps_large_peaks():
    assert calibrate_cos_delta(0.8) == 1.0


@pytest.mark.parametrize('p0', [0.0, 1.0, -0.1, 1.5])
def test_calibrate_cos_delta_rejects_out_of_range(p0):
    with pytest.raises(ValueError):
        calibrate_cos_delta(p0)


def test_predicted_tulsi_optimal_angle():
    B = 2.0
    prediction = predicted_tulsi(B, 1 / math.sqrt(B * B - 1), 1095)
    assert prediction.B_delta ** 2 == pytest.approx(2.0)
    assert prediction.P_delta == pytest.approx(0.5)


def test_predicted_tulsi_no_control():
    B, n = 2.5, 1095
    prediction = predicted_tulsi(B, 1.0, n)
    assert prediction.P_delta == pytest.approx(1 / B ** 2)
    assert prediction.Q_delta == pytest.approx(math.pi * B * math.sqrt(n) / 4)


def test_predicted_tulsi_grover_limit():
    prediction = predicted_tulsi(1.0, 0.5, 100)
    assert prediction.P_delta == pytest.approx(1.0)
    assert prediction.Q_delta == pytest.approx(math.pi * 10 / 2)


def test_predicted_tulsi_rejects_invalid():
    with pytest.raises(ValueError):
        predicted_tulsi(0.5, 0.5, 100)
    with pytest.raises(ValueError):
        predicted_tulsi(2.0, 0.0, 100)


def test_predicted_complexity_matches_optimal_prediction():
    B, n = 3.0, 1095
    prediction = predicted_tulsi(B, 1 / math.sqrt(B * B - 1), n)
    assert predicted_complexity(B, n) == pytest.approx(math.pi * math.sqrt(n) * B / 2)
    assert prediction.Q_delta / math.sqrt(prediction.P_delta) == pytest.approx(
        math.pi * math.sqrt(n) * math.sqrt(B * B - 1) / 2
    )


@pytest.mark.parametrize('kwargs', [
    dict(marked=0, horizon=10, t1=0),
    dict(marked=0, horizon=0),
    dict(marked=0, horizon=10, cos_delta=1.5),
    dict(marked=0, horizon=10, cos_delta=-0.1),
])
def test_search_params_validation(kwargs):
    with pytest.raises(ValueError):
        SearchParams(**kwargs)


def test_default_horizons():
    assert default_horizon_plain(1095) == math.ceil(3 * 1095 ** 0.75)
    assert default_horizon_tulsi(1095, 0.5) == math.ceil(6 * math.sqrt(1095) / 0.5)
    with pytest.raises(ValueError):
        default_horizon_tulsi(1095, 0.0)


def test_for_lattice_fills_horizon(gasket_2d_s4):
    params = SearchParams.for_lattice(gasket_2d_s4, 0)
    assert params.horizon == default_horizon_plain(gasket_2d_s4.n_vertices)
    controlled = SearchParams.for_lattice(gasket_2d_s4, 0, cos_delta=0.5)
    assert controlled.horizon == default_horizon_tulsi(gasket_2d_s4.n_vertices, 0.5)


def test_run_plain_single_block(gasket_2d_s4):
    run = run_plain(gasket_2d_s4, SearchParams(marked=3, horizon=1))
    assert run.probability_series.shape == (2,)
    assert run.probability_series[0] == pytest.approx(1 / gasket_2d_s4.n_vertices)


def test_run_plain_record_invariants(gasket_2d_s4):
    params = SearchParams.for_lattice(gasket_2d_s4, center_vertex(gasket_2d_s4))
    run = run_plain(gasket_2d_s4, params, capture_peak_state=True)
    assert 1 <= run.Q <= params.horizon
    assert 0.0 <= run.P <= 1.0
    assert run.probability_series[run.Q] == run.P
    assert run.complexity == run.Q / math.sqrt(run.P)
    assert run.peak_state.is_normalized()
    assert run.peak_state.ancilla_layers == 1
    kernel = FlipFlopWalk(gasket_2d_s4)
    assert kernel.marked_probability(run.peak_state.amplitudes, params.marked) == pytest.approx(run.P)
    assert run.Q <= run.peak.global_Q


def test_delta_zero_reduction():
    lattice = build_gasket(StageConfig(2, 5))
    marked = center_vertex(lattice)
    plain = run_plain(lattice, SearchParams(marked=marked, horizon=200))
    reduced = run_tulsi(lattice, SearchParams(marked=marked, horizon=200, cos_delta=1.0), track_trap=True)
    assert np.abs(plain.probability_series - reduced.probability_series).max() <= 1e-12
    assert reduced.max_trap_leak == 0.0


def test_run_tulsi_requires_control(gasket_2d_s4):
    with pytest.raises(ValueError):
        run_tulsi(gasket_2d_s4, SearchParams(marked=0, horizon=5))


def test_run_tulsi_conserves_norm(gasket_2d_s4):
    params = SearchParams(marked=center_vertex(gasket_2d_s4), horizon=300, cos_delta=0.6)
    run = run_tulsi(gasket_2d_s4, params, capture_peak_state=True)
    assert run.ancilla
    assert run.peak_state.ancilla_layers == 2
    assert abs(run.peak_state.norm() ** 2 - 1.0) <= 1e-10
    kernel = FlipFlopWalk(gasket_2d_s4)
    assert kernel.marked_probability(run.peak_state.amplitudes, params.marked) == pytest.approx(run.P)


@pytest.mark.parametrize('stage,q0,p0', [(4, 16, 0.38), (5, 35, 0.26)])
def test_plain_search_first_period_scale(stage, q0, p0):
    lattice = build_gasket(StageConfig(2, stage))
    run = run_plain(lattice, SearchParams.for_lattice(lattice, center_vertex(lattice)))
    assert not run.no_peak
    assert q0 * 0.75 <= run.Q <= q0 * 1.25
    assert p0 * 0.7 <= run.P <= p0 * 1.3


def test_plain_search_first_period_scale_3d():
    lattice = build_gasket(StageConfig(3, 4))
    run = run_plain(lattice, SearchParams.for_lattice(lattice, center_vertex(lattice)))
    assert not run.no_peak
    assert 32 * 0.75 <= run.Q <= 32 * 1.25


def test_controlled_search_reports_first_period(gasket_2d_s4):
    plain = run_plain(gasket_2d_s4, SearchParams.for_lattice(gasket_2d_s4, center_vertex(gasket_2d_s4)))
    params = SearchParams.for_lattice(
        gasket_2d_s4, plain.params.marked, cos_delta=calibrate_cos_delta(plain.P)
    )
    run = run_tulsi(gasket_2d_s4, params)
    assert run.Q <= run.peak.global_Q
    assert run.probability_series[run.Q] == run.P
    assert run.to_dict()["global_P"] >= run.P


def test_trap_invariant_calibrated_stage_six(gasket_2d_s6, plain_s6):
    cos_delta = calibrate_cos_delta(plain_s6.P)
    params = SearchParams.for_lattice(gasket_2d_s6, plain_s6.params.marked, cos_delta=cos_delta)
    run = run_tulsi(gasket_2d_s6, params, track_trap=True, B=1 / math.sqrt(plain_s6.P))
    assert run.max_trap_leak <= 1e-12
    assert run.prediction.P_delta == pytest.approx(0.5)
    assert run.to_dict()['prediction']['cos_delta'] == cos_delta


@pytest.mark.slow
def test_plain_search_stage_six_matches_reported_scale(plain_s6):
    assert 79 * 0.75 <= plain_s6.Q <= 79 * 1.25
    assert 0.18 * 0.7 <= plain_s6.P <= 0.18 * 1.3


@pytest.mark.slow
def test_controlled_search_stage_six_reaches_half(gasket_2d_s6, plain_s6):
    cos_delta = calibrate_cos_delta(plain_s6.P)
    params = SearchParams.for_lattice(gasket_2d_s6, plain_s6.params.marked, cos_delta=cos_delta)
    run = run_tulsi(gasket_2d_s6, params)
    assert 0.42 <= run.P <= 0.58


@pytest.mark.slow
def test_t1_three_is_worse_than_two(gasket_2d_s6):
    marked = center_vertex(gasket_2d_s6)
    peaks = {
        t1: run_plain(gasket_2d_s6, SearchParams.for_lattice(gasket_2d_s6, marked, t1=t1)).P
        for t1 in (2, 3)
    }
    assert peaks[2] > peaks[3]
