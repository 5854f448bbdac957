"""Tests for the dense walk operator and its spectra."""
import numpy as np
import pytest

from fractal_search.core.errors import SizeCapExceeded
from fractal_search.core.lattice import build_hypercubic
from fractal_search.core.spectral import (
    build_walk_matrix,
    gasket_spectrum,
    hypercubic_spectrum_check,
    hypercubic_theory,
    match_multisets,
    sort_spectrum,
    unitarity_error,
)
from fractal_search.core.walk import FlipFlopWalk


def test_ring_matrix_is_a_permutation():
    matrix = build_walk_matrix(build_hypercubic(1, 4))
    assert matrix.shape == (8, 8)
    assert set(np.unique(matrix.real)) == {0.0, 1.0}
    np.testing.assert_array_equal(matrix.sum(axis=0), np.ones(8))
    np.testing.assert_array_equal(matrix.sum(axis=1), np.ones(8))


def test_ring_chiral_components_shift_oppositely():
    matrix = build_walk_matrix(build_hypercubic(1, 4))
    k = 2
    for v in range(4):
        # Column of (v, +x) lands on (v+1, +x); column of (v, -x) on (v-1, -x).
        assert matrix[((v + 1) % 4) * k, v * k] == 1.0
        assert matrix[((v - 1) % 4) * k + 1, v * k + 1] == 1.0


def test_gasket_matrix_unitary(gasket_2d_s2):
    matrix = build_walk_matrix(gasket_2d_s2)
    assert matrix.shape == (60, 60)
    assert unitarity_error(matrix) <= 1e-12


def test_dense_matrix_matches_kernel(gasket_2d_s2):
    matrix = build_walk_matrix(gasket_2d_s2)
    basis = np.eye(gasket_2d_s2.n_slots, dtype=np.complex128)
    stepped = FlipFlopWalk(gasket_2d_s2).step(basis)
    assert np.abs(stepped.T - matrix).max() <= 1e-12


def test_size_cap(gasket_2d_s2):
    with pytest.raises(SizeCapExceeded):
        build_walk_matrix(gasket_2d_s2, cap=59)


def test_theory_contains_expected_pairs():
    theory = hypercubic_theory(2, 4)
    assert theory.size == 64
    # Momentum (pi/2, pi/2) has cos w = 0.
    assert np.isclose(theory, 1j).any()
    assert np.isclose(theory, -1j).any()
    # d=2 gives one +1 and one -1 per momentum, plus the pair; zero momentum adds 1, 1.
    assert np.isclose(theory, 1.0).sum() >= 16 + 2


@pytest.mark.parametrize('d,L', [(2, 4), (2, 6), (3, 2)])
def test_hypercubic_spectrum_matches_closed_form(d, L):
    report = hypercubic_spectrum_check(d, L)
    assert report.matched, report.to_dict()
    assert report.unit_modulus
    assert report.passed
    assert report.max_match_distance <= 1e-8


def test_gasket_spectrum(gasket_2d_s2):
    report = gasket_spectrum(gasket_2d_s2)
    assert report.eigenvalues.size == 60
    assert report.max_modulus_deviation <= 1e-9
    assert report.conjugate_closed
    assert report.uniform_residual <= 1e-12
    assert report.passed
    assert report.to_dict()['size'] == 60


def test_match_multisets_ignores_order():
    values = np.exp(1j * np.linspace(0, 3, 7))
    distance, _ = match_multisets(values, values[::-1])
    assert distance == pytest.approx(0.0, abs=1e-15)


def test_match_multisets_reports_worst_pair():
    distance, worst = match_multisets(np.array([1.0, 1j]), np.array([1.0, -1j]))
    assert distance == pytest.approx(2.0)
    assert worst == (1j, -1j)


def test_match_multisets_rejects_size_mismatch():
    with pytest.raises(ValueError):
        match_multisets(np.ones(3), np.ones(4))


def test_sort_spectrum_orders_by_phase():
    values = np.array([1j, -1.0 + 0j, 1.0 + 0j, -1j])
    np.testing.assert_array_equal(sort_spectrum(values), [-1j, 1.0 + 0j, 1j, -1.0 + 0j])
