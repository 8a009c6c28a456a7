from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subwave1d.capacitance import (
    approximate_mode,
    approximate_mode_finite,
    band_structure,
    capacitance_finite,
    capacitance_periodic,
    eigen_decomposition,
    generalised,
    match_bands,
)
from subwave1d.errors import ValidationError
from subwave1d.geometry import FiniteChain, Materials, UnitCell

from .conftest import V1, V2


def flux_matrix(xl, xr, potentials, h=1e-6):
    """Oracle: ``C_ij = -(V_j'(x_i^R+) - V_j'(x_i^L-))`` by one-sided differences."""
    n = len(xl)
    C = np.zeros((n, len(potentials)), dtype=complex)
    for j, V in enumerate(potentials):
        for i in range(n):
            right = (V(xr[i] + h) - V(xr[i])) / h
            left = (V(xl[i]) - V(xl[i] - h)) / h
            C[i, j] = -(right - left)
    return C


def finite_potentials(chain):
    nodes = chain.abscissae

    def make(j):
        vals = np.zeros(chain.M)
        vals[j] = 1.0
        # np.interp holds the end values outside the chain: constant extension
        return lambda x: np.interp(x, nodes, np.repeat(vals, 2))

    return [make(j) for j in range(chain.M)]


def periodic_potentials(cell, alpha, copies=3):
    L = cell.L
    shifts = np.arange(-copies, copies + 1)
    nodes = np.concatenate([cell.abscissae + m * L for m in shifts])

    def make(j):
        def V(x):
            total = 0.0
            for m in shifts:
                vals = np.zeros(cell.N * len(shifts))
                vals[(m + copies) * cell.N + j] = 1.0
                total = total + np.exp(1j * alpha * m * L) * np.interp(x, nodes, np.repeat(vals, 2))
            return total
        return V

    return [make(j) for j in range(cell.N)]


def dimer_closed_form(s1, s2, ell, alpha):
    L = 2 * ell + s1 + s2
    a = 1 / s1 + 1 / s2
    r = abs(1 / s1 + np.exp(1j * alpha * L) / s2)
    return np.array([a - r, a + r]) / ell


def test_dimer_alpha_zero():
    C = capacitance_periodic(UnitCell([1, 1], [1, 2]), 0.0).entries
    np.testing.assert_allclose(C, [[1.5, -1.5], [-1.5, 1.5]], atol=1e-15)
    np.testing.assert_allclose(np.linalg.eigvalsh(C), [0, 3], atol=1e-14)


def test_row_sums_vanish_at_alpha_zero(rng):
    cell = UnitCell(rng.uniform(0.5, 2, 5), rng.uniform(0.5, 2, 5))
    np.testing.assert_allclose(capacitance_periodic(cell, 0.0).entries.sum(axis=1), 0, atol=1e-14)


def test_equal_dimer_zone_edge_is_diagonal():
    cell = UnitCell([1, 1], [1.5, 1.5])
    C = capacitance_periodic(cell, np.pi / cell.L).entries
    np.testing.assert_allclose(C, (2 / 1.5) * np.eye(2), atol=1e-15)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_periodic_matches_potential_oracle(rng, n):
    cell = UnitCell(rng.uniform(0.5, 2, n), rng.uniform(0.5, 2, n))
    alpha = rng.uniform(-np.pi, np.pi) / cell.L
    oracle = flux_matrix(cell.x_left, cell.x_right, periodic_potentials(cell, alpha))
    np.testing.assert_allclose(capacitance_periodic(cell, alpha).entries, oracle, atol=1e-6)


def test_finite_examples():
    chain2 = FiniteChain([1, 1], [1.0], [1, 1])
    np.testing.assert_allclose(capacitance_finite(chain2).entries, [[1, -1], [-1, 1]])
    assert capacitance_finite(FiniteChain([1], [], [1])).entries.tolist() == [[0.0]]
    chain3 = FiniteChain([1, 1, 1], [1.0, 2.0], [1, 1, 1])
    np.testing.assert_allclose(capacitance_finite(chain3).entries,
                               [[1, -1, 0], [-1, 1.5, -0.5], [0, -0.5, 0.5]])


def test_finite_matches_potential_oracle(rng):
    chain = FiniteChain(rng.uniform(0.5, 2, 6), rng.uniform(0.5, 2, 5), np.ones(6))
    oracle = flux_matrix(chain.x_left, chain.x_right, finite_potentials(chain))
    np.testing.assert_allclose(capacitance_finite(chain).entries, oracle, atol=1e-6)


def test_generalised_identity_scaling():
    cap = capacitance_periodic(UnitCell([1, 1], [1, 2]), 0.3)
    gen = generalised(cap, np.ones(2), np.ones(2))
    np.testing.assert_allclose(gen.entries, cap.entries)


def test_generalised_dimer_display():
    s1, s2, alpha = 1.0, 2.0, 0.37
    cell = UnitCell([1, 1], [s1, s2])
    gen = generalised(capacitance_periodic(cell, alpha), [V1, V2], [1, 1]).entries
    a = 1 / s1 + 1 / s2
    b = -1 / s1 - np.exp(-1j * cell.L * alpha) / s2
    np.testing.assert_allclose(gen, [[V1**2 * a, V1**2 * b], [V2**2 * np.conj(b), V2**2 * a]], rtol=1e-14)


def test_generalised_speed_scaling():
    cap = capacitance_periodic(UnitCell([1, 2, 1], [1, 2, 3]), 0.2)
    v = np.array([1.0, 1.3, 0.7])
    lam = np.sort(np.linalg.eigvals(generalised(cap, v, [1, 2, 1]).entries).real)
    lam2 = np.sort(np.linalg.eigvals(generalised(cap, np.sqrt(3.0) * v, [1, 2, 1]).entries).real)
    np.testing.assert_allclose(lam2, 3 * lam, rtol=1e-12)


def test_generalised_dimension_mismatch():
    cap = capacitance_periodic(UnitCell([1, 1], [1, 2]), 0.0)
    with pytest.raises(ValidationError):
        generalised(cap, [1, 1, 1], [1, 1])


@pytest.mark.parametrize("speeds", [[1.0, 1.4, 0.8], [V1, V2, 1.2 + 0.1j]])
def test_eigen_decomposition_biorthogonal(speeds):
    cell = UnitCell([1, 2, 1.5], [1, 0.5, 2])
    cap = capacitance_periodic(cell, 0.4)
    gen = generalised(cap, speeds, cell.lengths)
    lam, U, V = eigen_decomposition(gen, cap)
    np.testing.assert_allclose(gen.entries @ U, U * lam, atol=1e-12)
    np.testing.assert_allclose(V.conj().T @ U, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(U, axis=0), 1, rtol=1e-13)


def test_hermitian_route_agrees_with_general_solver():
    cell = UnitCell([1, 2], [1, 2])
    cap = capacitance_periodic(cell, 0.5)
    gen = generalised(cap, [1.0, 1.7], cell.lengths)
    lam, _, _ = eigen_decomposition(gen, cap)
    assert np.all(lam.imag == 0)
    np.testing.assert_allclose(np.sort(lam.real), np.sort(np.linalg.eigvals(gen.entries).real), rtol=1e-12)


def test_equal_dimer_band_profiles():
    ell, s = 1.0, 1.0
    cell = UnitCell([ell, ell], [s, s])
    bs = band_structure(cell, [1.0, 1.0], 1e-3, cell.alpha_grid(256))
    a = bs.alphas
    np.testing.assert_allclose(bs.eigenvalues[:, 0].real, 4 / (ell * s) * np.sin(a * cell.L / 4) ** 2, atol=1e-12)
    np.testing.assert_allclose(bs.eigenvalues[:, 1].real, 4 / (ell * s) * np.cos(a * cell.L / 4) ** 2, atol=1e-12)


def test_dirac_point():
    cell = UnitCell([1.3, 1.3], [0.7, 0.7])
    bs = band_structure(cell, [1.0, 1.0], 1e-3, [np.pi / cell.L])
    np.testing.assert_allclose(bs.eigenvalues[0].real, 2 / (1.3 * 0.7), rtol=1e-12)


def test_general_dimer_closed_form(rng):
    for _ in range(20):
        ell, s1, s2 = rng.uniform(0.5, 2, 3)
        cell = UnitCell([ell, ell], [s1, s2])
        alpha = rng.uniform(-np.pi, np.pi) / cell.L
        bs = band_structure(cell, [1.0, 1.0], 1e-3, [alpha])
        np.testing.assert_allclose(np.sort(bs.eigenvalues[0].real), dimer_closed_form(s1, s2, ell, alpha),
                                   rtol=1e-12)


def test_bands_are_continuous_through_matching():
    cell = UnitCell([1, 1, 1], [1, 2, 1.5])
    bs = band_structure(cell, [1.0, 1.2, 0.9], 1e-3, cell.alpha_grid(128))
    jumps = np.abs(np.diff(bs.eigenvalues, axis=0))
    assert np.max(jumps) < 0.2
    assert bs.ambiguous_samples.size == 0


def test_band_structure_validation():
    cell = UnitCell([1, 1], [1, 2])
    with pytest.raises(ValidationError):
        band_structure(cell, [1, 1], 0.0)
    with pytest.raises(ValidationError):
        band_structure(cell, [1, 1], 1e-3, [0.5, 0.1])
    with pytest.raises(ValidationError):
        band_structure(cell, [1, 1], 1e-3, [2 * np.pi / cell.L])
    with pytest.raises(ValidationError):
        band_structure(cell, [1, 1])


def test_band_structure_threads_identical():
    cell = UnitCell([1, 1], [1, 2])
    a = band_structure(cell, [V1, V2], 1e-3, cell.alpha_grid(64))
    b = band_structure(cell, [V1, V2], 1e-3, cell.alpha_grid(64), workers=4)
    assert a.to_csv() == b.to_csv()


def test_csv_shape_and_header():
    cell = UnitCell([1, 1], [1, 2])
    text = band_structure(cell, Materials.from_speeds([1, 1], 1e-3), alpha_grid=cell.alpha_grid(16)).to_csv()
    lines = text.splitlines()
    assert lines[0] == "alpha,band,re_lambda,im_lambda,re_omega,im_omega"
    assert len(lines) == 1 + 32
    assert "np." not in text


def test_match_bands_recovers_permutation(rng):
    U = np.linalg.qr(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)))[0]
    perm = rng.permutation(6)
    found, ov = match_bands(U, U[:, np.argsort(perm)])
    np.testing.assert_array_equal(np.argsort(perm)[found], np.arange(6))
    assert ov == pytest.approx(1.0)


def test_approximate_mode_constant():
    cell = UnitCell([1, 2], [1, 0.5])
    x = np.linspace(-3, 12, 301)
    np.testing.assert_allclose(approximate_mode(cell, [1, 1], 0.0, x), 1, atol=1e-15)


def test_approximate_mode_single_resonator_tent():
    cell = UnitCell([1], [1])
    u = approximate_mode(cell, [1], 0.0, [0.0, 0.5, 1.0, 1.5, 2.0])
    np.testing.assert_allclose(u, 1)
    chain = FiniteChain([1, 1], [2.0], [1, 1])
    u = approximate_mode_finite(chain, [1, 0], [0.5, 1.0, 2.0, 3.0, 3.5, 10])
    np.testing.assert_allclose(u, [1, 1, 0.5, 0, 0, 0])


def test_approximate_mode_midpoints_and_window():
    cell = UnitCell([1, 2, 1], [1, 2, 1])
    a = np.array([1, -0.5 + 0.2j, 0.3j])
    mids = cell.x_left + cell.lengths / 2
    np.testing.assert_allclose(approximate_mode(cell, a, 0.7, mids), a)
    with pytest.raises(ValidationError):
        approximate_mode(cell, a, 0.7, [0, 100], window=(0, 10))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 3), st.floats(0.2, 3), st.floats(0.2, 3), st.floats(-1, 1))
def test_dimer_closed_form_property(ell, s1, s2, a):
    cell = UnitCell([ell, ell], [s1, s2])
    alpha = a * np.pi / cell.L
    lam = np.sort(band_structure(cell, [1.0, 1.0], 1e-3, [alpha]).eigenvalues[0].real)
    np.testing.assert_allclose(lam, dimer_closed_form(s1, s2, ell, alpha), rtol=1e-11, atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.floats(-1, 1), st.integers(0, 2**31))
def test_hermitian_capacitance_property(n, a, seed):
    r = np.random.default_rng(seed)
    cell = UnitCell(r.uniform(0.3, 2, n), r.uniform(0.3, 2, n))
    C = capacitance_periodic(cell, a * np.pi / cell.L).entries
    np.testing.assert_allclose(C, C.conj().T, atol=1e-15)
    assert np.all(np.linalg.eigvalsh(C) > -1e-12)
