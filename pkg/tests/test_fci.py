# test_fci.py
# Exact diagonalization, degenerate blocks, overlaps and state classification.

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import H2_FCI_ENERGY, H6_PATTERN
from errors import ConfigError, SectorError
from fci import (
    classified_ground_energies,
    classify_states,
    csf_ground_energy,
    degenerate_blocks,
    lowest_eigenpairs,
    overlap_analysis,
    sector_ground_energies,
)
from fock import StateVector, build_hamiltonian, enumerate_sector
from symmetry import csf_basis


# --- Eigenpairs ---

def test_h2_ground_state(h2):
    basis = enumerate_sector(2, 2, 0, 0, h2.orbital_irreps)
    spectrum = lowest_eigenpairs(build_hamiltonian(h2, basis), 1, basis)
    assert spectrum.energies[0] == pytest.approx(H2_FCI_ENERGY, abs=1e-5)
    assert spectrum.sector == {"n_electrons": 2, "sz2": 0, "irrep": 0}


def test_h2_reference_energy_from_two_by_two_ci(h2):
    # singlet Ag space: |1a 1b> and |2a 2b>, coupled by the exchange integral
    h, g = h2.h1, h2.h2
    ci = np.array([[2.0 * h[0, 0] + g[0, 0, 0, 0], g[0, 1, 0, 1]],
                   [g[0, 1, 0, 1], 2.0 * h[1, 1] + g[1, 1, 1, 1]]])
    assert np.linalg.eigvalsh(ci)[0] + h2.e_core == pytest.approx(H2_FCI_ENERGY, abs=1e-7)


def test_iterative_matches_dense(h6_integrals):
    basis = enumerate_sector(6, 6, 0, 0, H6_PATTERN)
    H = build_hamiltonian(h6_integrals, basis)
    dense = lowest_eigenpairs(H, 3, basis)
    lanczos = lowest_eigenpairs(H, 3, basis, dense_limit=10)
    assert_allclose(lanczos.energies, dense.energies, atol=1e-9)
    assert lanczos.residuals(H).max() < 1e-8
    overlaps = np.abs(lanczos.vectors.T @ dense.vectors)
    assert overlaps[0, 0] == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("k", [0, 5])
def test_eigenpair_count_checked(h2, k):
    basis = enumerate_sector(2, 2, 0, 0, h2.orbital_irreps)
    with pytest.raises(ConfigError):
        lowest_eigenpairs(build_hamiltonian(h2, basis), k, basis)


def test_degenerate_blocks():
    blocks = degenerate_blocks(np.array([-1.0, -1.0 + 1e-10, 0.0, 0.5, 0.5 + 1e-9]))
    assert blocks == [[0, 1], [2], [3, 4]]


# --- Overlaps ---

def test_overlap_of_eigenvector(h2):
    basis = enumerate_sector(2, 2, 0, None, h2.orbital_irreps)
    spectrum = lowest_eigenpairs(build_hamiltonian(h2, basis), 4, basis)
    ground = StateVector(spectrum.vectors[:, 0], basis)
    result = overlap_analysis(ground, spectrum)
    assert result.weights[0] == pytest.approx(1.0)
    assert result.residual == pytest.approx(0.0, abs=1e-12)
    assert sum(result.block_weights) == pytest.approx(1.0)
    assert set(result.to_dict()) == {"weights", "residual", "block_weights"}


def test_overlap_with_truncated_spectrum(h2):
    basis = enumerate_sector(2, 2, 0, 0, h2.orbital_irreps)
    spectrum = lowest_eigenpairs(build_hamiltonian(h2, basis), 1, basis)
    hf = StateVector.determinant(0b0011, basis)
    result = overlap_analysis(hf, spectrum)
    assert 0.9 < result.weights[0] < 1.0
    assert result.residual == pytest.approx(1.0 - result.weights[0])


def test_overlap_basis_mismatch(h2):
    basis = enumerate_sector(2, 2, 0, 0, h2.orbital_irreps)
    spectrum = lowest_eigenpairs(build_hamiltonian(h2, basis), 1, basis)
    other = enumerate_sector(2, 2, 0, 5, h2.orbital_irreps)
    with pytest.raises(SectorError):
        overlap_analysis(StateVector.determinant(0b0110, other), spectrum)


# --- Classification ---

def test_classify_h2_states(h2):
    basis = enumerate_sector(2, 2, 0, None, h2.orbital_irreps)
    spectrum = lowest_eigenpairs(build_hamiltonian(h2, basis), 4, basis)
    labels = classify_states(spectrum, h2.orbital_irreps)
    assert (labels[0].spin, labels[0].irrep) == (0.0, 0)
    assert labels[0].irrep_weight == pytest.approx(1.0)
    # the sigma_g sigma_u triplet lies below the open-shell singlet
    assert (labels[1].spin, labels[1].irrep) == (1.0, 5)
    assert labels[1].s2 == pytest.approx(2.0)
    assert sorted((lab.spin, lab.irrep) for lab in labels) == [(0.0, 0), (0.0, 0), (0.0, 5), (1.0, 5)]


def test_csf_ground_energy(h2):
    basis = enumerate_sector(2, 2, 0, 5, h2.orbital_irreps)
    H = build_hamiltonian(h2, basis)
    triplet = csf_ground_energy(H, csf_basis(basis, 1))
    singlet = csf_ground_energy(H, csf_basis(basis, 0))
    assert triplet < singlet
    assert sorted([triplet, singlet]) == pytest.approx(lowest_eigenpairs(H, 2, basis).energies)


def test_csf_ground_energy_of_empty_space(h2):
    basis = enumerate_sector(2, 2, 0, 0, h2.orbital_irreps)
    with pytest.raises(SectorError):
        csf_ground_energy(build_hamiltonian(h2, basis), csf_basis(basis, 2))


def test_constrained_and_classified_routes_agree(c2v_integrals):
    constrained = sector_ground_energies(c2v_integrals, 0, [0, 1, 2])
    classified = classified_ground_energies(c2v_integrals, 0)
    assert set(constrained) == set(classified)
    for key, value in constrained.items():
        assert classified[key] == pytest.approx(value, abs=1e-9), key


def test_sector_ground_energies_skip_missing_irreps(h2):
    grounds = sector_ground_energies(h2, 0, [0, 1], irreps=[0, 3, 5])
    assert set(grounds) == {(0, 0.0), (5, 0.0), (5, 1.0)}
    assert grounds[(0, 0.0)] == pytest.approx(H2_FCI_ENERGY, abs=1e-5)
