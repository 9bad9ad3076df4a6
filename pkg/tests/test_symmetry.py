# test_symmetry.py
# Spin and irrep observables, symmetry reports and CSF bases.

import numpy as np
import pytest
from numpy.testing import assert_allclose

import symmetry
from conftest import H6_PATTERN
from errors import NumericalError, SectorError
from fock import StateVector, enumerate_sector, matrix_rep, spin_summed_excitation
from symmetry import (
    csf_basis,
    determinant_irreps,
    hermitian_pair,
    hermitian_single,
    irrep_projector,
    named_csf,
    number_polynomial,
    parity_matrix,
    s2_matrix,
    s2_polynomial,
    s_minus_polynomial,
    s_plus_polynomial,
    spin_multiplicities,
    sz_polynomial,
    symmetry_report,
)


# --- Operators ---

def test_spin_ladder_algebra():
    sp_, sm = s_plus_polynomial(3), s_minus_polynomial(3)
    assert (sp_ * sm - sm * sp_).allclose(2.0 * sz_polynomial(3))


def test_s2_commutes_with_number():
    s2, n = s2_polynomial(3), number_polynomial(3)
    assert (s2 * n - n * s2).is_zero(1e-12)


@pytest.mark.parametrize("op", [hermitian_single(0, 2), hermitian_pair(1, 3)])
def test_partners_are_hermitian(op):
    assert not op.is_zero()
    assert (op - op.adjoint()).is_zero()


def test_s2_matrix_is_cached():
    basis = enumerate_sector(3, 2, 0)
    assert s2_matrix(basis) is s2_matrix(basis)


# --- Spin spectra ---

def test_two_electron_multiplicities():
    # three singlets (two closed shells and one open) and the M_S = 0 triplet
    assert spin_multiplicities(enumerate_sector(2, 2, 0)) == {0.0: 3, 1.0: 1}


def test_multiplicities_add_up():
    basis = enumerate_sector(6, 6, 0, 0, H6_PATTERN)
    counts = spin_multiplicities(basis)
    assert sum(counts.values()) == basis.dim == 200
    assert counts[0.0] == 92


@pytest.mark.parametrize("irrep, dim", [(0, 92), (None, 175)])
def test_h6_singlet_csf_counts(irrep, dim):
    basis = enumerate_sector(6, 6, 0, irrep, H6_PATTERN)
    assert csf_basis(basis, 0).dim == dim


def test_csf_columns_are_orthonormal_spin_eigenvectors():
    basis = enumerate_sector(4, 4, 0, 0, (0, 1, 0, 1))
    csfs = csf_basis(basis, 1)
    C = csfs.columns
    assert_allclose(C.T @ C, np.eye(csfs.dim), atol=1e-10)
    assert_allclose(s2_matrix(basis) @ C, 2.0 * C, atol=1e-10)
    assert csf_basis(basis, 1) is csfs


def test_csf_round_trip():
    basis = enumerate_sector(4, 4, 0, None, (0, 1, 0, 1))
    csfs = csf_basis(basis, 0)
    coords = np.linspace(-1.0, 1.0, csfs.dim)
    assert_allclose(csfs.to_csf(csfs.from_csf(coords)), coords, atol=1e-12)


def test_doublet_csfs():
    basis = enumerate_sector(3, 3, 1)
    # 3 orbitals, 3 electrons: 8 doublets and 1 quartet with M_S = 1/2
    assert csf_basis(basis, 0.5).dim == 8
    assert csf_basis(basis, 1.5).dim == 1


def test_gram_schmidt_shortfall_is_an_error(monkeypatch):
    span = np.eye(4)[:, :2]
    assert_allclose(symmetry._ordered_orthonormal(span), span)
    monkeypatch.setattr(symmetry, "GRAM_SCHMIDT_TOL", 2.0)
    with pytest.raises(NumericalError, match="0 of 2"):
        symmetry._ordered_orthonormal(span)


@pytest.mark.parametrize("sz2, spin", [(0, 0.3), (0, -1), (2, 0), (1, 1)])
def test_csf_basis_rejects(sz2, spin):
    n_elec = 2 + (sz2 % 2)
    with pytest.raises(SectorError):
        csf_basis(enumerate_sector(3, n_elec, sz2), spin)


# --- Reports ---

def test_closed_shell_report():
    basis = enumerate_sector(2, 2, 0, None, (0, 5))
    report = symmetry_report(StateVector.determinant(0b0011, basis))
    assert report.n_expect == pytest.approx(2.0)
    assert report.sz_expect == pytest.approx(0.0)
    assert report.s2_expect == pytest.approx(0.0, abs=1e-12)
    assert report.s2_std == pytest.approx(0.0, abs=1e-6)
    assert report.irrep_weights == {0: pytest.approx(1.0)}


def test_open_shell_determinant_mixes_spins():
    basis = enumerate_sector(2, 2, 0, None, (0, 5))
    report = symmetry_report(StateVector.determinant(0b0110, basis))
    assert report.s2_expect == pytest.approx(1.0)
    assert report.s2_std == pytest.approx(1.0)
    assert report.irrep_weights == {5: pytest.approx(1.0)}
    assert report.to_dict()["irrep_weights"] == {"5": pytest.approx(1.0)}


def test_report_requires_normalized_state():
    basis = enumerate_sector(2, 2, 0)
    with pytest.raises(NumericalError):
        symmetry_report(StateVector(np.full(basis.dim, 0.9), basis))


# --- Irreps ---

def test_determinant_irreps_and_projector():
    basis = enumerate_sector(2, 2, 0, None, (0, 5))
    labels = determinant_irreps(basis)
    expected = {0b0011: 0, 0b1100: 0, 0b0110: 5, 0b1001: 5}
    for word, label in expected.items():
        assert labels[basis.index(word)] == label
    P = irrep_projector(5, basis)
    assert P.diagonal().sum() == 2


def test_parity_matrix_signs():
    basis = enumerate_sector(2, 2, 0, None, (0, 5))
    signs = parity_matrix(5, basis).diagonal()
    assert signs[basis.index(0b1100)] == 1.0
    assert signs[basis.index(0b1001)] == -1.0


def test_orbital_label_count_checked():
    with pytest.raises(SectorError):
        determinant_irreps(enumerate_sector(2, 2, 0), (0, 1, 2))


# --- Named CSFs ---

def test_named_csf_of_single_excitation():
    basis = enumerate_sector(2, 2, 0, None, (0, 0))
    ref = StateVector.determinant(0b0011, basis)
    csf = named_csf([spin_summed_excitation(1, 0)], ref)
    assert not csf.annihilated
    assert csf.norm == pytest.approx(np.sqrt(2.0))
    assert symmetry_report(csf.state).s2_expect == pytest.approx(0.0, abs=1e-12)


def test_named_csf_flags_annihilation():
    basis = enumerate_sector(2, 2, 0, None, (0, 0))
    ref = StateVector.determinant(0b0011, basis)
    vanished = named_csf([spin_summed_excitation(0, 1)], ref)
    assert vanished.annihilated
    assert not vanished.structural_zero
    structural = named_csf([spin_summed_excitation(0, 1) * 0.0], ref)
    assert structural.annihilated
    assert structural.structural_zero
    assert structural.norm == 0.0
    assert not named_csf([spin_summed_excitation(1, 0)], ref).structural_zero


def test_named_csf_leaving_the_sector_is_an_error():
    basis = enumerate_sector(2, 2, 0, 0, (0, 5))
    ref = StateVector.determinant(0b0011, basis)
    with pytest.raises(SectorError):
        named_csf([spin_summed_excitation(1, 0)], ref)


def test_s2_from_matrix_rep_matches_cached():
    basis = enumerate_sector(3, 2, 0)
    fresh = matrix_rep(s2_polynomial(3), basis)
    assert abs(fresh - s2_matrix(basis)).max() < 1e-14
