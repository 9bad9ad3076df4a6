# test_lie.py
# Commutator identities, Lie closure, parity conservation and reachability.

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import H6_PATTERN
from errors import ConfigError, DimensionCapError, SectorError
from fock import StateVector, apply_polynomial, enumerate_sector, matrix_rep
from lie import (
    AlgebraBasis,
    commutator,
    commutes_with,
    dla_closure,
    identity_catalogue,
    nested_commutator,
    parity_conserved,
    reachable_subspace,
    verify_identity,
)
from pools import (
    PoolFamily,
    PoolSpec,
    build_pool,
    perfect_pairing,
    prune_pool,
    sa_double0,
    sa_double1,
    sa_single,
)
from symmetry import csf_basis, named_csf, s2_matrix

CATALOGUE = {identity.name: identity for identity in identity_catalogue()}


def generator_algebra(pool, basis, csfs=None):
    mats = [matrix_rep(g, basis) for e in pool for g in e.generators]
    return AlgebraBasis.from_generators(mats, basis, csfs)


def closed_shell(basis, n_pairs):
    word = sum(0b11 << (2 * P) for P in range(n_pairs))
    return StateVector.determinant(word, basis)


# --- Commutators ---

def test_commutator_antisymmetry():
    a, b = sa_single(0, 1), sa_single(1, 2)
    assert (commutator(a, b) + commutator(b, a)).is_zero()


def test_nested_commutator_is_left_nested():
    a, b, c = sa_single(0, 1), sa_single(1, 2), sa_single(0, 2)
    assert nested_commutator([a, b, c]).allclose(commutator(commutator(a, b), c))


def test_nested_commutator_needs_two_operators():
    with pytest.raises(ConfigError):
        nested_commutator([sa_single(0, 1)])


def test_verify_identity_reports_residual():
    check = verify_identity(sa_single(0, 1), sa_single(0, 1) * 0.5, 2)
    assert not check.holds
    assert check.residual == pytest.approx(0.5 / np.sqrt(2.0))


# --- Identity catalogue ---

def test_catalogue_names_are_unique():
    names = [identity.name for identity in identity_catalogue()]
    assert len(names) == len(set(names))
    assert {f"polarized_{k}" for k in range(1, 11)} <= set(names)
    assert {"single_self", "pair_disjoint", "pair_self"} <= set(names)


@pytest.mark.parametrize("name", ["pair_chain_single_qs_moved", "pair_chain_pair_qs_moved"])
def test_hermitian_products_move_to_the_left(name):
    identity = CATALOGUE[name]
    assert identity.rhs.is_zero()
    assert not identity.moved.is_zero()
    assert identity.verify().holds


@pytest.mark.parametrize("name", sorted(CATALOGUE))
def test_identity_holds(name):
    check = CATALOGUE[name].verify()
    assert check.holds, f"{name}: residual {check.residual:.3e}"


def test_polarized_double_on_closed_shell():
    # P, Q doubly occupied, R, S empty: the triple commutator is half the
    # spin-polarized combination sqrt(3) [1]A - [0]A acting on the reference
    basis = enumerate_sector(4, 4, 0)
    ref = closed_shell(basis, 2)
    lhs = apply_polynomial(CATALOGUE["polarized_7"].lhs, ref)
    target = apply_polynomial(np.sqrt(3.0) * sa_double1(0, 1, 2, 3) - sa_double0(0, 1, 2, 3), ref)
    assert target.norm() > 0.5
    assert_allclose(lhs.amplitudes, 0.5 * target.amplitudes, atol=1e-12)


# --- Closure ---

def two_orbital_case():
    spec = PoolSpec(PoolFamily.SAGSPD, True, (0, 0))
    basis = enumerate_sector(2, 2, 0, 0, (0, 0))
    return build_pool(spec), basis


def test_two_orbital_closure_is_so3():
    pool, basis = two_orbital_case()
    csfs = csf_basis(basis, 0)
    algebra = dla_closure(pool, basis, csfs=csfs)
    assert csfs.dim == 3
    assert algebra.dim == 3
    assert list(algebra.generation) == [0, 0, 1]
    mats = algebra.matrices()
    assert_allclose(mats + mats.transpose(0, 2, 1), 0.0, atol=1e-12)
    gram = algebra.vectors @ algebra.vectors.T
    assert_allclose(gram, np.eye(3), atol=1e-10)


def test_closure_in_determinant_basis():
    pool, basis = two_orbital_case()
    algebra = dla_closure(pool, basis)
    assert algebra.size == basis.dim == 4
    assert algebra.dim == 3
    assert commutes_with(algebra, s2_matrix(basis)) < 1e-10


def test_closure_cap():
    pool, basis = two_orbital_case()
    with pytest.raises(DimensionCapError) as info:
        dla_closure(pool, basis, cap=2)
    assert info.value.cap == 2
    assert info.value.reached == 3


def test_csf_compression_needs_spin_adapted_pool():
    basis = enumerate_sector(2, 2, 0)
    pool = build_pool(PoolSpec(PoolFamily.GSD, False, (0, 0)))
    with pytest.raises(ConfigError):
        dla_closure(pool, basis, csfs=csf_basis(basis, 0))


def test_from_generators_needs_generators():
    with pytest.raises(ConfigError):
        AlgebraBasis.from_generators([])


# --- Parity ---

@pytest.mark.parametrize("enforce, conserved", [(True, True), (False, False)])
def test_parity_conservation(enforce, conserved):
    irreps = (0, 1, 0, 1)
    spec = PoolSpec(PoolFamily.SAGSPD, enforce, irreps)
    basis = enumerate_sector(4, 4, 0, None, irreps)
    algebra = generator_algebra(build_pool(spec), basis)
    assert parity_conserved(algebra, irreps) is conserved


@pytest.mark.parametrize("enforce, conserved", [(True, True), (False, False)])
def test_h6_generators_conserve_parity(enforce, conserved):
    spec = PoolSpec(PoolFamily.SAGSPD, enforce, H6_PATTERN)
    basis = enumerate_sector(6, 6, 0, None, H6_PATTERN)
    algebra = generator_algebra(build_pool(spec), basis)
    assert parity_conserved(algebra, H6_PATTERN) is conserved


def test_csf_closure_of_four_orbital_sector():
    irreps = (0, 1, 0, 1)
    spec = PoolSpec(PoolFamily.SAGSPD, True, irreps)
    basis = enumerate_sector(4, 4, 0, 0, irreps)
    csfs = csf_basis(basis, 0)
    algebra = dla_closure(prune_pool(build_pool(spec), basis), basis, csfs=csfs)
    assert algebra.size == csfs.dim
    assert algebra.generation[0] == 0 and algebra.generation.max() >= 1
    mats = algebra.matrices()
    assert_allclose(mats + mats.transpose(0, 2, 1), 0.0, atol=1e-10)
    assert parity_conserved(algebra, irreps)
    result = reachable_subspace(algebra, closed_shell(basis, 2))
    assert result.invariant_dim + result.complement_dim == csfs.dim


# --- Reachability ---

def test_two_orbital_reachability_is_complete():
    pool, basis = two_orbital_case()
    csfs = csf_basis(basis, 0)
    result = reachable_subspace(dla_closure(pool, basis, csfs=csfs), closed_shell(basis, 1))
    assert result.invariant_dim == 3
    assert result.complement_dim == 0
    assert result.to_dict() == {"invariant_dim": 3, "complement_dim": 0}


def test_reachability_partitions_csf_space():
    irreps = (0, 1, 0, 1)
    spec = PoolSpec(PoolFamily.SAGSPD, True, irreps)
    basis = enumerate_sector(4, 4, 0, 0, irreps)
    csfs = csf_basis(basis, 0)
    pool = prune_pool(build_pool(spec), basis)
    result = reachable_subspace(generator_algebra(pool, basis, csfs), closed_shell(basis, 2))
    assert result.invariant_dim + result.complement_dim == csfs.dim
    if result.complement_dim:
        states = result.complement_states()
        assert_allclose(states @ closed_shell(basis, 2).amplitudes, 0.0, atol=1e-10)


def test_determinant_algebra_with_csf_reachability():
    pool, basis = two_orbital_case()
    csfs = csf_basis(basis, 0)
    result = reachable_subspace(generator_algebra(pool, basis), closed_shell(basis, 1), csfs)
    assert result.invariant_dim == 3
    assert result.complement_dim == 0


def test_reference_outside_csf_space():
    pool, basis = two_orbital_case()
    triplet = csf_basis(basis, 1)
    with pytest.raises(SectorError):
        reachable_subspace(generator_algebra(pool, basis), closed_shell(basis, 1), triplet)


def h6_reachability(family):
    spec = PoolSpec(family, True, H6_PATTERN)
    basis = enumerate_sector(6, 6, 0, 0, H6_PATTERN)
    csfs = csf_basis(basis, 0)
    pool = prune_pool(build_pool(spec), basis)
    ref = closed_shell(basis, 3)
    return reachable_subspace(generator_algebra(pool, basis, csfs), ref), basis, ref


H6_BLOCKED = {
    "triplet_double": [sa_double1(0, 2, 3, 5)],
    "triplet_double_with_pair": [sa_double1(0, 2, 3, 5), perfect_pairing(1, 4)],
}


def test_h6_sagspd_is_not_universal():
    result, basis, ref = h6_reachability(PoolFamily.SAGSPD)
    assert result.invariant_dim == 74
    assert result.complement_dim == 18
    states = result.complement_states()
    assert_allclose(states @ ref.amplitudes, 0.0, atol=1e-10)


@pytest.mark.parametrize("name", sorted(H6_BLOCKED))
def test_h6_sagspd_never_reaches_named_singlets(name):
    result, basis, ref = h6_reachability(PoolFamily.SAGSPD)
    blocked = named_csf(H6_BLOCKED[name], ref)
    assert not blocked.annihilated
    overlap = np.sum((result.complement_states() @ blocked.state.amplitudes) ** 2)
    assert overlap > 1.0 - 1e-8


def test_h6_pdint0_is_universal():
    result, _, _ = h6_reachability(PoolFamily.PDINT0)
    assert result.complement_dim == 0
    assert result.invariant_dim == 92


@pytest.mark.slow
def test_h6_full_closure_matches_generator_reachability():
    spec = PoolSpec(PoolFamily.SAGSPD, True, H6_PATTERN)
    basis = enumerate_sector(6, 6, 0, 0, H6_PATTERN)
    csfs = csf_basis(basis, 0)
    pool = prune_pool(build_pool(spec), basis)
    algebra = dla_closure(pool, basis, csfs=csfs)
    assert commutes_with(algebra, s2_matrix(basis)) < 1e-8
    assert parity_conserved(algebra, H6_PATTERN)
    result = reachable_subspace(algebra, closed_shell(basis, 3))
    assert result.invariant_dim == 74
    assert result.complement_dim == 18
