# symmetry.py
# Symmetry observables (N, S_z, S^2, irrep parity and weights) and CSF bases.

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from errors import NumericalError, SectorError
from fock import (
    FermionPolynomial,
    StateVector,
    alpha,
    apply_polynomial,
    beta,
    excitation,
    matrix_rep,
    number,
    pair_annihilation,
    pair_creation,
    popcount,
    spin_summed_excitation,
)

logger = logging.getLogger(__name__)

# --- Constants ---
SPIN_TOL = 1e-8          # eigenspace membership for S(S+1)
NORM_TOL = 1e-8          # accepted deviation from a unit norm
GRAM_SCHMIDT_TOL = 1e-6  # rejects near-dependent projector columns


# --- Spin and number polynomials ---

def number_polynomial(n_spatial):
    total = FermionPolynomial()
    for p in range(2 * n_spatial):
        total = total + number(p)
    return total


def sz_polynomial(n_spatial):
    total = FermionPolynomial()
    for P in range(n_spatial):
        total = total + 0.5 * (number(alpha(P)) - number(beta(P)))
    return total


def s_plus_polynomial(n_spatial):
    total = FermionPolynomial()
    for P in range(n_spatial):
        total = total + excitation([alpha(P)], [beta(P)])
    return total


def s_minus_polynomial(n_spatial):
    return s_plus_polynomial(n_spatial).adjoint()


def s2_polynomial(n_spatial):
    """S^2 = S_z^2 + S_z + S_- S_+."""
    sz = sz_polynomial(n_spatial)
    return sz * sz + sz + s_minus_polynomial(n_spatial) * s_plus_polynomial(n_spatial)


def hermitian_single(P, Q):
    """Hermitian partner of the spin-adapted single: (E_QP + E_PQ)/sqrt(2)."""
    return (spin_summed_excitation(Q, P) + spin_summed_excitation(P, Q)) / math.sqrt(2.0)


def hermitian_pair(P, Q):
    """Hermitian partner of the perfect-pairing double: b+_Q b_P + b+_P b_Q."""
    return (pair_creation(Q) * pair_annihilation(P)
            + pair_creation(P) * pair_annihilation(Q))


# --- Matrices ---

_UP_MASK = np.int64(sum(1 << (2 * P) for P in range(31)))
_DOWN_MASK = np.int64(sum(1 << (2 * P + 1) for P in range(31)))


def number_matrix(basis):
    return sp.diags(popcount(basis.words).astype(float), format="csr")


def sz_matrix(basis):
    up = popcount(basis.words & _UP_MASK)
    down = popcount(basis.words & _DOWN_MASK)
    return sp.diags(0.5 * (up - down), format="csr")


def s2_matrix(basis):
    """Sparse S^2 on the basis, cached on the basis."""
    if "s2" not in basis._cache:
        basis._cache["s2"] = matrix_rep(s2_polynomial(basis.n_spatial), basis)
    return basis._cache["s2"]


def _irreps_for(basis, orbital_irreps):
    irreps = orbital_irreps if orbital_irreps is not None else basis.orbital_irreps
    if irreps is None:
        return (0,) * basis.n_spatial
    if len(irreps) != basis.n_spatial:
        raise SectorError(f"{len(irreps)} orbital irreps for {basis.n_spatial} orbitals")
    return tuple(int(g) for g in irreps)


def determinant_irreps(basis, orbital_irreps=None):
    """Irrep label of every determinant (XOR over occupied spinorbitals)."""
    irreps = _irreps_for(basis, orbital_irreps)
    labels = np.zeros(basis.dim, dtype=np.int64)
    for P, g in enumerate(irreps):
        occupied = popcount(basis.words & np.int64(0b11 << (2 * P))) & 1
        labels ^= occupied * g
    return labels


def irrep_projector(irrep, basis, orbital_irreps=None):
    labels = determinant_irreps(basis, orbital_irreps)
    return sp.diags((labels == irrep).astype(float), format="csr")


def parity_matrix(irrep, basis, orbital_irreps=None):
    """Number parity of the electrons sitting in orbitals of one irrep."""
    irreps = _irreps_for(basis, orbital_irreps)
    mask = np.int64(0)
    for P, g in enumerate(irreps):
        if g == irrep:
            mask |= np.int64(0b11 << (2 * P))
    signs = 1.0 - 2.0 * (popcount(basis.words & mask) & 1)
    return sp.diags(signs, format="csr")


# --- Reports ---

@dataclass
class SymmetryReport:
    n_expect: float
    sz_expect: float
    s2_expect: float
    s2_std: float
    irrep_weights: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "n_expect": self.n_expect,
            "sz_expect": self.sz_expect,
            "s2_expect": self.s2_expect,
            "s2_std": self.s2_std,
            "irrep_weights": {str(k): w for k, w in sorted(self.irrep_weights.items())},
        }


def symmetry_report(v, orbital_irreps=None):
    """Expectation values and irrep weights of a normalized state."""
    norm = v.norm()
    if not np.isfinite(norm) or abs(norm - 1.0) > NORM_TOL:
        raise NumericalError(f"state norm {norm:.3e} deviates from 1")
    basis = v.basis
    amps = v.amplitudes
    probs = amps * amps

    s2v = s2_matrix(basis) @ amps
    s2 = float(amps @ s2v)
    s4 = float(s2v @ s2v)
    labels = determinant_irreps(basis, orbital_irreps)
    weights = {}
    for label in np.unique(labels):
        w = float(probs[labels == label].sum())
        if w > 0.0:
            weights[int(label)] = w
    return SymmetryReport(
        n_expect=float(probs @ popcount(basis.words)),
        sz_expect=float(probs @ sz_matrix(basis).diagonal()),
        s2_expect=s2,
        s2_std=math.sqrt(max(0.0, s4 - s2 * s2)),
        irrep_weights=weights,
    )


# --- CSF bases ---

@dataclass
class CsfBasis:
    """Orthonormal columns spanning one S(S+1) eigenspace of a sector."""

    columns: np.ndarray
    spin: float
    irrep: object
    basis: object

    @property
    def dim(self):
        return self.columns.shape[1]

    def to_csf(self, v):
        return self.columns.T @ (v.amplitudes if isinstance(v, StateVector) else v)

    def from_csf(self, coords):
        return StateVector(self.columns @ coords, self.basis)

    def compress(self, matrix):
        """C^T M C for an operator that conserves S^2."""
        return self.columns.T @ (matrix @ self.columns)


def _spin_spectrum(basis):
    if "s2_eigh" not in basis._cache:
        dense = s2_matrix(basis).toarray()
        basis._cache["s2_eigh"] = np.linalg.eigh(dense)
    return basis._cache["s2_eigh"]


def csf_basis(basis, total_s):
    """CSF basis for total spin S, columns fixed by determinant order."""
    two_s = int(round(2 * total_s))
    if abs(2 * total_s - two_s) > 1e-12 or two_s < 0:
        raise SectorError(f"total spin {total_s} is not a non-negative half-integer")
    if basis.sz2 is not None and (abs(basis.sz2) > two_s or (two_s - basis.sz2) % 2):
        raise SectorError(f"2*S_z={basis.sz2} cannot carry total spin {total_s}")
    key = ("csf", two_s)
    if key in basis._cache:
        return basis._cache[key]

    target = total_s * (total_s + 1.0)
    if basis.dim == 0:
        columns = np.zeros((0, 0))
    else:
        values, vectors = _spin_spectrum(basis)
        span = vectors[:, np.abs(values - target) < SPIN_TOL]
        columns = _ordered_orthonormal(span)
    result = CsfBasis(columns, total_s, basis.irrep, basis)
    basis._cache[key] = result
    logger.debug("S=%s space of %r: %d CSFs", total_s, basis, result.dim)
    return result


def _ordered_orthonormal(span):
    """Gram-Schmidt over the projector columns, in determinant order."""
    dim, rank = span.shape
    accepted = np.zeros((dim, rank))
    found = 0
    if rank == 0:
        return accepted
    projector = span @ span.T
    for j in range(dim):
        r = projector[:, j].copy()
        for _ in range(2):
            r -= accepted[:, :found] @ (accepted[:, :found].T @ r)
        norm = np.linalg.norm(r)
        if norm > GRAM_SCHMIDT_TOL:
            accepted[:, found] = r / norm
            found += 1
            if found == rank:
                break
    if found != rank:
        raise NumericalError(f"Gram-Schmidt kept {found} of {rank} spin eigenvectors")
    return accepted


def spin_multiplicities(basis):
    """Number of states per total spin S in the basis."""
    if basis.dim == 0:
        return {}
    values, _ = _spin_spectrum(basis)
    spins = np.round((np.sqrt(1.0 + 4.0 * np.clip(values, 0.0, None)) - 1.0)) / 2.0
    labels, counts = np.unique(spins, return_counts=True)
    return {float(s): int(c) for s, c in zip(labels, counts)}


# --- Named CSFs ---

@dataclass
class NamedCsf:
    state: StateVector
    annihilated: bool
    norm: float
    structural_zero: bool = False


def named_csf(operators, reference, tol=1e-12):
    """Normalized O_1 O_2 ... O_k |reference> (rightmost operator acts first).

    Both a structurally zero operator and a vanishing result set annihilated;
    structural_zero is only set for the former.
    """
    zero = StateVector(np.zeros(reference.basis.dim), reference.basis)
    if any(op.is_zero() for op in operators):
        return NamedCsf(zero, True, 0.0, structural_zero=True)
    state = reference
    for op in reversed(list(operators)):
        state = apply_polynomial(op, state, closed=True)
    norm = state.norm()
    if norm <= tol:
        return NamedCsf(zero, True, norm)
    return NamedCsf(state.normalized(), False, norm)
