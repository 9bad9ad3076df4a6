# lie.py
# Fermionic commutators, the verified identity catalogue, Lie closure and reachability.

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from errors import ConfigError, DimensionCapError, SectorError
from fock import (
    FermionPolynomial,
    alpha,
    beta,
    double,
    excitation,
    full_fock_space,
    matrix_rep,
    number,
    single,
)
from pools import perfect_pairing, sa_double0, sa_double1, sa_double_pp_single, sa_single
from symmetry import hermitian_pair, hermitian_single, parity_matrix

logger = logging.getLogger(__name__)

# --- Constants ---
CLOSURE_TOL = 1e-10
IDENTITY_TOL = 1e-12
DEFAULT_CAP = 20000
CATALOGUE_ORBITALS = 5


# --- Commutators ---

def commutator(a, b):
    """[a, b] = ab - ba, normal ordered."""
    return a * b - b * a


def nested_commutator(ops):
    """Left-nested [[[o1, o2], o3], ...]."""
    ops = list(ops)
    if len(ops) < 2:
        raise ConfigError("a nested commutator needs at least two operators")
    result = ops[0]
    for op in ops[1:]:
        result = commutator(result, op)
    return result


@dataclass
class IdentityCheck:
    holds: bool
    residual: float


@lru_cache(maxsize=4)
def _fock(n_spatial):
    return full_fock_space(n_spatial)


def verify_identity(lhs, rhs, n_spatial, tol=IDENTITY_TOL):
    """Compare two polynomials as matrices on the full Fock space."""
    diff = matrix_rep(lhs - rhs, _fock(n_spatial))
    residual = float(np.abs(diff.data).max()) if diff.nnz else 0.0
    return IdentityCheck(residual < tol, residual)


# --- Identity catalogue ---

@dataclass
class Identity:
    """lhs (a nested commutator, or one operator) equals rhs."""

    name: str
    operands: tuple
    rhs: FermionPolynomial
    n_spatial: int = CATALOGUE_ORBITALS
    moved: FermionPolynomial = None   # Hermitian partner carried to the left side

    @property
    def lhs(self):
        if len(self.operands) == 1:
            lhs = self.operands[0]
        else:
            lhs = nested_commutator(self.operands)
        return lhs if self.moved is None else lhs + self.moved

    def verify(self, tol=IDENTITY_TOL):
        return verify_identity(self.lhs, self.rhs, self.n_spatial, tol)


_SPIN = (alpha, beta)
_ONE = FermionPolynomial.identity()


def _n(P, spin):
    return number(_SPIN[spin](P))


def _N(P):
    return _n(P, 0) + _n(P, 1)


def _d(P):
    return _n(P, 0) * _n(P, 1)


def _a1(P, Q, spin):
    """Spin-resolved single on spatial orbitals."""
    return single(_SPIN[spin](P), _SPIN[spin](Q))


def _a2(P, sp, Q, sq, R, sr, S, ss):
    """Spin-resolved double A_{P sp, Q sq}^{R sr, S ss}."""
    return double(_SPIN[sp](P), _SPIN[sq](Q), _SPIN[sr](R), _SPIN[ss](S))


def _e(P, Q, spin):
    s = _SPIN[spin]
    return excitation([s(P)], [s(Q)])


def _h(P, S, spin):
    """Spin-resolved Hermitian hop between P and S."""
    return _e(S, P, spin) + _e(P, S, spin)


def _pp_single_dressing(P, Q, R):
    """n_{R down} A_{P up}^{Q up} + n_{R up} A_{P down}^{Q down}."""
    return _n(R, 1) * _a1(P, Q, 0) + _n(R, 0) * _a1(P, Q, 1)


def _cross_pp_triple(P, Q, R, S):
    """Spin-polarized doubles from [[[A_PP^QQ, A_Q^R], A_P^S], A_PP^QQ]."""
    U, D = 0, 1
    return 0.5 * (
        _a2(P, U, R, U, Q, U, S, U) * (_n(Q, D) - _n(P, D))
        + _a2(P, U, R, D, Q, D, S, U) * (_n(Q, U) - _n(P, D))
        + _a2(P, D, R, D, Q, D, S, D) * (_n(Q, U) - _n(P, U))
        + _a2(P, D, R, U, Q, U, S, D) * (_n(Q, D) - _n(P, U))
    )


def _target_pp_triple(P, Q, R, S):
    """Spin-polarized doubles from [[[A_PP^QQ, A_Q^R], A_P^S], A_QQ^SS]."""
    U, D = 0, 1
    return 0.5 * (
        _a2(P, U, Q, U, R, U, S, U) * (_n(Q, D) - _n(S, D))
        + _a2(P, U, Q, D, R, D, S, U) * (_n(Q, U) - _n(S, D))
        + _a2(P, D, Q, D, R, D, S, D) * (_n(Q, U) - _n(S, U))
        + _a2(P, D, Q, U, R, U, S, D) * (_n(Q, D) - _n(S, U))
    )


def _single_last_triple(P, Q, R, S):
    """Spin-polarized doubles from [[[A_PP^QQ, A_Q^R], A_QQ^SS], A_P^S]."""
    U, D = 0, 1
    return 0.5 * (
        (_n(P, D) - _n(S, D)) * (_a2(P, U, Q, U, R, U, S, U) + _a2(P, U, Q, D, R, D, S, U))
        + (_n(P, U) - _n(S, U)) * (_a2(P, D, Q, D, R, D, S, D) + _a2(P, D, Q, U, R, U, S, D))
    )


def _hop_times_single(P, Q, R, S, coefficient):
    """1/2 sum over spins of coefficient(sigma, tau) H^sigma_PS A^tau_QR."""
    total = FermionPolynomial()
    for sigma in (0, 1):
        for tau in (0, 1):
            total = total + coefficient(sigma, tau) * (_h(P, S, sigma) * _a1(Q, R, tau))
    return 0.5 * total


def identity_catalogue():
    """Commutator identities among spin-adapted singles and perfect pairs.

    Orbitals P, Q, R, S are 0, 1, 2, 3 on a five-orbital Fock space.
    """
    P, Q, R, S = 0, 1, 2, 3
    r2 = math.sqrt(2.0)
    A = sa_single
    pp = perfect_pairing
    ppx = sa_double_pp_single
    X = (pp(P, Q), pp(Q, R))
    Y = (pp(P, Q), A(Q, R))
    K = (pp(P, Q), A(P, Q))
    U, D = 0, 1
    zero = FermionPolynomial.zero()
    out = []

    def add(name, operands, rhs):
        out.append(Identity(name, tuple(operands), rhs))

    # singles
    add("single_disjoint", (A(P, Q), A(R, S)), zero)
    add("single_chain", (A(P, Q), A(Q, R)), -(1 / r2) * A(P, R))
    add("single_self", (A(P, Q), A(P, Q)), zero)

    # perfect pairs with perfect pairs and singles
    add("pair_disjoint", (pp(P, Q), pp(R, S)), zero)
    add("pair_self", (pp(P, Q), pp(P, Q)), zero)
    add("pair_chain", X, (_N(Q) - _ONE) * pp(P, R))
    add("pair_single_disjoint", (pp(P, Q), A(R, S)), zero)
    add("pair_single_upper", Y, -ppx(P, Q, R))
    add("pair_single_same", K, ppx(P, P, Q) + ppx(Q, P, Q))
    add("pair_single_same_dressed", K,
        (1 / r2) * ((_n(P, D) - _n(Q, D)) * _a1(P, Q, U) + (_n(P, U) - _n(Q, U)) * _a1(P, Q, D)))
    add("pair_split_lower", (ppx(P, P, Q),), (1 / r2) * (_n(P, U) * _a1(P, Q, D) + _n(P, D) * _a1(P, Q, U)))
    add("pair_split_upper", (ppx(Q, P, Q),), -(1 / r2) * (_n(Q, D) * _a1(P, Q, U) + _n(Q, U) * _a1(P, Q, D)))

    # [[A_PP^QQ, A_QQ^RR], .]
    add("pair_chain_single_ps", X + (A(P, S),), (_N(Q) - _ONE) * ppx(R, P, S))
    add("pair_chain_single_qs", X + (A(Q, S),), -(pp(P, R) * hermitian_single(Q, S)))
    out.append(Identity("pair_chain_single_qs_moved", X + (A(Q, S),), zero,
                        moved=pp(P, R) * hermitian_single(Q, S)))
    add("pair_chain_single_rs", X + (A(R, S),), (_ONE - _N(Q)) * ppx(P, R, S))
    add("pair_chain_single_pq", X + (A(P, Q),),
        (1 / r2) * ((_n(P, D) + _n(Q, U) - _ONE) * _a2(R, U, R, D, P, U, Q, D)
                    - (_n(P, U) + _n(Q, D) - _ONE) * _a2(R, U, R, D, P, D, Q, U)))
    add("pair_chain_single_pr", X + (A(P, R),),
        -(1 / r2) * ((_ONE - _N(Q)) * ((_n(P, D) - _n(R, D)) * _a1(P, R, U)
                                        + (_n(P, U) - _n(R, U)) * _a1(P, R, D))))
    add("pair_chain_single_qr", X + (A(Q, R),),
        (1 / r2) * ((_n(Q, D) + _n(R, U) - _ONE) * _a2(P, U, P, D, Q, U, R, D)
                    - (_n(Q, U) + _n(R, D) - _ONE) * _a2(P, U, P, D, Q, D, R, U)))
    add("pair_chain_pair_ps", X + (pp(P, S),), -((_ONE - _N(P)) * (_ONE - _N(Q)) * pp(R, S)))
    add("pair_chain_pair_qs", X + (pp(Q, S),), -2.0 * (pp(P, R) * hermitian_pair(Q, S)))
    out.append(Identity("pair_chain_pair_qs_moved", X + (pp(Q, S),), zero,
                        moved=2.0 * (pp(P, R) * hermitian_pair(Q, S))))
    add("pair_chain_pair_rs", X + (pp(R, S),), (_ONE - _N(Q)) * (_ONE - _N(R)) * pp(P, S))
    add("pair_chain_pair_pq", X + (pp(P, Q),), (_ONE - _N(P) + 2.0 * _d(P)) * pp(Q, R))
    add("pair_chain_pair_qr", X + (pp(Q, R),), -((_ONE - _N(R) + 2.0 * _d(R)) * pp(P, Q)))
    add("pair_chain_pair_pr", X + (pp(P, R),), zero)

    # [[A_PP^QQ, A_Q^R], .]
    add("pair_upper_single_ps", Y + (A(P, S),), sa_double0(P, S, Q, R))
    add("pair_upper_single_qs", Y + (A(Q, S),), (1 / r2) * ppx(P, R, S))
    add("pair_upper_single_rs", Y + (A(R, S),), (1 / r2) * ppx(P, Q, S))
    add("pair_upper_single_qr", Y + (A(Q, R),), pp(P, R) - pp(P, Q))
    add("pair_upper_single_pq", Y + (A(P, Q),), -(1 / r2) * ppx(P, P, R) + sa_double0(P, Q, Q, R))
    add("pair_upper_single_pr", Y + (A(P, R),), -(1 / r2) * ppx(P, P, Q) + sa_double0(P, R, Q, R))
    add("pair_upper_pair_ps", Y + (pp(P, S),), (_ONE - _N(P)) * ppx(S, Q, R))
    add("pair_upper_pair_pq", Y + (pp(P, Q),),
        _d(P) * A(Q, R) + (1 / r2) * ((_ONE - _N(P)) * _pp_single_dressing(Q, R, Q)))
    add("pair_upper_pair_pr", Y + (pp(P, R),),
        -(_d(P) * A(Q, R)) - (1 / r2) * ((_ONE - _N(P)) * _pp_single_dressing(Q, R, R)))
    add("pair_upper_pair_qr", Y + (pp(Q, R),), zero)

    # [[A_PP^QQ, A_P^Q], .]
    add("pair_same_single_pq", K + (A(P, Q),), -2.0 * pp(P, Q))
    add("pair_same_single_pr", K + (A(P, R),),
        0.5 * ((_n(P, D) - _n(Q, D)) * _a1(Q, R, U) + (_n(P, U) - _n(Q, U)) * _a1(Q, R, D)
               - r2 * ppx(P, Q, R) - _a2(P, U, Q, D, P, D, R, U) - _a2(P, D, Q, U, P, U, R, D)))
    add("pair_same_single_qr", K + (A(Q, R),),
        0.5 * ((_n(Q, D) - _n(P, D)) * _a1(P, R, U) + (_n(Q, U) - _n(P, U)) * _a1(P, R, D)
               - r2 * ppx(Q, P, R) + _a2(P, U, Q, D, Q, U, R, D) + _a2(P, D, Q, U, Q, D, R, U)))
    pair_same_pair = (1 / r2) * ((_ONE - _n(P, U) - _n(Q, D)) * _a2(R, U, R, D, P, D, Q, U)
                                 - (_ONE - _n(P, D) - _n(Q, U)) * _a2(R, U, R, D, P, U, Q, D))
    add("pair_same_pair_pr", K + (pp(P, R),), pair_same_pair)
    add("pair_same_pair_qr", K + (pp(Q, R),), pair_same_pair)
    add("pair_same_pair_pq", K + (pp(P, Q),),
        (1 / r2) * ((_n(P, D) + _n(Q, D) - 2.0 * _n(P, D) * _n(Q, D)) * _a1(P, Q, U)
                    + (_n(P, U) + _n(Q, U) - 2.0 * _n(P, U) * _n(Q, U)) * _a1(P, Q, D)))

    # triply nested: spin-polarized doubles dressed by number differences
    dressed_pr = (_n(P, D) - _n(R, D)) * _a1(P, R, U) + (_n(P, U) - _n(R, U)) * _a1(P, R, D)
    hop_qs = _e(S, Q, U) + _e(S, Q, D) + _e(Q, S, U) + _e(Q, S, D)
    add("polarized_1", X + (A(Q, S), A(P, R)), -0.5 * (dressed_pr * hop_qs))
    add("polarized_2", X + (A(P, R), A(Q, S)), -0.5 * (dressed_pr * hop_qs))
    ps = Y + (A(P, S),)
    add("polarized_3", ps + (pp(P, Q),), _cross_pp_triple(P, Q, R, S))
    add("polarized_4", ps + (pp(P, R),), _cross_pp_triple(P, R, Q, S))
    add("polarized_5", ps + (pp(Q, S),), _target_pp_triple(P, Q, R, S))
    add("polarized_6", ps + (pp(R, S),), _target_pp_triple(P, R, Q, S))
    add("polarized_7", Y + (pp(Q, S), A(P, S)), _single_last_triple(P, Q, R, S))
    add("polarized_8", Y + (pp(R, S), A(P, S)), _single_last_triple(P, R, Q, S))
    add("polarized_9", Y + (pp(P, Q), A(P, S)),
        _hop_times_single(P, Q, R, S, lambda s, t: _n(Q, 1 - t) - _n(P, 1 - s)))
    add("polarized_10", Y + (pp(P, R), A(P, S)),
        _hop_times_single(P, Q, R, S, lambda s, t: _n(P, 1 - s) - _n(R, 1 - t)))

    # triplet-intermediate minus singlet-intermediate doubles
    add("triplet_minus_singlet", (math.sqrt(3.0) * sa_double1(P, Q, R, S) - sa_double0(P, Q, R, S),),
        _a2(P, U, Q, U, R, U, S, U) + _a2(P, D, Q, D, R, D, S, D)
        + _a2(P, U, Q, D, R, D, S, U) + _a2(P, D, Q, U, R, U, S, D))
    return out


# --- Lie closure ---

@dataclass
class AlgebraBasis:
    """Frobenius-orthonormal antisymmetric matrices, flattened row-wise."""

    vectors: np.ndarray
    generation: np.ndarray
    size: int
    csfs: object = None
    basis: object = None

    @property
    def dim(self):
        return self.vectors.shape[0]

    def matrices(self):
        return self.vectors.reshape(self.dim, self.size, self.size)

    def coordinates(self, matrix):
        """Bring a sector-basis matrix into the algebra's coordinates."""
        if sp.issparse(matrix):
            matrix = matrix.toarray()
        if self.csfs is not None and matrix.shape[0] != self.size:
            matrix = self.csfs.compress(matrix)
        return np.asarray(matrix, dtype=float)

    @classmethod
    def from_generators(cls, matrices, basis=None, csfs=None, tol=CLOSURE_TOL):
        """Orthonormalized span of the generators themselves (depth 0)."""
        mats = [_dense_generator(m, csfs) for m in matrices]
        if not mats:
            raise ConfigError("no generators given")
        size = mats[0].shape[0]
        flat = np.stack([m.ravel() for m in mats])
        vectors = _extend(np.zeros((0, size * size)), flat, tol)
        return cls(vectors, np.zeros(len(vectors), dtype=int), size, csfs, basis)


def _dense_generator(matrix, csfs):
    if csfs is not None:
        return csfs.compress(matrix)
    return matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix, dtype=float)


def _extend(current, candidates, tol):
    """Orthonormal directions of the candidates outside span(current)."""
    if candidates.shape[0] == 0:
        return candidates
    scale = 1.0 + np.linalg.norm(candidates, axis=1).max()
    residual = candidates.copy()
    for _ in range(2):
        if current.shape[0]:
            residual -= (residual @ current.T) @ current
    q, r, _ = scipy.linalg.qr(residual.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > tol * scale))
    fresh = q[:, :rank].T
    if current.shape[0] and rank:
        fresh = fresh - (fresh @ current.T) @ current
        fresh /= np.linalg.norm(fresh, axis=1)[:, None]
    return fresh


def dla_closure(pool, basis, tol=CLOSURE_TOL, csfs=None, cap=DEFAULT_CAP):
    """Span of all nested commutators of the pool generators on a sector."""
    if csfs is not None and any("S2" not in e.conserved for e in pool):
        raise ConfigError("CSF compression needs an S^2-conserving pool")
    raw = [matrix_rep(g, basis) for e in pool for g in e.generators]
    algebra = AlgebraBasis.from_generators(raw, basis, csfs, tol)
    size = algebra.size
    gens = [_dense_generator(m, csfs) for m in raw]
    gens = [m for m in gens if np.abs(m).max() > 0.0]
    vectors, generation = algebra.vectors, list(algebra.generation)
    frontier, depth = vectors, 0
    while frontier.shape[0]:
        depth += 1
        frontier_mats = frontier.reshape(-1, size, size)
        batch = []
        for g in gens:
            comm = np.matmul(g, frontier_mats) - np.matmul(frontier_mats, g)
            batch.append(comm.reshape(len(frontier_mats), -1))
        fresh = _extend(vectors, np.concatenate(batch), tol)
        vectors = np.concatenate([vectors, fresh])
        generation.extend([depth] * len(fresh))
        logger.info("Closure sweep %d: +%d directions, dimension %d", depth, len(fresh), len(vectors))
        if len(vectors) > cap:
            raise DimensionCapError(cap, len(vectors))
        frontier = fresh
    return AlgebraBasis(vectors, np.array(generation), size, csfs, basis)


def commutes_with(algebra, matrix):
    """Largest Frobenius norm of [M, matrix] over the algebra elements."""
    op = algebra.coordinates(matrix)
    mats = algebra.matrices()
    comm = np.matmul(mats, op) - np.matmul(op, mats)
    return float(np.sqrt((comm ** 2).sum(axis=(1, 2))).max(initial=0.0))


def parity_conserved(algebra, orbital_irreps, tol=1e-9):
    """Whether every element preserves the electron-number parity of each irrep."""
    for irrep in sorted(set(orbital_irreps)):
        parity = parity_matrix(irrep, algebra.basis, orbital_irreps)
        if commutes_with(algebra, parity) > tol:
            return False
    return True


# --- Reachability ---

@dataclass
class ReachabilityResult:
    invariant_dim: int
    complement_dim: int
    complement_vectors: np.ndarray
    invariant_vectors: np.ndarray
    csfs: object = None

    def complement_states(self):
        """Complement vectors as determinant-basis amplitude arrays."""
        if self.csfs is None:
            return self.complement_vectors.T
        return (self.csfs.columns @ self.complement_vectors).T

    def to_dict(self):
        return {"invariant_dim": self.invariant_dim, "complement_dim": self.complement_dim}


def reachable_subspace(algebra, reference, csfs=None, tol=CLOSURE_TOL):
    """Smallest algebra-invariant subspace containing the reference."""
    amps = reference.amplitudes
    csfs = csfs if csfs is not None else algebra.csfs
    if csfs is not None:
        coords = csfs.to_csf(amps)
        if np.linalg.norm(csfs.columns @ coords - amps) > 1e-8:
            raise SectorError("reference does not lie in the CSF space")
    if algebra.csfs is not None:
        start = algebra.csfs.to_csf(amps)
    else:
        start = amps
    mats = algebra.matrices()
    span = _extend(np.zeros((0, algebra.size)), start[None, :], tol)
    frontier = span
    while frontier.shape[0]:
        images = np.einsum("kij,mj->kmi", mats, frontier).reshape(-1, algebra.size)
        fresh = _extend(span, images, tol)
        span = np.concatenate([span, fresh])
        frontier = fresh
    invariant = span.T
    if csfs is not None and algebra.csfs is None:
        invariant = csfs.columns.T @ invariant
        invariant = scipy.linalg.orth(invariant) if invariant.size else invariant
    complement = scipy.linalg.null_space(invariant.T) if invariant.size else np.eye(invariant.shape[0])
    logger.info("Invariant subspace %d, complement %d", invariant.shape[1], complement.shape[1])
    return ReachabilityResult(invariant.shape[1], complement.shape[1], complement, invariant, csfs)
