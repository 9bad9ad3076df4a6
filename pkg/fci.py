# fci.py
# Exact diagonalization oracle, symmetry classification of eigenstates and overlap analysis.

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from errors import ConfigError, ConvergenceError, SectorError
from fock import build_hamiltonian, enumerate_sector
from symmetry import csf_basis, determinant_irreps, s2_matrix

logger = logging.getLogger(__name__)

# --- Constants ---
DENSE_LIMIT = 2000         # dense eigh below this dimension
DEGENERACY_TOL = 1e-8      # hartree
RESIDUAL_TOL = 1e-9
ARPACK_RESTARTS = 3


# --- Spectra ---

@dataclass
class Spectrum:
    """Lowest eigenpairs of a sector Hamiltonian, energies ascending."""

    energies: np.ndarray
    vectors: np.ndarray
    basis: object = None
    sector: dict = field(default_factory=dict)

    @property
    def k(self):
        return len(self.energies)

    def residuals(self, H):
        return np.linalg.norm(H @ self.vectors - self.vectors * self.energies, axis=0)


def lowest_eigenpairs(H, k=1, basis=None, dense_limit=DENSE_LIMIT, restarts=ARPACK_RESTARTS):
    """k lowest eigenpairs of a real symmetric (sparse) matrix."""
    dim = H.shape[0]
    if not 1 <= k <= dim:
        raise ConfigError(f"cannot take {k} eigenpairs of a {dim}-dimensional matrix")
    if dim < dense_limit or k >= dim - 1:
        dense = H.toarray() if sp.issparse(H) else np.asarray(H)
        energies, vectors = scipy.linalg.eigh(dense, subset_by_index=[0, k - 1])
    else:
        energies, vectors = _iterative(H, k, restarts)
    sector = basis.constraints if basis is not None else {}
    spectrum = Spectrum(energies, vectors, basis, sector)
    worst = float(spectrum.residuals(H).max())
    if worst > RESIDUAL_TOL:
        logger.warning("Eigenpair residual %.2e exceeds %.0e", worst, RESIDUAL_TOL)
    return spectrum


def _iterative(H, k, restarts):
    dim = H.shape[0]
    v0 = np.ones(dim) / np.sqrt(dim)
    ncv = min(dim, max(2 * k + 1, 20))
    for attempt in range(restarts + 1):
        try:
            energies, vectors = eigsh(H, k=k, which="SA", v0=v0, ncv=ncv, tol=1e-12,
                                      maxiter=dim * 20)
            order = np.argsort(energies)
            vectors, _ = np.linalg.qr(vectors[:, order])
            return energies[order], vectors
        except ArpackNoConvergence:
            ncv = min(dim, 2 * ncv)
            logger.warning("Lanczos did not converge (attempt %d), retrying with ncv=%d",
                           attempt + 1, ncv)
    raise ConvergenceError(f"no convergence for {k} eigenpairs after {restarts} restarts")


def degenerate_blocks(energies, tol=DEGENERACY_TOL):
    """Index groups of (near-)degenerate consecutive energies."""
    blocks = []
    for i, e in enumerate(energies):
        if blocks and abs(e - energies[blocks[-1][-1]]) < tol:
            blocks[-1].append(i)
        else:
            blocks.append([i])
    return blocks


# --- Overlaps ---

@dataclass
class OverlapResult:
    weights: np.ndarray
    residual: float
    block_weights: list

    def to_dict(self):
        return {
            "weights": [float(w) for w in self.weights],
            "residual": self.residual,
            "block_weights": [float(w) for w in self.block_weights],
        }


def overlap_analysis(state, spectrum, tol=DEGENERACY_TOL):
    """Squared overlaps of a state with each eigenvector, summed per degenerate block."""
    if spectrum.basis is not None and not spectrum.basis.same_as(state.basis):
        raise SectorError("state and spectrum live on different bases")
    if spectrum.vectors.shape[0] != len(state.amplitudes):
        raise SectorError("state and spectrum have different dimensions")
    weights = (spectrum.vectors.T @ state.amplitudes) ** 2
    blocks = degenerate_blocks(spectrum.energies, tol)
    return OverlapResult(
        weights=weights,
        residual=float(1.0 - weights.sum()),
        block_weights=[float(weights[b].sum()) for b in blocks],
    )


# --- Classification ---

@dataclass
class StateLabel:
    energy: float
    s2: float
    spin: float
    irrep: int
    irrep_weight: float

    def to_dict(self):
        return {"energy": self.energy, "s2": self.s2, "spin": self.spin,
                "irrep": self.irrep, "irrep_weight": self.irrep_weight}


def classify_states(spectrum, orbital_irreps=None):
    """<S^2>, total S and dominant irrep of every eigenvector."""
    basis = spectrum.basis
    s2 = s2_matrix(basis)
    labels = determinant_irreps(basis, orbital_irreps)
    present = np.unique(labels)
    out = []
    for energy, vec in zip(spectrum.energies, spectrum.vectors.T):
        value = float(vec @ (s2 @ vec))
        spin = round(float(np.sqrt(1.0 + 4.0 * max(value, 0.0)) - 1.0)) / 2.0
        probs = vec * vec
        weights = np.array([probs[labels == g].sum() for g in present])
        top = int(np.argmax(weights))
        out.append(StateLabel(float(energy), value, spin, int(present[top]), float(weights[top])))
    return out


def csf_ground_energy(H, csfs):
    """Lowest eigenvalue of C^T H C."""
    if csfs.dim == 0:
        raise SectorError(f"no CSFs with S={csfs.spin} in this sector")
    return float(scipy.linalg.eigh(csfs.compress(H), eigvals_only=True, subset_by_index=[0, 0])[0])


def sector_ground_energies(m, sz2, spins, irreps=None):
    """Ground energy per (irrep, S) by diagonalizing inside each constrained sector."""
    irreps = range(8) if irreps is None else irreps
    result = {}
    for irrep in irreps:
        basis = enumerate_sector(m.n_spatial, m.n_electrons, sz2, irrep, m.orbital_irreps)
        if basis.dim == 0:
            continue
        H = build_hamiltonian(m, basis)
        for spin in spins:
            try:
                csfs = csf_basis(basis, spin)
            except SectorError:
                continue
            if csfs.dim:
                result[(int(irrep), float(spin))] = csf_ground_energy(H, csfs)
    return result


def classified_ground_energies(m, sz2):
    """Ground energy per (irrep, S) from one unconstrained-irrep diagonalization."""
    basis = enumerate_sector(m.n_spatial, m.n_electrons, sz2, None, m.orbital_irreps)
    H = build_hamiltonian(m, basis)
    spectrum = lowest_eigenpairs(H, basis.dim, basis, dense_limit=basis.dim + 1)
    result = {}
    for label in classify_states(spectrum, m.orbital_irreps):
        key = (label.irrep, label.spin)
        if key not in result:
            result[key] = label.energy
    return result
