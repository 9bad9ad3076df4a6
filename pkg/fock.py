# fock.py
# Fermionic operator algebra, determinant sector bases and sparse operator matrices.
# Spinorbital 2P is (P, up) and 2P+1 is (P, down); words are int64 bit masks.

import json
import logging
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from errors import SectorError

logger = logging.getLogger(__name__)

# --- Constants ---
COEFF_TOL = 1e-14        # polynomial terms below this are dropped
LEAK_TOL = 1e-12         # amplitude allowed to leave a closed basis
MAX_SPINORBITALS = 62    # int64 words

IDENTITY_KEY = ((), ())


def alpha(P):
    return 2 * P


def beta(P):
    return 2 * P + 1


# --- Normal ordering ---
# An operator is (index, is_creation). Canonical order: creations first with
# strictly decreasing index, then annihilations with strictly decreasing index.

def _rank(op):
    index, is_creation = op
    return (0 if is_creation else 1, -index)


@lru_cache(maxsize=200000)
def _normal_order(ops):
    """Normal-order a product of elementary operators.

    Returns a tuple of (key, coefficient) pairs where key = (creators, annihilators).
    """
    for pos in range(len(ops) - 1):
        left, right = ops[pos], ops[pos + 1]
        r_left, r_right = _rank(left), _rank(right)
        if r_left == r_right:
            return ()
        if r_left > r_right:
            swapped = ops[:pos] + (right, left) + ops[pos + 2:]
            result = {}
            for key, coeff in _normal_order(swapped):
                result[key] = result.get(key, 0.0) - coeff
            if left[0] == right[0]:
                # {a_i, a^i} = 1
                for key, coeff in _normal_order(ops[:pos] + ops[pos + 2:]):
                    result[key] = result.get(key, 0.0) + coeff
            return tuple((k, c) for k, c in result.items() if c != 0.0)
    creators = tuple(i for i, dag in ops if dag)
    annihilators = tuple(i for i, dag in ops if not dag)
    return (((creators, annihilators), 1.0),)


def _key_to_ops(key):
    creators, annihilators = key
    return tuple((i, True) for i in creators) + tuple((i, False) for i in annihilators)


# --- Strings and polynomials ---

@dataclass(frozen=True)
class FermionString:
    """coefficient * a^{c1} ... a^{ck} a_{a1} ... a_{al} in canonical order."""

    coefficient: float
    creators: tuple
    annihilators: tuple

    @property
    def key(self):
        return (self.creators, self.annihilators)


class FermionPolynomial:
    """Real linear combination of canonical fermion strings."""

    __slots__ = ("terms",)
    __array_ufunc__ = None   # numpy scalars defer to __rmul__

    def __init__(self, terms=None):
        self.terms = {}
        for key, coeff in (terms or {}).items():
            if abs(coeff) > COEFF_TOL:
                self.terms[key] = float(coeff)

    # --- Constructors ---
    @classmethod
    def from_ops(cls, ops, coefficient=1.0):
        """Product of elementary operators in written order."""
        ops = tuple((int(i), bool(dag)) for i, dag in ops)
        return cls({key: coefficient * c for key, c in _normal_order(ops)})

    @classmethod
    def identity(cls, coefficient=1.0):
        return cls({IDENTITY_KEY: coefficient})

    @classmethod
    def zero(cls):
        return cls()

    # --- Arithmetic ---
    def _combined(self, other, sign):
        out = dict(self.terms)
        for key, coeff in other.terms.items():
            out[key] = out.get(key, 0.0) + sign * coeff
        return FermionPolynomial(out)

    def __add__(self, other):
        if not isinstance(other, FermionPolynomial):
            other = FermionPolynomial.identity(other)
        return self._combined(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, FermionPolynomial):
            other = FermionPolynomial.identity(other)
        return self._combined(other, -1.0)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return FermionPolynomial({k: -c for k, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, FermionPolynomial):
            out = {}
            for k1, c1 in self.terms.items():
                ops1 = _key_to_ops(k1)
                for k2, c2 in other.terms.items():
                    for key, c in _normal_order(ops1 + _key_to_ops(k2)):
                        out[key] = out.get(key, 0.0) + c1 * c2 * c
            return FermionPolynomial(out)
        return FermionPolynomial({k: c * other for k, c in self.terms.items()})

    def __rmul__(self, scalar):
        return FermionPolynomial({k: scalar * c for k, c in self.terms.items()})

    def __truediv__(self, scalar):
        return FermionPolynomial({k: c / scalar for k, c in self.terms.items()})

    # --- Queries ---
    def adjoint(self):
        out = {}
        for (creators, annihilators), coeff in self.terms.items():
            # reversing each block of distinct indices back into decreasing order
            k, l = len(creators), len(annihilators)
            sign = -1.0 if ((k * (k - 1) + l * (l - 1)) // 2) % 2 else 1.0
            out[(annihilators, creators)] = sign * coeff
        return FermionPolynomial(out)

    def is_zero(self, tol=COEFF_TOL):
        return all(abs(c) <= tol for c in self.terms.values())

    def max_abs(self):
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def is_anti_hermitian(self, tol=1e-12):
        return (self + self.adjoint()).max_abs() <= tol

    def support(self):
        """Spinorbital indices touched by any term."""
        return sorted({i for c, a in self.terms for i in c + a})

    def strings(self):
        for (creators, annihilators), coeff in sorted(self.terms.items()):
            yield FermionString(coeff, creators, annihilators)

    def allclose(self, other, tol=1e-12):
        return (self - other).max_abs() <= tol

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms.items())

    def __repr__(self):
        parts = []
        for s in self.strings():
            ops = " ".join([f"a^{i}" for i in s.creators] + [f"a_{i}" for i in s.annihilators])
            parts.append(f"{s.coefficient:+.6g} {ops or '1'}")
        return "FermionPolynomial(" + (" ".join(parts) or "0") + ")"


# --- Operator builders ---

def create(p):
    return FermionPolynomial.from_ops([(p, True)])


def annihilate(p):
    return FermionPolynomial.from_ops([(p, False)])


def number(p):
    return FermionPolynomial.from_ops([(p, True), (p, False)])


def excitation(creators, annihilators, coefficient=1.0):
    """a^{c1}..a^{ck} a_{a1}..a_{al} with operators in written order."""
    ops = [(i, True) for i in creators] + [(i, False) for i in annihilators]
    return FermionPolynomial.from_ops(ops, coefficient)


def single(p, q):
    """Spin-resolved single A_p^q = a^q a_p - a^p a_q."""
    return excitation([q], [p]) - excitation([p], [q])


def double(p, q, r, s):
    """Spin-resolved double A_pq^rs = a^r a^s a_q a_p - a^p a^q a_s a_r."""
    return excitation([r, s], [q, p]) - excitation([p, q], [s, r])


def spin_summed_excitation(P, Q):
    """E_PQ = sum over spin of a^{P sigma} a_{Q sigma} (spatial indices)."""
    return excitation([alpha(P)], [alpha(Q)]) + excitation([beta(P)], [beta(Q)])


def pair_creation(P):
    """b^dagger_P = a^{P up} a^{P down}."""
    return excitation([alpha(P), beta(P)], [])


def pair_annihilation(P):
    """b_P = a_{P down} a_{P up}."""
    return excitation([], [beta(P), alpha(P)])


# --- Bit helpers ---

_POPCOUNT8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


def popcount(words):
    words = np.ascontiguousarray(words, dtype=np.int64)
    return _POPCOUNT8[words.view(np.uint8)].reshape(words.shape + (8,)).sum(axis=-1)


def _act(key, words):
    """Apply one canonical string to every word.

    Returns (new_words, signs, alive) with signs in {-1, +1}.
    """
    creators, annihilators = key
    out = np.array(words, dtype=np.int64, copy=True)
    signs = np.ones(out.shape, dtype=np.int64)
    alive = np.ones(out.shape, dtype=bool)
    # rightmost operator acts first
    for index in annihilators[::-1]:
        bit = np.int64(1) << np.int64(index)
        alive &= (out & bit) != 0
        parity = popcount(out & (bit - 1)) & 1
        signs = np.where(parity == 1, -signs, signs)
        out = out & ~bit
    for index in creators[::-1]:
        bit = np.int64(1) << np.int64(index)
        alive &= (out & bit) == 0
        parity = popcount(out & (bit - 1)) & 1
        signs = np.where(parity == 1, -signs, signs)
        out = out | bit
    return out, signs, alive


# --- Sector bases ---

class SectorBasis:
    """Sorted determinant basis satisfying (N, S_z, irrep) constraints."""

    def __init__(self, words, n_spatial, n_electrons=None, sz2=None, irrep=None,
                 orbital_irreps=None):
        words = np.unique(np.asarray(words, dtype=np.int64))
        words.setflags(write=False)
        self.words = words
        self.n_spatial = int(n_spatial)
        self.n_electrons = n_electrons
        self.sz2 = sz2
        self.irrep = irrep
        self.orbital_irreps = None if orbital_irreps is None else tuple(int(g) for g in orbital_irreps)
        self._cache = {}

    @property
    def dim(self):
        return len(self.words)

    def __len__(self):
        return len(self.words)

    @property
    def constraints(self):
        return {"n_electrons": self.n_electrons, "sz2": self.sz2, "irrep": self.irrep}

    def lookup(self, words):
        """Indices of words in the basis and a mask telling which were found."""
        words = np.asarray(words, dtype=np.int64)
        if self.dim == 0:
            return np.zeros(words.shape, dtype=np.int64), np.zeros(words.shape, dtype=bool)
        idx = np.searchsorted(self.words, words)
        idx = np.minimum(idx, self.dim - 1)
        return idx, self.words[idx] == words

    def index(self, word):
        idx, found = self.lookup(np.array([word]))
        if not found[0]:
            raise SectorError(f"determinant {word:#b} is not in this basis")
        return int(idx[0])

    def contains(self, words):
        return self.lookup(words)[1]

    def same_as(self, other):
        return (
            self is other
            or (self.n_spatial == other.n_spatial and np.array_equal(self.words, other.words))
        )

    def _transitions(self, p):
        """Nonzero (row, col, value) triples of p inside the basis and the leaking part."""
        cols_all = np.arange(self.dim)
        rows, cols, data = [], [], []
        leak_words, leak_cols, leak_data = [], [], []
        for key, coeff in p.terms.items():
            new, signs, alive = _act(key, self.words)
            if not alive.any():
                continue
            new, signs, src = new[alive], signs[alive], cols_all[alive]
            idx, found = self.lookup(new)
            rows.append(idx[found])
            cols.append(src[found])
            data.append(coeff * signs[found])
            if not found.all():
                lost = ~found
                leak_words.append(new[lost])
                leak_cols.append(src[lost])
                leak_data.append(coeff * signs[lost])
        cat = lambda xs, dt: np.concatenate(xs) if xs else np.zeros(0, dtype=dt)
        inside = (cat(rows, np.int64), cat(cols, np.int64), cat(data, float))
        leaking = (cat(leak_words, np.int64), cat(leak_cols, np.int64), cat(leak_data, float))
        return inside, leaking

    def is_closed_under(self, p, tol=LEAK_TOL):
        """True when p maps the span of the basis into itself."""
        _, (words, cols, data) = self._transitions(p)
        return _max_leak(words, cols, data) <= tol

    def __repr__(self):
        return (f"SectorBasis(dim={self.dim}, n_spatial={self.n_spatial}, "
                f"N={self.n_electrons}, sz2={self.sz2}, irrep={self.irrep})")


def _max_leak(words, cols, data, amplitudes=None):
    if words.size == 0:
        return 0.0
    if amplitudes is None:
        pairs = np.stack([words, cols], axis=1)
        uniq, inverse = np.unique(pairs, axis=0, return_inverse=True)
        acc = np.zeros(len(uniq))
        np.add.at(acc, inverse.ravel(), data)
    else:
        uniq, inverse = np.unique(words, return_inverse=True)
        acc = np.zeros(len(uniq))
        np.add.at(acc, inverse.ravel(), data * amplitudes[cols])
    return float(np.abs(acc).max())


def _spin_masks(n_spatial, count, spin, orbital_irreps):
    masks, irreps = [], []
    for occ in combinations(range(n_spatial), count):
        word = 0
        label = 0
        for P in occ:
            word |= 1 << (2 * P + spin)
            if orbital_irreps is not None:
                label ^= orbital_irreps[P]
        masks.append(word)
        irreps.append(label)
    return np.array(masks, dtype=np.int64), np.array(irreps, dtype=np.int64)


def enumerate_sector(n_spatial, n_elec, sz2=None, irrep=None, orbital_irreps=None):
    """All determinants with the given electron count, 2*S_z and irrep."""
    if 2 * n_spatial > MAX_SPINORBITALS:
        raise SectorError(f"{n_spatial} spatial orbitals exceed the {MAX_SPINORBITALS // 2} supported")
    if not 0 <= n_elec <= 2 * n_spatial:
        raise SectorError(f"{n_elec} electrons do not fit in {n_spatial} spatial orbitals")
    if irrep is not None and orbital_irreps is None:
        raise SectorError("an irrep constraint needs orbital irreps")
    if orbital_irreps is not None and len(orbital_irreps) != n_spatial:
        raise SectorError(f"{len(orbital_irreps)} orbital irreps for {n_spatial} orbitals")
    if sz2 is not None:
        if (n_elec - sz2) % 2:
            raise SectorError(f"2*S_z={sz2} has the wrong parity for {n_elec} electrons")
        splits = [((n_elec + sz2) // 2, (n_elec - sz2) // 2)]
    else:
        splits = [(n_up, n_elec - n_up) for n_up in range(n_elec + 1)]
    splits = [(u, d) for u, d in splits if 0 <= u <= n_spatial and 0 <= d <= n_spatial]

    chunks = []
    for n_up, n_dn in splits:
        up, up_irrep = _spin_masks(n_spatial, n_up, 0, orbital_irreps)
        dn, dn_irrep = _spin_masks(n_spatial, n_dn, 1, orbital_irreps)
        words = (up[:, None] | dn[None, :]).ravel()
        if irrep is not None:
            labels = (up_irrep[:, None] ^ dn_irrep[None, :]).ravel()
            words = words[labels == irrep]
        chunks.append(words)
    words = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
    basis = SectorBasis(words, n_spatial, n_elec, sz2, irrep, orbital_irreps)
    logger.debug("Sector N=%d sz2=%s irrep=%s on %d orbitals: %d determinants",
                 n_elec, sz2, irrep, n_spatial, basis.dim)
    return basis


def full_fock_space(n_spatial, orbital_irreps=None):
    """Every occupation word of n_spatial orbitals, all particle numbers."""
    if 2 * n_spatial > 24:
        raise SectorError(f"full Fock space of {n_spatial} orbitals is too large")
    return SectorBasis(np.arange(1 << (2 * n_spatial), dtype=np.int64), n_spatial,
                       orbital_irreps=orbital_irreps)


# --- States ---

@dataclass
class StateVector:
    """Real amplitudes aligned with a SectorBasis."""

    amplitudes: np.ndarray
    basis: SectorBasis

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=float)
        if self.amplitudes.shape != (self.basis.dim,):
            raise SectorError(
                f"{self.amplitudes.shape[0]} amplitudes for a basis of dimension {self.basis.dim}"
            )

    @classmethod
    def determinant(cls, word, basis):
        amplitudes = np.zeros(basis.dim)
        amplitudes[basis.index(word)] = 1.0
        return cls(amplitudes, basis)

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self):
        norm = self.norm()
        if norm == 0.0:
            raise SectorError("cannot normalize the zero vector")
        return StateVector(self.amplitudes / norm, self.basis)

    def dot(self, other):
        if not self.basis.same_as(other.basis):
            raise SectorError("states live on different bases")
        return float(self.amplitudes @ other.amplitudes)

    def to_dict(self):
        b = self.basis
        return {
            "n_spatial": b.n_spatial,
            "n_electrons": b.n_electrons,
            "sz2": b.sz2,
            "irrep": b.irrep,
            "orbital_irreps": None if b.orbital_irreps is None else list(b.orbital_irreps),
            "words": [int(w) for w in b.words],
            "amplitudes": [float(a) for a in self.amplitudes],
        }

    @classmethod
    def from_dict(cls, data):
        try:
            basis = SectorBasis(data["words"], data["n_spatial"], data.get("n_electrons"),
                                data.get("sz2"), data.get("irrep"), data.get("orbital_irreps"))
            words = np.asarray(data["words"], dtype=np.int64)
            amplitudes = np.asarray(data["amplitudes"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise SectorError(f"malformed state dump: {exc}") from exc
        if len(words) != len(amplitudes) or len(np.unique(words)) != len(words):
            raise SectorError("state dump words and amplitudes do not line up")
        order = np.argsort(words)
        return cls(amplitudes[order], basis)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def apply_polynomial(p, v, closed=False):
    """p|v> projected onto v's basis; closed=True forbids leaving the basis."""
    basis = v.basis
    (rows, cols, data), (leak_words, leak_cols, leak_data) = basis._transitions(p)
    if closed and _max_leak(leak_words, leak_cols, leak_data, v.amplitudes) > LEAK_TOL:
        raise SectorError("operator maps the state outside a basis declared closed under it")
    out = np.zeros(basis.dim)
    np.add.at(out, rows, data * v.amplitudes[cols])
    return StateVector(out, basis)


def apply_string(s, v, closed=False):
    """Apply one FermionString (or a whole polynomial) to a state."""
    if isinstance(s, FermionString):
        s = FermionPolynomial({s.key: s.coefficient})
    return apply_polynomial(s, v, closed=closed)


def matrix_rep(p, basis):
    """Sparse matrix of p restricted to the basis (column c = p|det_c>)."""
    (rows, cols, data), _ = basis._transitions(p)
    return sp.coo_matrix((data, (rows, cols)), shape=(basis.dim, basis.dim)).tocsr()


# --- Hamiltonian ---

def hamiltonian_polynomial(m, tol=COEFF_TOL):
    """Electronic Hamiltonian of MolecularIntegrals without the core energy."""
    n = m.n_spatial
    terms = {}

    def add(creators, annihilators, value):
        for key, c in _normal_order(_key_to_ops((creators, annihilators))):
            terms[key] = terms.get(key, 0.0) + value * c

    for p in range(n):
        for q in range(n):
            if abs(m.h1[p, q]) > tol:
                for spin in (0, 1):
                    add((2 * p + spin,), (2 * q + spin,), m.h1[p, q])
    for p, q, r, s in zip(*np.nonzero(np.abs(m.h2) > tol)):
        p, q, r, s = int(p), int(q), int(r), int(s)
        value = 0.5 * m.h2[p, q, r, s]
        for sigma in (0, 1):
            for tau in (0, 1):
                i, j = 2 * p + sigma, 2 * r + tau
                k, l = 2 * s + tau, 2 * q + sigma
                if i == j or k == l:
                    continue
                add((i, j), (k, l), value)
    return FermionPolynomial(terms)


def build_hamiltonian(m, basis):
    """Sparse Hamiltonian matrix (including e_core) on a sector basis."""
    if basis.n_electrons != m.n_electrons:
        raise SectorError(
            f"basis holds {basis.n_electrons} electrons, integrals describe {m.n_electrons}"
        )
    if basis.n_spatial != m.n_spatial:
        raise SectorError(f"basis has {basis.n_spatial} orbitals, integrals {m.n_spatial}")
    h = matrix_rep(hamiltonian_polynomial(m), basis)
    h = h + m.e_core * sp.identity(basis.dim, format="csr")
    logger.debug("Hamiltonian on %d determinants: %d nonzeros", basis.dim, h.nnz)
    return h.tocsr()
