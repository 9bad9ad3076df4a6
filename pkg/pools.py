# pools.py
# Operator pools (GSD, saGSD, saGSpD, saGSpD-full, pDint0) and their symmetry filters.

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations, product

import numpy as np

from errors import ConfigError
from fcidump import irrep_product
from fock import (
    FermionPolynomial,
    alpha,
    beta,
    double,
    enumerate_sector,
    matrix_rep,
    pair_annihilation,
    pair_creation,
    single,
)

logger = logging.getLogger(__name__)

# --- Constants ---
PRUNE_TOL = 1e-14


class PoolFamily(Enum):
    GSD = "GSD"
    SAGSD = "saGSD"
    SAGSPD = "saGSpD"
    SAGSPD_FULL = "saGSpD_full"
    PDINT0 = "pDint0"


class ElementKind(Enum):
    SPIN_RESOLVED_SINGLE = "spin_resolved_single"
    SPIN_RESOLVED_DOUBLE = "spin_resolved_double"
    SA_SINGLE = "sa_single"
    SA_DOUBLE_INT0 = "sa_double_int0"
    SA_DOUBLE_INT1 = "sa_double_int1"
    PERFECT_PAIRING = "perfect_pairing"
    TUPLE = "tuple"


# --- Domain types ---

@dataclass(frozen=True)
class PoolElement:
    """One selectable pool entry: a generator, or an ordered tuple of them."""

    id: str
    generators: tuple
    kind: ElementKind
    irrep: int
    conserved: frozenset
    orbitals: tuple = ()

    @property
    def is_tuple(self):
        return self.kind is ElementKind.TUPLE

    def to_dict(self):
        return {
            "id": self.id,
            "kind": self.kind.value,
            "irrep": self.irrep,
            "conserved": sorted(self.conserved),
            "n_generators": len(self.generators),
        }


@dataclass
class PoolSpec:
    family: PoolFamily
    enforce_spatial: bool = True
    orbital_irreps: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not isinstance(self.family, PoolFamily):
            try:
                self.family = PoolFamily(self.family)
            except ValueError:
                valid = ", ".join(f.value for f in PoolFamily)
                raise ConfigError(f"unknown pool family {self.family!r} (valid: {valid})") from None
        self.orbital_irreps = tuple(int(g) for g in self.orbital_irreps)
        if any(not 0 <= g <= 7 for g in self.orbital_irreps):
            raise ConfigError(f"orbital irreps must lie in 0..7, got {list(self.orbital_irreps)}")
        if self.family is PoolFamily.SAGSPD_FULL:
            # singles of every irrep; tuples restore overall total symmetry
            self.enforce_spatial = False


# --- Spin-adapted generators ---

def sa_single(P, Q):
    """A_P^Q = (A_{P up}^{Q up} + A_{P down}^{Q down}) / sqrt(2)."""
    return (single(alpha(P), alpha(Q)) + single(beta(P), beta(Q))) / math.sqrt(2.0)


def sa_double0(P, Q, R, S):
    """Double excitation through an intermediate singlet."""
    scale = 1.0 / (2.0 * math.sqrt((1 + (P == Q)) * (1 + (R == S))))
    a, b = alpha, beta
    return scale * (
        double(a(P), b(Q), a(R), b(S)) - double(a(P), b(Q), b(R), a(S))
        - double(b(P), a(Q), a(R), b(S)) + double(b(P), a(Q), b(R), a(S))
    )


def sa_double1(P, Q, R, S):
    """Double excitation through an intermediate triplet (zero for P=Q or R=S)."""
    a, b = alpha, beta
    if P == Q or R == S:
        return FermionPolynomial.zero()
    mixed = (double(a(P), b(Q), a(R), b(S)) + double(a(P), b(Q), b(R), a(S))
             + double(b(P), a(Q), a(R), b(S)) + double(b(P), a(Q), b(R), a(S)))
    same = double(a(P), a(Q), a(R), a(S)) + double(b(P), b(Q), b(R), b(S))
    return (same + 0.5 * mixed) / math.sqrt(3.0)


def perfect_pairing(P, Q):
    """A_PP^QQ = b+_Q b_P - b+_P b_Q."""
    return pair_creation(Q) * pair_annihilation(P) - pair_creation(P) * pair_annihilation(Q)


def sa_double_pp_single(P, Q, R):
    """A_PP^QR: a pair leaves P and splits singlet-coupled over Q and R."""
    return sa_double0(P, P, Q, R)


# --- Element helpers ---

def _label(p):
    return f"{p // 2}{'ab'[p % 2]}"


def _irrep_of(orbitals, irreps):
    return irrep_product(*(irreps[P] for P in orbitals))


def _conserved(irrep, spin_adapted):
    flags = {"N", "Sz"}
    if spin_adapted:
        flags.add("S2")
    if irrep == 0:
        flags.add("Gamma")
    return frozenset(flags)


def _element(id_, generator, kind, orbitals, irreps, spin_adapted=True):
    irrep = _irrep_of(orbitals, irreps)
    return PoolElement(id_, (generator,), kind, irrep, _conserved(irrep, spin_adapted), tuple(orbitals))


def _keep(elements, enforce_spatial):
    if not enforce_spatial:
        return list(elements)
    return [e for e in elements if e.irrep == 0]


def _resolve_irreps(n_spatial, orbital_irreps):
    if n_spatial < 2:
        raise ConfigError(f"pools need at least 2 spatial orbitals, got {n_spatial}")
    irreps = tuple(orbital_irreps) if orbital_irreps else (0,) * n_spatial
    if len(irreps) != n_spatial:
        raise ConfigError(f"{len(irreps)} orbital irreps for {n_spatial} orbitals")
    return irreps


def _ordered_pairs(n_spatial):
    """Unique (lower, upper) spatial pairs: P<Q, R<S and (P,Q) before (R,S)."""
    pairs = list(combinations(range(n_spatial), 2))
    for i, (P, Q) in enumerate(pairs):
        for R, S in pairs[i + 1:]:
            yield P, Q, R, S


def _sa_singles(n_spatial, irreps):
    return [
        _element(f"sa1:{P},{Q}", sa_single(P, Q), ElementKind.SA_SINGLE, (P, Q), irreps)
        for P, Q in combinations(range(n_spatial), 2)
    ]


def _perfect_pairs(n_spatial, irreps):
    return [
        _element(f"pp:{P},{Q}", perfect_pairing(P, Q), ElementKind.PERFECT_PAIRING, (P, P, Q, Q), irreps)
        for P, Q in combinations(range(n_spatial), 2)
    ]


def _pair_to_split(n_spatial, irreps):
    out = []
    for P in range(n_spatial):
        for Q, R in combinations(range(n_spatial), 2):
            out.append(_element(f"sa2_0:{P},{P},{Q},{R}", sa_double_pp_single(P, Q, R),
                                ElementKind.SA_DOUBLE_INT0, (P, P, Q, R), irreps))
    return out


def _general_doubles(n_spatial, irreps, intermediate):
    builder = sa_double0 if intermediate == 0 else sa_double1
    kind = ElementKind.SA_DOUBLE_INT0 if intermediate == 0 else ElementKind.SA_DOUBLE_INT1
    out = []
    for P, Q, R, S in _ordered_pairs(n_spatial):
        generator = builder(P, Q, R, S)
        if generator.is_zero():
            continue
        out.append(_element(f"sa2_{intermediate}:{P},{Q},{R},{S}", generator, kind, (P, Q, R, S), irreps))
    return out


# --- Pool builders ---

def build_gsd(n_spatial, orbital_irreps=None, enforce_spatial=True):
    """Spin-resolved generalized singles and doubles conserving S_z."""
    irreps = _resolve_irreps(n_spatial, orbital_irreps)
    n_so = 2 * n_spatial
    elements = []
    for p, q in combinations(range(n_so), 2):
        if p % 2 == q % 2:
            elements.append(_element(f"gs:{_label(p)},{_label(q)}", single(p, q),
                                     ElementKind.SPIN_RESOLVED_SINGLE, (p // 2, q // 2), irreps, False))
    pairs = list(combinations(range(n_so), 2))
    for i, (p, q) in enumerate(pairs):
        for r, s in pairs[i + 1:]:
            if (p % 2) + (q % 2) != (r % 2) + (s % 2):
                continue
            generator = double(p, q, r, s)
            if generator.is_zero():
                continue
            elements.append(_element(
                f"gd:{_label(p)},{_label(q)},{_label(r)},{_label(s)}", generator,
                ElementKind.SPIN_RESOLVED_DOUBLE, (p // 2, q // 2, r // 2, s // 2), irreps, False,
            ))
    return _keep(elements, enforce_spatial)


def build_sagsd(n_spatial, orbital_irreps=None, enforce_spatial=True):
    """Singlet spin-adapted generalized singles and doubles."""
    irreps = _resolve_irreps(n_spatial, orbital_irreps)
    elements = (_sa_singles(n_spatial, irreps) + _perfect_pairs(n_spatial, irreps)
                + _pair_to_split(n_spatial, irreps)
                + _general_doubles(n_spatial, irreps, 0) + _general_doubles(n_spatial, irreps, 1))
    return _keep(elements, enforce_spatial)


def build_sagspd(n_spatial, orbital_irreps=None, enforce_spatial=True):
    """Spin-adapted singles plus perfect-pairing doubles."""
    irreps = _resolve_irreps(n_spatial, orbital_irreps)
    return _keep(_sa_singles(n_spatial, irreps), enforce_spatial) + _perfect_pairs(n_spatial, irreps)


def tuple_element(members):
    """Ordered product of single-generator elements, one parameter each."""
    irrep = irrep_product(*(m.irrep for m in members))
    conserved = frozenset.intersection(*(m.conserved for m in members)) - {"Gamma"}
    return PoolElement(
        "tuple:" + "|".join(m.id for m in members),
        tuple(g for m in members for g in m.generators),
        ElementKind.TUPLE,
        irrep,
        conserved,
        tuple(P for m in members for P in m.orbitals),
    )


def build_sagspd_full(n_spatial, orbital_irreps=None):
    """saGSpD without the spatial filter plus totally symmetric 2- and 3-tuples of singles."""
    irreps = _resolve_irreps(n_spatial, orbital_irreps)
    base = build_sagspd(n_spatial, irreps, enforce_spatial=False)
    odd = sorted((e for e in base if e.kind is ElementKind.SA_SINGLE and e.irrep != 0),
                 key=lambda e: e.id)
    tuples = []
    for length in (2, 3):
        for members in product(odd, repeat=length):
            if irrep_product(*(m.irrep for m in members)) == 0:
                tuples.append(tuple_element(members))
    logger.debug("saGSpD-full: %d base elements, %d tuples", len(base), len(tuples))
    return base + tuples


def build_pdint0(n_spatial, orbital_irreps=None, enforce_spatial=True):
    """Perfect pairs plus singlet-intermediate doubles without repeated indices."""
    irreps = _resolve_irreps(n_spatial, orbital_irreps)
    elements = _perfect_pairs(n_spatial, irreps) + _general_doubles(n_spatial, irreps, 0)
    return _keep(elements, enforce_spatial)


_BUILDERS = {
    PoolFamily.GSD: build_gsd,
    PoolFamily.SAGSD: build_sagsd,
    PoolFamily.SAGSPD: build_sagspd,
    PoolFamily.PDINT0: build_pdint0,
}


def build_pool(spec, n_spatial=None):
    if n_spatial is None:
        n_spatial = len(spec.orbital_irreps)
    if spec.family is PoolFamily.SAGSPD_FULL:
        pool = build_sagspd_full(n_spatial, spec.orbital_irreps)
    else:
        pool = _BUILDERS[spec.family](n_spatial, spec.orbital_irreps, spec.enforce_spatial)
    logger.info("Built %s pool: %d elements", spec.family.value, len(pool))
    return pool


def is_totally_symmetric(e, orbital_irreps):
    """Whether the excitation's orbital irreps multiply to the totally symmetric one."""
    if e.kind is ElementKind.PERFECT_PAIRING:
        return True
    return _irrep_of(e.orbitals, orbital_irreps) == 0


# --- Sector and pruning ---

def working_sector(spec, n_electrons, sz2, reference_irrep, n_spatial=None):
    """Smallest sector closed under the pool: the irrep constraint goes when the pool breaks it."""
    irreps = spec.orbital_irreps or None
    if n_spatial is None:
        n_spatial = len(spec.orbital_irreps)
    keep_irrep = (spec.enforce_spatial and spec.family is not PoolFamily.SAGSPD_FULL
                  and irreps is not None)
    basis = enumerate_sector(n_spatial, n_electrons, sz2,
                             reference_irrep if keep_irrep else None, irreps)
    logger.info("Working sector for %s: %r", spec.family.value, basis)
    return basis


def acts_on(element, basis, tol=PRUNE_TOL):
    for g in element.generators:
        m = matrix_rep(g, basis)
        if m.nnz and np.abs(m.data).max() > tol:
            return True
    return False


def prune_pool(pool, basis):
    """Drop elements whose generators annihilate the whole sector."""
    kept = [e for e in pool if acts_on(e, basis)]
    if len(kept) != len(pool):
        logger.info("Pruned %d of %d pool elements that act trivially on %r",
                    len(pool) - len(kept), len(pool), basis)
    return kept


def pool_summary(pool):
    return [e.to_dict() for e in pool]
