# fcidump.py
# FCIDUMP ingestion, validation, serialization and frozen-core reduction.
# Integrals are stored in chemists' notation (pq|rs) over spatial orbitals.

import logging
import re
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path

import numpy as np

from errors import ConfigError, FcidumpError

logger = logging.getLogger(__name__)

# --- Constants ---
SYMMETRY_TOL = 1e-10     # permutational / point-group symmetry tolerance
DUPLICATE_TOL = 1e-10    # repeated entries must agree to this
MAX_IRREP = 7            # 3-bit labels, D2h and its subgroups

_HEADER_END = re.compile(r"(&END|/)\s*$", re.IGNORECASE)
_HEADER_KEY = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*=")


# --- Irrep labels ---

def irrep_product(*labels):
    """Direct product of Abelian irreps (bitwise XOR)."""
    return reduce(lambda a, b: a ^ b, (int(x) for x in labels), 0)


def _pair_permutations(i, j, k, l):
    return {
        (i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k),
        (k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i),
    }


# --- Data model ---

@dataclass(frozen=True, eq=False)
class MolecularIntegrals:
    """One- and two-electron integrals over spatial orbitals."""

    n_spatial: int
    n_electrons: int
    ms2: int
    orbital_irreps: tuple
    h1: np.ndarray
    h2: np.ndarray
    e_core: float = 0.0
    isym: int = 0
    source: str = field(default="", compare=False)

    def __post_init__(self):
        n = int(self.n_spatial)
        irreps = tuple(int(x) for x in self.orbital_irreps)
        h1 = np.array(self.h1, dtype=float)
        h2 = np.array(self.h2, dtype=float)
        if len(irreps) != n:
            raise FcidumpError(f"{len(irreps)} orbital irreps for {n} orbitals")
        if any(x < 0 or x > MAX_IRREP for x in irreps):
            raise FcidumpError(f"irrep labels must lie in 0..{MAX_IRREP}: {irreps}")
        if h1.shape != (n, n) or h2.shape != (n, n, n, n):
            raise FcidumpError(f"integral shapes {h1.shape}/{h2.shape} do not match NORB={n}")
        if not 0 <= self.n_electrons <= 2 * n:
            raise FcidumpError(f"NELEC={self.n_electrons} impossible with NORB={n}")
        if abs(self.ms2) > self.n_electrons or (self.n_electrons - self.ms2) % 2:
            raise FcidumpError(f"MS2={self.ms2} incompatible with NELEC={self.n_electrons}")
        _check_symmetries(h1, h2, irreps)
        h1.setflags(write=False)
        h2.setflags(write=False)
        object.__setattr__(self, "n_spatial", n)
        object.__setattr__(self, "orbital_irreps", irreps)
        object.__setattr__(self, "h1", h1)
        object.__setattr__(self, "h2", h2)
        object.__setattr__(self, "e_core", float(self.e_core))

    def allclose(self, other, atol=1e-12):
        """Field-wise comparison used by the round-trip checks."""
        return (
            self.n_spatial == other.n_spatial
            and self.n_electrons == other.n_electrons
            and self.ms2 == other.ms2
            and self.orbital_irreps == other.orbital_irreps
            and self.isym == other.isym
            and abs(self.e_core - other.e_core) <= atol
            and np.allclose(self.h1, other.h1, rtol=0.0, atol=atol)
            and np.allclose(self.h2, other.h2, rtol=0.0, atol=atol)
        )

    def reference_energy(self, doubly_occupied):
        """Energy of the closed-shell determinant with the given orbitals filled."""
        occ = np.asarray(sorted(doubly_occupied), dtype=int)
        if occ.size == 0:
            return self.e_core
        coulomb = self.h2[occ[:, None], occ[:, None], occ[None, :], occ[None, :]]
        exchange = self.h2[occ[:, None], occ[None, :], occ[None, :], occ[:, None]]
        return float(
            self.e_core
            + 2.0 * self.h1[occ, occ].sum()
            + (2.0 * coulomb - exchange).sum()
        )


def _check_symmetries(h1, h2, irreps):
    if not np.allclose(h1, h1.T, rtol=0.0, atol=SYMMETRY_TOL):
        raise FcidumpError("one-electron integrals are not symmetric")
    for perm in ((1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)):
        if not np.allclose(h2, h2.transpose(perm), rtol=0.0, atol=SYMMETRY_TOL):
            raise FcidumpError(f"two-electron integrals break permutation {perm}")
    if not irreps:
        return
    g = np.asarray(irreps)
    forbidden1 = (g[:, None] ^ g[None, :]) != 0
    if np.any(np.abs(h1[forbidden1]) > SYMMETRY_TOL):
        raise FcidumpError("one-electron integral couples orbitals of different irreps")
    forbidden2 = (g[:, None, None, None] ^ g[None, :, None, None]
                  ^ g[None, None, :, None] ^ g[None, None, None, :]) != 0
    if np.any(np.abs(h2[forbidden2]) > SYMMETRY_TOL):
        raise FcidumpError("two-electron integral is not totally symmetric")


# --- Parsing ---

def _parse_header(text, first_line):
    body = re.sub(r"^\s*&FCI", "", text, flags=re.IGNORECASE)
    body = _HEADER_END.sub("", body.strip())
    keys = list(_HEADER_KEY.finditer(body))
    fields = {}
    for pos, match in enumerate(keys):
        end = keys[pos + 1].start() if pos + 1 < len(keys) else len(body)
        raw = body[match.end():end]
        tokens = [t for t in re.split(r"[,\s]+", raw) if t]
        fields[match.group(1).upper()] = tokens
    for required in ("NORB", "NELEC"):
        if required not in fields:
            raise FcidumpError(f"header lacks {required}", line=first_line)

    def integer(key, default=None):
        tokens = fields.get(key)
        if not tokens:
            if default is None:
                raise FcidumpError(f"header field {key} is empty", line=first_line)
            return default
        try:
            return int(tokens[0])
        except ValueError:
            raise FcidumpError(f"header field {key}={tokens[0]!r} is not an integer",
                               line=first_line) from None

    uhf = fields.get("UHF") or fields.get("IUHF")
    if uhf and uhf[0].strip(".").upper() in ("TRUE", "T", "1"):
        raise FcidumpError("unrestricted (UHF) integral files are not supported", line=first_line)

    norb = integer("NORB")
    if norb < 0:
        raise FcidumpError(f"NORB={norb} is negative", line=first_line)
    orbsym_tokens = fields.get("ORBSYM", ["1"] * norb)
    try:
        orbsym = [int(t) for t in orbsym_tokens]
    except ValueError:
        raise FcidumpError(f"ORBSYM has non-integer entries {orbsym_tokens}", line=first_line) from None
    if len(orbsym) != norb:
        raise FcidumpError(f"ORBSYM has {len(orbsym)} entries, NORB={norb}", line=first_line)
    if any(s < 1 or s > MAX_IRREP + 1 for s in orbsym):
        raise FcidumpError(f"ORBSYM values must lie in 1..{MAX_IRREP + 1}", line=first_line)
    ignored = sorted(set(fields) - {"NORB", "NELEC", "MS2", "ORBSYM", "ISYM", "UHF", "IUHF"})
    if ignored:
        logger.debug("Ignoring FCIDUMP header fields %s", ignored)
    return {
        "n_spatial": norb,
        "n_electrons": integer("NELEC"),
        "ms2": integer("MS2", 0),
        "orbital_irreps": tuple(s - 1 for s in orbsym),
        "isym": integer("ISYM", 1) - 1,
    }


def _store(table, key, value, line):
    seen = table.get(key)
    if seen is not None and abs(seen[0] - value) > DUPLICATE_TOL:
        raise FcidumpError(
            f"entry {key} repeats with {value!r}, conflicting with line {seen[1]} ({seen[0]!r})",
            line=line,
        )
    table[key] = (value, line)


def parse_fcidump(text, source=""):
    """Parse FCIDUMP text (str or bytes) into MolecularIntegrals."""
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")
    lines = text.splitlines()

    start = next((i for i, raw in enumerate(lines) if raw.strip()), None)
    if start is None or not lines[start].lstrip().upper().startswith("&FCI"):
        raise FcidumpError("missing &FCI header", line=1 if start is None else start + 1)
    stop = next((i for i in range(start, len(lines)) if _HEADER_END.search(lines[i].strip())), None)
    if stop is None:
        raise FcidumpError("header is not terminated by &END or /", line=start + 1)
    header = _parse_header(" ".join(lines[start:stop + 1]), start + 1)
    n = header["n_spatial"]

    core, one_body, two_body = {}, {}, {}
    for line_no, raw in enumerate(lines[stop + 1:], start=stop + 2):
        tokens = raw.replace(",", " ").split()
        if not tokens:
            continue
        if len(tokens) != 5:
            raise FcidumpError(f"expected 'value i j k l', got {raw.strip()!r}", line=line_no)
        try:
            value = float(re.sub(r"[dD]", "e", tokens[0]))
            i, j, k, l = (int(t) for t in tokens[1:])
        except ValueError:
            raise FcidumpError(f"cannot read entry {raw.strip()!r}", line=line_no) from None
        if not np.isfinite(value):
            raise FcidumpError(f"non-finite integral {tokens[0]}", line=line_no)
        if any(x < 0 or x > n for x in (i, j, k, l)):
            raise FcidumpError(f"index out of range [1, {n}] in {(i, j, k, l)}", line=line_no)

        if i == j == k == l == 0:
            _store(core, (), value, line_no)
        elif k == 0 and l == 0 and i > 0 and j > 0:
            _store(one_body, (max(i, j), min(i, j)), value, line_no)
        elif min(i, j, k, l) > 0:
            _store(two_body, min(_pair_permutations(i, j, k, l)), value, line_no)
        else:
            logger.debug("line %d: ignoring entry %s (orbital energy)", line_no, tokens[1:])

    irreps = np.asarray(header["orbital_irreps"], dtype=int)
    h1 = np.zeros((n, n))
    for (i, j), (value, line_no) in one_body.items():
        if irreps[i - 1] != irreps[j - 1] and abs(value) > SYMMETRY_TOL:
            raise FcidumpError(f"h({i},{j}) couples irreps {irreps[i - 1]} and {irreps[j - 1]}",
                               line=line_no)
        h1[i - 1, j - 1] = h1[j - 1, i - 1] = value
    h2 = np.zeros((n, n, n, n))
    for key, (value, line_no) in two_body.items():
        if irrep_product(*(irreps[x - 1] for x in key)) and abs(value) > SYMMETRY_TOL:
            raise FcidumpError(f"({key[0]}{key[1]}|{key[2]}{key[3]}) is not totally symmetric",
                               line=line_no)
        for p, q, r, s in _pair_permutations(*key):
            h2[p - 1, q - 1, r - 1, s - 1] = value

    e_core = core[()][0] if core else 0.0
    logger.debug(
        "FCIDUMP %s: NORB=%d NELEC=%d MS2=%d, %d one-body and %d two-body entries",
        source or "<text>", n, header["n_electrons"], header["ms2"], len(one_body), len(two_body),
    )
    return MolecularIntegrals(h1=h1, h2=h2, e_core=e_core, source=source, **header)


def load_fcidump(path):
    """Read and parse an FCIDUMP file."""
    path = Path(path)
    return parse_fcidump(path.read_bytes(), source=str(path))


# --- Serialization ---

def serialize_fcidump(m, tol=0.0):
    """Render MolecularIntegrals in FCIDUMP form (unique entries only)."""
    orbsym = ",".join(str(g + 1) for g in m.orbital_irreps)
    out = [
        f"&FCI NORB={m.n_spatial},NELEC={m.n_electrons},MS2={m.ms2},",
        f" ORBSYM={orbsym},",
        f" ISYM={m.isym + 1},",
        "&END",
    ]
    n = m.n_spatial
    for i in range(n):
        for j in range(i + 1):
            for k in range(n):
                for l in range(k + 1):
                    if (i, j) < (k, l):
                        continue
                    value = m.h2[i, j, k, l]
                    if abs(value) > tol:
                        out.append(f"{value: .16e} {i + 1:4d} {j + 1:4d} {k + 1:4d} {l + 1:4d}")
    for i in range(n):
        for j in range(i + 1):
            value = m.h1[i, j]
            if abs(value) > tol:
                out.append(f"{value: .16e} {i + 1:4d} {j + 1:4d}    0    0")
    out.append(f"{m.e_core: .16e}    0    0    0    0")
    return "\n".join(out) + "\n"


def write_fcidump(m, path):
    Path(path).write_text(serialize_fcidump(m))


# --- Frozen core ---

def freeze_core(m, frozen):
    """Fold doubly occupied core orbitals into e_core and a dressed h1."""
    frozen = [int(c) for c in frozen]
    if not frozen:
        return m
    if len(set(frozen)) != len(frozen):
        raise ConfigError(f"frozen orbitals repeat: {frozen}")
    bad = [c for c in frozen if c < 0 or c >= m.n_spatial]
    if bad:
        raise ConfigError(f"frozen orbitals {bad} outside 0..{m.n_spatial - 1}")
    n_active_elec = m.n_electrons - 2 * len(frozen)
    if n_active_elec < 0:
        raise ConfigError(
            f"freezing {len(frozen)} orbitals removes more than NELEC={m.n_electrons} electrons"
        )
    if abs(m.ms2) > n_active_elec:
        raise ConfigError(f"MS2={m.ms2} cannot be realised by {n_active_elec} active electrons")

    core = np.asarray(sorted(frozen), dtype=int)
    active = np.asarray([p for p in range(m.n_spatial) if p not in set(frozen)], dtype=int)
    h2 = m.h2
    e_core = m.reference_energy(core)
    coulomb = h2[:, :, core, core].sum(axis=-1)     # sum_c (pq|cc)
    exchange = h2[:, core, core, :].sum(axis=1)     # sum_c (pc|cq)
    dressed = m.h1 + 2.0 * coulomb - exchange
    logger.info("Froze %d core orbitals; %d active orbitals, %d electrons",
                len(core), len(active), n_active_elec)
    return MolecularIntegrals(
        n_spatial=len(active),
        n_electrons=n_active_elec,
        ms2=m.ms2,
        orbital_irreps=tuple(m.orbital_irreps[p] for p in active),
        h1=dressed[np.ix_(active, active)],
        h2=h2[np.ix_(active, active, active, active)],
        e_core=e_core,
        isym=m.isym,
        source=m.source,
    )
