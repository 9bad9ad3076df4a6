# cli.py
# Command-line frontend: adapt, spectrum, closure, pool-info and symmetry-report subcommands.

import argparse
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from adapt import AdaptConfig, ReferenceSpec, adapt_run, build_reference
from errors import ConfigError, DimensionCapError, FcidumpError, NumericalError, SectorError
from fcidump import freeze_core, load_fcidump
from fci import classify_states, lowest_eigenpairs, sector_ground_energies
from fock import StateVector, build_hamiltonian, enumerate_sector, matrix_rep
from lie import DEFAULT_CAP, AlgebraBasis, dla_closure, parity_conserved, reachable_subspace
from pools import PoolFamily, PoolSpec, build_pool, prune_pool, working_sector
from symmetry import csf_basis, symmetry_report

logger = logging.getLogger(__name__)

# --- Constants ---
VERSION = "0.1.0"
SIGNIFICANT_DIGITS = 12
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

POOL_NAMES = {
    "gsd": PoolFamily.GSD,
    "sagsd": PoolFamily.SAGSD,
    "sagspd": PoolFamily.SAGSPD,
    "sagspd-full": PoolFamily.SAGSPD_FULL,
    "pdint0": PoolFamily.PDINT0,
}

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONFIG = 3
EXIT_NUMERICAL = 4
EXIT_CAP = 5
EXIT_INTERNAL = 6


# --- Output helpers ---

def _rounded(obj):
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        return float(f"{obj:.{SIGNIFICANT_DIGITS}g}")
    if isinstance(obj, (np.floating,)):
        return _rounded(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    return obj


def dumps(obj, indent=2):
    return json.dumps(_rounded(obj), sort_keys=True, indent=indent)


def _check_writable(path, force):
    path = Path(path)
    if path.exists() and not force:
        raise ConfigError(f"{path} already exists (use --force to overwrite)")
    return path


def _emit(obj, out, force):
    if out is None:
        print(dumps(obj))
        return
    _check_writable(out, force).write_text(dumps(obj) + "\n")
    logger.info("Wrote %s", out)


# --- Input helpers ---

def pool_family(name):
    try:
        return POOL_NAMES[name.lower()]
    except KeyError:
        valid = ", ".join(POOL_NAMES)
        raise ConfigError(f"unknown pool {name!r} (valid: {valid})") from None


def parse_ints(text, what):
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise ConfigError(f"{what} must be comma-separated integers, got {text!r}") from None


def parse_sector(text):
    values = parse_ints(text, "--sector")
    if len(values) not in (2, 3):
        raise ConfigError(f"--sector expects N,SZ2[,IRREP], got {text!r}")
    n, sz2 = values[:2]
    return n, sz2, (values[2] if len(values) == 3 else None)


def _load_integrals(args):
    if not args.fcidump:
        raise ConfigError("this subcommand needs --fcidump")
    m = load_fcidump(args.fcidump)
    if args.frozen:
        m = freeze_core(m, parse_ints(args.frozen, "--frozen"))
    return m


def _orbital_pattern(args):
    """(n_spatial, orbital_irreps, integrals or None) from --fcidump or --pattern/--norb."""
    if args.fcidump:
        m = _load_integrals(args)
        return m.n_spatial, m.orbital_irreps, m
    if args.pattern:
        irreps = parse_ints(args.pattern, "--pattern")
        if args.norb is not None and args.norb != len(irreps):
            raise ConfigError(f"--pattern lists {len(irreps)} irreps but --norb is {args.norb}")
        return len(irreps), irreps, None
    if args.norb:
        return args.norb, (0,) * args.norb, None
    raise ConfigError("give --fcidump, or --pattern/--norb for an integral-free orbital set")


def manifest(args, pool=None, sector=None, config=None):
    fixture = getattr(args, "fcidump", None)
    digest = None
    if fixture:
        digest = hashlib.sha256(Path(fixture).read_bytes()).hexdigest()
    return {
        "tool": "adaptsym",
        "version": VERSION,
        "command": args.command,
        "fixture": fixture,
        "fixture_sha256": digest,
        "pool": pool,
        "sector": sector,
        "config": config,
    }


def _default_reference(n_electrons, sz2):
    n_up, n_dn = (n_electrons + sz2) // 2, (n_electrons - sz2) // 2
    doubly = tuple(range(min(n_up, n_dn)))
    extra = tuple(range(len(doubly), max(n_up, n_dn)))
    return ReferenceSpec(doubly, extra if n_up > n_dn else (), extra if n_dn > n_up else ())


def _adapt_config(args):
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON ({exc})") from None
    pool = data.get("pool", {})
    if isinstance(pool, str):
        pool = {"family": pool}
    if args.pool:
        pool["family"] = pool_family(args.pool).value
    elif isinstance(pool.get("family"), str) and pool["family"].lower() in POOL_NAMES:
        pool["family"] = pool_family(pool["family"]).value
    if args.enforce_spatial is not None:
        pool["enforce_spatial"] = args.enforce_spatial
    if "family" not in pool:
        raise ConfigError("no pool given (use --pool or a config file)")
    data["pool"] = pool
    if args.param_budget is not None:
        data["param_budget"] = args.param_budget if args.param_budget == "auto" else _int(args.param_budget, "--param-budget")
    if args.scan_points is not None:
        data["scan_points"] = args.scan_points
    return AdaptConfig.from_dict(data)


def _int(text, what):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{what} must be an integer or 'auto', got {text!r}") from None


# --- Subcommands ---

def cmd_adapt(args):
    m = _load_integrals(args)
    cfg = _adapt_config(args)
    ref = ReferenceSpec.parse(args.ref) if args.ref else _default_reference(m.n_electrons, m.ms2)
    trace_path = _check_writable(args.out, args.force) if args.out else None
    summary_path = None
    if trace_path is not None:
        summary_path = _check_writable(trace_path.with_suffix(".summary.json"), args.force)
    state_path = _check_writable(args.dump_state, args.force) if args.dump_state else None

    trace = adapt_run(m, cfg, ref)

    irreps = cfg.pool.orbital_irreps or m.orbital_irreps
    sector = enumerate_sector(m.n_spatial, m.n_electrons, ref.sz2, ref.irrep(irreps), irreps)
    fci_energy = float(lowest_eigenpairs(build_hamiltonian(m, sector), 1, sector).energies[0])
    info = manifest(args, cfg.pool.family.value, sector.constraints, cfg.to_dict())
    summary = dict(trace.summary(), fci_energy=fci_energy,
                   final_error_vs_fci=trace.final_energy - fci_energy, manifest=info)

    if trace_path is not None:
        lines = [json.dumps(_rounded({"manifest": info}), sort_keys=True)]
        lines += [json.dumps(_rounded(r), sort_keys=True) for r in trace.to_records()]
        trace_path.write_text("\n".join(lines) + "\n")
        summary_path.write_text(dumps(summary) + "\n")
        logger.info("Wrote %s and %s", trace_path, summary_path)
    else:
        print(dumps(summary))
    if state_path is not None:
        trace.state.normalized().save(state_path)
    return EXIT_OK


def cmd_spectrum(args):
    m = _load_integrals(args)
    n, sz2, irrep = parse_sector(args.sector) if args.sector else (m.n_electrons, m.ms2, None)
    if n != m.n_electrons:
        raise SectorError(f"--sector asks for {n} electrons, integrals hold {m.n_electrons}")
    basis = enumerate_sector(m.n_spatial, n, sz2, irrep, m.orbital_irreps)
    H = build_hamiltonian(m, basis)
    spectrum = lowest_eigenpairs(H, min(args.k, basis.dim), basis)
    labels = classify_states(spectrum, m.orbital_irreps)
    out = {
        "manifest": manifest(args, sector=basis.constraints),
        "sector": dict(basis.constraints, dim=basis.dim),
        "energies": [float(e) for e in spectrum.energies],
        "s2": [lab.s2 for lab in labels],
        "spin": [lab.spin for lab in labels],
        "irrep": [lab.irrep for lab in labels],
    }
    if args.spin:
        spins = [float(s) for s in args.spin.split(",")]
        grounds = sector_ground_energies(m, sz2, spins, None if irrep is None else [irrep])
        out["sector_ground"] = [
            {"irrep": g, "spin": s, "energy": e} for (g, s), e in sorted(grounds.items())
        ]
    _emit(out, args.out, args.force)
    return EXIT_OK


def cmd_closure(args):
    n_spatial, irreps, m = _orbital_pattern(args)
    family = pool_family(args.pool or "sagspd")
    spec = PoolSpec(family, args.enforce_spatial is not False, irreps)
    if args.sector:
        n, sz2, irrep = parse_sector(args.sector)
    elif m is not None:
        n, sz2, irrep = m.n_electrons, m.ms2, None
    else:
        raise ConfigError("closure needs --sector N,SZ2[,IRREP] without --fcidump")
    ref = ReferenceSpec.parse(args.ref) if args.ref else _default_reference(n, sz2)
    ref_irrep = ref.irrep(irreps) if irrep is None else irrep
    basis = working_sector(spec, n, sz2, ref_irrep, n_spatial)
    pool = prune_pool(build_pool(spec, n_spatial), basis)
    reference = build_reference(ref, basis)
    spin = args.spin if args.spin is not None else abs(sz2) / 2.0
    csfs = csf_basis(basis, spin) if family is not PoolFamily.GSD else None

    if args.generators_only:
        mats = [matrix_rep(g, basis) for e in pool for g in e.generators]
        algebra = AlgebraBasis.from_generators(mats, basis, csfs)
        algebra_dim = None
    else:
        algebra = dla_closure(pool, basis, csfs=csfs, cap=args.cap)
        algebra_dim = algebra.dim
    reach = reachable_subspace(algebra, reference, csfs)
    out = {
        "manifest": manifest(args, family.value, basis.constraints),
        "algebra_dim": algebra_dim,
        "csf_dim": csfs.dim if csfs is not None else basis.dim,
        "invariant_dim": reach.invariant_dim,
        "complement_dim": reach.complement_dim,
        "parity_conserved": parity_conserved(algebra, irreps),
    }
    _emit(out, args.out, args.force)
    return EXIT_OK


def cmd_pool_info(args):
    n_spatial, irreps, m = _orbital_pattern(args)
    family = pool_family(args.pool or "sagspd")
    spec = PoolSpec(family, args.enforce_spatial is not False, irreps)
    pool = build_pool(spec, n_spatial)
    sector = None
    if args.sector:
        n, sz2, irrep = parse_sector(args.sector)
        basis = working_sector(spec, n, sz2, irrep or 0, n_spatial)
        pool = prune_pool(pool, basis)
        sector = basis.constraints
    counts = {}
    for e in pool:
        counts[e.kind.value] = counts.get(e.kind.value, 0) + 1
    out = {
        "manifest": manifest(args, family.value, sector),
        "size": len(pool),
        "counts": counts,
        "elements": [e.to_dict() for e in pool],
    }
    _emit(out, args.out, args.force)
    return EXIT_OK


def cmd_symmetry_report(args):
    if not args.state:
        raise ConfigError("symmetry-report needs --state")
    state = StateVector.load(args.state)
    irreps = parse_ints(args.pattern, "--pattern") if args.pattern else None
    report = symmetry_report(state, irreps)
    out = dict(report.to_dict(), manifest=manifest(args, sector=state.basis.constraints))
    _emit(out, args.out, args.force)
    return EXIT_OK


# --- Parser ---

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--fcidump", help="FCIDUMP integral file")
    common.add_argument("--frozen", help="comma-separated doubly occupied core orbitals to freeze")
    common.add_argument("--sector", help="N,SZ2[,IRREP]")
    common.add_argument("--out", help="output path (stdout when omitted)")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="warnings only")

    pooled = argparse.ArgumentParser(add_help=False)
    pooled.add_argument("--pool", help=f"one of {', '.join(POOL_NAMES)}")
    pooled.add_argument("--enforce-spatial", action=argparse.BooleanOptionalAction, default=None,
                        help="keep only totally symmetric elements")

    pattern = argparse.ArgumentParser(add_help=False)
    pattern.add_argument("--pattern", help="comma-separated orbital irreps, no integrals needed")
    pattern.add_argument("--norb", type=int, help="number of spatial orbitals")

    parser = argparse.ArgumentParser(
        prog="adaptsym",
        description="Symmetry-adapted ADAPT-VQE pools, spectra and Lie-algebraic analysis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("adapt", parents=[common, pooled], help="run ADAPT-VQE")
    p.add_argument("--ref", help="D,D,...[;U,...][;W,...] occupied orbitals")
    p.add_argument("--param-budget", help="INT or auto")
    p.add_argument("--scan-points", type=int, help="scan points for tuple selection")
    p.add_argument("--dump-state", help="write the final state as JSON")
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("spectrum", parents=[common], help="lowest eigenpairs of a sector")
    p.add_argument("--k", type=int, default=4, help="number of eigenpairs")
    p.add_argument("--spin", help="comma-separated S values for per-(irrep, S) ground energies")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("closure", parents=[common, pooled, pattern], help="Lie closure and reachability")
    p.add_argument("--ref", help="D,D,...[;U,...][;W,...] occupied orbitals")
    p.add_argument("--spin", type=float, help="total S of the CSF space (default |SZ2|/2)")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP, help="algebra dimension cap")
    p.add_argument("--generators-only", action="store_true",
                   help="skip the full closure; reachability from the generators alone")
    p.set_defaults(func=cmd_closure)

    p = sub.add_parser("pool-info", parents=[common, pooled, pattern], help="list a pool")
    p.set_defaults(func=cmd_pool_info)

    p = sub.add_parser("symmetry-report", parents=[common, pattern], help="report on a state dump")
    p.add_argument("--state", help="state dump written by adapt --dump-state")
    p.set_defaults(func=cmd_symmetry_report)
    return parser


def _configure_logging(args):
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args)
    try:
        return args.func(args)
    except (FileNotFoundError, FcidumpError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, SectorError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DimensionCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except Exception as exc:
        logger.exception("Unexpected failure in %s", args.command)
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
