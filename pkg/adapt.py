# adapt.py
# ADAPT-VQE driver: screening, selection, VQE re-optimization and the run trace.

import json
import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy.optimize import minimize
from scipy.sparse.linalg import expm_multiply
from scipy.stats import qmc

from errors import ConfigError, NumericalError, SectorError
from fcidump import irrep_product
from fock import StateVector, build_hamiltonian, matrix_rep
from pools import PoolFamily, PoolSpec, build_pool, prune_pool, working_sector
from symmetry import csf_basis, symmetry_report

logger = logging.getLogger(__name__)

# --- Constants ---
DENSE_EXPM_LIMIT = 64      # dense expm below this dimension
SELECTION_TOL = 1e-8       # best score below this ends the run
STAGNATION_TOL = 1e-9      # energy change counted as no progress
MONOTONE_SLACK = 1e-9
PERTURBATION = 0.1         # radians, restart kicks
THREADS_ENV = "ADAPTSYM_THREADS"
VQE_METHODS = ("BFGS", "L-BFGS-B")


# --- Configuration ---

@dataclass
class AdaptConfig:
    pool: PoolSpec
    vqe_grad_tol: float = 1e-6
    vqe_max_micro: int = 2000
    stagnation_repeats: int = 3
    param_budget: object = "auto"
    scan_points: int = 32
    restarts: int = 1
    max_iters: int = 500
    vqe_method: str = "BFGS"
    threads: object = None

    def __post_init__(self):
        if isinstance(self.pool, dict):
            self.pool = PoolSpec(**self.pool)
        elif isinstance(self.pool, str):
            self.pool = PoolSpec(self.pool)
        if not self.vqe_grad_tol > 0:
            raise ConfigError(f"vqe_grad_tol must be positive, got {self.vqe_grad_tol}")
        for key in ("vqe_max_micro", "stagnation_repeats", "scan_points", "restarts", "max_iters"):
            value = getattr(self, key)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{key} must be a positive integer, got {value!r}")
        if self.param_budget != "auto":
            if not isinstance(self.param_budget, int) or self.param_budget < 0:
                raise ConfigError(f"param_budget must be 'auto' or a non-negative integer, "
                                  f"got {self.param_budget!r}")
        if self.vqe_method not in VQE_METHODS:
            raise ConfigError(f"vqe_method must be one of {', '.join(VQE_METHODS)}")
        if self.threads is not None and (not isinstance(self.threads, int) or self.threads < 1):
            raise ConfigError(f"threads must be a positive integer, got {self.threads!r}")

    @classmethod
    def from_dict(cls, data):
        known = {f for f in cls.__dataclass_fields__}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        if "pool" not in data:
            raise ConfigError("config needs a 'pool' entry")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path):
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self):
        data = asdict(self)
        data["pool"] = {
            "family": self.pool.family.value,
            "enforce_spatial": self.pool.enforce_spatial,
            "orbital_irreps": list(self.pool.orbital_irreps),
        }
        return data

    def resolve_threads(self):
        if self.threads is not None:
            return self.threads
        raw = os.environ.get(THREADS_ENV)
        if raw is None:
            return 1
        try:
            value = int(raw)
        except ValueError:
            value = 0
        if value < 1:
            raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
        return value


# --- References ---

@dataclass
class ReferenceSpec:
    """Occupations of a restricted (closed- or open-shell) determinant."""

    doubly_occupied: tuple = ()
    singly_occupied_up: tuple = ()
    singly_occupied_down: tuple = ()

    def __post_init__(self):
        self.doubly_occupied = tuple(int(P) for P in self.doubly_occupied)
        self.singly_occupied_up = tuple(int(P) for P in self.singly_occupied_up)
        self.singly_occupied_down = tuple(int(P) for P in self.singly_occupied_down)
        lists = self.doubly_occupied + self.singly_occupied_up + self.singly_occupied_down
        if len(set(lists)) != len(lists):
            raise SectorError(f"reference occupation lists overlap: {self}")
        if any(P < 0 for P in lists):
            raise SectorError("negative orbital index in the reference")

    @classmethod
    def parse(cls, text):
        """'D,D,...[;U,...][;W,...]' into doubly / up / down lists."""
        parts = text.split(";")
        if len(parts) > 3:
            raise ConfigError(f"reference {text!r} has more than three ';'-separated lists")
        try:
            lists = [tuple(int(t) for t in part.split(",") if t.strip()) for part in parts]
        except ValueError:
            raise ConfigError(f"reference {text!r} is not a list of orbital indices") from None
        return cls(*lists)

    @property
    def n_electrons(self):
        return 2 * len(self.doubly_occupied) + len(self.singly_occupied_up) + len(self.singly_occupied_down)

    @property
    def sz2(self):
        return len(self.singly_occupied_up) - len(self.singly_occupied_down)

    def word(self):
        w = 0
        for P in self.doubly_occupied:
            w |= 0b11 << (2 * P)
        for P in self.singly_occupied_up:
            w |= 1 << (2 * P)
        for P in self.singly_occupied_down:
            w |= 1 << (2 * P + 1)
        return w

    def irrep(self, orbital_irreps):
        singles = self.singly_occupied_up + self.singly_occupied_down
        return irrep_product(*(orbital_irreps[P] for P in singles))


def build_reference(spec, basis):
    if basis.n_electrons is not None and spec.n_electrons != basis.n_electrons:
        raise SectorError(f"reference holds {spec.n_electrons} electrons, sector {basis.n_electrons}")
    if any(P >= basis.n_spatial for P in spec.doubly_occupied + spec.singly_occupied_up
           + spec.singly_occupied_down):
        raise SectorError(f"reference orbital beyond the {basis.n_spatial} available")
    return StateVector.determinant(spec.word(), basis)


# --- Ansatz ---

@dataclass
class AnsatzStep:
    element: object
    thetas: list

    def __post_init__(self):
        if len(self.thetas) != len(self.element.generators):
            raise ConfigError(f"{self.element.id} takes {len(self.element.generators)} parameters")

    @property
    def element_id(self):
        return self.element.id


def _expm_action(G, theta, amplitudes):
    if theta == 0.0:
        return amplitudes.copy()
    if G.shape[0] < DENSE_EXPM_LIMIT:
        return scipy.linalg.expm(theta * G.toarray()) @ amplitudes
    return expm_multiply(theta * G, amplitudes)


def apply_unitary(g, theta, v, matrix=None):
    """exp(theta G) v for an anti-Hermitian generator g."""
    G = matrix if matrix is not None else matrix_rep(g, v.basis)
    return StateVector(_expm_action(G, float(theta), v.amplitudes), v.basis)


def energy(H, state):
    amps = state.amplitudes if isinstance(state, StateVector) else state
    return float(amps @ (H @ amps))


class GeneratorCache:
    """Sector matrices of pool generators, built on first use."""

    def __init__(self, basis):
        self.basis = basis
        self._mats = {}

    def __call__(self, element):
        if element.id not in self._mats:
            self._mats[element.id] = [matrix_rep(g, self.basis) for g in element.generators]
        return self._mats[element.id]

    def flatten(self, ansatz):
        return [G for step in ansatz for G in self(step.element)]


def _thetas(ansatz):
    return np.array([t for step in ansatz for t in step.thetas], dtype=float)


def _forward(mats, thetas, amplitudes):
    for G, theta in zip(mats, thetas):
        amplitudes = _expm_action(G, theta, amplitudes)
    return amplitudes


def ansatz_state(ansatz, reference, thetas=None, cache=None):
    """Apply the ansatz unitaries in order, first step innermost."""
    cache = cache or GeneratorCache(reference.basis)
    thetas = _thetas(ansatz) if thetas is None else np.asarray(thetas, dtype=float)
    return StateVector(_forward(cache.flatten(ansatz), thetas, reference.amplitudes), reference.basis)


def _energy_and_gradient(H, mats, thetas, amplitudes):
    psi = _forward(mats, thetas, amplitudes)
    sigma = H @ psi
    value = float(psi @ sigma)
    grad = np.zeros(len(mats))
    for k in range(len(mats) - 1, -1, -1):
        grad[k] = 2.0 * sigma @ (mats[k] @ psi)
        psi = _expm_action(mats[k], -thetas[k], psi)
        sigma = _expm_action(mats[k], -thetas[k], sigma)
    return value, grad


def energy_and_gradient(H, ansatz, reference, thetas=None, cache=None):
    """Energy and analytic parameter gradient by a reverse sweep."""
    cache = cache or GeneratorCache(reference.basis)
    thetas = _thetas(ansatz) if thetas is None else np.asarray(thetas, dtype=float)
    return _energy_and_gradient(H, cache.flatten(ansatz), thetas, reference.amplitudes)


# --- Screening ---

def pool_gradient(H, state, e, cache=None):
    """<psi|[H, G]|psi> = 2 <psi|H G|psi> for a single-generator element or a matrix."""
    if hasattr(e, "generators"):
        if len(e.generators) != 1:
            raise ConfigError(f"{e.id} is a tuple; score it with scan_select")
        G = (cache or GeneratorCache(state.basis))(e)[0]
    else:
        G = e
    amps = state.amplitudes
    return float(2.0 * (H @ amps) @ (G @ amps))


def _sobol(dimension, count):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=UserWarning)
        return qmc.Sobol(d=dimension, scramble=False).random(count)


def scan_points(dimension, count):
    """Deterministic low-discrepancy points over [-pi, pi]^dimension."""
    return np.pi * (2.0 * _sobol(dimension, count) - 1.0)


@dataclass
class ScanResult:
    element: object
    thetas: np.ndarray
    score: float


def _scan_one(H, amplitudes, e0, element, points, cache):
    mats = cache(element)
    best, best_theta = e0, np.zeros(len(mats))
    for theta in points:
        value = energy(H, _forward(mats, theta, amplitudes))
        if value < best:
            best, best_theta = value, theta
    return ScanResult(element, best_theta, e0 - best)


def scan_select(H, state, candidates, n_points=32, cache=None, threads=1):
    """Energy-descent selection over a low-discrepancy scan of each candidate."""
    if not candidates:
        raise ConfigError("scan_select needs at least one candidate")
    cache = cache or GeneratorCache(state.basis)
    e0 = energy(H, state)
    ordered = sorted(candidates, key=lambda e: e.id)
    grids = {}
    for element in ordered:
        n = len(element.generators)
        if n not in grids:
            grids[n] = scan_points(n, n_points)
    for element in ordered:
        cache(element)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(
            lambda el: _scan_one(H, state.amplitudes, e0, el, grids[len(el.generators)], cache),
            ordered,
        ))
    return _argmax(results)


def _argmax(results):
    best = results[0]
    for r in results[1:]:
        if r.score > best.score:
            best = r
    return best


def gradient_select(H, state, candidates, cache=None, threads=1):
    """Largest gradient magnitude, ties to the lexicographically first id."""
    cache = cache or GeneratorCache(state.basis)
    ordered = sorted(candidates, key=lambda e: e.id)
    for element in ordered:
        cache(element)
    sigma = H @ state.amplitudes
    amps = state.amplitudes

    def score(el):
        return ScanResult(el, np.zeros(1), abs(float(2.0 * sigma @ (cache(el)[0] @ amps))))

    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(score, ordered))
    return _argmax(results)


# --- VQE ---

def _perturbations(n_params, count):
    if count <= 0 or n_params == 0:
        return np.zeros((0, n_params))
    points = _sobol(n_params, count + 1)[1:]
    return PERTURBATION * (2.0 * points - 1.0)


def vqe_optimize(H, ansatz, reference, cfg, cache=None, x0=None):
    """Quasi-Newton minimization of the ansatz energy over all parameters."""
    if not ansatz:
        raise ConfigError("vqe_optimize needs a nonempty ansatz")
    cache = cache or GeneratorCache(reference.basis)
    mats = cache.flatten(ansatz)
    x0 = _thetas(ansatz) if x0 is None else np.asarray(x0, dtype=float)
    best = {"x": x0.copy(), "f": np.inf}

    def fun(x):
        value, grad = _energy_and_gradient(H, mats, x, reference.amplitudes)
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            raise NumericalError(f"non-finite energy or gradient at theta={x}")
        if value < best["f"]:
            best["x"], best["f"] = x.copy(), value
        return value, grad

    value, grad = fun(x0)
    if np.abs(grad).max() <= cfg.vqe_grad_tol:
        return x0, value

    starts = [x0] + list(_perturbations(len(x0), cfg.restarts - 1))
    for i, start in enumerate(starts):
        origin = start if i == 0 else best["x"] + start
        result = minimize(fun, origin, jac=True, method=cfg.vqe_method,
                          options={"gtol": cfg.vqe_grad_tol, "maxiter": cfg.vqe_max_micro})
        logger.debug("VQE start %d: %d iterations, energy %.12f, %s",
                     i, result.nit, result.fun, result.message)
    return best["x"], best["f"]


# --- Driver ---

class TerminationReason(Enum):
    PARAM_BUDGET = "param_budget"
    STAGNATION = "stagnation"
    GRAD_VANISHED = "grad_vanished"
    MAX_ITERS = "max_iters"


@dataclass
class IterationRecord:
    iteration: int
    selected_id: object
    selection_score: object
    n_params: int
    energy: float
    symmetry: object
    thetas: list = field(default_factory=list)

    def to_dict(self):
        return {
            "iteration": self.iteration,
            "selected_id": self.selected_id,
            "selection_score": self.selection_score,
            "n_params": self.n_params,
            "energy": self.energy,
            "symmetry": self.symmetry.to_dict(),
            "thetas": [float(t) for t in self.thetas],
        }


@dataclass
class AdaptTrace:
    iterations: list
    termination_reason: object = None
    ansatz: list = field(default_factory=list)
    state: object = None
    param_budget: int = 0

    @property
    def energies(self):
        return [r.energy for r in self.iterations]

    @property
    def final_energy(self):
        return self.iterations[-1].energy

    def to_records(self):
        return [r.to_dict() for r in self.iterations]

    def summary(self):
        s2 = [r.symmetry.s2_expect for r in self.iterations]
        return {
            "termination_reason": self.termination_reason.value,
            "final_energy": self.final_energy,
            "n_iterations": len(self.iterations) - 1,
            "n_params": self.iterations[-1].n_params,
            "param_budget": self.param_budget,
            "max_s2": max(s2),
            "final_s2": s2[-1],
            "ansatz": [step.element_id for step in self.ansatz],
        }


def param_budget(cfg, basis, ref):
    """Explicit budget, or the symmetry-adapted problem dimension minus one."""
    if cfg.param_budget != "auto":
        return cfg.param_budget
    if cfg.pool.family is PoolFamily.GSD:
        return max(basis.dim - 1, 0)
    return max(csf_basis(basis, abs(ref.sz2) / 2.0).dim - 1, 0)


def _resolved_spec(spec, m):
    if spec.orbital_irreps:
        if len(spec.orbital_irreps) != m.n_spatial:
            raise ConfigError(f"{len(spec.orbital_irreps)} orbital irreps for {m.n_spatial} orbitals")
        return spec
    return PoolSpec(spec.family, spec.enforce_spatial, m.orbital_irreps)


def adapt_run(m, cfg, ref):
    """Grow and re-optimize the ansatz until a termination criterion fires."""
    spec = _resolved_spec(cfg.pool, m)
    irreps = spec.orbital_irreps
    basis = working_sector(spec, m.n_electrons, ref.sz2, ref.irrep(irreps), m.n_spatial)
    reference = build_reference(ref, basis)
    H = build_hamiltonian(m, basis)
    pool = prune_pool(build_pool(spec, m.n_spatial), basis)
    cache = GeneratorCache(basis)
    threads = cfg.resolve_threads()
    budget = param_budget(cfg, basis, ref)
    use_scan = any(e.is_tuple for e in pool)
    logger.info("ADAPT with %d pool elements on %d determinants, budget %d parameters",
                len(pool), basis.dim, budget)

    state = reference
    e_now = energy(H, state)
    trace = AdaptTrace([IterationRecord(0, None, None, 0, e_now, symmetry_report(state, irreps))],
                       param_budget=budget)
    ansatz = []
    repeats, last_id = 0, None
    reason = TerminationReason.PARAM_BUDGET
    iteration = 0

    while True:
        n_params = sum(len(s.thetas) for s in ansatz)
        if n_params >= budget:
            reason = TerminationReason.PARAM_BUDGET
            break
        if iteration >= cfg.max_iters:
            reason = TerminationReason.MAX_ITERS
            break
        if not pool:
            reason = TerminationReason.GRAD_VANISHED
            break
        if use_scan:
            pick = scan_select(H, state, pool, cfg.scan_points, cache, threads)
        else:
            pick = gradient_select(H, state, pool, cache, threads)
        if pick.score < SELECTION_TOL:
            reason = TerminationReason.GRAD_VANISHED
            break
        iteration += 1
        init = list(pick.thetas) if pick.element.is_tuple else [0.0]
        ansatz.append(AnsatzStep(pick.element, init))
        thetas, e_new = vqe_optimize(H, ansatz, reference, cfg, cache)
        if e_new > e_now + MONOTONE_SLACK:
            raise NumericalError(f"energy rose from {e_now:.12f} to {e_new:.12f}")
        offset = 0
        for step in ansatz:
            step.thetas = [float(t) for t in thetas[offset:offset + len(step.thetas)]]
            offset += len(step.thetas)
        state = ansatz_state(ansatz, reference, thetas, cache)
        report = symmetry_report(state.normalized(), irreps)
        trace.iterations.append(IterationRecord(
            iteration, pick.element.id, float(pick.score), offset, e_new, report, list(thetas)))
        logger.info("Iteration %d: %s (score %.3e) energy %.10f <S^2> %.3e",
                    iteration, pick.element.id, pick.score, e_new, report.s2_expect)

        if pick.element.id == last_id and abs(e_new - e_now) < STAGNATION_TOL:
            repeats += 1
        else:
            repeats = 1
        last_id, e_now = pick.element.id, e_new
        if repeats >= cfg.stagnation_repeats:
            reason = TerminationReason.STAGNATION
            break

    trace.termination_reason = reason
    trace.ansatz = ansatz
    trace.state = state
    logger.info("ADAPT finished (%s) at energy %.10f with %d parameters",
                reason.value, trace.final_energy, trace.iterations[-1].n_params)
    return trace
