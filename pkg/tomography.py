import csv
import json
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from json_repair import repair_json
from scipy.optimize import minimize

from module.Fock import A_OUT, H, V, ModeLabel, PhotonicState, create, normalize, vacuum

BASIS_ORDER = ('HH', 'HV', 'VH', 'VV')
DIMENSION = 4

POLARIZATION_VECTORS = {
    'H': np.array([1, 0], dtype=complex),
    'V': np.array([0, 1], dtype=complex),
    'D': np.array([1, 1], dtype=complex) / math.sqrt(2),
    'A': np.array([1, -1], dtype=complex) / math.sqrt(2),
    'R': np.array([1, 1j], dtype=complex) / math.sqrt(2),
    'L': np.array([1, -1j], dtype=complex) / math.sqrt(2),
}

CANONICAL_SETTINGS = ('HH', 'HV', 'VH', 'VV', 'HD', 'HL', 'VD', 'VL',
                      'DH', 'DV', 'DD', 'DL', 'LH', 'LV', 'LD', 'LL')

VALIDITY_TOLERANCE = 1e-10
EIGENVALUE_CLAMP = 1e-12
LIKELIHOOD_TOLERANCE = 1e-9
MAX_ITERATIONS = 10000
STALL_ITERATIONS = 3
EVALUATIONS_PER_ITERATION = 200
MIN_EXPECTED = 1e-12
SCHEMA_VERSION = 1

# Lower-triangular positions holding complex parameters, after the 4 real diagonal ones.
LOWER_ENTRIES = ((1, 0), (2, 1), (3, 2), (2, 0), (3, 1), (3, 0))


class InvalidDensityMatrixError(ValueError):
    pass


class IncompleteProjectorSetError(ValueError):
    pass


class NoCountsError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """
    Two-photon polarization density matrix over the ordered basis (HH, HV, VH, VV).

    Example Usage:
        >>> rho = DensityMatrix.from_label('HV')
        >>> round(fidelity(rho, DensityMatrix.maximally_mixed()), 6)
        0.25
    """

    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        if entries.shape != (DIMENSION, DIMENSION):
            raise InvalidDensityMatrixError(f"Expected a 4x4 matrix, got shape {entries.shape}")
        if not np.allclose(entries, entries.conj().T, rtol=0.0, atol=VALIDITY_TOLERANCE):
            raise InvalidDensityMatrixError("Density matrix is not Hermitian")
        if abs(np.trace(entries).real - 1.0) > VALIDITY_TOLERANCE:
            raise InvalidDensityMatrixError(f"Density matrix trace is {np.trace(entries).real}, not 1")
        if np.linalg.eigvalsh(entries).min() < -VALIDITY_TOLERANCE:
            raise InvalidDensityMatrixError("Density matrix has a negative eigenvalue")
        entries.setflags(write=False)
        object.__setattr__(self, 'entries', entries)

    @classmethod
    def from_state_vector(cls, vector) -> 'DensityMatrix':
        vector = np.asarray(vector, dtype=complex)
        vector = vector / np.linalg.norm(vector)
        return cls(np.outer(vector, vector.conj()))

    @classmethod
    def from_label(cls, label: str) -> 'DensityMatrix':
        """Pure product state, e.g. 'HV' or 'DL'."""
        return cls.from_state_vector(product_vector(label))

    @classmethod
    def maximally_mixed(cls) -> 'DensityMatrix':
        return cls(np.eye(DIMENSION) / DIMENSION)

    @classmethod
    def psi_plus(cls) -> 'DensityMatrix':
        """(|HV> + |VH>)/sqrt2, the polarization state of the overlapped pair."""
        return cls.from_state_vector(np.array([0, 1, 1, 0]) / math.sqrt(2))

    def purity(self):
        return float(np.trace(self.entries @ self.entries).real)

    def concurrence(self):
        """Wootters concurrence; 0 for product states, 1 for Bell states."""
        sigma_yy = np.kron([[0, -1j], [1j, 0]], [[0, -1j], [1j, 0]])
        flipped = sigma_yy @ self.entries.conj() @ sigma_yy
        eigenvalues = np.linalg.eigvals(self.entries @ flipped)
        roots = np.sort(np.sqrt(np.clip(eigenvalues.real, 0.0, None)))[::-1]
        return float(max(0.0, roots[0] - roots[1] - roots[2] - roots[3]))

    def to_json_dict(self):
        return {
            "schema": SCHEMA_VERSION,
            "basis": list(BASIS_ORDER),
            "density_matrix": [[[float(z.real), float(z.imag)] for z in row] for row in self.entries],
        }

    @classmethod
    def from_json_dict(cls, document) -> 'DensityMatrix':
        if document.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"Unsupported density matrix schema {document.get('schema')!r}")
        if tuple(document.get("basis", BASIS_ORDER)) != BASIS_ORDER:
            raise ValueError(f"Unsupported basis order {document.get('basis')}")
        return cls(np.array([[complex(re, im) for re, im in row] for row in document["density_matrix"]]))


def product_vector(label: str) -> np.ndarray:
    if len(label) != 2 or any(c not in POLARIZATION_VECTORS for c in label):
        raise ValueError(f"Projector label must be two of {''.join(POLARIZATION_VECTORS)}, got {label!r}")
    return np.kron(POLARIZATION_VECTORS[label[0]], POLARIZATION_VECTORS[label[1]])


def projector(label: str) -> np.ndarray:
    vector = product_vector(label)
    return np.outer(vector, vector.conj())


@dataclass(frozen=True)
class TomographySettings:
    projector_set: Tuple[str, ...] = CANONICAL_SETTINGS
    counts_per_setting: float = 5000.0
    rng_seed: int = 0
    projectors: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'projector_set', tuple(self.projector_set))
        if not self.counts_per_setting > 0:
            raise ValueError(f"counts_per_setting must be positive, got {self.counts_per_setting}")
        projectors = np.array([projector(label) for label in self.projector_set])
        object.__setattr__(self, 'projectors', projectors)
        rank = gram_rank(projectors)
        if rank != DIMENSION ** 2:
            raise IncompleteProjectorSetError(
                f"Projector set spans an operator space of dimension {rank}, tomography needs {DIMENSION ** 2}")


def gram_rank(projectors: np.ndarray) -> int:
    """Rank of the Gram matrix G_jk = Tr(P_j P_k) of the measurement operators."""
    flat = projectors.reshape(len(projectors), -1)
    gram = flat.conj() @ flat.T
    return int(np.linalg.matrix_rank(gram, tol=1e-9))


def expected_counts(rho: DensityMatrix, settings: TomographySettings) -> np.ndarray:
    """Noiseless mean counts N Tr(rho P_k)."""
    probabilities = np.einsum('kij,ji->k', settings.projectors, rho.entries).real
    return settings.counts_per_setting * np.clip(probabilities, 0.0, None)


def simulate_tomography(rho: DensityMatrix, settings: TomographySettings) -> List[int]:
    rng = np.random.default_rng(settings.rng_seed)
    return [int(n) for n in rng.poisson(expected_counts(rho, settings))]


def _check_counts(counts, settings):
    counts = np.asarray(counts, dtype=float)
    if counts.shape != (len(settings.projector_set),):
        raise ValueError(f"Expected {len(settings.projector_set)} counts, got shape {counts.shape}")
    if (counts < 0).any():
        raise ValueError("Counts must be non-negative")
    if not counts.sum() > 0:
        raise NoCountsError("All counts are zero; nothing to reconstruct")
    return counts


def linear_inversion(counts, settings: TomographySettings) -> np.ndarray:
    """
    Least-squares solution X of n_k = Tr(X P_k), Hermitized and scaled to unit trace. The result may
    have negative eigenvalues.
    """
    counts = _check_counts(counts, settings)
    design = settings.projectors.conj().reshape(len(counts), -1)
    solution, *_ = np.linalg.lstsq(design, counts.astype(complex), rcond=None)
    estimate = solution.reshape(DIMENSION, DIMENSION)
    estimate = 0.5 * (estimate + estimate.conj().T)
    return estimate / np.trace(estimate).real


def _nearest_physical(matrix, floor=1e-3):
    eigenvalues, vectors = np.linalg.eigh(matrix)
    eigenvalues = np.clip(eigenvalues, floor, None)
    physical = (vectors * eigenvalues) @ vectors.conj().T
    return physical / np.trace(physical).real


def t_matrix(params: Sequence[float]) -> np.ndarray:
    """Lower-triangular T from 16 reals: 4 diagonal entries, then (re, im) of the 6 lower entries."""
    t = np.zeros((DIMENSION, DIMENSION), dtype=complex)
    t[np.diag_indices(DIMENSION)] = params[:DIMENSION]
    for i, (row, col) in enumerate(LOWER_ENTRIES):
        t[row, col] = params[DIMENSION + 2 * i] + 1j * params[DIMENSION + 2 * i + 1]
    return t


def t_params(rho: np.ndarray) -> np.ndarray:
    """Inverse of t_matrix for a positive definite rho = T^dagger T."""
    exchange = np.eye(DIMENSION)[::-1]
    lower = np.linalg.cholesky(exchange @ rho @ exchange)
    t = exchange @ lower.conj().T @ exchange
    params = np.zeros(DIMENSION ** 2)
    params[:DIMENSION] = np.diag(t).real
    for i, (row, col) in enumerate(LOWER_ENTRIES):
        params[DIMENSION + 2 * i] = t[row, col].real
        params[DIMENSION + 2 * i + 1] = t[row, col].imag
    return params


def rho_from_params(params: Sequence[float]) -> np.ndarray:
    """T^dagger T / Tr(T^dagger T): positive semidefinite with unit trace for every real vector."""
    t = t_matrix(params)
    gram = t.conj().T @ t
    return gram / np.trace(gram).real


@dataclass(frozen=True)
class Reconstruction:
    rho: DensityMatrix
    log_likelihood: float
    iterations: int
    converged: bool
    history: Tuple[float, ...] = ()


def mle_reconstruct(counts, settings: TomographySettings) -> Reconstruction:
    """
    Maximum-likelihood density matrix for Poisson counts, with mu_k = Tr(T^dagger T P_k).

    The overall intensity is carried by T, so the counts per setting need not be known. The optimizer
    works on the log-likelihood per detected count and stops once STALL_ITERATIONS consecutive
    iterations each improve it by less than LIKELIHOOD_TOLERANCE. Hitting MAX_ITERATIONS, or any other
    optimizer stop, leaves `converged` False.
    """
    counts = _check_counts(counts, settings)
    total = counts.sum()
    start = _nearest_physical(linear_inversion(counts, settings))
    scale = total / np.einsum('kij,ji->k', settings.projectors, start).real.sum()

    def negative_log_likelihood(params):
        t = t_matrix(params)
        mu = scale * np.einsum('kij,ji->k', settings.projectors, t.conj().T @ t).real
        mu = np.clip(mu, MIN_EXPECTED, None)
        return -float(np.sum(counts * np.log(mu) - mu)) / total

    history = [-negative_log_likelihood(t_params(start))]
    stalled = [0]

    def record(intermediate_result):
        history.append(-float(intermediate_result.fun))
        stalled[0] = stalled[0] + 1 if history[-1] - history[-2] < LIKELIHOOD_TOLERANCE else 0
        if stalled[0] >= STALL_ITERATIONS:
            raise StopIteration

    # every 3-point gradient takes 32 evaluations, and a line search may take several
    result = minimize(negative_log_likelihood, t_params(start), method='L-BFGS-B', jac='3-point',
                      callback=record,
                      options={'maxiter': MAX_ITERATIONS, 'maxfun': MAX_ITERATIONS * EVALUATIONS_PER_ITERATION,
                               'ftol': 0.0, 'gtol': 1e-12})
    converged = stalled[0] >= STALL_ITERATIONS or bool(result.success)
    if not converged:
        logging.warning(f"MLE reconstruction did not converge after {result.nit} iterations: {result.message}")
    rho = rho_from_params(result.x)
    logging.info(f"MLE reconstruction finished after {result.nit} iterations, "
                 f"log-likelihood per count {-result.fun:.9f}")
    return Reconstruction(DensityMatrix(0.5 * (rho + rho.conj().T)), float(-result.fun * total),
                          int(result.nit), converged, tuple(history))


def _psd_sqrt(matrix):
    eigenvalues, vectors = np.linalg.eigh(matrix)
    eigenvalues = np.where(eigenvalues < EIGENVALUE_CLAMP, 0.0, eigenvalues)
    return (vectors * np.sqrt(eigenvalues)) @ vectors.conj().T


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, clipped to [0, 1]."""
    if not isinstance(rho, DensityMatrix) or not isinstance(sigma, DensityMatrix):
        raise InvalidDensityMatrixError("fidelity expects DensityMatrix arguments")
    root = _psd_sqrt(rho.entries)
    inner = root @ sigma.entries @ root
    inner = 0.5 * (inner + inner.conj().T)
    eigenvalues = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    return float(min(1.0, max(0.0, np.sum(np.sqrt(eigenvalues)) ** 2)))


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(rho.entries - sigma.entries))))


def entangled_target_state() -> PhotonicState:
    """a+_H a+_V|0> in one beam and temporal mode: (|H>|V> + |V>|H>)/sqrt2 once symmetrized."""
    return normalize(create(create(vacuum(), ModeLabel(A_OUT, H, 0)), ModeLabel(A_OUT, V, 0)))


def write_counts_csv(path, settings: TomographySettings, counts: Sequence[float]):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(('setting', 'count'))
        for label, n in zip(settings.projector_set, counts):
            writer.writerow((label, n))


def read_counts_csv(path) -> Tuple[Tuple[str, ...], List[float]]:
    with open(path, newline='') as f:
        rows = list(csv.DictReader(f))
    return tuple(row['setting'] for row in rows), [float(row['count']) for row in rows]


def write_density_matrix_json(path, rho: DensityMatrix, extra: Optional[dict] = None):
    document = rho.to_json_dict()
    document.update(extra or {})
    with open(path, 'w') as f:
        f.write(json.dumps(document, indent=2, sort_keys=True))
        f.write('\n')


def read_density_matrix_json(path) -> DensityMatrix:
    with open(path) as f:
        return DensityMatrix.from_json_dict(json.loads(repair_json(f.read())))


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    target = DensityMatrix.from_label('HV')
    settings = TomographySettings(counts_per_setting=5000, rng_seed=7)
    reconstruction = mle_reconstruct(simulate_tomography(target, settings), settings)
    np.set_printoptions(precision=4, suppress=True)
    print("Reconstructed density matrix (real part):")
    print(reconstruction.rho.entries.real)
    print(f"Fidelity with |HV>: {fidelity(reconstruction.rho, target):.4f}")
    print(f"Concurrence: {reconstruction.rho.concurrence():.4f}")
