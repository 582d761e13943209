import itertools
import logging
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

# Paths
A = 'a'
B = 'b'
A_OUT = "a'"
B_OUT = "b'"
OUT1 = 'out1'
OUT2 = 'out2'
PATHS = (A, B, A_OUT, B_OUT, OUT1, OUT2)

# Polarizations
H = 'H'
V = 'V'
D = 'D'
AD = 'A'  # anti-diagonal; 'A' alone would shadow the path constant
POLARIZATIONS = (H, V, D, AD)

MAX_PHOTONS = 2
TEMPORAL_MODES = (0, 1)

PRUNE_THRESHOLD = 1e-15
NORM_TOLERANCE = 1e-12
UNITARY_TOLERANCE = 1e-10


class PhotonNumberError(ValueError):
    pass


class ZeroNormError(ValueError):
    """Raised when every term of a state has cancelled, i.e. the post-selected branch is impossible."""


class UnnormalizedStateError(ValueError):
    pass


class DomainMismatchError(ValueError):
    pass


class NonUnitaryError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class ModeLabel:
    """A single-photon mode: which path, which polarization, which orthonormal temporal mode."""

    path: str
    polarization: str
    temporal: int = 0

    def __post_init__(self):
        if self.path not in PATHS:
            raise ValueError(f"Unknown path label: {self.path!r}")
        if self.polarization not in POLARIZATIONS:
            raise ValueError(f"Unknown polarization label: {self.polarization!r}")
        if self.temporal < 0:
            raise ValueError(f"Temporal index must be non-negative, got {self.temporal}")

    def __str__(self):
        return f"{self.path}:{self.polarization}{self.temporal}"


@dataclass(frozen=True)
class OccupationVector:
    """
    Photon numbers per mode, stored as a sorted tuple of (mode, count) pairs with count > 0.
    Swapping two photons does not change the vector, so bosonic symmetry holds by construction.
    """

    counts: Tuple[Tuple[ModeLabel, int], ...] = ()

    @classmethod
    def from_mapping(cls, mapping: Mapping[ModeLabel, int]) -> 'OccupationVector':
        for mode, n in mapping.items():
            if n < 0:
                raise ValueError(f"Negative photon number {n} in {mode}")
        return cls(tuple(sorted((m, n) for m, n in mapping.items() if n > 0)))

    @property
    def total(self):
        return sum(n for _, n in self.counts)

    @property
    def modes(self):
        return tuple(m for m, _ in self.counts)

    def count(self, mode):
        for m, n in self.counts:
            if m == mode:
                return n
        return 0

    def add(self, mode):
        mapping = dict(self.counts)
        mapping[mode] = mapping.get(mode, 0) + 1
        return OccupationVector.from_mapping(mapping)

    def photons(self):
        """Modes repeated by their occupation, e.g. |2_m 1_n> -> (m, m, n)."""
        return tuple(m for m, n in self.counts for _ in range(n))

    def __str__(self):
        if not self.counts:
            return '|vac>'
        return '|' + ' '.join(f"{n}_{m}" for m, n in self.counts) + '>'


VACUUM_OCCUPATION = OccupationVector()


def _pruned(amplitudes):
    return {occ: complex(amp) for occ, amp in amplitudes.items() if abs(amp) >= PRUNE_THRESHOLD}


@dataclass(frozen=True)
class PhotonicState:
    amplitudes: Mapping[OccupationVector, complex] = field(default_factory=dict)
    normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'amplitudes', MappingProxyType(_pruned(self.amplitudes)))
        if self.normalized and abs(_norm_squared(self.amplitudes) - 1.0) > NORM_TOLERANCE:
            raise UnnormalizedStateError(
                f"State flagged normalized has squared norm {_norm_squared(self.amplitudes)}")

    @property
    def photon_numbers(self):
        return {occ.total for occ in self.amplitudes}

    @property
    def modes(self):
        return sorted({m for occ in self.amplitudes for m in occ.modes})

    def amplitude(self, occupation):
        return self.amplitudes.get(occupation, 0j)

    def scaled(self, factor):
        return PhotonicState({occ: factor * amp for occ, amp in self.amplitudes.items()})

    def __str__(self):
        if not self.amplitudes:
            return '0'
        terms = [f"({amp.real:+.4f}{amp.imag:+.4f}j){occ}" for occ, amp in sorted(
            self.amplitudes.items(), key=lambda item: item[0].counts)]
        return ' '.join(terms)


def _norm_squared(amplitudes):
    return float(sum(abs(amp) ** 2 for amp in amplitudes.values()))


def vacuum() -> PhotonicState:
    return PhotonicState({VACUUM_OCCUPATION: 1.0}, normalized=True)


def fock_state(*modes: ModeLabel) -> PhotonicState:
    """The normalized occupation state with one photon per listed mode (repeats allowed)."""
    mapping = {}
    for mode in modes:
        mapping[mode] = mapping.get(mode, 0) + 1
    return PhotonicState({OccupationVector.from_mapping(mapping): 1.0}, normalized=True)


def create(state: PhotonicState, mode: ModeLabel) -> PhotonicState:
    """
    Applies the creation operator of `mode`: |n> -> sqrt(n_mode + 1) |n + 1_mode>.

    Example Usage:
        >>> m = ModeLabel(A_OUT, D)
        >>> create(create(vacuum(), m), m).amplitude(OccupationVector.from_mapping({m: 2}))
        (1.4142135623730951+0j)
    """
    return create_superposition(state, [(mode, 1.0)])


def create_superposition(state: PhotonicState, terms: Iterable[Tuple[ModeLabel, complex]]) -> PhotonicState:
    """Applies sum_j c_j a+_j for the given (mode, c_j) terms. The result is unnormalized."""
    terms = list(terms)
    if any(occ.total + 1 > MAX_PHOTONS for occ in state.amplitudes):
        raise PhotonNumberError(f"Creation would exceed the {MAX_PHOTONS}-photon simulator scope")
    result = {}
    for occ, amp in state.amplitudes.items():
        for mode, coeff in terms:
            new_occ = occ.add(mode)
            result[new_occ] = result.get(new_occ, 0j) + amp * coeff * math.sqrt(occ.count(mode) + 1)
    return PhotonicState(result)


def norm(state: PhotonicState) -> float:
    return math.sqrt(_norm_squared(state.amplitudes))


def normalize(state: PhotonicState) -> PhotonicState:
    n = norm(state)
    if n < PRUNE_THRESHOLD:
        raise ZeroNormError("Cannot normalize a zero-norm state: the selected branch has probability zero")
    return PhotonicState({occ: amp / n for occ, amp in state.amplitudes.items()}, normalized=True)


def inner_product(s1: PhotonicState, s2: PhotonicState) -> complex:
    """<s1|s2>, antilinear in the first argument."""
    return complex(sum(amp.conjugate() * s2.amplitude(occ) for occ, amp in s1.amplitudes.items()))


@dataclass(frozen=True, eq=False)
class ModeTransform:
    """
    A linear map on creation operators: a+_{domain[j]} -> sum_i matrix[i, j] a+_{codomain[i]}.

    Column j of `matrix` is the image of domain[j]. The codomain defaults to the domain; elements that
    route photons onto new paths (beam splitters) list their output labels there. Polarizers are rank-1
    projections and are built with `projection=True`, which skips the unitarity check.
    """

    domain: Tuple[ModeLabel, ...]
    matrix: np.ndarray
    codomain: Optional[Tuple[ModeLabel, ...]] = None
    projection: bool = False
    name: str = 'transform'

    def __post_init__(self):
        domain = tuple(self.domain)
        codomain = tuple(self.codomain) if self.codomain is not None else domain
        matrix = np.array(self.matrix, dtype=complex)
        matrix.setflags(write=False)
        object.__setattr__(self, 'domain', domain)
        object.__setattr__(self, 'codomain', codomain)
        object.__setattr__(self, 'matrix', matrix)
        if len(set(domain)) != len(domain) or len(set(codomain)) != len(codomain):
            raise DomainMismatchError(f"{self.name}: duplicate mode labels")
        if matrix.shape != (len(domain), len(domain)) or len(codomain) != len(domain):
            raise DomainMismatchError(
                f"{self.name}: matrix shape {matrix.shape} does not match a domain of {len(domain)} modes")
        if not self.projection and not self.is_unitary():
            raise NonUnitaryError(f"{self.name}: matrix is not unitary within {UNITARY_TOLERANCE}")

    def is_unitary(self, tolerance=UNITARY_TOLERANCE):
        identity = np.eye(len(self.domain))
        return bool(np.allclose(self.matrix.conj().T @ self.matrix, identity, rtol=0.0, atol=tolerance))

    def image(self, mode):
        """The (mode, coefficient) expansion of a+_mode after the transform."""
        if mode not in self.domain:
            return [(mode, 1.0)]
        j = self.domain.index(mode)
        return [(self.codomain[i], self.matrix[i, j]) for i in range(len(self.codomain))
                if abs(self.matrix[i, j]) >= PRUNE_THRESHOLD]

    def then(self, other: 'ModeTransform') -> 'ModeTransform':
        """Composition: apply self, then other. Both must share the same label set."""
        if set(self.codomain) != set(other.domain):
            raise DomainMismatchError(f"Cannot compose {self.name} with {other.name}: label sets differ")
        reorder = np.array([[1.0 if a == b else 0.0 for a in self.codomain] for b in other.domain])
        return ModeTransform(self.domain, other.matrix @ reorder @ self.matrix, other.codomain,
                             projection=self.projection or other.projection,
                             name=f"{self.name}>{other.name}")


def identity_transform(modes: Sequence[ModeLabel]) -> ModeTransform:
    return ModeTransform(tuple(modes), np.eye(len(modes)), name='identity')


def polarization_basis_change(path: str, temporal_modes: Sequence[int] = TEMPORAL_MODES) -> ModeTransform:
    """Relabels H -> (D + A)/sqrt2 and V -> (D - A)/sqrt2 on every temporal mode of `path`."""
    domain, codomain = [], []
    for t in temporal_modes:
        domain += [ModeLabel(path, H, t), ModeLabel(path, V, t)]
        codomain += [ModeLabel(path, D, t), ModeLabel(path, AD, t)]
    block = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)
    return ModeTransform(tuple(domain), np.kron(np.eye(len(temporal_modes)), block), tuple(codomain),
                         name='HV->DA')


def _check_domain(state, t):
    touched_paths = {m.path for m in t.domain}
    domain = set(t.domain)
    for mode in state.modes:
        if mode.path in touched_paths and mode not in domain:
            raise DomainMismatchError(f"{t.name} acts on path {mode.path} but does not cover mode {mode}")
    passthrough_outputs = (set(t.codomain) - domain) & set(state.modes)
    if passthrough_outputs:
        raise DomainMismatchError(
            f"{t.name} writes into modes already occupied outside its domain: "
            f"{', '.join(str(m) for m in sorted(passthrough_outputs))}")


def apply_transform(state: PhotonicState, t: ModeTransform) -> PhotonicState:
    """
    Substitutes every creation operator of the domain by its image and re-expands over occupations.

    Each occupation |n> is rebuilt as prod_m (a+_m)^{n_m} / sqrt(n_m!) |0>, with the domain operators
    replaced, so norms are preserved for unitary transforms and equal pass probabilities for projections.
    """
    _check_domain(state, t)
    result = {}
    for occ, amp in state.amplitudes.items():
        weight = amp / math.sqrt(math.prod(math.factorial(n) for _, n in occ.counts))
        partial = PhotonicState({VACUUM_OCCUPATION: weight})
        for mode in occ.photons():
            partial = create_superposition(partial, t.image(mode))
        for new_occ, new_amp in partial.amplitudes.items():
            result[new_occ] = result.get(new_occ, 0j) + new_amp
    out = PhotonicState(result)
    if state.normalized and not t.projection:
        return PhotonicState(out.amplitudes, normalized=abs(norm(out) ** 2 - 1.0) <= NORM_TOLERANCE)
    return out


def _require_normalized(state, name):
    if abs(_norm_squared(state.amplitudes) - 1.0) > NORM_TOLERANCE:
        raise UnnormalizedStateError(f"{name} is not normalized (squared norm {_norm_squared(state.amplitudes)})")


def projection_probability(state: PhotonicState, projector) -> float:
    """
    |<projector|state>|^2. `projector` may also be a sequence of orthonormal states spanning a
    projection subspace, in which case the probabilities are summed.
    """
    _require_normalized(state, 'state')
    projectors = [projector] if isinstance(projector, PhotonicState) else list(projector)
    total = 0.0
    for p in projectors:
        _require_normalized(p, 'projector')
        total += abs(inner_product(p, state)) ** 2
    return min(max(total, 0.0), 1.0)


def subspace_probability(state: PhotonicState, predicate: Callable[[OccupationVector], bool]) -> float:
    """Weight of the occupations accepted by `predicate`, relative to the state's squared norm."""
    total = _norm_squared(state.amplitudes)
    if total < PRUNE_THRESHOLD ** 2:
        raise ZeroNormError("Probability of a zero-norm state is undefined")
    selected = sum(abs(amp) ** 2 for occ, amp in state.amplitudes.items() if predicate(occ))
    return float(selected / total)


def restrict(state: PhotonicState, predicate: Callable[[OccupationVector], bool]) -> PhotonicState:
    """The unnormalized component made of the occupations accepted by `predicate`."""
    return PhotonicState({occ: amp for occ, amp in state.amplitudes.items() if predicate(occ)})


def to_first_quantized(state: PhotonicState, modes: Sequence[ModeLabel]) -> np.ndarray:
    """
    Symmetric amplitude tensor psi[i, j] of a two-photon state over an ordered list of single-photon
    modes, normalized so that sum |psi|^2 equals the state's squared norm. |1_m 1_n> maps to
    (|m>|n> + |n>|m>)/sqrt2, |2_m> maps to |m>|m>.
    """
    index = {m: i for i, m in enumerate(modes)}
    psi = np.zeros((len(modes), len(modes)), dtype=complex)
    for occ, amp in state.amplitudes.items():
        if occ.total != 2:
            raise PhotonNumberError(f"First-quantized form needs exactly 2 photons, got {occ}")
        first, second = occ.photons()
        i, j = index[first], index[second]
        if i == j:
            psi[i, i] += amp
        else:
            psi[i, j] += amp / math.sqrt(2)
            psi[j, i] += amp / math.sqrt(2)
    return psi


def permanent(matrix) -> complex:
    """Permanent by the defining sum over permutations (fine for the 2x2 case used here)."""
    m = np.asarray(matrix, dtype=complex)
    n = m.shape[0]
    return complex(sum(np.prod([m[i, p[i]] for i in range(n)]) for p in itertools.permutations(range(n))))


def oracle_occupation_probability(phi1, phi2, occupation: Sequence[int]) -> float:
    """
    Brute-force probability of a two-photon output occupation, from the single-photon wavefunctions.

    phi1, phi2 are the (already propagated) single-photon amplitude vectors over a common orthonormal
    mode basis and `occupation` the two mode indices the photons end up in. The amplitude is the 2x2
    permanent of the overlap matrix divided by sqrt(prod n_k!), and the state norm is
    1 + |<phi1|phi2>|^2.
    """
    phi1, phi2 = np.asarray(phi1, dtype=complex), np.asarray(phi2, dtype=complex)
    i, j = occupation
    overlaps = np.array([[phi1[i], phi1[j]], [phi2[i], phi2[j]]])
    multiplicity = 2 if i == j else 1
    amplitude_sq = abs(permanent(overlaps)) ** 2 / math.factorial(multiplicity)
    return float(amplitude_sq / (1.0 + abs(np.vdot(phi1, phi2)) ** 2))


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    h, v = ModeLabel(A_OUT, H), ModeLabel(A_OUT, V)
    psi = normalize(create(create(vacuum(), h), v))
    print("Overlapped H,V photons:", psi)
    print("In the D/A basis:      ", apply_transform(psi, polarization_basis_change(A_OUT, (0,))))
