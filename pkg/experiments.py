import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Tuple

import numpy as np
from json_repair import repair_json

from apparatus import Apparatus
from module.Distinguishability import WavepacketModel, delay_from_path, overlap, temporal_decomposition
from module.Fock import A_OUT, H, V, ModeLabel, create, create_superposition, normalize, vacuum
from module.Optics import pass_probability, polarizer_projection

BASELINE = 'baseline'
PROJECTED = 'projected'
HOM_DIP = 'hom_dip'
KINDS = (BASELINE, PROJECTED, HOM_DIP)

# Far-delay level of each kind that corresponds to the pair budget N.
KIND_NORMALIZATION = {BASELINE: 1.0, PROJECTED: 1.0, HOM_DIP: 0.5}

IDEAL_PAIR_COUNTING_EFFICIENCY = 0.5
BASELINE_RELATIVE_RATE = 1.0
PIPELINE_TOLERANCE = 1e-10

SCHEMA_VERSION = 1
CSV_COLUMNS = ('position_um', 'delay_fs', 'probability', 'expected_count', 'simulated_count')
MASK64 = (1 << 64) - 1
MIN_FIT_POINTS = 10


class DegenerateCurveError(ValueError):
    pass


def default_scan_positions(points: int = 81, low: float = -160.0, high: float = 160.0) -> Tuple[float, ...]:
    return tuple(float(x) for x in np.linspace(low, high, points))


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Parameters:
        tau_c: Coherence time in fs.
        scan_positions: Prism path-length differences in micrometers.
        pair_budget: Detected pairs per scan point without the analysis polarizer (N).
        polarizer_transmission: Per-photon transmission of the analysis polarizer (eta).
        mode_match_visibility: Fraction of pairs that are mode matched apart from the delay (V).
        rng_seed: 64-bit seed of the Monte Carlo counts.
        polarizer_angle: Analysis polarizer angle in radians.
        bs_reflectivity: BS1 reflectivity.
    """

    tau_c: float = 210.0
    scan_positions: Tuple[float, ...] = field(default_factory=default_scan_positions)
    pair_budget: float = 20777.0
    polarizer_transmission: float = 0.968
    mode_match_visibility: float = 1.0
    rng_seed: int = 0
    polarizer_angle: float = math.pi / 4
    bs_reflectivity: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, 'scan_positions', tuple(float(x) for x in self.scan_positions))
        if not self.tau_c > 0:
            raise ValueError(f"tau_c must be positive, got {self.tau_c}")
        if not self.scan_positions:
            raise ValueError("scan_positions must not be empty")
        if not self.pair_budget > 0:
            raise ValueError(f"pair_budget must be positive, got {self.pair_budget}")
        if not 0.0 <= self.polarizer_transmission <= 1.0:
            raise ValueError(f"polarizer_transmission must lie in [0, 1], got {self.polarizer_transmission}")
        if not 0.0 <= self.mode_match_visibility <= 1.0:
            raise ValueError(f"mode_match_visibility must lie in [0, 1], got {self.mode_match_visibility}")
        if not 0 <= self.rng_seed <= MASK64:
            raise ValueError(f"rng_seed must be a 64-bit unsigned integer, got {self.rng_seed}")

    @property
    def model(self):
        return WavepacketModel(coherence_time=self.tau_c)

    def projection_bench(self):
        return Apparatus.projection_bench(self.model, self.polarizer_transmission,
                                          analyzer_angle=self.polarizer_angle, reflectivity=self.bs_reflectivity)

    def hom_bench(self):
        return Apparatus.hom_bench(self.model, reflectivity=self.bs_reflectivity)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ScanPoint:
    position_um: float
    delay_fs: float
    probability: float
    expected_count: float
    simulated_count: Optional[int] = None


@dataclass(frozen=True)
class ScanCurve:
    kind: str
    points: Tuple[ScanPoint, ...]
    config: Optional[dict] = None

    @property
    def has_simulation(self):
        return bool(self.points) and all(p.simulated_count is not None for p in self.points)

    def values(self):
        """Simulated counts when every point has one, otherwise the exact probabilities."""
        if self.has_simulation:
            return np.array([p.simulated_count for p in self.points], dtype=float)
        return np.array([p.probability for p in self.points])

    def to_csv(self, path):
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(CSV_COLUMNS)
            for p in self.points:
                writer.writerow([repr(p.position_um), repr(p.delay_fs), repr(p.probability),
                                 repr(p.expected_count), '' if p.simulated_count is None else p.simulated_count])

    @classmethod
    def from_csv(cls, path, kind: str = PROJECTED) -> 'ScanCurve':
        with open(path, newline='') as f:
            reader = csv.DictReader(f)
            if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
                raise ValueError(f"Unexpected CSV columns {reader.fieldnames}; expected {CSV_COLUMNS}")
            points = [ScanPoint(float(row['position_um']), float(row['delay_fs']), float(row['probability']),
                                float(row['expected_count']),
                                int(row['simulated_count']) if row['simulated_count'] else None)
                      for row in reader]
        return cls(kind, tuple(points))

    def to_json(self, path):
        document = {
            "schema": SCHEMA_VERSION,
            "kind": self.kind,
            "config": self.config,
            "columns": list(CSV_COLUMNS),
            "points": [asdict(p) for p in self.points],
        }
        with open(path, 'w') as f:
            f.write(json.dumps(document, indent=2, sort_keys=True))
            f.write('\n')

    @classmethod
    def from_json(cls, path) -> 'ScanCurve':
        with open(path) as f:
            document = json.loads(repair_json(f.read()))
        if document.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"Unsupported scan schema {document.get('schema')!r}")
        return cls(document["kind"], tuple(ScanPoint(**p) for p in document["points"]), document.get("config"))


def pair_counting_probability(delay: float, cfg: ExperimentConfig) -> float:
    """BS2 pair counting on the post-selected BS1 output; ideally 1/2 whatever the delay."""
    bench = cfg.projection_bench()
    state, _ = bench.combine(bench.prepare(delay))
    return bench.count_pairs(state)


def baseline_pair_probability(delay: float, cfg: Optional[ExperimentConfig] = None) -> float:
    """Relative pair rate without the analysis polarizer: 1 at every delay."""
    rate = pair_counting_probability(delay, cfg or ExperimentConfig())
    if abs(rate - IDEAL_PAIR_COUNTING_EFFICIENCY) > PIPELINE_TOLERANCE:
        raise RuntimeError(f"Pair counting rate {rate} at {delay} fs departs from {IDEAL_PAIR_COUNTING_EFFICIENCY}")
    return BASELINE_RELATIVE_RATE


def analytic_projected_probability(delay: float, cfg: ExperimentConfig) -> float:
    v = overlap(delay, cfg.model)
    return (1.0 + v ** 2) / 4.0 * cfg.polarizer_transmission ** 2


def polarization_hom_probability(delay: float, cfg: ExperimentConfig) -> float:
    """
    |D>|D> pass probability of a+_H(t) a+_V(t + tau)|0> in the post-selected beam, times eta^2.

    The operator expansion of this state printed in some sources repeats the -a+_A(t) a+_D(t + tau)
    term; the last term is -a+_A(t) a+_A(t + tau), which is what the expansion below produces.
    """
    c_parallel, c_perp = temporal_decomposition(delay, cfg.model)
    state = create(vacuum(), ModeLabel(A_OUT, H, 0))
    state = normalize(create_superposition(state, [(ModeLabel(A_OUT, V, 0), c_parallel),
                                                   (ModeLabel(A_OUT, V, 1), c_perp)]))
    polarizer, _ = polarizer_projection(cfg.polarizer_angle, cfg.polarizer_transmission, A_OUT)
    return pass_probability(state, polarizer)


def analytic_hom_dip_probability(delay: float, cfg: ExperimentConfig) -> float:
    return 0.5 * (1.0 - cfg.mode_match_visibility * overlap(delay, cfg.model) ** 2)


def hom_dip_probability(delay: float, cfg: ExperimentConfig) -> float:
    """
    Cross-output coincidence probability for identically polarized photons. Imperfect mode matching is
    an ensemble: a fraction V of pairs overlaps as the delay allows, the rest is fully distinguishable.
    """
    bench = cfg.hom_bench()
    visibility = cfg.mode_match_visibility
    matched = bench.hom_coincidence(delay)
    if visibility == 1.0:
        return matched
    return visibility * matched + (1.0 - visibility) * bench.hom_coincidence(math.inf)


def same_output_rate(delay: float, cfg: ExperimentConfig) -> float:
    bench = cfg.hom_bench()
    visibility = cfg.mode_match_visibility
    matched = bench.hom_same_output(delay)
    if visibility == 1.0:
        return matched
    return visibility * matched + (1.0 - visibility) * bench.hom_same_output(math.inf)


PROBABILITY_FUNCTIONS = {
    BASELINE: baseline_pair_probability,
    PROJECTED: polarization_hom_probability,
    HOM_DIP: hom_dip_probability,
}


def point_seed(seed: int, index: int) -> int:
    """Seed splitting rule: seed XOR the 64-bit BLAKE2b hash of the point index."""
    digest = hashlib.blake2b(str(index).encode(), digest_size=8).digest()
    return (seed ^ int.from_bytes(digest, 'big')) & MASK64


def simulate_count(mean: float, seed: int, index: int) -> int:
    rng = np.random.default_rng(point_seed(seed, index))
    return int(rng.poisson(mean))


def run_scan(kind: str, cfg: ExperimentConfig, monte_carlo: bool = False,
             workers: Optional[int] = None) -> ScanCurve:
    """
    Evaluates one curve over cfg.scan_positions. Each point is independent and seeded from its index,
    so the curve is the same for any number of workers.
    """
    if kind not in KINDS:
        raise ValueError(f"Unknown scan kind {kind!r}; expected one of {', '.join(KINDS)}")
    probability_of = PROBABILITY_FUNCTIONS[kind]
    scale = cfg.pair_budget / KIND_NORMALIZATION[kind]

    def evaluate(indexed):
        index, position = indexed
        delay = delay_from_path(position)
        probability = probability_of(delay, cfg)
        expected = probability * scale
        simulated = simulate_count(expected, cfg.rng_seed, index) if monte_carlo else None
        logging.debug(f"{kind} point {index}: {position:+.2f} um, {delay:+.2f} fs, p={probability:.6f}")
        return ScanPoint(position, delay, probability, expected, simulated)

    logging.info(f"Running {kind} scan over {len(cfg.scan_positions)} points (monte_carlo={monte_carlo})")
    indexed = list(enumerate(cfg.scan_positions))
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(evaluate, indexed))
    else:
        points = [evaluate(item) for item in indexed]
    return ScanCurve(kind, tuple(points), cfg.to_dict())


def _outer_mean(curve, values):
    k = max(1, math.ceil(0.1 * len(curve.points)))
    order = np.argsort([-abs(p.position_um) for p in curve.points], kind='stable')
    return float(np.mean(values[order[:k]]))


def fit_visibility(curve: ScanCurve) -> float:
    """
    (P_far - P_min) / P_far, with P_far the mean of the outermost 10% of the scan.

    The estimator returns V exactly only when the outer points have left the overlap region. On the
    default +-160 um scan they still carry about 3e-3 of v^2, so an analytic V = 0.97 dip fits to 0.9699.
    """
    if len(curve.points) < MIN_FIT_POINTS:
        raise DegenerateCurveError(f"Need at least {MIN_FIT_POINTS} points to fit a visibility, "
                                   f"got {len(curve.points)}")
    values = curve.values()
    far = _outer_mean(curve, values)
    if far <= 0:
        raise DegenerateCurveError("Far-delay level is zero")
    return float((far - values.min()) / far)


def peak_contrast(curve: ScanCurve) -> float:
    values = curve.values()
    high, low = values.max(), values.min()
    if high + low <= 0:
        raise DegenerateCurveError("Curve is identically zero")
    return float((high - low) / (high + low))


def fit_polarizer_transmission(separated_count: float, pair_budget: float) -> float:
    """Per-photon eta that makes the separated-photon expectation N/4 * eta^2 equal the observed count."""
    eta = math.sqrt(separated_count / (pair_budget / 4.0))
    if eta > 1.0:
        raise ValueError(f"Separated count {separated_count} exceeds N/4 = {pair_budget / 4.0}")
    return eta


def point_at(curve: ScanCurve, position_um: float) -> ScanPoint:
    return min(curve.points, key=lambda p: abs(p.position_um - position_um))


def summarize(curve: ScanCurve) -> str:
    center, edge = point_at(curve, 0.0), max(curve.points, key=lambda p: abs(p.position_um))
    summary = (f"{curve.kind}: points={len(curve.points)} "
               f"p(0)={center.probability:.6f} p({edge.position_um:+g}um)={edge.probability:.6f} "
               f"expected(0)={center.expected_count:.1f} expected(edge)={edge.expected_count:.1f}")
    if curve.kind == HOM_DIP and len(curve.points) >= MIN_FIT_POINTS:
        summary += f" visibility={fit_visibility(curve):.6f}"
    if curve.kind == PROJECTED:
        summary += f" contrast={peak_contrast(curve):.6f}"
    return summary


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    eta = fit_polarizer_transmission(4867, 20777)
    curve = run_scan(PROJECTED, ExperimentConfig(polarizer_transmission=eta))
    print(f"eta = {eta:.4f}")
    print(summarize(curve))
