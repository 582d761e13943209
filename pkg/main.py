import argparse
import configparser
import logging
import math
import os
import sys
from dataclasses import dataclass
from typing import Optional

from dotenv import load_dotenv

from acceptance import CRITERIA, run_criteria
from apparatus import Apparatus
from experiments import (BASELINE, HOM_DIP, KIND_NORMALIZATION, MASK64, PROBABILITY_FUNCTIONS, PROJECTED,
                         ExperimentConfig, ScanCurve, ScanPoint, default_scan_positions, run_scan, summarize)
from module.Distinguishability import DelaySetting
from tomography import (DensityMatrix, TomographySettings, fidelity, mle_reconstruct, simulate_tomography,
                        write_counts_csv, write_density_matrix_json)

load_dotenv()  # Load environment variables from .env file

EXIT_OK = 0
EXIT_INVALID_CONFIG = 1
EXIT_RUNTIME_FAILURE = 2
EXIT_VERIFY_FAILED = 3

SCAN_EXPERIMENTS = {'scan-projected': PROJECTED, 'scan-baseline': BASELINE, 'hom-dip': HOM_DIP}
EXPERIMENTS = tuple(SCAN_EXPERIMENTS) + ('tomo', 'point')
FORMATS = ('csv', 'json')
STATES = ('HH', 'HV', 'VH', 'VV', 'PSI_PLUS', 'MIXED')
SEED_ENV = 'BOSIM_SEED'


class ConfigError(ValueError):
    pass


def _parse_bool(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class RunConfig:
    experiment: str = 'scan-projected'
    tau_c_fs: float = 210.0
    scan_min_um: float = -160.0
    scan_max_um: float = 160.0
    points: int = 81
    pairs: float = 20777.0
    eta: float = 0.968
    visibility: float = 1.0
    seed: int = 0
    monte_carlo: bool = False
    out: Optional[str] = None
    format: Optional[str] = None
    delay_fs: float = 0.0
    state: str = 'HV'
    counts: float = 5000.0
    polarizer_angle_deg: float = 45.0
    bs_reflectivity: float = 0.5
    workers: Optional[int] = None

    def validate(self) -> 'RunConfig':
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}, got {self.experiment!r}")
        checks = [
            (self.tau_c_fs > 0, f"tau_c_fs must be positive, got {self.tau_c_fs}"),
            (self.points >= 1, f"points must be at least 1, got {self.points}"),
            (self.scan_min_um <= self.scan_max_um, "scan_min_um must not exceed scan_max_um"),
            (self.pairs > 0, f"pairs must be positive, got {self.pairs}"),
            (0.0 <= self.eta <= 1.0, f"eta must lie in [0, 1], got {self.eta}"),
            (0.0 <= self.visibility <= 1.0, f"visibility must lie in [0, 1], got {self.visibility}"),
            (0 <= self.seed <= MASK64, f"seed must be a 64-bit unsigned integer, got {self.seed}"),
            (self.counts > 0, f"counts must be positive, got {self.counts}"),
            (0.0 <= self.bs_reflectivity <= 1.0, f"bs_reflectivity must lie in [0, 1], got {self.bs_reflectivity}"),
            (0.0 <= self.polarizer_angle_deg < 180.0,
             f"polarizer_angle_deg must lie in [0, 180), got {self.polarizer_angle_deg}"),
            (self.format is None or self.format in FORMATS, f"format must be csv or json, got {self.format!r}"),
            (self.state in STATES, f"state must be one of {', '.join(STATES)}, got {self.state!r}"),
            (self.workers is None or self.workers >= 1, f"workers must be at least 1, got {self.workers}"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        return self

    @property
    def output_format(self) -> str:
        return self.format or ('json' if self.experiment == 'tomo' else 'csv')

    @property
    def output_path(self) -> str:
        return self.out or f"bosim-{self.experiment}.{self.output_format}"

    def to_experiment_config(self) -> ExperimentConfig:
        return ExperimentConfig(
            tau_c=self.tau_c_fs,
            scan_positions=default_scan_positions(self.points, self.scan_min_um, self.scan_max_um),
            pair_budget=self.pairs,
            polarizer_transmission=self.eta,
            mode_match_visibility=self.visibility,
            rng_seed=self.seed,
            polarizer_angle=math.radians(self.polarizer_angle_deg),
            bs_reflectivity=self.bs_reflectivity,
        )

    def to_tomography_settings(self) -> TomographySettings:
        return TomographySettings(counts_per_setting=self.counts, rng_seed=self.seed)


CONVERTERS = {
    'experiment': str, 'tau_c_fs': float, 'scan_min_um': float, 'scan_max_um': float, 'points': int,
    'pairs': float, 'eta': float, 'visibility': float, 'seed': int, 'monte_carlo': _parse_bool,
    'out': str, 'format': str, 'delay_fs': float, 'state': str, 'counts': float,
    'polarizer_angle_deg': float, 'bs_reflectivity': float, 'workers': int,
}


def load_config_file(path: str) -> dict:
    """Flat `key = value` file (INI syntax without a section header); unknown keys are rejected."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as f:
            parser.read_string('[bosim]\n' + f.read(), source=path)
    except (OSError, configparser.Error) as e:
        raise ConfigError(f"Cannot read config file {path}: {e}") from e
    values = {}
    for key, raw in parser['bosim'].items():
        key = key.replace('-', '_')
        if key not in CONVERTERS:
            raise ConfigError(f"Unknown config key {key!r} in {path}")
        try:
            values[key] = CONVERTERS[key](raw)
        except ValueError as e:
            raise ConfigError(f"Bad value for {key} in {path}: {e}") from e
    return values


def seed_from_environment() -> dict:
    raw = os.getenv(SEED_ENV)
    if raw is None or raw == '':
        return {}
    try:
        return {'seed': int(raw)}
    except ValueError as e:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from e


def resolve_config(experiment: str, args: argparse.Namespace) -> RunConfig:
    """Defaults, then BOSIM_SEED, then the config file, then flags."""
    values = {'experiment': experiment}
    values.update(seed_from_environment())
    if getattr(args, 'config', None):
        values.update(load_config_file(args.config))
        values['experiment'] = experiment
    for name in CONVERTERS:
        flag_value = getattr(args, name, None)
        if flag_value is not None and name != 'experiment':
            values[name] = flag_value
    return RunConfig(**values).validate()


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument('--config', help="flat key = value configuration file")
    common.add_argument('--tau-c-fs', dest='tau_c_fs', type=float, help="coherence time (fs)")
    common.add_argument('--scan-min-um', dest='scan_min_um', type=float)
    common.add_argument('--scan-max-um', dest='scan_max_um', type=float)
    common.add_argument('--points', type=int, help="number of scan points")
    common.add_argument('--pairs', type=float, help="pair budget N per scan point")
    common.add_argument('--eta', type=float, help="per-photon polarizer transmission")
    common.add_argument('--visibility', type=float, help="mode-match visibility of the HOM dip")
    common.add_argument('--seed', type=int, help=f"64-bit seed (default from {SEED_ENV})")
    common.add_argument('--monte-carlo', dest='monte_carlo', action='store_const', const=True,
                        help="draw Poisson counts for every point")
    common.add_argument('--out', help="output file")
    common.add_argument('--format', choices=FORMATS)
    common.add_argument('--workers', type=int, help="threads used to evaluate scan points")
    common.add_argument('--verbose', action='store_true')
    common.add_argument('--debug', action='store_true')

    parser = ArgumentParser(prog='bosim', description="Two-photon polarization interference simulator")
    commands = parser.add_subparsers(dest='command', required=True, parser_class=ArgumentParser)
    for name in SCAN_EXPERIMENTS:
        commands.add_parser(name, parents=[common], help=f"{name} scan over the prism positions")
    point = commands.add_parser('point', parents=[common], help="probability at a single delay")
    point.add_argument('--experiment', choices=tuple(SCAN_EXPERIMENTS), default='scan-projected')
    point.add_argument('--delay-fs', dest='delay_fs', type=float)
    tomo = commands.add_parser('tomo', parents=[common], help="simulated tomography and MLE reconstruction")
    tomo.add_argument('--state', choices=STATES)
    tomo.add_argument('--counts', type=float, help="expected counts per setting")
    verify_flags = ArgumentParser(add_help=False)
    verify_flags.add_argument('--list', action='store_true', help="print the criterion identifiers only")
    verify_flags.add_argument('--tau-c-fs', dest='tau_c_fs', type=float, default=210.0)
    verify_flags.add_argument('--verbose', action='store_true')
    verify_flags.add_argument('--debug', action='store_true')
    commands.add_parser('verify', parents=[verify_flags], help="run the acceptance criteria")
    return parser


def target_density_matrix(config: RunConfig) -> DensityMatrix:
    if config.state == 'HV':
        bench = Apparatus.projection_bench(config.to_experiment_config().model)
        return DensityMatrix(bench.pre_bs1_density_matrix())
    if config.state == 'PSI_PLUS':
        return DensityMatrix.psi_plus()
    if config.state == 'MIXED':
        return DensityMatrix.maximally_mixed()
    return DensityMatrix.from_label(config.state)


def run_point(config: RunConfig, point_experiment: str) -> str:
    kind = SCAN_EXPERIMENTS[point_experiment]
    cfg = config.to_experiment_config()
    probability = PROBABILITY_FUNCTIONS[kind](config.delay_fs, cfg)
    expected = probability * cfg.pair_budget / KIND_NORMALIZATION[kind]
    if config.out:
        point = ScanPoint(DelaySetting.from_delay(config.delay_fs).path_difference, config.delay_fs,
                          probability, expected)
        write_curve(ScanCurve(kind, (point,), cfg.to_dict()), config)
    return f"probability={probability:.10g} delay_fs={config.delay_fs:g} experiment={point_experiment}"


def write_curve(curve: ScanCurve, config: RunConfig):
    if config.output_format == 'json':
        curve.to_json(config.output_path)
    else:
        curve.to_csv(config.output_path)
    logging.info(f"Wrote {len(curve.points)} points to {config.output_path}")


def run_scan_experiment(config: RunConfig) -> str:
    curve = run_scan(SCAN_EXPERIMENTS[config.experiment], config.to_experiment_config(),
                     monte_carlo=config.monte_carlo, workers=config.workers)
    write_curve(curve, config)
    return summarize(curve)


def run_tomography(config: RunConfig) -> str:
    target = target_density_matrix(config)
    settings = config.to_tomography_settings()
    counts = simulate_tomography(target, settings)
    reconstruction = mle_reconstruct(counts, settings)
    rho = reconstruction.rho
    f = fidelity(rho, target)
    if config.output_format == 'csv':
        write_counts_csv(config.output_path, settings, counts)
    else:
        write_density_matrix_json(config.output_path, rho, {
            "target_state": config.state,
            "fidelity": f,
            "purity": rho.purity(),
            "concurrence": rho.concurrence(),
            "log_likelihood": reconstruction.log_likelihood,
            "iterations": reconstruction.iterations,
            "converged": reconstruction.converged,
            "counts_per_setting": settings.counts_per_setting,
            "seed": settings.rng_seed,
            "counts": dict(zip(settings.projector_set, counts)),
        })
    summary = f"tomo state={config.state} fidelity={f:.6f} purity={rho.purity():.6f} concurrence={rho.concurrence():.6f}"
    if not reconstruction.converged:
        summary += " warning=not-converged"
    return summary


def run(config: RunConfig, point_experiment: Optional[str] = None) -> str:
    """Executes one configured experiment, writes its artifact and returns the summary line."""
    if config.experiment == 'point':
        return run_point(config, point_experiment or 'scan-projected')
    if config.experiment == 'tomo':
        return run_tomography(config)
    return run_scan_experiment(config)


def verify(list_only: bool = False, tau_c: float = 210.0) -> int:
    if list_only:
        for criterion in CRITERIA:
            print(f"{criterion.identifier}: {criterion.description}")
        return EXIT_OK
    failed = run_criteria(tau_c)
    if failed:
        print(f"verify failed: {failed[0]}", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    return EXIT_OK


def configure_logging(args: argparse.Namespace):
    level = logging.DEBUG if args.debug else logging.INFO if args.verbose else logging.WARNING
    logging.basicConfig(level=level, format='%(asctime)s - %(levelname)s - %(message)s', force=True)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as e:
        print(f"bosim: {e}", file=sys.stderr)
        return EXIT_INVALID_CONFIG
    configure_logging(args)

    if args.command == 'verify':
        return verify(args.list, args.tau_c_fs)

    try:
        config = resolve_config(args.command, args)
    except ConfigError as e:
        print(f"bosim: invalid configuration: {e}", file=sys.stderr)
        return EXIT_INVALID_CONFIG

    try:
        summary = run(config, getattr(args, 'experiment', None))
    except Exception as e:
        logging.debug("Run failed", exc_info=True)
        print(f"bosim: {config.experiment} failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME_FAILURE
    print(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
