"""
Mirror Cooling - command-line application
Generates friction, temperature and cooling-rate tables from YAML run configurations
"""

import argparse
import contextlib
import logging
import math
import sys
from typing import List, Optional

import numpy as np

from core.analytic import (approximate_temperature, cooling_time, friction_profile,
                           friction_std, max_friction_position, minimum_temperature,
                           stationary_temperature, temperature_profile, turning_point_factor)
from core.classical import ClassicalParticle, MirrorChannel, classical_force, force_from_field
from core.config import Config, RunConfig, load_run_config
from core.dynamics import delayed_damping_factor
from core.ensemble import coolrate_scan, run_temperature_series
from core.model import doppler_temperature
from core.modes import delay_response, extract_friction
from core.utils import TableWriter
from core.validation import (ConfigError, InsufficientSamplesError, InvalidParameterError,
                             NoCoolingError, NoStationaryStateError, OutOfValidityError,
                             ToleranceBreachError, TransientNotConvergedError)

logger = logging.getLogger("mirror_cooling")

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_VALIDITY = 3
EXIT_NO_COOLING = 4
EXIT_TOLERANCE = 5

# Exception classes mapped to exit codes, checked in order
ERROR_EXIT_CODES = [
    (ConfigError, EXIT_CONFIG),
    (InvalidParameterError, EXIT_CONFIG),
    (InsufficientSamplesError, EXIT_CONFIG),
    (NoStationaryStateError, EXIT_CONFIG),
    (OutOfValidityError, EXIT_VALIDITY),
    (NoCoolingError, EXIT_NO_COOLING),
    (ToleranceBreachError, EXIT_TOLERANCE),
    (TransientNotConvergedError, EXIT_TOLERANCE),
]


def setup_logging(level: Optional[str] = None) -> None:
    """Log to stderr and, unless LOG_FILE is empty, to the log file"""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if Config.LOG_FILE:
        handlers.append(logging.FileHandler(Config.LOG_FILE))
    logging.basicConfig(
        level=getattr(logging, (level or Config.LOG_LEVEL).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


@contextlib.contextmanager
def open_output(path: Optional[str]):
    if path is None:
        yield sys.stdout
    else:
        with open(path, 'w') as f:
            yield f


def _writer(stream, args: argparse.Namespace, run: RunConfig, columns, meta) -> TableWriter:
    return TableWriter(stream, args.format or run.output_format, columns, meta)


def _beam_meta(run: RunConfig) -> dict:
    species = run.species()
    beam = run.beam(species)
    return {
        'species': species.name,
        'wavelength_m': species.wavelength,
        'gamma_rad_per_s': species.gamma,
        'waist_m': beam.waist,
        'saturation': beam.saturation,
        'area_ratio': beam.area_ratio(species),
        'detuning_rad_per_s': beam.detuning,
        'mirror_distance_m': beam.mirror_distance,
        'delay_s': beam.delay,
    }


def cmd_friction_profile(args: argparse.Namespace, run: RunConfig, stream) -> int:
    """gamma/m and pump intensity around x_center"""
    species = run.species()
    beam = run.beam(species)
    x_center = beam.mirror_distance if args.x_center is None else args.x_center
    span = species.wavelength if args.span is None else args.span
    profile = friction_profile(x_center, span, args.n, species, beam)
    peak = max_friction_position(x_center, species)
    meta = dict(_beam_meta(run), command='friction-profile', x_center_m=x_center,
                node_m=profile.node, span_m=span, n=args.n,
                max_friction_position_m=peak,
                cooling_time_s=cooling_time(peak, species, beam, delay=beam.delay)
                if beam.saturation > 0 else math.nan)
    writer = _writer(stream, args, run, ['x_offset_m', 'gamma_over_m_per_s', 'pump_intensity_arb'], meta)
    writer.rows(zip(profile.positions, profile.gamma_over_m, profile.pump_intensity))
    return EXIT_OK


def cmd_temperature_profile(args: argparse.Namespace, run: RunConfig, stream) -> int:
    """Stationary temperature versus node-relative offset for several mirror distances"""
    species = run.species()
    beam = run.beam(species)
    quarter = species.wavelength / 4.0
    offsets = np.asarray(args.offsets) if args.offsets else np.linspace(-quarter, quarter, args.n)
    profiles = [temperature_profile(x, offsets, species, beam,
                                    trapped_correction=args.trapped_correction) for x in args.x]
    meta = dict(_beam_meta(run), command='temperature-profile', x_m=list(args.x),
                trapped_correction=args.trapped_correction,
                doppler_temperature_K=doppler_temperature(species),
                approximate_temperature_K=approximate_temperature(species, beam))
    writer = _writer(stream, args, run, ['x_m', 'x_prime_m', 'T_K'], meta)
    for profile in profiles:
        temperature = np.where(np.isfinite(profile.temperature), profile.temperature, np.nan)
        writer.rows((profile.mirror_distance, o, t) for o, t in zip(profile.offsets, temperature))
    for x in args.x:
        offset, value = minimum_temperature(x, species, beam)
        writer.block('minimum', {'x_m': x, 'x_prime_m': offset, 'T_K': value})
    return EXIT_OK


def cmd_classical_force(args: argparse.Namespace, run: RunConfig, stream) -> int:
    """Dipole, binding and cooling terms of the retarded force along x"""
    species = run.species()
    channel = MirrorChannel(wavelength=species.wavelength, field_amplitude=args.field_amplitude)
    x_start = 100.0 * species.wavelength if args.x_start is None else args.x_start
    x_stop = x_start + species.wavelength / 2.0 if args.x_stop is None else args.x_stop
    xs = np.linspace(x_start, x_stop, args.n)
    columns = ['x_m', 'dipole_N', 'binding_N', 'cooling_N', 'total_N']
    if args.oracle:
        columns.append('field_force_N')
    meta = {'command': 'classical-force', 'alpha': args.alpha, 'velocity_m_per_s': args.velocity,
            'field_amplitude_V_per_m': args.field_amplitude, 'wavelength_m': species.wavelength}
    rows = []
    for x in xs:
        particle = ClassicalParticle(alpha=args.alpha, velocity=args.velocity, position=float(x))
        terms = classical_force(particle, channel)
        row = [x, terms.dipole, terms.binding, terms.cooling, terms.total]
        if args.oracle:
            row.append(force_from_field(particle, channel, method='numeric'))
        rows.append(row)
    writer = _writer(stream, args, run, columns, meta)
    writer.rows(rows)
    return EXIT_OK


def _ensemble_settings(args: argparse.Namespace, run: RunConfig):
    temperatures = args.t0 if args.t0 else run.initial_temperatures()
    n_traj = args.n_traj if args.n_traj is not None else int(run.get('ensemble', 'n_traj'))
    return temperatures, n_traj


def _trap_center_temperature(dynamics) -> float:
    """Closed-form D/gamma at the trap centre, NaN without a stationary state"""
    try:
        return stationary_temperature(dynamics.center_offset, dynamics.species, dynamics.beam,
                                      delay=dynamics.delay)
    except NoStationaryStateError:
        return math.nan


def _turning_point_factor(dynamics) -> float:
    """Closed-form friction reduction of the position-resolved delayed model, NaN if unbounded"""
    if not dynamics.trap.enabled:
        return math.nan
    try:
        return turning_point_factor(dynamics.center_offset, dynamics.species, dynamics.beam,
                                    dynamics.trap.frequency, delay=dynamics.delay)
    except NoStationaryStateError:
        return math.nan


def cmd_coolrate(args: argparse.Namespace, run: RunConfig, stream) -> int:
    """Initial dT/dt per T0 and the steady-state temperature from the linear fit"""
    temperatures, n_traj = _ensemble_settings(args, run)
    if len(temperatures) < 3:
        raise InvalidParameterError(f"coolrate needs at least 3 initial temperatures, got {len(temperatures)}")
    dynamics = run.dynamics()
    result = coolrate_scan(
        dynamics, temperatures, n_traj, master_seed=run.seed(),
        sample_stride=int(run.get('ensemble', 'sample_stride')), workers=args.workers,
        chunk_size=run.chunk_size(),
        window_fraction=float(run.get('ensemble', 'window_fraction')),
        min_samples=int(run.get('ensemble', 'min_samples')),
        fit_method=run.get('ensemble', 'fit_method'),
        n_bootstrap=int(run.get('ensemble', 'n_bootstrap')),
    )
    meta = dict(_beam_meta(run), command='coolrate', n_traj=n_traj, seed=run.seed(),
                trap_frequency_Hz=dynamics.trap.frequency, dt_s=dynamics.dt,
                duration_s=dynamics.duration, friction_mode=dynamics.friction_mode,
                coefficients=dynamics.coefficients,
                delayed_damping_factor=delayed_damping_factor(dynamics),
                trap_center_temperature_K=_trap_center_temperature(dynamics),
                turning_point_factor=_turning_point_factor(dynamics))
    writer = _writer(stream, args, run, ['T0_K', 'dTdt_K_per_s', 'err'], meta)
    writer.rows((e.initial_temperature, e.rate, e.error) for e in result.estimates)
    fit = result.fit
    writer.block('fit', {
        'slope_per_s': fit.slope, 'intercept_K_per_s': fit.intercept,
        'T_star_K': fit.steady_state, 'slope_err_per_s': fit.slope_error,
        'intercept_err_K_per_s': fit.intercept_error, 'T_star_err_K': fit.steady_state_error,
        'T_star_bootstrap_err_K': fit.steady_state_bootstrap_error,
        'r_squared': fit.r_squared, 'method': fit.method,
        # the regression runs on the ensemble temperature fitted at t = 0
        'T0_fit_K': [e.fitted_temperature for e in result.estimates],
    })
    return EXIT_OK


def cmd_temperature_series(args: argparse.Namespace, run: RunConfig, stream) -> int:
    """Filtered temperature versus time for each initial temperature"""
    temperatures, n_traj = _ensemble_settings(args, run)
    dynamics = run.dynamics()
    series = run_temperature_series(
        dynamics, temperatures, n_traj, master_seed=run.seed(),
        sample_stride=int(run.get('ensemble', 'sample_stride')), workers=args.workers,
        chunk_size=run.chunk_size(), filtered=not args.unfiltered,
    )
    meta = dict(_beam_meta(run), command='temperature-series', n_traj=n_traj, seed=run.seed(),
                trap_frequency_Hz=dynamics.trap.frequency, filtered=not args.unfiltered)
    writer = _writer(stream, args, run, ['T0_K', 't_s', 'T_K', 'T_err_K'], meta)
    for temperature, summary in series:
        writer.rows((temperature, t, value, err) for t, value, err in
                    zip(summary.times, summary.temperature, summary.temperature_error))
    return EXIT_OK


def cmd_validate_modes(args: argparse.Namespace, run: RunConfig, stream) -> int:
    """Cross-check the mode backend against the closed-form friction and the round-trip delay"""
    cfg = run.mode_config()
    species, beam = cfg.species, cfg.beam
    position = run.get('modes', 'position')
    if args.position is not None:
        position = args.position
    position = max_friction_position(beam.mirror_distance, species) if position is None \
        else float(position)
    gamma_tolerance = float(run.get('modes', 'gamma_tolerance'))
    convergence_limit = float(run.get('modes', 'convergence_limit'))
    coupled = beam.saturation > 0 and (beam.coupling is None or beam.coupling > 0)

    checks = []
    gamma_eff = extract_friction(position, None, cfg)
    gamma_analytic = float(friction_std(position, species, beam, delay=cfg.delay))
    if gamma_analytic == 0.0:
        ratio = math.nan
        passed = gamma_eff == 0.0
    else:
        ratio = gamma_eff / gamma_analytic
        passed = abs(ratio - 1.0) <= gamma_tolerance
    checks.append(('friction', gamma_eff, gamma_analytic, ratio, passed))

    if coupled:
        response = delay_response(position, cfg)
        error = abs(response.feature_time - cfg.delay)
        checks.append(('delay', response.feature_time, cfg.delay, response.feature_time / cfg.delay,
                       bool(error <= response.resolution)))

    doubled = cfg.with_changes(n_modes=2 * cfg.n_modes - 1)
    gamma_doubled = extract_friction(position, None, doubled)
    if gamma_eff == 0.0:
        change = 0.0 if gamma_doubled == 0.0 else math.inf
    else:
        change = abs(gamma_doubled - gamma_eff) / abs(gamma_eff)
    checks.append((f"convergence_n{doubled.n_modes}", gamma_doubled, gamma_eff, change,
                   change < convergence_limit))

    meta = dict(_beam_meta(run), command='validate-modes', position_m=position,
                n_modes=cfg.n_modes, bandwidth_rad_per_s=cfg.bandwidth, dt_s=cfg.dt,
                revival_time_s=cfg.revival_time, gamma_tolerance=gamma_tolerance,
                convergence_limit=convergence_limit)
    writer = _writer(stream, args, run, ['check', 'value', 'reference', 'ratio', 'status'], meta)
    writer.rows((name, value, reference, r, 'pass' if ok else 'fail')
                for name, value, reference, r, ok in checks)
    failed = [c for c in checks if not c[4]]
    if failed:
        name, value, reference, r, _ = failed[0]
        raise ToleranceBreachError(name, f"value {value:.6g} against reference {reference:.6g} "
                                         f"(ratio {r:.4g}) is outside tolerance")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='YAML run configuration file')
    common.add_argument('--set', dest='overrides', action='append', default=[],
                        metavar='SECTION.KEY=VALUE',
                        help='override one configuration key (SI units, value parsed as YAML)')
    common.add_argument('--format', choices=['csv', 'ndjson'], default=None,
                        help='output format (default: output.format, csv)')
    common.add_argument('--output', default=None,
                        help='output file path (default: stdout)')
    common.add_argument('--seed', type=int, default=None,
                        help='master random seed (integer, overrides ensemble.master_seed)')
    common.add_argument('--workers', type=int, default=None,
                        help='parallel worker processes (count; default: MIRRORCOOL_WORKERS or 1)')
    common.add_argument('--log-level', default=None, help='logging level name (default: LOG_LEVEL)')

    parser = argparse.ArgumentParser(prog='mirror-cooling',
                                     description='Mirror-mediated cooling toolkit')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('friction-profile', parents=[common],
                       help='friction coefficient and pump intensity versus position')
    p.add_argument('--x-center', type=float, default=None,
                   help='centre of the scan, distance from the mirror in m (default: beam.mirror_distance)')
    p.add_argument('--span', type=float, default=None,
                   help='full width of the scan in m (default: one wavelength)')
    p.add_argument('--n', type=int, default=401, help='number of grid points (count, >= 2)')
    p.set_defaults(handler=cmd_friction_profile)

    p = sub.add_parser('temperature-profile', parents=[common],
                       help='stationary temperature versus trap position')
    p.add_argument('--x', type=float, nargs='+', default=[1.0, 3.0, 10.0],
                   help='mirror distances in m (default: 1 3 10)')
    p.add_argument('--offsets', type=float, nargs='+', default=None,
                   help='trap offsets from the nearest field node in m, within +/- lambda/4')
    p.add_argument('--n', type=int, default=201,
                   help='grid points over +/- lambda/4 when --offsets is not given (count)')
    p.add_argument('--trapped-correction', action='store_true',
                   help="divide by the turning-point factor 0.64 (the trapped particle's friction reduction)")
    p.set_defaults(handler=cmd_temperature_profile)

    p = sub.add_parser('classical-force', parents=[common],
                       help='three-term retarded force on a polarizable particle')
    p.add_argument('--alpha', type=float, default=0.01,
                   help='polarizability normalised to the propagator (dimensionless, real)')
    p.add_argument('--velocity', type=float, default=1.0, help='particle velocity in m/s')
    p.add_argument('--x-start', type=float, default=None,
                   help='first distance from the mirror in m (default: 100 wavelengths)')
    p.add_argument('--x-stop', type=float, default=None,
                   help='last distance from the mirror in m (default: x-start + lambda/2)')
    p.add_argument('--n', type=int, default=101, help='number of positions (count)')
    p.add_argument('--field-amplitude', type=float, default=1.0,
                   help='standing-wave amplitude E0 in V/m')
    p.add_argument('--oracle', action='store_true',
                   help='add 1/2 Re(alpha E grad E*) from finite differences, in N')
    p.set_defaults(handler=cmd_classical_force)

    for name, handler, text in (
            ('coolrate', cmd_coolrate, 'initial cooling rate versus T0 and the steady-state fit'),
            ('temperature-series', cmd_temperature_series, 'filtered temperature versus time')):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument('--t0', type=float, nargs='+', default=None,
                       help='initial temperatures in K (default: ensemble.initial_temperatures)')
        p.add_argument('--n-traj', type=int, default=None,
                       help='trajectories per initial temperature (count, default: ensemble.n_traj)')
        if name == 'temperature-series':
            p.add_argument('--unfiltered', action='store_true',
                           help='keep the oscillations at the trap frequency (Hz scale, no filter)')
        p.set_defaults(handler=handler)

    p = sub.add_parser('validate-modes', parents=[common],
                       help='mode-resolved friction, delay echo and mode-count convergence')
    p.add_argument('--position', type=float, default=None,
                   help='probe position, distance from the mirror in m (default: max friction)')
    p.set_defaults(handler=cmd_validate_modes)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code not in (0, None) else EXIT_OK

    setup_logging(args.log_level)
    try:
        Config.validate()
        if args.workers is None:
            args.workers = Config.default_workers()
        if args.workers < 1:
            raise ConfigError('--workers', 'must be a positive integer')
        run = load_run_config(args.config, args.overrides)
        if args.seed is not None:
            run.sections.setdefault('ensemble', {})['master_seed'] = args.seed
        with open_output(args.output or run.output_path) as stream:
            return args.handler(args, run, stream)
    except Exception as e:
        for error_class, code in ERROR_EXIT_CODES:
            if isinstance(e, error_class):
                print(f"error: {e}", file=sys.stderr)
                return code
        logger.error(f"Unhandled exception: {e}", exc_info=True)
        print(f"error: unexpected failure: {e}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == '__main__':
    sys.exit(main())
