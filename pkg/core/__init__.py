"""
Core module initialization
"""

from .config import Config, RunConfig, load_run_config
from .model import (AtomSpecies, BeamConfig, TrapConfig, rubidium_preset, saturation_from_raw,
                    coupling_from_waist, doppler_temperature)
from .classical import ClassicalParticle, MirrorChannel, ForceTerms, retarded_field, classical_force
from .analytic import (FrictionProfile, TemperatureProfile, friction_raw, friction_std, diffusion,
                       stationary_temperature, max_friction_position, friction_profile,
                       temperature_profile, trapped_stationary_temperature, turning_point_factor)
from .dynamics import (AtomState, HistoryBuffer, DynamicsConfig, TrajectoryRecord, step, warmup,
                       simulate_trajectory, simulate_batch)
from .modes import (ModeSet, ModeConfig, evolve_modes, spontaneous_recoil, extract_friction,
                    delay_response)
from .ensemble import (EnsembleConfig, EnsembleSummary, FitResult, RateEstimate, run_ensemble,
                       filter_trap_oscillations, initial_rate, fit_steady_state, coolrate_scan)
from .validation import (MirrorCoolingError, InvalidParameterError, OutOfValidityError,
                         NoStationaryStateError, NoCoolingError, ConfigError, ToleranceBreachError)

__all__ = [
    'Config',
    'RunConfig',
    'load_run_config',
    'AtomSpecies',
    'BeamConfig',
    'TrapConfig',
    'rubidium_preset',
    'saturation_from_raw',
    'coupling_from_waist',
    'doppler_temperature',
    'ClassicalParticle',
    'MirrorChannel',
    'ForceTerms',
    'retarded_field',
    'classical_force',
    'FrictionProfile',
    'TemperatureProfile',
    'friction_raw',
    'friction_std',
    'diffusion',
    'stationary_temperature',
    'max_friction_position',
    'friction_profile',
    'temperature_profile',
    'trapped_stationary_temperature',
    'turning_point_factor',
    'AtomState',
    'HistoryBuffer',
    'DynamicsConfig',
    'TrajectoryRecord',
    'step',
    'warmup',
    'simulate_trajectory',
    'simulate_batch',
    'ModeSet',
    'ModeConfig',
    'evolve_modes',
    'spontaneous_recoil',
    'extract_friction',
    'delay_response',
    'EnsembleConfig',
    'EnsembleSummary',
    'FitResult',
    'RateEstimate',
    'run_ensemble',
    'filter_trap_oscillations',
    'initial_rate',
    'fit_steady_state',
    'coolrate_scan',
    'MirrorCoolingError',
    'InvalidParameterError',
    'OutOfValidityError',
    'NoStationaryStateError',
    'NoCoolingError',
    'ConfigError',
    'ToleranceBreachError',
]
