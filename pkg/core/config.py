"""
Configuration management for mirror-cooling runs
"""

import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import yaml
from dotenv import load_dotenv

from .dynamics import DynamicsConfig
from .model import C_LIGHT, SPECIES_PRESETS, AtomSpecies, BeamConfig, TrapConfig
from .modes import ModeConfig
from .validation import ConfigError

load_dotenv()


class Config:
    """Application configuration"""

    # Logging
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
    LOG_FILE = os.getenv('LOG_FILE', 'mirror-cooling.log')

    # Ensemble execution
    WORKERS = int(os.getenv('MIRRORCOOL_WORKERS', '1'))
    CHUNK_SIZE = int(os.getenv('MIRRORCOOL_CHUNK_SIZE', '50'))
    SEED = int(os.getenv('MIRRORCOOL_SEED', '0'))

    @classmethod
    def validate(cls):
        """Validate configuration"""
        if cls.default_workers() < 1:
            raise ConfigError('MIRRORCOOL_WORKERS', 'must be a positive integer')
        if cls.CHUNK_SIZE < 1:
            raise ConfigError('MIRRORCOOL_CHUNK_SIZE', 'must be a positive integer')

    @classmethod
    def default_workers(cls) -> int:
        """Worker count from the environment at call time"""
        value = os.getenv('MIRRORCOOL_WORKERS')
        if value is None:
            return cls.WORKERS
        try:
            return int(value)
        except ValueError:
            raise ConfigError('MIRRORCOOL_WORKERS', f'not an integer: {value!r}')


# Every accepted key with its default; None means "not set"
DEFAULTS: Dict[str, Dict[str, Any]] = {
    'species': {'preset': 'rubidium', 'mass': None, 'wavelength': None, 'gamma': None},
    'beam': {
        'waist': None, 'mode_diameter': None, 'area_ratio': None,
        'saturation': None,
        'detuning': None, 'detuning_over_gamma': None,
        'mirror_distance': None, 'delay': None,
        'coupling': None, 'pump_flux': None,
    },
    'trap': {'frequency': 1.5e6, 'center_offset': None, 'enabled': True},
    'dynamics': {
        'dt': None, 'duration': 1.0e-3, 'friction_mode': 'delayed', 'dipole_force': False,
        'coefficients': 'local', 'friction_override': None, 'diffusion_override': None,
        'noise_substeps': 1,
    },
    'ensemble': {
        'n_traj': 1000, 'master_seed': None, 'sample_stride': 10, 'chunk_size': None,
        'window_fraction': 0.1, 'min_samples': 20, 'fit_method': 'wls', 'n_bootstrap': 1000,
        'initial_temperatures': [0.3e-3, 0.6e-3, 1.0e-3, 2.0e-3, 3.1e-3],
    },
    'modes': {
        'n_modes': 101, 'bandwidth_tau': 40.0, 'duration_tau': 12.0, 'settle_tau': 4.0,
        'step_fraction': 0.1, 'v_probe': 0.02, 'include_decay': True, 'hold_pump': True,
        'convergence_tolerance': 0.1, 'displacement': None, 'position': None,
        'gamma_tolerance': 0.25, 'convergence_limit': 0.05,
    },
    'output': {'format': 'csv', 'path': None},
}

# Profile geometry when nothing else is given
DEFAULT_SATURATION = 0.1
DEFAULT_AREA_RATIO = 0.1
DEFAULT_DETUNING_OVER_GAMMA = -50.0
DEFAULT_MIRROR_DISTANCE = 3.0

OUTPUT_FORMATS = ('csv', 'ndjson')


def _exclusive(section: Dict[str, Any], name: str, *keys: str) -> Optional[str]:
    given = [k for k in keys if section.get(k) is not None]
    if len(given) > 1:
        raise ConfigError(f"{name}.{given[1]}", f"conflicts with {name}.{given[0]}")
    return given[0] if given else None


def _number(section: str, key: str, value: Any) -> float:
    # YAML 1.1 reads forms like 1e-3 or 1.5e6 as strings
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            pass
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key}", f"expected a number, got {value!r}")
    return float(value)


@dataclass
class RunConfig:
    """Parsed run configuration; builders turn sections into domain records"""

    sections: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    def get(self, section: str, key: str) -> Any:
        value = self.sections.get(section, {}).get(key)
        return DEFAULTS[section][key] if value is None else value

    def species(self) -> AtomSpecies:
        explicit = {k: self.sections.get('species', {}).get(k) for k in ('mass', 'wavelength', 'gamma')}
        if any(v is not None for v in explicit.values()):
            missing = [k for k, v in explicit.items() if v is None]
            if missing:
                raise ConfigError(f"species.{missing[0]}", "required when constants are given explicitly")
            return AtomSpecies(**{k: _number('species', k, v) for k, v in explicit.items()})
        preset = self.get('species', 'preset')
        if preset not in SPECIES_PRESETS:
            raise ConfigError('species.preset', f"unknown preset {preset!r}")
        return SPECIES_PRESETS[preset]()

    def beam(self, species: Optional[AtomSpecies] = None) -> BeamConfig:
        species = species or self.species()
        section = self.sections.get('beam', {})

        width_key = _exclusive(section, 'beam', 'waist', 'mode_diameter', 'area_ratio')
        if width_key == 'waist':
            waist = _number('beam', 'waist', section['waist'])
        elif width_key == 'mode_diameter':
            waist = _number('beam', 'mode_diameter', section['mode_diameter']) / 2.0
        else:
            ratio = DEFAULT_AREA_RATIO if width_key is None else _number('beam', 'area_ratio',
                                                                         section['area_ratio'])
            if ratio <= 0:
                raise ConfigError('beam.area_ratio', 'must be positive')
            waist = (species.cross_section / (math.pi * ratio)) ** 0.5

        detuning_key = _exclusive(section, 'beam', 'detuning', 'detuning_over_gamma')
        if detuning_key == 'detuning':
            detuning = _number('beam', 'detuning', section['detuning'])
        else:
            ratio = DEFAULT_DETUNING_OVER_GAMMA if detuning_key is None else _number(
                'beam', 'detuning_over_gamma', section['detuning_over_gamma'])
            detuning = ratio * species.gamma

        position_key = _exclusive(section, 'beam', 'mirror_distance', 'delay')
        if position_key == 'delay':
            mirror_distance = _number('beam', 'delay', section['delay']) * C_LIGHT / 2.0
        elif position_key == 'mirror_distance':
            mirror_distance = _number('beam', 'mirror_distance', section['mirror_distance'])
        else:
            mirror_distance = DEFAULT_MIRROR_DISTANCE

        raw = [section.get('coupling'), section.get('pump_flux')]
        if any(v is not None for v in raw):
            if None in raw:
                raise ConfigError('beam.pump_flux' if raw[1] is None else 'beam.coupling',
                                  'coupling and pump_flux must be given together')
            if section.get('saturation') is not None:
                raise ConfigError('beam.saturation', 'is derived from coupling and pump_flux')
            return BeamConfig.from_raw(_number('beam', 'coupling', raw[0]),
                                       _number('beam', 'pump_flux', raw[1]),
                                       detuning, waist, mirror_distance)
        saturation = section.get('saturation')
        saturation = DEFAULT_SATURATION if saturation is None else _number('beam', 'saturation', saturation)
        return BeamConfig(waist=waist, saturation=saturation, detuning=detuning,
                          mirror_distance=mirror_distance)

    def trap(self) -> TrapConfig:
        offset = self.get('trap', 'center_offset')
        return TrapConfig(frequency=_number('trap', 'frequency', self.get('trap', 'frequency')),
                          center_offset=None if offset is None else _number('trap', 'center_offset', offset),
                          enabled=bool(self.get('trap', 'enabled')))

    def dynamics(self) -> DynamicsConfig:
        species = self.species()
        beam = self.beam(species)
        trap = self.trap()
        mode = self.get('dynamics', 'friction_mode')
        dt = self.get('dynamics', 'dt')
        if dt is None:
            dt = beam.delay / 10.0
            if trap.enabled:
                dt = min(dt, 1.0 / (50.0 * trap.frequency))
        overrides = {k: self.get('dynamics', k) for k in ('friction_override', 'diffusion_override')}
        return DynamicsConfig(
            species=species, beam=beam, trap=trap,
            dt=_number('dynamics', 'dt', dt),
            duration=_number('dynamics', 'duration', self.get('dynamics', 'duration')),
            friction_mode=mode,
            dipole_force=bool(self.get('dynamics', 'dipole_force')),
            coefficients=self.get('dynamics', 'coefficients'),
            friction_override=None if overrides['friction_override'] is None
            else _number('dynamics', 'friction_override', overrides['friction_override']),
            diffusion_override=None if overrides['diffusion_override'] is None
            else _number('dynamics', 'diffusion_override', overrides['diffusion_override']),
            noise_substeps=int(self.get('dynamics', 'noise_substeps')),
        )

    def mode_config(self) -> ModeConfig:
        species = self.species()
        floats = ('bandwidth_tau', 'duration_tau', 'settle_tau', 'step_fraction', 'v_probe',
                  'convergence_tolerance')
        values = {k: _number('modes', k, self.get('modes', k)) for k in floats}
        displacement = self.get('modes', 'displacement')
        return ModeConfig(species=species, beam=self.beam(species),
                          n_modes=self.get('modes', 'n_modes'),
                          include_decay=bool(self.get('modes', 'include_decay')),
                          hold_pump=bool(self.get('modes', 'hold_pump')),
                          displacement=None if displacement is None
                          else _number('modes', 'displacement', displacement),
                          **values)

    def initial_temperatures(self) -> List[float]:
        values = self.get('ensemble', 'initial_temperatures')
        if not isinstance(values, list):
            raise ConfigError('ensemble.initial_temperatures', 'expected a list of temperatures in K')
        return [_number('ensemble', 'initial_temperatures', v) for v in values]

    def seed(self) -> int:
        seed = self.get('ensemble', 'master_seed')
        return Config.SEED if seed is None else int(seed)

    def chunk_size(self) -> int:
        size = self.get('ensemble', 'chunk_size')
        return Config.CHUNK_SIZE if size is None else int(size)

    @property
    def output_format(self) -> str:
        fmt = self.get('output', 'format')
        if fmt not in OUTPUT_FORMATS:
            raise ConfigError('output.format', f"must be one of {OUTPUT_FORMATS}, got {fmt!r}")
        return fmt

    @property
    def output_path(self) -> Optional[str]:
        return self.get('output', 'path')


def _check_keys(data: Dict[str, Any]) -> None:
    for section, values in data.items():
        if section not in DEFAULTS:
            raise ConfigError(section, 'unknown section')
        if values is None:
            continue
        if not isinstance(values, dict):
            raise ConfigError(section, 'expected a mapping of keys')
        for key in values:
            if key not in DEFAULTS[section]:
                raise ConfigError(f"{section}.{key}", 'unknown key')


def parse_override(text: str):
    """'section.key=value' with the value parsed as YAML"""
    if '=' not in text:
        raise ConfigError(text, "override must look like section.key=value")
    path, raw = text.split('=', 1)
    if path.count('.') != 1:
        raise ConfigError(path, "override key must look like section.key")
    section, key = path.split('.')
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise ConfigError(path, f"invalid value: {e}")
    return section, key, value


def load_run_config(path: Optional[str] = None, overrides: Optional[List[str]] = None) -> RunConfig:
    """Read a YAML run configuration and apply --set overrides; unknown keys are errors"""
    data: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, 'r') as f:
                data = yaml.safe_load(f) or {}
        except OSError as e:
            raise ConfigError('config', f"cannot read {path}: {e}")
        except yaml.YAMLError as e:
            raise ConfigError('config', f"invalid YAML in {path}: {e}")
        if not isinstance(data, dict):
            raise ConfigError('config', 'top level must be a mapping of sections')
    _check_keys(data)
    sections = {name: dict(values or {}) for name, values in data.items()}
    for text in overrides or []:
        section, key, value = parse_override(text)
        _check_keys({section: {key: value}})
        sections.setdefault(section, {})[key] = value
    return RunConfig(sections=sections)
