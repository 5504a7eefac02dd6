import math
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Sequence, Tuple

from dotenv import dotenv_values, load_dotenv

from utils.errors import InputError

load_dotenv()


class Config:
    THREADS = int(os.environ.get('TORUSCOVER_THREADS') or os.cpu_count() or 1)
    PROBE_CAP = int(float(os.environ.get('TORUSCOVER_PROBE_CAP') or 1e8))
    SAMPLE_CAP = int(float(os.environ.get('TORUSCOVER_SAMPLE_CAP') or 1e8))
    ROOT_TOLERANCE = float(os.environ.get('TORUSCOVER_ROOT_TOLERANCE') or 1e-12)
    QUAD_TOLERANCE = float(os.environ.get('TORUSCOVER_QUAD_TOLERANCE') or 1e-12)
    UNDETERMINED_CAP = float(os.environ.get('TORUSCOVER_UNDETERMINED_CAP') or 0.05)
    BOOTSTRAP_RESAMPLES = int(os.environ.get('TORUSCOVER_BOOTSTRAP_RESAMPLES') or 200)
    OUTPUT_DIR = os.environ.get('TORUSCOVER_OUTPUT_DIR') or 'runs'
    LOG_LEVEL = os.environ.get('TORUSCOVER_LOG_LEVEL') or 'INFO'
    LOG_FILE = os.environ.get('TORUSCOVER_LOG_FILE')  # optional
    VERSION = '1.0.0'


class DebugConfig(Config):
    LOG_LEVEL = 'DEBUG'


config = {
    'debug': DebugConfig,
    'default': Config
}


def active_config():
    return config.get(os.environ.get('TORUSCOVER_PROFILE') or 'default', Config)


# ---------------------------------------------------------------------------
# Experiment configuration files
# ---------------------------------------------------------------------------

REQUIRED = object()


def _is_blank(value) -> bool:
    return value is None or (isinstance(value, str) and value.strip() == '')


def _float(key: str, value) -> float:
    try:
        result = float(value)
    except (TypeError, ValueError):
        raise InputError(f"'{key}' must be a number, got {value!r}", key=key)
    if math.isnan(result) or math.isinf(result):
        raise InputError(f"'{key}' must be finite, got {value!r}", key=key)
    return result


def _positive_float(key: str, value) -> float:
    result = _float(key, value)
    if result <= 0:
        raise InputError(f"'{key}' must be positive, got {value!r}", key=key)
    return result


def _nonnegative_float(key: str, value) -> float:
    result = _float(key, value)
    if result < 0:
        raise InputError(f"'{key}' must be nonnegative, got {value!r}", key=key)
    return result


def _fraction(key: str, value) -> float:
    result = _float(key, value)
    if not 0.0 <= result <= 1.0:
        raise InputError(f"'{key}' must lie in [0, 1], got {value!r}", key=key)
    return result


def _open_unit(key: str, value) -> float:
    result = _float(key, value)
    if not 0.0 < result < 1.0:
        raise InputError(f"'{key}' must lie in (0, 1), got {value!r}", key=key)
    return result


def _integer(key: str, value) -> int:
    if isinstance(value, bool):
        raise InputError(f"'{key}' must be an integer, got {value!r}", key=key)
    try:
        return int(str(value).strip())
    except (TypeError, ValueError):
        pass
    number = _float(key, value)
    if number != int(number):
        raise InputError(f"'{key}' must be an integer, got {value!r}", key=key)
    return int(number)


def _positive_int(key: str, value) -> int:
    result = _integer(key, value)
    if result < 1:
        raise InputError(f"'{key}' must be a positive integer, got {value!r}", key=key)
    return result


def _seed(key: str, value) -> int:
    result = _integer(key, value)
    if not 0 <= result < 2 ** 64:
        raise InputError(f"'{key}' must be a 64-bit unsigned integer, got {value!r}", key=key)
    return result


def _float_list(key: str, value) -> Tuple[float, ...]:
    if isinstance(value, str):
        items = [item.strip() for item in value.split(',') if item.strip()]
    elif isinstance(value, (list, tuple)):
        items = list(value)
    else:
        items = [value]
    return tuple(_float(key, item) for item in items)


def _boolean(key: str, value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ('1', 'true', 'yes', 'on'):
        return True
    if text in ('0', 'false', 'no', 'off'):
        return False
    raise InputError(f"'{key}' must be true or false, got {value!r}", key=key)


def _choice(*options: str):
    def parse(key: str, value) -> str:
        text = str(value).strip()
        if text not in options:
            raise InputError(f"'{key}' must be one of {', '.join(options)}, got {value!r}", key=key)
        return text
    return parse


# key -> (parser, default)
SCHEMA: Dict[str, Tuple[Any, Any]] = {
    'body': (_choice('ball', 'cube', 'cross_polytope', 'ellipsoid'), REQUIRED),
    'dimension': (_positive_int, REQUIRED),
    'radius': (_positive_float, None),
    'side': (_positive_float, None),
    'l1_radius': (_positive_float, None),
    'semi_axes': (_float_list, None),
    'torus_sides': (_float_list, None),
    'torus_side': (_positive_float, None),
    'intensity': (_nonnegative_float, None),
    'intensities': (_float_list, None),
    'trials': (_positive_int, 100),
    'master_seed': (_seed, 0),
    'net_radius': (_positive_float, None),
    'process': (_choice('poisson', 'fixed_count'), 'poisson'),
    'delta': (_open_unit, 0.3),
    'eps_override': (_positive_float, None),
    'mu_override': (_positive_float, None),
    'target_radius': (_positive_float, None),
    'target_norm': (_choice('l2', 'l1'), None),
    'target_step': (_positive_float, None),
    'isotropic_constant': (_positive_float, None),
    'f_n': (_float, 2.0),
    'omega': (_float, 1.0),
    'mc_samples': (_positive_int, 10 ** 6),
    'reference_point': (_float_list, None),
    'profile_max_multiplicity': (_boolean, True),
    'bootstrap_resamples': (_positive_int, Config.BOOTSTRAP_RESAMPLES),
    'undetermined_cap': (_fraction, Config.UNDETERMINED_CAP),
    'probe_cap': (_positive_int, Config.PROBE_CAP),
    'sample_cap': (_positive_int, Config.SAMPLE_CAP),
    'tolerance': (_positive_float, Config.ROOT_TOLERANCE),
}


@dataclass
class ExperimentConfig:
    """Validated experiment knobs with every default materialized"""
    body: str
    dimension: int
    torus_sides: Tuple[float, ...]
    radius: Optional[float] = None
    side: Optional[float] = None
    l1_radius: Optional[float] = None
    semi_axes: Optional[Tuple[float, ...]] = None
    intensity: Optional[float] = None
    intensities: Optional[Tuple[float, ...]] = None
    trials: int = 100
    master_seed: int = 0
    net_radius: Optional[float] = None
    process: str = 'poisson'
    delta: float = 0.3
    eps_override: Optional[float] = None
    mu_override: Optional[float] = None
    target_radius: Optional[float] = None
    target_norm: Optional[str] = None
    target_step: Optional[float] = None
    isotropic_constant: Optional[float] = None
    f_n: float = 2.0
    omega: float = 1.0
    mc_samples: int = 10 ** 6
    reference_point: Tuple[float, ...] = ()
    profile_max_multiplicity: bool = True
    bootstrap_resamples: int = Config.BOOTSTRAP_RESAMPLES
    undetermined_cap: float = Config.UNDETERMINED_CAP
    probe_cap: int = Config.PROBE_CAP
    sample_cap: int = Config.SAMPLE_CAP
    tolerance: float = Config.ROOT_TOLERANCE
    _cache: Dict[str, Any] = field(default_factory=dict, repr=False, compare=False)

    def build_body(self):
        from models.bodies import body_from_spec

        if 'body' not in self._cache:
            self._cache['body'] = body_from_spec(self.body, self.dimension, radius=self.radius, side=self.side,
                                                 l1_radius=self.l1_radius, semi_axes=self.semi_axes)
        return self._cache['body']

    def build_torus(self):
        from models.torus import Torus

        if 'torus' not in self._cache:
            self._cache['torus'] = Torus.from_sides(self.torus_sides)
        return self._cache['torus']

    def build_net(self):
        from models.coverage import net_norm_for
        from models.torus import build_probe_net

        if 'net' not in self._cache:
            body = self.build_body()
            self._cache['net'] = build_probe_net(self.build_torus(), self.net_radius, net_norm_for(body),
                                                 cap=self.probe_cap)
        return self._cache['net']

    def intensity_grid(self) -> List[float]:
        """Scan grid: `intensities`, else the single `intensity`"""
        if self.intensities:
            return list(self.intensities)
        if self.intensity is not None:
            return [self.intensity]
        raise InputError("no intensity configured; set 'intensity' or 'intensities'", key='intensities')

    def single_intensity(self) -> float:
        if self.intensity is None:
            raise InputError("this experiment needs a single 'intensity'", key='intensity')
        return self.intensity

    def torus_volume_ratio(self) -> float:
        """M = (vol(T)/ν_n)^{1/n}"""
        from models.bodies import log_unit_ball_volume

        torus = self.build_torus()
        return math.exp((math.log(torus.volume) - log_unit_ball_volume(self.dimension)) / self.dimension)

    def to_dict(self) -> Dict[str, Any]:
        record = {}
        for item in fields(self):
            if item.name.startswith('_'):
                continue
            value = getattr(self, item.name)
            record[item.name] = list(value) if isinstance(value, tuple) else value
        return record


def parse_overrides(tokens: Sequence[str]) -> Dict[str, str]:
    """`--key value` pairs into a flat mapping; dashes in keys become underscores"""
    overrides = {}
    tokens = list(tokens)
    index = 0
    while index < len(tokens):
        token = tokens[index]
        if not token.startswith('--') or len(token) <= 2:
            raise InputError(f"unexpected argument '{token}', overrides take the form --key value")
        key = token[2:].replace('-', '_')
        if '=' in key:
            key, value = key.split('=', 1)
            index += 1
        else:
            if index + 1 >= len(tokens):
                raise InputError(f"override '--{key}' is missing its value", key=key)
            value = tokens[index + 1]
            index += 2
        if key not in SCHEMA:
            raise InputError(f"unknown configuration key '{key}'", key=key)
        overrides[key] = value
    return overrides


def _parse_values(raw: Dict[str, Any]) -> Dict[str, Any]:
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise InputError(f"unknown configuration key '{unknown[0]}'", key=unknown[0])
    values = {}
    for key, (parser, default) in SCHEMA.items():
        value = raw.get(key)
        if parser is _float_list and isinstance(value, str) and _is_blank(value):
            # an empty string is an empty list; None (as a manifest stores it) is a missing key
            values[key] = ()
            continue
        if _is_blank(value):
            if default is REQUIRED:
                raise InputError(f"missing required configuration key '{key}'", key=key)
            values[key] = default
            continue
        values[key] = parser(key, value)
    return values


def _default_target(body, torus) -> Tuple[float, str]:
    """Half the target separation, and the separation norm"""
    n = body.n
    if body.kind == 'cube':
        # ℓ1 separation 2 ln n where the torus allows it
        return min(2.0 * math.log(n), float(torus.sides.min()) / 4.0) / 2.0, 'l1'
    return body.circumradius() / 2.0, 'l2'


def validate_config(values: Dict[str, Any]) -> ExperimentConfig:
    """Check the invariants of a parsed record and materialize derived defaults"""
    from models.bodies import difference_body
    from models.coverage import check_injective, net_norm_for
    from models.torus import default_net_radius, is_packing_torus

    n = values['dimension']
    sides = values.pop('torus_sides')
    side = values.pop('torus_side')
    if (sides is None or len(sides) == 0) == (side is None):
        raise InputError("give exactly one of 'torus_sides' and 'torus_side'", key='torus_sides')
    sides = tuple(sides) if side is None else (side,) * n
    if len(sides) != n:
        raise InputError(f"'torus_sides' has {len(sides)} entries, expected {n}", key='torus_sides')
    if any(not c > 0 for c in sides):
        raise InputError("torus sides must be positive", key='torus_sides')

    if values['intensities'] is not None:
        if len(values['intensities']) == 0:
            raise InputError("intensity grid is empty; an empty scan is not allowed", key='intensities')
        if any(rho < 0 for rho in values['intensities']):
            raise InputError("intensities must be nonnegative", key='intensities')
    if values['reference_point'] is None or len(values['reference_point']) == 0:
        values['reference_point'] = (0.0,) * n
    elif len(values['reference_point']) != n:
        raise InputError(f"'reference_point' has {len(values['reference_point'])} entries, expected {n}",
                         key='reference_point')

    experiment = ExperimentConfig(torus_sides=sides, **values)
    body = experiment.build_body()
    torus = experiment.build_torus()
    check_injective(body, torus)
    if not is_packing_torus(torus, difference_body(body)):
        raise InputError("the torus lattice is not a packing lattice of K - K: lattice translates of the "
                         "difference body must be pairwise disjoint", key='torus_sides')

    if experiment.net_radius is None and body.norm_ball() is not None:
        experiment.net_radius = default_net_radius(torus, body, net_norm_for(body), cap=experiment.probe_cap)
    target_radius, target_norm = _default_target(body, torus)
    if experiment.target_radius is None:
        experiment.target_radius = target_radius
    if experiment.target_norm is None:
        experiment.target_norm = target_norm
    if experiment.target_step is None:
        experiment.target_step = experiment.target_radius
    return experiment


def config_from_mapping(raw: Dict[str, Any], overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    merged = {key: value for key, value in raw.items()}
    merged.update(overrides or {})
    return validate_config(_parse_values(merged))


def load_config(path: str, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Read a flat key=value experiment file, apply overrides, validate eagerly"""
    if not path or not os.path.isfile(path):
        raise InputError(f"configuration file '{path}' does not exist", key='config')
    try:
        raw = dotenv_values(path, encoding='utf-8')
    except UnicodeDecodeError as e:
        raise InputError(f"configuration file '{path}' is not UTF-8: {e}", key='config')
    return config_from_mapping(dict(raw), overrides)
