import copy
import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from data.intervals import parse_intervals
from data.point_sample import StepFunction
from models.limit_model import build_limit_model
from models.offspring import OffspringDistribution
from models.steps import StepDistribution
from utils.errors import BRWLabError, ConfigError

CONFIG_SCHEMA_VERSION = 1

# Fields that do not change any result and are left out of the config hash.
UNHASHED_FIELDS = ('out_dir', 'threads', 'verbose')

CRITERIA = ('geometric_maxima', 'w_laplace', 'regular_maxima', 'duality', 'representation',
            'superposability', 'laplace_functional', 'one_jump', 'structural', 'minima')
LIMIT_SOURCES = ('cox', 'sscdppp')


def _default_sets():
    return [[1., 'inf'], [2., 'inf'], [4., 'inf'], ['-inf', -1.]]


def _default_g_functions():
    return [
        [[1., 2., 0.5], [2., 'inf', 1.]],
        [[0.5, 'inf', 0.3], ['-inf', -1., 0.7]],
    ]


@dataclass
class ExperimentConfig:
    """
    Full description of a reproducible run. Nested sections are plain dicts so the config is a single
    JSON document; missing keys fall back to the defaults below.
    """
    offspring: dict = field(default_factory=lambda: {'kind': 'geometric', 'b': 0.5})
    step: dict = field(default_factory=lambda: {'alpha': 1., 'p': 1., 'q': 0., 'x_m': 1., 'beta': 0.})
    n: list = field(default_factory=lambda: [14])
    replicates: int = 1000
    window: float = 0.05
    k: int = 3
    sets: list = field(default_factory=_default_sets)
    grid: list = field(default_factory=lambda: [0.5, 1., 2., 4., 8.])
    g_functions: list = field(default_factory=_default_g_functions)
    track_one_jump: bool = False
    model: dict = field(default_factory=lambda: {'y_max': 1024, 'tol': 1e-10, 'phi_depth': 60})
    caps: dict = field(default_factory=lambda: {'population': 10 ** 7, 'restarts': 10 ** 4})
    limit: dict = field(default_factory=lambda: {'samples': 1000, 'window': 0.05, 'w_mode': 'auto', 'w_depth': 16,
                                                 'sources': ['cox', 'sscdppp']})
    formulas: dict = field(default_factory=lambda: {'ks': [1, 2], 'xs': [0.5, 1., 2., 4., 8.],
                                                    'joint_pairs': [[1., 2.]], 'gap_ts': [1.], 'void': 'all',
                                                    'w_samples': 10 ** 4})
    verify: dict = field(default_factory=lambda: {'scale': 1., 'r_scale': 1., 'criteria': list(CRITERIA)})
    seed: int = 0
    threads: int = 1
    out_dir: str = './runs'
    verbose: bool = False

    @classmethod
    def from_dict(cls, data):
        data = copy.deepcopy(dict(data))
        data.pop('schema_version', None)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f'Unknown configuration fields: {unknown}')

        cfg = cls()
        for key, value in data.items():
            default = getattr(cfg, key)
            if isinstance(default, dict) and key not in ('offspring', 'step'):
                if not isinstance(value, dict):
                    raise ConfigError(f'Field `{key}` must be an object.')
                unknown = sorted(set(value) - set(default))
                if unknown:
                    raise ConfigError(f'Unknown keys in `{key}`: {unknown}')
                value = {**default, **value}
            setattr(cfg, key, value)
        if isinstance(cfg.n, int):
            cfg.n = [cfg.n]
        return cfg

    @classmethod
    def load(cls, path):
        try:
            with open(path, mode='r') as jf:
                data = json.load(jf)
        except OSError as e:
            raise ConfigError(f'Cannot read {path}: {e}') from e
        except json.JSONDecodeError as e:
            raise ConfigError(f'{path} is not valid JSON: {e}') from e
        if not isinstance(data, dict):
            raise ConfigError(f'{path} must contain a JSON object.')
        return cls.from_dict(data)

    def to_dict(self):
        data = {f.name: copy.deepcopy(getattr(self, f.name)) for f in fields(self)}
        data['schema_version'] = CONFIG_SCHEMA_VERSION
        return data

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path):
        path = Path(path)
        path.write_text(self.to_json())
        return path

    def config_hash(self):
        data = self.to_dict()
        for key in UNHASHED_FIELDS:
            data.pop(key)
        canonical = json.dumps(data, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    def apply_overrides(self, **overrides):
        """ Applies command-line values that were actually given. """
        for key, value in overrides.items():
            if value is None:
                continue
            if not hasattr(self, key):
                raise ConfigError(f'Unknown configuration field `{key}`.')
            setattr(self, key, [value] if key == 'n' and isinstance(value, int) else value)
        return self

    def offspring_distribution(self):
        return OffspringDistribution.from_config(self.offspring)

    def step_distribution(self):
        return StepDistribution.from_config(self.step)

    def limit_model(self, r_scale=1.):
        return build_limit_model(self.offspring_distribution(), self.step_distribution(),
                                 y_max=int(self.model['y_max']), tol=float(self.model['tol']),
                                 phi_depth=int(self.model['phi_depth']), r_scale=r_scale)

    def intervals(self):
        return parse_intervals(self.sets)

    def step_functions(self):
        return [StepFunction.from_config(pieces) for pieces in self.g_functions]

    def validate(self):
        """
        Builds every model object and checks every precondition before any work starts.

        Raises:
            ConfigError: describing the first problem found.
        """
        try:
            return self._validate()
        except ConfigError:
            raise
        except (BRWLabError, KeyError, TypeError, ValueError) as e:
            raise ConfigError(f'Invalid configuration: {e}') from e

    def _validate(self):
        try:
            offspring = self.offspring_distribution()
            step = self.step_distribution()
            intervals = self.intervals()
            self.step_functions()
        except (BRWLabError, KeyError, TypeError, ValueError) as e:
            raise ConfigError(f'Invalid model configuration: {e}') from e

        if not self.n or any(int(n) != n or n < 1 for n in self.n):
            raise ConfigError(f'Every n must be a positive integer, got {self.n}')
        if int(self.replicates) != self.replicates or self.replicates < 0:
            raise ConfigError(f'replicates must be a non-negative integer, got {self.replicates}')
        if self.window < 0:
            raise ConfigError(f'window must be non-negative, got {self.window}')
        if not 1 <= self.k <= 20:
            raise ConfigError(f'k must lie in [1, 20], got {self.k}')
        for interval in intervals:
            if interval.distance_from_zero < self.window or interval.distance_from_zero <= 0:
                raise ConfigError(f'Set {interval} reaches into the window |x| <= {self.window}.')
        if self.threads < 1:
            raise ConfigError(f'threads must be at least 1, got {self.threads}')
        if not self.limit['window'] > 0:
            raise ConfigError('The limit samplers need a positive window.')
        if self.limit['w_mode'] not in ('auto', 'constant', 'exponential', 'simulated'):
            raise ConfigError(f"Unknown W mode `{self.limit['w_mode']}`.")
        sources = self.limit['sources']
        if not sources or set(sources) - set(LIMIT_SOURCES):
            raise ConfigError(f'limit.sources must be a non-empty subset of {list(LIMIT_SOURCES)}, got {sources}')
        if offspring.kind != 'regular' and self.limit['w_mode'] == 'constant':
            raise ConfigError('W is constant only for regular trees.')
        if offspring.kind != 'geometric' and self.limit['w_mode'] == 'exponential':
            raise ConfigError('W is exponential only for geometric offspring.')
        if any(not 1 <= k <= 20 for k in self.formulas['ks']):
            raise ConfigError('Formula orders must lie in [1, 20].')
        if self.formulas['void'] not in ('all', 'listed'):
            raise ConfigError(f"Unknown void mode `{self.formulas['void']}`.")
        if not self.verify['scale'] > 0 or not self.verify['r_scale'] > 0:
            raise ConfigError('verify.scale and verify.r_scale must be positive.')
        unknown = sorted(set(self.verify['criteria']) - set(CRITERIA))
        if unknown:
            raise ConfigError(f'Unknown acceptance criteria: {unknown}')
        if step.p == 0 and step.q == 0:
            raise ConfigError('Tail balance weights are both zero.')
        return self
