import json

import pytest

from utils.arguments import Args
from utils.config import CRITERIA, ExperimentConfig
from utils.errors import ConfigError


def test_defaults_are_valid():
    cfg = ExperimentConfig().validate()
    assert cfg.verify['criteria'] == list(CRITERIA)
    assert len(cfg.intervals()) == 4
    assert len(cfg.step_functions()) == 2


def test_unknown_fields():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({'replicate': 10})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({'limit': {'sample': 10}})


def test_nested_sections_are_merged():
    cfg = ExperimentConfig.from_dict({'limit': {'samples': 7}, 'n': 5})
    assert cfg.limit['samples'] == 7
    assert cfg.limit['window'] == 0.05
    assert cfg.n == [5]


def test_save_and_load(tmp_path):
    cfg = ExperimentConfig.from_dict({'seed': 3, 'offspring': {'kind': 'regular', 'd': 3}})
    path = cfg.save(tmp_path / 'config.json')
    loaded = ExperimentConfig.load(path)
    assert loaded.to_dict() == cfg.to_dict()
    assert json.loads(path.read_text())['schema_version'] == 1


def test_load_errors(tmp_path):
    bad = tmp_path / 'bad.json'
    bad.write_text('{not json')
    with pytest.raises(ConfigError):
        ExperimentConfig.load(bad)
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / 'missing.json')


def test_config_hash():
    base = ExperimentConfig()
    assert base.config_hash() == ExperimentConfig.from_dict({'out_dir': '/elsewhere', 'threads': 8}).config_hash()
    assert base.config_hash() != ExperimentConfig.from_dict({'seed': 1}).config_hash()


@pytest.mark.parametrize('data', [
    {'n': [0]},
    {'k': 0},
    {'k': 21},
    {'replicates': -1},
    {'window': 0.5, 'sets': [[0.2, 1.]]},
    {'sets': [[-1., 1.]]},
    {'offspring': {'kind': 'geometric', 'b': 2.}},
    {'step': {'alpha': 1., 'p': 0.7, 'q': 0.7}},
    {'offspring': {'kind': 'geometric', 'b': 0.5}, 'limit': {'w_mode': 'constant'}},
    {'limit': {'sources': ['bogus']}},
    {'limit': {'sources': []}},
    {'formulas': {'void': 'some'}},
    {'verify': {'criteria': ['nonsense']}},
    {'g_functions': [[[1., 2., -1.]]]},
    {'window': 'wide'},
])
def test_invalid_configs(data):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(data).validate()


def test_command_line_overrides():
    parser = Args()
    args = parser.parse_args(['simulate', '--seed', '5', '--n', '8', '14', '--track-one-jump'])
    cfg = ExperimentConfig().apply_overrides(**parser.config_overrides(args))
    assert cfg.seed == 5
    assert cfg.n == [8, 14]
    assert cfg.track_one_jump
    assert cfg.replicates == ExperimentConfig().replicates
