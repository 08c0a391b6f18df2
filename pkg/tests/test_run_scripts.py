import json

import pytest

from data.records import read_csv
from main import main
from run_scripts.run_formulas import run_formulas
from run_scripts.run_limit_sample import run_limit_sample
from run_scripts.run_simulate import run_simulate
from run_scripts.run_verify import run_verify
from utils.config import ExperimentConfig
from utils.errors import ConfigError


def small_config(tmp_path, **overrides):
    settings = dict(offspring={'kind': 'geometric', 'b': 0.5}, step={'alpha': 1., 'p': 0.5, 'q': 0.5}, n=[4],
                    replicates=5, k=2, sets=[[1., 'inf'], ['-inf', -1.]], limit={'samples': 5, 'window': 0.25},
                    out_dir=str(tmp_path))
    settings.update(overrides)
    return ExperimentConfig.from_dict(settings)


def load_manifest(run_path):
    return json.loads((run_path / 'manifest.json').read_text())


def test_simulate_writes_rows_and_manifest(tmp_path):
    cfg = small_config(tmp_path)
    exit_code, run_path = run_simulate(cfg)
    assert exit_code == 0

    header, rows = read_csv(run_path / 'replicates.csv')
    assert header[:6] == ['source', 'replicate_id', 'n', 'population', 'w_proxy', 'restarts']
    assert header[6:] == ['M1', 'M2', 'G1', 'Mmin', 'count_A1', 'count_A2', 'config_hash']
    assert len(rows) == 5
    assert all(row[-1] == cfg.config_hash() for row in rows)

    manifest = load_manifest(run_path)
    assert manifest['complete']
    assert manifest['b_n'] == {'4': 16.}
    assert manifest['model']['r'] == pytest.approx(2.)
    assert (run_path / 'config.json').exists()


def test_simulate_is_deterministic(tmp_path):
    _, first = run_simulate(small_config(tmp_path, replicates=8))
    _, second = run_simulate(small_config(tmp_path, replicates=8, threads=2))
    assert first != second
    assert (first / 'replicates.csv').read_bytes() == (second / 'replicates.csv').read_bytes()


def test_simulate_without_replicates(tmp_path):
    exit_code, run_path = run_simulate(small_config(tmp_path, replicates=0))
    assert exit_code == 0
    header, rows = read_csv(run_path / 'replicates.csv')
    assert header and rows == []


def test_simulate_reports_capped_replicates(tmp_path):
    cfg = small_config(tmp_path, offspring={'kind': 'regular', 'd': 2}, n=[6], caps={'population': 10})
    exit_code, run_path = run_simulate(cfg)
    assert exit_code == 3
    manifest = load_manifest(run_path)
    assert not manifest['complete']
    assert [fail['replicate_id'] for fail in manifest['failed_replicates']] == list(range(5))


def test_limit_sample(tmp_path):
    exit_code, run_path = run_limit_sample(small_config(tmp_path))
    assert exit_code == 0
    _, rows = read_csv(run_path / 'limit_samples.csv')
    assert [row[0] for row in rows] == ['cox'] * 5 + ['sscdppp'] * 5


def test_limit_sample_rejects_sets_inside_window(tmp_path):
    with pytest.raises(ConfigError):
        run_limit_sample(small_config(tmp_path, sets=[[0.1, 'inf']], window=0.05))


def test_formulas(tmp_path):
    cfg = small_config(tmp_path, offspring={'kind': 'regular', 'd': 2}, step={'alpha': 1., 'p': 1., 'q': 0.},
                       formulas={'ks': [2], 'xs': [1.], 'joint_pairs': [], 'gap_ts': [], 'void': 'listed'})
    exit_code, run_path = run_formulas(cfg)
    assert exit_code == 0
    header, rows = read_csv(run_path / 'formulas.csv')
    values = {row[0]: float(row[header.index('value')]) for row in rows}
    assert values['order_stat'] == pytest.approx(0.503214724408055, abs=1e-12)


def test_formulas_cross_check_gaps_with_samples(tmp_path):
    cfg = small_config(tmp_path, offspring={'kind': 'regular', 'd': 2}, step={'alpha': 1., 'p': 1., 'q': 0.},
                       limit={'samples': 2000, 'window': 0.25},
                       formulas={'ks': [1], 'xs': [1.], 'joint_pairs': [], 'gap_ts': [0., 1.]})
    exit_code, run_path = run_formulas(cfg)
    assert exit_code == 0
    header, rows = read_csv(run_path / 'formulas.csv')
    assert header[-5:] == ['mc_value', 'mc_stderr', 'discrepancy', 'flagged', 'config_hash']
    gap_rows = [row for row in rows if row[0] == 'gap_survival']
    assert [float(row[header.index('t')]) for row in gap_rows] == [0., 1.]
    row = gap_rows[1]
    mc_value, value = float(row[header.index('mc_value')]), float(row[header.index('value')])
    assert 0 < mc_value < 1
    assert float(row[header.index('discrepancy')]) == pytest.approx(abs(value - mc_value), abs=1e-12)
    assert row[header.index('flagged')] == '0'
    other = [row for row in rows if row[0] != 'gap_survival']
    assert all(row[header.index('mc_value')] == '' for row in other)


def test_formulas_with_simulated_w(tmp_path):
    cfg = small_config(tmp_path, offspring={'kind': 'finite', 'pmf': [[0, 0.25], [2, 0.75]]},
                       formulas={'ks': [1, 2], 'xs': [1.], 'joint_pairs': [], 'gap_ts': [], 'w_samples': 500})
    exit_code, run_path = run_formulas(cfg)
    assert exit_code == 0
    header, rows = read_csv(run_path / 'formulas.csv')
    assert 'monte-carlo' in [row[header.index('method')] for row in rows]


def test_verify_passes_exact_criteria(tmp_path):
    cfg = small_config(tmp_path, verify={'criteria': ['w_laplace', 'structural']})
    exit_code, run_path = run_verify(cfg)
    assert exit_code == 0
    reports = json.loads((run_path / 'verify_report.json').read_text())['reports']
    assert [report['name'] for report in reports] == ['w_laplace', 'structural']
    assert all(report['passed'] for report in reports)
    lines = (run_path / 'verify_report.txt').read_text().splitlines()
    assert lines[:2] == [f'config_hash: {cfg.config_hash()}', f'seed: {cfg.seed}']


def test_verify_detects_wrong_r(tmp_path):
    cfg = small_config(tmp_path, verify={'criteria': ['geometric_maxima'], 'scale': 0.02, 'r_scale': 2.})
    exit_code, run_path = run_verify(cfg)
    assert exit_code == 1
    assert 'FAIL' in (run_path / 'verify_report.txt').read_text()


def test_main_exit_codes(tmp_path, capsys):
    assert main(['config', 'print-defaults']) == 0
    assert json.loads(capsys.readouterr().out)['schema_version'] == 1

    bad = tmp_path / 'bad.json'
    bad.write_text(json.dumps({'k': 0}))
    assert main(['config', 'validate', str(bad)]) == 2
    assert main(['simulate', '--config', str(bad)]) == 2

    good = small_config(tmp_path).save(tmp_path / 'good.json')
    assert main(['config', 'validate', str(good)]) == 0
    assert main(['simulate', '--config', str(good), '--replicates', '2']) == 0
