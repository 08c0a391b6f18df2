from eval.acceptance import VerifySettings, run_acceptance
from run_scripts.run_simulate import simulation_rows
from utils.config import ExperimentConfig
from utils.errors import EXIT_CRITERION_FAILED, EXIT_OK
from utils.run_utils import build_manifest, save_dict_as_json, start_run

# Small fixed run compared against itself for the determinism check.
DETERMINISM_SETTINGS = dict(offspring={'kind': 'geometric', 'b': 0.5}, step={'alpha': 1., 'p': 0.5, 'q': 0.5},
                            n=[6], replicates=20, k=3)


def run_verify(cfg):
    """
    Runs the acceptance criteria listed in `verify.criteria` and writes a JSON and a text report.

    Returns:
        (exit code, run directory): the code is non-zero if any criterion failed.
    """
    cfg.validate()
    run_path, run_name, logger = start_run(cfg, 'verify', __name__)
    verify = cfg.verify
    settings = VerifySettings(seed=cfg.seed, scale=float(verify['scale']), r_scale=float(verify['r_scale']),
                              threads=cfg.threads, verbose=cfg.verbose)
    if settings.r_scale != 1:
        logger.warning(f'Reference models use r multiplied by {settings.r_scale}; criteria are expected to fail.')

    determinism_cfg = ExperimentConfig.from_dict({**DETERMINISM_SETTINGS, 'seed': cfg.seed, 'threads': cfg.threads})

    def simulate_rows():
        return simulation_rows(determinism_cfg, determinism_cfg.n[0])[0]

    config_hash = cfg.config_hash()
    reports = run_acceptance(verify['criteria'], settings, cfg.step_functions(), simulate_rows, config_hash=config_hash)

    header = f'config_hash: {config_hash}\nseed: {cfg.seed}'
    report_text = '\n'.join([header] + [str(report) for report in reports])
    (run_path / 'verify_report.txt').write_text(report_text + '\n')
    save_dict_as_json({'reports': [report.to_dict() for report in reports]}, log_dir=run_path,
                      save_name='verify_report')

    failed = [report.name for report in reports if not report.passed]
    manifest = build_manifest(cfg, 'verify', outputs=['verify_report.json', 'verify_report.txt'],
                              failed_criteria=failed, scale=settings.scale, r_scale=settings.r_scale)
    save_dict_as_json(manifest, log_dir=run_path, save_name='manifest')

    if failed:
        logger.error(f'Failed criteria: {failed}')
        return EXIT_CRITERION_FAILED, run_path
    logger.info(f'All {len(reports)} criteria passed.')
    return EXIT_OK, run_path


if __name__ == '__main__':
    settings = dict(
        verify={'scale': 0.1, 'criteria': ['w_laplace', 'structural', 'laplace_functional']},
        seed=0,
        threads=4,
        out_dir='./runs',
    )
    config = ExperimentConfig.from_dict(settings)
    run_verify(config)
