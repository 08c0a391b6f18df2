from data.records import FORMULA_HEADER, formula_row, write_csv
from eval.limit_formulas import EXACT, formula_table
from models.offspring import FINITE
from sim.limit_process import W_SIMULATED, LimitSampleConfig, order_statistics_batch, sample_limit_batch, sample_w
from utils.config import ExperimentConfig
from utils.errors import EXIT_OK
from utils.run_utils import STREAM_W, build_manifest, make_rng, save_dict_as_json, start_run


def w_source(cfg, model, logger=None):
    """
    EXACT when the law of W is known in closed form, otherwise simulated draws of W at depth `limit.w_depth`.
    """
    if model.offspring.kind != FINITE:
        return EXACT
    sample_cfg = LimitSampleConfig(model=model, window=float(cfg.limit['window']), w_mode=W_SIMULATED,
                                   w_depth=int(cfg.limit['w_depth']))
    num_samples = int(cfg.formulas['w_samples'])
    if logger is not None:
        logger.info(f'Drawing {num_samples} samples of W at depth {sample_cfg.w_depth} for the expectations.')
    return sample_w(sample_cfg, num_samples, make_rng(cfg.seed, STREAM_W, 0))


def sampled_gaps(cfg, model, ks, logger=None):
    """
    Gaps M^(k) - M^(k+1) of `limit.samples` Cox samples for each k, to cross-check the grid evaluation.
    """
    sample_cfg = LimitSampleConfig(model=model, window=float(cfg.limit['window']), w_mode=cfg.limit['w_mode'],
                                   w_depth=int(cfg.limit['w_depth']))
    num_samples = int(cfg.limit['samples'])
    if logger is not None:
        logger.info(f'Drawing {num_samples} Cox samples for the Monte Carlo gap laws.')
    samples = [sample for _, sample in sample_limit_batch(sample_cfg, 'cox', num_samples, cfg.seed,
                                                          threads=cfg.threads, verbose=cfg.verbose)]
    top = order_statistics_batch(samples, max(ks) + 1)
    return {k: top[:, k - 1] - top[:, k] for k in ks}


def run_formulas(cfg):
    """
    Evaluates the limit laws of the order statistics, joint order statistics and gaps on the configured grids.

    Returns:
        (exit code, run directory)
    """
    cfg.validate()
    run_path, run_name, logger = start_run(cfg, 'formulas', __name__)
    model = cfg.limit_model()
    formulas = cfg.formulas

    mc_gaps = sampled_gaps(cfg, model, formulas['ks'], logger) if formulas['gap_ts'] else None
    rows = formula_table(model, ks=formulas['ks'], xs=formulas['xs'],
                         joint_pairs=[tuple(pair) for pair in formulas['joint_pairs']], gap_ts=formulas['gap_ts'],
                         w=w_source(cfg, model, logger), void=formulas['void'], mc_gaps=mc_gaps)
    flagged = [row for row in rows if row.get('flagged')]
    if flagged:
        logger.warning(f'{len(flagged)} gap rows disagree with the Monte Carlo estimate.')
    for row in rows:
        logger.info(f"{row['statistic']} k={row.get('k')} x={row.get('x')} u={row.get('u')} v={row.get('v')} "
                    f"t={row.get('t')}: {row['value']:.6g} ({row['method']})")

    config_hash = cfg.config_hash()
    csv_path = write_csv(run_path / 'formulas.csv', FORMULA_HEADER, [formula_row(row, config_hash) for row in rows])
    manifest = build_manifest(cfg, 'formulas', model=model, outputs=[csv_path], void=formulas['void'])
    save_dict_as_json(manifest, log_dir=run_path, save_name='manifest')
    return EXIT_OK, run_path


if __name__ == '__main__':
    settings = dict(
        offspring={'kind': 'regular', 'd': 2},
        step={'alpha': 1., 'p': 1., 'q': 0.},
        formulas={'ks': [1, 2, 3], 'xs': [0.5, 1., 2., 4.], 'joint_pairs': [[1., 2.]], 'gap_ts': [0.5, 1.],
                  'void': 'listed'},
        out_dir='./runs',
    )
    config = ExperimentConfig.from_dict(settings)
    run_formulas(config)
