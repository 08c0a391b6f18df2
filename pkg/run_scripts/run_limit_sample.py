import math

from data.intervals import check_outside_window
from data.records import replicate_header, replicate_row, write_csv
from metrics.stats_harness import Metrics
from sim.brw_sim import order_statistics
from sim.limit_process import LimitSampleConfig, sample_limit_batch
from utils.config import ExperimentConfig
from utils.errors import EXIT_OK, ConfigError, DomainError
from utils.run_utils import build_manifest, save_dict_as_json, start_run


def run_limit_sample(cfg):
    """
    Draws `limit.samples` realisations of the limit process from each configured sampler and writes them in the
    same row format as simulated replicates, with source `cox` or `sscdppp` and the drawn W in `w_proxy`.

    Returns:
        (exit code, run directory)
    """
    cfg.validate()
    sets = cfg.intervals()
    try:
        check_outside_window(sets, cfg.limit['window'])
    except DomainError as e:
        raise ConfigError(f'Counting sets must avoid the limit sample window: {e}') from e

    run_path, run_name, logger = start_run(cfg, 'limit-sample', __name__)
    model = cfg.limit_model()
    sample_cfg = LimitSampleConfig(model=model, window=float(cfg.limit['window']), w_mode=cfg.limit['w_mode'],
                                   w_depth=int(cfg.limit['w_depth']))
    logger.info(f'W mode {sample_cfg.w_mode}, r={model.r:.6g}, window {sample_cfg.window}')

    config_hash = cfg.config_hash()
    num_samples = int(cfg.limit['samples'])
    rows = list()
    for source in cfg.limit['sources']:
        metrics = Metrics(['atoms', 'w', 'top'])
        for idx, sample in sample_limit_batch(sample_cfg, source, num_samples, cfg.seed, threads=cfg.threads,
                                              verbose=cfg.verbose):
            ext = order_statistics(sample, cfg.k, math.inf)
            rows.append(replicate_row(source, idx, None, None, sample.w, None, ext, sample.counts(sets), cfg.k,
                                      config_hash))
            metrics.push(atoms=sample.total, w=sample.w, top=ext.order_stats[0])
        logger.info(f'{source}: {metrics}')

    csv_path = write_csv(run_path / 'limit_samples.csv', replicate_header(cfg.k, len(sets)), rows)
    manifest = build_manifest(cfg, 'limit-sample', model=model, outputs=[csv_path], w_mode=sample_cfg.w_mode,
                              sources=list(cfg.limit['sources']))
    save_dict_as_json(manifest, log_dir=run_path, save_name='manifest')
    logger.info(f'Wrote {len(rows)} rows to {csv_path}')
    return EXIT_OK, run_path


if __name__ == '__main__':
    settings = dict(
        offspring={'kind': 'regular', 'd': 2},
        step={'alpha': 1., 'p': 0.5, 'q': 0.5},
        k=3,
        limit={'samples': 10000, 'window': 0.25, 'sources': ['cox', 'sscdppp']},
        sets=[[1., 2.], [2., 4.], [4., 'inf'], [-2., -1.]],
        seed=0,
        threads=4,
        out_dir='./runs',
    )
    config = ExperimentConfig.from_dict(settings)
    run_limit_sample(config)
