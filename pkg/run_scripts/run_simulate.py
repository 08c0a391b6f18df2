from data.records import replicate_header, replicate_row, write_csv
from metrics.stats_harness import Metrics
from models.steps import scaling_constant
from sim.brw_sim import SimCaps, counts, extremes, simulate_replicates
from utils.config import ExperimentConfig
from utils.errors import EXIT_OK, EXIT_RESOURCE_ERROR
from utils.run_utils import build_manifest, save_dict_as_json, start_run


def simulation_rows(cfg, n, count=None, progress=None):
    """
    CSV rows of the simulated replicates at generation n, and the outcomes that hit a cap.

    Args:
        cfg (ExperimentConfig): Experiment configuration.
        n (int): Generation.
        count (int, optional): Number of replicates. Defaults to `cfg.replicates`.
        progress (Metrics, optional): Receives running statistics of every successful replicate.

    Returns:
        (rows, failed) where failed is a list of dicts with the replicate id and the cap that was exceeded.
    """
    count = cfg.replicates if count is None else count
    sets = cfg.intervals()
    config_hash = cfg.config_hash()
    caps = SimCaps(population=int(cfg.caps['population']), restarts=int(cfg.caps['restarts']))

    outcomes = simulate_replicates(cfg.offspring_distribution(), cfg.step_distribution(), n, count, cfg.seed,
                                   window=cfg.window, track_one_jump=cfg.track_one_jump, caps=caps,
                                   threads=cfg.threads, verbose=cfg.verbose)
    rows, failed = list(), list()
    for outcome in outcomes:
        if outcome.error is not None:
            failed.append({'replicate_id': outcome.replicate_id, 'n': n, **outcome.error})
            continue
        rep = outcome.replicate
        ext = extremes(rep, cfg.k)
        rows.append(replicate_row('sim', outcome.replicate_id, n, rep.population, rep.w_proxy, rep.restarts, ext,
                                  counts(rep, sets), cfg.k, config_hash))
        if progress is not None:
            progress.push(population=rep.population, w_proxy=rep.w_proxy, restarts=rep.restarts,
                          top=ext.order_stats[0] if ext.order_stats.size else None)
    return rows, failed


def run_simulate(cfg):
    """
    Simulates `cfg.replicates` branching random walks for every n in `cfg.n` and writes one CSV row per replicate.

    Returns:
        (exit code, run directory)
    """
    cfg.validate()
    run_path, run_name, logger = start_run(cfg, 'simulate', __name__)
    model = cfg.limit_model()
    step = cfg.step_distribution()

    header = replicate_header(cfg.k, len(cfg.sets))
    all_rows, all_failed, b_n = list(), list(), dict()
    for n in cfg.n:
        b_n[n] = scaling_constant(step, model.mu, n)
        logger.info(f'Simulating {cfg.replicates} replicates at n={n}, b_n={b_n[n]:.6g}')
        metrics = Metrics(['population', 'w_proxy', 'restarts', 'top'])
        rows, failed = simulation_rows(cfg, n, progress=metrics)
        logger.info(f'n={n}: {metrics}')
        if failed:
            logger.error(f'{len(failed)} replicates at n={n} exceeded a cap: '
                         f'{[fail["replicate_id"] for fail in failed]}')
        all_rows.extend(rows)
        all_failed.extend(failed)

    csv_path = write_csv(run_path / 'replicates.csv', header, all_rows)
    manifest = build_manifest(cfg, 'simulate', model=model, outputs=[csv_path], failed=all_failed,
                              b_n={str(n): value for n, value in b_n.items()})
    manifest_path = save_dict_as_json(manifest, log_dir=run_path, save_name='manifest')
    logger.info(f'Wrote {len(all_rows)} rows to {csv_path} and the manifest to {manifest_path}')
    return (EXIT_RESOURCE_ERROR if all_failed else EXIT_OK), run_path


if __name__ == '__main__':
    settings = dict(
        offspring={'kind': 'geometric', 'b': 0.5},
        step={'alpha': 1., 'p': 1., 'q': 0.},
        n=[8, 14],
        replicates=1000,
        k=3,
        seed=0,
        threads=4,
        out_dir='./runs',
    )
    config = ExperimentConfig.from_dict(settings)
    run_simulate(config)
