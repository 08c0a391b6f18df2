from pathlib import Path
import concurrent.futures as cf
import logging
import time
import json

import numpy as np
from tqdm import tqdm

SOFTWARE_VERSION = '1.0.0'
GENERATOR_FAMILY = f'numpy.random.PCG64 (numpy {np.__version__})'

# Stream tags of the per-replicate generators.
STREAM_SIM = 0
STREAM_COX = 1
STREAM_SSCDPPP = 2
STREAM_W = 3
STREAM_VERIFY = 4

STREAM_TAGS = {
    'sim': STREAM_SIM,
    'cox': STREAM_COX,
    'sscdppp': STREAM_SSCDPPP,
    'w': STREAM_W,
    'verify': STREAM_VERIFY,
}


def make_rng(master_seed, stream, index):
    """
    Generator for replicate `index` of stream `stream`, derived as
    PCG64(SeedSequence(entropy=master_seed, spawn_key=(stream, index))).
    """
    seed_seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(stream), int(index)))
    return np.random.Generator(np.random.PCG64(seed_seq))


def initialize(out_dir):
    out_path = Path(out_dir)  # If a string is given, convert to Path object.
    if not out_path.exists():
        print('Making output directory: ', out_path)
        out_path.mkdir(parents=True)

    run_number = sum([run.is_dir() for run in out_path.iterdir()]) + 1
    time_string = time.strftime('%Y-%m-%d_%H-%M-%S', time.localtime(time.time()))
    run_name = f'Trial_{run_number:02d}_{time_string}'

    run_path = out_path / run_name
    run_path.mkdir()
    print(f'Created Run Directory {run_path}')
    print('Starting', run_name)

    return run_number, run_name


class CustomJSONEncoder(json.JSONEncoder):
    """
    Custom JSON Encoder designed to return the string of an object if it cannot be serialized.
    Numpy scalars and arrays are converted to their Python equivalents first.
    """
    def default(self, o):
        if isinstance(o, np.bool_):
            return bool(o)
        elif isinstance(o, np.integer):
            return int(o)
        elif isinstance(o, np.floating):
            return float(o)
        elif isinstance(o, np.ndarray):
            return o.tolist()
        elif isinstance(o, Path):
            return str(o)
        return str(o)


def save_dict_as_json(dict_data, log_dir, save_name):
    file_dir = Path(log_dir, f'{save_name}.json')
    with open(file_dir, mode='w') as jf:
        json.dump(dict_data, jf, indent=2, sort_keys=True, cls=CustomJSONEncoder)
    return file_dir


def get_logger(name, save_file=None):

    logger = logging.getLogger(name)
    logger.setLevel(logging.INFO)
    logger.propagate = False

    # Remove previous handlers. Useful when logger is being redefined in the same run.
    for handler in list(logger.handlers):
        logger.removeHandler(handler)

    c_handler = logging.StreamHandler()
    c_handler.setLevel(logging.INFO)
    c_format = logging.Formatter('%(name)s - %(levelname)s - %(message)s')
    c_handler.setFormatter(c_format)
    logger.addHandler(c_handler)

    if save_file:
        f_handler = logging.FileHandler(str(save_file) + '.log', mode='w')
        f_handler.setLevel(logging.INFO)
        f_format = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
        f_handler.setFormatter(f_format)
        logger.addHandler(f_handler)

    return logger




def split_indices(num_items, num_chunks):
    """
    Contiguous, nearly equal chunks of range(num_items).
    """
    num_chunks = max(1, min(num_chunks, num_items))
    sizes = [num_items // num_chunks] * num_chunks
    for idx in range(num_items % num_chunks):
        sizes[idx] += 1
    chunks = list()
    start = 0
    for size in sizes:
        if size > 0:
            chunks.append(range(start, start + size))
        start += size
    return chunks


def run_chunked(worker, shared_args, num_items, threads=1, chunks_per_thread=4, verbose=False, desc=None):
    """
    Runs worker(chunk, *shared_args) over contiguous chunks of range(num_items).

    Each worker call returns a list of results tagged with their item index as the first element.
    Results are returned sorted by that index, so the outcome does not depend on scheduling.
    `threads=1` runs in-process.
    """
    if num_items == 0:
        return list()

    chunks = split_indices(num_items, max(1, threads) * chunks_per_thread)
    results = list()
    with tqdm(total=num_items, desc=desc, disable=verbose) as progress:
        if threads <= 1:
            for chunk in chunks:
                results.extend(worker(chunk, *shared_args))
                progress.update(len(chunk))
        else:
            with cf.ProcessPoolExecutor(max_workers=threads) as ex:
                futures = {ex.submit(worker, chunk, *shared_args): len(chunk) for chunk in chunks}
                for future in cf.as_completed(futures):
                    results.extend(future.result())
                    progress.update(futures[future])

    results.sort(key=lambda item: item[0])
    return results


def start_run(cfg, command, logger_name):
    """
    Creates the numbered run directory `out_dir/command/Trial_XX_time`, the run logger and a copy of the
    configuration, in the same order for every command.

    Returns:
        (run_path, run_name, logger)
    """
    out_path = Path(cfg.out_dir) / command
    out_path.mkdir(parents=True, exist_ok=True)
    run_number, run_name = initialize(out_path)
    run_path = out_path / run_name

    logger = get_logger(name=logger_name, save_file=run_path / run_name)
    logger.info(f'Starting {command} run {run_number} with config hash {cfg.config_hash()}')
    save_dict_as_json(cfg.to_dict(), log_dir=run_path, save_name='config')
    return run_path, run_name, logger


def build_manifest(cfg, command, model=None, outputs=(), failed=(), **extra):
    """
    Provenance written next to every output: versions, generator derivation, model constants,
    the config hash and which replicates, if any, failed.
    """
    manifest = {
        'command': command,
        'software_version': SOFTWARE_VERSION,
        'schema_version': cfg.to_dict()['schema_version'],
        'generator': GENERATOR_FAMILY,
        'stream_derivation': 'PCG64(SeedSequence(entropy=seed, spawn_key=(stream, replicate_id)))',
        'stream_tags': STREAM_TAGS,
        'seed': cfg.seed,
        'config_hash': cfg.config_hash(),
        'outputs': [str(Path(output).name) for output in outputs],
        'failed_replicates': list(failed),
        'complete': not failed,
    }
    if model is not None:
        manifest['model'] = model.to_json_dict()
    manifest.update(extra)
    return manifest
