import csv
import math
from pathlib import Path

REPLICATE_PREFIX = ['source', 'replicate_id', 'n', 'population', 'w_proxy', 'restarts']
FORMULA_HEADER = ['statistic', 'k', 'x', 'u', 'v', 't', 'value', 'stderr', 'method', 'mc_value', 'mc_stderr',
                  'discrepancy', 'flagged', 'config_hash']


def format_value(value):
    """
    Shortest round-trip text for floats so that identical runs give byte-identical files.
    """
    if value is None:
        return ''
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if hasattr(value, 'item'):  # Numpy scalars.
        return format_value(value.item())
    if isinstance(value, float):
        if math.isnan(value):
            return 'nan'
        return repr(value)
    return str(value)


def replicate_header(k, num_sets):
    return (REPLICATE_PREFIX
            + [f'M{j}' for j in range(1, k + 1)]
            + [f'G{j}' for j in range(1, k)]
            + ['Mmin']
            + [f'count_A{j}' for j in range(1, num_sets + 1)]
            + ['config_hash'])


def replicate_row(source, replicate_id, n, population, w_proxy, restarts, extremes, counts, k, config_hash):
    """
    One CSV row. Missing order statistics (fewer than k points) are left empty.
    """
    stats = list(extremes.order_stats) + [None] * (k - len(extremes.order_stats))
    gaps = list(extremes.gaps) + [None] * (k - 1 - len(extremes.gaps))
    values = ([source, replicate_id, n, population, w_proxy, restarts] + stats + gaps
              + [extremes.minimum] + list(counts) + [config_hash])
    return [format_value(value) for value in values]


def formula_row(row, config_hash):
    return [format_value(row.get(key)) for key in FORMULA_HEADER[:-1]] + [config_hash]


def write_csv(path, header, rows):
    path = Path(path)
    with open(path, mode='w', newline='') as cf:
        writer = csv.writer(cf, lineterminator='\n')
        writer.writerow(header)
        writer.writerows(rows)
    return path


def read_csv(path):
    with open(path, mode='r', newline='') as cf:
        reader = csv.reader(cf)
        header = next(reader)
        return header, [row for row in reader]
