import logging
import math
from dataclasses import dataclass, field, asdict
from typing import NamedTuple, Optional

import numpy as np
from runstats import Statistics
from scipy.special import kolmogi
from scipy.stats import chi2, chi2_contingency

from data.intervals import check_outside_window
from models.offspring import REGULAR
from sim.limit_process import (LimitSampleConfig, cluster_sampler, sample_limit_cox, sample_limit_sscdppp,
                               sample_scale_decorated, sample_w, superpose, superposition_theta)
from utils.errors import DomainError
from utils.run_utils import STREAM_VERIFY, make_rng, run_chunked

logger = logging.getLogger(__name__)

MIN_EXPECTED = 5.
MIN_KS_SAMPLES = 100


class Metrics:
    """
    Maintains running statistics for a given collection of observables.
    """

    def __init__(self, names):
        self.metrics = {name: Statistics() for name in names}

    def push(self, **values):
        for name, value in values.items():
            if value is not None and not math.isnan(value):
                self.metrics[name].push(value)

    def means(self):
        return {name: stat.mean() if len(stat) else math.nan for name, stat in self.metrics.items()}

    def stddevs(self):
        return {name: stat.stddev() if len(stat) > 1 else 0. for name, stat in self.metrics.items()}

    def stderrs(self):
        return {name: stat.stddev() / math.sqrt(len(stat)) if len(stat) > 1 else 0.
                for name, stat in self.metrics.items()}

    def __repr__(self):
        means = self.means()
        stddevs = self.stddevs()
        metric_names = sorted(list(means))
        return ' '.join(
            f'{name} = {means[name]:.4g} +/- {2 * stddevs[name]:.4g}' for name in metric_names
        )


@dataclass
class TestReport:
    """
    Outcome of one statistical check. Serialises to JSON through `to_dict` and to text through `str`.
    """
    name: str
    passed: bool
    statistic: float = math.nan
    p_value: float = math.nan
    value: float = math.nan
    stderr: float = math.nan
    details: dict = field(default_factory=dict)
    config_hash: Optional[str] = None
    seed: Optional[int] = None

    __test__ = False  # Not a pytest class.

    def to_dict(self):
        return asdict(self)

    def __str__(self):
        status = 'PASS' if self.passed else 'FAIL'
        parts = [f'[{status}] {self.name}']
        for key in ('statistic', 'p_value', 'value', 'stderr'):
            number = getattr(self, key)
            if not math.isnan(number):
                parts.append(f'{key}={number:.4g}')
        return ' '.join(parts)


class EcdfReport(NamedTuple):
    grid: np.ndarray
    empirical: np.ndarray
    reference: np.ndarray
    distance: float
    stderrs: np.ndarray
    z_scores: np.ndarray
    sample_size: int

    def critical_distance(self, level=0.01):
        """ Asymptotic Kolmogorov critical value at the given level, e.g. 1.63 / sqrt(n) at 1%. """
        return float(kolmogi(level)) / math.sqrt(self.sample_size)


def ecdf(samples, grid):
    samples = np.sort(np.asarray(samples, dtype=np.float64))
    grid = np.asarray(grid, dtype=np.float64)
    return np.searchsorted(samples, grid, side='right') / samples.size


def binomial_stderr(prob, n):
    prob = np.asarray(prob, dtype=np.float64)
    return np.sqrt(prob * (1 - prob) / n)


def ks_compare(samples, reference_cdf, grid):
    """
    Sup distance over the grid between the empirical CDF of the samples and a reference CDF,
    with per-point z-scores from binomial standard errors of the reference.
    """
    samples = np.asarray(samples, dtype=np.float64)
    grid = np.sort(np.asarray(grid, dtype=np.float64).reshape(-1))
    if grid.size == 0:
        raise DomainError('The comparison grid is empty.')
    if samples.size < MIN_KS_SAMPLES:
        raise DomainError(f'At least {MIN_KS_SAMPLES} samples are needed, got {samples.size}.')

    empirical = ecdf(samples, grid)
    reference = np.asarray([reference_cdf(x) for x in grid], dtype=np.float64)
    gaps = empirical - reference
    stderrs = binomial_stderr(reference, samples.size)
    with np.errstate(divide='ignore', invalid='ignore'):
        z_scores = np.where(stderrs > 0, gaps / stderrs, np.where(gaps == 0, 0., np.inf))
    return EcdfReport(grid=grid, empirical=empirical, reference=reference, distance=float(np.max(np.abs(gaps))),
                      stderrs=stderrs, z_scores=z_scores, sample_size=samples.size)


def _cell(vector):
    if np.ndim(vector) == 0:
        return (int(vector),)
    return tuple(int(c) for c in vector)


def _pool(observed, expected):
    """
    Merges cells whose expected count is below 5 into one pooled cell. A pooled cell that is still
    too small is merged with the smallest remaining cell until it is large enough.

    Args:
        observed (np.ndarray): Observed counts, shape (groups, cells).
        expected (np.ndarray): Expected counts of the same shape.
    """
    small = np.min(expected, axis=0) < MIN_EXPECTED
    kept_obs, kept_exp = observed[:, ~small], expected[:, ~small]
    pooled_obs, pooled_exp = observed[:, small].sum(axis=1), expected[:, small].sum(axis=1)

    while np.any(small) and np.min(pooled_exp) < MIN_EXPECTED and kept_exp.shape[1] > 0:
        smallest = int(np.argmin(kept_exp.sum(axis=0)))
        pooled_obs = pooled_obs + kept_obs[:, smallest]
        pooled_exp = pooled_exp + kept_exp[:, smallest]
        kept_obs = np.delete(kept_obs, smallest, axis=1)
        kept_exp = np.delete(kept_exp, smallest, axis=1)

    if np.any(small):
        kept_obs = np.column_stack([kept_obs, pooled_obs])
        kept_exp = np.column_stack([kept_exp, pooled_exp])
    if kept_obs.shape[1] < 2 or np.min(kept_exp) < MIN_EXPECTED:
        raise DomainError('Cells cannot be pooled to expected counts of at least 5 in two or more cells.')
    return kept_obs, kept_exp


class ChiSquareResult(NamedTuple):
    statistic: float
    p_value: float
    dof: int
    cells: int


def count_distribution_compare(a, b):
    """
    Pooled chi-square comparison of count vectors.

    Args:
        a (list): Count vectors (or scalar counts); each distinct vector is one cell.
        b (list or dict): Count vectors of a second sample for the two-sample test, or a pmf
            {count vector: probability} for the one-sample test. Mass missing from the pmf forms an
            extra cell.

    Returns:
        ChiSquareResult
    """
    cells_a = [_cell(vector) for vector in a]
    if not cells_a:
        raise DomainError('The first sample is empty.')

    if isinstance(b, dict):
        pmf = {_cell(key): float(prob) for key, prob in b.items()}
        cells = sorted(set(pmf) | set(cells_a))
        index = {cell: idx for idx, cell in enumerate(cells)}
        observed = np.zeros(len(cells) + 1)
        for cell in cells_a:
            observed[index[cell]] += 1
        probs = np.array([pmf.get(cell, 0.) for cell in cells] + [max(0., 1 - sum(pmf.values()))])
        expected = probs * len(cells_a)
        # The last cell holds the mass missing from the pmf; outcomes outside it land in zero-probability cells.
        obs, exp = _pool(observed[None, :], expected[None, :])
        with np.errstate(divide='ignore', invalid='ignore'):
            statistic = float(np.sum((obs - exp) ** 2 / exp))
        dof = obs.shape[1] - 1
        return ChiSquareResult(statistic, float(chi2.sf(statistic, dof)), dof, obs.shape[1])

    cells_b = [_cell(vector) for vector in b]
    if not cells_b:
        raise DomainError('The second sample is empty.')
    cells = sorted(set(cells_a) | set(cells_b))
    index = {cell: idx for idx, cell in enumerate(cells)}
    table = np.zeros((2, len(cells)))
    for row, sample in enumerate((cells_a, cells_b)):
        for cell in sample:
            table[row, index[cell]] += 1
    expected = table.sum(axis=1, keepdims=True) * table.sum(axis=0, keepdims=True) / table.sum()
    obs, _ = _pool(table, expected)
    statistic, p_value, dof, _ = chi2_contingency(obs, correction=False)
    return ChiSquareResult(float(statistic), float(p_value), int(dof), obs.shape[1])


def laplace_estimate(samples, g):
    """
    Mean and standard error of exp(-sum multiplicity * g(location)) over point samples.
    """
    samples = list(samples)
    if not samples:
        raise DomainError('No samples given.')
    stats = Statistics()
    for sample in samples:
        if g.support_distance < sample.window:
            raise DomainError(f'The step function reaches into the window |x| <= {sample.window}.')
        stats.push(math.exp(-sample.integrate(g)))
    stderr = stats.stddev() / math.sqrt(len(stats)) if len(stats) > 1 else 0.
    return stats.mean(), stderr


def _two_sample_report(name, counts_a, counts_b, level, **details):
    result = count_distribution_compare(counts_a, counts_b)
    return TestReport(name=name, passed=result.p_value > level, statistic=result.statistic, p_value=result.p_value,
                      details={'dof': result.dof, 'cells': result.cells, 'level': level, **details})


def _superposition_chunk(indices, seed, cfg, scales, sets, general):
    draw_t = cluster_sampler(cfg.model)
    model = cfg.model
    rows = list()
    for idx in indices:
        rngs = [make_rng(seed, STREAM_VERIFY, 3 * idx + offset) for offset in range(3)]
        first = sample_limit_cox(cfg, rngs[0], draw_t=draw_t)
        second = sample_limit_cox(cfg, rngs[1], draw_t=draw_t)
        combined = superpose([first, second], scales)
        if general:
            ws = sample_w(cfg, 2, rngs[2])
            theta = superposition_theta(model, scales, ws)
            reference = sample_scale_decorated(model.alpha, model.p, combined.window, theta, draw_t, rngs[2])
        else:
            reference_cfg = LimitSampleConfig(model=model, window=combined.window, w_mode=cfg.w_mode,
                                              w_depth=cfg.w_depth)
            reference = sample_limit_cox(reference_cfg, rngs[2], draw_t=draw_t)
        rows.append((idx, tuple(combined.counts(sets)), tuple(reference.counts(sets))))
    return rows


def _superposition_counts(cfg, scales, n_samples, seed, sets, general, threads):
    check_outside_window(sets, max(scales) * cfg.window)
    rows = run_chunked(_superposition_chunk, (seed, cfg, tuple(scales), list(sets), general), n_samples,
                       threads=threads, desc='superposition')
    return [row[1] for row in rows], [row[2] for row in rows]


def superposability_test(model, a1, a2, n_samples, seed, sets, window=0.05, check_constraint=True,
                         level=0.01, threads=1):
    """
    Two-sample test of s_a1 N1 + s_a2 N2 against N on count vectors, for a regular tree and
    a1^alpha + a2^alpha = 1. `check_constraint=False` allows deliberately broken scales.
    """
    if model.offspring.kind != REGULAR:
        raise DomainError('Superposability in law holds for regular trees only; use general_superposition_test.')
    if not (a1 > 0 and a2 > 0):
        raise DomainError('Scales must be positive.')
    constraint = a1 ** model.alpha + a2 ** model.alpha
    if check_constraint and abs(constraint - 1) > 1e-12:
        raise DomainError(f'a1^alpha + a2^alpha = {constraint!r}, not 1.')

    cfg = LimitSampleConfig(model=model, window=window)
    combined, reference = _superposition_counts(cfg, (a1, a2), n_samples, seed, sets, False, threads)
    report = _two_sample_report('superposability', combined, reference, level, a1=a1, a2=a2,
                                constraint=constraint, n_samples=n_samples)
    report.seed = seed
    return report


def general_superposition_test(model, a1, a2, n_samples, seed, sets, window=0.05, level=0.01, threads=1,
                               w_mode='auto', w_depth=16):
    """
    Two-sample test of s_a1 N1 + s_a2 N2 against the scale-decorated process with random scale
    (r (a1^alpha W1 + a2^alpha W2))^(1/alpha), valid for any offspring law.
    """
    cfg = LimitSampleConfig(model=model, window=window, w_mode=w_mode, w_depth=w_depth)
    combined, reference = _superposition_counts(cfg, (a1, a2), n_samples, seed, sets, True, threads)
    report = _two_sample_report('general_superposition', combined, reference, level, a1=a1, a2=a2,
                                n_samples=n_samples)
    report.seed = seed
    return report


def _representation_chunk(indices, seed, cfg, sets):
    draw_t = cluster_sampler(cfg.model)
    rows = list()
    for idx in indices:
        cox = sample_limit_cox(cfg, make_rng(seed, STREAM_VERIFY, 2 * idx), draw_t=draw_t)
        decorated = sample_limit_sscdppp(cfg, make_rng(seed, STREAM_VERIFY, 2 * idx + 1), draw_t=draw_t)
        rows.append((idx, tuple(cox.counts(sets)), tuple(decorated.counts(sets))))
    return rows


def representation_test(cfg, n_samples, seed, sets, level=0.01, threads=1):
    """
    Two-sample test of the Cox cluster sampler against the scale-decorated sampler on count vectors.
    """
    sets = list(sets)
    check_outside_window(sets, cfg.window)
    rows = run_chunked(_representation_chunk, (seed, cfg, sets), n_samples, threads=threads, desc='representation')
    report = _two_sample_report('representation', [row[1] for row in rows], [row[2] for row in rows], level,
                                n_samples=n_samples)
    report.seed = seed
    return report


class OneJumpReport(NamedTuple):
    ns: list
    fractions: list
    stderrs: list
    nonincreasing: bool


def one_jump_report(reps_by_n, sets, slack=0.):
    """
    Fraction of replicates whose positions and one-jump process differ on any of the sets, per n.

    Args:
        reps_by_n (dict): n -> list of SimReplicate with one-jump data.
        sets (list of Interval): Sets to compare on.
        slack (float): Allowed increase between consecutive n for the trend to count as non-increasing.
    """
    sets = list(sets)
    ns, fractions, stderrs = list(), list(), list()
    for n in sorted(reps_by_n):
        reps = reps_by_n[n]
        if not reps:
            raise DomainError(f'No replicates for n={n}.')
        differs = list()
        for rep in reps:
            if rep.one_jump is None:
                raise DomainError(f'A replicate at n={n} carries no one-jump data.')
            differs.append(rep.positions.counts(sets) != rep.one_jump.counts(sets))
        fraction = float(np.mean(differs))
        ns.append(n)
        fractions.append(fraction)
        stderrs.append(float(binomial_stderr(fraction, len(reps))))

    nonincreasing = all(later <= earlier + slack for earlier, later in zip(fractions, fractions[1:]))
    return OneJumpReport(ns=ns, fractions=fractions, stderrs=stderrs, nonincreasing=nonincreasing)
