import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from data.point_sample import PointSample
from models.offspring import FINITE, GEOMETRIC, REGULAR, survival_probs
from models.steps import nu_mass
from sim.brw_sim import order_statistics, simulate_population
from utils.errors import DomainError
from utils.run_utils import STREAM_COX, STREAM_SSCDPPP, make_rng, run_chunked

logger = logging.getLogger(__name__)

W_CONSTANT = 'constant'
W_EXPONENTIAL = 'exponential'
W_SIMULATED = 'simulated'
W_AUTO = 'auto'
W_MODES = (W_CONSTANT, W_EXPONENTIAL, W_SIMULATED, W_AUTO)


def default_w_mode(offspring):
    if offspring.kind == REGULAR:
        return W_CONSTANT
    elif offspring.kind == GEOMETRIC:
        return W_EXPONENTIAL
    return W_SIMULATED


@dataclass(frozen=True, eq=False)
class LimitSampleConfig:
    """
    Settings for the limit process samplers.

    The window is mandatory: the limit process has infinitely many atoms near the origin.
    `w_mode='auto'` picks the exact law of W when it is known.
    """
    model: object
    window: float = 0.05
    w_mode: str = W_AUTO
    w_depth: int = 16

    def __post_init__(self):
        if not self.window > 0:
            raise DomainError(f'Limit samples need a positive window, got {self.window}')
        if self.w_mode not in W_MODES:
            raise DomainError(f'Unknown W mode `{self.w_mode}`; choose one of {W_MODES}.')
        if self.w_mode == W_AUTO:
            object.__setattr__(self, 'w_mode', default_w_mode(self.model.offspring))
        if self.w_mode == W_CONSTANT and self.model.offspring.kind != REGULAR:
            raise DomainError('W is constant only for regular trees.')
        if self.w_mode == W_EXPONENTIAL and self.model.offspring.kind != GEOMETRIC:
            raise DomainError('W is exponential only for geometric offspring.')
        if self.w_depth < 1:
            raise DomainError(f'w_depth must be at least 1, got {self.w_depth}')


def sample_w(cfg, size, rng):
    """
    Draws of the martingale limit W conditioned on survival.
    The simulated mode uses Z_m / mu^m at depth m = cfg.w_depth and carries its finite-depth bias.
    """
    if cfg.w_mode == W_CONSTANT:
        return np.ones(size)
    elif cfg.w_mode == W_EXPONENTIAL:
        return rng.exponential(1., size=size)
    offspring = cfg.model.offspring
    return simulate_population(offspring, cfg.w_depth, size, rng, conditioned=True) / offspring.mean ** cfg.w_depth


class ClusterSizeSampler:
    """
    Exact sampler of the cluster size law gamma through its mixture form:
    pick generation i with probability mu^(-i) P(Z_i > 0) / r, then draw Z_i given Z_i > 0.
    This needs no table, so the heavy right tail of gamma costs nothing extra.
    """

    def __init__(self, offspring, terms):
        self.offspring = offspring
        mu = offspring.mean
        survival = survival_probs(offspring, terms)
        weights = mu ** -np.arange(terms + 1, dtype=np.float64) * survival
        self.weights = weights / weights.sum()

    def __call__(self, size, rng):
        generations = rng.choice(self.weights.size, size=size, p=self.weights)
        sizes = np.ones(size, dtype=np.int64)
        for generation in np.unique(generations):
            if generation == 0:
                continue
            mask = generations == generation
            sizes[mask] = self._conditioned_generation(int(generation), int(mask.sum()), rng)
        return sizes

    def _conditioned_generation(self, generation, size, rng):
        if self.offspring.kind == REGULAR:
            return np.full(size, self.offspring.d ** generation, dtype=np.int64)
        elif self.offspring.kind == GEOMETRIC:
            # Z_i is geometric with success probability b^i and never vanishes.
            return rng.geometric(self.offspring.b ** generation, size=size)
        assert self.offspring.kind == FINITE
        return simulate_population(self.offspring, generation, size, rng, conditioned=True)


def cluster_sampler(model):
    return ClusterSizeSampler(model.offspring, model.r_terms)


def _signs(size, p, rng):
    return np.where(rng.random(size) < p, 1., -1.)


def sample_limit_cox(cfg, rng, draw_t=None):
    """
    One draw of the Cox cluster process sum_l T_l delta_{(rW)^(1/alpha) j_l} on |x| > window.

    Given W, the atoms beyond the window are Poisson with mean r W window^(-alpha).
    """
    model = cfg.model
    draw_t = draw_t or cluster_sampler(model)
    w = float(sample_w(cfg, 1, rng)[0])
    theta = (model.r * w) ** (1 / model.alpha)
    if theta == 0:
        return PointSample.empty(window=cfg.window, w=w)

    window = cfg.window / theta
    num_atoms = rng.poisson(window ** -model.alpha)
    base = window * (1 - rng.random(num_atoms)) ** (-1 / model.alpha)
    locations = theta * _signs(num_atoms, model.p, rng) * base
    return PointSample.windowed_from(locations, draw_t(num_atoms, rng), cfg.window, w=w)


def _poisson_arrivals(level, rng):
    """
    Arrival times Gamma_1 < Gamma_2 < ... <= level of a unit-rate Poisson process.
    """
    arrivals = list()
    start = 0.
    batch_size = max(16, int(level + 4 * math.sqrt(level)))
    while True:
        batch = start + np.cumsum(rng.exponential(1., size=batch_size))
        kept = batch[batch <= level]
        arrivals.append(kept)
        if kept.size < batch.size:
            break
        start = batch[-1]
    return np.concatenate(arrivals)


def sample_scale_decorated(alpha, p, window, theta, draw_t, rng):
    """
    Randomly scaled scale-decorated Poisson process: the points Gamma_i^(-1/alpha) of a PRM with
    intensity alpha x^(-alpha-1) on (0, inf), each replaced by T_i copies of eps_i Gamma_i^(-1/alpha),
    all scaled by theta. Only atoms beyond the window are generated.
    """
    if not theta > 0:
        return PointSample.empty(window=window)
    arrivals = _poisson_arrivals((window / theta) ** -alpha, rng)
    points = arrivals ** (-1 / alpha)
    locations = theta * _signs(points.size, p, rng) * points
    return PointSample.windowed_from(locations, draw_t(points.size, rng), window)


def sample_limit_sscdppp(cfg, rng, draw_t=None):
    model = cfg.model
    draw_t = draw_t or cluster_sampler(model)
    w = float(sample_w(cfg, 1, rng)[0])
    theta = (model.r * w) ** (1 / model.alpha)
    sample = sample_scale_decorated(model.alpha, model.p, cfg.window, theta, draw_t, rng)
    return PointSample(sample.locations, sample.multiplicities, window=sample.window, w=w)


def scale_process(sample, a):
    """
    The operator s_a: every location multiplied by a, window rescaled to a * window.
    """
    if not a > 0:
        raise DomainError(f'Scale factor must be positive, got {a}')
    return PointSample.windowed_from(sample.locations * a, sample.multiplicities, sample.window * a, w=sample.w)


def superpose(samples, scales):
    """
    sum_i s_{a_i} N^(i), restricted to the widest of the scaled windows.
    """
    scaled = [scale_process(sample, a) for sample, a in zip(samples, scales)]
    window = max(sample.window for sample in scaled)
    scaled = [sample.restrict(window) for sample in scaled]
    return PointSample(np.concatenate([sample.locations for sample in scaled]),
                       np.concatenate([sample.multiplicities for sample in scaled]), window=window)


def superposition_theta(model, scales, ws):
    """
    Random scale (r sum_i a_i^alpha W_i)^(1/alpha) of a superposition of independent limit processes.
    """
    total = sum(a ** model.alpha * w for a, w in zip(scales, ws))
    return (model.r * total) ** (1 / model.alpha)


class LaplaceFunctionalValue(NamedTuple):
    value: float
    c: float
    bound: float
    terms: int


def cluster_integral(model, g, i_max=None):
    """
    C(g) = int sum_{i <= i_max} mu^(-i) E(1 - exp(-Z_i g(x))) nu_alpha(dx) for a step function g.

    E(1 - exp(-Z_i c)) = 1 - f_i(exp(-c)) is iterated on the complement of the generating function,
    with c = inf giving P(Z_i > 0). Returns C and the truncation bound in i.
    """
    i_max = model.r_terms if i_max is None else i_max
    mu = model.mu
    weights = mu ** -np.arange(i_max + 1, dtype=np.float64)

    total, support_mass = 0., 0.
    for interval, level in g.level_sets():
        mass = nu_mass(model.nu, interval)
        t = 1. if math.isinf(level) else -math.expm1(-level)
        terms = np.empty(i_max + 1)
        for i in range(i_max + 1):
            terms[i] = t
            t = float(model.offspring.pgf_complement(t))
        total += mass * float(np.dot(weights, terms))
        support_mass += mass
    return total, mu ** -i_max / (mu - 1) * support_mass


def laplace_functional(model, g, i_max=None):
    """
    Laplace functional of the limit process under the survival measure, phi*(C(g)).

    Args:
        model (LimitModel): Limit model.
        g (StepFunction): Non-negative step function bounded away from 0.
        i_max (int, optional): Truncation of the generation series. Defaults to the one used for r,
            which makes the killing limit agree with the maxima law exactly.
    """
    i_max = model.r_terms if i_max is None else i_max
    if g.is_zero:
        return LaplaceFunctionalValue(value=1., c=0., bound=0., terms=i_max)
    c, bound = cluster_integral(model, g, i_max)
    return LaplaceFunctionalValue(value=float(model.phi_star(c)), c=c, bound=bound, terms=i_max)


def c_g_constant(model, g, i_max=None):
    c = laplace_functional(model, g, i_max).c
    if not c > 0:
        raise DomainError('c_g is undefined for a step function with C(g) = 0.')
    return c ** (-1 / model.alpha)


def scaled_laplace_functional(model, g, y):
    """
    E*[exp(-int g(x / y) N(dx))] = phi*(C(g) y^(-alpha)).
    """
    if not y > 0:
        raise DomainError(f'y must be positive, got {y}')
    c = laplace_functional(model, g).c
    return float(model.phi_star(c * y ** -model.alpha))


def frechet_mixture(model, g, y, w_samples):
    """
    Monte Carlo value of E*[Phi_alpha(c_g y W^(-1/alpha))], Phi_alpha(z) = exp(-z^(-alpha)), with standard error.
    """
    w_samples = np.asarray(w_samples, dtype=np.float64)
    c_g = c_g_constant(model, g)
    values = np.exp(-((c_g * y) ** -model.alpha) * w_samples)
    stderr = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.
    return float(values.mean()), stderr


def sample_chunk(indices, master_seed, cfg, source):
    """
    Worker for the replicate pool: limit samples from the 'cox' or 'sscdppp' sampler.
    """
    if source == 'cox':
        sampler, stream = sample_limit_cox, STREAM_COX
    elif source == 'sscdppp':
        sampler, stream = sample_limit_sscdppp, STREAM_SSCDPPP
    else:
        raise DomainError(f'Unknown limit sampler `{source}`.')
    draw_t = cluster_sampler(cfg.model)
    return [(idx, sampler(cfg, make_rng(master_seed, stream, idx), draw_t=draw_t)) for idx in indices]


def sample_limit_batch(cfg, source, count, master_seed, threads=1, verbose=False):
    """
    Limit samples 0 .. count-1 from one sampler, as (index, PointSample) pairs sorted by index.
    """
    return run_chunked(sample_chunk, (master_seed, cfg, source), count, threads=threads, verbose=verbose,
                       desc=f'{source} samples')


def order_statistics_batch(samples, k):
    """
    Top-k order statistics of limit samples, shape (len(samples), k). Points hidden in the window
    are reported at its edge.
    """
    if not samples:
        return np.empty((0, k))
    return np.stack([order_statistics(sample, k, math.inf).order_stats for sample in samples])
