import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from data.point_sample import PointSample, SimReplicate
from models.steps import sample_steps, scaling_constant
from utils.errors import DomainError, ResourceError
from utils.run_utils import STREAM_SIM, make_rng, run_chunked

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 0.05


@dataclass(frozen=True)
class SimCaps:
    population: int = 10 ** 7
    restarts: int = 10 ** 4


class Extremes(NamedTuple):
    """
    Descending order statistics, the gaps between consecutive ones and the minimum.

    Order statistics that fall inside the discarded window are reported at the window edge
    and flagged in `censored`, as is a minimum hidden in the window. `shortfall` is set when
    fewer than k points exist at all.
    """
    order_stats: np.ndarray
    gaps: np.ndarray
    minimum: float
    censored: np.ndarray
    minimum_censored: bool
    shortfall: bool


class ReplicateOutcome(NamedTuple):
    replicate_id: int
    replicate: Optional[SimReplicate]
    error: Optional[dict]


def _grow_tree(offspring, step, n, caps, track_one_jump, rng):
    """
    One unconditioned run. Returns None on extinction.
    """
    positions = np.zeros(1)
    parents, increments = list(), list()
    for generation in range(1, n + 1):
        counts = offspring.sample_counts(positions.size, rng)
        total = int(counts.sum())
        if total == 0:
            return None
        if total > caps.population:
            raise ResourceError(f'Population {total} at generation {generation} exceeds the cap {caps.population}.',
                                generation=generation, population=total)

        steps = sample_steps(step, total, rng)
        parent_index = np.repeat(np.arange(positions.size), counts)
        positions = positions[parent_index] + steps
        if track_one_jump:
            parents.append(parent_index)
            increments.append(steps)
    return positions, parents, increments


def _one_jump_atoms(parents, increments, b_n):
    """
    Atoms X_e / b_n weighted by the number A_e of generation-n descendants below edge e,
    found by one reverse pass over the stored generations.
    """
    descendants = np.ones(increments[-1].size, dtype=np.int64)
    locations, multiplicities = list(), list()
    for generation in range(len(increments) - 1, -1, -1):
        alive = descendants > 0
        locations.append(increments[generation][alive] / b_n)
        multiplicities.append(descendants[alive])
        if generation > 0:
            num_parents = increments[generation - 1].size
            descendants = np.bincount(parents[generation], weights=descendants,
                                      minlength=num_parents).astype(np.int64)
    return np.concatenate(locations), np.concatenate(multiplicities)


def simulate_replicate(offspring, step, n, window=DEFAULT_WINDOW, track_one_jump=False, caps=None, rng=None):
    """
    Runs the branching random walk to generation n, restarting on extinction.

    Args:
        offspring (OffspringDistribution): Offspring law.
        step (StepDistribution): Step law.
        n (int): Generation to stop at.
        window (float): Atoms with |x| <= window (after scaling by b_n) are dropped.
        track_one_jump (bool): Whether to also build the one-large-jump process.
        caps (SimCaps): Population and restart caps.
        rng (np.random.Generator): Source of randomness.

    Returns:
        SimReplicate
    """
    if n < 1:
        raise DomainError(f'n must be at least 1, got {n}')
    if window < 0:
        raise DomainError(f'Window must be non-negative, got {window}')
    caps = caps or SimCaps()
    rng = rng if rng is not None else np.random.default_rng()
    mu = offspring.mean
    b_n = scaling_constant(step, mu, n)

    restarts = 0
    while True:
        grown = _grow_tree(offspring, step, n, caps, track_one_jump, rng)
        if grown is not None:
            break
        restarts += 1
        if restarts > caps.restarts:
            raise ResourceError(f'More than {caps.restarts} extinctions before generation {n}; '
                                f'the offspring law may be close to critical.', restarts=restarts)
    if restarts:
        logger.debug(f'Survived after {restarts} restarts.')

    positions, parents, increments = grown
    population = positions.size
    sample = PointSample.windowed_from(positions / b_n, np.ones(population, dtype=np.int64), window)

    one_jump = None
    if track_one_jump:
        locations, multiplicities = _one_jump_atoms(parents, increments, b_n)
        one_jump = PointSample.windowed_from(locations, multiplicities, window)

    return SimReplicate(n=n, positions=sample, population=population, w_proxy=population / mu ** n,
                        restarts=restarts, b_n=b_n, one_jump=one_jump)


def simulate_population(offspring, m, size, rng, conditioned=True, cap=10 ** 12):
    """
    Z_m for `size` independent trees, without positions. Extinct trees are redrawn when `conditioned`.
    """
    populations = np.zeros(size, dtype=np.int64)
    pending = np.arange(size)
    while pending.size:
        current = np.ones(pending.size, dtype=np.int64)
        for generation in range(m):
            current = offspring.sum_offspring(current, rng)
            if np.any(current > cap):
                raise ResourceError(f'Population exceeds {cap} at generation {generation + 1}.',
                                    generation=generation + 1)
        populations[pending] = current
        pending = pending[current == 0] if conditioned else pending[:0]
    return populations


def order_statistics(sample, k, hidden):
    """
    Top-k order statistics of a point sample whose window hides `hidden` further points
    (math.inf for limit samples).
    """
    if k < 1:
        raise DomainError(f'k must be at least 1, got {k}')
    # Capping multiplicities at k leaves the top k and the minimum unchanged.
    capped = np.repeat(sample.locations, np.minimum(sample.multiplicities, k))
    expanded = np.sort(capped)[::-1]
    positive = expanded[expanded > 0][:k]
    negative = expanded[expanded < 0]

    num_hidden = int(min(hidden, k - positive.size))
    stats = np.concatenate([positive, np.full(num_hidden, sample.window), negative[:k - positive.size - num_hidden]])
    censored = np.zeros(stats.size, dtype=bool)
    censored[positive.size:positive.size + num_hidden] = True

    if negative.size:
        minimum, minimum_censored = float(negative[-1]), False
    elif hidden > 0:
        minimum, minimum_censored = -sample.window, True
    elif positive.size:
        minimum, minimum_censored = float(expanded[-1]), False
    else:
        minimum, minimum_censored = math.nan, False

    return Extremes(order_stats=stats, gaps=stats[:-1] - stats[1:], minimum=minimum, censored=censored,
                    minimum_censored=minimum_censored, shortfall=stats.size < k)


def extremes(rep, k):
    """
    Order statistics M^(1..k) of the scaled positions counted with multiplicity, gaps and minimum.
    """
    hidden = rep.population - rep.positions.total
    return order_statistics(rep.positions, k, hidden)


def counts(rep, sets):
    return rep.positions.counts(sets)


def one_jump_discrepancy(rep, sets):
    """
    N_n(A) - N~_n(A) for each set A.
    """
    if rep.one_jump is None:
        raise DomainError('This replicate was simulated without one-jump tracking.')
    sets = list(sets)
    return [a - b for a, b in zip(rep.positions.counts(sets), rep.one_jump.counts(sets))]


def simulate_chunk(indices, master_seed, offspring, step, n, window, track_one_jump, caps):
    """
    Worker for the replicate pool. Caps exceeded in one replicate are recorded, not raised.
    """
    outcomes = list()
    for idx in indices:
        rng = make_rng(master_seed, STREAM_SIM, idx)
        try:
            rep = simulate_replicate(offspring, step, n, window=window, track_one_jump=track_one_jump,
                                     caps=caps, rng=rng)
            outcomes.append(ReplicateOutcome(idx, rep, None))
        except ResourceError as e:
            outcomes.append(ReplicateOutcome(idx, None, {'message': str(e), **e.info}))
    return outcomes


def simulate_replicates(offspring, step, n, count, master_seed, window=DEFAULT_WINDOW, track_one_jump=False,
                        caps=None, threads=1, verbose=False):
    """
    Replicates 0 .. count-1 with one generator stream each, sorted by replicate id.
    """
    caps = caps or SimCaps()
    return run_chunked(simulate_chunk, (master_seed, offspring, step, n, window, track_one_jump, caps), count,
                       threads=threads, verbose=verbose, desc=f'simulate n={n}')
