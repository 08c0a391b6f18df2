import math

import numpy as np
import pytest

from data.intervals import Interval
from data.point_sample import PointSample, SimReplicate
from models.offspring import OffspringDistribution, w_laplace_conditioned
from models.steps import StepDistribution
from sim.brw_sim import (SimCaps, _one_jump_atoms, extremes, one_jump_discrepancy, order_statistics,
                         simulate_population, simulate_replicate, simulate_replicates)
from utils.errors import DomainError, ResourceError
from utils.run_utils import STREAM_SIM, make_rng

GEOMETRIC = OffspringDistribution.geometric(0.5)
BINARY = OffspringDistribution.regular(2)
FINITE_LAW = OffspringDistribution.finite([(0, 0.25), (2, 0.75)])
ONE_SIDED = StepDistribution(alpha=1., p=1., q=0.)
TWO_SIDED = StepDistribution(alpha=1., p=0.5, q=0.5)


def test_regular_population_and_scaling(rng):
    rep = simulate_replicate(BINARY, ONE_SIDED, 6, rng=rng)
    assert rep.population == 64
    assert rep.w_proxy == 1.
    assert rep.b_n == pytest.approx(64.)
    assert rep.restarts == 0


def test_window_hides_small_positions(rng):
    rep = simulate_replicate(GEOMETRIC, TWO_SIDED, 5, window=0.05, rng=rng)
    assert np.all(np.abs(rep.positions.locations) > 0.05)
    assert rep.positions.total <= rep.population


def test_restarts_on_extinction():
    # With P(Z_1 = 0) = 0.25 some of the 200 runs die out and are restarted.
    reps = [simulate_replicate(FINITE_LAW, ONE_SIDED, 3, rng=make_rng(7, STREAM_SIM, idx)) for idx in range(200)]
    assert all(rep.population > 0 for rep in reps)
    assert any(rep.restarts > 0 for rep in reps)


def test_population_cap(rng):
    with pytest.raises(ResourceError) as info:
        simulate_replicate(BINARY, ONE_SIDED, 8, caps=SimCaps(population=100), rng=rng)
    assert info.value.info['generation'] == 7


def test_invalid_generation(rng):
    with pytest.raises(DomainError):
        simulate_replicate(BINARY, ONE_SIDED, 0, rng=rng)


def test_one_jump_atom_budget(rng):
    # Every generation-n particle has exactly n ancestral edges.
    rep = simulate_replicate(GEOMETRIC, TWO_SIDED, 5, window=0., track_one_jump=True, rng=rng)
    assert rep.one_jump.total == 5 * rep.population


def test_one_jump_discrepancy_needs_tracking(rng):
    rep = simulate_replicate(BINARY, ONE_SIDED, 3, rng=rng)
    with pytest.raises(DomainError):
        one_jump_discrepancy(rep, [Interval.above(1.)])


def _planted_replicate(first, second):
    """ Binary tree of depth 2 with the given edge increments and b_n = 1. """
    parents = [np.zeros(2, dtype=np.int64), np.array([0, 0, 1, 1])]
    increments = [np.asarray(first, dtype=np.float64), np.asarray(second, dtype=np.float64)]
    positions = increments[0][parents[1]] + increments[1]
    locations, multiplicities = _one_jump_atoms(parents, increments, 1.)
    return SimReplicate(n=2, positions=PointSample.windowed_from(positions, np.ones(4, dtype=np.int64), 1.),
                        population=4, w_proxy=1., restarts=0, b_n=1.,
                        one_jump=PointSample.windowed_from(locations, multiplicities, 1.))


def test_one_jump_exact_for_single_large_edge():
    rep = _planted_replicate([100., 0.01], [0.01, 0.02, -0.01, 0.03])
    assert rep.one_jump.atoms() == [(100., 2)]
    sets = [Interval.above(10.), Interval(50., 200.), Interval.below(-1.)]
    assert one_jump_discrepancy(rep, sets) == [0, 0, 0]


def test_one_jump_flags_two_large_edges_on_one_path():
    rep = _planted_replicate([50., 0.01], [60., 0.02, -0.01, 0.03])
    # Positions 110 and 50.02 against one-jump atoms 50 (twice) and 60.
    assert one_jump_discrepancy(rep, [Interval.above(100.), Interval(40., 70.)]) == [1, -2]


@pytest.mark.parametrize('u', [0.5, 1., 2.])
def test_conditioned_transform_matches_surviving_trees(u, rng):
    size, m = 4000, 14
    normalized = simulate_population(FINITE_LAW, m, size, rng) / FINITE_LAW.mean ** m
    values = np.exp(-u * normalized)
    exact = w_laplace_conditioned(FINITE_LAW, u).value
    # Z_m / mu^m differs from W by O(mu^(-m/2)), which adds a small bias on top of the sampling error.
    assert abs(values.mean() - exact) <= 4 * values.std(ddof=1) / math.sqrt(size) + 0.005


def test_order_statistics_with_multiplicity():
    sample = PointSample.from_atoms([(3., 2), (1., 1), (-2., 5)], window=0.1)
    ext = order_statistics(sample, 3, hidden=0)
    np.testing.assert_array_equal(ext.order_stats, [3., 3., 1.])
    np.testing.assert_array_equal(ext.gaps, [0., 2.])
    assert ext.minimum == -2.
    assert not ext.censored.any()
    assert not ext.shortfall


def test_order_statistics_censored_by_window():
    sample = PointSample.from_atoms([(2., 1)], window=0.1)
    ext = order_statistics(sample, 3, hidden=math.inf)
    np.testing.assert_array_equal(ext.order_stats, [2., 0.1, 0.1])
    np.testing.assert_array_equal(ext.censored, [False, True, True])
    assert ext.minimum == -0.1 and ext.minimum_censored


def test_order_statistics_shortfall():
    sample = PointSample.from_atoms([(2., 1), (-1., 1)])
    ext = order_statistics(sample, 3, hidden=0)
    np.testing.assert_array_equal(ext.order_stats, [2., -1.])
    assert ext.shortfall


def test_extremes_of_replicate(rng):
    rep = simulate_replicate(GEOMETRIC, ONE_SIDED, 6, rng=rng)
    ext = extremes(rep, 3)
    assert np.all(np.diff(ext.order_stats) <= 0)
    assert ext.order_stats[0] == rep.positions.locations.max()


def test_simulate_population_conditioned(rng):
    populations = simulate_population(FINITE_LAW, 4, 500, rng)
    assert np.all(populations > 0)
    unconditioned = simulate_population(FINITE_LAW, 4, 500, rng, conditioned=False)
    assert np.any(unconditioned == 0)


@pytest.mark.parametrize('offspring', [GEOMETRIC, FINITE_LAW])
def test_population_martingale_mean(offspring, rng):
    # Both laws have Var(W) = 1, so the standard error of the mean is 1 / sqrt(size).
    size = 4000
    populations = simulate_population(offspring, 10, size, rng, conditioned=False)
    normalized = populations / offspring.mean ** 10
    assert abs(normalized.mean() - 1.) < 4 / math.sqrt(size)


def test_replicates_are_reproducible_and_thread_independent():
    serial = simulate_replicates(GEOMETRIC, TWO_SIDED, 4, 12, master_seed=3)
    parallel = simulate_replicates(GEOMETRIC, TWO_SIDED, 4, 12, master_seed=3, threads=2)
    assert [outcome.replicate_id for outcome in serial] == list(range(12))
    for a, b in zip(serial, parallel):
        np.testing.assert_array_equal(a.replicate.positions.locations, b.replicate.positions.locations)


def test_replicate_failures_are_recorded():
    outcomes = simulate_replicates(BINARY, ONE_SIDED, 6, 3, master_seed=0, caps=SimCaps(population=10))
    assert all(outcome.replicate is None for outcome in outcomes)
    assert outcomes[0].error['generation'] == 4
