import math

import numpy as np
import pytest

from eval.limit_formulas import (gap_survival, joint_order_cdf, maxima_cdf, minima_cdf, order_stat_cdf,
                                 xi_weight, formula_table)
from eval.partitions import partitions
from models.limit_model import build_limit_model
from models.offspring import OffspringDistribution
from models.steps import StepDistribution
from sim.limit_process import LimitSampleConfig, order_statistics_batch, sample_limit_batch
from utils.errors import DomainError, ResourceError


@pytest.mark.parametrize('x', [0.5, 1., 2., 4., 8.])
def test_geometric_maxima_law(geometric_model, x):
    # W ~ Exp(1) and r = 2, so the law is 1 / (1 + 2 / x).
    assert maxima_cdf(geometric_model, x) == pytest.approx(1 / (1 + 2 / x), abs=1e-10)


@pytest.mark.parametrize('x', [0.5, 1., 2.])
def test_regular_maxima_law(binary_model, x):
    assert maxima_cdf(binary_model, x) == pytest.approx(math.exp(-2 / x), rel=1e-10)


def test_minima_law(two_sided_model):
    assert minima_cdf(two_sided_model, 1.) == pytest.approx(1 / (1 + 1.), abs=1e-10)


def test_listed_spot_values(binary_model):
    order = order_stat_cdf(binary_model, 2, 1., void='listed')
    assert abs(order.value - (math.exp(-2) + math.exp(-1))) <= 1e-12
    assert order.method == 'exact-constant'
    joint = joint_order_cdf(binary_model, 1, 1., 2., void='listed')
    assert abs(joint.value - (math.exp(-2) + 0.5 * math.exp(-1.5))) <= 1e-12


def test_second_maximum_with_all_voids(binary_model):
    # No cluster in (1, inf], or one cluster of size one: e^-2 + 2 * (1/2) * e^-2.
    value = order_stat_cdf(binary_model, 2, 1.).value
    assert value == pytest.approx(2 * math.exp(-2), rel=1e-10)


@pytest.mark.parametrize('x', [0.5, 1., 3.])
def test_order_stat_cdf_increases_with_k(geometric_model, x):
    values = [order_stat_cdf(geometric_model, k, x).value for k in range(1, 6)]
    assert np.all(np.diff(values) >= -1e-12)
    assert values[-1] <= 1. + 1e-12


def test_xi_weights_sum_to_one(binary_model):
    total = sum(xi_weight(binary_model, l, 0.01, 1.) for l in range(0, 21))
    assert 0.995 < total <= 1. + 1e-12


def test_monte_carlo_w_agrees_with_exact(geometric_model, rng):
    w = rng.exponential(1., size=200000)
    exact = order_stat_cdf(geometric_model, 3, 1.5)
    estimate = order_stat_cdf(geometric_model, 3, 1.5, w=w)
    assert estimate.method == 'monte-carlo'
    assert abs(estimate.value - exact.value) <= 4 * estimate.stderr


def test_unknown_w_law_needs_samples():
    model = build_limit_model(OffspringDistribution.finite([(0, 0.25), (2, 0.75)]),
                              StepDistribution(alpha=1., p=1.))
    with pytest.raises(DomainError):
        order_stat_cdf(model, 2, 1.)
    with pytest.raises(DomainError):
        order_stat_cdf(model, 2, 1., w=[1., -1.])


@pytest.mark.parametrize('call, error', [
    (lambda model: order_stat_cdf(model, 0, 1.), DomainError),
    (lambda model: order_stat_cdf(model, 21, 1.), ResourceError),
    (lambda model: order_stat_cdf(model, 1, 0.), DomainError),
    (lambda model: order_stat_cdf(model, 1, 1., void='some'), DomainError),
    (lambda model: joint_order_cdf(model, 1, 2., 1.), DomainError),
    (lambda model: gap_survival(model, 1, -1.), DomainError),
])
def test_domain_errors(binary_model, call, error):
    with pytest.raises(error):
        call(binary_model)


def test_joint_law_limits(binary_model):
    # For v far above u the joint law reduces to the law of the (k+1)-th maximum.
    joint = joint_order_cdf(binary_model, 1, 1., 1e8).value
    assert joint == pytest.approx(order_stat_cdf(binary_model, 2, 1.).value, abs=1e-6)


def test_gap_survival_at_zero(binary_model):
    assert gap_survival(binary_model, 1, 0.).value == 1.


def test_gap_survival_bounds_and_monte_carlo(binary_model):
    cfg = LimitSampleConfig(model=binary_model, window=0.25)
    samples = [sample for _, sample in sample_limit_batch(cfg, 'cox', 5000, master_seed=2)]
    top = order_statistics_batch(samples, 2)
    result = gap_survival(binary_model, 1, 1., mc_gaps=top[:, 0] - top[:, 1])
    assert 0 <= result.lower <= result.value <= result.upper <= 1
    assert result.error < 0.01
    assert not result.flagged


def test_formula_table_rows(binary_model):
    rows = formula_table(binary_model, ks=[1, 2], xs=[1., 2.], joint_pairs=[(1., 2.)], gap_ts=[0.5])
    statistics = [row['statistic'] for row in rows]
    assert statistics.count('order_stat') == 4
    assert statistics.count('joint_order') == 2
    assert statistics.count('gap_survival') == 2
    assert all(0 <= row['value'] <= 1 + 1e-12 for row in rows)


@pytest.mark.parametrize('l, count', [(1, 1), (2, 2), (3, 3), (4, 5), (5, 7), (6, 11), (7, 15), (8, 22), (9, 30),
                                      (10, 42)])
def test_partition_counts(l, count):
    found = partitions(l)
    assert len(found) == count
    assert all(partition.total == l for partition in found)


def test_partition_form_and_order():
    found = partitions(4)
    assert found == sorted(found)
    assert all(list(partition.parts) == sorted(partition.parts) for partition in found)
    assert ((1, 4),) in [partition.parts for partition in found]


def test_partition_limits():
    with pytest.raises(DomainError):
        partitions(0)
    with pytest.raises(ResourceError):
        partitions(61)
