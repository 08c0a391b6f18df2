import math

import numpy as np
import pytest

from data.intervals import Interval, check_outside_window, mirrored, parse_intervals
from data.point_sample import PointSample, StepFunction
from utils.errors import DomainError


@pytest.mark.parametrize('lo, hi', [(-1., 1.), (2., 1.), (1., 1.), (math.nan, 1.)])
def test_invalid_intervals(lo, hi):
    with pytest.raises(DomainError):
        Interval(lo, hi)


def test_interval_endpoint_convention():
    positive = Interval(1., 2.)
    negative = Interval(-2., -1.)
    np.testing.assert_array_equal(positive.contains([1., 1.5, 2.]), [False, True, True])
    np.testing.assert_array_equal(negative.contains([-2., -1.5, -1.]), [True, True, False])


def test_parse_intervals_accepts_infinity_strings():
    intervals = parse_intervals([[1, 'inf'], ['-inf', -0.5]])
    assert intervals[0] == Interval.above(1.)
    assert intervals[1] == Interval.below(-0.5)
    assert intervals[1].distance_from_zero == 0.5


def test_mirrored():
    assert mirrored([Interval(1., 2.)]) == [Interval(1., 2.), Interval(-2., -1.)]


def test_check_outside_window():
    check_outside_window([Interval.above(0.5)], 0.5)
    with pytest.raises(DomainError):
        check_outside_window([Interval(0.2, 1.)], 0.5)


def test_point_sample_validation():
    with pytest.raises(DomainError):
        PointSample([0.01, 2.], [1, 1], window=0.05)
    with pytest.raises(DomainError):
        PointSample([2.], [0])
    with pytest.raises(DomainError):
        PointSample([2., 3.], [1])


def test_point_sample_is_read_only():
    sample = PointSample.from_atoms([(1.5, 2), (-3., 1)])
    with pytest.raises(ValueError):
        sample.locations[0] = 0.


def test_counts_with_multiplicity():
    sample = PointSample.from_atoms([(1.5, 2), (3., 1), (-3., 4)], window=0.1)
    assert sample.total == 7
    assert sample.counts([Interval.above(1.), Interval(1., 2.), Interval.below(-1.)]) == [3, 2, 4]
    np.testing.assert_array_equal(np.sort(sample.expanded()), [-3., -3., -3., -3., 1.5, 1.5, 3.])


def test_counts_reject_sets_inside_window():
    sample = PointSample.from_atoms([(1.5, 1)], window=0.5)
    with pytest.raises(DomainError):
        sample.counts([Interval(0.1, 1.)])


def test_windowed_from_and_restrict():
    sample = PointSample.windowed_from([0.01, -0.2, 0.7, 2.], [1, 1, 3, 1], window=0.05)
    assert sample.atoms() == [(-0.2, 1), (0.7, 3), (2., 1)]
    restricted = sample.restrict(0.5)
    assert restricted.atoms() == [(0.7, 3), (2., 1)]
    with pytest.raises(DomainError):
        restricted.restrict(0.1)


def test_step_function_integral():
    g = StepFunction.from_config([[1., 2., 0.5], [2., 'inf', 1.], ['-inf', -1., 0.7]])
    sample = PointSample.from_atoms([(1.5, 2), (3., 1), (-3., 1), (0.5, 10)])
    assert sample.integrate(g) == pytest.approx(2 * 0.5 + 1. + 0.7)
    assert g.support_distance == 1.
    assert not g.is_zero


@pytest.mark.parametrize('pieces', [
    [[1., 2., -0.5]],
    [[0., 1., 1.]],
])
def test_invalid_step_functions(pieces):
    with pytest.raises(DomainError):
        StepFunction.from_config(pieces)


def test_scaled_step_function():
    g = StepFunction.from_config([[1., 2., 0.5]])
    scaled = g.scaled(2.)
    x = np.array([1.5, 3., 4.5])
    np.testing.assert_allclose(scaled(x), g(x / 2.))


def test_infinite_level_kills():
    g = StepFunction.indicator(Interval.above(1.), math.inf)
    assert math.exp(-PointSample.from_atoms([(2., 1)]).integrate(g)) == 0.
    assert PointSample.empty().integrate(g) == 0.


def test_level_sets_add_overlapping_pieces():
    g = StepFunction.from_config([[1., 'inf', 1.], [2., 'inf', 1.], [-3., -1., 0.5], [-2., -1., 0.]])
    assert g.level_sets() == [(Interval(-3., -1.), 0.5), (Interval(1., 2.), 1.), (Interval(2., math.inf), 2.)]
    x = np.array([-2.5, 1.5, 3., 0.5])
    levels = StepFunction(tuple(g.level_sets()))
    np.testing.assert_allclose(levels(x), g(x))
