import math
from dataclasses import dataclass

import numpy as np

from utils.errors import DomainError


@dataclass(frozen=True)
class Interval:
    """
    A one-sided interval of the punctured real line.

    Intervals on the positive side are read as (lo, hi] and those on the negative side as [lo, hi),
    so that (x, inf] and [-inf, -x) are the natural upper and lower half-lines.
    An interval may not contain points of both signs.
    """
    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        object.__setattr__(self, 'lo', lo)
        object.__setattr__(self, 'hi', hi)
        if math.isnan(lo) or math.isnan(hi) or not lo < hi:
            raise DomainError(f'Interval bounds must satisfy lo < hi, got ({lo}, {hi}).')
        if lo < 0 < hi:
            raise DomainError(f'Interval ({lo}, {hi}) straddles the origin.')

    @classmethod
    def parse(cls, pair):
        """
        Builds an interval from a [lo, hi] pair. Strings such as 'inf' and '-inf' are accepted.
        """
        lo, hi = pair
        return cls(float(lo), float(hi))

    @classmethod
    def above(cls, x):
        return cls(x, math.inf)

    @classmethod
    def below(cls, x):
        return cls(-math.inf, x)

    @property
    def is_positive(self):
        return self.lo >= 0

    @property
    def distance_from_zero(self):
        return self.lo if self.is_positive else -self.hi

    def contains(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.is_positive:
            return (x > self.lo) & (x <= self.hi)
        return (x >= self.lo) & (x < self.hi)

    def scaled(self, a):
        """ The image a * I of the interval, for a > 0. """
        if not a > 0:
            raise DomainError(f'Scale factor must be positive, got {a}')
        return Interval(self.lo * a, self.hi * a)

    def to_list(self):
        return [self.lo, self.hi]

    def __str__(self):
        if self.is_positive:
            return f'({self.lo:g}, {self.hi:g}]'
        return f'[{self.lo:g}, {self.hi:g})'


def parse_intervals(pairs):
    return [Interval.parse(pair) for pair in pairs]


def check_outside_window(intervals, window):
    """
    Raises DomainError unless every interval lies in {|x| > window}.
    """
    for interval in intervals:
        if interval.distance_from_zero < window or interval.distance_from_zero <= 0:
            raise DomainError(f'{interval} reaches into the discarded window |x| <= {window}.')


def mirrored(intervals):
    """ Appends the reflections of the given positive intervals onto the negative side. """
    intervals = list(intervals)
    return intervals + [Interval(-interval.hi, -interval.lo) for interval in intervals if interval.is_positive]
