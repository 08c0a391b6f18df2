import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from data.intervals import Interval, check_outside_window
from utils.errors import DomainError


def _frozen_array(values, dtype):
    arr = np.array(values, dtype=dtype).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PointSample:
    """
    Finite multiset of atoms (location, multiplicity) on {|x| > window}.
    This is the common currency of simulated, one-jump and limit processes.
    """
    locations: np.ndarray
    multiplicities: np.ndarray
    window: float = 0.
    w: Optional[float] = None  # Mixing variable of the limit samplers, when known.

    def __post_init__(self):
        locations = _frozen_array(self.locations, np.float64)
        multiplicities = _frozen_array(self.multiplicities, np.int64)
        object.__setattr__(self, 'locations', locations)
        object.__setattr__(self, 'multiplicities', multiplicities)
        object.__setattr__(self, 'window', float(self.window))

        if locations.shape != multiplicities.shape:
            raise DomainError('Every atom needs exactly one multiplicity.')
        if self.window < 0:
            raise DomainError(f'Window must be non-negative, got {self.window}')
        if np.any(multiplicities < 1):
            raise DomainError('Multiplicities must be at least 1.')
        if np.any(np.abs(locations) <= self.window):
            raise DomainError(f'Atoms must lie outside the window |x| <= {self.window}.')

    @classmethod
    def from_atoms(cls, atoms, window=0., w=None):
        atoms = list(atoms)
        locations = [loc for loc, _ in atoms]
        multiplicities = [mult for _, mult in atoms]
        return cls(locations, multiplicities, window=window, w=w)

    @classmethod
    def empty(cls, window=0., w=None):
        return cls([], [], window=window, w=w)

    @classmethod
    def windowed_from(cls, locations, multiplicities, window, w=None):
        """ Drops atoms with |location| <= window before construction. """
        locations = np.asarray(locations, dtype=np.float64)
        multiplicities = np.asarray(multiplicities, dtype=np.int64)
        keep = np.abs(locations) > window
        return cls(locations[keep], multiplicities[keep], window=window, w=w)

    def __len__(self):
        return self.locations.size

    @property
    def total(self):
        return int(self.multiplicities.sum())

    def atoms(self):
        return list(zip(self.locations.tolist(), self.multiplicities.tolist()))

    def expanded(self):
        """ Locations repeated by multiplicity. """
        return np.repeat(self.locations, self.multiplicities)

    def restrict(self, window):
        if window < self.window:
            raise DomainError(f'Cannot widen the window from {self.window} back to {window}.')
        return PointSample.windowed_from(self.locations, self.multiplicities, window, w=self.w)

    def count(self, interval):
        return int(self.multiplicities[interval.contains(self.locations)].sum())

    def counts(self, intervals):
        """
        N(A) for each interval A, which must lie outside the window.
        """
        intervals = list(intervals)
        check_outside_window(intervals, self.window)
        return [self.count(interval) for interval in intervals]

    def integrate(self, g):
        """ Sum of multiplicity * g(location). """
        return float(np.dot(self.multiplicities, g(self.locations))) if len(self) else 0.

    def __repr__(self):
        return f'PointSample(atoms={len(self)}, total={self.total}, window={self.window:g})'


@dataclass(frozen=True)
class StepFunction:
    """
    Non-negative step function sum_j c_j 1_{I_j} over intervals bounded away from 0.
    A level of inf kills every configuration with a point in its interval.
    """
    pieces: tuple = field(default_factory=tuple)

    def __post_init__(self):
        pieces = tuple((piece if isinstance(piece, Interval) else Interval.parse(piece), float(value))
                       for piece, value in self.pieces)
        object.__setattr__(self, 'pieces', pieces)
        for interval, value in pieces:
            if math.isnan(value) or value < 0:
                raise DomainError(f'Step function values must be non-negative, got {value} on {interval}.')
            if interval.distance_from_zero <= 0:
                raise DomainError(f'{interval} is not bounded away from the origin.')

    @classmethod
    def from_config(cls, pieces):
        """
        Args:
            pieces (list): [lo, hi, value] triples.
        """
        return cls(tuple((Interval(lo, hi), value) for lo, hi, value in pieces))

    @classmethod
    def indicator(cls, interval, value=1.):
        return cls(((interval, value),))

    def to_config(self):
        return [[interval.lo, interval.hi, value] for interval, value in self.pieces]

    @property
    def is_zero(self):
        return all(value == 0 for _, value in self.pieces)

    @property
    def support_distance(self):
        distances = [interval.distance_from_zero for interval, value in self.pieces if value > 0]
        return min(distances) if distances else math.inf

    def level_sets(self):
        """
        The same function as disjoint (interval, level) pieces with positive levels.
        Overlapping pieces add up, so g = sum_j c_j 1_{I_j} is constant on each returned interval.
        """
        level_sets = list()
        for positive in (False, True):
            pieces = [(interval, value) for interval, value in self.pieces
                      if value > 0 and interval.is_positive == positive]
            breaks = sorted({bound for interval, _ in pieces for bound in (interval.lo, interval.hi)})
            for lo, hi in zip(breaks, breaks[1:]):
                level = sum(value for interval, value in pieces if interval.lo <= lo and hi <= interval.hi)
                if level > 0:
                    level_sets.append((Interval(lo, hi), level))
        return level_sets

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        result = np.zeros_like(x)
        for interval, value in self.pieces:
            if value > 0:
                result = result + np.where(interval.contains(x), value, 0.)
        return result

    def scaled(self, y):
        """ The function x -> g(x / y). """
        return StepFunction(tuple((interval.scaled(y), value) for interval, value in self.pieces))


@dataclass(frozen=True, eq=False)
class SimReplicate:
    """
    One survived run of the branching random walk up to generation n.
    """
    n: int
    positions: PointSample
    population: int
    w_proxy: float
    restarts: int
    b_n: float
    one_jump: Optional[PointSample] = None

    def __post_init__(self):
        assert self.population > 0, 'Replicates are conditioned on survival.'
