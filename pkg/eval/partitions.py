from collections import Counter
from functools import lru_cache
from typing import NamedTuple

from utils.errors import DomainError, ResourceError

MAX_PARTITION_SIZE = 60


class Partition(NamedTuple):
    """
    A partition of l written as distinct part sizes i_1 < i_2 < ... with multiplicities y_j,
    so that l = sum_j i_j y_j.
    """
    parts: tuple

    @property
    def total(self):
        return sum(size * mult for size, mult in self.parts)

    @property
    def num_parts(self):
        return sum(mult for _, mult in self.parts)


def int_partitions(l, pivot=1):
    """ Enumerates all integer partitions of l as non-decreasing tuples. """
    yield (l,)
    for i in range(pivot, l // 2 + 1):
        for rest in int_partitions(l - i, pivot=i):
            yield (i,) + rest


@lru_cache(maxsize=None)
def _partitions(l):
    collected = list()
    for raw in int_partitions(l):
        counter = Counter(raw)
        collected.append(Partition(parts=tuple(sorted(counter.items()))))
    return tuple(sorted(collected))


def partitions(l):
    """
    All partitions of l >= 1 in canonical ascending form and a fixed order.
    """
    if l < 1:
        raise DomainError(f'Partitions are enumerated for l >= 1, got {l}')
    if l > MAX_PARTITION_SIZE:
        raise ResourceError(f'Enumerating partitions of {l} exceeds the limit of {MAX_PARTITION_SIZE}.', l=l)
    return list(_partitions(l))
