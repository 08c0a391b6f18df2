import math
from dataclasses import dataclass

import numpy as np

from utils.errors import DomainError

# Bisection in log space stops once the bracket is this narrow, i.e. a relative tolerance on x.
LOG_BISECTION_TOL = 1e-13
_LOG_NORM = math.log(math.e + 1)


@dataclass(frozen=True)
class StepDistribution:
    """
    Two-sided step law with P(|X| > x) = (x / x_m)^(-alpha) for x >= x_m, optionally
    perturbed by the slowly varying factor (log(e + x / x_m) / log(e + 1))^beta.
    The sign is independent of the magnitude and positive with probability p.
    """
    alpha: float
    p: float
    q: float = None
    x_m: float = 1.
    beta: float = 0.

    def __post_init__(self):
        if self.q is None:
            object.__setattr__(self, 'q', 1 - self.p)
        if not self.alpha > 0:
            raise DomainError(f'alpha must be positive, got {self.alpha}')
        if self.p < 0 or self.q < 0 or abs(self.p + self.q - 1) > 1e-12:
            raise DomainError(f'Tail balance weights must be non-negative and sum to 1, got p={self.p}, q={self.q}')
        if not self.x_m > 0:
            raise DomainError(f'x_m must be positive, got {self.x_m}')
        if self.beta > self.alpha:
            # A larger exponent makes the perturbed tail increase just above x_m.
            raise DomainError(f'beta={self.beta} may not exceed alpha={self.alpha}')

    @classmethod
    def from_config(cls, spec):
        return cls(alpha=float(spec['alpha']), p=float(spec['p']),
                   q=None if spec.get('q') is None else float(spec['q']),
                   x_m=float(spec.get('x_m', 1.)), beta=float(spec.get('beta', 0.)))

    def to_config(self):
        return {'alpha': self.alpha, 'p': self.p, 'q': self.q, 'x_m': self.x_m, 'beta': self.beta}

    @property
    def is_pareto(self):
        return self.beta == 0

    @property
    def nu(self):
        return NuAlpha(alpha=self.alpha, p=self.p, q=self.q)


@dataclass(frozen=True)
class NuAlpha:
    """
    Limit measure with density alpha p x^(-alpha-1) on (0, inf) and alpha q |x|^(-alpha-1) on (-inf, 0).
    """
    alpha: float
    p: float
    q: float

    def upper_tail(self, a):
        """ Mass of (a, inf]. """
        return self.p * a ** -self.alpha

    def lower_tail(self, a):
        """ Mass of [-inf, -a). """
        return self.q * a ** -self.alpha

    def interval_mass(self, interval):
        if interval.distance_from_zero <= 0:
            raise DomainError(f'{interval} touches the origin, where the limit measure has infinite mass.')
        if interval.is_positive:
            return self.p * (_power(interval.lo, -self.alpha) - _power(interval.hi, -self.alpha))
        return self.q * (_power(-interval.hi, -self.alpha) - _power(-interval.lo, -self.alpha))


def _power(x, exponent):
    return 0. if math.isinf(x) else x ** exponent


def nu_mass(nu, sets):
    """
    Exact mass of a finite union of disjoint intervals under the limit measure.

    Args:
        nu (NuAlpha): Limit measure.
        sets (Interval or iterable of Interval): Intervals bounded away from 0.
    """
    if hasattr(sets, 'lo'):
        sets = [sets]
    return float(sum(nu.interval_mass(interval) for interval in sets))


def tail(dist, x):
    """
    P(|X| > x), vectorised over x.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.maximum(x / dist.x_m, 1.)
    value = y ** -dist.alpha
    if not dist.is_pareto:
        value = value * (np.log(np.e + y) / _LOG_NORM) ** dist.beta
    return np.where(x < dist.x_m, 1., value)


def _log_tail(dist, log_y):
    value = -dist.alpha * log_y
    if not dist.is_pareto:
        value = value + dist.beta * (np.log(np.log(np.e + np.exp(log_y))) - math.log(_LOG_NORM))
    return value


def _bisect_log_tail(dist, targets):
    """
    Upper end of a bracket of the solution of tail(x) = target, target in (0, 1], in log(x / x_m).
    The returned point always satisfies tail(x) <= target.
    """
    log_targets = np.log(np.asarray(targets, dtype=np.float64))
    lo = np.zeros_like(log_targets)
    hi = -log_targets / dist.alpha + 1.
    while True:
        too_low = _log_tail(dist, hi) > log_targets
        if not np.any(too_low):
            break
        hi = np.where(too_low, 2 * hi, hi)

    while np.any(hi - lo > LOG_BISECTION_TOL):
        mid = (lo + hi) / 2
        above = _log_tail(dist, mid) > log_targets
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return hi


def tail_inverse(dist, u):
    """
    The x with P(|X| > x) = u, for u in (0, 1].
    """
    u = np.asarray(u, dtype=np.float64)
    if np.any((u <= 0) | (u > 1)):
        raise DomainError('The tail is only inverted on (0, 1].')
    if dist.is_pareto:
        return dist.x_m * u ** (-1 / dist.alpha)
    return dist.x_m * np.exp(_bisect_log_tail(dist, u))


def sample_steps(dist, size, rng):
    """
    Draws `size` steps by inverse transform on the magnitude and an independent sign.
    """
    u = 1 - rng.random(size)  # In (0, 1], so magnitudes stay finite.
    magnitudes = tail_inverse(dist, u)
    signs = np.where(rng.random(size) < dist.p, 1., -1.)
    return signs * magnitudes


def sample_step(dist, rng):
    return float(sample_steps(dist, 1, rng)[0])


def scaling_constant(dist, mu, n):
    """
    b_n = inf{x : mu^n P(|X| > x) <= 1}.
    """
    if not mu > 1:
        raise DomainError(f'mu must exceed 1, got {mu}')
    if n < 1:
        raise DomainError(f'n must be at least 1, got {n}')
    if dist.is_pareto:
        return dist.x_m * mu ** (n / dist.alpha)
    log_y = _bisect_log_tail(dist, np.exp(-n * math.log(mu)))
    return float(dist.x_m * np.exp(log_y))
