import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.signal import fftconvolve

from utils.errors import DomainError, ResourceError

logger = logging.getLogger(__name__)

GEOMETRIC = 'geometric'
REGULAR = 'regular'
FINITE = 'finite'

DEFAULT_SUPPORT_CAP = 10 ** 6
DEFAULT_SERIES_TOL = 1e-10
FIXED_POINT_TOL = 1e-14

# Above this length np.convolve is slower than the FFT route.
_FFT_THRESHOLD = 512


@dataclass(frozen=True)
class OffspringDistribution:
    """
    Law of the number of children Z_1 of one particle.

    Three families are supported:
        geometric(b): P(Z_1 = k) = b (1 - b)^(k - 1), k >= 1, so mu = 1 / b and extinction is impossible.
        regular(d): Z_1 = d deterministically.
        finite(pmf): any law with finite support given as (k, prob) pairs.

    Use the class methods to build instances. Validation happens on construction,
    so every instance is supercritical with probabilities summing to 1.
    """
    kind: str
    b: float = None
    d: int = None
    support: tuple = ()
    probs: tuple = ()

    def __post_init__(self):
        if self.kind == GEOMETRIC:
            if self.b is None or not (0 < self.b < 1):
                raise DomainError(f'Geometric parameter b must lie in (0, 1), got {self.b}')
        elif self.kind == REGULAR:
            if self.d is None or int(self.d) != self.d or self.d < 2:
                raise DomainError(f'Regular trees need an integer d >= 2, got {self.d}')
        elif self.kind == FINITE:
            support = np.asarray(self.support, dtype=np.int64)
            probs = np.asarray(self.probs, dtype=np.float64)
            if support.ndim != 1 or support.size == 0 or support.size != probs.size:
                raise DomainError('Finite support laws need matching, non-empty support and probability lists.')
            if np.any(support < 0) or len(np.unique(support)) != support.size:
                raise DomainError('Support points must be distinct non-negative integers.')
            if np.any(probs < 0):
                raise DomainError('Probabilities must be non-negative.')
            if abs(probs.sum() - 1) > 1e-12:
                raise DomainError(f'Probabilities sum to {probs.sum()!r}, not 1.')
        else:
            raise DomainError(f'Unknown offspring kind `{self.kind}`.')

        if self.mean <= 1:
            raise DomainError(f'Offspring mean {self.mean} is not supercritical.')

    @classmethod
    def geometric(cls, b):
        return cls(kind=GEOMETRIC, b=float(b))

    @classmethod
    def regular(cls, d):
        return cls(kind=REGULAR, d=int(d))

    @classmethod
    def finite(cls, pmf):
        """
        Args:
            pmf (iterable[tuple[int, float]]): (number of children, probability) pairs.
        """
        pairs = sorted((int(k), float(prob)) for k, prob in pmf)
        return cls(kind=FINITE, support=tuple(k for k, _ in pairs), probs=tuple(prob for _, prob in pairs))

    @classmethod
    def from_config(cls, spec):
        spec = dict(spec)
        kind = spec.pop('kind', None)
        if kind == GEOMETRIC:
            return cls.geometric(spec['b'])
        elif kind == REGULAR:
            return cls.regular(spec['d'])
        elif kind == FINITE:
            return cls.finite(spec['pmf'])
        raise DomainError(f'Unknown offspring kind `{kind}`.')

    def to_config(self):
        if self.kind == GEOMETRIC:
            return {'kind': GEOMETRIC, 'b': self.b}
        elif self.kind == REGULAR:
            return {'kind': REGULAR, 'd': self.d}
        return {'kind': FINITE, 'pmf': [[k, prob] for k, prob in zip(self.support, self.probs)]}

    @property
    def mean(self):
        if self.kind == GEOMETRIC:
            return 1 / self.b
        elif self.kind == REGULAR:
            return float(self.d)
        return float(np.dot(self.support, self.probs))

    def pgf(self, s):
        s = np.asarray(s, dtype=np.float64)
        if np.any((s < 0) | (s > 1)):
            raise DomainError('The generating function is only evaluated on [0, 1].')

        if self.kind == GEOMETRIC:
            value = self.b * s / (1 - (1 - self.b) * s)
        elif self.kind == REGULAR:
            value = s ** self.d
        else:
            ks = np.asarray(self.support)
            value = np.sum(np.asarray(self.probs) * s[..., None] ** ks, axis=-1)
        return value

    def pgf_complement(self, t):
        """
        1 - f(1 - t) without cancellation, for t in [0, 1].
        Iterating this map instead of f keeps full relative precision near s = 1.
        """
        t = np.asarray(t, dtype=np.float64)
        if self.kind == GEOMETRIC:
            return t / (self.b + (1 - self.b) * t)

        with np.errstate(divide='ignore', invalid='ignore'):
            log_s = np.log1p(-t)
            if self.kind == REGULAR:
                return -np.expm1(self.d * log_s)

            ks = np.asarray(self.support)
            probs = np.asarray(self.probs)
            terms = -np.expm1(ks * log_s[..., None])
            terms = np.where(ks == 0, 0., terms)  # 0 * log(0) is nan, but those children never die out.
        return np.sum(probs * terms, axis=-1)

    def sample_counts(self, size, rng):
        """
        Number of children for each of `size` particles.
        """
        if self.kind == GEOMETRIC:
            return rng.geometric(self.b, size=size)
        elif self.kind == REGULAR:
            return np.full(size, self.d, dtype=np.int64)
        return rng.choice(np.asarray(self.support), size=size, p=np.asarray(self.probs))

    def sum_offspring(self, population, rng):
        """
        Size of the next generation for each entry of `population`, without materialising particles.
        """
        population = np.asarray(population, dtype=np.int64)
        if self.kind == GEOMETRIC:
            # A sum of n geometric variables on {1, 2, ...} is n plus a negative binomial count of failures.
            failures = rng.negative_binomial(np.maximum(population, 1), self.b)
            return np.where(population > 0, population + failures, 0)
        elif self.kind == REGULAR:
            return population * self.d

        counts = rng.multinomial(population, np.asarray(self.probs))
        return counts @ np.asarray(self.support, dtype=np.int64)

    def pmf_array(self, y_max):
        """
        P(Z_1 = k) for k = 0 .. y_max as a dense array.
        """
        arr = np.zeros(y_max + 1)
        if self.kind == GEOMETRIC:
            ks = np.arange(1, y_max + 1)
            arr[1:] = self.b * np.exp((ks - 1) * np.log1p(-self.b))
        elif self.kind == REGULAR:
            if self.d <= y_max:
                arr[self.d] = 1.
        else:
            for k, prob in zip(self.support, self.probs):
                if k <= y_max:
                    arr[k] += prob
        return arr

    def describe(self):
        return f'{self.kind}({self.to_config()})'


class GenerationPmf(NamedTuple):
    pmf: dict
    omitted: float


class SeriesValue(NamedTuple):
    value: float
    terms: int
    bound: float


class ClusterSizeLaw(NamedTuple):
    pmf: dict
    tail_mass: float
    y_max: int
    terms: int
    bound: float


class LaplaceValue(NamedTuple):
    value: object
    error: object
    degraded: bool


def pgf_eval(dist, s):
    value = dist.pgf(s)
    return float(value) if np.ndim(value) == 0 else value


def pgf_complement(dist, t):
    return dist.pgf_complement(t)


def extinction_prob(dist, max_iter=10 ** 6):
    """
    Smallest fixed point of the generating function, by iterating s <- f(s) from s = 0.
    """
    s = 0.
    for _ in range(max_iter):
        s_next = float(dist.pgf(s))
        if abs(s_next - s) < FIXED_POINT_TOL:
            return s_next
        s = s_next
    logger.warning(f'Extinction iteration for {dist.describe()} stopped after {max_iter} steps.')
    return s


def survival_probs(dist, i_max):
    """
    P(Z_i > 0) for i = 0 .. i_max, by exact iteration of the generating function.
    """
    probs = np.empty(i_max + 1)
    s = 0.
    for i in range(i_max + 1):
        probs[i] = 1 - s
        s = float(dist.pgf(s))
    return probs


def survival_prob(dist, i):
    if i < 0:
        raise DomainError('Generation index must be non-negative.')
    return float(survival_probs(dist, i)[-1])


def series_terms(mu, tol):
    """
    Smallest I with mu^(-I) / (mu - 1) < tol, which bounds sum_{i > I} mu^(-i) P(.) from above.
    """
    terms = max(0, math.ceil(math.log(1 / (tol * (mu - 1))) / math.log(mu)))
    while mu ** -terms / (mu - 1) >= tol:
        terms += 1
    return terms


def r_constant(dist, tol=DEFAULT_SERIES_TOL):
    if not (0 < tol <= 1e-8):
        raise DomainError(f'Series tolerance must lie in (0, 1e-8], got {tol}')
    mu = dist.mean
    terms = series_terms(mu, tol)
    weights = mu ** -np.arange(terms + 1, dtype=np.float64)
    value = float(np.sum(weights * survival_probs(dist, terms)))
    return SeriesValue(value=value, terms=terms, bound=mu ** -terms / (mu - 1))


def _convolve(a, b):
    if min(a.size, b.size) > _FFT_THRESHOLD:
        return np.clip(fftconvolve(a, b), 0., None)
    return np.convolve(a, b)


def compose_pmf(outer, inner, y_max=None):
    """
    Law of Y_1 + ... + Y_N where N has pmf `outer` and the Y_j are independent with pmf `inner`.
    Pmfs are dense arrays indexed by value. Truncating at y_max is exact on 0 .. y_max.
    """
    outer = np.asarray(outer, dtype=np.float64)
    inner = np.asarray(inner, dtype=np.float64)
    if y_max is not None:
        inner = inner[:y_max + 1]

    # Horner's scheme in the generating function of `inner`.
    result = np.array([outer[-1]])
    for coefficient in outer[-2::-1]:
        result = _convolve(result, inner)
        if y_max is not None:
            result = result[:y_max + 1]
        result[0] += coefficient
    return result


def _trim_tail(arr, budget):
    tail_sums = np.cumsum(arr[::-1])
    num_remove = int(np.searchsorted(tail_sums, budget, side='left'))
    num_remove = min(num_remove, arr.size - 1)
    return arr[:arr.size - num_remove]


def array_to_pmf(arr):
    values = np.flatnonzero(arr > 0)
    return {int(v): float(arr[v]) for v in values}


def pmf_to_array(pmf):
    arr = np.zeros(max(pmf) + 1 if pmf else 1)
    for value, prob in pmf.items():
        arr[value] += prob
    return arr


def generation_arrays(dist, i_max, y_max):
    """
    Yields P(Z_i = y), y = 0 .. y_max, for i = 0 .. i_max. Exact on the truncated range.
    """
    arr = np.zeros(y_max + 1)
    arr[1] = 1.
    yield arr
    if dist.kind == FINITE:
        z1 = dist.pmf_array(max(dist.support))
        for _ in range(i_max):
            arr = compose_pmf(z1, arr, y_max=y_max)
            arr = np.pad(arr, (0, y_max + 1 - arr.size))
            yield arr
    else:
        for i in range(1, i_max + 1):
            yield _closed_form_generation(dist, i, y_max)


def _closed_form_generation(dist, i, y_max):
    arr = np.zeros(y_max + 1)
    if dist.kind == GEOMETRIC:
        # Linear fractional iteration: Z_i is geometric with success probability b^i.
        prob = dist.b ** i
        ys = np.arange(1, y_max + 1)
        arr[1:] = prob * np.exp((ys - 1) * np.log1p(-prob))
    else:
        value = dist.d ** i
        if value <= y_max:
            arr[value] = 1.
    return arr


def generation_pmf(dist, i, tail_eps=1e-12, y_max=None, support_cap=DEFAULT_SUPPORT_CAP):
    """
    Exact law of Z_i, stored sparsely as {value: probability}.

    Args:
        dist (OffspringDistribution): Offspring law.
        i (int): Generation index.
        tail_eps (float): Upper bound on the total probability dropped from the right tail.
        y_max (int, optional): If given, the law is cut at y_max instead. The cut is exact below y_max.
        support_cap (int): Largest number of support points kept before giving up.

    Returns:
        GenerationPmf: the pmf and the omitted probability mass.
    """
    if i < 0:
        raise DomainError('Generation index must be non-negative.')
    if not (0 < tail_eps <= 1e-6):
        raise DomainError(f'tail_eps must lie in (0, 1e-6], got {tail_eps}')
    if i == 0:
        return GenerationPmf(pmf={1: 1.}, omitted=0.)

    if dist.kind == REGULAR:
        value = dist.d ** i
        if y_max is not None and value > y_max:
            return GenerationPmf(pmf={}, omitted=1.)
        return GenerationPmf(pmf={value: 1.}, omitted=0.)

    if dist.kind == GEOMETRIC:
        prob = dist.b ** i
        if y_max is None:
            length = math.ceil(math.log(tail_eps) / math.log1p(-prob))
            if length > support_cap:
                raise ResourceError(f'Generation {i} needs {length} support points; the cap is {support_cap}.',
                                    generation=i, support=length)
        else:
            length = y_max
        arr = _closed_form_generation(dist, i, length)
        return GenerationPmf(pmf=array_to_pmf(arr), omitted=float(math.exp(length * math.log1p(-prob))))

    z1 = dist.pmf_array(max(dist.support))
    arr = np.array([0., 1.])
    mu = dist.mean
    for generation in range(1, i + 1):
        arr = compose_pmf(z1, arr, y_max=y_max)
        if y_max is None:
            # Mass dropped here grows by at most a factor mu per remaining generation.
            if mu > 1:
                budget = tail_eps * (mu - 1) * mu ** (generation - i - 1)
            else:
                budget = tail_eps / i
            arr = _trim_tail(arr, budget)
        if arr.size > support_cap:
            raise ResourceError(f'Generation {generation} has {arr.size} support points; the cap is {support_cap}.',
                                generation=generation, support=arr.size)
    return GenerationPmf(pmf=array_to_pmf(arr), omitted=max(0., 1 - float(arr.sum())))


def gamma_pmf(dist, y_max=1024, tol=DEFAULT_SERIES_TOL):
    """
    Cluster size law gamma(y) = (1/r) sum_i mu^(-i) P(Z_i = y) for y = 1 .. y_max.
    The series in i is cut with the same remainder rule as `r_constant`, and r is the matching
    partial sum, so the table plus `tail_mass` adds up to one.
    """
    if y_max < 1:
        raise DomainError('y_max must be at least 1.')
    r = r_constant(dist, tol)
    mu = dist.mean

    total = np.zeros(y_max + 1)
    for i, arr in enumerate(generation_arrays(dist, r.terms, y_max)):
        total += mu ** -i * arr
    table = total[1:] / r.value

    pmf = {y: float(prob) for y, prob in enumerate(table, start=1) if prob > 0}
    tail_mass = max(0., 1 - float(table.sum()))
    return ClusterSizeLaw(pmf=pmf, tail_mass=tail_mass, y_max=y_max, terms=r.terms, bound=r.bound)


def kesten_stigum_moment(dist):
    """
    E[Z_1 log+ Z_1], finite for every supported family.
    """
    if dist.kind == REGULAR:
        return dist.d * math.log(dist.d)
    elif dist.kind == FINITE:
        ks = np.asarray(dist.support, dtype=np.float64)
        with np.errstate(divide='ignore', invalid='ignore'):
            terms = np.where(ks > 1, ks * np.log(ks), 0.)
        return float(np.dot(terms, dist.probs))

    # Geometric: the summand decays like k log k (1 - b)^k.
    y_max = 64
    while (1 - dist.b) ** y_max * y_max * math.log(y_max) > 1e-16:
        y_max *= 2
    ks = np.arange(2, y_max + 1)
    return float(np.sum(dist.pmf_array(y_max)[2:] * ks * np.log(ks)))


def max_laplace_depth(mu):
    # Keeps mu^n well inside the float range.
    return max(1, int(600 / math.log(mu)))


def w_laplace(dist, u, n_iter=60, tol=1e-10):
    """
    phi(u) = E[exp(-u W)] from phi_n(u) = f^(n)(exp(-u / mu^n)), iterated on the complement 1 - s.

    Returns:
        LaplaceValue: value, successive-iterate difference, and whether that difference exceeds `tol`.
    """
    u_arr = np.asarray(u, dtype=np.float64)
    if np.any(u_arr < 0):
        raise DomainError('The Laplace transform of W is evaluated at u >= 0 only.')
    if n_iter < 1:
        raise DomainError('n_iter must be at least 1.')

    log_mu = math.log(dist.mean)
    depth = min(n_iter, max_laplace_depth(dist.mean))

    def iterate(n):
        with np.errstate(divide='ignore'):
            t = -np.expm1(-np.exp(np.log(u_arr) - n * log_mu))
        for _ in range(n):
            t = dist.pgf_complement(t)
        return 1 - t

    value = iterate(depth)
    error = np.abs(value - iterate(depth - 1)) if depth > 1 else np.full_like(value, np.inf)
    degraded = bool(np.any(error > tol))
    if degraded:
        logger.warning(f'Laplace transform of W for {dist.describe()} did not settle within {depth} steps '
                       f'(max difference {np.max(error):.3e}).')

    if np.ndim(value) == 0:
        return LaplaceValue(value=float(value), error=float(error), degraded=degraded)
    return LaplaceValue(value=value, error=error, degraded=degraded)


def w_laplace_conditioned(dist, u, n_iter=60, tol=1e-10, p_e=None):
    """
    phi*(u) = E[exp(-u W) | survival] = (phi(u) - p_e) / (1 - p_e), since W = 0 exactly on extinction.
    """
    p_e = extinction_prob(dist) if p_e is None else p_e
    result = w_laplace(dist, u, n_iter=n_iter, tol=tol)
    value = (np.asarray(result.value) - p_e) / (1 - p_e)
    error = np.asarray(result.error) / (1 - p_e)
    if np.ndim(value) == 0:
        return LaplaceValue(value=float(value), error=float(error), degraded=result.degraded)
    return LaplaceValue(value=value, error=error, degraded=result.degraded)
