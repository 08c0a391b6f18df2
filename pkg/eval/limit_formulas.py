import logging
import math
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

from eval.partitions import partitions
from models.offspring import GEOMETRIC, REGULAR
from utils.errors import DomainError, ResourceError

logger = logging.getLogger(__name__)

MAX_ORDER = 20

EXACT = 'exact'

# How the empty sizes of the cluster count are weighted in the partition sums.
VOID_ALL = 'all'
VOID_LISTED = 'listed'
VOID_MODES = (VOID_ALL, VOID_LISTED)


class FormulaValue(NamedTuple):
    value: object
    stderr: object
    method: str


class GapSurvival(NamedTuple):
    value: float
    error: float
    lower: float
    upper: float
    mc_value: float
    mc_stderr: float
    discrepancy: float
    flagged: bool


class WExpectation:
    """
    Expectation under the survival measure of sums of terms c W^m exp(-s W).

    Exact for W = 1 (regular trees) and W ~ Exp(1) (geometric offspring), where
    E[W^m exp(-s W)] = m! / (1 + s)^(m + 1). Otherwise a Monte Carlo average over given W samples.
    """

    def __init__(self, kind, samples=None):
        self.kind = kind
        self.samples = samples

    @classmethod
    def for_model(cls, model, w=None):
        if w is None or (isinstance(w, str) and w == EXACT):
            if model.offspring.kind == REGULAR:
                return cls('constant')
            elif model.offspring.kind == GEOMETRIC:
                return cls('exponential')
            raise DomainError(f'The law of W is not known in closed form for {model.offspring.describe()}; '
                              f'pass samples of W instead.')
        samples = np.asarray(w, dtype=np.float64).reshape(-1)
        if samples.size < 2:
            raise DomainError('At least two samples of W are needed for a Monte Carlo expectation.')
        if np.any(samples <= 0):
            raise DomainError('W samples must be positive: they represent W conditioned on survival.')
        return cls('samples', samples)

    @property
    def method(self):
        return {'constant': 'exact-constant', 'exponential': 'exact-exponential'}.get(self.kind, 'monte-carlo')

    def __call__(self, terms):
        """
        Returns:
            tuple: (value, standard error) of E*[sum_terms c W^m exp(-s W)].
        """
        if not terms:
            return 0., 0.

        if self.kind == 'constant':
            value = sum(coef * np.exp(-rate) for coef, _, rate in terms)
            return value, np.zeros_like(value)
        elif self.kind == 'exponential':
            value = sum(coef * np.exp(gammaln(power + 1) - (power + 1) * np.log1p(rate))
                        for coef, power, rate in terms)
            return value, np.zeros_like(value)

        shape = np.shape(np.broadcast_arrays(*[np.asarray(coef) for coef, _, _ in terms])[0])
        w = self.samples.reshape((-1,) + (1,) * len(shape))
        per_sample = sum(coef * w ** power * np.exp(-rate * w) for coef, power, rate in terms)
        value = per_sample.mean(axis=0)
        stderr = per_sample.std(axis=0, ddof=1) / math.sqrt(self.samples.size)
        return value, stderr


def _check_void(void):
    if void not in VOID_MODES:
        raise DomainError(f'Unknown void mode `{void}`; choose one of {VOID_MODES}.')


def _check_order(k):
    if k < 1:
        raise DomainError(f'k must be at least 1, got {k}')
    if k > MAX_ORDER:
        raise ResourceError(f'Order {k} exceeds the supported maximum {MAX_ORDER}.', k=k)


def _positive(x, name='x'):
    x = np.asarray(x, dtype=np.float64)
    if np.any(~(x > 0)):
        raise DomainError(f'{name} must be positive.')
    return x


def _output(value):
    return float(value) if np.ndim(value) == 0 else value


def xi_terms(model, l, mass, void=VOID_ALL):
    """
    xi_{l,A}(W) as exp-polynomial terms (coefficient, power of W, rate) for nu_alpha(A) = mass.

    With lambda = r W mass, the weight of a partition with sizes i_j and multiplicities y_j is
    prod_j (lambda gamma(i_j))^y_j / y_j! times exp(-lambda) for `void='all'`, which is the probability
    that the cluster sizes in A add up to l, or prod_j exp(-lambda gamma(i_j)) for `void='listed'`.
    """
    _check_void(void)
    if l < 0:
        raise DomainError(f'l must be non-negative, got {l}')
    mass = np.asarray(mass, dtype=np.float64)
    if np.any(mass < 0):
        raise DomainError('Masses must be non-negative.')
    unit = model.r * mass

    if l == 0:
        return [(np.ones_like(unit), 0, unit)]

    terms = list()
    for partition in partitions(l):
        coef, power, rate = 1., 0, np.zeros_like(unit)
        for size, mult in partition.parts:
            intensity = unit * model.gamma_at(size)
            coef = coef * intensity ** mult / math.factorial(mult)
            power += mult
            rate = rate + intensity
        terms.append((coef, power, unit if void == VOID_ALL else rate))
    return terms


def xi_weight(model, l, mass, w, void=VOID_ALL):
    """
    xi_{l,A}(W) evaluated at a given W > 0.
    """
    if not w > 0:
        raise DomainError(f'W must be positive, got {w}')
    return _output(sum(coef * w ** power * np.exp(-rate * w) for coef, power, rate in xi_terms(model, l, mass, void)))


def _product(terms_a, terms_b):
    return [(ca * cb, ma + mb, sa + sb) for ca, ma, sa in terms_a for cb, mb, sb in terms_b]


def maxima_cdf(model, x):
    """
    Limit of P*(M_n / b_n <= x), equal to phi*(r p x^(-alpha)).
    """
    x = _positive(x)
    return _output(model.phi_star(model.r * model.p * x ** -model.alpha))


def minima_cdf(model, x):
    """
    Limit of P*(M'_n / b_n > -x), equal to phi*(r q x^(-alpha)).
    """
    x = _positive(x)
    return _output(model.phi_star(model.r * model.q * x ** -model.alpha))


def order_stat_cdf(model, k, x, w=None, void=VOID_ALL):
    """
    Limit of P*(M^(k)_n / b_n <= x).

    Args:
        model (LimitModel): Limit model.
        k (int): Rank of the order statistic, 1 <= k <= 20.
        x (float or np.ndarray): Points x > 0.
        w (optional): 'exact' (default) for the closed-form laws of W, or an array of W samples.
        void (str): 'all' or 'listed'; see `xi_terms`.

    Returns:
        FormulaValue
    """
    _check_order(k)
    _check_void(void)
    x = _positive(x)
    expectation = WExpectation.for_model(model, w)

    first = maxima_cdf(model, x)
    mass = model.p * x ** -model.alpha
    terms = [term for l in range(1, k) for term in xi_terms(model, l, mass, void)]
    correction, stderr = expectation(terms)
    return FormulaValue(_output(first + correction), _output(stderr + np.zeros_like(x)), expectation.method)


def _joint_value(model, k, u, v, expectation, void):
    mass_v = model.p * v ** -model.alpha
    mass_uv = np.clip(model.p * (u ** -model.alpha - v ** -model.alpha), 0., None)

    terms = list()
    for l in range(k):
        for j in range(k - l + 1):
            if l == 0 and j == 0:
                continue
            terms.extend(_product(xi_terms(model, l, mass_v, void), xi_terms(model, j, mass_uv, void)))
    correction, stderr = expectation(terms)
    return maxima_cdf(model, u) + correction, stderr + np.zeros_like(u)


def joint_order_cdf(model, k, u, v, w=None, void=VOID_ALL):
    """
    Limit of P*(M^(k+1)_n / b_n <= u, M^(k)_n / b_n <= v) for 0 < u < v.
    """
    _check_order(k)
    _check_void(void)
    u = _positive(u, 'u')
    v = np.asarray(v, dtype=np.float64)
    if np.any(~(u < v)):
        raise DomainError('The joint law is evaluated at u < v only.')
    expectation = WExpectation.for_model(model, w)
    value, stderr = _joint_value(model, k, u, v, expectation, void)
    return FormulaValue(_output(value), _output(stderr), expectation.method)


def default_gap_grid(model, num_points=4001):
    scale = (model.r * max(model.p, 1e-12)) ** (1 / model.alpha)
    return scale * np.geomspace(1e-4, 1e4, num_points)


def gap_survival(model, k, t, grid=None, mc_gaps=None, w=None, void=VOID_ALL, tol=4.):
    """
    Limit of P*(G^(k) > t), G^(k) = M^(k) - M^(k+1), from the joint law of (M^(k+1), M^(k)).

    For each grid cell (u_a, u_a+1] the probability that M^(k+1) lies in the cell and M^(k) exceeds
    M^(k+1) + t is bracketed by the same event with M^(k+1) replaced by the cell ends. The mass below
    and above the grid only widens the upper bound. The value is the midpoint and the error the
    half width. When Monte Carlo gaps are given, the result is flagged if the two methods differ
    by more than `tol` combined standard errors plus the grid error.
    """
    _check_order(k + 1)
    if t < 0:
        raise DomainError(f'Gap level must be non-negative, got {t}')
    if t == 0:
        return GapSurvival(1., 0., 1., 1., math.nan, math.nan, 0., False)

    expectation = WExpectation.for_model(model, w)
    grid = default_gap_grid(model) if grid is None else np.sort(_positive(grid, 'grid'))
    if grid.size < 2:
        raise DomainError('The gap grid needs at least two points.')

    f_next = np.asarray(order_stat_cdf(model, k + 1, grid, w=w, void=void).value)

    def tail_joint(u, f_u, v):
        # P(M^(k+1) <= u, M^(k) > v). For v <= u the first condition is implied by the second failing.
        below = v <= u
        joint, _ = _joint_value(model, k, u, np.where(below, 2 * u, v), expectation, void)
        f_k = np.asarray(order_stat_cdf(model, k, v, w=w, void=void).value)
        return f_u - np.where(below, f_k, joint)

    lo_u, hi_u = grid[:-1], grid[1:]
    f_lo, f_hi = f_next[:-1], f_next[1:]
    upper_cells = tail_joint(hi_u, f_hi, lo_u + t) - tail_joint(lo_u, f_lo, lo_u + t)
    lower_cells = tail_joint(hi_u, f_hi, hi_u + t) - tail_joint(lo_u, f_lo, hi_u + t)

    lower = float(np.sum(np.clip(lower_cells, 0., None)))
    upper = float(np.sum(np.clip(upper_cells, 0., None)) + f_next[0] + (1 - f_next[-1]))
    lower, upper = min(lower, 1.), min(upper, 1.)
    value, error = (lower + upper) / 2, (upper - lower) / 2

    mc_value, mc_stderr, discrepancy, flagged = math.nan, math.nan, 0., False
    if mc_gaps is not None:
        mc_gaps = np.asarray(mc_gaps, dtype=np.float64)
        exceed = (mc_gaps > t).astype(np.float64)
        mc_value = float(exceed.mean())
        mc_stderr = float(exceed.std(ddof=1) / math.sqrt(exceed.size))
        discrepancy = abs(value - mc_value)
        flagged = discrepancy > tol * mc_stderr + error
        if flagged:
            logger.warning(f'Gap survival at t={t}: grid value {value:.4f} +/- {error:.4f} and '
                           f'Monte Carlo {mc_value:.4f} +/- {mc_stderr:.4f} disagree.')
    return GapSurvival(value, error, lower, upper, mc_value, mc_stderr, discrepancy, flagged)


def formula_table(model, ks=(1, 2), xs=(0.5, 1., 2., 4., 8.), joint_pairs=(), gap_ts=(), w=None, void=VOID_ALL,
                  mc_gaps=None):
    """
    Rows (statistic, k, x, u, v, t, value, stderr, method) of the formulas CSV.

    Args:
        mc_gaps (dict, optional): k -> sampled gaps M^(k) - M^(k+1) of the limit process. Gap rows then also
            carry the Monte Carlo value, its standard error, the discrepancy and whether it was flagged.
    """
    mc_gaps = mc_gaps or dict()
    rows = list()
    method = WExpectation.for_model(model, w).method
    for x in xs:
        rows.append(dict(statistic='maxima', k=1, x=x, value=maxima_cdf(model, x), stderr=0., method=method))
        rows.append(dict(statistic='minima', k=1, x=x, value=minima_cdf(model, x), stderr=0., method=method))
        for k in ks:
            result = order_stat_cdf(model, k, x, w=w, void=void)
            rows.append(dict(statistic='order_stat', k=k, x=x, value=result.value, stderr=result.stderr,
                             method=result.method))
    for k in ks:
        for u, v in joint_pairs:
            result = joint_order_cdf(model, k, u, v, w=w, void=void)
            rows.append(dict(statistic='joint_order', k=k, u=u, v=v, value=result.value, stderr=result.stderr,
                             method=result.method))
        for t in gap_ts:
            result = gap_survival(model, k, t, mc_gaps=mc_gaps.get(k), w=w, void=void)
            row = dict(statistic='gap_survival', k=k, t=t, value=result.value, stderr=result.error,
                       method=f'{method}+grid')
            if k in mc_gaps:
                row.update(mc_value=result.mc_value, mc_stderr=result.mc_stderr, discrepancy=result.discrepancy,
                           flagged=result.flagged)
            rows.append(row)
    return rows
