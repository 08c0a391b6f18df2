import logging
from dataclasses import dataclass

import numpy as np

from models.offspring import (OffspringDistribution, ClusterSizeLaw, DEFAULT_SERIES_TOL, extinction_prob,
                              gamma_pmf, kesten_stigum_moment, r_constant, w_laplace, w_laplace_conditioned)
from models.steps import StepDistribution
from utils.errors import DomainError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LimitModel:
    """
    Constants and functions of the limit process derived from an offspring law and a step law.
    """
    offspring: OffspringDistribution
    step: StepDistribution
    r: float
    r_terms: int
    r_bound: float
    gamma: ClusterSizeLaw
    p_e: float
    tol: float = DEFAULT_SERIES_TOL
    phi_depth: int = 60

    @property
    def alpha(self):
        return self.step.alpha

    @property
    def p(self):
        return self.step.p

    @property
    def q(self):
        return self.step.q

    @property
    def mu(self):
        return self.offspring.mean

    @property
    def nu(self):
        return self.step.nu

    def gamma_at(self, y):
        return self.gamma.pmf.get(int(y), 0.)

    def phi(self, u):
        """ E[exp(-u W)] """
        return w_laplace(self.offspring, u, n_iter=self.phi_depth).value

    def phi_star(self, u):
        """ E*[exp(-u W)], the transform conditioned on survival. """
        return w_laplace_conditioned(self.offspring, u, n_iter=self.phi_depth, p_e=self.p_e).value

    def to_json_dict(self):
        return {
            'r': self.r,
            'p_e': self.p_e,
            'alpha': self.alpha,
            'p': self.p,
            'q': self.q,
            'mu': self.mu,
            'offspring': self.offspring.to_config(),
            'step': self.step.to_config(),
            'kesten_stigum_moment': kesten_stigum_moment(self.offspring),
            'gamma': [[y, prob] for y, prob in sorted(self.gamma.pmf.items())],
            'truncation': {
                'tol': self.tol,
                'r_terms': self.r_terms,
                'r_bound': self.r_bound,
                'gamma_y_max': self.gamma.y_max,
                'gamma_terms': self.gamma.terms,
                'gamma_tail_mass': self.gamma.tail_mass,
                'phi_depth': self.phi_depth,
            },
        }


def build_limit_model(offspring, step, y_max=1024, tol=DEFAULT_SERIES_TOL, phi_depth=60, r_scale=1.):
    """
    Args:
        offspring (OffspringDistribution): Offspring law.
        step (StepDistribution): Step law.
        y_max (int): Largest cluster size kept in the gamma table.
        tol (float): Remainder bound for the series defining r and gamma.
        phi_depth (int): Iteration depth for the Laplace transform of W.
        r_scale (float): Multiplies r. Anything but 1 gives a deliberately wrong model.

    Returns:
        LimitModel
    """
    if not r_scale > 0:
        raise DomainError(f'r_scale must be positive, got {r_scale}')
    r = r_constant(offspring, tol)
    gamma = gamma_pmf(offspring, y_max=y_max, tol=tol)
    if r_scale != 1:
        logger.warning(f'r is multiplied by {r_scale}: the resulting model is intentionally wrong.')

    model = LimitModel(offspring=offspring, step=step, r=r.value * r_scale, r_terms=r.terms, r_bound=r.bound,
                       gamma=gamma, p_e=extinction_prob(offspring), tol=tol, phi_depth=phi_depth)
    logger.debug(f'Built limit model with r={model.r:.6g}, p_e={model.p_e:.6g}, '
                 f'gamma tail mass {gamma.tail_mass:.3e} beyond {y_max}.')
    return model


def phi_grid_checks(model, grid):
    """
    Finite-difference sign checks of phi on a grid: phi(0) = 1, non-increasing, convex.
    """
    grid = np.sort(np.asarray(grid, dtype=np.float64))
    values = np.asarray(model.phi(grid))
    first = np.diff(values)
    second = np.diff(first / np.diff(grid))
    return {
        'phi_at_zero': float(model.phi(0.)),
        'nonincreasing': bool(np.all(first <= 1e-12)),
        'convex': bool(np.all(second >= -1e-10)),
    }
