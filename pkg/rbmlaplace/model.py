# --------------------------------------------------------------------------- #
#   Rbmlaplace                                                                #
#                                                                             #
#   Copyright (c) 2023 The rbmlaplace authors                                 #
#                                                                             #
#   Licensed under the Apache License, Version 2.0 (the "License");           #
#   you may not use this file except in compliance with the License.          #
#   You may obtain a copy of the License at                                   #
#                                                                             #
#       http://www.apache.org/licenses/LICENSE-2.0                            #
#                                                                             #
#   Unless required by applicable law or agreed to in writing, software       #
#   distributed under the License is distributed on an "AS IS" BASIS,         #
#   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.  #
#   See the License for the specific language governing permissions and       #
#   limitations under the License.                                            #
# --------------------------------------------------------------------------- #

"""
Model parameters of a semimartingale reflected Brownian motion (RBM) in the
quarter plane,

    Z(t) = Z(0) + B(t) + R L(t),

where B is a Brownian motion with covariance Sigma and drift mu, and the
columns R^1, R^2 of the reflection matrix R are the directions along which
the local times L^1, L^2 push the process off the two axes.

Also here: the equivalent wedge formulation, and the two structural
predicates (skew symmetry, Dieker-Moriarty) that select closed forms.
"""

import json
import logging
import math
from collections import namedtuple
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from sympy import Rational

from rbmlaplace.excep import InvalidParams

logger = logging.getLogger(__name__)

# Relative tolerance for the structural predicates.
DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """
    The triple (Sigma, mu, R) of an RBM in the quarter plane.

    Covariance entries are variances per unit time, drift entries are per
    unit time, and reflection entries are dimensionless direction components.
    Instances are immutable and hashable, so they can key caches.
    """
    sigma11: float
    sigma12: float
    sigma22: float
    mu1: float
    mu2: float
    r11: float
    r12: float
    r21: float
    r22: float

    @classmethod
    def from_matrices(cls, sigma, mu, R):
        sigma = np.asarray(sigma, dtype=float)
        R = np.asarray(R, dtype=float)
        if sigma.shape != (2, 2) or R.shape != (2, 2) or len(mu) != 2:
            raise InvalidParams('sigma and R must be 2x2, mu must have length 2')
        if abs(sigma[0, 1] - sigma[1, 0]) > 1e-12 * max(1.0, abs(sigma[0, 1])):
            raise InvalidParams(f'sigma is not symmetric: {sigma.tolist()}')
        return cls(
            float(sigma[0, 0]), float(0.5 * (sigma[0, 1] + sigma[1, 0])), float(sigma[1, 1]),
            float(mu[0]), float(mu[1]),
            float(R[0, 0]), float(R[0, 1]), float(R[1, 0]), float(R[1, 1]),
        )

    @classmethod
    def from_dict(cls, d):
        """
        Build from the parameter-file layout
        ``{"sigma": [[s11, s12], [s12, s22]], "mu": [m1, m2], "R": [[r11, r12], [r21, r22]]}``.
        """
        try:
            return cls.from_matrices(d['sigma'], d['mu'], d['R'])
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidParams(f'malformed parameter object: {e}') from e

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise InvalidParams(f'parameters are not valid JSON: {e}') from e
        if not isinstance(d, dict):
            raise InvalidParams('parameters must be a JSON object')
        return cls.from_dict(d)

    def to_dict(self):
        return {
            'sigma': [[self.sigma11, self.sigma12], [self.sigma12, self.sigma22]],
            'mu': [self.mu1, self.mu2],
            'R': [[self.r11, self.r12], [self.r21, self.r22]],
        }

    @property
    def sigma(self):
        return np.array([[self.sigma11, self.sigma12], [self.sigma12, self.sigma22]])

    @property
    def mu(self):
        return np.array([self.mu1, self.mu2])

    @property
    def R(self):
        return np.array([[self.r11, self.r12], [self.r21, self.r22]])

    @property
    def det_sigma(self):
        return self.sigma11 * self.sigma22 - self.sigma12 ** 2

    @property
    def det_R(self):
        return self.r11 * self.r22 - self.r12 * self.r21

    def swapped(self):
        """
        Exchange the roles of the two coordinates. The boundary transform
        phi_2 of a model is phi_1 of its swapped model.
        """
        return ModelParams(
            self.sigma22, self.sigma12, self.sigma11,
            self.mu2, self.mu1,
            self.r22, self.r21, self.r12, self.r11,
        )

    def is_identity_reflection(self, tol=1e-12):
        return (abs(self.r11 - 1) <= tol and abs(self.r22 - 1) <= tol
                and abs(self.r12) <= tol and abs(self.r21) <= tol)

    def entries(self):
        return (self.sigma11, self.sigma12, self.sigma22, self.mu1, self.mu2,
                self.r11, self.r12, self.r21, self.r22)


ValidationCheck = namedtuple('ValidationCheck', 'name passed value')


class ValidationReport:
    """
    Outcome of `validate`: one named check per condition, never failing fast.
    """

    def __init__(self, checks):
        self.checks = list(checks)

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def to_dict(self):
        return {
            'ok': self.ok,
            'checks': [
                {'name': c.name, 'passed': c.passed, 'value': c.value}
                for c in self.checks
            ],
        }

    def raise_if_invalid(self):
        if not self.ok:
            names = ', '.join(c.name for c in self.failures())
            raise InvalidParams(f'invalid model parameters, failed: {names}', report=self)

    def __str__(self):
        lines = []
        for c in self.checks:
            mark = 'PASS' if c.passed else 'FAIL'
            lines.append(f'{mark}  {c.name}  ({c.value:.6g})')
        return '\n'.join(lines)


@lru_cache(maxsize=1024)
def validate(params):
    """
    Check positive definiteness of Sigma, the stationarity conditions on
    (R, mu), and negativity of both drift coordinates.

    The inequalities are decided exactly, on the rational numbers that the
    given doubles represent, so that no rounding can flip a verdict.

    :param params: ModelParams
    :return: ValidationReport
    :raises InvalidParams: if some entry is not finite.
    """
    bad = [v for v in params.entries() if not math.isfinite(v)]
    if bad:
        raise InvalidParams(f'non-finite parameter entries: {bad}')

    s11, s12, s22, m1, m2, r11, r12, r21, r22 = [Rational(v) for v in params.entries()]
    conditions = [
        ('sigma11 > 0', s11),
        ('sigma22 > 0', s22),
        ('det(Sigma) > 0', s11 * s22 - s12 ** 2),
        ('r11 > 0', r11),
        ('r22 > 0', r22),
        ('det(R) > 0', r11 * r22 - r12 * r21),
        ('r22*mu1 - r12*mu2 < 0', -(r22 * m1 - r12 * m2)),
        ('r11*mu2 - r21*mu1 < 0', -(r11 * m2 - r21 * m1)),
        ('mu1 < 0', -m1),
        ('mu2 < 0', -m2),
    ]
    checks = []
    for name, positive_part in conditions:
        # Report the quantity the way the condition is written.
        value = float(positive_part) if '>' in name else -float(positive_part)
        checks.append(ValidationCheck(name, bool(positive_part > 0), value))
    return ValidationReport(checks)


def require_valid(params):
    validate(params).raise_if_invalid()
    return params


WedgeAngles = namedtuple('WedgeAngles', 'beta delta epsilon')


def opening_angle(params):
    return math.acos(-params.sigma12 / math.sqrt(params.sigma11 * params.sigma22))


def quadrant_to_wedge(params):
    """
    Opening angle beta of the equivalent wedge, and the reflection angles
    delta (at the side carrying R^2) and epsilon (at the side carrying R^1).

    All three land in (0, pi).

    :return: WedgeAngles(beta, delta, epsilon)
    """
    beta = opening_angle(params)
    a = (params.r12 / params.r22) * math.sqrt(params.sigma22 / params.sigma11)
    b = (params.r21 / params.r11) * math.sqrt(params.sigma11 / params.sigma22)
    delta = math.atan2(math.sin(beta), a + math.cos(beta))
    epsilon = math.atan2(math.sin(beta), b + math.cos(beta))
    return WedgeAngles(beta, delta, epsilon)


def _as_pair_matrix(m):
    m = np.asarray(m, dtype=float)
    return tuple(tuple(float(x) for x in row) for row in m)


@dataclass(frozen=True)
class WedgeParams:
    """
    An RBM in the wedge {0 <= arg z <= beta}, one side on the positive real
    axis. Matrices are stored as nested tuples to keep instances hashable.
    """
    beta: float
    sigma: tuple
    mu: tuple
    R: tuple

    def __post_init__(self):
        if not (0 < self.beta < math.pi):
            raise InvalidParams(f'wedge angle beta={self.beta} not in (0, pi)')
        s = np.array(self.sigma)
        if s[0, 0] <= 0 or np.linalg.det(s) <= 0:
            raise InvalidParams(f'wedge covariance is not positive definite: {self.sigma}')

    @staticmethod
    def T1(beta):
        """Quadrant-to-wedge linear map for unit variances."""
        return np.array([[1 / math.sin(beta), 1 / math.tan(beta)], [0.0, 1.0]])

    @staticmethod
    def T1_inv(beta):
        return np.array([[math.sin(beta), -math.cos(beta)], [0.0, 1.0]])

    @classmethod
    def from_angles(cls, beta, delta, epsilon, mu, sigma=((1.0, 0.0), (0.0, 1.0))):
        """
        Build the wedge model whose reflection vectors make angle delta with
        the horizontal side and angle epsilon with the other side, both
        measured into the wedge.
        """
        for name, angle in (('delta', delta), ('epsilon', epsilon)):
            if not (0 < angle < math.pi):
                raise InvalidParams(f'reflection angle {name}={angle} not in (0, pi)')
        R = np.array([
            [math.cos(beta - epsilon), math.cos(delta)],
            [math.sin(beta - epsilon), math.sin(delta)],
        ])
        return cls(float(beta), _as_pair_matrix(sigma), tuple(float(m) for m in mu), _as_pair_matrix(R))

    @classmethod
    def from_dict(cls, d):
        """
        Either ``{"beta", "delta", "epsilon", "mu", ["sigma"]}`` or
        ``{"beta", "sigma", "mu", "R"}``.
        """
        try:
            if 'delta' in d or 'epsilon' in d:
                return cls.from_angles(
                    d['beta'], d['delta'], d['epsilon'], d['mu'],
                    sigma=d.get('sigma', ((1.0, 0.0), (0.0, 1.0))),
                )
            return cls(float(d['beta']), _as_pair_matrix(d['sigma']),
                       tuple(float(m) for m in d['mu']), _as_pair_matrix(d['R']))
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidParams(f'malformed wedge parameter object: {e}') from e

    def to_dict(self):
        delta, epsilon = self.reflection_angles()
        return {
            'beta': self.beta, 'delta': delta, 'epsilon': epsilon,
            'sigma': [list(r) for r in self.sigma], 'mu': list(self.mu),
            'R': [list(r) for r in self.R],
        }

    def reflection_angles(self):
        """
        :return: (delta, epsilon) read off the columns of the wedge R.
        """
        (x1, x2), (y1, y2) = self.R
        delta = math.atan2(y2, x2)
        c, s = math.cos(self.beta), math.sin(self.beta)
        epsilon = math.atan2(x1 * s - y1 * c, x1 * c + y1 * s)
        return delta, epsilon


def wedge_to_quadrant(wedge):
    """
    Map a wedge model back to the quarter plane,

        Sigma = T1^{-1} Sigma~ T1^{-T},   mu = T1^{-1} mu~,   R = T1^{-1} R~,

    so that the transforms are related by phi~(theta~) = phi(T1^T theta~).

    :param wedge: WedgeParams
    :return: ModelParams
    """
    Ti = WedgeParams.T1_inv(wedge.beta)
    sigma = Ti @ np.array(wedge.sigma) @ Ti.T
    sigma = 0.5 * (sigma + sigma.T)
    return ModelParams.from_matrices(sigma, Ti @ np.array(wedge.mu), Ti @ np.array(wedge.R))


def theta_map(params):
    """
    The matrix M = T^T for which phi~(theta~) = phi(M theta~), where T maps
    the quarter plane onto the wedge of `quadrant_to_wedge_params(params)`.
    """
    beta = opening_angle(params)
    D = np.diag([1 / math.sqrt(params.sigma11), 1 / math.sqrt(params.sigma22)])
    return (WedgeParams.T1(beta) @ D).T


def quadrant_to_wedge_params(params):
    """
    The wedge model, with unit covariance, equivalent to the given quadrant
    model.
    """
    T = theta_map(params).T
    beta = opening_angle(params)
    sigma = T @ params.sigma @ T.T
    sigma = 0.5 * (sigma + sigma.T)
    return WedgeParams(beta, _as_pair_matrix(sigma), tuple(float(m) for m in T @ params.mu),
                       _as_pair_matrix(T @ params.R))


def is_skew_symmetric(params, tol=DEFAULT_TOL):
    """
    Skew-symmetry condition 2 sigma12 = (r21/r11) sigma11 + (r12/r22) sigma22,
    which is equivalent to an exponential product-form stationary density.
    """
    t0 = 2 * params.sigma12
    t1 = (params.r21 / params.r11) * params.sigma11
    t2 = (params.r12 / params.r22) * params.sigma22
    scale = max(abs(t0), abs(t1), abs(t2), params.sigma11, params.sigma22)
    return abs(t0 - t1 - t2) <= tol * scale


DiekerMoriarty = namedtuple('DiekerMoriarty', 'is_sum_of_exponentials n ratio')


def dieker_moriarty(params, tol=DEFAULT_TOL):
    """
    The stationary density is a finite sum of exponentials iff
    (epsilon + delta - pi)/beta is a non-positive integer.

    :return: DiekerMoriarty(flag, n or None, the ratio itself)
    """
    beta, delta, epsilon = quadrant_to_wedge(params)
    ratio = (epsilon + delta - math.pi) / beta
    n = round(ratio)
    if n <= 0 and abs(ratio - n) <= tol * max(1.0, abs(ratio)):
        return DiekerMoriarty(True, int(n), ratio)
    return DiekerMoriarty(False, None, ratio)


def load_params(path):
    """
    Read a parameter file. Quadrant files carry sigma/mu/R; files with a
    "beta" key describe a wedge model and are mapped to the quarter plane.

    :return: ModelParams (not yet validated)
    """
    try:
        with open(path, encoding='utf-8') as f:
            d = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise InvalidParams(f'cannot read parameter file {path}: {e}') from e
    if not isinstance(d, dict):
        raise InvalidParams(f'parameter file {path} must hold a JSON object')
    if 'beta' in d:
        logger.info('reading wedge parameters from %s', path)
        return wedge_to_quadrant(WedgeParams.from_dict(d))
    return ModelParams.from_dict(d)
