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
The kernel of the functional equation

    -gamma(theta) phi(theta) = gamma1(theta) phi1(theta2) + gamma2(theta) phi2(theta1),

its algebraic branch functions, branch points, and the distinguished
ordinates p, p' and q.

Branch convention: square roots are principal. With that choice the literal
minus branch Theta1^-(theta2) is the small branch (it vanishes at 0) and is
analytic off the two real rays (-inf, theta2^-] and [theta2^+, inf).
"""

import logging
import math
from collections import namedtuple
from dataclasses import dataclass, asdict
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from rbmlaplace.excep import NumericalFailure
from rbmlaplace.model import opening_angle, require_valid

logger = logging.getLogger(__name__)

# Relative tolerance deciding that gamma1 vanishes at the tangency point.
TANGENCY_TOL = 1e-9
# Residual allowed when verifying p and p'.
RESIDUAL_TOL = 1e-9


def _scalar_or_array(z):
    return z.item() if np.ndim(z) == 0 else z


def gamma(params, theta1, theta2):
    t1 = np.asarray(theta1)
    t2 = np.asarray(theta2)
    g = (0.5 * (params.sigma11 * t1 * t1 + 2 * params.sigma12 * t1 * t2 + params.sigma22 * t2 * t2)
         + params.mu1 * t1 + params.mu2 * t2)
    return _scalar_or_array(g)


def gamma1(params, theta1, theta2):
    return _scalar_or_array(params.r11 * np.asarray(theta1) + params.r21 * np.asarray(theta2))


def gamma2(params, theta1, theta2):
    return _scalar_or_array(params.r12 * np.asarray(theta1) + params.r22 * np.asarray(theta2))


def gamma_scale(params, theta1, theta2):
    """
    Sum of the moduli of the monomials of gamma; the natural yardstick for
    residuals of gamma at a point.
    """
    a1 = np.abs(np.asarray(theta1))
    a2 = np.abs(np.asarray(theta2))
    s = (0.5 * (params.sigma11 * a1 * a1 + 2 * abs(params.sigma12) * a1 * a2 + params.sigma22 * a2 * a2)
         + abs(params.mu1) * a1 + abs(params.mu2) * a2)
    return _scalar_or_array(s)


def disc1(params, theta2):
    """Discriminant under the square root of Theta1^{+-}(theta2)."""
    t2 = np.asarray(theta2)
    d = (t2 * t2 * (params.sigma12 ** 2 - params.sigma11 * params.sigma22)
         + 2 * t2 * (params.mu1 * params.sigma12 - params.mu2 * params.sigma11)
         + params.mu1 ** 2)
    return _scalar_or_array(d)


def disc2(params, theta1):
    """Discriminant under the square root of Theta2^{+-}(theta1)."""
    return disc1(params.swapped(), theta1)


def theta1_branches(params, theta2):
    """
    The two roots theta1 of gamma(theta1, theta2) = 0.

    :return: (Theta1_minus, Theta1_plus), complex scalars or arrays
    """
    t2 = np.asarray(theta2, dtype=complex)
    root = np.sqrt(np.asarray(disc1(params, t2), dtype=complex))
    centre = -(params.sigma12 * t2 + params.mu1)
    return (_scalar_or_array((centre - root) / params.sigma11),
            _scalar_or_array((centre + root) / params.sigma11))


def theta2_branches(params, theta1):
    """
    The two roots theta2 of gamma(theta1, theta2) = 0.

    :return: (Theta2_minus, Theta2_plus)
    """
    return theta1_branches(params.swapped(), theta1)


def theta1_minus_real(params, theta2):
    """
    Theta1^- at a real point of [theta2^-, theta2^+], with the discriminant
    clamped at zero so that rounding at the branch points cannot leak an
    imaginary part.
    """
    root = math.sqrt(max(float(disc1(params, theta2)), 0.0))
    return (-(params.sigma12 * theta2 + params.mu1) - root) / params.sigma11


def theta2_real_branches(params, theta1):
    root = math.sqrt(max(float(disc2(params, theta1)), 0.0))
    centre = -(params.sigma12 * theta1 + params.mu2)
    return (centre - root) / params.sigma22, (centre + root) / params.sigma22


BranchPoints = namedtuple('BranchPoints', 'theta1_minus theta1_plus theta2_minus theta2_plus')


def branch_points(params):
    """
    The zeros of the two discriminants. Under a positive definite Sigma they
    are real and of opposite signs.

    :return: BranchPoints
    """
    det = params.det_sigma
    e2 = params.mu1 * params.sigma12 - params.mu2 * params.sigma11
    e1 = params.mu2 * params.sigma12 - params.mu1 * params.sigma22
    r2 = math.sqrt(e2 * e2 + params.mu1 ** 2 * det)
    r1 = math.sqrt(e1 * e1 + params.mu2 ** 2 * det)
    return BranchPoints((e1 - r1) / det, (e1 + r1) / det, (e2 - r2) / det, (e2 + r2) / det)


def tangency_ordinate(params):
    """
    The real double root Theta2^{+-}(theta1^-), i.e. the vertex of the
    hyperbola R. It is computed directly and checked against the identity

        (theta2^+ + theta2^-)/2 - ((theta2^+ - theta2^-)/2) cos(beta).
    """
    bp = branch_points(params)
    direct = -(params.sigma12 * bp.theta1_minus + params.mu2) / params.sigma22
    beta = opening_angle(params)
    by_cosine = (0.5 * (bp.theta2_plus + bp.theta2_minus)
                 - 0.5 * (bp.theta2_plus - bp.theta2_minus) * math.cos(beta))
    scale = max(abs(bp.theta2_minus), abs(bp.theta2_plus))
    if abs(direct - by_cosine) > 1e-10 * scale:
        raise NumericalFailure(
            f'tangency ordinate mismatch: {direct} (direct) vs {by_cosine} (cosine identity)'
        )
    return direct


def top_abscissa(params):
    """Theta1^{+-}(theta2^+): abscissa of the highest point of the ellipse."""
    return -(params.sigma12 * branch_points(params).theta2_plus + params.mu1) / params.sigma11


def compute_p(params):
    """
    The ordinate p where the line gamma1 = 0 meets the small branch,
    gamma1(Theta1^-(p), p) = 0. It exists iff gamma1(Theta1^{+-}(theta2^+), theta2^+) >= 0.

    :return: float or None
    """
    bp = branch_points(params)
    x_top = top_abscissa(params)
    test = gamma1(params, x_top, bp.theta2_plus)
    if test < -1e-12 * (abs(params.r11 * x_top) + abs(params.r21 * bp.theta2_plus)):
        return None
    num = 2 * params.r11 * (params.mu1 * params.r21 - params.mu2 * params.r11)
    den = (params.r11 ** 2 * params.sigma22 - 2 * params.r11 * params.r21 * params.sigma12
           + params.r21 ** 2 * params.sigma11)
    p = min(num / den, bp.theta2_plus)
    t1 = theta1_minus_real(params, p)
    residual = abs(gamma1(params, t1, p))
    scale = max(abs(bp.theta2_plus), abs(bp.theta2_minus), abs(params.r11 * t1) + abs(params.r21 * p))
    if residual > RESIDUAL_TOL * scale:
        raise NumericalFailure(f'p = {p} fails gamma1(Theta1^-(p), p) = 0 (residual {residual:.3g})',
                               bound=residual)
    return p


def _bracketed_abscissa(params, hi):
    """
    Search r in (0, hi] with gamma2(r, Theta2^-(r)) = 0, away from the
    trivial root r = 0.
    """
    def f(r):
        return gamma2(params, r, theta2_real_branches(params, r)[0])

    grid = np.linspace(hi * 1e-3, hi, 400)
    values = [f(r) for r in grid]
    for a, b, fa, fb in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if fa == 0:
            return float(a)
        if fa * fb < 0:
            return brentq(f, a, b, xtol=1e-14 * max(1.0, hi))
    return None


PPrime = namedtuple('PPrime', 'value abscissa')


def compute_p_prime(params):
    """
    p' = Theta2^+(r), where r != 0 solves gamma2(r, Theta2^-(r)) = 0 and
    r <= Theta1^{+-}(theta2^+). The root r is p of the swapped model; a
    bracketed search takes over if that closed form fails verification.

    :return: PPrime(value or None, r or None)
    """
    bp = branch_points(params)
    x_top = top_abscissa(params)
    try:
        r = compute_p(params.swapped())
    except NumericalFailure as e:
        logger.warning('closed form for the abscissa of p\' failed (%s); searching', e)
        r = _bracketed_abscissa(params, min(x_top, bp.theta1_plus))
    if r is None:
        return PPrime(None, None)
    if r > x_top + 1e-12 * max(abs(x_top), 1.0):
        return PPrime(None, r)
    value = theta2_real_branches(params, r)[1]
    lower = theta2_real_branches(params, r)[0]
    residual = max(abs(gamma2(params, r, lower)), abs(gamma(params, r, value)))
    scale = max(abs(bp.theta2_plus), abs(bp.theta1_plus)) ** 2 + 1
    if residual > RESIDUAL_TOL * scale:
        raise NumericalFailure(f"p' = {value} fails its defining equations (residual {residual:.3g})",
                               bound=residual)
    return PPrime(value, r)


def tangency_value(params):
    """
    gamma1 at the tangency point (theta1^-, Theta2^{+-}(theta1^-)), relative
    to the size of its two terms.
    """
    t1 = branch_points(params).theta1_minus
    t2 = tangency_ordinate(params)
    g = gamma1(params, t1, t2)
    return g / (abs(params.r11 * t1) + abs(params.r21 * t2))


def tangency_sign(params, tol=TANGENCY_TOL):
    v = tangency_value(params)
    if abs(v) <= tol:
        return 0
    return 1 if v > 0 else -1


def compute_q(params):
    """
    The auxiliary point q of the normalized gluing map: p when gamma1 is
    positive at the tangency point, half the vertex ordinate otherwise.
    """
    if tangency_sign(params) > 0:
        p = compute_p(params)
        if p is None:
            raise NumericalFailure('positive tangency sign but p does not exist')
        return p
    return 0.5 * tangency_ordinate(params)


@dataclass(frozen=True)
class KernelGeometry:
    theta1_minus: float
    theta1_plus: float
    theta2_minus: float
    theta2_plus: float
    beta: float
    theta2_at_t1m: float
    p: Optional[float]
    p_exists: bool
    p_prime: Optional[float]
    p_prime_abscissa: Optional[float]
    q: float
    gamma1_tangency_sign: int
    gamma1_tangency_value: float
    scale: float

    def to_dict(self):
        return asdict(self)


@lru_cache(maxsize=256)
def geometry(params):
    """
    All derived scalars of the kernel for a valid model.

    :param params: ModelParams
    :return: KernelGeometry
    :raises InvalidParams: if params fail validation
    """
    require_valid(params)
    bp = branch_points(params)
    if not (bp.theta1_minus < 0 < bp.theta1_plus and bp.theta2_minus < 0 < bp.theta2_plus):
        raise NumericalFailure(f'branch points are not of opposite signs: {bp}')
    vertex = tangency_ordinate(params)
    p = compute_p(params)
    pp = compute_p_prime(params)
    g = KernelGeometry(
        theta1_minus=bp.theta1_minus, theta1_plus=bp.theta1_plus,
        theta2_minus=bp.theta2_minus, theta2_plus=bp.theta2_plus,
        beta=opening_angle(params),
        theta2_at_t1m=vertex,
        p=p, p_exists=p is not None,
        p_prime=pp.value, p_prime_abscissa=pp.abscissa,
        q=compute_q(params),
        gamma1_tangency_sign=tangency_sign(params),
        gamma1_tangency_value=tangency_value(params),
        scale=max(abs(x) for x in bp),
    )
    logger.debug('kernel geometry: %s', g)
    return g
