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
Tail asymptotics of the boundary density nu1.

nu1(x) ~ b x^kappa exp(-tau2 x) as x -> inf, where (kappa, tau2) is read off
the relative position of p, p', theta2^+ and the vertex Theta2^{+-}(theta1^-):

    case  condition                          kappa   tau2
    1a    p < vertex                          0       p
    1b    vertex <= p < p'                    0       p
    1c    vertex <= p' < p                    0       p'
    1d    vertex <= p = p'                    1       p
    2a    p and p' > theta2^+                -3/2     theta2^+
    2b    theta2^+ = p                       -1/2     theta2^+
    2c    theta2^+ = p'                      -1/2     theta2^+
    2d    theta2^+ = p = p'                   0       theta2^+

Absent p or p' count as lying beyond theta2^+.
"""

import logging
import math
from collections import namedtuple
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from rbmlaplace.excep import DomainRefusal, RbmExcep
from rbmlaplace.kernel import geometry
from rbmlaplace.laplace import DEFAULT_SETTINGS, boundary_transform, phi1, skew_rates
from rbmlaplace.model import is_skew_symmetric, require_valid

logger = logging.getLogger(__name__)

# Equality tolerance between the compared ordinates, relative to the kernel scale.
TABLE_TOL = 1e-8
# Grid size of the singularity scan over (0, theta2^+).
SCAN_POINTS = 200

KAPPA_TAU = {
    '1a': (0.0, 'p'),
    '1b': (0.0, 'p'),
    '1c': (0.0, "p'"),
    '1d': (1.0, 'p'),
    '2a': (-1.5, 'theta2+'),
    '2b': (-0.5, 'theta2+'),
    '2c': (-0.5, 'theta2+'),
    '2d': (0.0, 'theta2+'),
}


@dataclass(frozen=True)
class AsymptoticsClass:
    case: str
    kappa: float
    tau2: float
    tau2_source: str
    p: Optional[float]
    p_prime: Optional[float]
    theta2_plus: float
    vertex: float
    skew_symmetric: bool = False
    ambiguous: Tuple[str, ...] = field(default_factory=tuple)
    conflict: Optional[str] = None
    b: Optional[float] = None

    def to_dict(self):
        d = {
            'case': self.case, 'kappa': self.kappa, 'tau2': self.tau2,
            'tau2_source': self.tau2_source, 'p': self.p, 'p_prime': self.p_prime,
            'theta2_plus': self.theta2_plus, 'vertex': self.vertex,
            'skew_symmetric': self.skew_symmetric,
        }
        if self.ambiguous:
            d['ambiguous'] = list(self.ambiguous)
        if self.conflict:
            d['conflict'] = self.conflict
        if self.b is not None:
            d['b'] = self.b
        return d


Constant = namedtuple('Constant', 'value abs_error method')

Singularity = namedtuple('Singularity', 'location kind')


def _label(p, pp, top, vertex, eps):
    p = math.inf if p is None else p
    pp = math.inf if pp is None else pp
    p_top = abs(p - top) <= eps
    pp_top = abs(pp - top) <= eps
    if min(p, pp) < top - eps:
        if p < vertex - eps:
            return '1a'
        if abs(p - pp) <= eps:
            return '1d'
        return '1b' if p < pp else '1c'
    if p_top and pp_top:
        return '2d'
    if p_top:
        return '2b'
    if pp_top:
        return '2c'
    return '2a'


def classify(params, tol=TABLE_TOL):
    """
    Table case of the tail of nu1, with every case reachable by moving one
    compared ordinate by 2 tol scale listed in `ambiguous`.

    :return: AsymptoticsClass
    """
    g = geometry(params)
    eps = tol * g.scale
    p, pp, top, vertex = g.p, g.p_prime, g.theta2_plus, g.theta2_at_t1m
    case = _label(p, pp, top, vertex, eps)

    labels = {case}
    shift = 2 * eps
    for d in (-shift, shift):
        if p is not None:
            labels.add(_label(p + d, pp, top, vertex, eps))
        if pp is not None:
            labels.add(_label(p, pp + d, top, vertex, eps))
        labels.add(_label(p, pp, top, vertex + d, eps))
    ambiguous = tuple(sorted(labels)) if len(labels) > 1 else ()
    if ambiguous:
        logger.warning('classification within %.3g of a case boundary: %s', eps, ', '.join(ambiguous))

    kappa, source = KAPPA_TAU[case]
    tau2 = {'p': p, "p'": pp, 'theta2+': top}[source]

    skew = is_skew_symmetric(params)
    conflict = None
    if skew:
        alpha2 = skew_rates(params)[1]
        if kappa != 0 or abs(alpha2 - tau2) > 1e-6 * g.scale:
            conflict = (f'closed form has a simple pole at {alpha2:.10g} (kappa 0), '
                        f'case {case} gives kappa {kappa}, tau2 {tau2:.10g}')
            logger.warning('skew-symmetric model: %s', conflict)
    return AsymptoticsClass(
        case=case, kappa=kappa, tau2=tau2, tau2_source=source, p=p, p_prime=pp,
        theta2_plus=top, vertex=vertex, skew_symmetric=skew, ambiguous=ambiguous,
        conflict=conflict,
    )


def constant_b_case1a(params, settings=DEFAULT_SETTINGS):
    """
    b = -nu1 (w(0) - w(p)) / w'(p) * exp{ J(p) }, with J the exponent of the
    integral formula. Equals lim (p - theta2) phi1(theta2) as theta2 -> p.

    :return: Constant
    :raises DomainRefusal: outside case 1a
    """
    c = classify(params)
    if c.case != '1a' or c.ambiguous:
        raise DomainRefusal(f'constant b by the integral formula needs case 1a, got {c.case}')
    t = boundary_transform(params, settings)
    if t.chi != -1:
        raise DomainRefusal(f'case 1a with index chi = {t.chi}')
    p = c.p
    J, err = t.exponent(p)
    w0, wp = t.gluing.w0, complex(t.gluing.w(p))
    b = -t.nu1 * (w0 - wp) / complex(t.gluing.w_prime(p)) * np.exp(J)
    if abs(b.imag) > 1e-6 * abs(b) or b.real <= 0:
        raise DomainRefusal(f'constant b = {b} is not a positive real')
    return Constant(float(b.real), float(abs(b) * err), 'integral')


def constant_b(params, settings=DEFAULT_SETTINGS):
    """b from the closed form when skew symmetric, by the integral formula in case 1a."""
    require_valid(params)
    if is_skew_symmetric(params):
        a1, a2 = skew_rates(params)
        C = params.sigma11 * a1 * a2 / (2 * params.r11)
        return Constant(C, 0.0, 'closed_form_skew')
    c = classify(params)
    if c.case == '1a':
        return constant_b_case1a(params, settings)
    raise DomainRefusal(f'constant b is not computed in case {c.case}')


def nearest_singularity(params, n=SCAN_POINTS, settings=DEFAULT_SETTINGS):
    """
    First singularity of phi1 on (0, theta2^+): scan 1/phi1 for a sign
    change (simple pole) or a touching zero (double pole), else report the
    branch point theta2^+. The grid clusters quadratically toward theta2^+,
    and ends with points at relative distances 1e-5 ... 1e-10 from it, so
    that a pole p' just below the branch point is still bracketed.

    :return: Singularity
    """
    g = geometry(params)
    top = g.theta2_plus

    def f(x):
        return phi1(params, x, settings, reciprocal=True).value.real

    u = np.linspace(1.0, 0.0, n + 1)[:-1]
    xs = np.concatenate([top * (1 - u * u), top * (1 - np.logspace(-5, -10, 6))])
    grid = []
    for x in xs:
        try:
            grid.append((float(x), f(x)))
        except RbmExcep as e:
            logger.debug('scan skips theta2 = %.6g: %s', x, e)
    logger.debug('scan of 1/phi1: %d of %d points', len(grid), len(xs))
    if grid and grid[0][1] == 0:
        return Singularity(grid[0][0], 'pole')
    ref = abs(grid[0][1]) if grid else 1.0

    for k in range(1, len(grid)):
        (xa, fa), (xb, fb) = grid[k - 1], grid[k]
        if fb == 0:
            return Singularity(xb, 'pole')
        if fa * fb < 0:
            return Singularity(float(brentq(f, xa, xb, xtol=1e-13 * g.scale)), 'pole')
        if k + 1 < len(grid):
            fc = grid[k + 1][1]
            if abs(fb) < abs(fa) and abs(fb) <= abs(fc) and fb * fc > 0:
                sign = 1.0 if fb > 0 else -1.0
                res = minimize_scalar(lambda x: sign * f(x), bounds=(xa, grid[k + 1][0]),
                                      method='bounded', options={'xatol': 1e-12 * g.scale})
                if abs(res.fun) <= 1e-6 * ref:
                    return Singularity(float(res.x), 'double_pole')
    return Singularity(top, 'branch_point')
