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
Stationary Laplace transforms.

phi1 is evaluated inside the region bounded by R through the Cauchy-integral
representation

    phi1(theta2) = nu1 * ((w(0) - w(p)) / (w(theta2) - w(p)))^(-chi)
                   * exp{ (1/2 pi i) int_{R^-} log G(theta)
                          [w'(theta)/(w(theta) - w(theta2)) - w'(theta)/(w(theta) - w(0))] dtheta },

and elsewhere in C minus [theta2^+, inf) through the continuation relation

    phi1(theta2) = -(gamma2/gamma1)(Theta1^-(theta2), theta2) * phi2(Theta1^-(theta2)).

phi2 is phi1 of the swapped model, and phi follows from the functional
equation.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from rbmlaplace.conformal import gluing_map
from rbmlaplace.curve import build_path, compute_index, distance_to_curve, hyperbola_derivative, \
    hyperbola_point, region_contains
from rbmlaplace.excep import CutError, DomainRefusal, NumericalFailure, PoleError
from rbmlaplace.kernel import gamma, gamma1, gamma2, gamma_scale, geometry, theta1_branches, \
    theta1_minus_real, theta2_real_branches, top_abscissa
from rbmlaplace.model import WedgeParams, is_skew_symmetric, require_valid, wedge_to_quadrant

logger = logging.getLogger(__name__)

# Refuse direct evaluation closer than this (times the kernel scale) to R or to p.
EVAL_MARGIN = 1e-3
# Refusal radius around the vertex when the pole p sits on it.
TANGENT_MARGIN = 1e-2
# phi_interior refuses |gamma(theta)| below this, relative to the monomials of gamma.
KERNEL_ZERO_TOL = 1e-10
# Continuation steps allowed when a point lies outside the region bounded by R.
CONTINUATION_DEPTH = 2


@dataclass(frozen=True)
class QuadratureSettings:
    """
    :param tol: absolute tolerance on the exponent of the integral formula,
        hence approximately the relative tolerance on phi1
    :param margin: refusal distance to R and to p, in units of the kernel scale
    :param s_max: largest path parameter; None for the curve module default
    :param order: Gauss-Legendre points per panel
    :param max_depth: panel-halving depth limit
    :param max_splits: panel halvings allowed per evaluation point, over all
        panels; past it the achieved error is checked against tol
    """
    tol: float = 1e-10
    margin: float = EVAL_MARGIN
    s_max: Optional[float] = None
    order: int = 16
    max_depth: int = 40
    max_splits: int = 2000


DEFAULT_SETTINGS = QuadratureSettings()


@dataclass(frozen=True)
class LaplaceValue:
    value: complex
    abs_error: float
    method: str

    def to_dict(self):
        return {'re': self.value.real, 'im': self.value.imag,
                'abs_error': self.abs_error, 'method': self.method}


@dataclass(frozen=True)
class BoundaryMasses:
    nu1_total: float
    nu2_total: float


def nu_masses(params):
    """
    Mass per unit time of the two boundary measures, -R^{-1} mu.
    """
    require_valid(params)
    nu = -np.linalg.solve(params.R, params.mu)
    if not np.all(nu > 0):
        raise NumericalFailure(f'boundary masses {nu} are not positive')
    return BoundaryMasses(float(nu[0]), float(nu[1]))


class BoundaryTransform:
    """
    phi1 of one model by the integral formula. Holds the path along R^-, the
    index, and the Gauss-Legendre samples of the top-level panels, which do
    not depend on the evaluation point. Immutable after construction, so one
    instance serves any number of threads.
    """

    def __init__(self, params, settings=DEFAULT_SETTINGS):
        self.params = params
        self.settings = settings
        self.geometry = geometry(params)
        self.gluing = gluing_map(params)
        self.path = build_path(params, tol=settings.tol, s_max=settings.s_max)
        self.index = compute_index(params, self.path)
        self.nu1 = nu_masses(params).nu1_total
        self.scale = self.geometry.scale
        self.chi = self.index.chi
        self.wp = complex(self.gluing.w(self.geometry.p)) if self.chi == -1 else None
        self._gl = np.polynomial.legendre.leggauss(settings.order)

        bp = self.path.breakpoints
        self._panels = []
        for k in range(len(bp) - 1):
            a, b = bp[k], bp[k + 1]
            m = 0.5 * (a + b)
            self._panels.append((k, a, b, self._samples(a, b, k), self._samples(a, m, k),
                                 self._samples(m, b, k)))

        S = self.path.s_max
        self._wS = complex(self.gluing.w(hyperbola_point(params, S)))
        self._lim_err = abs(self.path.log_G[-1] - self.path.log_G_inf)
        logger.debug('boundary transform ready: %d panels, chi=%d', len(self._panels), self.chi)

    def _samples(self, a, b, k):
        x, wts = self._gl
        s = 0.5 * (b - a) * x + 0.5 * (a + b)
        theta = np.asarray(hyperbola_point(self.params, s))
        dw = np.asarray(self.gluing.w_prime(theta)) * np.asarray(hyperbola_derivative(self.params, s))
        return (0.5 * (b - a) * wts, self.path.log_G_between(s, k),
                np.asarray(self.gluing.w(theta)), dw)

    def _sum(self, sample, w2):
        wts, logG, w, dw = sample
        w0 = self.gluing.w0
        f = logG * dw * (w2 - w0) / ((w - w2) * (w - w0))
        return complex(np.sum(wts * f))

    def _panel(self, k, a, b, full, left, right, w2, tol, depth, budget):
        whole = self._sum(full, w2)
        halves = self._sum(left, w2) + self._sum(right, w2)
        err = abs(whole - halves)
        if err <= tol or depth >= self.settings.max_depth or budget[0] <= 0:
            return halves, err
        budget[0] -= 1
        m = 0.5 * (a + b)
        lm, mr = 0.5 * (a + m), 0.5 * (m + b)
        i1, e1 = self._panel(k, a, m, left, self._samples(a, lm, k), self._samples(lm, m, k),
                             w2, 0.5 * tol, depth + 1, budget)
        i2, e2 = self._panel(k, m, b, right, self._samples(m, mr, k), self._samples(mr, b, k),
                             w2, 0.5 * tol, depth + 1, budget)
        return i1 + i2, e1 + e2

    def exponent(self, theta2):
        """
        The exponent (1/2 pi i) int ... of the integral formula at theta2,
        with its error estimate. The part of R^- beyond the last breakpoint
        is integrated in closed form with log G replaced by its limit.
        """
        w2 = complex(self.gluing.w(theta2))
        w0 = self.gluing.w0
        if w2 == w0:
            return 0j, 0.0
        panel_tol = self.settings.tol * 2 * math.pi / len(self._panels)
        budget = [self.settings.max_splits]
        total, err = 0j, 0.0
        for k, a, b, full, left, right in self._panels:
            i, e = self._panel(k, a, b, full, left, right, w2, panel_tol, 0, budget)
            total += i
            err += e
        log_ratio = np.log((self._wS - w2) / (self._wS - w0))
        total -= self.path.log_G_inf * log_ratio
        tail = self._lim_err * abs(log_ratio)
        if tail > 2 * math.pi * max(self.settings.tol, 1e-14) * 10:
            raise NumericalFailure(
                f'tail bound not met at theta2 = {theta2}: {tail / (2 * math.pi):.3g}',
                bound=tail / (2 * math.pi))
        if budget[0] <= 0 and err > 2 * math.pi * self.settings.tol * 100:
            raise NumericalFailure(
                f'quadrature split budget ({self.settings.max_splits}) exhausted at theta2 = {theta2}; '
                f'achieved {err / (2 * math.pi):.3g}', bound=err / (2 * math.pi))
        if err > 2 * math.pi * self.settings.tol * 100:
            logger.warning('quadrature error %.3g above tolerance at theta2 = %s',
                           err / (2 * math.pi), theta2)
        return total / (2j * math.pi), (err + tail) / (2 * math.pi)

    def refusal(self, theta2, reciprocal=False):
        """
        Why theta2 cannot be evaluated by the integral formula, or None.

        :return: None or an exception instance (not raised)
        """
        z = complex(theta2)
        g = self.geometry
        if z.imag == 0 and z.real > g.theta2_plus:
            return CutError(f'theta2 = {z} lies on the cut (theta2^+, inf)')
        if not region_contains(self.params, z):
            return DomainRefusal(f'theta2 = {z} lies outside the region bounded by R')
        d = distance_to_curve(self.path, z)
        if d < self.settings.margin * self.scale:
            return DomainRefusal(f'theta2 = {z} is {d:.3g} from R (margin '
                                 f'{self.settings.margin * self.scale:.3g})', distance=d)
        if self.path.tangent and abs(z - g.theta2_at_t1m) < TANGENT_MARGIN * self.scale:
            return PoleError(f'theta2 = {z} is too close to the boundary pole at the vertex',
                             distance=abs(z - g.theta2_at_t1m))
        # The pole margin is relative to |p| when p is nearer to 0 than the kernel scale.
        pole_margin = self.settings.margin * min(self.scale, abs(g.p)) if g.p is not None else 0.0
        if self.chi == -1 and not reciprocal and abs(z - g.p) < pole_margin:
            return PoleError(f'theta2 = {z} is too close to the pole p = {g.p}',
                             distance=abs(z - g.p))
        return None

    def value(self, theta2, reciprocal=False):
        """
        phi1(theta2), or 1/phi1(theta2) with `reciprocal`, which stays
        finite through p.

        :return: LaplaceValue
        """
        problem = self.refusal(theta2, reciprocal)
        if problem is not None:
            raise problem
        z = complex(theta2)
        J, err = self.exponent(z)
        num, den = 1.0, 1.0
        if self.chi == -1:
            num, den = self.gluing.w0 - self.wp, complex(self.gluing.w(z)) - self.wp
        if reciprocal:
            val = np.exp(-J) * den / (self.nu1 * num)
        else:
            val = self.nu1 * num * np.exp(J) / den
        return LaplaceValue(complex(val), float(abs(val) * err), 'integral')


@lru_cache(maxsize=64)
def boundary_transform(params, settings=DEFAULT_SETTINGS):
    return BoundaryTransform(params, settings)


def phi1_eval(params, theta2, settings=DEFAULT_SETTINGS, reciprocal=False):
    """
    phi1 by the integral formula, for theta2 strictly inside the region
    bounded by R.

    :raises DomainRefusal: near R, near p, or outside the region
    """
    return boundary_transform(params, settings).value(theta2, reciprocal)


def phi2_eval(params, theta1, settings=DEFAULT_SETTINGS, reciprocal=False):
    return phi1_eval(params.swapped(), theta1, settings, reciprocal)


def _small_branch(params, theta2):
    g = geometry(params)
    z = complex(theta2)
    if z.imag == 0 and g.theta2_minus <= z.real <= g.theta2_plus:
        return complex(theta1_minus_real(params, z.real))
    return complex(theta1_branches(params, z)[0])


def _continued(params, theta2, settings, reciprocal, depth):
    z = complex(theta2)
    t1 = _small_branch(params, z)
    g1 = complex(gamma1(params, t1, z))
    g2 = complex(gamma2(params, t1, z))
    inner = phi1(params.swapped(), t1, settings, reciprocal=reciprocal, depth=depth - 1)
    scale = abs(params.r11 * t1) + abs(params.r21 * z) + abs(params.r12 * t1) + abs(params.r22 * z)
    if reciprocal:
        if abs(g2) <= 1e-14 * scale:
            raise DomainRefusal(f'gamma2 vanishes on the continuation at theta2 = {z}')
        ratio = -g1 / g2
    else:
        if abs(g1) <= 1e-12 * scale:
            raise PoleError(f'gamma1(Theta1^-(theta2), theta2) = 0 at theta2 = {z}: pole', distance=0.0)
        ratio = -g2 / g1
    return LaplaceValue(ratio * inner.value, abs(ratio) * inner.abs_error, 'continuation')


def phi1(params, theta2, settings=DEFAULT_SETTINGS, reciprocal=False, depth=CONTINUATION_DEPTH):
    """
    phi1 anywhere in its meromorphic continuation domain C minus [theta2^+, inf):
    the integral formula where it applies, else the continuation relation,
    recursing through phi2 at most `depth` times.
    """
    g = geometry(params)
    z = complex(theta2)
    if z.imag == 0 and z.real >= g.theta2_plus:
        raise CutError(f'theta2 = {z} lies on [theta2^+, inf), outside the continuation domain')
    t = boundary_transform(params, settings)
    problem = t.refusal(z, reciprocal)
    if problem is None:
        return t.value(z, reciprocal)
    if depth <= 0 or isinstance(problem, PoleError):
        raise problem
    return _continued(params, z, settings, reciprocal, depth)


def phi2(params, theta1, settings=DEFAULT_SETTINGS, reciprocal=False, depth=CONTINUATION_DEPTH):
    return phi1(params.swapped(), theta1, settings, reciprocal, depth)


def phi1_continuation(params, theta2, settings=DEFAULT_SETTINGS):
    """
    phi1 through the continuation relation with phi2 from its integral
    formula, on the domain Re theta2 <= 0 or Re Theta1^-(theta2) < 0.
    """
    z = complex(theta2)
    t1 = _small_branch(params, z)
    if not (z.real <= 0 or t1.real < 0):
        raise DomainRefusal(f'theta2 = {z} is outside the continuation domain (Re Theta1^- = {t1.real:.6g})')
    g1 = complex(gamma1(params, t1, z))
    g2 = complex(gamma2(params, t1, z))
    if abs(g1) <= 1e-12 * (abs(params.r11 * t1) + abs(params.r21 * z)):
        raise PoleError(f'gamma1(Theta1^-(theta2), theta2) = 0 at theta2 = {z}: pole', distance=0.0)
    inner = phi2_eval(params, t1, settings)
    ratio = -g2 / g1
    return LaplaceValue(ratio * inner.value, abs(ratio) * inner.abs_error, 'continuation')


def phi_interior(params, theta1, theta2, settings=DEFAULT_SETTINGS):
    """
    phi(theta) = -[gamma1 phi1(theta2) + gamma2 phi2(theta1)] / gamma(theta),
    for Re theta1 <= 0 and Re theta2 <= 0 off the zero set of gamma.
    """
    t1, t2 = complex(theta1), complex(theta2)
    if t1.real > 0 or t2.real > 0:
        raise DomainRefusal(f'phi needs Re theta <= 0, got ({t1}, {t2})')
    k = complex(gamma(params, t1, t2))
    if abs(k) <= KERNEL_ZERO_TOL * max(gamma_scale(params, t1, t2), 1e-300):
        raise DomainRefusal(f'gamma({t1}, {t2}) = {k} vanishes; try a nearby point')
    v1 = phi1(params, t2, settings)
    v2 = phi2(params, t1, settings)
    a1 = complex(gamma1(params, t1, t2))
    a2 = complex(gamma2(params, t1, t2))
    val = -(a1 * v1.value + a2 * v2.value) / k
    err = (abs(a1) * v1.abs_error + abs(a2) * v2.abs_error) / abs(k)
    return LaplaceValue(val, err, 'functional_equation')


def wedge_phi(wedge, theta1, theta2, settings=DEFAULT_SETTINGS):
    """
    Laplace transform of the stationary law of a wedge model,
    phi~(theta~) = phi(T1^T theta~) on its quadrant image.
    """
    params = wedge_to_quadrant(wedge)
    t = WedgeParams.T1(wedge.beta).T @ np.array([complex(theta1), complex(theta2)])
    return phi_interior(params, t[0], t[1], settings)


def skew_rates(params):
    """alpha = -2 diag(Sigma)^{-1} diag(R) R^{-1} mu."""
    x = np.linalg.solve(params.R, params.mu)
    return (-2 * params.r11 * x[0] / params.sigma11, -2 * params.r22 * x[1] / params.sigma22)


def _require_skew(params):
    require_valid(params)
    if not is_skew_symmetric(params):
        raise DomainRefusal('parameters are not skew symmetric; no exponential closed form')


def closed_form_skew(params, theta2):
    """phi1(theta2) = C/(alpha2 - theta2) with C = sigma11 alpha1 alpha2 / (2 r11)."""
    _require_skew(params)
    a1, a2 = skew_rates(params)
    z = complex(theta2)
    if z == a2:
        raise PoleError(f'closed form has its pole at alpha2 = {a2}', distance=0.0)
    C = params.sigma11 * a1 * a2 / (2 * params.r11)
    return LaplaceValue(C / (a2 - z), 0.0, 'closed_form_skew')


def closed_form_skew_phi2(params, theta1):
    return closed_form_skew(params.swapped(), theta1)


def closed_form_skew_phi(params, theta1, theta2):
    """Product form alpha1 alpha2 / ((alpha1 - theta1)(alpha2 - theta2))."""
    _require_skew(params)
    a1, a2 = skew_rates(params)
    val = a1 * a2 / ((a1 - complex(theta1)) * (a2 - complex(theta2)))
    return LaplaceValue(val, 0.0, 'closed_form_skew')


def density_skew(params, x1, x2):
    _require_skew(params)
    a1, a2 = skew_rates(params)
    return a1 * a2 * np.exp(-a1 * np.asarray(x1) - a2 * np.asarray(x2))


def closed_form_orthogonal(params, theta2):
    """
    For R = I: phi1(theta2) = -mu1 w'(0) theta2 / (w(theta2) - w(0)).
    Near 0 the difference quotient is replaced by w' at the midpoint.
    """
    require_valid(params)
    if not params.is_identity_reflection():
        raise DomainRefusal('closed form needs the identity reflection matrix')
    gm = gluing_map(params)
    z = complex(theta2)
    d0 = complex(gm.w_prime(0.0))
    if abs(z) < 1e-4 * geometry(params).scale:
        quotient = complex(gm.w_prime(0.5 * z))
    else:
        quotient = (complex(gm.w(z)) - gm.w0) / z
    return LaplaceValue(-params.mu1 * d0 / quotient, 0.0, 'closed_form_orthogonal')


def jump_consistency_residual(params, theta1, settings=DEFAULT_SETTINGS):
    """
    Relative residual of

        (gamma1/gamma2)(theta1, Theta2^+) phi1(Theta2^+) = (gamma1/gamma2)(theta1, Theta2^-) phi1(Theta2^-)

    at a real theta1 in (theta1^-, min(0, Theta1^{+-}(theta2^+))), where both
    sides equal -phi2(theta1). Past the abscissa of the top of the ellipse,
    Theta2^+(theta1) lies on the other branch of Theta1 and the relation
    needs phi1 on another sheet.
    """
    g = geometry(params)
    t1 = float(theta1)
    hi = min(0.0, top_abscissa(params))
    if not (g.theta1_minus < t1 < hi):
        raise DomainRefusal(f'theta1 = {t1} not in (theta1^-, min(0, top abscissa)) = '
                            f'({g.theta1_minus}, {hi})')
    lower, upper = theta2_real_branches(params, t1)
    sides = []
    for t2 in (upper, lower):
        ratio = complex(gamma1(params, t1, t2)) / complex(gamma2(params, t1, t2))
        sides.append(ratio * phi1(params, t2, settings).value)
    left, right = sides
    return abs(left - right) / max(abs(left), abs(right))
