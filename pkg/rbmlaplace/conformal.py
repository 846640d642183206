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
Generalized Chebyshev function T_a and the conformal gluing map

    w(theta2) = T_{pi/beta}( -(2 theta2 - (theta2^+ + theta2^-)) / (theta2^+ - theta2^-) ),

which identifies conjugate points of the hyperbola R and maps the region
bounded by R onto C minus (-inf, -1].
"""

import logging
import math
from functools import lru_cache

import numpy as np
from sympy import Rational, Symbol, chebyshevt_poly

from rbmlaplace.excep import CutError, DomainRefusal, NumericalFailure, PoleError
from rbmlaplace.kernel import geometry

logger = logging.getLogger(__name__)

# Below this distance from x = 1 the derivative of T_a uses its Taylor expansion.
SERIES_RADIUS = 1e-7


def _on_cut(x):
    x = np.asarray(x, dtype=complex)
    return (np.abs(x.imag) <= 1e-15 * np.maximum(1.0, np.abs(x.real))) & (x.real < -1 - 1e-12)


def _require_finite(val, a, x):
    bad = ~np.isfinite(val)
    if np.any(bad):
        where = np.asarray(x)[bad].ravel()[0]
        raise NumericalFailure(f'T_a with a = {a:.4g} overflows at x = {complex(where):.4g}')


def _log_base(x):
    """
    Principal log of x + sqrt(x^2 - 1), with the square root taken as
    sqrt(x - 1) * sqrt(x + 1) so that it behaves like x at infinity.
    """
    sq = np.sqrt(x - 1) * np.sqrt(x + 1)
    return np.log(x + sq), sq


def chebyshev_T(a, x):
    """
    T_a(x) = (1/2)[(x + sqrt(x^2-1))^a + (x - sqrt(x^2-1))^a].

    Analytic on C minus (-inf, -1]; evaluation on that ray is refused, since
    T_a is discontinuous across it for non-integer a.

    :param a: real exponent >= 0
    :param x: complex scalar or array
    """
    x = np.asarray(x, dtype=complex)
    if np.any(_on_cut(x)):
        raise CutError('T_a evaluated on its cut (-inf, -1); use a one-sided limit')
    log_z, _ = _log_base(x)
    # x - sqrt(x^2 - 1) is the reciprocal of x + sqrt(x^2 - 1).
    with np.errstate(over='ignore', divide='ignore', invalid='ignore'):
        val = 0.5 * (np.exp(a * log_z) + np.exp(a * np.log(np.exp(-log_z))))
    _require_finite(val, a, x)
    return val.item() if val.ndim == 0 else val


def chebyshev_T_trig(a, x):
    """cos(a arccos x), for real x in [-1, 1]."""
    return np.cos(a * np.arccos(np.clip(np.asarray(x, dtype=float), -1.0, 1.0)))


def chebyshev_T_prime(a, x):
    """Derivative of T_a, a sinh(a log z) / sqrt(x^2 - 1)."""
    x = np.asarray(x, dtype=complex)
    if np.any(_on_cut(x)):
        raise CutError("T_a' evaluated on its cut (-inf, -1)")
    log_z, sq = _log_base(x)
    with np.errstate(over='ignore', divide='ignore', invalid='ignore'):
        val = a * np.sinh(a * log_z) / sq
    near_one = np.abs(x - 1) < SERIES_RADIUS
    if np.any(near_one):
        val = np.where(near_one, a * a + (x - 1) * a * a * (a * a - 1) / 3, val)
    near_minus_one = np.abs(x + 1) < SERIES_RADIUS
    if np.any(near_minus_one):
        n = round(a)
        if abs(a - n) > 1e-9:
            raise DomainRefusal("T_a' is singular at the branch point x = -1")
        val = np.where(near_minus_one, (-1) ** (n + 1) * n * n, val)
    _require_finite(val, a, x)
    return val.item() if val.ndim == 0 else val


@lru_cache(maxsize=32)
def chebyshev_poly(n):
    """
    Coefficients of the classical Chebyshev polynomial T_n, highest degree
    first, ready for numpy.polyval.
    """
    x = Symbol('x')
    return tuple(float(c) for c in chebyshevt_poly(n, x, polys=True).all_coeffs())


class GluingMap:
    """
    The map w of a model, together with its normalized version
    W = (w + 1)/(w - w(q)), which sends the vertex of R to 0 and q to infinity.
    """

    def __init__(self, params):
        g = geometry(params)
        self.params = params
        self.beta = g.beta
        self.a = math.pi / g.beta
        self.centre = 0.5 * (g.theta2_plus + g.theta2_minus)
        self.half_width = 0.5 * (g.theta2_plus - g.theta2_minus)
        self.vertex = g.theta2_at_t1m
        self.q = g.q
        self.w0 = self.w(0.0)
        self.wq = self.w(self.q)
        self.w_vertex = self.w(self.vertex)
        if abs(self.w_vertex + 1) > 1e-12 * max(1.0, abs(self.w0)):
            raise NumericalFailure(f'w(vertex) = {self.w_vertex}, expected -1')

    def x_of(self, theta2):
        return -(np.asarray(theta2, dtype=complex) - self.centre) / self.half_width

    def w(self, theta2):
        return chebyshev_T(self.a, self.x_of(theta2))

    def w_prime(self, theta2):
        return chebyshev_T_prime(self.a, self.x_of(theta2)) * (-1.0 / self.half_width)

    def W(self, theta2):
        wv = np.asarray(self.w(theta2))
        if np.any(np.abs(wv - self.wq) <= 1e-14 * (1 + abs(self.wq))):
            raise PoleError('W evaluated at its pole q', distance=0.0)
        val = (wv + 1) / (wv - self.wq)
        return val.item() if val.ndim == 0 else val

    @property
    def is_polynomial(self):
        return abs(self.a - round(self.a)) < 1e-9

    @property
    def exponent_fraction(self):
        """
        pi/beta as a small-denominator rational when it is one to 1e-9,
        else None. A rational exponent makes w algebraic.
        """
        r = Rational(self.a).limit_denominator(24)
        return r if abs(float(r) - self.a) < 1e-9 else None

    def w_polynomial(self, theta2):
        """w through the classical polynomial T_n; only for integer pi/beta."""
        if not self.is_polynomial:
            raise DomainRefusal(f'pi/beta = {self.a} is not an integer')
        return np.polyval(chebyshev_poly(round(self.a)), self.x_of(theta2))

    def describe(self):
        frac = self.exponent_fraction
        return {
            'exponent': self.a,
            'exponent_fraction': None if frac is None else str(frac),
            'is_polynomial': self.is_polynomial,
            'w0': [self.w0.real, self.w0.imag],
            'wq': [self.wq.real, self.wq.imag],
        }


@lru_cache(maxsize=256)
def gluing_map(params):
    return GluingMap(params)


def w_eval(params, theta2):
    return gluing_map(params).w(theta2)


def w_prime(params, theta2):
    return gluing_map(params).w_prime(theta2)


def W_eval(params, theta2):
    return gluing_map(params).W(theta2)
