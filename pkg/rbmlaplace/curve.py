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
The lower half R^- of the hyperbola R, the jump function G on it, and the
index (delta, Delta, chi) of the boundary value problem.

R^- is parametrized by s >= 0 through theta1 = theta1^- - s^2. In s the
square-root behaviour of Theta2 at the vertex disappears, and

    theta2(s) = ( -(sigma12 theta1 + mu2) - i s sqrt(det Sigma (d1 + s^2)) ) / sigma22,

with d1 = theta1^+ - theta1^-.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from rbmlaplace.conformal import gluing_map
from rbmlaplace.excep import NumericalFailure, TangencyError
from rbmlaplace.kernel import TANGENCY_TOL, gamma1, gamma2, geometry

logger = logging.getLogger(__name__)

# Largest phase increment of G allowed between consecutive breakpoints.
PHASE_STEP = math.pi / 8
# Default bound on the truncated tail of the Cauchy integral.
DEFAULT_PATH_TOL = 1e-10
# Default s_max, in units of sqrt(theta1^+ - theta1^-).
S_MAX_UNITS = 1e6
# Required agreement between the terminal phase of G and its limit at infinity.
LIMIT_PHASE_TOL = 1e-7
# Magnitude of w(theta2) - w(0) the tail bound of a path is certified for.
DEFAULT_REACH = 1e3
# Smallest relative step the phase tracking may bisect down to.
MIN_STEP = 1e-14
# Tangency values this close to 0 are also tracked in the tangent regime.
NEAR_TANGENCY_BAND = 10 * TANGENCY_TOL


def _s_unit(g):
    return math.sqrt(g.theta1_plus - g.theta1_minus)


def hyperbola_point(params, s):
    """
    The point of R^- above theta1 = theta1^- - s^2 (nonpositive imaginary
    part). s = 0 is the vertex Theta2^{+-}(theta1^-).
    """
    g = geometry(params)
    s = np.asarray(s, dtype=float)
    t1 = g.theta1_minus - s * s
    root = s * np.sqrt(params.det_sigma * (g.theta1_plus - g.theta1_minus + s * s))
    t2 = (-(params.sigma12 * t1 + params.mu2) - 1j * root) / params.sigma22
    return t2.item() if t2.ndim == 0 else t2


def hyperbola_derivative(params, s):
    """d theta2 / ds along R^-."""
    g = geometry(params)
    s = np.asarray(s, dtype=float)
    d1 = g.theta1_plus - g.theta1_minus
    dt2 = (2 * params.sigma12 * s
           - 1j * math.sqrt(params.det_sigma) * (d1 + 2 * s * s) / np.sqrt(d1 + s * s)) / params.sigma22
    return dt2.item() if dt2.ndim == 0 else dt2


def hyperbola_residual(params, theta2):
    """
    Relative residual of the real equation of R,

        sigma22 (sigma12^2 - sigma11 sigma22) x^2 + sigma12^2 sigma22 y^2
            - 2 sigma22 (sigma11 mu2 - sigma12 mu1) x = mu2 (sigma11 mu2 - 2 sigma12 mu1),

    at theta2 = x + i y.
    """
    z = np.asarray(theta2, dtype=complex)
    x, y = z.real, z.imag
    s11, s12, s22, m1, m2 = params.sigma11, params.sigma12, params.sigma22, params.mu1, params.mu2
    terms = [
        s22 * (s12 ** 2 - s11 * s22) * x * x,
        s12 ** 2 * s22 * y * y,
        -2 * s22 * (s11 * m2 - s12 * m1) * x,
        -m2 * (s11 * m2 - 2 * s12 * m1) * np.ones_like(x),
    ]
    scale = sum(np.abs(t) for t in terms)
    r = np.abs(sum(terms)) / scale
    return r.item() if r.ndim == 0 else r


def G_eval(params, s):
    """
    Jump function on R^-,

        G = gamma1(theta1, theta2) gamma2(theta1, conj theta2)
            / (gamma2(theta1, theta2) gamma1(theta1, conj theta2)),

    with theta1 = theta1^- - s^2 real and theta2 = hyperbola_point(s).
    Unit modulus. At s = 0 in the tangency regime the quotient is 0/0 and
    TangencyError is raised; its limit there is -1.
    """
    g = geometry(params)
    s = np.asarray(s, dtype=float)
    if g.gamma1_tangency_sign == 0 and np.any(s == 0):
        raise TangencyError('G is 0/0 at the vertex: gamma1 vanishes at the tangency point')
    t1 = g.theta1_minus - s * s
    t2 = np.asarray(hyperbola_point(params, s))
    g1 = gamma1(params, t1, t2)
    g2 = gamma2(params, t1, t2)
    G = (g1 * np.conj(g2)) / (g2 * np.conj(g1))
    G = np.asarray(G)
    return G.item() if G.ndim == 0 else G


def limit_phase(params):
    """
    The phase of G at the far end of R^-, reduced into (0, 2 pi). It is
    delta + Delta modulo 2 pi.
    """
    num = params.det_R * math.sqrt(params.det_sigma)
    den = (params.sigma12 * (params.r11 * params.r22 + params.r12 * params.r21)
           - params.sigma22 * params.r11 * params.r12 - params.sigma11 * params.r22 * params.r21)
    return 2 * math.atan2(num, den)


def _wrap(angle):
    """Reduce into (-pi, pi]."""
    return -math.remainder(-angle, 2 * math.pi)


@dataclass(frozen=True)
class HyperbolaPath:
    """
    Breakpoints along R^-, from the vertex outward, with the continuously
    unwrapped log G at each of them. Consecutive phases differ by less than
    PHASE_STEP. Immutable once built.
    """
    params: object
    breakpoints: np.ndarray
    node_params: np.ndarray
    nodes: np.ndarray
    dtheta_ds: np.ndarray
    G: np.ndarray
    log_G: np.ndarray
    delta: float
    tangent: bool
    log_G_inf: complex
    limit_phase: float
    tail_bound: float
    reach: float

    @property
    def s_max(self):
        return float(self.breakpoints[-1])

    @property
    def terminal_phase(self):
        return float(self.log_G[-1].imag)

    def log_G_between(self, s, k):
        """
        log G at points s of the k-th panel [breakpoints[k], breakpoints[k+1]],
        continued from the breakpoint at its left end.
        """
        G = np.asarray(G_eval(self.params, s))
        return self.log_G[k] + 1j * np.angle(G / self.G[k]) + np.log(np.abs(G))

    def rows(self):
        """(s, Re theta2, Im theta2, Re log G, Im log G) per breakpoint."""
        return [
            (float(s), float(z.real), float(z.imag), float(l.real), float(l.imag))
            for s, z, l in zip(self.breakpoints, self.nodes, self.log_G)
        ]


def build_path(params, tol=DEFAULT_PATH_TOL, s_max=None, reach=DEFAULT_REACH, tangent=None):
    """
    Track log G along R^- by nearest-branch continuation, bisecting any step
    whose phase increment reaches PHASE_STEP, and stop once the terminal
    phase has converged to the limit at infinity and the remainder of the
    Cauchy integral beyond the last breakpoint is below `tol`.

    :param tol: bound on the remainder, certified for |w(theta2) - w(0)| <= reach
    :param s_max: largest s allowed; defaults to S_MAX_UNITS natural units
    :param tangent: track in the tangent regime (start at G = -1, delta = pi);
        None follows the tangency sign
    :raises NumericalFailure: if the bound is not reached by s_max
    :return: HyperbolaPath
    """
    if tol <= 0:
        raise ValueError('tol must be positive')
    g = geometry(params)
    gm = gluing_map(params)
    unit = _s_unit(g)
    if s_max is None:
        s_max = S_MAX_UNITS * unit
    if tangent is None:
        tangent = g.gamma1_tangency_sign == 0
    delta = math.pi if tangent else 0.0
    h_phase = limit_phase(params)

    ss = [0.0]
    Gs = [-1.0 + 0j if tangent else complex(G_eval(params, 0.0))]
    phases = [delta]

    def advance(s_next):
        stack = [s_next]
        while stack:
            target = stack[-1]
            G_t = complex(G_eval(params, target))
            step = float(np.angle(G_t / Gs[-1]))
            if abs(step) < PHASE_STEP:
                stack.pop()
                ss.append(target)
                Gs.append(G_t)
                phases.append(phases[-1] + step)
                continue
            if target - ss[-1] < MIN_STEP * (1 + ss[-1]):
                raise NumericalFailure(f'phase tracking of G stalled near s = {ss[-1]:.6g}')
            stack.append(0.5 * (ss[-1] + target))

    for s in np.linspace(0, unit, 17)[1:]:
        advance(float(s))
    bound = math.inf
    s = unit
    while True:
        s *= math.sqrt(2)
        if s > s_max:
            raise NumericalFailure(
                f'tail bound not met by s_max = {s_max:.3g} (achieved {bound:.3g})', bound=bound)
        advance(s)
        lim_err = abs(_wrap(h_phase - phases[-1]))
        try:
            with np.errstate(over='ignore'):
                wS = float(np.abs(gm.w(hyperbola_point(params, s))))
        except NumericalFailure:
            wS = math.inf
        if not math.isfinite(wS):
            raise NumericalFailure(f'gluing map overflows at s = {s:.3g} (pi/beta = {gm.a:.4g}); '
                                   f'achieved tail bound {bound:.3g}', bound=bound)
        if wS <= 4 * reach:
            continue
        bound = lim_err * reach / (wS - reach) / (2 * math.pi)
        if lim_err < LIMIT_PHASE_TOL and bound < tol:
            break

    breakpoints = np.array(ss)
    G = np.array(Gs)
    phase = np.array(phases)
    total = phases[-1] + _wrap(h_phase - phases[-1])
    path = HyperbolaPath(
        params=params,
        breakpoints=breakpoints,
        node_params=g.theta1_minus - breakpoints ** 2,
        nodes=np.asarray(hyperbola_point(params, breakpoints)),
        dtheta_ds=np.asarray(hyperbola_derivative(params, breakpoints)),
        G=G,
        log_G=1j * phase,
        delta=delta,
        tangent=tangent,
        log_G_inf=1j * total,
        limit_phase=h_phase,
        tail_bound=bound,
        reach=reach,
    )
    logger.debug('path: %d breakpoints, s_max %.4g, terminal phase %.10f, tail bound %.3g',
                 len(ss), ss[-1], phases[-1], bound)
    return path


def region_contains(params, theta2):
    """
    Whether theta2 lies in the open region bounded by R that contains 0.
    R is a graph over the imaginary axis, so it is enough to compare real
    parts with the point of R at the same height.
    """
    g = geometry(params)
    z = complex(theta2)
    c = (z.imag * params.sigma22) ** 2 / params.det_sigma
    d1 = g.theta1_plus - g.theta1_minus
    s2 = 2 * c / (d1 + math.sqrt(d1 * d1 + 4 * c))
    x_r = -(params.sigma12 * (g.theta1_minus - s2) + params.mu2) / params.sigma22
    return z.real < x_r


def distance_to_curve(path, theta2):
    """
    Distance from theta2 to R (both halves), refined locally around the
    nearest breakpoint.
    """
    z = complex(theta2)
    # R is symmetric about the real axis: measure in the lower half.
    z = z.conjugate() if z.imag > 0 else z
    k = int(np.argmin(np.abs(path.nodes - z)))
    lo = path.breakpoints[max(k - 1, 0)]
    hi = path.breakpoints[min(k + 1, len(path.breakpoints) - 1)]
    if hi <= lo:
        return float(abs(path.nodes[k] - z))
    res = minimize_scalar(lambda s: abs(hyperbola_point(path.params, s) - z),
                          bounds=(lo, hi), method='bounded',
                          options={'xatol': 1e-12 * max(hi, 1.0)})
    return float(min(res.fun, abs(path.nodes[k] - z)))


@dataclass(frozen=True)
class IndexData:
    delta: float
    Delta: float
    chi: int
    Delta_from_formula: float
    Delta_from_tracking: float
    near_tangency: bool = False
    chi_tangent_regime: Optional[int] = None

    @property
    def regimes_agree(self):
        return self.chi_tangent_regime is None or self.chi_tangent_regime == self.chi

    def to_dict(self):
        d = {
            'delta': self.delta, 'Delta': self.Delta, 'chi': self.chi,
            'Delta_from_formula': self.Delta_from_formula,
            'Delta_from_tracking': self.Delta_from_tracking,
            'near_tangency': self.near_tangency,
        }
        if self.chi_tangent_regime is not None:
            d['chi_tangent_regime'] = self.chi_tangent_regime
            d['regimes_agree'] = self.regimes_agree
        return d


def compute_index(params, path=None):
    """
    delta from the tangency rule, Delta from the tracked phase of G, and
    chi = floor((delta + Delta)/(2 pi)). The tracked value is checked against
    the closed-form limit phase and chi against the sign rule
    (chi = -1 iff gamma1 > 0 at the tangency point).

    Within NEAR_TANGENCY_BAND of the tangent regime, the index is also
    tracked as if gamma1 vanished at the vertex (delta = pi); that chi is
    reported next to the regular one and a disagreement is logged.

    :raises NumericalFailure: if any cross-check disagrees
    :return: IndexData
    """
    g = geometry(params)
    if path is None:
        path = build_path(params)
    sign = g.gamma1_tangency_sign
    delta = math.pi if sign == 0 else 0.0
    tracked = path.terminal_phase
    h = path.limit_phase
    formula = min((h, h - 2 * math.pi), key=lambda c: abs(c - tracked))
    if abs(formula - tracked) >= 1e-6:
        raise NumericalFailure(
            f'index cross-check failed: tracked delta+Delta = {tracked:.10f}, '
            f'closed form gives {formula:.10f}'
        )
    if not (-2 * math.pi < tracked < 2 * math.pi):
        raise NumericalFailure(f'delta + Delta = {tracked} outside (-2 pi, 2 pi)')
    chi = math.floor(tracked / (2 * math.pi))
    expected = -1 if sign > 0 else 0
    if chi != expected:
        raise NumericalFailure(
            f'index chi = {chi} from phase tracking but {expected} from the tangency sign {sign}'
        )
    near = sign != 0 and abs(g.gamma1_tangency_value) <= NEAR_TANGENCY_BAND
    chi_tangent = None
    if near:
        alt = build_path(params, tol=max(path.tail_bound, DEFAULT_PATH_TOL), reach=path.reach,
                         tangent=True)
        chi_tangent = math.floor(alt.terminal_phase / (2 * math.pi))
        if chi_tangent != chi:
            logger.warning('tangency value %.3g lies in the near-tangency band and the two regimes '
                           'disagree: chi = %d, tangent regime gives %d',
                           g.gamma1_tangency_value, chi, chi_tangent)
        else:
            logger.warning('tangency value %.3g lies in the near-tangency band; both regimes give '
                           'chi = %d', g.gamma1_tangency_value, chi)
    return IndexData(
        delta=delta,
        Delta=path.log_G_inf.imag - delta,
        chi=chi,
        Delta_from_formula=formula - delta,
        Delta_from_tracking=tracked - delta,
        near_tangency=near,
        chi_tangent_regime=chi_tangent,
    )
