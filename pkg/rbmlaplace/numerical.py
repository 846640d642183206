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

import math

import numpy as np

from rbmlaplace.excep import NumericalFailure
from rbmlaplace.model import ModelParams, validate

MAX_TRIES = 10_000


def nice_random_params(
        rng,
        variance_range = (0.5, 2.0),
        correlation_range = (-0.8, 0.8),
        drift_range = (-2.0, -0.3),
        reflection_range = (-0.8, 0.8),
        identity_reflection_lh = 0.0):
    """
    Generate a "nice random" valid parameter set.

    The kind of example you would set up by hand for a desk check: unit-ish
    variances, a moderate correlation, both drifts pointing into the corner,
    and reflection vectors that are not too oblique. Candidates failing
    validation are thrown away and drawn again.

    In the parameters, an "lh" suffix means "likelihood".

    :param rng: numpy Generator
    :param identity_reflection_lh: likelihood of using R = I
    :return: ModelParams
    """
    for _ in range(MAX_TRIES):
        s11, s22 = rng.uniform(*variance_range, size=2)
        rho = rng.uniform(*correlation_range)
        m1, m2 = rng.uniform(*drift_range, size=2)
        if rng.random() < identity_reflection_lh:
            r12 = r21 = 0.0
        else:
            r12, r21 = rng.uniform(*reflection_range, size=2)
        params = ModelParams(
            sigma11=float(s11), sigma12=float(rho * math.sqrt(s11 * s22)), sigma22=float(s22),
            mu1=float(m1), mu2=float(m2), r11=1.0, r12=float(r12), r21=float(r21), r22=1.0,
        )
        if validate(params).ok:
            return params
    raise NumericalFailure(f'no valid parameter set in {MAX_TRIES} draws')


def nice_random_orthogonal_params(rng, **kwargs):
    """Random valid set with R = I."""
    return nice_random_params(rng, identity_reflection_lh=1.0, **kwargs)


def nice_random_skew_symmetric_params(
        rng,
        variance_range = (0.5, 2.0),
        drift_range = (-2.0, -0.3),
        reflection_range = (-0.8, 0.8)):
    """
    Random valid set satisfying the skew-symmetry condition. R is drawn
    first, then sigma12 is solved for; draws where Sigma comes out
    indefinite are rejected.
    """
    for _ in range(MAX_TRIES):
        s11, s22 = rng.uniform(*variance_range, size=2)
        m1, m2 = rng.uniform(*drift_range, size=2)
        r12, r21 = rng.uniform(*reflection_range, size=2)
        s12 = 0.5 * (r21 * s11 + r12 * s22)
        if s12 * s12 >= 0.9 * s11 * s22:
            continue
        params = ModelParams(
            sigma11=float(s11), sigma12=float(s12), sigma22=float(s22),
            mu1=float(m1), mu2=float(m2), r11=1.0, r12=float(r12), r21=float(r21), r22=1.0,
        )
        if validate(params).ok:
            return params
    raise NumericalFailure(f'no valid skew-symmetric set in {MAX_TRIES} draws')


def nice_random_params_where(rng, predicate, max_tries=MAX_TRIES, **kwargs):
    """
    Rejection sampling: draw nice random sets until `predicate(params)` holds.

    :param predicate: callable on ModelParams; exceptions count as rejection
    """
    for _ in range(max_tries):
        params = nice_random_params(rng, **kwargs)
        try:
            if predicate(params):
                return params
        except (ArithmeticError, ValueError, NumericalFailure):
            continue
    raise NumericalFailure(f'predicate not met in {max_tries} draws')


def random_complex_points(rng, n, radius=3.0):
    """n points uniform in the disc of the given radius."""
    r = radius * np.sqrt(rng.random(n))
    t = 2 * math.pi * rng.random(n)
    return r * np.exp(1j * t)
