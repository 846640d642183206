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

import numpy as np
import pytest

from rbmlaplace.model import ModelParams


class bcolors:
    """
    See <https://stackoverflow.com/a/287944>
    """
    HEADER = '\033[95m'
    OKBLUE = '\033[94m'
    OKGREEN = '\033[92m'
    WARNING = '\033[93m'
    FAIL = '\033[91m'
    ENDC = '\033[0m'
    BOLD = '\033[1m'
    UNDERLINE = '\033[4m'


def check(a, e, do_assert=True):
    """
    Check an "actual" value (a) against an "expected" string (e).
    """
    if do_assert:
        if str(a) != e:
            print(f'{bcolors.FAIL}{a}{bcolors.ENDC}')
            print(bcolors.OKGREEN + e + bcolors.ENDC)
        else:
            print(a)
        assert str(a) == e
    else:
        print(a)
        print("    ASSERTION SKIPPED")


def check_close(a, e, rel=1e-9, abs_=0.0, do_assert=True):
    """
    Check an "actual" number (a) against an "expected" one (e), real or
    complex, to within max(rel * |e|, abs_).
    """
    err = abs(complex(a) - complex(e))
    bound = max(rel * abs(complex(e)), abs_)
    if err > bound:
        print(f'{bcolors.FAIL}{a}{bcolors.ENDC}  (error {err:.3g} > {bound:.3g})')
        print(f'{bcolors.OKGREEN}{e}{bcolors.ENDC}')
    else:
        print(f'{a}  (error {err:.3g})')
    if do_assert:
        assert err <= bound
    else:
        print("    ASSERTION SKIPPED")


def model(sigma, mu, R):
    return ModelParams.from_matrices(sigma, mu, R)


I2 = ((1.0, 0.0), (0.0, 1.0))

# Sigma = I, mu = (-1, -1), R = I: phi1 = 2/(2 - theta2), phi = 4/((2-t1)(2-t2)).
IDENTITY = model(I2, (-1.0, -1.0), I2)

# p = 1 below the vertex 2: case 1a, index -1.
CASE_1A = model(I2, (-1.0, -2.0), ((1.0, 0.0), (1.0, 1.0)))

# p absent, p' = Theta2^+(r) with r ~ 0.2439: case 1c.
CASE_1C = model(I2, (-1.0, -1.0), ((1.0, 0.8), (-0.5, 1.0)))

# p and p' both absent: case 2a.
CASE_2A = model(I2, (-1.0, -1.0), ((1.0, -0.5), (-0.5, 1.0)))

# Boundary masses -R^{-1} mu = (1, 2).
MASSES = model(I2, (-1.0, -3.0), ((1.0, 0.0), (1.0, 1.0)))

# Correlated and skew symmetric: 2 sigma12 = r21 sigma11 + r12 sigma22.
SKEW = model(((1.0, 0.5), (0.5, 1.0)), (-1.0, -1.0), ((1.0, 0.5), (0.5, 1.0)))

NAMED_MODELS = [IDENTITY, CASE_1A, CASE_1C, CASE_2A, MASSES, SKEW]


@pytest.fixture
def rng():
    return np.random.default_rng(20230917)
