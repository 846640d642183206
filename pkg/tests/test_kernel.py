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

from rbmlaplace.kernel import branch_points, compute_p, compute_p_prime, compute_q, gamma, gamma1, \
    gamma_scale, geometry, tangency_ordinate, tangency_sign, theta1_branches, theta2_branches, \
    theta2_real_branches
from rbmlaplace.numerical import nice_random_params, random_complex_points

from tests.conftest import CASE_1A, CASE_1C, CASE_2A, IDENTITY, check, check_close


def test_identity_geometry():
    g = geometry(IDENTITY)
    check_close(g.theta1_minus, 1 - math.sqrt(2), rel=1e-14)
    check_close(g.theta1_plus, 1 + math.sqrt(2), rel=1e-14)
    check_close(g.theta2_minus, 1 - math.sqrt(2), rel=1e-14)
    check_close(g.theta2_plus, 1 + math.sqrt(2), rel=1e-14)
    check_close(g.theta2_at_t1m, 1.0, rel=1e-14)
    check_close(g.beta, math.pi / 2, rel=1e-15)
    check_close(g.p, 2.0, rel=1e-14)
    assert g.p_prime is None
    check_close(g.p_prime_abscissa, 2.0, rel=1e-12)
    check(g.gamma1_tangency_sign, '-1')
    check_close(g.q, 0.5, rel=1e-14)


def test_case_1a_geometry():
    g = geometry(CASE_1A)
    check_close(g.theta1_minus, 1 - math.sqrt(5), rel=1e-14)
    check_close(g.theta2_plus, 2 + math.sqrt(5), rel=1e-14)
    check_close(g.theta2_at_t1m, 2.0, rel=1e-14)
    check_close(g.p, 1.0, rel=1e-14)
    check(g.gamma1_tangency_sign, '1')
    check_close(g.q, g.p, rel=0)


def test_case_1c_p_prime():
    g = geometry(CASE_1C)
    assert g.p is None
    check_close(g.p_prime_abscissa, 0.4 / 1.64, rel=1e-10)
    r = g.p_prime_abscissa
    check_close(g.p_prime, 1 + math.sqrt(1 + 2 * r - r * r), rel=1e-10)
    assert g.theta2_at_t1m <= g.p_prime < g.theta2_plus


def test_case_2a_has_neither_pole():
    assert compute_p(CASE_2A) is None
    assert compute_p_prime(CASE_2A).value is None


def test_branch_points_opposite_signs(rng):
    for _ in range(100):
        bp = branch_points(nice_random_params(rng))
        assert bp.theta1_minus < 0 < bp.theta1_plus
        assert bp.theta2_minus < 0 < bp.theta2_plus


def test_branches_solve_the_kernel(rng):
    for _ in range(20):
        p = nice_random_params(rng)
        t2 = random_complex_points(rng, 50)
        for t1 in theta1_branches(p, t2):
            r = np.abs(gamma(p, t1, t2)) / np.maximum(gamma_scale(p, t1, t2), 1e-300)
            assert np.all(r < 1e-12)
        for b in theta2_branches(p, t2):
            r = np.abs(gamma(p, t2, b)) / np.maximum(gamma_scale(p, t2, b), 1e-300)
            assert np.all(r < 1e-12)


def test_p_lies_on_gamma1_zero_line(rng):
    seen = 0
    for _ in range(50):
        params = nice_random_params(rng)
        g = geometry(params)
        if g.p is None:
            continue
        seen += 1
        lower, upper = theta2_real_branches(params.swapped(), g.p)
        t1 = lower
        assert abs(gamma1(params, t1, g.p)) < 1e-9 * g.scale
        assert 0 < g.p <= g.theta2_plus
    assert seen > 0


def test_tangency_sign_matches_p_position(rng):
    # gamma1 > 0 at the tangency point exactly when p sits below the vertex.
    for _ in range(50):
        params = nice_random_params(rng)
        g = geometry(params)
        if tangency_sign(params) > 0:
            assert g.p is not None and g.p < g.theta2_at_t1m + 1e-9 * g.scale
        elif g.p is not None:
            assert g.p >= g.theta2_at_t1m - 1e-9 * g.scale


def test_geometry_is_cached():
    assert geometry(IDENTITY) is geometry(IDENTITY)


def test_vertex_and_q_identity():
    check_close(tangency_ordinate(IDENTITY), 1.0, rel=1e-14)
    assert tangency_sign(IDENTITY) < 0
    check_close(compute_q(IDENTITY), 0.5, rel=1e-14)


def test_vertex_is_double_root(rng):
    for _ in range(10):
        params = nice_random_params(rng)
        t1 = geometry(params).theta1_minus
        t2 = tangency_ordinate(params)
        lo, hi = theta2_real_branches(params, t1)
        check_close(lo, t2, rel=1e-6, abs_=1e-6)
        check_close(hi, t2, rel=1e-6, abs_=1e-6)
