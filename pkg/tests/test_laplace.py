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
from scipy.integrate import dblquad

from rbmlaplace.excep import CutError, DomainRefusal, NumericalFailure, PoleError
from rbmlaplace.kernel import geometry, top_abscissa
from rbmlaplace.laplace import QuadratureSettings, closed_form_orthogonal, closed_form_skew, \
    closed_form_skew_phi, closed_form_skew_phi2, density_skew, jump_consistency_residual, \
    nu_masses, phi1, phi1_continuation, phi1_eval, phi2, phi2_eval, phi_interior, skew_rates, \
    wedge_phi
from rbmlaplace.model import ModelParams, quadrant_to_wedge_params, theta_map
from rbmlaplace.numerical import nice_random_orthogonal_params, nice_random_params, \
    nice_random_skew_symmetric_params

from tests.conftest import CASE_1A, CASE_1C, CASE_2A, IDENTITY, MASSES, SKEW, check, check_close

GRID = np.linspace(-5, -0.1, 25)


def identity_phi1(z):
    return 2 / (2 - z)


def test_value_at_zero_is_the_boundary_mass():
    check_close(phi1_eval(IDENTITY, 0.0).value, 1.0, rel=1e-12)
    check_close(phi2_eval(MASSES, 0.0).value, 2.0, rel=1e-12)


def test_value_at_zero_random(rng):
    for _ in range(100):
        p = nice_random_params(rng)
        expected = (p.r12 * p.mu2 - p.r22 * p.mu1) / p.det_R
        check_close(phi1_eval(p, 0.0).value, expected, rel=1e-8)


def test_nu_masses():
    m = nu_masses(MASSES)
    check_close(m.nu1_total, 1.0, rel=1e-14)
    check_close(m.nu2_total, 2.0, rel=1e-14)


def test_identity_phi1():
    v = phi1_eval(IDENTITY, -1.0)
    check_close(v.value, 2 / 3, rel=1e-8)
    assert v.abs_error < 1e-6
    check(v.method, 'integral')
    for z in (-0.5 + 2j, 0.5 - 1j, -3 - 0.25j):
        check_close(phi1_eval(IDENTITY, z).value, identity_phi1(z), rel=1e-8)


def test_conjugate_symmetry(rng):
    p = nice_random_params(rng)
    for z in (-1 + 0.5j, -0.2 - 0.3j):
        check_close(phi1(p, np.conj(z)).value, np.conj(phi1(p, z).value), rel=1e-9)


def test_orthogonal_closed_form(rng):
    for z in GRID:
        check_close(closed_form_orthogonal(IDENTITY, z).value, identity_phi1(z), rel=1e-12)
    check_close(closed_form_orthogonal(IDENTITY, 0.0).value, 1.0, rel=1e-12)
    for _ in range(20):
        p = nice_random_orthogonal_params(rng)
        for z in GRID:
            check_close(phi1_eval(p, z).value, closed_form_orthogonal(p, z).value, rel=1e-6)


def test_skew_closed_form(rng):
    for _ in range(20):
        p = nice_random_skew_symmetric_params(rng)
        for z in GRID:
            check_close(phi1_eval(p, z).value, closed_form_skew(p, z).value, rel=1e-6)
            check_close(phi2_eval(p, z).value, closed_form_skew_phi2(p, z).value, rel=1e-6)


def test_skew_closed_form_at_the_tangent_vertex():
    for z in GRID:
        check_close(phi1_eval(SKEW, z).value, closed_form_skew(SKEW, z).value, rel=1e-6)


def test_skew_product_form():
    check_close(closed_form_skew_phi(IDENTITY, -1.0, -1.0).value, 4 / 9, rel=1e-14)
    a1, a2 = skew_rates(SKEW)
    check_close(a1, 4 / 3, rel=1e-14)
    check_close(density_skew(SKEW, 0.0, 0.0), a1 * a2, rel=1e-14)
    with pytest.raises(DomainRefusal):
        closed_form_skew(CASE_1A, -1.0)
    with pytest.raises(DomainRefusal):
        closed_form_orthogonal(CASE_1A, -1.0)


def test_skew_density_integrates_to_one():
    total, _ = dblquad(lambda y, x: density_skew(SKEW, x, y), 0, np.inf, 0, np.inf)
    check_close(total, 1.0, rel=1e-8)


def test_continuation_on_identity():
    for z in (-0.3, -1 + 1j, -2 + 0.5j):
        v = phi1_continuation(IDENTITY, z)
        check(v.method, 'continuation')
        check_close(v.value, identity_phi1(z), rel=1e-8)


def test_continuation_agrees_with_integral(rng):
    compared = 0
    for _ in range(50):
        p = nice_random_params(rng)
        scale = geometry(p).scale
        for z in (-0.3 * scale, -0.5 * scale + 0.2j * scale):
            try:
                direct = phi1_eval(p, z).value
                continued = phi1_continuation(p, z).value
            except DomainRefusal:
                continue
            check_close(continued, direct, rel=1e-6)
            compared += 1
    assert compared > 0


def test_continuation_domain():
    with pytest.raises(DomainRefusal):
        # Re theta2 > 0 and Re Theta1^-(theta2) > 0.
        phi1_continuation(IDENTITY, 2.2 + 0.1j)


def test_dispatch_beyond_the_curve():
    v = phi1(IDENTITY, 1.5)
    check(v.method, 'continuation')
    check_close(v.value, 4.0, rel=1e-8)
    check_close(phi1(IDENTITY, 1.5 + 0.7j).value, identity_phi1(1.5 + 0.7j), rel=1e-8)
    check_close(phi2(IDENTITY, 1.2).value, identity_phi1(1.2), rel=1e-8)


def test_dispatch_refusals():
    with pytest.raises(PoleError):
        phi1(IDENTITY, 2.0)
    with pytest.raises(CutError):
        phi1(IDENTITY, 3.0)
    check_close(phi1(IDENTITY, 2.0, reciprocal=True).value, 0.0, abs_=1e-12)


def test_refusal_near_the_curve():
    with pytest.raises(DomainRefusal) as info:
        phi1_eval(IDENTITY, 1 - 1e-5)
    assert info.value.distance < 1e-3


def test_pole_inside_the_region():
    p = geometry(CASE_1A).p
    with pytest.raises(PoleError):
        phi1_eval(CASE_1A, p)
    check_close(phi1_eval(CASE_1A, p, reciprocal=True).value, 0.0, abs_=1e-9)
    v = phi1_eval(CASE_1A, 0.5).value
    r = phi1_eval(CASE_1A, 0.5, reciprocal=True).value
    check_close(v * r, 1.0, rel=1e-12)


def test_interior_identity():
    check_close(phi_interior(IDENTITY, -1.0, -1.0).value, 4 / 9, rel=1e-8)
    z1, z2 = -0.5 + 0.3j, -1 - 0.2j
    check_close(phi_interior(IDENTITY, z1, z2).value, closed_form_skew_phi(IDENTITY, z1, z2).value,
                rel=1e-8)
    with pytest.raises(DomainRefusal):
        phi_interior(IDENTITY, 0.0, 0.0)
    with pytest.raises(DomainRefusal):
        phi_interior(IDENTITY, 0.5, -1.0)


def test_interior_value_near_the_origin_tends_to_one(rng):
    p = nice_random_params(rng)
    check_close(phi_interior(p, -1e-4, -2e-4).value, 1.0, rel=1e-3)


def test_jump_consistency():
    for params in (IDENTITY, CASE_2A, CASE_1C):
        t1m = geometry(params).theta1_minus
        for k in range(1, 6):
            assert jump_consistency_residual(params, t1m * k / 6) < 1e-5


def test_jump_consistency_random(rng):
    checked = 0
    for _ in range(20):
        params = nice_random_params(rng)
        lo = geometry(params).theta1_minus
        hi = min(0.0, top_abscissa(params))
        for k in range(20):
            t1 = lo + (hi - lo) * (k + 0.5) / 20
            try:
                residual = jump_consistency_residual(params, t1)
            except DomainRefusal:
                continue
            assert residual < 1e-5
            checked += 1
    assert checked >= 200


def test_jump_consistency_stops_at_the_top_of_the_ellipse():
    params = ModelParams(1.7828, 1.0768, 1.7919, -1.1978, -1.5341, 1.0, 0.2332, 0.3519, 1.0)
    top = top_abscissa(params)
    assert top < 0
    with pytest.raises(DomainRefusal):
        jump_consistency_residual(params, 0.5 * top)
    with pytest.raises(DomainRefusal):
        jump_consistency_residual(params, top)


def test_pole_margin_is_relative_to_p():
    params = ModelParams(1.0, -0.99, 1.0, -1.0, -0.7, 1.0, -0.5, 0.6, 1.0)
    g = geometry(params)
    assert g.p < 1e-3 * g.scale
    check_close(phi1_eval(params, 0.0).value, nu_masses(params).nu1_total, rel=1e-12)


def test_split_budget_is_enforced():
    # Close to R a single Gauss-Legendre pass per panel is far from tol.
    tight = QuadratureSettings(max_splits=0)
    with pytest.raises(NumericalFailure) as info:
        phi1_eval(IDENTITY, 0.99, tight)
    assert info.value.bound > tight.tol
    check_close(phi1_eval(IDENTITY, 0.99).value, identity_phi1(0.99), rel=1e-8)


def test_strong_correlation_terminates():
    params = ModelParams(1.0, -0.993, 1.0, -1.0, -0.7, 1.0, 0.0, 0.0, 1.0)
    try:
        v = phi1_eval(params, -0.5)
    except NumericalFailure:
        return
    assert np.isfinite(v.value)


WEDGE_POINTS = ((-0.5, -0.7), (-1 + 0.3j, -0.4), (-0.2, -1.5), (-2.0, -0.1 + 0.5j), (-0.8 - 0.6j, -0.9))


def test_wedge_transform(rng):
    compared = 0
    for _ in range(100):
        p = nice_random_params(rng)
        w = quadrant_to_wedge_params(p)
        M_inv = np.linalg.inv(theta_map(p))
        for theta in WEDGE_POINTS:
            tt = M_inv @ np.array(theta, dtype=complex)
            try:
                expected = phi_interior(p, *theta).value
                actual = wedge_phi(w, tt[0], tt[1]).value
            except DomainRefusal:
                continue
            check_close(actual, expected, rel=1e-6)
            compared += 1
    assert compared >= 250


def test_loose_settings():
    loose = QuadratureSettings(tol=1e-6)
    v = phi1_eval(IDENTITY, -1.0, loose)
    check_close(v.value, 2 / 3, rel=1e-5)
