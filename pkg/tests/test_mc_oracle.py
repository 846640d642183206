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

from rbmlaplace import mc_oracle
from rbmlaplace.excep import DomainRefusal, InvalidParams
from rbmlaplace.mc_oracle import SimConfig, estimate_boundary_masses, estimate_phi, simulate, \
    solve_lcp2, worker_count
from rbmlaplace.model import ModelParams

from tests.conftest import CASE_1A, IDENTITY, check, check_close

SMALL = SimConfig(step_h=0.01, burn_in=1.0, horizon_T=2.0, n_paths=25, master_seed=7)


def test_lcp_cases():
    R = np.array([[1.0, 0.0], [1.0, 1.0]])
    w, l = solve_lcp2(R, [[0.5, 0.2], [-1.0, 2.0], [-1.0, -1.0], [0.3, -0.6]])
    np.testing.assert_allclose(w, [[0.5, 0.2], [0.0, 3.0], [0.0, 0.0], [0.3, 0.0]], atol=1e-15)
    np.testing.assert_allclose(l, [[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 0.6]], atol=1e-15)


def test_lcp_complementarity(rng):
    R = CASE_1A.R
    y = rng.normal(size=(500, 2))
    w, l = solve_lcp2(R, y)
    assert np.all(w >= 0) and np.all(l >= 0)
    np.testing.assert_allclose(w, y + l @ R.T, atol=1e-12)
    np.testing.assert_allclose(w * l, 0.0, atol=1e-12)


def test_config_validation():
    with pytest.raises(InvalidParams):
        SimConfig(step_h=0.1, burn_in=2.0, horizon_T=1.0)
    with pytest.raises(InvalidParams):
        SimConfig(n_paths=0)
    with pytest.raises(InvalidParams):
        SimConfig(scheme='milstein')
    check(SMALL.n_steps, '200')
    check(SMALL.n_burn, '100')
    check_close(SMALL.window, 1.0, rel=1e-12)


def test_worker_count(monkeypatch):
    monkeypatch.setenv('RBM_THREADS', '3')
    check(worker_count(), '3')
    monkeypatch.setenv('RBM_THREADS', 'many')
    with pytest.raises(InvalidParams):
        worker_count()


def test_simulation_is_deterministic_across_workers(monkeypatch):
    monkeypatch.setattr(mc_oracle, 'CHUNK_PATHS', 4)
    a = simulate(CASE_1A, SMALL, workers=1)
    monkeypatch.setattr(mc_oracle, 'CHUNK_PATHS', 7)
    b = simulate(CASE_1A, SMALL, workers=3)
    np.testing.assert_array_equal(a.positions, b.positions)
    np.testing.assert_array_equal(a.local_times, b.local_times)
    assert np.all(a.positions >= 0)
    assert np.all(a.local_times >= 0)
    check(len(a), '25')


def test_euler_scheme_stays_in_the_quadrant():
    config = SimConfig(step_h=0.01, burn_in=1.0, horizon_T=2.0, n_paths=25, scheme='euler')
    s = simulate(CASE_1A, config, workers=2)
    assert np.all(s.positions >= 0)
    sample = next(iter(s))
    assert sample.z1 >= 0 and sample.l1 >= 0


def test_zero_noise_collapses_to_the_corner():
    quiet = ModelParams(1e-12, 0.0, 1e-12, -1.0, -1.0, 1.0, 0.0, 0.0, 1.0)
    s = simulate(quiet, SMALL, workers=1)
    assert np.all(s.positions < 1e-4)
    m = estimate_boundary_masses(s)
    check_close(m.nu1, 1.0, rel=1e-3)
    check_close(m.nu2, 1.0, rel=1e-3)


def test_estimate_phi_normalization_and_refusal():
    s = simulate(IDENTITY, SMALL, workers=1)
    mean, err = estimate_phi(s, (0, 0))
    check(mean, '(1+0j)')
    check(err, '0.0')
    with pytest.raises(DomainRefusal):
        estimate_phi(s, (0.1, -1))


def test_identity_model_moderate_run():
    # With R = I and diagonal Sigma the bridge scheme is exact in law, so a
    # coarse step is enough.
    config = SimConfig(step_h=0.05, burn_in=20.0, horizon_T=21.0, n_paths=4000, master_seed=11)
    s = simulate(IDENTITY, config)
    for theta, expected in (((-1, -1), 4 / 9), ((-2, 0), 0.5), ((0, -2), 0.5)):
        mean, err = estimate_phi(s, theta)
        assert abs(mean - expected) < 4 * err
    m = estimate_boundary_masses(s)
    assert abs(m.nu1 - 1) < 4 * m.stderr1
    assert abs(m.nu2 - 1) < 4 * m.stderr2


@pytest.mark.slow
def test_identity_model_full_run():
    s = simulate(IDENTITY, SimConfig())
    for theta, expected in (((-1, -1), 4 / 9), ((-2, 0), 0.5), ((0, -2), 0.5)):
        mean, err = estimate_phi(s, theta)
        assert abs(mean - expected) < 3 * err
    m = estimate_boundary_masses(s)
    assert m.nu1 > 0 and m.nu2 > 0
    assert abs(m.nu1 - 1) < 3 * m.stderr1
    assert abs(m.nu2 - 1) < 3 * m.stderr2


def test_default_scheme_is_bridge():
    check(SimConfig().scheme, 'bridge')
    check(SimConfig(scheme='euler').scheme, 'euler')
    with pytest.raises(InvalidParams):
        SimConfig(scheme='milstein')
