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
Monte Carlo oracle: simulate the reflected diffusion to stationarity and
estimate phi and the boundary masses, using nothing from the analytic side
but the parameters.
"""

import logging
import math
import os
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky

from rbmlaplace.excep import DomainRefusal, InvalidParams, NumericalFailure
from rbmlaplace.model import require_valid

logger = logging.getLogger(__name__)

# Steps of normals (and uniforms) drawn per path at a time.
BLOCK_STEPS = 1000
# Paths simulated together in one vectorized chunk.
CHUNK_PATHS = 1000
# Negative slack tolerated in the complementarity solution before clamping.
LCP_SLACK = 1e-12

SCHEMES = ('bridge', 'euler')


def worker_count():
    """Worker threads: RBM_THREADS if set, else the CPU count."""
    env = os.environ.get('RBM_THREADS')
    if env:
        try:
            n = int(env)
        except ValueError:
            raise InvalidParams(f'RBM_THREADS must be an integer, got {env!r}')
        return max(n, 1)
    return os.cpu_count() or 1


@dataclass(frozen=True)
class SimConfig:
    """
    :param step_h: time step
    :param burn_in: time after which local time starts to accumulate
    :param horizon_T: final time; the window (burn_in, horizon_T] is measured
    :param n_paths: independent paths, all started at the corner
    :param master_seed: root of the per-path seed tree
    :param scheme: 'bridge' runs the complementarity step on the Brownian
        bridge minima of each step, 'euler' on the stepped point
    """
    step_h: float = 1e-3
    burn_in: float = 50.0
    horizon_T: float = 51.0
    n_paths: int = 10_000
    master_seed: int = 0
    scheme: str = 'bridge'

    def __post_init__(self):
        if not (0 < self.step_h < self.burn_in < self.horizon_T):
            raise InvalidParams(
                f'need 0 < step_h < burn_in < horizon_T, got {self.step_h}, {self.burn_in}, {self.horizon_T}')
        if self.n_paths < 1:
            raise InvalidParams(f'n_paths must be at least 1, got {self.n_paths}')
        if self.scheme not in SCHEMES:
            raise InvalidParams(f'unknown scheme {self.scheme!r}; expected one of {SCHEMES}')

    @property
    def n_steps(self):
        return int(round(self.horizon_T / self.step_h))

    @property
    def n_burn(self):
        return int(round(self.burn_in / self.step_h))

    @property
    def window(self):
        return (self.n_steps - self.n_burn) * self.step_h


PathSample = namedtuple('PathSample', 'z1 z2 l1 l2')


@dataclass(frozen=True)
class SampleSet:
    """
    Terminal positions and local-time increments over the measurement
    window, one row per path, in path order.
    """
    positions: np.ndarray
    local_times: np.ndarray
    window: float

    def __len__(self):
        return len(self.positions)

    def __iter__(self):
        for z, l in zip(self.positions, self.local_times):
            yield PathSample(float(z[0]), float(z[1]), float(l[0]), float(l[1]))


def solve_lcp2(R, y):
    """
    Solve w = y + R l, l >= 0, w >= 0, l_i w_i = 0 row by row for y of shape
    (n, 2), trying in turn no binding constraint, only the first, only the
    second, and both.

    :return: (w, l)
    :raises NumericalFailure: if some row has no solution
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    (r11, r12), (r21, r22) = R
    n = len(y)
    w = np.empty_like(y)
    l = np.zeros_like(y)
    done = np.zeros(n, dtype=bool)

    ok = np.all(y >= -LCP_SLACK, axis=1)
    w[ok] = y[ok]
    done |= ok

    l1 = -y[:, 0] / r11
    w2 = y[:, 1] + r21 * l1
    ok = ~done & (l1 >= -LCP_SLACK) & (w2 >= -LCP_SLACK)
    l[ok, 0] = l1[ok]
    w[ok, 0] = 0.0
    w[ok, 1] = w2[ok]
    done |= ok

    l2 = -y[:, 1] / r22
    w1 = y[:, 0] + r12 * l2
    ok = ~done & (l2 >= -LCP_SLACK) & (w1 >= -LCP_SLACK)
    l[ok, 1] = l2[ok]
    w[ok, 0] = w1[ok]
    w[ok, 1] = 0.0
    done |= ok

    both = -np.linalg.solve(np.asarray(R, dtype=float), y.T).T
    ok = ~done & np.all(both >= -LCP_SLACK, axis=1)
    l[ok] = both[ok]
    w[ok] = 0.0
    done |= ok

    if not np.all(done):
        bad = y[~done][0]
        raise NumericalFailure(f'complementarity problem infeasible for y = {bad}')
    return np.maximum(w, 0.0), np.maximum(l, 0.0)


def _path_generators(config):
    seeds = np.random.SeedSequence(config.master_seed).spawn(config.n_paths)
    return [np.random.default_rng(s) for s in seeds]


def _simulate_chunk(params, config, rngs):
    h = config.step_h
    n = len(rngs)
    chol = cholesky(params.sigma, lower=True)
    mu = params.mu
    R = params.R
    var = np.diag(params.sigma)
    bridge = config.scheme == 'bridge'

    Z = np.zeros((n, 2))
    L = np.zeros((n, 2))
    step = 0
    while step < config.n_steps:
        b = min(BLOCK_STEPS, config.n_steps - step)
        xi = np.stack([g.standard_normal((b, 2)) for g in rngs], axis=1)
        if bridge:
            u = np.stack([g.random((b, 2)) for g in rngs], axis=1)
        for j in range(b):
            free = Z + mu * h + math.sqrt(h) * xi[j] @ chol.T
            if bridge:
                gap = Z - free
                low = 0.5 * (Z + free - np.sqrt(gap * gap - 2 * var * h * np.log1p(-u[j])))
                if np.any(low < 0):
                    _, dL = solve_lcp2(R, low)
                    Z = free + dL @ R.T
                else:
                    dL = None
                    Z = free
            else:
                if np.any(free < 0):
                    Z, dL = solve_lcp2(R, free)
                else:
                    dL = None
                    Z = free
            if np.any(Z < -LCP_SLACK):
                raise NumericalFailure(f'reflected step left the quadrant: {Z.min():.3g}')
            Z = np.maximum(Z, 0.0)
            if dL is not None and step + j >= config.n_burn:
                L += dL
        step += b
    return Z, L


def simulate(params, config=SimConfig(), workers=None):
    """
    Simulate n_paths independent paths from the corner up to horizon_T.
    Each path draws from its own generator spawned off master_seed, so the
    result does not depend on the number of workers.

    The default scheme is 'bridge', not the plain Euler step with an LCP
    correction: it solves the same LCP on the per-coordinate bridge minima of
    each step, which removes the O(sqrt h) boundary bias of 'euler' and is
    exact in law for R = I with diagonal Sigma. Pass scheme='euler' in the
    SimConfig for the plain scheme.

    :return: SampleSet
    """
    require_valid(params)
    workers = workers or worker_count()
    rngs = _path_generators(config)
    chunks = [rngs[i:i + CHUNK_PATHS] for i in range(0, len(rngs), CHUNK_PATHS)]
    logger.info('simulating %d paths, %d steps each, %d chunks on %d threads (%s scheme)',
                config.n_paths, config.n_steps, len(chunks), workers, config.scheme)

    def run(k):
        out = _simulate_chunk(params, config, chunks[k])
        logger.info('chunk %d/%d done', k + 1, len(chunks))
        return out

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(run, range(len(chunks))))
    Z = np.concatenate([r[0] for r in results])
    L = np.concatenate([r[1] for r in results])
    return SampleSet(positions=Z, local_times=L, window=config.window)


def _mean_stderr(values):
    n = len(values)
    mean = values.mean()
    if n < 2:
        return mean, math.inf
    if np.iscomplexobj(values):
        var = values.real.var(ddof=1) + values.imag.var(ddof=1)
    else:
        var = values.var(ddof=1)
    return mean, math.sqrt(var / n)


def estimate_phi(samples, theta):
    """
    Sample mean of exp(theta . Z) and its standard error.

    :param theta: pair of complex numbers with nonpositive real parts
    """
    t = np.asarray(theta, dtype=complex)
    if np.any(t.real > 0):
        raise DomainRefusal(f'estimate of phi needs Re theta <= 0, got {tuple(t)}')
    if not np.any(t):
        return 1.0 + 0j, 0.0
    values = np.exp(samples.positions @ t)
    mean, err = _mean_stderr(values)
    return complex(mean), float(err)


MassEstimate = namedtuple('MassEstimate', 'nu1 nu2 stderr1 stderr2')


def estimate_boundary_masses(samples):
    """Local time per unit time on each axis over the measurement window."""
    rates = samples.local_times / samples.window
    m1, e1 = _mean_stderr(rates[:, 0])
    m2, e2 = _mean_stderr(rates[:, 1])
    return MassEstimate(float(m1), float(m2), float(e1), float(e2))
