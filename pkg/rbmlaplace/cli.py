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
Command line entry point.

    rbmlaplace validate --params model.json
    rbmlaplace eval --params model.json --axis theta2 --range -5:0 --count 51 --out phi1.csv
    rbmlaplace report --params model.json --mc --paths 2000

Exit status: 0 on success, 2 for invalid parameters, 3 for a numerical
failure or a refused evaluation. Diagnostics go to stderr.
"""

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

import numpy as np

from rbmlaplace import __version__
from rbmlaplace.asymptotics import classify, constant_b, nearest_singularity
from rbmlaplace.conformal import gluing_map
from rbmlaplace.curve import build_path, compute_index
from rbmlaplace.excep import INVALID_PARAMS, NUMERICAL_FAILURE, DomainRefusal, InvalidParams, RbmExcep
from rbmlaplace.kernel import geometry
from rbmlaplace.laplace import QuadratureSettings, closed_form_orthogonal, closed_form_skew, \
    nu_masses, phi1, phi2, phi_interior
from rbmlaplace.mc_oracle import SimConfig, estimate_boundary_masses, estimate_phi, simulate, \
    worker_count
from rbmlaplace.model import dieker_moriarty, is_skew_symmetric, load_params, quadrant_to_wedge, \
    validate

logger = logging.getLogger(__name__)

EVAL_HEADER = ['re_theta', 'im_theta', 're_phi', 'im_phi', 'abs_error']
CURVE_HEADER = ['s', 're_theta2', 'im_theta2', 're_logG', 'im_logG']
COMPARE_HEADER = ['re_theta', 'im_theta', 're_phi', 'im_phi', 're_closed', 'im_closed', 'rel_diff']

AXES = ('theta2', 'theta1', 'diagonal')

SPOT_POINTS = (0.0, -0.5, -1.0, -2.0)


@contextmanager
def _output(path, newline=None):
    if path is None or path == '-':
        yield sys.stdout
    else:
        with open(path, 'w', encoding='utf-8', newline=newline) as f:
            yield f


def _write_json(args, doc):
    with _output(args.out) as f:
        json.dump(doc, f, indent=2, default=_json_default)
        f.write('\n')


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return {'re': obj.real, 'im': obj.imag}
    raise TypeError(f'cannot serialize {type(obj).__name__}')


def _write_csv(args, header, rows):
    with _output(args.out, newline='') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([f'{v:.17g}' for v in row])


def parse_range(text):
    try:
        a, b = (float(v) for v in text.split(':'))
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected a:b, got {text!r}')
    return a, b


def parse_grid(text):
    try:
        a, b, n = text.split(':')
        return float(a), float(b), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected a:b:count, got {text!r}')


def parse_pair(text):
    try:
        a, b = (complex(v.replace(' ', '')) for v in text.split(','))
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected a,b (complex allowed, e.g. -1+2j), got {text!r}')
    return a, b


def _settings(args):
    return QuadratureSettings(tol=args.tol, margin=args.margin)


def _grid_points(args):
    if args.grid is not None:
        a, b, n = args.grid
    else:
        (a, b), n = args.range, args.count
    if n < 1:
        raise InvalidParams(f'grid needs at least one point, got {n}')
    return np.linspace(a, b, n) + 1j * args.imag


def _evaluator(params, axis, settings):
    if axis == 'theta2':
        return lambda z: phi1(params, z, settings)
    if axis == 'theta1':
        return lambda z: phi2(params, z, settings)
    return lambda z: phi_interior(params, z, z, settings)


def evaluate_grid(params, axis, points, settings, workers=None):
    """
    Evaluate along an axis on a thread pool. Points that are refused or
    fail numerically come back as None; results keep the order of `points`.
    """
    fn = _evaluator(params, axis, settings)

    def one(z):
        try:
            return fn(z)
        except RbmExcep as e:
            logger.warning('%s = %s: %s: %s', axis, z, type(e).__name__, e)
            return None

    # Build the shared transforms once before fanning out.
    if len(points):
        one(points[0])
    with ThreadPoolExecutor(max_workers=workers or worker_count()) as pool:
        return list(pool.map(one, points))


def cmd_validate(args, params):
    report = validate(params)
    _write_json(args, report.to_dict())
    return 0 if report.ok else INVALID_PARAMS


def cmd_geometry(args, params):
    g = geometry(params)
    doc = g.to_dict()
    doc['gluing'] = gluing_map(params).describe()
    _write_json(args, doc)
    return 0


def cmd_curve(args, params):
    path = build_path(params, tol=args.tol)
    _write_csv(args, CURVE_HEADER, path.rows())
    return 0


def _classification(params, settings):
    doc = classify(params).to_dict()
    try:
        b = constant_b(params, settings)
        doc['b'] = b.value
        doc['b_abs_error'] = b.abs_error
        doc['b_method'] = b.method
    except DomainRefusal as e:
        logger.info('no constant b: %s', e)
    return doc


def cmd_classify(args, params):
    doc = _classification(params, _settings(args))
    if args.scan:
        sing = nearest_singularity(params, settings=_settings(args))
        doc['nearest_singularity'] = {'location': sing.location, 'kind': sing.kind}
    _write_json(args, doc)
    return 0


def cmd_eval(args, params):
    points = _grid_points(args)
    values = evaluate_grid(params, args.axis, points, _settings(args))
    rows = []
    for z, v in zip(points, values):
        if v is None:
            rows.append((z.real, z.imag, math.nan, math.nan, math.nan))
        else:
            rows.append((z.real, z.imag, v.value.real, v.value.imag, v.abs_error))
    _write_csv(args, EVAL_HEADER, rows)
    return 0


def _closed_form(params):
    if is_skew_symmetric(params):
        return 'skew', lambda z: closed_form_skew(params, z)
    if params.is_identity_reflection():
        return 'orthogonal', lambda z: closed_form_orthogonal(params, z)
    return None, None


def cmd_compare(args, params):
    name, closed = _closed_form(params)
    if closed is None:
        raise DomainRefusal('no closed form: the model is neither skew symmetric nor orthogonally reflected')
    logger.info('comparing with the %s closed form', name)
    points = _grid_points(args)
    values = evaluate_grid(params, 'theta2', points, _settings(args))
    rows = []
    for z, v in zip(points, values):
        try:
            c = closed(z).value
        except RbmExcep as e:
            logger.warning('closed form at %s: %s', z, e)
            c = complex(math.nan, math.nan)
        phi = complex(math.nan, math.nan) if v is None else v.value
        diff = abs(phi - c) / abs(c) if v is not None and not math.isnan(c.real) else math.nan
        rows.append((z.real, z.imag, phi.real, phi.imag, c.real, c.imag, diff))
    _write_csv(args, COMPARE_HEADER, rows)
    return 0


def _sim_config(args):
    return SimConfig(step_h=args.step, burn_in=args.burnin, horizon_T=args.horizon,
                     n_paths=args.paths, master_seed=args.seed, scheme=args.scheme)


def _mc_doc(params, config, theta):
    samples = simulate(params, config)
    mean, err = estimate_phi(samples, theta)
    masses = estimate_boundary_masses(samples)
    return {
        'theta': [complex(theta[0]), complex(theta[1])],
        'phi_estimate': mean,
        'stderr': err,
        'nu1': masses.nu1,
        'nu2': masses.nu2,
        'stderrs': [masses.stderr1, masses.stderr2],
        'config': {'step_h': config.step_h, 'burn_in': config.burn_in,
                   'horizon_T': config.horizon_T, 'n_paths': config.n_paths,
                   'master_seed': config.master_seed, 'scheme': config.scheme},
    }


def cmd_simulate(args, params):
    _write_json(args, _mc_doc(params, _sim_config(args), args.theta))
    return 0


def _spot(fn):
    try:
        return fn().to_dict()
    except RbmExcep as e:
        return {'refused': str(e)}


def cmd_report(args, params):
    """
    validate -> geometry -> index -> classification -> spot values ->
    closed-form comparison -> optional Monte Carlo, in one document.
    """
    settings = _settings(args)
    report = validate(params)
    doc = {'version': __version__, 'params': params.to_dict(), 'validation': report.to_dict()}
    if not report.ok:
        _write_json(args, doc)
        return INVALID_PARAMS

    doc['geometry'] = geometry(params).to_dict()
    doc['gluing'] = gluing_map(params).describe()
    path = build_path(params, tol=args.tol)
    doc['index'] = compute_index(params, path).to_dict()
    doc['path'] = {'breakpoints': len(path.breakpoints), 's_max': path.s_max,
                   'tail_bound': path.tail_bound}
    masses = nu_masses(params)
    doc['boundary_masses'] = {'nu1': masses.nu1_total, 'nu2': masses.nu2_total}
    beta, delta, epsilon = quadrant_to_wedge(params)
    doc['wedge'] = {'beta': beta, 'delta': delta, 'epsilon': epsilon}
    doc['dieker_moriarty'] = dieker_moriarty(params)._asdict()
    doc['classification'] = _classification(params, settings)
    logger.info('report: geometry, index and classification done')

    spot = {}
    for t in SPOT_POINTS:
        spot[f'phi1({t:g})'] = _spot(lambda: phi1(params, t, settings))
        spot[f'phi2({t:g})'] = _spot(lambda: phi2(params, t, settings))
        if t < 0:
            spot[f'phi({t:g},{t:g})'] = _spot(lambda: phi_interior(params, t, t, settings))
    doc['spot'] = spot

    name, closed = _closed_form(params)
    if closed is not None:
        diffs = []
        for t in SPOT_POINTS:
            v = spot[f'phi1({t:g})']
            if 'refused' in v:
                continue
            try:
                c = closed(t).value
            except RbmExcep:
                continue
            diffs.append(abs(complex(v['re'], v['im']) - c) / abs(c))
        doc['closed_form'] = {'kind': name, 'max_rel_diff': max(diffs) if diffs else None}

    if args.mc:
        mc = _mc_doc(params, _sim_config(args), args.theta)
        analytic = phi_interior(params, args.theta[0], args.theta[1], settings)
        mc['analytic'] = analytic.value
        mc['z_score'] = abs(mc['phi_estimate'] - analytic.value) / mc['stderr'] if mc['stderr'] else None
        doc['monte_carlo'] = mc
    _write_json(args, doc)
    return 0


COMMANDS = {
    'validate': (cmd_validate, 'check the parameter conditions'),
    'geometry': (cmd_geometry, 'branch points, p, p\', q and the gluing map'),
    'curve': (cmd_curve, 'breakpoints of the integration path with log G (CSV)'),
    'classify': (cmd_classify, 'tail asymptotics of the boundary density'),
    'eval': (cmd_eval, 'Laplace transform along a grid (CSV)'),
    'compare': (cmd_compare, 'integral formula against a closed form (CSV)'),
    'simulate': (cmd_simulate, 'Monte Carlo estimates'),
    'report': (cmd_report, 'everything above in one JSON document'),
}


# Options whose values routinely start with '-' (e.g. --range -5:0), which
# argparse would otherwise take for a flag.
SIGNED_OPTIONS = ('--range', '--grid', '--theta')


def join_signed_values(argv):
    """
    Rewrite ``--range -5:0`` as ``--range=-5:0`` for the options in
    SIGNED_OPTIONS, leaving everything else untouched.
    """
    out = []
    i = 0
    while i < len(argv):
        a = argv[i]
        if a in SIGNED_OPTIONS and i + 1 < len(argv):
            out.append(f'{a}={argv[i + 1]}')
            i += 2
        else:
            out.append(a)
            i += 1
    return out


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--params', required=True, metavar='FILE',
                        help='JSON parameter file (quadrant or wedge form)')
    common.add_argument('--out', metavar='FILE', help='output file (default stdout)')
    common.add_argument('--tol', type=float, default=QuadratureSettings.tol,
                        help='quadrature and tail tolerance (default %(default)g)')
    common.add_argument('--margin', type=float, default=QuadratureSettings.margin,
                        help='refusal distance to the curve and poles, in kernel scale units '
                             '(default %(default)g)')
    common.add_argument('-v', '--verbose', action='count', default=0)

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument('--range', type=parse_range, default=(-5.0, 0.0), metavar='A:B')
    grid.add_argument('--count', type=int, default=51)
    grid.add_argument('--grid', type=parse_grid, metavar='A:B:N', help='overrides --range/--count')
    grid.add_argument('--imag', type=float, default=0.0, help='imaginary part added to every point')

    mc = argparse.ArgumentParser(add_help=False)
    defaults = SimConfig()
    mc.add_argument('--step', type=float, default=defaults.step_h)
    mc.add_argument('--burnin', type=float, default=defaults.burn_in)
    mc.add_argument('--horizon', type=float, default=defaults.horizon_T)
    mc.add_argument('--paths', type=int, default=defaults.n_paths)
    mc.add_argument('--seed', type=int, default=defaults.master_seed)
    mc.add_argument('--scheme', choices=('bridge', 'euler'), default=defaults.scheme)
    mc.add_argument('--theta', type=parse_pair, default=(-1 + 0j, -1 + 0j), metavar='A,B')

    parser = argparse.ArgumentParser(
        prog='rbmlaplace',
        description='Stationary Laplace transforms of reflected Brownian motion in the quarter plane.')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', required=True)
    for name, (_, help_text) in COMMANDS.items():
        parents = [common]
        if name in ('eval', 'compare'):
            parents.append(grid)
        if name in ('simulate', 'report'):
            parents.append(mc)
        p = sub.add_parser(name, parents=parents, help=help_text)
        if name == 'eval':
            p.add_argument('--axis', choices=AXES, default='theta2',
                           help='theta2: phi1; theta1: phi2; diagonal: phi(t, t)')
        if name == 'classify':
            p.add_argument('--scan', action='store_true', help='also locate the nearest singularity')
        if name == 'report':
            p.add_argument('--mc', action='store_true', help='add a Monte Carlo cross-check')
    return parser


def run(args):
    """Execute one parsed command line; return the exit status."""
    params = load_params(args.params)
    if args.command != 'validate' and args.command != 'report':
        validate(params).raise_if_invalid()
    handler, _ = COMMANDS[args.command]
    return handler(args, params)


def main(argv=None):
    if argv is None:
        argv = sys.argv[1:]
    args = build_parser().parse_args(join_signed_values(list(argv)))
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        return run(args)
    except InvalidParams as e:
        print(f'invalid parameters: {e}', file=sys.stderr)
        if e.report is not None:
            print(str(e.report), file=sys.stderr)
        return INVALID_PARAMS
    except RbmExcep as e:
        print(f'{type(e).__name__}: {e}', file=sys.stderr)
        return e.code or NUMERICAL_FAILURE
