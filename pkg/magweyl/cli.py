# SPDX-License-Identifier: GPL-2.0-or-later

"""Batch front-end: one experiment config in, CSV tables plus a JSON run
manifest out.

Exit codes: 0 ok, 2 config error, 3 numerical failure (including any failed
built-in check; the outputs are written first).
"""

import argparse
import concurrent.futures
import csv
import dataclasses
import json
import logging
import os
import sys
import time

import numpy as np
import scipy
import sympy

import magweyl
from magweyl import bloch, geometry, log, moyal, quantizer, semiclassics, utils
from magweyl.config import load_config
from magweyl.defs import ConfigError, MagWeylError, EXIT_CONFIG_ERROR, EXIT_NUMERICAL_FAILURE, EXIT_OK

COMMANDS = ('flux', 'quantize', 'product', 'egorov', 'bloch-bands', 'bloch-berry', 'bloch-flow', 'hall')
FLOAT_FORMAT = '%.12e'


def get_logger():
    return logging.getLogger(__name__)


@dataclasses.dataclass
class Table:
    columns: list
    rows: list


@dataclasses.dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool

    def to_dict(self):
        return {'name': self.name, 'value': _plain(self.value), 'tolerance': self.tolerance, 'passed': self.passed}


class RunResult:
    """ Tables, checks and per-stage timings collected by one command.
    """

    def __init__(self, command):
        self.command = command
        self.tables = {}
        self.checks = []
        self.timings = {}
        self.artifacts = {}

    def table(self, name, columns, rows):
        self.tables[name] = Table(list(columns), [list(r) for r in rows])

    def check_below(self, name, value, tolerance):
        value = float(value)
        self.checks.append(Check(name, value, tolerance, bool(np.isfinite(value) and abs(value) <= tolerance)))

    def check_above(self, name, value, bound):
        value = float(value)
        self.checks.append(Check(name, value, bound, bool(np.isfinite(value) and value >= bound)))

    def check_equal(self, name, value, expected):
        self.checks.append(Check(name, value, expected, value == expected))

    @property
    def failed(self):
        return [c for c in self.checks if not c.passed]

    def stage(self, name):
        return _Stage(self, name)


class _Stage:
    def __init__(self, result, name):
        self.result = result
        self.name = name

    def __enter__(self):
        self.start = time.perf_counter()
        get_logger().info('Stage %s', self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        self.result.timings[self.name] = time.perf_counter() - self.start
        if exc is not None and isinstance(exc, MagWeylError) and not isinstance(exc, ConfigError):
            get_logger().error("Stage '%s' failed: %s", self.name, exc)
        return False


def _plain(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    return value


def _format(value):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % value
    return str(value)


def _coords(prefix, count):
    return ['%s%d' % (prefix, i + 1) for i in range(count)]


def _parallel_map(func, items, threads):
    """Order-preserving map over sweep points."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


# ******* commands ******************************

def run_flux(cfg, result, threads):
    section = cfg.require('flux')
    field = cfg.field()
    potential = cfg.potential(field)
    params = cfg.params()
    d = cfg.dimension
    triangles = np.asarray(section['triangles'], dtype=float)
    if triangles.shape[-1] != d:
        raise ConfigError('triangle corners must have %d coordinates' % d, context='%s: flux/triangles' % cfg.source)
    x, y, z = triangles[:, 0], triangles[:, 1], triangles[:, 2]
    with result.stage('flux'):
        area = geometry.flux_by_area(field, x, y, z)
        stokes = geometry.triangle_flux(potential, x, y, z)
    rows = [[i, a, s, abs(a - s)] for i, (a, s) in enumerate(zip(area, stokes))]
    result.table('flux', ['triangle', 'flux_area', 'flux_stokes', 'difference'], rows)
    result.check_below('area_vs_stokes', max(r[3] for r in rows), cfg.tolerances()['check'])
    order = section.get('order')
    if order:
        # corners read as (base point, y, z) of the scaled flux
        eps_list = cfg.sweep('eps', [params.eps])
        rows = []
        with result.stage('expansion'):
            terms = geometry.flux_expansion_terms(field, x, y, z, order)
            for eps in eps_list:
                exact = geometry.scaled_flux(field, x, y, z, eps)
                truncated = sum(eps ** (n + 1) * t for n, t in enumerate(terms))
                for i in range(len(x)):
                    rows.append([i, eps, order, exact[i], truncated[i], abs(exact[i] - truncated[i])])
        result.table('expansion', ['triangle', 'eps', 'N', 'scaled_flux', 'truncated', 'remainder'], rows)


def run_quantize(cfg, result, threads):
    params = cfg.params()
    grid = cfg.grid(params.eps)
    field = cfg.field()
    potential = cfg.potential(field)
    f = cfg.symbol('f', grid)
    tol = cfg.tolerances()
    rows = []
    with result.stage('quantize'):
        kernel = quantizer.quantize(f, potential, params)
    with result.stage('dequantize'):
        back = quantizer.dequantize(kernel, potential, params)
    round_trip = float(np.max(np.abs(back.values - f.values)))
    norm = quantizer.operator_norm(kernel)
    bound = quantizer.fourier_norm_bound(f)
    rows += [['round_trip', round_trip], ['hermiticity_residual', kernel.hermiticity_residual()],
             ['operator_norm', norm], ['fourier_norm_bound', bound]]
    result.check_below('round_trip', round_trip, tol['check'])
    result.check_above('norm_bound_margin', bound - norm, -tol['check'])
    if np.max(np.abs(f.values.imag)) == 0.0:
        result.check_below('hermiticity', kernel.hermiticity_residual(), tol['hermiticity'])
    chi = cfg.gauge_transform()
    if chi is not None:
        with result.stage('gauge'):
            other = quantizer.quantize(f, geometry.apply_gauge(potential, chi), params)
            u = quantizer.gauge_unitary(chi, grid, params)
            conjugated = u[:, None] * kernel.matrix * np.conj(u)[None, :]
        covariance = float(np.max(np.abs(conjugated - other.matrix)))
        rows.append(['gauge_covariance', covariance])
        result.check_below('gauge_covariance', covariance, tol['check'])
    result.table('diagnostics', ['quantity', 'value'], rows)
    result.artifacts['kernel.json'] = kernel.to_dict()


def run_product(cfg, result, threads):
    params = cfg.params()
    grid = cfg.grid()
    field = cfg.field()
    f = cfg.symbol('f', grid)
    g = cfg.symbol('g', grid)
    eps_list = cfg.sweep('eps')
    orders = cfg.sweep('orders', [2])
    lambdas = cfg.sweep('lambda', [params.lam])
    lambda_order = cfg.section('sweep').get('lambda_order')

    def study(point):
        order, lam = point
        return moyal.remainder_study(f, g, field, eps_list, lam, order, lambda_order)

    points = [(order, lam) for order in orders for lam in lambdas]
    with result.stage('remainder'):
        tables = _parallel_map(study, points, threads)
    rows = []
    for (order, lam), table in zip(points, tables):
        rows += table.records()
        if len(eps_list) >= 4:
            result.check_above('slope_N%d_lambda%g' % (order, lam), table.slope, order + 0.7)
    result.table('remainder', moyal.RemainderTable([], 0.0).columns(), rows)


def run_egorov(cfg, result, threads):
    params = cfg.params()
    field = cfg.field()
    potential = cfg.potential(field)
    eps_list = cfg.sweep('eps', [params.eps])
    times = cfg.sweep('t')
    dt = cfg.section('flow').get('dt', semiclassics.DEFAULT_DT)
    h_expr = cfg.expression('h')
    f_expr = cfg.expression('f')

    def defect(point):
        eps, t = point
        p = params.replace(eps=eps)
        grid = cfg.grid(eps)
        f = cfg.symbol('f', grid)
        return semiclassics.egorov_defect(h_expr, f, potential, p, t, field=field, dt=dt)

    points = [(eps, t) for eps in eps_list for t in times]
    get_logger().info('Egorov sweep for h=%s, f=%s: %d points', h_expr, f_expr, len(points))
    with result.stage('egorov'):
        values = _parallel_map(defect, points, threads)
    rows = [[eps, t, v] for (eps, t), v in zip(points, values)]
    tol = cfg.tolerances()['check']
    for (eps, t), v in zip(points, values):
        if t == 0:
            result.check_below('defect_t0_eps%g' % eps, v, tol)
    t_max = max(times)
    if t_max > 0 and len(eps_list) >= 3:
        ys = [v for (eps, t), v in zip(points, values) if t == t_max]
        slope, _ = utils.fit_slope(eps_list, ys)
        rows.append(['slope', t_max, slope])
        result.check_above('defect_slope', slope, 1.7)
    result.table('egorov', ['eps', 't', 'defect'], rows)


def _bands(cfg, result):
    lattice = cfg.lattice()
    potential = cfg.periodic_potential(lattice)
    section = cfg.section('bloch')
    with result.stage('bands'):
        solution = bloch.band_structure(potential, section.get('cutoff', 3), section.get('n_bands', 4),
                                        gap_fraction=cfg.tolerances()['gap_fraction'])
    return lattice, potential, solution


def run_bloch_bands(cfg, result, threads):
    lattice, potential, solution = _bands(cfg, result)
    d = lattice.dimension
    result.table('bands', _coords('k', d) + ['E%d' % n for n in range(solution.n_bands)], solution.records())
    if potential.is_zero:
        labels = bloch.plane_wave_indices(d, solution.cutoff)
        k = solution.k_points.reshape(-1, d)
        free = np.sort(0.5 * np.sum((k[:, None, :] + (labels @ lattice.dual)[None]) ** 2, axis=-1), axis=-1)
        computed = solution.energies.reshape(k.shape[0], -1)
        result.check_below('free_bands', np.max(np.abs(free - computed)[:, :solution.n_bands]), 1e-12)


def _berry(cfg, result):
    lattice, potential, solution = _bands(cfg, result)
    band = cfg.section('bloch').get('band', 0)
    with result.stage('berry'):
        berry = bloch.berry_data(solution, band)
    return lattice, potential, solution, band, berry


def run_bloch_berry(cfg, result, threads):
    lattice, potential, solution, band, berry = _berry(cfg, result)
    d = lattice.dimension
    columns = _coords('k', d) + _coords('A', d) + ['Omega12'] + ['M%d%d' % (l + 1, j + 1)
                                                                 for l in range(d) for j in range(d)]
    result.table('berry', columns, berry.records())
    tol = cfg.tolerances()['check']
    result.check_equal('chern_number', bloch.chern_number(berry), 0)
    if berry.curvature is not None:
        total = float(np.sum(berry.curvature)) * lattice.plaquette_area
        result.check_below('curvature_integral', total, tol)
        nodes = lattice.k_grid().reshape(-1, d)
        kubo = berry.kubo_curvature.ravel()
        spread = float(np.max(np.abs(berry.omega(nodes) - kubo)))
        scale = float(np.max(np.abs(kubo)))
        get_logger().info('Plaquette vs sum-over-states curvature: max difference %.3e (scale %.3e)', spread, scale)
        result.check_below('curvature_spread', spread / scale if scale > 0.0 else spread,
                           cfg.tolerances()['curvature_spread'])


def run_bloch_flow(cfg, result, threads):
    lattice, potential, solution, band, berry = _berry(cfg, result)
    d = lattice.dimension
    params = cfg.params()
    field = cfg.field()
    flow = cfg.require('flow')
    effective = bloch.effective_hamiltonian(solution, band, field, cfg.phi(), berry, params)
    with result.stage('flow'):
        trajectory = bloch.macroscopic_flow(effective, field, berry, params, flow.get('r0', [0.0] * d),
                                            flow.get('k0', [0.0] * d), flow.get('t', 1.0),
                                            flow.get('dt', semiclassics.DEFAULT_DT))
    result.table('trajectory', ['t'] + _coords('r', d) + _coords('k', d) + ['h_sc'], trajectory.records())
    drift = float(np.max(np.abs(trajectory.energies - trajectory.energies[0])))
    result.check_below('energy_drift', drift, cfg.tolerances()['check'])


def run_hall(cfg, result, threads):
    lattice, potential, solution, band, berry = _berry(cfg, result)
    d = lattice.dimension
    params = cfg.params()
    field = cfg.field()
    with result.stage('hall'):
        hall = bloch.hall_current(solution, band, field, cfg.phi(), berry, params)
    width = len(hall.current)
    row = list(hall.current) + list(hall.chern_term) + list(hall.velocity_mean)
    result.table('hall', _coords('j', width) + _coords('chern', width) + _coords('v', d), [row])
    tol = cfg.tolerances()['check']
    result.check_below('chern_term', np.max(np.abs(hall.chern_term)), tol)
    result.check_below('velocity_mean', np.max(np.abs(hall.velocity_mean)), 1e-8)
    if field.is_zero:
        result.check_below('current_without_field', np.max(np.abs(hall.current)), tol)


HANDLERS = {
    'flux': run_flux,
    'quantize': run_quantize,
    'product': run_product,
    'egorov': run_egorov,
    'bloch-bands': run_bloch_bands,
    'bloch-berry': run_bloch_berry,
    'bloch-flow': run_bloch_flow,
    'hall': run_hall,
}


# ******* output ******************************

def write_csv(table, path):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_format(v) for v in row])


def versions():
    return {'magweyl': magweyl.__version__, 'numpy': np.__version__, 'scipy': scipy.__version__,
            'sympy': sympy.__version__}


def write_outputs(cfg, result, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    prefix = cfg.section('output').get('prefix', '')
    files = []
    for name, table in result.tables.items():
        path = os.path.join(out_dir, '%s%s.csv' % (prefix, name))
        write_csv(table, path)
        files.append(os.path.basename(path))
    for name, payload in result.artifacts.items():
        path = os.path.join(out_dir, prefix + name)
        with open(path, 'w') as f:
            json.dump(payload, f)
        files.append(os.path.basename(path))
    manifest = {
        'command': result.command,
        'config': cfg.data,
        'versions': versions(),
        'timings': result.timings,
        'tolerances': cfg.tolerances(),
        'checks': [c.to_dict() for c in result.checks],
        'files': files,
    }
    with open(os.path.join(out_dir, prefix + 'manifest.json'), 'w') as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    get_logger().info('Wrote %d files to %s', len(files) + 1, out_dir)


def run(cfg, out_dir, threads=1, check_only=False):
    """Executes the config's command; returns the RunResult."""
    result = RunResult(cfg.command)
    get_logger().info('Running %s from %s', cfg.command, cfg.source)
    HANDLERS[cfg.command](cfg, result, threads)
    for c in result.checks:
        get_logger().info('Check %-28s %s (%s vs %s)', c.name, 'ok' if c.passed else 'FAILED', c.value, c.tolerance)
    if not check_only:
        write_outputs(cfg, result, out_dir)
    return result


# ******* argument parsing ******************************

class ExtendAction(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        items = getattr(namespace, self.dest) or []
        items.extend(values)
        setattr(namespace, self.dest, items)


def build_parser():
    parser = argparse.ArgumentParser(prog='magweyl', description='magweyl - magnetic Weyl calculus experiments')
    parser.register('action', 'extend', ExtendAction)
    parser.add_argument('command', nargs='?', choices=COMMANDS,
                        help='Overrides the command named in the config')
    parser.add_argument('--config', '-c',
                        help='Path to the experiment config (JSON)',
                        default=os.environ.get('MAGWEYL_CONFIG'))
    parser.add_argument('--out', '-o',
                        help='Output directory for CSV tables and the run manifest',
                        default=os.environ.get('MAGWEYL_OUT_DIR', os.path.join(os.getcwd(), 'results')))
    parser.add_argument('--threads', '-j',
                        help='Worker threads for sweep points',
                        type=int, default=int(os.environ.get('MAGWEYL_THREADS', '1')))
    parser.add_argument('--check', '-k',
                        help='Only evaluate and print the built-in checks, write nothing',
                        action='store_true', default=False)
    parser.add_argument('--debug', '-d',
                        help='Verbosity level (0-4)',
                        type=int, default=2)
    parser.add_argument('--log-file', '-l',
                        help='Path to log file. Use "stdout" to log to console.')
    parser.add_argument('--version', '-v', action='version', version='%(prog)s ' + magweyl.__version__)
    return parser


def setup_logging(level, log_file=None):
    fileh = None
    if log_file:
        fileh = logging.StreamHandler(sys.stdout) if log_file == 'stdout' else logging.FileHandler(log_file, 'w')
    return log.logger_init(level, logging.StreamHandler(sys.stderr), fileh)


def run_cli(argv=None):
    args = build_parser().parse_args(argv)
    logger = setup_logging(args.debug, args.log_file)
    try:
        if not args.config:
            raise ConfigError('no config given, use --config or MAGWEYL_CONFIG')
        if args.threads < 1:
            raise ConfigError('--threads must be >= 1, got %d' % args.threads)
        cfg = load_config(args.config)
        if args.command:
            cfg.data['command'] = args.command
        result = run(cfg, args.out, args.threads, args.check)
    except ConfigError as e:
        logger.critical('Config error: %s', e)
        print('config error: %s' % e, file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except MagWeylError as e:
        logger.critical('Numerical failure: %s', e)
        print('numerical failure: %s' % e, file=sys.stderr)
        return EXIT_NUMERICAL_FAILURE
    if args.check:
        for c in result.checks:
            print('%-32s %-6s %s' % (c.name, 'ok' if c.passed else 'FAILED', _format(c.value)))
    if result.failed:
        logger.error('%d check(s) failed: %s', len(result.failed), ', '.join(c.name for c in result.failed))
        return EXIT_NUMERICAL_FAILURE
    return EXIT_OK
