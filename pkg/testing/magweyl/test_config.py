# SPDX-License-Identifier: GPL-2.0-or-later

import os
import json
import logging
import tempfile
import unittest

import numpy as np

from magweyl_tests import *
from magweyl.config import ExperimentConfig, load_config, parse_config
from magweyl.defs import ConfigError

CONFIGS_DIR = os.path.join(ROOT_PATH, 'configs')


def get_logger():
    return logging.getLogger(__name__)


def make_config(command, **sections):
    data = dict(sections, command=command)
    return ExperimentConfig(parse_config(json.dumps(data)))


########################################################################
#                         TESTS IMPLEMENTATION                         #
########################################################################

class SchemaTests(MagWeylTestsBase):

    def test_shipped_configs_are_valid(self):
        names = sorted(f for f in os.listdir(CONFIGS_DIR) if f.endswith('.json'))
        self.assertTrue(names)
        for name in names:
            cfg = load_config(os.path.join(CONFIGS_DIR, name))
            self.assertEqual(cfg.command, name[:-len('.json')])

    def test_malformed_json(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config('{"command": "flux",\n "flux": }', source='broken.json')
        self.assertTrue(ctx.exception.context.startswith('broken.json:2:'))

    def test_schema_violations(self):
        for data in ({'grid': {'dims': 1}},
                     {'command': 'plot'},
                     {'command': 'flux', 'colour': 'red'},
                     {'command': 'quantize', 'params': {'eps': 1.5}},
                     {'command': 'quantize', 'grid': {'dims': 3, 'points': 16, 'half_length': 1.0}}):
            with self.assertRaises(ConfigError, msg=str(data)):
                parse_config(json.dumps(data))

    def test_error_names_the_path(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config(json.dumps({'command': 'flux', 'params': {'lambda': -1}}), source='run.json')
        self.assertIn('params/lambda', str(ctx.exception))

    def test_unreadable_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ConfigError):
                load_config(os.path.join(tmp, 'missing.json'))


class BuilderTests(MagWeylTestsBase):

    def test_grid_and_params(self):
        cfg = make_config('quantize', grid={'dims': 2, 'points': 16, 'half_length': 3.0},
                          params={'eps': 0.5, 'lambda': 0.25})
        params = cfg.params()
        grid = cfg.grid(params.eps)
        self.assertEqual((grid.dimension, grid.points), (2, 16))
        self.assertAlmostEqual(grid.momentum_scale, 0.5)
        self.assertAlmostEqual(params.lam, 0.25)
        self.assertAlmostEqual(cfg.params(eps=0.125).eps, 0.125)

    def test_grid_geometry_is_checked(self):
        cfg = make_config('quantize', grid={'dims': 1, 'points': 24, 'half_length': 3.0})
        with self.assertRaises(ConfigError) as ctx:
            cfg.grid()
        self.assertIn('grid', ctx.exception.context)

    def test_missing_sections(self):
        cfg = make_config('quantize')
        with self.assertRaises(ConfigError):
            cfg.grid()
        with self.assertRaises(ConfigError):
            cfg.expression('f')
        with self.assertRaises(ConfigError):
            cfg.sweep('eps')
        self.assertEqual(cfg.sweep('eps', [0.5]), [0.5])

    def test_bad_expression(self):
        cfg = make_config('quantize', grid={'dims': 1, 'points': 16, 'half_length': 3.0}, symbols={'f': 'exp(x'})
        with self.assertRaises(ConfigError) as ctx:
            cfg.expression('f')
        self.assertIn('symbols/f', str(ctx.exception))

    def test_explicit_gauge_must_match_field(self):
        cfg = make_config('quantize', grid={'dims': 2, 'points': 16, 'half_length': 3.0}, field={'b12': 2.0},
                          gauge={'kind': 'explicit', 'components': ['0', 'x1']})
        with self.assertRaises(ConfigError):
            cfg.potential()
        good = make_config('quantize', grid={'dims': 2, 'points': 16, 'half_length': 3.0}, field={'b12': 2.0},
                           gauge={'kind': 'explicit', 'components': ['0', '2*x1']})
        pts = self.rng.normal(size=(4, 2))
        self.assertAllClose(good.potential().curl(pts), 2.0, 1e-6)

    def test_transversal_gauge_is_default(self):
        cfg = make_config('flux', field={'b12': 1.0}, flux={'triangles': [[[0, 0], [1, 0], [0, 1]]]})
        self.assertEqual(cfg.dimension, 2)
        self.assertFalse(cfg.potential().is_zero)
        self.assertIsNone(cfg.gauge_transform())

    def test_periodic_potential(self):
        cfg = make_config('bloch-bands', lattice={'basis': [[2.0]], 'bz_points': 8},
                          potential={'coefficients': [{'m': [1], 're': 0.1}, {'m': [-1], 're': 0.1}]})
        lattice = cfg.lattice()
        potential = cfg.periodic_potential(lattice)
        self.assertEqual(lattice.dimension, 1)
        self.assertAllClose(potential(np.array([[0.0], [1.0]])), [0.2, -0.2], 1e-14)

    def test_periodic_potential_checks(self):
        duplicate = make_config('bloch-bands', lattice={'basis': [[1.0]]},
                                potential={'coefficients': [{'m': [1], 're': 0.1}, {'m': [1], 're': 0.1}]})
        with self.assertRaises(ConfigError):
            duplicate.periodic_potential(duplicate.lattice())
        complex_valued = make_config('bloch-bands', lattice={'basis': [[1.0]]},
                                     potential={'coefficients': [{'m': [1], 'im': 0.1}, {'m': [-1], 'im': 0.1}]})
        with self.assertRaises(ConfigError):
            complex_valued.periodic_potential(complex_valued.lattice())

    def test_tolerance_overrides(self):
        cfg = make_config('flux', tolerances={'check': 1e-3})
        tol = cfg.tolerances()
        self.assertEqual(tol['check'], 1e-3)
        self.assertIn('gap_fraction', tol)


if __name__ == '__main__':
    unittest.main()
