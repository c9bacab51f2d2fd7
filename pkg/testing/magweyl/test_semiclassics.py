# SPDX-License-Identifier: GPL-2.0-or-later

import logging
import unittest

import numpy as np

from magweyl_tests import *
from magweyl import utils
from magweyl.defs import CapabilityError, DomainError, EscapeError, TrajectoryError
from magweyl.geometry import GaugeTransform, MagneticField, Parameters, VectorPotential, apply_gauge, transversal_gauge
from magweyl.grid import GridSpec, sample_symbol
from magweyl.quantizer import quantize
from magweyl.semiclassics import (Trajectory, classical_pullback, egorov_defect, flow_jacobian, flow_map,
                                  heisenberg_evolve, integrate_rk4, magnetic_flow)

FREE_2D = '(xi1**2 + xi2**2)/2'
BUMP = '0.5 + 0.5*exp(-(x1**2 + x2**2)/4)'
EGOROV_H = 'xi**2/2 + 0.5*cos(pi*x/4)'
EGOROV_F = 'exp(-(x**2 + xi**2))'
EGOROV_F_2D = 'exp(-(x1**2 + x2**2 + xi1**2 + xi2**2))'
# periodic on [-4, 4)^2; the field is the curl of the potential
PERIODIC_POTENTIAL = ['0', '0.3*sin(pi*x1/4)']
PERIODIC_FIELD = '0.075*pi*cos(pi*x1/4)'


def get_logger():
    return logging.getLogger(__name__)


########################################################################
#                         TESTS IMPLEMENTATION                         #
########################################################################

class FlowTests(MagWeylTestsBase):

    def test_free_motion(self):
        path = magnetic_flow(FREE_2D, None, 1.0, [0.0, 0.0], [1.0, -0.5], 2.0)
        self.assertAllClose(path.positions[-1], [2.0, -1.0], 1e-12)
        self.assertAllClose(path.momenta[-1], [1.0, -0.5], 1e-14)
        self.assertAlmostEqual(path.times[-1], 2.0, places=12)

    def test_uncoupled_motion_ignores_field(self):
        path = magnetic_flow(FREE_2D, MagneticField(2, BUMP), 0.0, [0.5, 0.0], [0.0, 1.0], 1.5)
        self.assertAllClose(path.positions[-1], [0.5, 1.5], 1e-12)

    def test_cyclotron_orbit(self):
        b = 2.0
        x0, xi0 = np.array([0.3, -0.2]), np.array([1.0, 0.5])
        path = magnetic_flow(FREE_2D, MagneticField.constant(2, b), 1.0, x0, xi0, 2 * np.pi / b)
        center = x0 + np.array([xi0[1], -xi0[0]]) / b
        radius = np.linalg.norm(path.positions - center, axis=1)
        self.assertAllClose(radius, np.linalg.norm(xi0) / b, 1e-5)
        self.assertAllClose(path.points[-1], np.concatenate([x0, xi0]), 1e-5)

    def test_energy_is_conserved(self):
        h = FREE_2D + ' + 0.1*cos(x1)*cos(x2)'
        path = magnetic_flow(h, MagneticField(2, BUMP), 1.0, [0.2, 0.1], [0.7, -0.3], 5.0)
        self.assertSmall(path.energies - path.energies[0], 1e-8)

    def test_flow_map_matches_single_trajectory(self):
        h = FREE_2D + ' + 0.1*cos(x1)*cos(x2)'
        field = MagneticField(2, BUMP)
        starts = self.rng.uniform(-1.0, 1.0, size=(4, 4))
        ends = flow_map(h, field, 1.0, starts, 0.5, dt=0.01)
        for start, end in zip(starts, ends):
            path = magnetic_flow(h, field, 1.0, start[:2], start[2:], 0.5, dt=0.01)
            self.assertAllClose(path.points[-1], end, 1e-13)

    def test_volume_is_preserved(self):
        h = FREE_2D + ' + 0.1*cos(x1)*cos(x2)'
        jac = flow_jacobian(h, MagneticField(2, BUMP), 1.0, np.array([0.3, -0.4, 0.5, 0.2]), 1.0, dt=0.01)
        self.assertAlmostEqual(np.linalg.det(jac), 1.0, delta=1e-6)

    def test_bad_inputs(self):
        with self.assertRaises(DomainError):
            magnetic_flow(FREE_2D, None, 1.0, [0.0, 0.0], [1.0, 0.0], 1.0, dt=0.0)
        with self.assertRaises(DomainError):
            Trajectory(np.array([0.0, 0.0]), np.zeros((2, 2)), np.zeros(2))

    def test_blow_up_is_reported(self):
        with np.errstate(over='ignore', invalid='ignore'):
            with self.assertRaises(TrajectoryError) as ctx:
                integrate_rk4(lambda s: s ** 2, np.array([[1.0]]), 2.0, 0.01)
        self.assertGreater(ctx.exception.last_valid_time, 0.9)
        self.assertLess(ctx.exception.last_valid_time, 1.1)


class PullbackTests(MagWeylTestsBase):

    def test_zero_time(self):
        f = sample_symbol(EGOROV_F, grid_1d())
        self.assertAllClose(classical_pullback(f, EGOROV_H, None, 0.0, 0.0).values, f.values, 0.0)

    def test_free_shear(self):
        grid = grid_1d()
        f = sample_symbol('exp(-(x**2 + xi**2)/2)', grid)
        pulled = classical_pullback(f, 'xi**2/2', None, 0.0, 0.5, dt=0.05)
        x, xi = grid.phase_mesh()
        moved = grid.wrap(x + 0.5 * xi)
        self.assertAllClose(pulled.values, np.exp(-(moved ** 2 + xi ** 2) / 2), 1e-12)

    def test_escape(self):
        grid = GridSpec(1, 2.0, 16, 1.0)
        f = sample_symbol('exp(-x**2 - xi**2)', grid)
        with self.assertRaises(EscapeError) as ctx:
            classical_pullback(f, 'x', None, 0.0, 1.0, dt=0.1, strict=True)
        self.assertTrue(ctx.exception.nodes)
        # lenient mode only logs
        classical_pullback(f, 'x', None, 0.0, 1.0, dt=0.1)


class HeisenbergTests(MagWeylTestsBase):

    def test_identity_is_stationary(self):
        grid = grid_1d(points=32, half_length=8.0)
        params = Parameters(1.0, 0.0)
        evolved = heisenberg_evolve(EGOROV_H, sample_symbol(1, grid), None, params, 0.7)
        self.assertAllClose(evolved.matrix, np.eye(grid.points), 1e-10)

    def test_hamiltonian_is_stationary(self):
        grid = grid_1d(points=32, half_length=8.0)
        params = Parameters(1.0, 0.0)
        h = sample_symbol('xi**2/2 + 0.5*cos(pi*x/8)', grid)
        evolved = heisenberg_evolve(h, h, None, params, 0.7)
        base = quantize(h, None, params).matrix
        self.assertSmall(evolved.matrix - base, 1e-10 * np.max(np.abs(base)))


class EgorovTests(MagWeylTestsBase):

    def test_zero_time_defect(self):
        eps = 0.25
        grid = GridSpec(1, 4.0, 64, eps)
        defect = egorov_defect(EGOROV_H, sample_symbol(EGOROV_F, grid), None, Parameters(eps, 0.0), 0.0)
        self.assertSmall(defect, 1e-10)

    def test_magnetic_flow_needs_field(self):
        grid = grid_2d(points=8, half_length=4.0)
        potential = transversal_gauge(MagneticField.constant(2, 0.5))
        f = sample_symbol('exp(-(x1**2 + x2**2 + xi1**2 + xi2**2))', grid)
        with self.assertRaises(CapabilityError):
            egorov_defect(FREE_2D, f, potential, Parameters(1.0, 1.0), 0.1)

    def test_quadratic_hamiltonian_without_field(self):
        # the harmonic flow is linear, so only the grid limits the defect
        eps = 0.5
        grid = GridSpec(1, 7.0, 64, eps)
        f = sample_symbol('exp(-((x - 0.5)**2 + xi**2))', grid)
        defect = egorov_defect('(x**2 + xi**2)/2', f, None, Parameters(eps, 1.0), 1.0)
        self.assertSmall(defect, 1e-5)

    def test_defect_does_not_depend_on_gauge(self):
        eps = 0.5
        grid = GridSpec(2, 4.0, 16, eps)
        params = Parameters(eps, 1.0)
        f = sample_symbol(EGOROV_F_2D, grid)
        potential = VectorPotential(2, PERIODIC_POTENTIAL, gauge='explicit')
        moved = apply_gauge(potential, GaugeTransform(2, '0.2*sin(pi*x1/4)*cos(pi*x2/4)'))
        field = MagneticField(2, PERIODIC_FIELD)
        first = egorov_defect(FREE_2D, f, potential, params, 0.5, field=field, dt=0.05)
        second = egorov_defect(FREE_2D, f, moved, params, 0.5, field=field, dt=0.05)
        self.assertGreater(first, 0.0)
        self.assertAlmostEqual(first, second, delta=1e-9)

    def test_defect_shrinks_with_bounded_field(self):
        potential = VectorPotential(2, PERIODIC_POTENTIAL, gauge='explicit')
        field = MagneticField(2, PERIODIC_FIELD)
        defects = []
        for eps in (0.5, 0.25):
            f = sample_symbol(EGOROV_F_2D, GridSpec(2, 4.0, 32, eps))
            defects.append(egorov_defect(FREE_2D, f, potential, Parameters(eps, 1.0), 0.5, field=field, dt=0.05))
        self.assertGreaterEqual(defects[0] / defects[1], 2.5)

    @slow_test('Egorov eps sweep on a 256-point grid')
    def test_defect_order(self):
        eps_list = [0.25, 0.125, 0.0625]
        defects = []
        for eps in eps_list:
            grid = GridSpec(1, 4.0, 256, eps)
            defects.append(egorov_defect(EGOROV_H, sample_symbol(EGOROV_F, grid), None, Parameters(eps, 0.0),
                                         0.5, dt=0.005))
        slope, _ = utils.fit_slope(eps_list, defects)
        self.assertGreaterEqual(slope, 1.7)


if __name__ == '__main__':
    unittest.main()
