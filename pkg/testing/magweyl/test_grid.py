# SPDX-License-Identifier: GPL-2.0-or-later

import os
import logging
import tempfile
import unittest

import numpy as np

from magweyl_tests import *
from magweyl import utils
from magweyl.defs import DomainError, GridMismatchError, NonFiniteSampleError
from magweyl.grid import (GridSpec, SymbolField, WaveFunction, derivative_values, load_json, sample_symbol,
                          sample_wave, save_json, spectral_derivative, symplectic_fourier)


def get_logger():
    return logging.getLogger(__name__)


########################################################################
#                         TESTS IMPLEMENTATION                         #
########################################################################

class GridSpecTests(MagWeylTestsBase):

    def test_layout(self):
        grid = GridSpec(1, 10.0, 64, 0.5)
        self.assertAlmostEqual(grid.period, 20.0)
        self.assertAlmostEqual(grid.dx, 20.0 / 64)
        self.assertAlmostEqual(grid.positions[0], -10.0)
        self.assertAlmostEqual(grid.positions[32], 0.0)
        self.assertAlmostEqual(grid.dxi, 2 * np.pi * 0.5 / 20.0)
        self.assertAlmostEqual(grid.momenta[32], 0.0)
        self.assertAlmostEqual(grid.momentum_period, 64 * grid.dxi)

    def test_rejects_bad_geometry(self):
        with self.assertRaises(DomainError):
            GridSpec(3, 1.0, 16)
        with self.assertRaises(DomainError):
            GridSpec(1, 1.0, 24)
        with self.assertRaises(DomainError):
            GridSpec(1, 1.0, 4)
        with self.assertRaises(DomainError):
            GridSpec(1, 0.0, 16)
        with self.assertRaises(DomainError):
            GridSpec(1, 1.0, 16, momentum_scale=0.0)

    def test_wrap(self):
        grid = grid_1d()
        self.assertAllClose(grid.wrap(np.array([10.0, -10.5, 31.0])), [-10.0, 9.5, -9.0], 1e-12)

    def test_dict_round_trip(self):
        grid = GridSpec(2, 3.5, 16, 0.25)
        self.assertEqual(GridSpec.from_dict(grid.to_dict()), grid)

    def test_check_same(self):
        with self.assertRaises(GridMismatchError):
            grid_1d().check_same(grid_1d(eps=0.5))


class SamplingTests(MagWeylTestsBase):

    def test_non_finite_samples_are_reported(self):
        with self.assertRaises(NonFiniteSampleError) as ctx:
            sample_symbol('1/x', grid_1d())
        self.assertTrue(len(ctx.exception.nodes) > 0)
        self.assertAlmostEqual(ctx.exception.nodes[0][0], 0.0)

    def test_shape_mismatch(self):
        with self.assertRaises(GridMismatchError):
            SymbolField(grid_1d(), np.zeros((64, 32)))
        with self.assertRaises(GridMismatchError):
            WaveFunction(grid_1d(), np.zeros(32))

    def test_arithmetic_needs_same_grid(self):
        f = sample_symbol('x*xi', grid_1d())
        g = sample_symbol('x*xi', grid_1d(eps=0.5))
        with self.assertRaises(GridMismatchError):
            f + g
        self.assertAllClose((f - f).values, 0.0, 0.0)
        self.assertAllClose((2 * f).values, 2 * f.values, 0.0)

    def test_gaussian_norm(self):
        u = sample_wave('exp(-x**2/2)', grid_1d())
        self.assertAlmostEqual(u.norm ** 2, np.sqrt(np.pi), places=12)
        self.assertAlmostEqual(u.inner(u).real, u.norm ** 2, places=12)

    def test_evaluate_by_interpolation(self):
        grid = grid_1d()
        # both factors are periodic on the grid box
        f = sample_symbol('cos(pi*x/5)*cos(5*xi/16)', grid)
        bare = SymbolField(grid, f.values)
        pts = self.rng.uniform(-5.0, 5.0, size=(20, 2))
        self.assertAllClose(bare.evaluate(pts), f.evaluate(pts), 1e-11)

    def test_json_round_trip(self):
        f = sample_symbol('exp(-x1**2 - xi2**2) + 1j*x2', grid_2d(points=8))
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'f.json')
            save_json(f, path)
            back = load_json(path)
        self.assertEqual(back.grid, f.grid)
        self.assertAllClose(back.values, f.values, 0.0)


class SpectralTests(MagWeylTestsBase):

    def test_symplectic_fourier_is_involutive(self):
        grid = grid_2d(points=8, half_length=3.0)
        values = self.rng.normal(size=grid.phase_shape) + 1j * self.rng.normal(size=grid.phase_shape)
        f = SymbolField(grid, values)
        self.assertAllClose(symplectic_fourier(symplectic_fourier(f)).values, values, 1e-12)

    def test_symplectic_fourier_of_gaussian(self):
        # F_sigma of exp(-(x^2 + xi^2)/2) at hbar = 1 is itself
        grid = grid_1d(points=64, half_length=8.0)
        f = sample_symbol('exp(-(x**2 + xi**2)/2)', grid)
        self.assertAllClose(symplectic_fourier(f).values, f.values, 1e-10)

    def test_position_derivative(self):
        grid = grid_1d()
        f = sample_symbol('sin(pi*x/5)*exp(-xi**2)', grid)
        df = spectral_derivative(f, 0)
        expected = sample_symbol('pi/5*cos(pi*x/5)*exp(-xi**2)', grid)
        self.assertAllClose(df.values, expected.values, 1e-11)

    def test_momentum_derivative(self):
        grid = grid_1d()
        f = sample_symbol('exp(-xi**2)', grid)
        df = spectral_derivative(f, 0, variable='momentum', order=2)
        expected = sample_symbol('(4*xi**2 - 2)*exp(-xi**2)', grid)
        self.assertAllClose(df.values, expected.values, 1e-7)

    def test_mixed_derivative(self):
        grid = grid_2d(points=16, half_length=np.pi)
        f = sample_symbol('sin(x1)*cos(2*x2)*exp(-xi1**2)', grid)
        values = derivative_values(f.values, grid, (1, 1, 0, 0))
        expected = sample_symbol('-2*cos(x1)*sin(2*x2)*exp(-xi1**2)', grid)
        self.assertAllClose(values, expected.values, 1e-6)

    def test_bad_axis(self):
        f = sample_symbol('x', grid_1d())
        with self.assertRaises(DomainError):
            spectral_derivative(f, 1)
        with self.assertRaises(DomainError):
            spectral_derivative(f, 0, variable='time')


class UtilsTests(MagWeylTestsBase):

    def test_gauss_legendre_exactness(self):
        t, w = utils.gauss_legendre(4, 0.0, 2.0)
        self.assertAlmostEqual(np.sum(w * t ** 7), 2.0 ** 8 / 8, places=12)

    def test_simplex_rule(self):
        a, b, w = utils.simplex_rule(6)
        self.assertAlmostEqual(np.sum(w), 0.5, places=14)
        self.assertAlmostEqual(np.sum(w * a), 1.0 / 6, places=14)
        # int a^2 b^3 over the simplex = 2! 3! / 7!
        self.assertAlmostEqual(np.sum(w * a ** 2 * b ** 3), 12.0 / 5040, places=14)

    def test_trig_interpolate_band_limited(self):
        n, period = 32, 2 * np.pi
        x = (np.arange(n) - n // 2) * period / n
        values = np.cos(3 * x)[:, None] * np.sin(2 * x)[None, :]
        pts = self.rng.uniform(-3.0, 3.0, size=(10, 2))
        expected = np.cos(3 * pts[:, 0]) * np.sin(2 * pts[:, 1])
        self.assertAllClose(utils.trig_interpolate(values, (period, period), pts), expected, 1e-12)

    def test_fit_slope_drops_plateau(self):
        xs = 2.0 ** -np.arange(2, 10)
        ys = 3.0 * xs ** 3
        ys[-2:] = 1e-20
        slope, used = utils.fit_slope(xs, ys, floor=1e-16)
        self.assertAlmostEqual(slope, 3.0, places=8)
        self.assertEqual(int(np.count_nonzero(used)), 6)

    def test_odd_fft_rejected(self):
        with self.assertRaises(DomainError):
            utils.centered_fft(np.zeros(7), 0)


if __name__ == '__main__':
    unittest.main()
