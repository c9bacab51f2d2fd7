# SPDX-License-Identifier: GPL-2.0-or-later

"""Magnetic Weyl quantization on the periodic position grid.

An ``OperatorKernel`` stores the matrix M with (M u)_i = sum_j M_ij u_j, i.e.
the integral kernel times dx^d. For the pair (i, j = i + n), n taken in
[-N/2, N/2) per axis, the entry is

    M_ij = N^-d exp(-i lambda/eps Gamma_sym(i, j)) fcheck(c_ij, n),
    fcheck(c, n) = sum_k exp(-2 pi i n.(k - N/2)/N) f(c, xi_k),

with c_ij the midpoint of the torus segment from x_i to x_j, reached by
trigonometric interpolation. On a Nyquist axis (n_a = -N/2) the segment
points inward: +L/2 from the left half of the box, -L/2 from the right half.
Gamma_sym is the circulation antisymmetrized over the two periodic images of
the segment, which keeps real symbols Hermitian and makes L-periodic gauge
changes act exactly by conjugation.
"""

import logging

import numpy as np

from magweyl import utils
from magweyl.defs import (CrossCheckError, GridMismatchError, OffGridTranslationError, NonHermitianError, DomainError,
                          EXPECTATION_TOL, HERMITICITY_TOL, OFF_GRID_TOL)
from magweyl.geometry import VectorPotential, circulation
from magweyl.grid import GridSpec, SymbolField, WaveFunction, symplectic_fourier


def get_logger():
    return logging.getLogger(__name__)


def _encode_matrix(matrix):
    flat = np.asarray(matrix).ravel()
    return [[float(v.real), float(v.imag)] for v in flat]


class OperatorKernel:
    """ Dense operator on the position grid with its gauge label and the
        (eps, lambda) it was built for.
    """

    def __init__(self, grid, matrix, gauge=None, params=None):
        size = grid.points ** grid.dimension
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (size, size):
            raise GridMismatchError('kernel has shape %s, grid expects %s' % (matrix.shape, (size, size)))
        self.grid = grid
        self.matrix = matrix
        self.gauge = gauge
        self.params = params

    def __repr__(self):
        return 'OperatorKernel(%s, gauge=%r, params=%r)' % (self.grid, self.gauge, self.params)

    @property
    def kernel(self):
        """Continuum kernel values K(x_i, x_j)."""
        return self.matrix / self.grid.cell_volume

    def adjoint(self):
        return OperatorKernel(self.grid, self.matrix.conj().T, self.gauge, self.params)

    def with_matrix(self, matrix):
        return OperatorKernel(self.grid, matrix, self.gauge, self.params)

    def hermiticity_residual(self):
        scale = max(1.0, float(np.max(np.abs(self.matrix))))
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T))) / scale

    def check_hermitian(self, tol=HERMITICITY_TOL):
        residual = self.hermiticity_residual()
        if residual > tol:
            raise NonHermitianError('kernel is not Hermitian: relative residual %.3e > %.1e' % (residual, tol))
        return residual

    def __matmul__(self, other):
        return compose_kernels(self, other)

    def to_dict(self):
        data = {'kind': 'OperatorKernel', 'gauge': self.gauge}
        data.update(self.grid.to_dict())
        if self.params is not None:
            data['eps'] = self.params.eps
            data['lambda'] = self.params.lam
        data['values'] = _encode_matrix(self.matrix)
        return data

    @classmethod
    def from_dict(cls, data):
        from magweyl.geometry import Parameters
        grid = GridSpec.from_dict(data)
        size = grid.points ** grid.dimension
        arr = np.asarray(data['values'], dtype=float)
        params = Parameters(data['eps'], data['lambda']) if 'eps' in data else None
        return cls(grid, (arr[:, 0] + 1j * arr[:, 1]).reshape(size, size), data.get('gauge'), params)


def _check_scale(grid, params):
    if not np.isclose(grid.momentum_scale, params.eps, rtol=1e-12, atol=0.0):
        raise GridMismatchError('grid momentum scale %r does not match eps = %r' % (grid.momentum_scale, params.eps))


def _gauge_label(potential):
    return 'zero' if potential is None else potential.gauge


def _needs_phase(potential, params):
    return potential is not None and not potential.is_zero and params.lam != 0.0


# ******* pair bookkeeping ******************************
# Pair arrays have axes (i_1..i_d, p_1..p_d) with step n_a = p_a - N/2.

def _pair_indices(grid):
    n, d = grid.points, grid.dimension
    mesh = np.meshgrid(*([np.arange(n)] * (2 * d)), indexing='ij')
    rows = mesh[:d]
    steps = [p - n // 2 for p in mesh[d:]]
    cols = [(i + s) % n for i, s in zip(rows, steps)]
    return rows, steps, cols


def _displacement(index, step, grid):
    nyquist = step == -(grid.points // 2)
    inward = np.where(index < grid.points // 2, grid.half_length, -grid.half_length)
    return np.where(nyquist, inward, step * grid.dx)


def symmetric_circulation(potential, grid):
    """Gamma_sym over all pairs, shaped like the pair arrays."""
    n = grid.points
    rows, steps, cols = _pair_indices(grid)
    x = grid.positions
    start = np.stack([x[i] for i in rows], axis=-1)
    end = np.stack([x[j] for j in cols], axis=-1)
    forward = np.stack([_displacement(i, s, grid) for i, s in zip(rows, steps)], axis=-1)
    reverse = [(-s + n // 2) % n - n // 2 for s in steps]
    backward = np.stack([_displacement(j, s, grid) for j, s in zip(cols, reverse)], axis=-1)
    return 0.5 * (circulation(potential, start, start + forward) - circulation(potential, end, end + backward))


def _shift_axis(values, grid, axis, sign):
    """Move the pair values along position axis ``axis`` by sign * n dx / 2."""
    n, d = grid.points, grid.dimension
    steps = np.arange(n) - n // 2
    mult = utils.shift_multiplier(n, grid.period, sign * 0.5 * steps * grid.dx)
    shape = [1] * (2 * d)
    shape[axis] = n
    shape[d + axis] = n
    shifted = utils.centered_ifft(mult.T.reshape(shape) * utils.centered_fft(values, axis), axis)

    nyq = [slice(None)] * (2 * d)
    nyq[d + axis] = slice(0, 1)
    nyq = tuple(nyq)
    slab = values[nyq]
    if sign > 0:
        left = (np.arange(n) < n // 2).reshape([n if a == axis else 1 for a in range(2 * d)])
        shifted[nyq] = np.where(left, np.roll(slab, -(n // 4), axis=axis), np.roll(slab, n // 4, axis=axis))
    else:
        # every midpoint is reached from one base in each half of the box
        rep = n // 4 + (np.arange(n) - n // 4) % (n // 2)
        shifted[nyq] = 0.5 * (np.take(slab, rep - n // 4, axis=axis) + np.take(slab, rep + n // 4, axis=axis))
    return shifted


def _scatter(pairs, grid):
    n, d = grid.points, grid.dimension
    rows, _, cols = _pair_indices(grid)
    full = np.zeros((n,) * (2 * d), dtype=complex)
    full[tuple(rows) + tuple(cols)] = pairs
    return full.reshape(n ** d, n ** d)


def _gather(matrix, grid):
    n, d = grid.points, grid.dimension
    rows, _, cols = _pair_indices(grid)
    return matrix.reshape((n,) * (2 * d))[tuple(rows) + tuple(cols)]


# ******* quantization ******************************

def quantize(f, potential, params):
    """Op^A_eps,lambda(f) as an OperatorKernel on f's position grid."""
    grid = f.grid
    _check_scale(grid, params)
    d = grid.dimension
    get_logger().debug('Quantize %s on %s (eps=%g, lambda=%g, gauge=%s)', f.label, grid, params.eps, params.lam,
                       _gauge_label(potential))
    pairs = np.asarray(f.values, dtype=complex)
    for axis in range(d, 2 * d):
        pairs = utils.centered_fft(pairs, axis)
    for axis in range(d):
        pairs = _shift_axis(pairs, grid, axis, +1)
    pairs = pairs / grid.points ** d
    if _needs_phase(potential, params):
        pairs = pairs * np.exp(-1j * params.lam / params.eps * symmetric_circulation(potential, grid))
    return OperatorKernel(grid, _scatter(pairs, grid), _gauge_label(potential), params)


def dequantize(kernel, potential, params):
    """Inverse of quantize; exact on symbols without Nyquist content."""
    grid = kernel.grid
    _check_scale(grid, params)
    if kernel.gauge is not None and kernel.gauge != _gauge_label(potential):
        raise GridMismatchError('kernel built in gauge %r, dequantizing in %r' % (kernel.gauge,
                                                                                 _gauge_label(potential)))
    d = grid.dimension
    pairs = _gather(kernel.matrix, grid) * grid.points ** d
    if _needs_phase(potential, params):
        pairs = pairs * np.exp(1j * params.lam / params.eps * symmetric_circulation(potential, grid))
    for axis in range(d):
        pairs = _shift_axis(pairs, grid, axis, -1)
    for axis in range(d, 2 * d):
        pairs = utils.centered_ifft(pairs, axis)
    return SymbolField(grid, pairs, label='deq')


def wigner(u, v, potential, params):
    """Magnetic Wigner transform W(u, v) = dequantize(dx^d u v^*).

    Satisfies <v, Op(f) u> = (2 pi eps)^-d sum f W dx^d dxi^d and
    (2 pi eps)^-d sum_xi W(u, u) dxi^d = |u|^2.
    """
    u.grid.check_same(v.grid)
    grid = u.grid
    rho = np.outer(u.flat, np.conj(v.flat)) * grid.cell_volume
    w = dequantize(OperatorKernel(grid, rho, _gauge_label(potential), params), potential, params)
    return w.with_values(w.values, label='W(%s,%s)' % (u.label, v.label))


def compose_kernels(first, second):
    """Operator product first * second."""
    first.grid.check_same(second.grid)
    if first.gauge != second.gauge:
        raise GridMismatchError('cannot compose kernels in gauges %r and %r' % (first.gauge, second.gauge))
    if first.params != second.params:
        raise GridMismatchError('cannot compose kernels built for %r and %r' % (first.params, second.params))
    return OperatorKernel(first.grid, first.matrix @ second.matrix, first.gauge, first.params)


def apply_kernel(kernel, u):
    kernel.grid.check_same(u.grid)
    return WaveFunction(u.grid, (kernel.matrix @ u.flat).reshape(u.grid.position_shape), label=u.label)


def phase_space_average(f, u, v, potential, params):
    """(2 pi eps)^-d sum f W(u, v) dx^d dxi^d."""
    w = wigner(u, v, potential, params)
    return complex(np.sum(f.values * w.values) / f.grid.points ** f.grid.dimension)


def expectation(f, u, v, potential, params, tol=EXPECTATION_TOL):
    """<v, Op(f) u>, cross-checked against the phase-space average.

    Raises CrossCheckError when the two differ by more than ``tol`` relative
    to max(|<v, Op(f) u>|, sup|f| |u| |v|).
    """
    f.grid.check_same(u.grid)
    kernel = quantize(f, potential, params)
    direct = v.inner(apply_kernel(kernel, u))
    average = phase_space_average(f, u, v, potential, params)
    scale = max(abs(direct), f.sup_norm() * u.norm * v.norm)
    get_logger().debug('Expectation %s: direct %r, phase-space %r', f.label, direct, average)
    if abs(direct - average) > tol * scale:
        raise CrossCheckError('<v, Op(%s) u> = %r but the phase-space average gives %r' % (f.label, direct, average))
    return direct


def gauge_unitary(chi, grid, params):
    """Diagonal of the unitary exp(i lambda/eps chi(x)) relating the gauges
    A and A + grad chi: Op^{A + grad chi}(f) = U Op^A(f) U^*."""
    return np.exp(1j * params.lam / params.eps * chi(grid.position_points()))


def operator_norm(kernel):
    """Largest singular value."""
    return float(np.linalg.norm(kernel.matrix, 2))


def fourier_norm_bound(f):
    """(2 pi hbar)^-d ||F_sigma f||_1 on the grid, an upper bound for the
    operator norm of Op(f)."""
    return float(np.sum(np.abs(symplectic_fourier(f).values)) / f.grid.points ** f.grid.dimension)


# ******* magnetic Weyl system ******************************

def weyl_system_apply(point, potential, params, u):
    """(W(X) u)(q) = exp(-i lambda/eps Gamma^A([q, q + eps y])) exp(-i eta.(q + eps y / 2)) u(q + eps y)
    for X = (y, eta); eps y must be a multiple of the grid spacing."""
    grid = u.grid
    d = grid.dimension
    point = np.asarray(point, dtype=float)
    if point.shape != (2 * d,):
        raise DomainError('phase-space point must have %d components, got shape %s' % (2 * d, point.shape))
    y, eta = point[:d], point[d:]
    steps = params.eps * y / grid.dx
    nodes = np.round(steps)
    if np.max(np.abs(steps - nodes)) > OFF_GRID_TOL * max(1.0, float(np.max(np.abs(steps)))):
        raise OffGridTranslationError('translation %s is not a multiple of dx = %g' % (params.eps * y, grid.dx))
    shift = nodes * grid.dx
    values = np.roll(u.values, tuple(-int(s) for s in nodes), axis=tuple(range(d)))
    q = np.stack(grid.position_mesh(), axis=-1)
    phase = -np.tensordot(q + 0.5 * shift, eta, axes=([-1], [0]))
    if _needs_phase(potential, params):
        phase = phase - params.lam / params.eps * circulation(potential, q, q + shift)
    return WaveFunction(grid, np.exp(1j * phase) * values, label='W%s(%s)' % (tuple(point), u.label))
