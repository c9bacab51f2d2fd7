# SPDX-License-Identifier: GPL-2.0-or-later

"""Discretized configuration and phase space.

A ``GridSpec`` describes the periodic position grid x_j = (j - N/2) dx on
[-L/2, L/2)^d and its FFT-dual momentum grid xi_k = (k - N/2) dxi with
dxi = 2 pi hbar / L. ``SymbolField`` holds samples over the (x, xi) product
grid (x axes first), ``WaveFunction`` over the position grid.
"""

import dataclasses
import json
import logging

import numpy as np

from magweyl import utils
from magweyl.defs import (GridMismatchError, NonFiniteSampleError, DomainError,
                          MIN_POINTS, MAX_DIMENSION)
from magweyl.expressions import Expression, phase_space_expression, position_expression


def get_logger():
    return logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class GridSpec:
    dimension: int
    half_length: float
    points: int
    momentum_scale: float = 1.0

    def __post_init__(self):
        if self.dimension not in range(1, MAX_DIMENSION + 1):
            raise DomainError('grid dimension must be 1 or 2, got %r' % (self.dimension,))
        n = int(self.points)
        if n < MIN_POINTS or n & (n - 1):
            raise DomainError('points per axis must be a power of two >= %d, got %r' % (MIN_POINTS, self.points))
        if not self.half_length > 0:
            raise DomainError('box half-length must be positive, got %r' % (self.half_length,))
        if not self.momentum_scale > 0:
            raise DomainError('momentum scale must be positive, got %r' % (self.momentum_scale,))

    @property
    def period(self):
        return 2.0 * self.half_length

    @property
    def dx(self):
        return self.period / self.points

    @property
    def dxi(self):
        return 2.0 * np.pi * self.momentum_scale / self.period

    @property
    def momentum_period(self):
        return self.points * self.dxi

    @property
    def positions(self):
        return (np.arange(self.points) - self.points // 2) * self.dx

    @property
    def momenta(self):
        return (np.arange(self.points) - self.points // 2) * self.dxi

    @property
    def position_shape(self):
        return (self.points,) * self.dimension

    @property
    def phase_shape(self):
        return (self.points,) * (2 * self.dimension)

    @property
    def cell_volume(self):
        return self.dx ** self.dimension

    @property
    def phase_cell(self):
        return (self.dx * self.dxi) ** self.dimension

    def axis_periods(self):
        """Periods of the 2d phase-space axes."""
        return (self.period,) * self.dimension + (self.momentum_period,) * self.dimension

    def position_mesh(self):
        return np.meshgrid(*([self.positions] * self.dimension), indexing='ij')

    def phase_mesh(self):
        axes = [self.positions] * self.dimension + [self.momenta] * self.dimension
        return np.meshgrid(*axes, indexing='ij')

    def position_points(self):
        """Position nodes as an array of shape (N^d, d), row-major."""
        return np.stack([m.ravel() for m in self.position_mesh()], axis=-1)

    def with_momentum_scale(self, momentum_scale):
        return dataclasses.replace(self, momentum_scale=float(momentum_scale))

    def wrap(self, positions):
        """Map positions back onto [-L/2, L/2)."""
        return (np.asarray(positions) + self.half_length) % self.period - self.half_length

    def check_same(self, other):
        if self != other:
            raise GridMismatchError('grid mismatch: %s vs %s' % (self, other))

    def to_dict(self):
        return {
            'dims': self.dimension,
            'points': self.points,
            'half_length': self.half_length,
            'momentum_scale': self.momentum_scale,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(int(data['dims']), float(data['half_length']), int(data['points']),
                   float(data.get('momentum_scale', 1.0)))


def _freeze(values):
    values = np.array(values, dtype=complex)
    values.setflags(write=False)
    return values


def _encode_complex(values):
    flat = np.asarray(values).ravel()
    return [[float(v.real), float(v.imag)] for v in flat]


def _decode_complex(pairs, shape):
    arr = np.asarray(pairs, dtype=float)
    return (arr[:, 0] + 1j * arr[:, 1]).reshape(shape)


class SymbolField:
    """ Complex function sampled on the phase-space grid.

        ``order`` is the nominal symbol order (metadata only), ``expression``
        keeps the analytic source when the field was sampled from one so that
        off-grid evaluation can be exact.
    """

    def __init__(self, grid, values, order=None, label='', expression=None):
        values = np.asarray(values)
        if values.shape != grid.phase_shape:
            raise GridMismatchError('symbol values have shape %s, grid expects %s' % (values.shape, grid.phase_shape))
        _check_finite(values, grid.phase_mesh)
        self.grid = grid
        self.values = _freeze(values)
        self.order = order
        self.label = label
        self.expression = expression

    def __repr__(self):
        return 'SymbolField(%s, label=%r)' % (self.grid, self.label)

    def with_values(self, values, label=None):
        return SymbolField(self.grid, values, order=self.order,
                           label=self.label if label is None else label)

    def _operand(self, other):
        if isinstance(other, SymbolField):
            self.grid.check_same(other.grid)
            return other.values
        return other

    def __add__(self, other):
        return self.with_values(self.values + self._operand(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.with_values(self.values - self._operand(other))

    def __mul__(self, other):
        return self.with_values(self.values * self._operand(other))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def conj(self):
        return self.with_values(np.conj(self.values))

    def sup_norm(self):
        return float(np.max(np.abs(self.values)))

    def l2_norm(self):
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.phase_cell))

    def integral(self):
        return complex(np.sum(self.values) * self.grid.phase_cell)

    def nyquist_content(self):
        """Largest Nyquist Fourier coefficient along any phase-space axis,
        relative to the largest coefficient of that transform.

        Half-grid shifts, kernels and products built from the samples are
        accurate to about this level.
        """
        values = np.asarray(self.values, dtype=complex)
        content = 0.0
        for axis in range(values.ndim):
            coeffs = np.abs(utils.centered_fft(values, axis))
            peak = float(np.max(coeffs))
            if peak > 0.0:
                content = max(content, float(np.max(np.take(coeffs, 0, axis=axis))) / peak)
        return content

    def evaluate(self, points):
        """Values at scattered phase-space points of shape (M, 2d).

        Uses the analytic source when present, trigonometric interpolation of
        the samples otherwise.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.expression is not None:
            return np.asarray(self.expression(*points.T), dtype=complex)
        return utils.trig_interpolate(self.values, self.grid.axis_periods(), points)

    def to_dict(self):
        data = {'kind': 'SymbolField', 'label': self.label, 'order': self.order}
        data.update(self.grid.to_dict())
        data['values'] = _encode_complex(self.values)
        return data

    @classmethod
    def from_dict(cls, data):
        grid = GridSpec.from_dict(data)
        return cls(grid, _decode_complex(data['values'], grid.phase_shape),
                   order=data.get('order'), label=data.get('label', ''))


class WaveFunction:
    """ Complex function sampled on the position grid.
    """

    def __init__(self, grid, values, label=''):
        values = np.asarray(values)
        if values.shape != grid.position_shape:
            raise GridMismatchError('wave values have shape %s, grid expects %s' % (values.shape, grid.position_shape))
        _check_finite(values, grid.position_mesh)
        self.grid = grid
        self.values = _freeze(values)
        self.label = label
        self._norm = None

    def __repr__(self):
        return 'WaveFunction(%s, label=%r)' % (self.grid, self.label)

    @property
    def norm(self):
        if self._norm is None:
            self._norm = float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.cell_volume))
        return self._norm

    def inner(self, other):
        """<self, other> with quadrature weight dx^d, antilinear in self."""
        self.grid.check_same(other.grid)
        return complex(np.vdot(self.values, other.values) * self.grid.cell_volume)

    @property
    def flat(self):
        return self.values.ravel()

    def to_dict(self):
        data = {'kind': 'WaveFunction', 'label': self.label}
        data.update(self.grid.to_dict())
        data['values'] = _encode_complex(self.values)
        return data

    @classmethod
    def from_dict(cls, data):
        grid = GridSpec.from_dict(data)
        return cls(grid, _decode_complex(data['values'], grid.position_shape), label=data.get('label', ''))


def _check_finite(values, mesh_factory):
    bad = ~np.isfinite(values)
    if np.any(bad):
        mesh = mesh_factory()
        idx = np.argwhere(bad)[:5]
        nodes = [tuple(float(m[tuple(i)]) for m in mesh) for i in idx]
        raise NonFiniteSampleError('non-finite samples at %d nodes, first at %s' % (np.count_nonzero(bad), nodes[0]),
                                   nodes)


def _as_expression(expr, factory, dim):
    if isinstance(expr, Expression):
        return expr
    if isinstance(expr, (str, int, float, complex)):
        return factory(expr, dim)
    return None


def sample_symbol(expr, grid, order=None, label=''):
    """Pointwise samples of an expression (or callable of 2d arrays) on the
    phase-space grid."""
    source = _as_expression(expr, phase_space_expression, grid.dimension)
    mesh = grid.phase_mesh()
    if source is not None:
        values = source(*mesh)
    else:
        values = np.asarray(expr(*mesh))
    values = np.broadcast_to(np.asarray(values, dtype=complex), grid.phase_shape)
    return SymbolField(grid, values, order=order, label=label or str(expr), expression=source)


def sample_wave(expr, grid, label=''):
    source = _as_expression(expr, position_expression, grid.dimension)
    mesh = grid.position_mesh()
    values = source(*mesh) if source is not None else np.asarray(expr(*mesh))
    values = np.broadcast_to(np.asarray(values, dtype=complex), grid.position_shape)
    return WaveFunction(grid, values, label=label or str(expr))


def symplectic_fourier(f):
    """Discrete (2 pi hbar)^-d int exp(i sigma(X, X') / hbar) f(X') dX' with
    sigma(X, X') = xi.x' - x.xi'. Exactly involutive on the grid."""
    d = f.grid.dimension
    coeffs = f.values
    for axis in range(d, 2 * d):
        coeffs = utils.centered_fft(coeffs, axis)
    for axis in range(d):
        coeffs = utils.centered_ifft(coeffs, axis)
    # x' slots now carry the output xi index and vice versa
    order = tuple(range(d, 2 * d)) + tuple(range(d))
    return f.with_values(np.transpose(coeffs, order), label='F_sigma(%s)' % f.label)


def derivative_values(values, grid, orders):
    """Spectral mixed derivative of phase-space samples.

    orders : tuple of 2d non-negative ints (x axes first).
    """
    values = np.asarray(values, dtype=complex)
    periods = grid.axis_periods()
    for axis, order in enumerate(orders):
        if order == 0:
            continue
        mult = utils.derivative_multiplier(grid.points, periods[axis], order)
        shape = [1] * values.ndim
        shape[axis] = grid.points
        values = utils.centered_ifft(mult.reshape(shape) * utils.centered_fft(values, axis), axis)
    return values


def spectral_derivative(f, axis, variable='position', order=1):
    """FFT derivative of a SymbolField along one position or momentum axis."""
    d = f.grid.dimension
    if not 0 <= axis < d:
        raise DomainError('axis %r out of range for dimension %d' % (axis, d))
    if variable not in ('position', 'momentum'):
        raise DomainError("variable must be 'position' or 'momentum', got %r" % (variable,))
    orders = [0] * (2 * d)
    orders[axis if variable == 'position' else d + axis] = order
    return f.with_values(derivative_values(f.values, f.grid, tuple(orders)))


def save_json(obj, path):
    with open(path, 'w') as f:
        json.dump(obj.to_dict(), f)


def load_json(path):
    with open(path, 'r') as f:
        data = json.load(f)
    kinds = {'SymbolField': SymbolField, 'WaveFunction': WaveFunction}
    if data.get('kind') not in kinds:
        raise DomainError('unknown container kind %r' % data.get('kind'))
    return kinds[data['kind']].from_dict(data)
